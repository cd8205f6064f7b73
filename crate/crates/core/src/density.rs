//! Log-concave probability densities `η = e^{-V} dx / Z`.

use std::sync::OnceLock;

use crate::cells;
use crate::error::{Error, Result};
use crate::extended::INF;
use crate::grid::{Axis, GridFunction, Symmetry};
use crate::maxaffine::MaxAffine;
use crate::quadrature::{self, Quad};
use crate::spec::FunctionSpec;

/// The convex potential `V` of a density.
#[derive(Clone, Debug, PartialEq)]
pub enum Potential {
    Grid(GridFunction),
    MaxAffine(MaxAffine),
}

impl Potential {
    pub fn dim(&self) -> usize {
        match self {
            Potential::Grid(g) => g.dim(),
            Potential::MaxAffine(v) => v.dim(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Potential::Grid(g) => g.eval(x),
            Potential::MaxAffine(v) => v.eval(x),
        }
    }
}

/// Reference measure `m` for relative entropies and log-Laplace transforms.
#[derive(Clone, Debug, PartialEq)]
pub enum ReferenceMeasure {
    Lebesgue,
    /// Standard Gaussian in the dimension of the other argument.
    Gaussian,
    /// `dm = e^{-W} dx` with `W` convex.
    LogConcave(GridFunction),
}

impl ReferenceMeasure {
    pub fn log_concave(w: GridFunction) -> Result<Self> {
        if !w.is_convex() {
            return Err(Error::InvalidFunction("reference potential W must be convex".into()));
        }
        Ok(ReferenceMeasure::LogConcave(w))
    }

    /// `-log(dm/dx)` at `x`.
    pub fn potential(&self, x: &[f64]) -> f64 {
        match self {
            ReferenceMeasure::Lebesgue => 0.0,
            ReferenceMeasure::Gaussian => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                0.5 * r2 + 0.5 * x.len() as f64 * (2.0 * std::f64::consts::PI).ln()
            }
            ReferenceMeasure::LogConcave(w) => w.eval(x),
        }
    }
}

/// Expectations under `η` that every functional is built from.
#[derive(Clone, Copy, Debug)]
pub struct Moments {
    /// `∫ V dη`
    pub potential: Quad,
    /// `∫ |x|² dη`
    pub second: Quad,
    /// `∫ |∇V|² dη`
    pub grad_sq: Quad,
    /// `∫ x·∇V dη`
    pub x_dot_grad: Quad,
    /// `∫ |∇V - x|² dη`
    pub residual_sq: Quad,
}

/// A log-concave probability density.
#[derive(Clone, Debug)]
pub struct LogConcaveDensity {
    name: String,
    potential: Potential,
    log_norm: Quad,
    symmetry: Symmetry,
    essentially_continuous: bool,
    sampled: OnceLock<GridFunction>,
}

const HALF_WIDTH: f64 = 12.0;

fn sym_axis(r: f64, h: f64) -> Result<Axis> {
    let cells = (2.0 * r / h).round() as usize;
    Axis::new(-r, r, cells + 1)
}

fn sample_max_affine(v: &MaxAffine, symmetry: Symmetry) -> Result<GridFunction> {
    let vmin = -v.conjugate(&vec![0.0; v.dim()]);
    let (r, h) = if v.dim() == 1 {
        let mut r: f64 = 2.0;
        for t in v.breakpoints_1d() {
            r = r.max(t.abs() + 2.0);
        }
        for j in 0..v.len() {
            let (y, b) = (v.slopes()[j][0], v.intercepts()[j]);
            r = r.max((36.0 + vmin + b) / y.abs());
        }
        (r, 1.0 / 64.0)
    } else {
        let bmax = v.intercepts().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (((30.0 + bmax + vmin) / v.inradius()).max(2.0), 1.0 / 16.0)
    };
    let axes = vec![sym_axis(r.ceil(), h)?; v.dim()];
    let g = GridFunction::from_fn(axes, Symmetry::None, |x| v.eval(x))?;
    Ok(g.clone().with_symmetry(symmetry).unwrap_or(g))
}

impl LogConcaveDensity {
    /// Density with a sampled potential. The normalization is computed by
    /// quadrature. `essentially_continuous` overrides the flag; by default it
    /// is decided from the samples in 1D and assumed in 2D unless the
    /// potential has `+∞` nodes.
    pub fn from_grid(name: &str, v: GridFunction, essentially_continuous: Option<bool>) -> Result<Self> {
        if !v.is_convex() {
            return Err(Error::InvalidDensity(format!("potential of '{name}' is not convex")));
        }
        let log_norm = quadrature::log_integral_exp_neg(&v)?;
        if !log_norm.value.is_finite() {
            return Err(Error::InvalidDensity(format!("e^(-V) of '{name}' is not integrable")));
        }
        let ess = essentially_continuous
            .or_else(|| v.essentially_continuous_1d())
            .unwrap_or(!v.has_infinite());
        Ok(LogConcaveDensity {
            name: name.to_string(),
            symmetry: v.symmetry(),
            potential: Potential::Grid(v),
            log_norm,
            essentially_continuous: ess,
            sampled: OnceLock::new(),
        })
    }

    /// Density with a max-affine potential; the normalization is exact.
    pub fn from_max_affine(name: &str, v: MaxAffine, symmetry: Symmetry) -> Result<Self> {
        let c = cells::cell_moments(&v, 0).map_err(|e| match e {
            Error::NotAdmissible(m) => Error::InvalidDensity(m),
            e => e,
        })?;
        Ok(LogConcaveDensity {
            name: name.to_string(),
            potential: Potential::MaxAffine(v),
            log_norm: Quad {
                value: c.log_z,
                est_error: 1e-15 * (1.0 + c.log_z.abs()),
            },
            symmetry,
            essentially_continuous: true,
            sampled: OnceLock::new(),
        })
    }

    /// Density `∝ e^{-f}` for a spec'd function, using the exact max-affine
    /// form when the family has one.
    pub fn from_spec(spec: &FunctionSpec) -> Result<Self> {
        match spec.max_affine() {
            Some(v) => LogConcaveDensity::from_max_affine(&spec.name, v?, spec.symmetry),
            None => LogConcaveDensity::from_grid(&spec.name, spec.to_grid()?, None),
        }
    }

    /// Standard Gaussian `γ_n`, `n ∈ {1, 2}`.
    pub fn gaussian(n: usize) -> Result<Self> {
        LogConcaveDensity::normal(&vec![0.0; n], 1.0)
    }

    /// `N(mean, σ² I)` with a grid potential covering ±12σ.
    pub fn normal(mean: &[f64], sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
        }
        let (axes, sym) = match mean.len() {
            1 => (
                vec![Axis::new(
                    mean[0] - HALF_WIDTH * sigma,
                    mean[0] + HALF_WIDTH * sigma,
                    1537,
                )?],
                if mean[0] == 0.0 {
                    Symmetry::Symmetric
                } else {
                    Symmetry::None
                },
            ),
            2 => (
                mean.iter()
                    .map(|&m| Axis::new(m - 10.0 * sigma, m + 10.0 * sigma, 481))
                    .collect::<Result<Vec<_>>>()?,
                if mean.iter().all(|&m| m == 0.0) {
                    Symmetry::Unconditional
                } else {
                    Symmetry::None
                },
            ),
            d => return Err(Error::Dimension(format!("Gaussian densities are 1D or 2D, got {d}"))),
        };
        let s2 = sigma * sigma;
        let v = GridFunction::from_fn(axes, sym, |x| {
            x.iter().zip(mean).map(|(a, m)| (a - m) * (a - m)).sum::<f64>() / (2.0 * s2)
        })?;
        let name = if sigma == 1.0 && mean.iter().all(|&m| m == 0.0) {
            format!("gamma_{}", mean.len())
        } else {
            "normal".to_string()
        };
        LogConcaveDensity::from_grid(&name, v, Some(true))
    }

    /// `τ(dx) = e^{-(1+x)} 1_{[-1,∞)}(x) dx`.
    pub fn tau() -> Result<Self> {
        let axis = Axis::with_spacing(-2.0, 1.0 / 64.0, 40 * 64)?;
        let v = GridFunction::from_fn_1d(axis, Symmetry::None, |x| if x >= -1.0 { 1.0 + x } else { INF })?;
        LogConcaveDensity::from_grid("tau", v, None)
    }

    /// `τ̄`, the reflection of `τ`.
    pub fn tau_bar() -> Result<Self> {
        let axis = Axis::with_spacing(-38.0, 1.0 / 64.0, 40 * 64)?;
        let v = GridFunction::from_fn_1d(axis, Symmetry::None, |x| if x <= 1.0 { 1.0 - x } else { INF })?;
        LogConcaveDensity::from_grid("tau_bar", v, None)
    }

    /// `τ_s^{⊗n}`, `τ_s(dx) = ½ e^{-|x|} dx`, as an exact max-affine
    /// potential `V = ‖x‖₁`.
    pub fn tau_s(n: usize) -> Result<Self> {
        let (slopes, sym) = match n {
            1 => (vec![vec![-1.0], vec![1.0]], Symmetry::Symmetric),
            2 => (
                vec![vec![-1.0, -1.0], vec![-1.0, 1.0], vec![1.0, -1.0], vec![1.0, 1.0]],
                Symmetry::Unconditional,
            ),
            d => return Err(Error::Dimension(format!("tau_s is provided for n = 1, 2, got {d}"))),
        };
        let m = slopes.len();
        let v = MaxAffine::new(slopes, vec![0.0; m])?;
        LogConcaveDensity::from_max_affine(if n == 1 { "tau_s" } else { "tau_s_2" }, v, sym)
    }

    /// Built-in densities by name: `gamma_1`, `gamma_2`, `tau`, `tau_bar`,
    /// `tau_s`, `tau_s_2`.
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "gamma_1" => LogConcaveDensity::gaussian(1),
            "gamma_2" => LogConcaveDensity::gaussian(2),
            "tau" => LogConcaveDensity::tau(),
            "tau_bar" => LogConcaveDensity::tau_bar(),
            "tau_s" => LogConcaveDensity::tau_s(1),
            "tau_s_2" => LogConcaveDensity::tau_s(2),
            _ => Err(Error::InvalidParameter(format!("unknown built-in density '{name}'"))),
        }
    }

    pub const BUILTINS: [&'static str; 6] = ["gamma_1", "gamma_2", "tau", "tau_bar", "tau_s", "tau_s_2"];

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.potential.dim()
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    /// `log Z`, `Z = ∫ e^{-V}`.
    pub fn log_norm(&self) -> Quad {
        self.log_norm
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn essentially_continuous(&self) -> bool {
        self.essentially_continuous
    }

    pub fn with_essential_continuity(mut self, flag: bool) -> Self {
        self.essentially_continuous = flag;
        self
    }

    /// Whether `V` is finite everywhere.
    pub fn is_finite_valued(&self) -> bool {
        match &self.potential {
            Potential::Grid(g) => !g.has_infinite() && (g.dim() == 2 || (g.left_open() && g.right_open())),
            Potential::MaxAffine(_) => true,
        }
    }

    /// Normalized density at `x`.
    pub fn pdf(&self, x: &[f64]) -> f64 {
        (-self.potential.eval(x) - self.log_norm.value).exp()
    }

    /// Law of `λX` for `X ∼ η`, `λ > 0`.
    pub fn dilate(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "dilation factor must be positive, got {lambda}"
            )));
        }
        let n = self.dim() as f64;
        let potential = match &self.potential {
            Potential::Grid(g) => {
                let axes = g
                    .axes()
                    .iter()
                    .map(|a| Axis::new(a.lo * lambda, a.hi * lambda, a.steps))
                    .collect::<Result<Vec<_>>>()?;
                Potential::Grid(GridFunction::new(axes, g.values().to_vec(), g.symmetry())?)
            }
            Potential::MaxAffine(v) => {
                let slopes = v
                    .slopes()
                    .iter()
                    .map(|y| y.iter().map(|c| c / lambda).collect())
                    .collect();
                Potential::MaxAffine(MaxAffine::new(slopes, v.intercepts().to_vec())?)
            }
        };
        Ok(LogConcaveDensity {
            name: format!("{}_dilated", self.name),
            potential,
            log_norm: Quad {
                value: self.log_norm.value + n * lambda.ln(),
                est_error: self.log_norm.est_error,
            },
            symmetry: self.symmetry,
            essentially_continuous: self.essentially_continuous,
            sampled: OnceLock::new(),
        })
    }

    /// The potential sampled on a grid: the grid itself for grid potentials,
    /// otherwise a symmetric box wide enough that `e^{-V}` is below `e^{-36}`
    /// of its peak at the edges, with integer breakpoints landing on nodes.
    pub fn sampled(&self) -> Result<&GridFunction> {
        if let Some(g) = self.sampled.get() {
            return Ok(g);
        }
        let g = match &self.potential {
            Potential::Grid(g) => g.clone(),
            Potential::MaxAffine(v) => sample_max_affine(v, self.symmetry)?,
        };
        Ok(self.sampled.get_or_init(|| g))
    }

    /// `∫ g(x, V(x), ∇V(x)) dη` by quadrature over the sampled potential.
    pub fn expect<G>(&self, g: G) -> Result<Quad>
    where
        G: Fn(&[f64], f64, &[f64]) -> f64,
    {
        let v = self.sampled()?;
        quadrature::integrate_with(v, -self.log_norm.value, g)
    }

    /// `∫ φ dη` for a grid function `φ` (evaluated by interpolation);
    /// `+∞` when `φ = +∞` on a set of positive `η`-mass.
    pub fn expect_grid(&self, phi: &GridFunction) -> Result<Quad> {
        if phi.dim() != self.dim() {
            return Err(Error::Dimension(format!(
                "function is {}D, density is {}D",
                phi.dim(),
                self.dim()
            )));
        }
        let v = self.sampled()?;
        let blocked = (0..v.len()).any(|k| v.values()[k].is_finite() && phi.eval(&v.point(k)).is_infinite());
        if blocked {
            return Ok(Quad {
                value: INF,
                est_error: 0.0,
            });
        }
        quadrature::integrate_with(v, -self.log_norm.value, |x, _, _| phi.eval(x))
    }

    /// The standard expectations, exact for max-affine potentials.
    pub fn moments(&self) -> Result<Moments> {
        match &self.potential {
            Potential::MaxAffine(v) => {
                let c = cells::cell_moments(v, 2)?;
                let n = v.dim();
                let (mut ev, mut x2, mut g2, mut xg, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for (j, m) in c.cells.iter().enumerate() {
                    let y = &v.slopes()[j];
                    let b = v.intercepts()[j];
                    let ym1: f64 = (0..n).map(|i| y[i] * m.m1[i]).sum();
                    let tr: f64 = (0..n).map(|i| m.m2[i * n + i]).sum();
                    let yy: f64 = y.iter().map(|a| a * a).sum();
                    ev += ym1 - b * m.m0;
                    x2 += tr;
                    g2 += yy * m.m0;
                    xg += ym1;
                    r2 += yy * m.m0 - 2.0 * ym1 + tr;
                }
                let q = |v: f64| Quad {
                    value: v,
                    est_error: 1e-14 * (1.0 + v.abs()),
                };
                Ok(Moments {
                    potential: q(ev),
                    second: q(x2),
                    grad_sq: q(g2),
                    x_dot_grad: q(xg),
                    residual_sq: q(r2),
                })
            }
            Potential::Grid(_) => {
                let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();
                Ok(Moments {
                    potential: self.expect(|_, v, _| v)?,
                    second: self.expect(|x, _, _| dot(x, x))?,
                    grad_sq: self.expect(|_, _, d| dot(d, d))?,
                    x_dot_grad: self.expect(|x, _, d| dot(x, d))?,
                    residual_sq: self.expect(|x, _, d| x.iter().zip(d).map(|(a, b)| (b - a) * (b - a)).sum::<f64>())?,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn builtin_normalizations() {
        let g = LogConcaveDensity::gaussian(1).unwrap();
        assert!((g.log_norm().value - 0.5 * (2.0 * PI).ln()).abs() < 1e-12);
        let g2 = LogConcaveDensity::gaussian(2).unwrap();
        assert!((g2.log_norm().value - (2.0 * PI).ln()).abs() < 1e-9);
        let t = LogConcaveDensity::tau().unwrap();
        assert!(t.log_norm().value.abs() < 1e-12);
        assert!(!t.essentially_continuous());
        let tb = LogConcaveDensity::tau_bar().unwrap();
        assert!(tb.log_norm().value.abs() < 1e-12);
        let s = LogConcaveDensity::tau_s(1).unwrap();
        assert!((s.log_norm().value - 2f64.ln()).abs() < 1e-15);
        let s2 = LogConcaveDensity::tau_s(2).unwrap();
        assert!((s2.log_norm().value - 4f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn gaussian_moments() {
        let g = LogConcaveDensity::gaussian(1).unwrap();
        let m = g.moments().unwrap();
        assert!((m.second.value - 1.0).abs() < 1e-12);
        assert!((m.potential.value - 0.5).abs() < 1e-12);
        assert!(m.residual_sq.value.abs() < 1e-20);
        let g2 = LogConcaveDensity::gaussian(2).unwrap();
        let m = g2.moments().unwrap();
        assert!((m.x_dot_grad.value - 2.0).abs() < 1e-8);
    }

    #[test]
    fn tau_moments() {
        let t = LogConcaveDensity::tau().unwrap();
        let m = t.moments().unwrap();
        // X + 1 ~ Exp(1)
        assert!((m.potential.value - 1.0).abs() < 1e-12);
        assert!((m.second.value - 1.0).abs() < 1e-12);
        assert!((m.residual_sq.value - 2.0).abs() < 1e-10);
    }

    #[test]
    fn tau_s_moments_exact_and_sampled() {
        let s = LogConcaveDensity::tau_s(1).unwrap();
        let m = s.moments().unwrap();
        assert!((m.second.value - 2.0).abs() < 1e-14);
        assert!((m.residual_sq.value - 1.0).abs() < 1e-14);
        let q = s.expect(|x, _, _| x[0] * x[0]).unwrap();
        assert!((q.value - 2.0).abs() < 1e-10);
        let s2 = LogConcaveDensity::tau_s(2).unwrap();
        let m = s2.moments().unwrap();
        assert!((m.x_dot_grad.value - 2.0).abs() < 1e-13);
        assert!((m.potential.value - 2.0).abs() < 1e-13);
    }

    #[test]
    fn dilation() {
        let g = LogConcaveDensity::gaussian(1).unwrap().dilate(3.0).unwrap();
        let m = g.moments().unwrap();
        assert!((m.second.value - 9.0).abs() < 1e-10);
        let s = LogConcaveDensity::tau_s(1).unwrap().dilate(0.5).unwrap();
        assert!((s.moments().unwrap().second.value - 0.5).abs() < 1e-14);
        assert!(LogConcaveDensity::tau_s(1).unwrap().dilate(0.0).is_err());
    }

    #[test]
    fn expect_grid_support() {
        let t = LogConcaveDensity::tau().unwrap();
        let axis = Axis::new(-2.0, 10.0, 49).unwrap();
        let phi = GridFunction::from_fn_1d(axis, Symmetry::None, |x| if x < -0.5 { INF } else { x }).unwrap();
        assert!(t.expect_grid(&phi).unwrap().value.is_infinite());
    }

    #[test]
    fn rejects_nonconvex() {
        let axis = Axis::new(-3.0, 3.0, 61).unwrap();
        let v = GridFunction::from_fn_1d(axis, Symmetry::None, |x| -x * x).unwrap();
        assert!(matches!(
            LogConcaveDensity::from_grid("bad", v, None),
            Err(Error::InvalidDensity(_))
        ));
    }
}
