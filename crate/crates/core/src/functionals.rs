//! Santaló products, log-Laplace transforms, entropies, Fisher information,
//! entropy power and the Gaussian log-Sobolev deficit.

use std::f64::consts::{E, PI};

use crate::conjugate;
use crate::density::{LogConcaveDensity, ReferenceMeasure};
use crate::error::{Error, Result};
use crate::extended::INF;
use crate::grid::{Axis, GridFunction};
use crate::quadrature::{self, Quad};
use crate::report::CheckReport;

/// `∫ e^{-f} · ∫ e^{-f*}` with both factors.
#[derive(Clone, Copy, Debug)]
pub struct SantaloProduct {
    pub value: f64,
    pub est_error: f64,
    pub primal: Quad,
    pub dual: Quad,
}

fn sum(a: Quad, b: Quad) -> Quad {
    Quad {
        value: a.value + b.value,
        est_error: a.est_error + b.est_error,
    }
}

fn scale(a: Quad, s: f64) -> Quad {
    Quad {
        value: a.value * s,
        est_error: a.est_error * s.abs(),
    }
}

fn shift(a: Quad, c: f64) -> Quad {
    Quad {
        value: a.value + c,
        est_error: a.est_error,
    }
}

/// Santaló product of `f`, with `f*` from [`conjugate::legendre`].
///
/// When the grid has an even number of cells per axis, the error estimate of
/// each factor also includes the Richardson term `|Q_h - Q_2h| / 3` of the
/// sampling error, computed from every other node.
pub fn santalo_product(f: &GridFunction) -> Result<SantaloProduct> {
    let g = conjugate::legendre(f)?;
    let mut p = santalo_product_with(f, &g)?;
    let coarse = coarsen(f).and_then(|fc| {
        let gc = conjugate::legendre(&fc).ok()?;
        santalo_product_with(&fc, &gc).ok()
    });
    if let Some(c) = coarse {
        p.primal.est_error += (p.primal.value - c.primal.value).abs() / 3.0;
        p.dual.est_error += (p.dual.value - c.dual.value).abs() / 3.0;
        p.est_error = p.value * (p.primal.est_error / p.primal.value + p.dual.est_error / p.dual.value);
    }
    Ok(p)
}

/// Every other node, when each axis has an even number of at least 4 cells.
fn coarsen(f: &GridFunction) -> Option<GridFunction> {
    let axes = f.axes();
    if axes.iter().any(|a| (a.steps - 1) % 2 != 0 || a.steps < 5) {
        return None;
    }
    let coarse: Vec<Axis> = axes
        .iter()
        .map(|a| Axis::new(a.lo, a.hi, (a.steps - 1) / 2 + 1))
        .collect::<Result<_>>()
        .ok()?;
    let values: Vec<f64> = match f.dim() {
        1 => f.values().iter().step_by(2).copied().collect(),
        _ => (0..coarse[0].steps)
            .flat_map(|i| (0..coarse[1].steps).map(move |j| (i, j)))
            .map(|(i, j)| f.at(2 * i, 2 * j))
            .collect(),
    };
    GridFunction::new(coarse, values, f.symmetry()).ok()
}

/// Santaló product from a function and a precomputed conjugate.
pub fn santalo_product_with(f: &GridFunction, g: &GridFunction) -> Result<SantaloProduct> {
    let primal = quadrature::integrate_exp_neg(f)?;
    let dual = quadrature::integrate_exp_neg(g)?;
    for (name, q) in [("e^(-f)", primal), ("e^(-f*)", dual)] {
        if !(q.value > 0.0 && q.value.is_finite()) {
            return Err(Error::NotAdmissible(format!("∫ {name} = {} is not in (0, ∞)", q.value)));
        }
    }
    let value = primal.value * dual.value;
    Ok(SantaloProduct {
        value,
        est_error: value * (primal.est_error / primal.value + dual.est_error / dual.value),
        primal,
        dual,
    })
}

/// `log ∫ e^{-g} dm`, quadrature on the grid of `g`.
pub fn log_integral_against(g: &GridFunction, m: &ReferenceMeasure) -> Result<Quad> {
    match m {
        ReferenceMeasure::Lebesgue => quadrature::log_integral_exp_neg(g),
        _ => {
            let w = g.map_values(|x, v| if v.is_finite() { v + m.potential(x) } else { INF })?;
            quadrature::log_integral_exp_neg(&w)
        }
    }
}

/// `L(f|m) = -log ∫ e^{-f*} dm`. Returns `+∞` when the integral vanishes and
/// `-∞` when it diverges.
pub fn log_laplace_star(f: &GridFunction, m: &ReferenceMeasure) -> Result<Quad> {
    let g = conjugate::legendre(f)?;
    let q = log_integral_against(&g, m)?;
    Ok(scale(q, -1.0))
}

/// `H(η|m)`. For `m = e^{-W}dx` the support of `η` must lie in `{W < ∞}`.
pub fn relative_entropy(eta: &LogConcaveDensity, m: &ReferenceMeasure) -> Result<Quad> {
    let mo = eta.moments()?;
    let h_leb = scale(sum(mo.potential, eta.log_norm()), -1.0);
    match m {
        ReferenceMeasure::Lebesgue => Ok(h_leb),
        ReferenceMeasure::Gaussian => {
            let n = eta.dim() as f64;
            Ok(shift(sum(h_leb, scale(mo.second, 0.5)), 0.5 * n * (2.0 * PI).ln()))
        }
        ReferenceMeasure::LogConcave(w) => {
            let ew = eta.expect_grid(w)?;
            if ew.value.is_infinite() {
                return Err(Error::NotAbsolutelyContinuous(format!(
                    "'{}' charges the region where the reference potential is +inf",
                    eta.name()
                )));
            }
            Ok(sum(h_leb, ew))
        }
    }
}

/// Fisher information relative to `γ_n`.
#[derive(Clone, Copy, Debug)]
pub struct Fisher {
    pub value: Quad,
    /// Only the generalized `Ĩ = ∫|∇V - x|² dη` is computed: the potential is
    /// not essentially continuous, so `I` may differ (be `+∞`).
    pub tilde_only: bool,
}

/// `Ĩ(η|γ_n) = ∫ |∇V(x) - x|² dη`, equal to `I(η|γ_n)` for essentially
/// continuous potentials.
pub fn fisher_information(eta: &LogConcaveDensity) -> Result<Fisher> {
    Ok(Fisher {
        value: eta.moments()?.residual_sq,
        tilde_only: !eta.essentially_continuous(),
    })
}

/// `∫ |∇V|² dη`.
pub fn fisher_information_lebesgue(eta: &LogConcaveDensity) -> Result<Quad> {
    Ok(eta.moments()?.grad_sq)
}

/// `δ_n(η) = ½ I(η|γ_n) - H(η|γ_n)`.
pub fn lsi_deficit(eta: &LogConcaveDensity) -> Result<Quad> {
    let i = fisher_information(eta)?.value;
    let h = relative_entropy(eta, &ReferenceMeasure::Gaussian)?;
    Ok(sum(scale(i, 0.5), scale(h, -1.0)))
}

/// Deficit of a product density: the sum of the factors' deficits.
pub fn lsi_deficit_product(factors: &[&LogConcaveDensity]) -> Result<Quad> {
    factors.iter().try_fold(
        Quad {
            value: 0.0,
            est_error: 0.0,
        },
        |acc, eta| Ok(sum(acc, lsi_deficit(eta)?)),
    )
}

/// `N(η) = (2πe)^{-1} exp(-(2/n) H(η|Leb))`.
pub fn entropy_power(eta: &LogConcaveDensity) -> Result<Quad> {
    let h = relative_entropy(eta, &ReferenceMeasure::Lebesgue)?;
    let n = eta.dim() as f64;
    let v = (-2.0 / n * h.value).exp() / (2.0 * PI * E);
    Ok(Quad {
        value: v,
        est_error: v * 2.0 / n * h.est_error,
    })
}

/// `-log(dη/dm)` sampled on the grid of `η`'s potential: the test function
/// of the equality case of the entropy duality.
pub fn log_density_potential(eta: &LogConcaveDensity, m: &ReferenceMeasure) -> Result<GridFunction> {
    let v = eta.sampled()?;
    let log_z = eta.log_norm().value;
    v.map_values(|x, val| {
        if val.is_finite() {
            val + log_z - m.potential(x)
        } else {
            INF
        }
    })
}

/// Checks `∫ f dη - log ∫ e^f dm ≤ H(η|m)` for `f = -φ`; the test function is
/// passed through its negative so that `f = -∞` is representable as
/// `φ = +∞`. The margin is the duality gap.
pub fn entropy_duality_check(eta: &LogConcaveDensity, phi: &GridFunction, m: &ReferenceMeasure) -> Result<CheckReport> {
    let id = format!("entropy_duality[{}]", eta.name());
    let h = relative_entropy(eta, m)?;
    let e_phi = eta.expect_grid(phi)?;
    let log_int = log_integral_against(phi, m)?;
    if !log_int.value.is_finite() {
        return Ok(CheckReport::not_applicable(
            &id,
            "∫ e^f dm is not in (0, ∞)",
            "variational formula for the relative entropy",
        ));
    }
    let lhs = -e_phi.value - log_int.value;
    let est = e_phi.est_error + log_int.est_error + h.est_error;
    Ok(CheckReport::at_most(
        &id,
        lhs,
        h.value,
        1e-4,
        est,
        "variational formula for the relative entropy",
    ))
}
