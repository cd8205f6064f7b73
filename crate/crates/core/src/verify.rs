//! The inequality harness: every checkable statement assembled from the
//! building blocks, plus the named suites.

use std::f64::consts::{E, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::density::{LogConcaveDensity, ReferenceMeasure};
use crate::error::{Error, Result};
use crate::functionals::{self, entropy_duality_check, fisher_information, lsi_deficit, relative_entropy};
use crate::grid::{Axis, GridFunction, Symmetry};
use crate::lp;
use crate::measure::DiscreteMeasure;
use crate::moment::{ipp_check, moment_measure_pushforward, reverse_duality_check, weak_duality_check};
use crate::quadrature;
use crate::report::CheckReport;
use crate::spec::{Family, FunctionSpec};
use crate::transport::{self, gaussian_entropy, gaussian_w2_squared, max_correlation_cost, w2_squared};

/// Closed-form comparisons.
pub const TOL_EXACT: f64 = 1e-6;
/// Quadrature-backed comparisons.
pub const TOL_QUAD: f64 = 1e-4;
/// Solver-backed comparisons.
pub const TOL_SOLVER: f64 = 5e-3;

/// Which inverse Santaló inequality is tested.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Plain,
    Symmetric,
    Unconditional,
}

impl Variant {
    fn required(&self) -> Symmetry {
        match self {
            Variant::Plain => Symmetry::None,
            Variant::Symmetric => Symmetry::Symmetric,
            Variant::Unconditional => Symmetry::Unconditional,
        }
    }
}

fn unconditional(sym: Symmetry, dim: usize) -> bool {
    sym.implies(if dim == 1 {
        Symmetry::Symmetric
    } else {
        Symmetry::Unconditional
    })
}

/// `∫e^{-f} ∫e^{-f*} ≥ cⁿ`, reported in log scale: `lhs = n log c`,
/// `rhs = log` of the product, so the margin shifts by exactly `n log(c'/c)`
/// when `c` changes.
pub fn check_is(name: &str, f: &GridFunction, c: f64, variant: Variant) -> Result<CheckReport> {
    let id = format!("is[{name}]");
    let prov = "functional inverse Santalo inequality";
    let req = variant.required();
    let sym_ok = if req == Symmetry::Unconditional {
        unconditional(f.symmetry(), f.dim())
    } else {
        f.symmetry().implies(req)
    };
    if !sym_ok {
        return Ok(CheckReport::not_applicable(
            &id,
            "function lacks the symmetry of the variant",
            prov,
        ));
    }
    let p = match functionals::santalo_product(f) {
        Ok(p) => p,
        Err(Error::NotAdmissible(m)) => return Ok(CheckReport::not_applicable(&id, &m, prov)),
        Err(e) => return Err(e),
    };
    let n = f.dim() as f64;
    Ok(CheckReport::at_most(
        &id,
        n * c.ln(),
        p.value.ln(),
        TOL_QUAD,
        p.est_error / p.value,
        prov,
    ))
}

/// `η ∝ e^{-V}` for the two-piece sequence `V = max(s x + 1, -k(s x + 1))`.
pub fn fm_density(k: u32, mirror: bool) -> Result<LogConcaveDensity> {
    let v = Family::FmSequence { k, mirror }
        .max_affine(1)
        .expect("max-affine family")?;
    let name = format!("fm_{}{k}", if mirror { "mirror_" } else { "" });
    LogConcaveDensity::from_max_affine(&name, v, Symmetry::None)
}

/// `η_k ∝ e^{-k max(|x| - 1, 0)}`.
pub fn uncond_density(k: u32) -> Result<LogConcaveDensity> {
    let v = Family::UncondSequence { k }.max_affine(1).expect("max-affine family")?;
    LogConcaveDensity::from_max_affine(&format!("uncond_{k}"), v, Symmetry::Unconditional)
}

fn same_dim(a: &LogConcaveDensity, b: &LogConcaveDensity) -> Result<usize> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!("densities are {}D and {}D", a.dim(), b.dim())));
    }
    Ok(a.dim())
}

/// `T(ν₁, ν₂)` between moment measures; on the diagonal (same density by
/// name), `T(ν, ν) = ∫|∇V|² dη`.
fn moment_transport(a: &LogConcaveDensity, b: &LogConcaveDensity) -> Result<(f64, f64)> {
    if a.name() == b.name() {
        let g = a.moments()?.grad_sq;
        return Ok((g.value, g.est_error));
    }
    let nu1 = moment_measure_pushforward(a)?;
    let nu2 = moment_measure_pushforward(b)?;
    if nu1.dim() > 1 && (nu1.len() > lp::MAX_ATOMS || nu2.len() > lp::MAX_ATOMS) {
        return Err(Error::Unsupported(format!(
            "moment measures with {} and {} atoms exceed the LP limit",
            nu1.len(),
            nu2.len()
        )));
    }
    Ok((max_correlation_cost(&nu1, &nu2)?.0, 0.0))
}

/// `H(η₁|γ)+H(η₂|γ)+½W₂²(ν₁,ν₂) ≤ ½I(η₁|γ)+½I(η₂|γ)+n log(2π/c)`, with the
/// deficit form as a part.
pub fn check_mainresult(a: &LogConcaveDensity, b: &LogConcaveDensity, c: f64) -> Result<CheckReport> {
    let id = format!("mainresult[{},{}]", a.name(), b.name());
    let prov = "entropy-information-transport inequality";
    if !a.essentially_continuous() || !b.essentially_continuous() {
        return Ok(CheckReport::not_applicable(
            &id,
            "potential is not essentially continuous",
            prov,
        ));
    }
    let n = same_dim(a, b)? as f64;
    let g = ReferenceMeasure::Gaussian;
    let (h1, h2) = (relative_entropy(a, &g)?, relative_entropy(b, &g)?);
    let (i1, i2) = (fisher_information(a)?.value, fisher_information(b)?.value);
    let (w, _) = w2_squared(&moment_measure_pushforward(a)?, &moment_measure_pushforward(b)?)?;
    let k = n * (2.0 * PI / c).ln();
    let est = h1.est_error + h2.est_error + 0.5 * (i1.est_error + i2.est_error);
    let lhs = h1.value + h2.value + 0.5 * w;
    let rhs = 0.5 * (i1.value + i2.value) + k;
    let (d1, d2) = (lsi_deficit(a)?, lsi_deficit(b)?);
    let deficit = CheckReport::at_most("deficit_form", 0.5 * w - k, d1.value + d2.value, TOL_QUAD, est, prov);
    Ok(CheckReport::at_most(&id, lhs, rhs, TOL_QUAD, est, prov).with_parts(vec![deficit]))
}

/// `δ_n(η) ≥ ½W₂²(ν, λ_{C_n}) - (n/2) log(πe/2)` for unconditional `η`.
pub fn check_mainresult2(eta: &LogConcaveDensity) -> Result<CheckReport> {
    let id = format!("mainresult2[{}]", eta.name());
    let prov = "unconditional deficit bound against the discrete cube";
    if !unconditional(eta.symmetry(), eta.dim()) {
        return Ok(CheckReport::not_applicable(&id, "density is not unconditional", prov));
    }
    if !eta.essentially_continuous() {
        return Ok(CheckReport::not_applicable(
            &id,
            "potential is not essentially continuous",
            prov,
        ));
    }
    let n = eta.dim();
    let d = lsi_deficit(eta)?;
    let (w, _) = w2_squared(&moment_measure_pushforward(eta)?, &DiscreteMeasure::cube(n)?)?;
    let lhs = 0.5 * w - 0.5 * n as f64 * (PI * E / 2.0).ln();
    Ok(CheckReport::at_most(&id, lhs, d.value, TOL_QUAD, d.est_error, prov))
}

/// Exact `H(η_k|γ₁)` for the unconditional sequence.
pub fn uncond_entropy(k: f64) -> f64 {
    0.5 * (PI / 2.0).ln() - (1.0 + 1.0 / k).ln()
        + k / (k + 1.0) * (1.0 / 6.0 - 0.5 / k + 1.0 / (k * k) + 1.0 / (k * k * k))
}

/// Exact `I(η_k|γ₁)` for the unconditional sequence.
pub fn uncond_information(k: f64) -> f64 {
    let t = 1.0 - k + 1.0 / k;
    k / (k + 1.0) * (1.0 / 3.0 + (1.0 / (k * k) + t * t) / k)
}

/// Exact `W₂²(ν_k, λ_{C_1})` for the unconditional sequence.
pub fn uncond_w2(k: f64) -> f64 {
    (k * k - k + 1.0) / (k + 1.0)
}

/// The unconditional sequence through the full pipeline: the deficit bound
/// itself plus entropy, information and transport against their closed forms.
pub fn check_uncond_sequence(k: u32) -> Result<CheckReport> {
    let eta = uncond_density(k)?;
    let kf = k as f64;
    let prov = "unconditional deficit bound against the discrete cube";
    let h = relative_entropy(&eta, &ReferenceMeasure::Gaussian)?;
    let i = fisher_information(&eta)?.value;
    let (w, _) = w2_squared(&moment_measure_pushforward(&eta)?, &DiscreteMeasure::cube(1)?)?;
    let parts = vec![
        CheckReport::equal("entropy", h.value, uncond_entropy(kf), TOL_EXACT, h.est_error, prov),
        CheckReport::equal(
            "information",
            i.value,
            uncond_information(kf),
            TOL_EXACT,
            i.est_error,
            prov,
        ),
        CheckReport::equal("w2", w, uncond_w2(kf), 1e-12 * (1.0 + w), 0.0, prov),
    ];
    let mut r = check_mainresult2(&eta)?;
    r.check_id = format!("uncond_sequence[k={k:03}]");
    Ok(r.with_parts(parts))
}

/// The two-piece sequence through the full pipeline: both entropies, `T`,
/// `W₂²`, and the slack `Δ` of the entropy-information-transport inequality.
pub fn check_fm_sequence(k: u32) -> Result<CheckReport> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let prov = "inverse Santalo equality sequence in dimension one";
    let kf = k as f64;
    let a = fm_density(k, false)?;
    let b = fm_density(k, true)?;
    let h_exact = -1.0 - (1.0 + 1.0 / kf).ln();
    let ha = relative_entropy(&a, &ReferenceMeasure::Lebesgue)?;
    let hb = relative_entropy(&b, &ReferenceMeasure::Lebesgue)?;
    let nu1 = moment_measure_pushforward(&a)?;
    let nu2 = moment_measure_pushforward(&b)?;
    let (t, _) = max_correlation_cost(&nu1, &nu2)?;
    let (w, _) = w2_squared(&nu1, &nu2)?;
    let d = functionals::lsi_deficit_product(&[&a])?.value + functionals::lsi_deficit_product(&[&b])?.value;
    let delta = d - 0.5 * w + (2.0 * PI / E).ln();
    let parts = vec![
        CheckReport::equal("entropy_1", ha.value, h_exact, TOL_EXACT, ha.est_error, prov),
        CheckReport::equal("entropy_2", hb.value, h_exact, TOL_EXACT, hb.est_error, prov),
        CheckReport::equal("t", t, 1.0, 1e-12, 0.0, prov),
        CheckReport::equal("w2", w, 2.0 * (kf - 1.0), 1e-12 * (1.0 + w), 0.0, prov),
    ];
    Ok(CheckReport::equal(
        &format!("fm_sequence[k={k:03}]"),
        delta,
        2.0 * (1.0 + 1.0 / kf).ln(),
        TOL_SOLVER,
        1e-12,
        prov,
    )
    .with_parts(parts))
}

/// `N(X₁) N(X₂) T(ν₁,ν₂)² ≥ (nc/2π)²`; on the diagonal also Stam's
/// `N(X) I(X) ≥ nc/2π`.
pub fn check_epi(a: &LogConcaveDensity, b: &LogConcaveDensity, c: f64) -> Result<CheckReport> {
    let id = format!("epi[{},{}]", a.name(), b.name());
    let prov = "entropy power and maximal correlation inequality";
    if !a.is_finite_valued() || !b.is_finite_valued() {
        return Ok(CheckReport::not_applicable(&id, "potential takes the value +inf", prov));
    }
    let n = same_dim(a, b)? as f64;
    let (n1, n2) = (functionals::entropy_power(a)?, functionals::entropy_power(b)?);
    let (t, t_err) = moment_transport(a, b)?;
    let rhs = n1.value * n2.value * t * t;
    let est = rhs * (n1.est_error / n1.value + n2.est_error / n2.value + 2.0 * t_err / t.abs());
    let k = n * c / (2.0 * PI);
    let mut r = CheckReport::at_most(&id, k * k, rhs, TOL_QUAD, est, prov);
    if a.name() == b.name() {
        let i = functionals::fisher_information_lebesgue(a)?;
        let stam = CheckReport::at_most("stam", k, n1.value * i.value, TOL_QUAD, i.est_error, prov);
        r = r.with_parts(vec![stam]);
    }
    Ok(r)
}

/// `H(η₁|Leb)+H(η₂|Leb) ≤ -n log(e²c) + T(ν₁,ν₂)` for finite potentials;
/// otherwise the general form with the `T(νᵢ,ηᵢ)` terms, each checked
/// against the bound `T(νᵢ,ηᵢ) ≤ n`.
pub fn check_entropy_transport(a: &LogConcaveDensity, b: &LogConcaveDensity, c: f64) -> Result<CheckReport> {
    let id = format!("entropy_transport[{},{}]", a.name(), b.name());
    let prov = "entropy and maximal correlation form of the inverse Santalo inequality";
    let n = same_dim(a, b)? as f64;
    let (h1, h2) = (
        relative_entropy(a, &ReferenceMeasure::Lebesgue)?,
        relative_entropy(b, &ReferenceMeasure::Lebesgue)?,
    );
    let (t, t_err) = moment_transport(a, b)?;
    let est = h1.est_error + h2.est_error + t_err;
    if a.is_finite_valued() && b.is_finite_valued() {
        let rhs = -n * (E * E * c).ln() + t;
        return Ok(CheckReport::at_most(&id, h1.value + h2.value, rhs, TOL_QUAD, est, prov));
    }
    let (t1, t2) = (a.moments()?.x_dot_grad, b.moments()?.x_dot_grad);
    let lhs = t1.value + h1.value + t2.value + h2.value;
    let rhs = -n * c.ln() + t;
    let parts = vec![
        CheckReport::at_most("self_transport_1", t1.value, n, TOL_QUAD, t1.est_error, prov),
        CheckReport::at_most("self_transport_2", t2.value, n, TOL_QUAD, t2.est_error, prov),
    ];
    Ok(
        CheckReport::at_most(&id, lhs, rhs, TOL_QUAD, est + t1.est_error + t2.est_error, prov)
            .with_parts(parts)
            .with_note("potential takes the value +inf; general form with self-transport terms"),
    )
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut a = m.to_vec();
    let mut d = 1.0;
    for col in 0..n {
        let p = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[p][col] == 0.0 {
            return 0.0;
        }
        if p != col {
            a.swap(p, col);
            d = -d;
        }
        d *= a[col][col];
        let pivot = a[col].clone();
        for row in &mut a[col + 1..n] {
            let f = row[col] / pivot[col];
            for (x, p) in row[col..].iter_mut().zip(&pivot[col..]) {
                *x -= f * p;
            }
        }
    }
    d
}

fn solve(m: &[Vec<f64>], rhs: &[f64]) -> Vec<f64> {
    // Cramer's rule; n ≤ 3
    let d = det(m);
    (0..m.len())
        .map(|c| {
            let mc: Vec<Vec<f64>> = m
                .iter()
                .zip(rhs)
                .map(|(row, r)| {
                    let mut row = row.clone();
                    row[c] = *r;
                    row
                })
                .collect();
            det(&mc) / d
        })
        .collect()
}

fn simplex_volume(v: &[Vec<f64>]) -> f64 {
    let n = v.len() - 1;
    let rows: Vec<Vec<f64>> = v[1..]
        .iter()
        .map(|p| p.iter().zip(&v[0]).map(|(a, b)| a - b).collect())
        .collect();
    det(&rows).abs() / factorial(n)
}

/// `Vol(Δ) Vol(Δ°)` for the simplex with vertices `e_1, …, e_n, -Σe_i`
/// (centroid at the origin).
pub fn simplex_mahler_volume(n: usize) -> f64 {
    let mut verts: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    verts.push(vec![-1.0; n]);
    let polar: Vec<Vec<f64>> = (0..=n)
        .map(|skip| {
            let facet: Vec<Vec<f64>> = verts
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != skip)
                .map(|(_, v)| v.clone())
                .collect();
            solve(&facet, &vec![1.0; n])
        })
        .collect();
    simplex_volume(&verts) * simplex_volume(&polar)
}

/// `Vol(B₁ⁿ) Vol(B_∞ⁿ) = 4ⁿ/n!`; the simplex constant `(n+1)^{n+1}/(n!)²`
/// from the polar simplex; `∫e^{-‖x‖₁} = n! Vol(B₁ⁿ)` by quadrature (`n ≤ 2`).
pub fn check_polytope_constants(n: usize) -> Result<CheckReport> {
    if !(1..=3).contains(&n) {
        return Err(Error::InvalidParameter(format!(
            "polytope constants for n in 1..=3, got {n}"
        )));
    }
    let prov = "volume products of the cross-polytope, cube and simplex";
    let nf = n as i32;
    let fact = factorial(n);
    let cross = 2f64.powi(nf) / fact;
    let cube = 2f64.powi(nf);
    let product = cross * cube;
    let formula = 4f64.powi(nf) / fact;
    let simplex = simplex_mahler_volume(n);
    let simplex_formula = ((n + 1) as f64).powi(nf + 1) / (fact * fact);
    let mut parts = vec![CheckReport::equal(
        "simplex",
        simplex,
        simplex_formula,
        1e-12 * simplex_formula,
        0.0,
        prov,
    )];
    if n <= 2 {
        let (r, cells) = if n == 1 { (40.0, 5120) } else { (30.0, 480) };
        let axes = vec![Axis::new(-r, r, cells + 1)?; n];
        let g = GridFunction::from_fn(axes, Symmetry::Unconditional, |x| x.iter().map(|v| v.abs()).sum())?;
        let q = quadrature::integrate_exp_neg(&g)?;
        parts.push(CheckReport::equal(
            "gauge_integral",
            q.value,
            fact * cross,
            1e-5,
            q.est_error,
            prov,
        ));
    }
    Ok(CheckReport::equal(
        &format!("polytope_constants[n={n}]"),
        product,
        formula,
        1e-12 * formula,
        0.0,
        prov,
    )
    .with_parts(parts))
}

/// `¼W₂²(N(-a,1), N(a,1)) = H(N(-a,1)|γ₁) + H(N(a,1)|γ₁)`.
pub fn check_talagrand_gaussian(a: f64) -> CheckReport {
    let w = gaussian_w2_squared(&[-a], 1.0, &[a], 1.0);
    let h = gaussian_entropy(&[-a], 1.0) + gaussian_entropy(&[a], 1.0);
    CheckReport::equal(
        &format!("talagrand_symmetric[a={a}]"),
        0.25 * w,
        h,
        1e-9,
        1e-15 * (1.0 + h),
        "symmetrized transport-entropy inequality",
    )
}

/// The equality `H(τ|γ)+H(τ̄|γ)+½W₂²(δ₁,δ₋₁) = ½Ĩ(τ|γ)+½Ĩ(τ̄|γ)+log(2π/e)`
/// attained by the non-essentially-continuous pair `τ, τ̄`.
pub fn check_ghost_equality() -> Result<CheckReport> {
    let prov = "equality case outside essentially continuous potentials";
    let (a, b) = (LogConcaveDensity::tau()?, LogConcaveDensity::tau_bar()?);
    let g = ReferenceMeasure::Gaussian;
    let (h1, h2) = (relative_entropy(&a, &g)?, relative_entropy(&b, &g)?);
    let (i1, i2) = (fisher_information(&a)?.value, fisher_information(&b)?.value);
    let (w, _) = w2_squared(&moment_measure_pushforward(&a)?, &moment_measure_pushforward(&b)?)?;
    let lhs = h1.value + h2.value + 0.5 * w;
    let rhs = 0.5 * (i1.value + i2.value) + (2.0 * PI / E).ln();
    let est = h1.est_error + h2.est_error + 0.5 * (i1.est_error + i2.est_error);
    let parts = vec![
        CheckReport::equal(
            "entropy",
            h1.value,
            0.5 * (2.0 * PI / E).ln(),
            TOL_EXACT,
            h1.est_error,
            prov,
        ),
        CheckReport::equal("information", i1.value, 2.0, TOL_EXACT, i1.est_error, prov),
        CheckReport::equal("w2", w, 4.0, 1e-12, 0.0, prov),
    ];
    Ok(CheckReport::equal("ghost_equality[tau,tau_bar]", lhs, rhs, TOL_EXACT, est, prov).with_parts(parts))
}

/// Suite configuration.
#[derive(Clone, Debug)]
pub struct SuiteOptions {
    /// Overrides every check's preset constant.
    pub c: Option<f64>,
    pub tol_scale: f64,
    /// Restricts dimension-dependent checks to this dimension.
    pub n: Option<usize>,
    pub seed: u64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            c: None,
            tol_scale: 1.0,
            n: None,
            seed: 0,
        }
    }
}

pub const SUITES: [&str; 5] = ["duality", "transport", "sequences", "inequalities", "all"];

type Job = Box<dyn Fn(&SuiteOptions) -> Result<CheckReport> + Send + Sync>;

struct Task {
    id: String,
    dim: usize,
    run: Job,
}

fn task(
    id: impl Into<String>,
    dim: usize,
    run: impl Fn(&SuiteOptions) -> Result<CheckReport> + Send + Sync + 'static,
) -> Task {
    Task {
        id: id.into(),
        dim,
        run: Box::new(run),
    }
}

fn c_or(o: &SuiteOptions, preset: f64) -> f64 {
    o.c.unwrap_or(preset)
}

fn grid_1d(lo: f64, hi: f64, cells: usize, sym: Symmetry, f: impl Fn(f64) -> f64) -> Result<GridFunction> {
    GridFunction::from_fn_1d(Axis::new(lo, hi, cells + 1)?, sym, f)
}

fn spec_grid(name: &str, family: Family, axes: Vec<Axis>, sym: Symmetry) -> Result<GridFunction> {
    FunctionSpec::new(name, family, axes, sym).to_grid()
}

/// A random convex 1D function on `[-4, 4]` (finite, so its conjugate has
/// bounded domain).
fn random_convex(rng: &mut ChaCha8Rng) -> Result<GridFunction> {
    let a = rng.gen_range(0.1..2.0);
    let s = rng.gen_range(-1.0..1.0);
    let t = rng.gen_range(0.0..1.5);
    let m = rng.gen_range(-1.0..1.0);
    grid_1d(-4.0, 4.0, 512, Symmetry::None, move |x| {
        0.5 * a * x * x + s * x + t * (x - m).abs()
    })
}

fn random_centered(rng: &mut ChaCha8Rng, dim: usize) -> Result<DiscreteMeasure> {
    let m = rng.gen_range(dim + 1..=8);
    let atoms: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .collect();
    let w: Vec<f64> = (0..m).map(|_| rng.gen_range(0.2..1.0)).collect();
    let nu = DiscreteMeasure::normalized(atoms, w)?;
    let b = nu.barycenter();
    let shifted: Vec<Vec<f64>> = nu
        .atoms()
        .iter()
        .map(|x| x.iter().zip(&b).map(|(u, v)| u - v).collect())
        .collect();
    DiscreteMeasure::new(shifted, nu.weights().to_vec())
}

fn random_measure(rng: &mut ChaCha8Rng, dim: usize) -> Result<DiscreteMeasure> {
    let m = rng.gen_range(1..=10);
    let atoms: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect())
        .collect();
    let w: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..1.0)).collect();
    DiscreteMeasure::normalized(atoms, w)
}

fn duality_tasks(seed: u64) -> Vec<Task> {
    let mut out = Vec::new();
    for name in LogConcaveDensity::BUILTINS {
        let dim = if name.ends_with('2') { 2 } else { 1 };
        for (tag, reference) in [
            ("leb", ReferenceMeasure::Lebesgue),
            ("gauss", ReferenceMeasure::Gaussian),
        ] {
            out.push(task(format!("entropy_duality[{name}]/{tag}"), dim, move |_| {
                let eta = LogConcaveDensity::builtin(name)?;
                let phi = functionals::log_density_potential(&eta, &reference)?;
                let mut r = entropy_duality_check(&eta, &phi, &reference)?;
                r.check_id = format!("entropy_duality[{name},{tag}]");
                Ok(r)
            }));
        }
    }
    out.push(task("reverse_duality[quadratic]", 1, |_| {
        reverse_duality_check(
            "quadratic",
            &grid_1d(-12.0, 12.0, 1536, Symmetry::Symmetric, |x| 0.5 * x * x)?,
        )
    }));
    out.push(task("reverse_duality[abs]", 1, |_| {
        reverse_duality_check("abs", &grid_1d(-2.0, 2.0, 80, Symmetry::Symmetric, f64::abs)?)
    }));
    out.push(task("reverse_duality[indicator]", 1, |_| {
        let chi = grid_1d(-2.0, 2.0, 80, Symmetry::Symmetric, |x| {
            if x.abs() <= 1.0 + 1e-12 {
                0.0
            } else {
                f64::INFINITY
            }
        })?;
        reverse_duality_check("indicator", &chi)
    }));
    for i in 0..10 {
        out.push(task(format!("weak_duality[{i:02}]"), 1, move |_| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1000 + i));
            let f = random_convex(&mut rng)?;
            let nu = random_centered(&mut rng, 1)?;
            weak_duality_check(&format!("weak_duality[{i:02}]"), &f, &nu)
        }));
    }
    out
}

fn two_point() -> Result<DiscreteMeasure> {
    DiscreteMeasure::uniform(vec![vec![-1.0], vec![1.0]])
}

fn transport_tasks(seed: u64) -> Vec<Task> {
    let mut out = Vec::new();
    for dim in [1usize, 2] {
        for i in 0..10u64 {
            let id = format!("tw_identity[n={dim},{i:02}]");
            out.push(task(id.clone(), dim, move |_| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(100 * dim as u64 + i));
                let (a, b) = (random_measure(&mut rng, dim)?, random_measure(&mut rng, dim)?);
                let mut r = transport::tw_identity_check(&a, &b)?;
                r.check_id = id.clone();
                Ok(r)
            }));
        }
    }
    out.push(task("tw_identity[cube_2]", 2, |_| {
        let c = DiscreteMeasure::cube(2)?;
        let mut r = transport::tw_identity_check(&c, &c)?;
        r.check_id = "tw_identity[cube_2]".into();
        let (t, _) = max_correlation_cost(&c, &c)?;
        Ok(r.with_parts(vec![CheckReport::equal(
            "t",
            t,
            2.0,
            1e-12,
            0.0,
            "maximal correlation of the discrete cube",
        )]))
    }));
    for i in 0..5u64 {
        let id = format!("lp_vertex_enumeration[{i:02}]");
        out.push(task(id.clone(), 1, move |_| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(500 + i));
            let n1 = rng.gen_range(1..=4);
            let n2 = rng.gen_range(1..=4);
            let sup: Vec<f64> = (0..n1).map(|_| rng.gen_range(0.1..1.0)).collect();
            let dem: Vec<f64> = (0..n2).map(|_| rng.gen_range(0.1..1.0)).collect();
            let (ss, ds) = (sup.iter().sum::<f64>(), dem.iter().sum::<f64>());
            let sup: Vec<f64> = sup.iter().map(|v| v / ss).collect();
            let dem: Vec<f64> = dem.iter().map(|v| v / ds).collect();
            let cost: Vec<f64> = (0..n1 * n2).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let v = lp::solve(&sup, &dem, &cost)?.value;
            let brute = lp::enumerate_vertices(&sup, &dem, &cost)?;
            Ok(CheckReport::equal(
                &id,
                v,
                brute,
                1e-12 * (1.0 + brute.abs()),
                0.0,
                "exact transportation simplex",
            ))
        }));
    }
    out.push(task("kantorovich_gap[quadratic]", 1, |_| {
        let f = grid_1d(-4.0, 4.0, 80, Symmetry::Symmetric, |x| 0.5 * x * x)?;
        let s = two_point()?;
        let g = transport::kantorovich_gap(&f, &s, &s)?;
        Ok(CheckReport::equal(
            "kantorovich_gap[quadratic]",
            g,
            0.0,
            1e-12,
            0.0,
            "Kantorovich duality for maximal correlation",
        ))
    }));
    out.push(task("kantorovich_gap[abs]", 1, |_| {
        let f = grid_1d(-4.0, 4.0, 80, Symmetry::Symmetric, f64::abs)?;
        let g = transport::kantorovich_gap(&f, &two_point()?, &DiscreteMeasure::dirac(&[0.0])?)?;
        Ok(CheckReport::equal(
            "kantorovich_gap[abs]",
            g,
            1.0,
            1e-12,
            0.0,
            "Kantorovich duality for maximal correlation",
        ))
    }));
    for a in [0.5, 1.0, 2.0] {
        out.push(task(format!("talagrand_symmetric[a={a}]"), 1, move |_| {
            Ok(check_talagrand_gaussian(a))
        }));
    }
    out
}

fn sequence_tasks() -> Vec<Task> {
    let mut out = Vec::new();
    for k in [1u32, 2, 5, 10, 100] {
        out.push(task(format!("fm_sequence[k={k:03}]"), 1, move |_| check_fm_sequence(k)));
    }
    for k in [1u32, 10, 100] {
        out.push(task(format!("uncond_sequence[k={k:03}]"), 1, move |_| {
            check_uncond_sequence(k)
        }));
    }
    out.push(task("mainresult[uncond_100,tau_s]", 1, |o| {
        check_mainresult(&uncond_density(100)?, &LogConcaveDensity::tau_s(1)?, c_or(o, 4.0))
    }));
    out
}

fn inequality_tasks() -> Vec<Task> {
    let mut out = Vec::new();
    // inverse Santaló corpus
    out.push(task("is[quadratic_1]", 1, |o| {
        check_is(
            "quadratic_1",
            &grid_1d(-12.0, 12.0, 1536, Symmetry::Symmetric, |x| 0.5 * x * x)?,
            c_or(o, E),
            Variant::Plain,
        )
    }));
    for (a, b) in [(1.0, 0.0), (1.0, 1.0), (2.0, 0.0), (2.0, 1.0)] {
        let name = format!("exp_wedge_a{a}_b{b}");
        out.push(task(format!("is[{name}]"), 1, move |o| {
            let g = spec_grid(
                &name,
                Family::ExpWedge { a, b },
                vec![Axis::with_spacing(-2.0, 1.0 / 64.0, 1024)?],
                Symmetry::None,
            )?;
            check_is(&name, &g, c_or(o, E), Variant::Plain)
        }));
    }
    out.push(task("is[abs_power_3]", 1, |o| {
        let g = spec_grid(
            "abs_power_3",
            Family::AbsPower { p: 3.0 },
            vec![Axis::new(-6.0, 6.0, 1537)?],
            Symmetry::Symmetric,
        )?;
        check_is("abs_power_3", &g, c_or(o, E), Variant::Plain)
    }));
    out.push(task("is[gauge_l1_1]", 1, |o| {
        let g = spec_grid(
            "gauge_l1_1",
            Family::GaugeL1 { scale: 1.0 },
            vec![Axis::new(-24.0, 24.0, 385)?],
            Symmetry::Unconditional,
        )?;
        check_is("gauge_l1_1", &g, c_or(o, 4.0), Variant::Unconditional)
    }));
    for (name, family) in [
        ("gauge_l1_2", Family::GaugeL1 { scale: 1.0 }),
        ("gauge_linf_2", Family::GaugeLinf { scale: 1.0 }),
        ("quadratic_2", Family::Quadratic { a: 1.0 }),
    ] {
        out.push(task(format!("is[{name}]"), 2, move |o| {
            let r = if name == "quadratic_2" { 9.0 } else { 20.0 };
            let axes = vec![Axis::new(-r, r, 321)?; 2];
            let g = spec_grid(name, family.clone(), axes, Symmetry::Unconditional)?;
            check_is(name, &g, c_or(o, 4.0), Variant::Unconditional)
        }));
    }
    out.push(task("mainresult[gamma_1,gamma_1]", 1, |o| {
        let g = LogConcaveDensity::gaussian(1)?;
        check_mainresult(&g, &g, c_or(o, E))
    }));
    out.push(task("mainresult[fm_10,fm_mirror_10]", 1, |o| {
        check_mainresult(&fm_density(10, false)?, &fm_density(10, true)?, c_or(o, E))
    }));
    for (name, dim) in [("tau_s", 1), ("tau_s_2", 2), ("gamma_1", 1)] {
        out.push(task(format!("mainresult2[{name}]"), dim, move |_| {
            check_mainresult2(&LogConcaveDensity::builtin(name)?)
        }));
    }
    for (a, b, c, dim) in [
        ("gamma_1", "gamma_1", 2.0 * PI, 1),
        ("tau_s", "tau_s", E, 1),
        ("gamma_1", "tau_s", E, 1),
        ("gamma_2", "gamma_2", 2.0 * PI, 2),
    ] {
        out.push(task(format!("epi[{a},{b}]"), dim, move |o| {
            check_epi(
                &LogConcaveDensity::builtin(a)?,
                &LogConcaveDensity::builtin(b)?,
                c_or(o, c),
            )
        }));
    }
    for (a, b, c) in [
        ("gamma_1", "gamma_1", E),
        ("tau_s", "tau_s", 4.0),
        ("tau", "tau_bar", E),
    ] {
        out.push(task(format!("entropy_transport[{a},{b}]"), 1, move |o| {
            check_entropy_transport(
                &LogConcaveDensity::builtin(a)?,
                &LogConcaveDensity::builtin(b)?,
                c_or(o, c),
            )
        }));
    }
    for (name, dim) in [("gamma_1", 1), ("gamma_2", 2), ("tau_s", 1), ("tau_s_2", 2)] {
        out.push(task(format!("ipp[{name}]"), dim, move |_| {
            ipp_check(&LogConcaveDensity::builtin(name)?)
        }));
    }
    out.push(task("ipp[quadratic_3]", 1, |_| {
        let v = grid_1d(-8.0, 8.0, 1024, Symmetry::Symmetric, |x| 1.5 * x * x)?;
        ipp_check(&LogConcaveDensity::from_grid("quadratic_3", v, None)?)
    }));
    for n in 1..=3 {
        out.push(task(format!("polytope_constants[n={n}]"), n, move |_| {
            check_polytope_constants(n)
        }));
    }
    out.push(task("ghost_equality[tau,tau_bar]", 1, |_| check_ghost_equality()));
    out
}

fn tasks(name: &str, seed: u64) -> Result<Vec<Task>> {
    Ok(match name {
        "duality" => duality_tasks(seed),
        "transport" => transport_tasks(seed),
        "sequences" => sequence_tasks(),
        "inequalities" => inequality_tasks(),
        "all" => {
            let mut t = duality_tasks(seed);
            t.extend(transport_tasks(seed));
            t.extend(sequence_tasks());
            t.extend(inequality_tasks());
            t
        }
        other => {
            return Err(Error::Usage(format!(
                "unknown suite '{other}' (expected one of {})",
                SUITES.join(", ")
            )))
        }
    })
}

/// Runs a named suite. Checks run in parallel; reports come back sorted by
/// `check_id`. A check that errors is reported as failed with the error in
/// its notes.
pub fn run_suite(name: &str, opts: &SuiteOptions) -> Result<Vec<CheckReport>> {
    let all = tasks(name, opts.seed)?;
    let selected: Vec<&Task> = all.iter().filter(|t| opts.n.is_none_or(|n| n == t.dim)).collect();
    let mut reports: Vec<CheckReport> = selected
        .par_iter()
        .map(|t| {
            let r = (t.run)(opts).unwrap_or_else(|e| {
                CheckReport::at_most(&t.id, f64::NAN, f64::NAN, 0.0, 0.0, "suite execution").with_note(e.to_string())
            });
            if opts.tol_scale != 1.0 {
                r.scale_tolerance(opts.tol_scale)
            } else {
                r
            }
        })
        .collect();
    reports.sort_by(|a, b| a.check_id.cmp(&b.check_id));
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn is_examples() {
        let abs = grid_1d(-24.0, 24.0, 384, Symmetry::Unconditional, f64::abs).unwrap();
        let r = check_is("abs", &abs, 4.0, Variant::Unconditional).unwrap();
        assert!(r.passed() && r.margin.abs() < 1e-4, "{r:?}");
        let q = grid_1d(-12.0, 12.0, 1536, Symmetry::Symmetric, |x| 0.5 * x * x).unwrap();
        let r = check_is("q", &q, E, Variant::Plain).unwrap();
        assert!((r.margin - ((2.0 * PI).ln() - 1.0)).abs() < 1e-5);
        let r2 = check_is("q", &q, 4.0, Variant::Plain).unwrap();
        assert!((r.margin - r2.margin - (4f64.ln() - 1.0)).abs() < 1e-12);
        let shifted = grid_1d(-24.0, 24.0, 384, Symmetry::None, |x| (x - 0.5).abs()).unwrap();
        let r = check_is("s", &shifted, 4.0, Variant::Symmetric).unwrap();
        assert_eq!(r.status, crate::report::Status::NotApplicable);
    }

    #[test]
    fn fm_sequence_values() {
        for k in [1, 5, 100] {
            let r = check_fm_sequence(k).unwrap();
            assert!(r.passed(), "{r:#?}");
        }
    }

    #[test]
    fn uncond_sequence_values() {
        let r = check_uncond_sequence(100).unwrap();
        assert!(r.passed(), "{r:#?}");
        assert!(r.margin < 0.02);
    }

    #[test]
    fn mainresult_examples() {
        let g = LogConcaveDensity::gaussian(1).unwrap();
        let r = check_mainresult(&g, &g, E).unwrap();
        assert!(r.passed());
        assert!((r.margin - (2.0 * PI / E).ln()).abs() < 1e-6);
        let r = check_mainresult(&fm_density(10, false).unwrap(), &fm_density(10, true).unwrap(), E).unwrap();
        assert!((r.margin - 2.0 * 1.1f64.ln()).abs() < 5e-3, "{r:?}");
        let r = check_mainresult(
            &LogConcaveDensity::tau().unwrap(),
            &LogConcaveDensity::tau_bar().unwrap(),
            E,
        )
        .unwrap();
        assert_eq!(r.status, crate::report::Status::NotApplicable);
    }

    #[test]
    fn mainresult2_tau_s() {
        let r = check_mainresult2(&LogConcaveDensity::tau_s(1).unwrap()).unwrap();
        assert!(r.passed());
        assert!((r.margin - 1.0).abs() < 1e-12, "{r:?}");
    }

    #[test]
    fn epi_examples() {
        let g = LogConcaveDensity::gaussian(1).unwrap();
        let r = check_epi(&g, &g, 2.0 * PI).unwrap();
        assert!(r.passed() && r.margin.abs() < 1e-6, "{r:?}");
        let s = LogConcaveDensity::tau_s(1).unwrap();
        let r = check_epi(&s, &s, E).unwrap();
        assert!(r.passed());
        let base = check_epi(&s, &g, E).unwrap().rhs;
        for lambda in [0.5, 2.0] {
            let d = check_epi(&s.dilate(lambda).unwrap(), &g, E).unwrap().rhs;
            assert!((d - base).abs() < 1e-8, "{d} vs {base}");
        }
    }

    #[test]
    fn entropy_transport_examples() {
        let g = LogConcaveDensity::gaussian(1).unwrap();
        let r = check_entropy_transport(&g, &g, E).unwrap();
        assert!(r.passed());
        assert!((r.lhs + (2.0 * PI * E).ln()).abs() < 1e-6 && (r.rhs + 2.0).abs() < 1e-6);
        assert!(check_entropy_transport(&g, &g, 2.0 * PI + 0.1).unwrap().failed());
        let s = LogConcaveDensity::tau_s(1).unwrap();
        let r = check_entropy_transport(&s, &s, 4.0).unwrap();
        assert!((r.margin - 1.0).abs() < 1e-12, "{r:?}");
        let r = check_entropy_transport(
            &LogConcaveDensity::tau().unwrap(),
            &LogConcaveDensity::tau_bar().unwrap(),
            E,
        )
        .unwrap();
        assert!(r.passed() && r.margin.abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn constants() {
        let r = check_polytope_constants(2).unwrap();
        assert!(r.passed(), "{r:#?}");
        assert_eq!(r.lhs, 8.0);
        let r = check_polytope_constants(3).unwrap();
        assert!(r.passed(), "{r:#?}");
        assert!((simplex_mahler_volume(3) - 256.0 / 36.0).abs() < 1e-12);
        assert!((simplex_mahler_volume(2) - 6.75).abs() < 1e-12);
    }

    #[test]
    fn ghost() {
        let r = check_ghost_equality().unwrap();
        assert!(r.passed(), "{r:#?}");
    }

    #[test]
    fn unknown_suite() {
        assert!(matches!(
            run_suite("nope", &SuiteOptions::default()),
            Err(Error::Usage(_))
        ));
    }
}
