//! Maximal correlation, quadratic Wasserstein cost and Kantorovich duality
//! for discrete measures.

use crate::conjugate::Envelope;
use crate::error::{Error, Result};
use crate::extended::INF;
use crate::grid::GridFunction;
use crate::lp;
use crate::measure::{Coupling, DiscreteMeasure};
use crate::report::CheckReport;

/// Both 1D measures at most this large: the monotone coupling is
/// cross-checked against the LP.
pub const CROSS_CHECK_ATOMS: usize = 64;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn same_dim(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "measures live in ℝ^{} and ℝ^{}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// The monotone (quantile) coupling of two 1D measures.
pub fn monotone_coupling(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<Coupling> {
    if a.dim() != 1 || b.dim() != 1 {
        return Err(Error::Dimension("the monotone coupling is one-dimensional".into()));
    }
    let order = |m: &DiscreteMeasure| {
        let mut idx: Vec<usize> = (0..m.len()).collect();
        idx.sort_by(|&i, &j| m.atoms()[i][0].total_cmp(&m.atoms()[j][0]));
        idx
    };
    let (oa, ob) = (order(a), order(b));
    let (n1, n2) = (a.len(), b.len());
    let mut mass = vec![0.0; n1 * n2];
    let mut ra: Vec<f64> = oa.iter().map(|&i| a.weights()[i]).collect();
    let mut rb: Vec<f64> = ob.iter().map(|&j| b.weights()[j]).collect();
    let (mut p, mut q) = (0, 0);
    while p < n1 && q < n2 {
        let last = p == n1 - 1 && q == n2 - 1;
        let x = if last { ra[p] } else { ra[p].min(rb[q]) };
        mass[oa[p] * n2 + ob[q]] += x;
        if last {
            break;
        }
        if q == n2 - 1 || (p < n1 - 1 && ra[p] < rb[q]) {
            rb[q] -= x;
            p += 1;
        } else {
            ra[p] -= x;
            q += 1;
        }
    }
    Ok(Coupling {
        rows: a.clone(),
        cols: b.clone(),
        mass,
    })
}

fn lp_coupling<C: Fn(&[f64], &[f64]) -> f64>(a: &DiscreteMeasure, b: &DiscreteMeasure, c: C) -> Result<Coupling> {
    let mut cost = Vec::with_capacity(a.len() * b.len());
    for x in a.atoms() {
        for y in b.atoms() {
            cost.push(c(x, y));
        }
    }
    let s = lp::solve(a.weights(), b.weights(), &cost)?;
    Ok(Coupling {
        rows: a.clone(),
        cols: b.clone(),
        mass: s.flow,
    })
}

/// Optimal coupling for `min ∑ π c`: monotone in 1D (cross-checked against
/// the LP on small inputs), the transportation simplex otherwise.
fn optimal<C: Fn(&[f64], &[f64]) -> f64 + Copy>(
    a: &DiscreteMeasure,
    b: &DiscreteMeasure,
    c: C,
) -> Result<(f64, Coupling)> {
    same_dim(a, b)?;
    if a.dim() == 1 {
        let pi = monotone_coupling(a, b)?;
        let v = pi.cost(c);
        if a.len() <= CROSS_CHECK_ATOMS && b.len() <= CROSS_CHECK_ATOMS {
            let v_lp = lp_coupling(a, b, c)?.cost(c);
            if (v - v_lp).abs() > 1e-10 * (1.0 + v.abs()) {
                return Err(Error::Solver(format!(
                    "monotone coupling value {v} disagrees with the LP value {v_lp}"
                )));
            }
        }
        return Ok((v, pi));
    }
    let pi = lp_coupling(a, b, c)?;
    Ok((pi.cost(c), pi))
}

/// `T(ν₁, ν₂) = sup_π ∫ x·y dπ`, with an optimal coupling.
pub fn max_correlation_cost(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<(f64, Coupling)> {
    let (v, pi) = optimal(a, b, |x, y| -dot(x, y))?;
    Ok((-v, pi))
}

/// `W₂²(ν₁, ν₂)`, with an optimal coupling.
pub fn w2_squared(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<(f64, Coupling)> {
    optimal(a, b, dist2)
}

/// Checks `T(ν₁,ν₂) + ½W₂²(ν₁,ν₂) = ½∫|x|²dν₁ + ½∫|y|²dν₂` with both sides from
/// independent LPs.
pub fn tw_identity_check(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<CheckReport> {
    let (t, _) = max_correlation_cost(a, b)?;
    let (w, _) = w2_squared(a, b)?;
    let lhs = t + 0.5 * w;
    let rhs = 0.5 * (a.second_moment() + b.second_moment());
    Ok(CheckReport::equal(
        "tw_identity",
        lhs,
        rhs,
        1e-9,
        1e-15 * (1.0 + rhs.abs()),
        "maximal correlation and quadratic transport cost identity",
    ))
}

/// Admissibility of a target for the `K` functional.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KValidity {
    Ok,
    NotCentered,
    HyperplaneSupported,
}

impl KValidity {
    pub fn as_str(&self) -> &'static str {
        match self {
            KValidity::Ok => "ok",
            KValidity::NotCentered => "not_centered",
            KValidity::HyperplaneSupported => "hyperplane_supported",
        }
    }
}

/// Centering and full-dimensionality tolerance.
pub const K_TOL: f64 = 1e-10;

/// `ν` is admissible iff it is centered and its support spans `ℝⁿ`
/// affinely.
pub fn validate_for_k(nu: &DiscreteMeasure) -> KValidity {
    let b = nu.barycenter();
    if b.iter().map(|c| c * c).sum::<f64>().sqrt() >= K_TOL {
        KValidity::NotCentered
    } else if nu.affine_rank(K_TOL) < nu.dim() {
        KValidity::HyperplaneSupported
    } else {
        KValidity::Ok
    }
}

/// `f*` at arbitrary points, consistent with the grid extension rule.
pub fn conjugate_at_points(f: &GridFunction, ys: &[Vec<f64>]) -> Vec<f64> {
    match f.dim() {
        1 => {
            let xs = f.axis(0).nodes();
            let Some(env) = Envelope::new(&xs, f.values()) else {
                return vec![INF; ys.len()];
            };
            let mut order: Vec<usize> = (0..ys.len()).collect();
            order.sort_by(|&i, &j| ys[i][0].total_cmp(&ys[j][0]));
            let sorted: Vec<f64> = order.iter().map(|&i| ys[i][0]).collect();
            let vals = env.conjugate_at(
                &sorted,
                1e-12 * (1.0 + sorted.iter().fold(0.0f64, |m, y| m.max(y.abs()))),
            );
            let mut out = vec![0.0; ys.len()];
            for (k, &i) in order.iter().enumerate() {
                out[i] = vals[k];
            }
            out
        }
        _ => ys
            .iter()
            .map(|y| {
                (0..f.len())
                    .filter(|&k| f.values()[k].is_finite())
                    .map(|k| dot(&f.point(k), y) - f.values()[k])
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect(),
    }
}

/// `∫ f dν₁ + ∫ f* dν₂ - T(ν₁, ν₂) ≥ 0`, zero for an optimal potential.
pub fn kantorovich_gap(f: &GridFunction, a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<f64> {
    same_dim(a, b)?;
    if f.dim() != a.dim() {
        return Err(Error::Dimension(format!(
            "function is {}D, measures are {}D",
            f.dim(),
            a.dim()
        )));
    }
    let mut int_f = 0.0;
    for (x, w) in a.atoms().iter().zip(a.weights()) {
        let inside = x.iter().zip(f.axes()).all(|(c, ax)| ax.contains(*c));
        let v = f.eval(x);
        if !inside || v.is_infinite() {
            return Err(Error::Domain(format!("atom {x:?} lies outside the finite region of f")));
        }
        int_f += w * v;
    }
    let fstar = conjugate_at_points(f, b.atoms());
    let mut int_g = 0.0;
    for ((y, w), v) in b.atoms().iter().zip(b.weights()).zip(&fstar) {
        if v.is_infinite() {
            return Err(Error::Domain(format!(
                "atom {y:?} lies outside the finite region of f*"
            )));
        }
        int_g += w * v;
    }
    let (t, _) = max_correlation_cost(a, b)?;
    Ok(int_f + int_g - t)
}

/// An isotropic Gaussian `N(mean, σ² I)` or a discrete measure.
#[derive(Clone, Debug, PartialEq)]
pub enum Law {
    Gaussian { mean: Vec<f64>, sigma: f64 },
    Discrete(DiscreteMeasure),
}

impl Law {
    pub fn dim(&self) -> usize {
        match self {
            Law::Gaussian { mean, .. } => mean.len(),
            Law::Discrete(m) => m.dim(),
        }
    }
}

/// `H(N(m, σ² I) | γ_n) = ½(nσ² + |m|² - n) - n log σ`.
pub fn gaussian_entropy(mean: &[f64], sigma: f64) -> f64 {
    let n = mean.len() as f64;
    0.5 * (n * sigma * sigma + dot(mean, mean) - n) - n * sigma.ln()
}

/// `W₂²` between isotropic Gaussians: `|m₁ - m₂|² + n(σ₁ - σ₂)²`.
pub fn gaussian_w2_squared(m1: &[f64], s1: f64, m2: &[f64], s2: f64) -> f64 {
    dist2(m1, m2) + m1.len() as f64 * (s1 - s2) * (s1 - s2)
}

/// `G(ν₁, ν₂) = H(ν₁|γ_n) + H(ν₂|γ_n) - ½W₂²(ν₁, ν₂)`; `+∞` when either law is
/// discrete (no density with respect to `γ_n`).
pub fn g_functional(a: &Law, b: &Law) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "laws live in ℝ^{} and ℝ^{}",
            a.dim(),
            b.dim()
        )));
    }
    match (a, b) {
        (Law::Gaussian { mean: m1, sigma: s1 }, Law::Gaussian { mean: m2, sigma: s2 }) => {
            if !(*s1 > 0.0 && *s2 > 0.0) {
                return Err(Error::InvalidParameter("Gaussian scales must be positive".into()));
            }
            Ok(gaussian_entropy(m1, *s1) + gaussian_entropy(m2, *s2) - 0.5 * gaussian_w2_squared(m1, *s1, m2, *s2))
        }
        _ => Ok(INF),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Axis, Symmetry};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn m1(pairs: &[(f64, f64)]) -> DiscreteMeasure {
        DiscreteMeasure::new(
            pairs.iter().map(|p| vec![p.1]).collect(),
            pairs.iter().map(|p| p.0).collect(),
        )
        .unwrap()
    }

    fn fm_pair(k: f64) -> (DiscreteMeasure, DiscreteMeasure) {
        let a = m1(&[(1.0 / (k + 1.0), -k), (k / (k + 1.0), 1.0)]);
        let b = m1(&[(k / (k + 1.0), -1.0), (1.0 / (k + 1.0), k)]);
        (a, b)
    }

    #[test]
    fn two_point_values() {
        let s = m1(&[(0.5, -1.0), (0.5, 1.0)]);
        assert_eq!(max_correlation_cost(&s, &s).unwrap().0, 1.0);
        let (w, _) = w2_squared(
            &DiscreteMeasure::dirac(&[1.0]).unwrap(),
            &DiscreteMeasure::dirac(&[-1.0]).unwrap(),
        )
        .unwrap();
        assert_eq!(w, 4.0);
    }

    #[test]
    fn fm_pair_values() {
        for k in [1.0, 2.0, 5.0, 10.0, 100.0] {
            let (a, b) = fm_pair(k);
            let (t, pi) = max_correlation_cost(&a, &b).unwrap();
            assert!((t - 1.0).abs() < 1e-12, "k={k}: {t}");
            let (w, _) = w2_squared(&a, &b).unwrap();
            assert!((w - 2.0 * (k - 1.0)).abs() < 1e-12 * (1.0 + w), "k={k}: {w}");
            let mut masses: Vec<f64> = pi.support().iter().map(|s| s.2).collect();
            masses.sort_by(f64::total_cmp);
            if k > 1.0 {
                assert!((masses[0] - 1.0 / (k + 1.0)).abs() < 1e-15);
                assert!((masses[2] - (k - 1.0) / (k + 1.0)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn mainresult2_w2() {
        let k = 100.0;
        let nu = m1(&[(0.5 / (k + 1.0), -k), (k / (k + 1.0), 0.0), (0.5 / (k + 1.0), k)]);
        let (w, _) = w2_squared(&nu, &DiscreteMeasure::cube(1).unwrap()).unwrap();
        assert!((w - (k * k - k + 1.0) / (k + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn tw_identity_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1, 2] {
            for _ in 0..20 {
                let mk = |rng: &mut ChaCha8Rng| {
                    let m = rng.gen_range(1..=10);
                    let atoms: Vec<Vec<f64>> = (0..m)
                        .map(|_| (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect())
                        .collect();
                    let w: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..1.0)).collect();
                    DiscreteMeasure::normalized(atoms, w).unwrap()
                };
                let (a, b) = (mk(&mut rng), mk(&mut rng));
                let r = tw_identity_check(&a, &b).unwrap();
                assert!(r.passed(), "{r:?}");
            }
        }
        let c2 = DiscreteMeasure::cube(2).unwrap();
        assert_eq!(max_correlation_cost(&c2, &c2).unwrap().0, 2.0);
    }

    #[test]
    fn symmetry_of_t() {
        let (a, b) = fm_pair(5.0);
        let (t1, t2) = (
            max_correlation_cost(&a, &b).unwrap().0,
            max_correlation_cost(&b, &a).unwrap().0,
        );
        assert!((t1 - t2).abs() < 1e-14);
    }

    #[test]
    fn dimension_mismatch() {
        let a = DiscreteMeasure::dirac(&[0.0]).unwrap();
        let b = DiscreteMeasure::dirac(&[0.0, 1.0]).unwrap();
        assert!(matches!(max_correlation_cost(&a, &b), Err(Error::Dimension(_))));
    }

    #[test]
    fn k_validity() {
        assert_eq!(validate_for_k(&m1(&[(0.5, -1.0), (0.5, 1.0)])), KValidity::Ok);
        assert_eq!(
            validate_for_k(&DiscreteMeasure::dirac(&[1.0]).unwrap()),
            KValidity::NotCentered
        );
        let line = DiscreteMeasure::uniform(vec![vec![-1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(validate_for_k(&line), KValidity::HyperplaneSupported);
        assert_eq!(
            validate_for_k(&DiscreteMeasure::dirac(&[0.0]).unwrap()),
            KValidity::HyperplaneSupported
        );
    }

    #[test]
    fn kantorovich_examples() {
        let axis = Axis::new(-4.0, 4.0, 81).unwrap();
        let s = m1(&[(0.5, -1.0), (0.5, 1.0)]);
        let q = GridFunction::from_fn_1d(axis.clone(), Symmetry::Symmetric, |x| 0.5 * x * x).unwrap();
        assert!(kantorovich_gap(&q, &s, &s).unwrap().abs() < 1e-12);
        let a = GridFunction::from_fn_1d(axis, Symmetry::Symmetric, f64::abs).unwrap();
        let zero = DiscreteMeasure::dirac(&[0.0]).unwrap();
        assert!((kantorovich_gap(&a, &s, &zero).unwrap() - 1.0).abs() < 1e-12);
        let far = DiscreteMeasure::dirac(&[2.0]).unwrap();
        assert!(matches!(kantorovich_gap(&a, &s, &far), Err(Error::Domain(_))));
        let out = DiscreteMeasure::dirac(&[9.0]).unwrap();
        assert!(matches!(kantorovich_gap(&a, &out, &zero), Err(Error::Domain(_))));
    }

    #[test]
    fn talagrand_equality() {
        for a in [0.5, 1.0, 2.0] {
            let p = Law::Gaussian {
                mean: vec![-a],
                sigma: 1.0,
            };
            let q = Law::Gaussian {
                mean: vec![a],
                sigma: 1.0,
            };
            let w = gaussian_w2_squared(&[-a], 1.0, &[a], 1.0);
            let h = gaussian_entropy(&[-a], 1.0) + gaussian_entropy(&[a], 1.0);
            assert!((0.25 * w - h).abs() < 1e-15);
            let g = g_functional(&p, &q).unwrap();
            assert!((g - (a * a - 2.0 * a * a)).abs() < 1e-15);
        }
        let d = Law::Discrete(DiscreteMeasure::dirac(&[0.0]).unwrap());
        assert!(g_functional(
            &d,
            &Law::Gaussian {
                mean: vec![0.0],
                sigma: 1.0
            }
        )
        .unwrap()
        .is_infinite());
    }
}
