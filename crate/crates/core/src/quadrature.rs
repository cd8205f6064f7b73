//! Quadrature of `e^{-f}`-weighted integrands over grid functions.
//!
//! The finite region of the grid is split into runs of consecutive finite
//! nodes, and runs are further split at detected kinks, so every piece is
//! smooth. Each piece gets the highest-order Newton–Cotes/Romberg rule its
//! node count allows (Boole, Simpson, Simpson 3/8, trapezoid); the gap to the
//! next lower rule is reported as the error estimate. In 1D the affine
//! extension beyond an open grid edge is integrated exactly with 8-point
//! Gauss–Laguerre. In 2D the tails are bounded but not added.

use crate::error::{Error, Result};
use crate::grid::GridFunction;

/// A quadrature value with its estimated absolute error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quad {
    pub value: f64,
    pub est_error: f64,
}

const LAGUERRE: [(f64, f64); 8] = [
    (0.17027963230510093, 0.36918858934163495),
    (0.90370177679938, 0.4187867808143447),
    (2.251086629866131, 0.17579498663717255),
    (4.266700170287659, 0.033343492261215794),
    (7.0459054023934655, 0.0027945362352256834),
    (10.758516010180996, 9.076508773358139e-05),
    (15.740678641278004, 8.48574671627257e-07),
    (22.863131736889265, 1.0480011748715153e-09),
];

/// Tail mass above this fraction of the bulk is an error.
pub const TAIL_LIMIT: f64 = 1e-6;

/// Node weights (in units of `h`) for a run of `cells` cells: the chosen
/// rule and the next lower one.
fn rule_weights(cells: usize) -> (Vec<f64>, Vec<f64>) {
    let n = cells + 1;
    let mut trap = vec![1.0; n];
    trap[0] = 0.5;
    trap[n - 1] = 0.5;
    if cells == 0 {
        return (vec![0.0], vec![0.0]);
    }
    if cells == 1 {
        return (trap.clone(), trap);
    }
    let simpson = |len: usize, w: &mut [f64], off: usize| {
        for k in 0..len / 2 {
            w[off + 2 * k] += 1.0 / 3.0;
            w[off + 2 * k + 1] += 4.0 / 3.0;
            w[off + 2 * k + 2] += 1.0 / 3.0;
        }
    };
    let boole = |len: usize, w: &mut [f64], off: usize| {
        for k in 0..len / 4 {
            let o = off + 4 * k;
            for (d, c) in [7.0, 32.0, 12.0, 32.0, 7.0].iter().enumerate() {
                w[o + d] += c * 2.0 / 45.0;
            }
        }
    };
    let mut best = vec![0.0; n];
    let mut lower = vec![0.0; n];
    if cells.is_multiple_of(4) {
        boole(cells, &mut best, 0);
        simpson(cells, &mut lower, 0);
    } else if cells.is_multiple_of(2) {
        simpson(cells, &mut best, 0);
        lower = trap;
    } else {
        let head = cells - 3;
        if head.is_multiple_of(4) {
            boole(head, &mut best, 0);
        } else {
            simpson(head, &mut best, 0);
        }
        for (d, c) in [3.0 / 8.0, 9.0 / 8.0, 9.0 / 8.0, 3.0 / 8.0].iter().enumerate() {
            best[head + d] += c;
        }
        lower = trap;
    }
    (best, lower)
}

/// Kink flags along a line of values: the second difference at the node
/// dominates those of its neighbours.
fn kinks(f: &[f64]) -> Vec<bool> {
    let n = f.len();
    let sd: Vec<Option<f64>> = (0..n)
        .map(|i| {
            if i == 0 || i + 1 == n {
                return None;
            }
            let (a, b, c) = (f[i - 1], f[i], f[i + 1]);
            if a.is_finite() && b.is_finite() && c.is_finite() {
                Some(a - 2.0 * b + c)
            } else {
                None
            }
        })
        .collect();
    (0..n)
        .map(|i| match sd[i] {
            None => false,
            Some(s) => {
                let l = if i > 0 { sd[i - 1].unwrap_or(0.0).abs() } else { 0.0 };
                let r = if i + 1 < n { sd[i + 1].unwrap_or(0.0).abs() } else { 0.0 };
                s.abs() > 4.0 * l.max(r) + 1e-9 * (1.0 + f[i].abs())
            }
        })
        .collect()
}

/// Maximal smooth runs `[a, b]` (node indices, `b > a`) of finite nodes,
/// split at kinks.
fn segments(f: &[f64], kink: &[bool]) -> Vec<(usize, usize)> {
    let n = f.len();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        if !f[i].is_finite() {
            i += 1;
            continue;
        }
        let a = i;
        let mut b = i;
        while b + 1 < n && f[b + 1].is_finite() {
            b += 1;
            if kink[b] && b + 1 < n && f[b + 1].is_finite() {
                break;
            }
        }
        if b > a {
            out.push((a, b));
        }
        if b + 1 < n && f[b + 1].is_finite() && kink[b] {
            i = b;
        } else {
            i = b + 1;
        }
    }
    out
}

/// Derivative at node `i` of the run `[a, b]`, using only nodes of the run.
fn derivative(f: &[f64], a: usize, b: usize, i: usize, h: f64) -> f64 {
    if i > a && i < b {
        (f[i + 1] - f[i - 1]) / (2.0 * h)
    } else if i == a {
        if b - a >= 2 {
            (-3.0 * f[a] + 4.0 * f[a + 1] - f[a + 2]) / (2.0 * h)
        } else {
            (f[a + 1] - f[a]) / h
        }
    } else if b - a >= 2 {
        (3.0 * f[b] - 4.0 * f[b - 1] + f[b - 2]) / (2.0 * h)
    } else {
        (f[b] - f[b - 1]) / h
    }
}

/// `∫ e^{-f}`.
pub fn integrate_exp_neg(f: &GridFunction) -> Result<Quad> {
    let shift = f.min_finite();
    let q = integrate_with(f, shift, |_, _, _| 1.0)?;
    let s = (-shift).exp();
    Ok(Quad {
        value: q.value * s,
        est_error: q.est_error * s,
    })
}

/// `log ∫ e^{-f}` and its estimated absolute error.
pub fn log_integral_exp_neg(f: &GridFunction) -> Result<Quad> {
    let shift = f.min_finite();
    let q = integrate_with(f, shift, |_, _, _| 1.0)?;
    Ok(Quad {
        value: q.value.ln() - shift,
        est_error: q.est_error / q.value,
    })
}

/// `∫ e^{-(f(x) - shift)} g(x, f(x), ∇f(x)) dx` over the finite region of
/// `f` (plus the exact affine tails in 1D).
///
/// Gradients are central differences inside smooth runs and one-sided at run
/// ends, so at a kink each side sees its own gradient. Returns `+∞` when an
/// open side does not decay; fails with [`Error::GridTooSmall`] when the
/// tail mass exceeds [`TAIL_LIMIT`] of the bulk.
pub fn integrate_with<G>(f: &GridFunction, shift: f64, g: G) -> Result<Quad>
where
    G: Fn(&[f64], f64, &[f64]) -> f64,
{
    match f.dim() {
        1 => integrate_1d(f, shift, &g),
        _ => integrate_2d(f, shift, &g),
    }
}

fn integrate_1d<G>(f: &GridFunction, shift: f64, g: &G) -> Result<Quad>
where
    G: Fn(&[f64], f64, &[f64]) -> f64,
{
    let axis = f.axis(0);
    let h = axis.h();
    let xs = axis.nodes();
    let v = f.values();
    let kink = kinks(v);
    let mut value = 0.0;
    let mut lower = 0.0;
    let mut mass = 0.0;
    for (a, b) in segments(v, &kink) {
        let (wb, wl) = rule_weights(b - a);
        for i in a..=b {
            let d = derivative(v, a, b, i, h);
            let e = (-(v[i] - shift)).exp();
            let term = e * g(&[xs[i]], v[i], &[d]) * h;
            value += wb[i - a] * term;
            lower += wl[i - a] * term;
            mass += wb[i - a] * e * h;
        }
    }
    let mut est = (value - lower).abs();
    let mut tail_mass = 0.0;
    let n = v.len();
    let sides = [(f.left_open(), 0usize, -1.0f64), (f.right_open(), n - 1, 1.0f64)];
    for (open, i, dir) in sides {
        if !open {
            continue;
        }
        let (sl, sr) = f.envelope_slopes().expect("open side has two finite nodes");
        // slope of f in the outward direction
        let out = if dir < 0.0 { -sl } else { sr };
        if out <= 0.0 {
            return Ok(Quad {
                value: f64::INFINITY,
                est_error: f64::INFINITY,
            });
        }
        let slope = dir * out;
        let base = (-(v[i] - shift)).exp() / out;
        let mut t_int = 0.0;
        for (t, w) in LAGUERRE {
            let x = xs[i] + dir * t / out;
            t_int += w * g(&[x], v[i] + t, &[slope]);
        }
        value += base * t_int;
        est += 1e-15 * (base * t_int).abs();
        tail_mass += base;
    }
    if tail_mass > TAIL_LIMIT * mass {
        return Err(Error::GridTooSmall {
            tail: tail_mass,
            bulk: mass,
            suggestion: format!(
                "widen the grid beyond [{}, {}] until e^(-f) at the edges is below 1e-6 of its peak",
                axis.lo, axis.hi
            ),
        });
    }
    Ok(Quad { value, est_error: est })
}

fn integrate_2d<G>(f: &GridFunction, shift: f64, g: &G) -> Result<Quad>
where
    G: Fn(&[f64], f64, &[f64]) -> f64,
{
    let (a0, a1) = (f.axis(0), f.axis(1));
    let (n0, n1) = (a0.steps, a1.steps);
    let (h0, h1) = (a0.h(), a1.h());
    let (x0, x1) = (a0.nodes(), a1.nodes());
    let v = f.values();
    let at = |i: usize, j: usize| v[i * n1 + j];

    let (mut imin, mut imax, mut jmin, mut jmax, mut count) = (n0, 0, n1, 0, 0usize);
    for i in 0..n0 {
        for j in 0..n1 {
            if at(i, j).is_finite() {
                imin = imin.min(i);
                imax = imax.max(i);
                jmin = jmin.min(j);
                jmax = jmax.max(j);
                count += 1;
            }
        }
    }
    let rect = count == (imax - imin + 1) * (jmax - jmin + 1);
    if !rect {
        return masked_trapezoid(f, shift, g);
    }

    // Kink lines along each axis, ignored when they are not axis-aligned.
    let line_kinks = |len: usize, lines: usize, get: &dyn Fn(usize, usize) -> f64| -> Vec<bool> {
        let mut flag = vec![false; len];
        for l in 0..lines {
            let line: Vec<f64> = (0..len).map(|k| get(l, k)).collect();
            for (k, b) in kinks(&line).into_iter().enumerate() {
                flag[k] |= b;
            }
        }
        if flag.iter().filter(|&&b| b).count() * 8 > len {
            vec![false; len]
        } else {
            flag
        }
    };
    let k0 = line_kinks(n0, n1, &|j, i| at(i, j));
    let k1 = line_kinks(n1, n0, &|i, j| at(i, j));
    let mask0: Vec<f64> = (0..n0)
        .map(|i| if i >= imin && i <= imax { 0.0 } else { f64::INFINITY })
        .collect();
    let mask1: Vec<f64> = (0..n1)
        .map(|j| if j >= jmin && j <= jmax { 0.0 } else { f64::INFINITY })
        .collect();
    let seg0 = segments(&mask0, &k0);
    let seg1 = segments(&mask1, &k1);

    let mut value = 0.0;
    let mut lower = 0.0;
    let mut mass = 0.0;
    let cols: Vec<Vec<f64>> = (0..n1).map(|j| (0..n0).map(|i| at(i, j)).collect()).collect();
    for &(a, b) in &seg0 {
        let (wb0, wl0) = rule_weights(b - a);
        for &(c, d) in &seg1 {
            let (wb1, wl1) = rule_weights(d - c);
            for i in a..=b {
                let row = &v[i * n1..(i + 1) * n1];
                for j in c..=d {
                    let g0 = derivative(&cols[j], a, b, i, h0);
                    let g1 = derivative(row, c, d, j, h1);
                    let val = at(i, j);
                    let e = (-(val - shift)).exp();
                    let term = e * g(&[x0[i], x1[j]], val, &[g0, g1]) * h0 * h1;
                    value += wb0[i - a] * wb1[j - c] * term;
                    lower += wl0[i - a] * wl1[j - c] * term;
                    mass += wb0[i - a] * wb1[j - c] * e * h0 * h1;
                }
            }
        }
    }
    let mut est = (value - lower).abs();

    // Tail bound along grid edges that the finite rectangle touches.
    let mut tail = 0.0;
    let mut edge = |fe: f64, fin: f64, h_out: f64, h_along: f64| -> bool {
        let out = (fe - fin) / h_out;
        let e = (-(fe - shift)).exp();
        if out <= 0.0 {
            if e * h_along > 1e-300 {
                return false;
            }
            return true;
        }
        tail += e * h_along / out;
        true
    };
    let mut ok = true;
    if imin == 0 {
        for j in jmin..=jmax {
            ok &= edge(at(0, j), at(1, j), h0, h1);
        }
    }
    if imax == n0 - 1 {
        for j in jmin..=jmax {
            ok &= edge(at(n0 - 1, j), at(n0 - 2, j), h0, h1);
        }
    }
    if jmin == 0 {
        for i in imin..=imax {
            ok &= edge(at(i, 0), at(i, 1), h1, h0);
        }
    }
    if jmax == n1 - 1 {
        for i in imin..=imax {
            ok &= edge(at(i, n1 - 1), at(i, n1 - 2), h1, h0);
        }
    }
    if !ok {
        return Ok(Quad {
            value: f64::INFINITY,
            est_error: f64::INFINITY,
        });
    }
    if tail > TAIL_LIMIT * mass {
        return Err(Error::GridTooSmall {
            tail,
            bulk: mass,
            suggestion: format!("widen the grid beyond [{}, {}] x [{}, {}]", a0.lo, a0.hi, a1.lo, a1.hi),
        });
    }
    est += tail * (value / mass).abs();
    Ok(Quad { value, est_error: est })
}

/// Cell-wise trapezoid over cells whose four corners are finite, with the
/// gap to the doubled-spacing sum as the error estimate.
fn masked_trapezoid<G>(f: &GridFunction, shift: f64, g: &G) -> Result<Quad>
where
    G: Fn(&[f64], f64, &[f64]) -> f64,
{
    let (a0, a1) = (f.axis(0), f.axis(1));
    let (n0, n1) = (a0.steps, a1.steps);
    let (h0, h1) = (a0.h(), a1.h());
    let (x0, x1) = (a0.nodes(), a1.nodes());
    let v = f.values();
    let at = |i: usize, j: usize| v[i * n1 + j];
    let fin = |i: usize, j: usize| at(i, j).is_finite();
    let grad = |i: usize, j: usize| -> [f64; 2] {
        let d0 = if i > 0 && i + 1 < n0 && fin(i - 1, j) && fin(i + 1, j) {
            (at(i + 1, j) - at(i - 1, j)) / (2.0 * h0)
        } else if i + 1 < n0 && fin(i + 1, j) {
            (at(i + 1, j) - at(i, j)) / h0
        } else if i > 0 && fin(i - 1, j) {
            (at(i, j) - at(i - 1, j)) / h0
        } else {
            0.0
        };
        let d1 = if j > 0 && j + 1 < n1 && fin(i, j - 1) && fin(i, j + 1) {
            (at(i, j + 1) - at(i, j - 1)) / (2.0 * h1)
        } else if j + 1 < n1 && fin(i, j + 1) {
            (at(i, j + 1) - at(i, j)) / h1
        } else if j > 0 && fin(i, j - 1) {
            (at(i, j) - at(i, j - 1)) / h1
        } else {
            0.0
        };
        [d0, d1]
    };
    let node = |i: usize, j: usize| -> f64 {
        let val = at(i, j);
        (-(val - shift)).exp() * g(&[x0[i], x1[j]], val, &grad(i, j))
    };
    let mut cache = vec![f64::NAN; n0 * n1];
    let mut value_at = |i: usize, j: usize| -> f64 {
        let k = i * n1 + j;
        if cache[k].is_nan() {
            cache[k] = node(i, j);
        }
        cache[k]
    };
    let mut fine = 0.0;
    for i in 0..n0 - 1 {
        for j in 0..n1 - 1 {
            if fin(i, j) && fin(i + 1, j) && fin(i, j + 1) && fin(i + 1, j + 1) {
                fine += 0.25
                    * h0
                    * h1
                    * (value_at(i, j) + value_at(i + 1, j) + value_at(i, j + 1) + value_at(i + 1, j + 1));
            }
        }
    }
    let mut coarse = 0.0;
    let mut i = 0;
    while i + 2 < n0 {
        let mut j = 0;
        while j + 2 < n1 {
            if fin(i, j) && fin(i + 2, j) && fin(i, j + 2) && fin(i + 2, j + 2) {
                coarse += h0 * h1 * (value_at(i, j) + value_at(i + 2, j) + value_at(i, j + 2) + value_at(i + 2, j + 2));
            }
            j += 2;
        }
        i += 2;
    }
    Ok(Quad {
        value: fine,
        est_error: (fine - coarse).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extended::INF;
    use crate::grid::{Axis, Symmetry};
    use std::f64::consts::PI;

    fn ax(lo: f64, hi: f64, n: usize) -> Axis {
        Axis::new(lo, hi, n).unwrap()
    }

    #[test]
    fn rules_integrate_polynomials() {
        for cells in 1..13 {
            let (w, _) = rule_weights(cells);
            let h = 1.0 / cells as f64;
            let s: f64 = w.iter().enumerate().map(|(i, w)| w * h * (i as f64 * h)).sum();
            assert!((s - 0.5).abs() < 1e-14, "cells={cells}");
            if cells >= 2 {
                let s3: f64 = w.iter().enumerate().map(|(i, w)| w * h * (i as f64 * h).powi(3)).sum();
                assert!((s3 - 0.25).abs() < 1e-14, "cells={cells}");
            }
        }
    }

    #[test]
    fn kink_splitting() {
        let f = [2.0, 1.0, 0.0, 1.0, 2.0];
        assert_eq!(kinks(&f), vec![false, false, true, false, false]);
        assert_eq!(segments(&f, &kinks(&f)), vec![(0, 2), (2, 4)]);
        let g = [INF, 0.0, 1.0, 2.0, INF];
        assert_eq!(segments(&g, &kinks(&g)), vec![(1, 3)]);
    }

    #[test]
    fn gaussian_1d() {
        let f = GridFunction::from_fn_1d(ax(-8.0, 8.0, 1025), Symmetry::Symmetric, |x| x * x / 2.0).unwrap();
        let q = integrate_exp_neg(&f).unwrap();
        assert!((q.value / (2.0 * PI).sqrt() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn laplace_with_tails() {
        let f = GridFunction::from_fn_1d(ax(-20.0, 20.0, 801), Symmetry::Symmetric, |x| x.abs()).unwrap();
        let q = integrate_exp_neg(&f).unwrap();
        assert!((q.value - 2.0).abs() < 1e-9, "{}", q.value);
        // second moment with exact tails: ∫x² e^{-|x|} = 4
        let m2 = integrate_with(&f, 0.0, |x, _, _| x[0] * x[0]).unwrap();
        assert!((m2.value - 4.0).abs() < 1e-8, "{}", m2.value);
    }

    #[test]
    fn small_grid_is_rejected() {
        let f = GridFunction::from_fn_1d(ax(-3.0, 3.0, 101), Symmetry::Symmetric, |x| x.abs()).unwrap();
        assert!(matches!(integrate_exp_neg(&f), Err(Error::GridTooSmall { .. })));
    }

    #[test]
    fn non_decaying_is_infinite() {
        let f = GridFunction::from_fn_1d(ax(-3.0, 3.0, 101), Symmetry::None, |x| x).unwrap();
        assert!(integrate_exp_neg(&f).unwrap().value.is_infinite());
    }

    #[test]
    fn wedge_with_boundary_node() {
        // e^{-(1+x)} on [-1, ∞): mass 1, Fisher-type integrand (1-x)² gives 2
        let f = GridFunction::from_fn_1d(ax(-2.0, 38.0, 2561), Symmetry::None, |x| {
            if x >= -1.0 - 1e-12 {
                1.0 + x
            } else {
                INF
            }
        })
        .unwrap();
        let q = integrate_exp_neg(&f).unwrap();
        assert!((q.value - 1.0).abs() < 1e-9, "{}", q.value);
        let i = integrate_with(&f, 0.0, |x, _, d| (d[0] - x[0]).powi(2)).unwrap();
        assert!((i.value - 2.0).abs() < 1e-8, "{}", i.value);
    }

    #[test]
    fn gradient_sides_at_kink() {
        let f = GridFunction::from_fn_1d(ax(-30.0, 30.0, 1201), Symmetry::Symmetric, |x| x.abs()).unwrap();
        // ∫ (f')² e^{-|x|} = 2 exactly when each side uses its own slope
        let q = integrate_with(&f, 0.0, |_, _, d| d[0] * d[0]).unwrap();
        assert!((q.value - 2.0).abs() < 1e-9, "{}", q.value);
    }

    #[test]
    fn gauge_l1_2d() {
        let a = ax(-24.0, 24.0, 385);
        let f =
            GridFunction::from_fn(vec![a.clone(), a], Symmetry::Unconditional, |x| x[0].abs() + x[1].abs()).unwrap();
        let q = integrate_exp_neg(&f).unwrap();
        assert!((q.value - 4.0).abs() < 1e-6, "{}", q.value);
    }

    #[test]
    fn gaussian_2d_and_box() {
        let a = ax(-8.0, 8.0, 161);
        let f = GridFunction::from_fn(vec![a.clone(), a], Symmetry::None, |x| {
            (x[0] * x[0] + x[1] * x[1]) / 2.0
        })
        .unwrap();
        let q = integrate_exp_neg(&f).unwrap();
        assert!((q.value / (2.0 * PI) - 1.0).abs() < 1e-10);
        let b = ax(-2.0, 2.0, 81);
        let boxf = GridFunction::from_fn(vec![b.clone(), b], Symmetry::None, |x| {
            if x[0].abs() <= 1.0 + 1e-12 && x[1].abs() <= 1.0 + 1e-12 {
                0.0
            } else {
                INF
            }
        })
        .unwrap();
        assert!((integrate_exp_neg(&boxf).unwrap().value - 4.0).abs() < 1e-12);
    }

    #[test]
    fn masked_region() {
        let b = ax(-2.0, 2.0, 201);
        let disk = GridFunction::from_fn(vec![b.clone(), b], Symmetry::None, |x| {
            if x[0].abs() + x[1].abs() <= 1.0 + 1e-12 {
                0.0
            } else {
                INF
            }
        })
        .unwrap();
        let q = integrate_exp_neg(&disk).unwrap();
        assert!((q.value - 2.0).abs() < 0.05, "{}", q.value);
    }
}
