//! Lipschitz regularization by inf-convolution and sign-flip symmetrization.

use crate::error::{Error, Result};
use crate::extended::INF;
use crate::grid::{Axis, GridFunction, Symmetry};

/// `f_r(x) = min_y f(y) + r|x - y|` over the grid nodes.
///
/// The result is convex when `f` is, `r`-Lipschitz, lies below `f`, and its
/// conjugate is `f*` restricted to the ball of radius `r`.
pub fn lipschitz_regularize(f: &GridFunction, r: f64) -> Result<GridFunction> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "Lipschitz constant must be positive and finite, got {r}"
        )));
    }
    let values = match f.dim() {
        1 => {
            let h = f.axis(0).h();
            let mut g = f.values().to_vec();
            for i in 1..g.len() {
                g[i] = g[i].min(g[i - 1] + r * h);
            }
            for i in (0..g.len() - 1).rev() {
                g[i] = g[i].min(g[i + 1] + r * h);
            }
            g
        }
        _ => {
            let finite: Vec<(Vec<f64>, f64)> = (0..f.len())
                .filter(|&k| f.values()[k].is_finite())
                .map(|k| (f.point(k), f.values()[k]))
                .collect();
            (0..f.len())
                .map(|k| {
                    let x = f.point(k);
                    finite
                        .iter()
                        .map(|(y, v)| v + r * ((x[0] - y[0]).hypot(x[1] - y[1])))
                        .fold(INF, f64::min)
                })
                .collect()
        }
    };
    let sym = f.symmetry();
    let out = GridFunction::new(f.axes().to_vec(), values, Symmetry::None)?;
    Ok(out.clone().with_symmetry(sym).unwrap_or(out))
}

fn flips(dim: usize, sym: Symmetry) -> Vec<[bool; 2]> {
    match (sym, dim) {
        (Symmetry::None, _) => vec![[false, false]],
        (Symmetry::Symmetric, _) | (_, 1) => vec![[false, false], [true, true]],
        (Symmetry::Unconditional, _) => vec![[false, false], [true, false], [false, true], [true, true]],
    }
}

/// Replaces `values` by their average over the sign-flip group of `sym`.
/// The axes must be symmetric about the origin.
pub(crate) fn average_over_flips(axes: &[Axis], values: &mut [f64], sym: Symmetry) {
    let group = flips(axes.len(), sym);
    if group.len() == 1 {
        return;
    }
    let n0 = axes[0].steps;
    let n1 = if axes.len() == 2 { axes[1].steps } else { 1 };
    let src = values.to_vec();
    for i in 0..n0 {
        for j in 0..n1 {
            // Summing in sorted order makes the average bitwise identical
            // across every orbit member.
            let mut orbit: Vec<f64> = group
                .iter()
                .map(|fl| {
                    let ii = if fl[0] { n0 - 1 - i } else { i };
                    let jj = if axes.len() == 2 && fl[1] { n1 - 1 - j } else { j };
                    src[ii * n1 + jj]
                })
                .collect();
            orbit.sort_by(f64::total_cmp);
            values[i * n1 + j] = if orbit.contains(&INF) {
                INF
            } else {
                orbit.iter().sum::<f64>() / group.len() as f64
            };
        }
    }
}

pub(crate) fn symmetrize_unchecked(f: &GridFunction, mode: Symmetry) -> GridFunction {
    let mut values = f.values().to_vec();
    average_over_flips(f.axes(), &mut values, mode);
    GridFunction::new(f.axes().to_vec(), values, mode).expect("group average keeps finiteness")
}

/// Average of `f` over the sign-flip group: `x ↦ ±x` for `Symmetric`, every
/// coordinate flip for `Unconditional`. Idempotent.
pub fn symmetrize(f: &GridFunction, mode: Symmetry) -> Result<GridFunction> {
    if mode == Symmetry::None {
        return Err(Error::InvalidParameter(
            "symmetrize mode must be symmetric or unconditional".into(),
        ));
    }
    if !f.axes().iter().all(|a| a.is_symmetric()) {
        return Err(Error::Grid(
            "symmetrize requires a grid symmetric about the origin".into(),
        ));
    }
    Ok(symmetrize_unchecked(f, mode))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conjugate;

    fn ax(lo: f64, hi: f64, n: usize) -> Axis {
        Axis::new(lo, hi, n).unwrap()
    }

    #[test]
    fn point_indicator() {
        let a = ax(-2.0, 2.0, 41);
        let f =
            GridFunction::from_fn_1d(a.clone(), Symmetry::None, |x| if x.abs() < 1e-12 { 0.0 } else { INF }).unwrap();
        let g = lipschitz_regularize(&f, 3.0).unwrap();
        for (x, v) in a.nodes().iter().zip(g.values()) {
            assert!((v - 3.0 * x.abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn square_closed_form() {
        let a = ax(-3.0, 3.0, 601);
        let f = GridFunction::from_fn_1d(a.clone(), Symmetry::Symmetric, |x| x * x).unwrap();
        let g = lipschitz_regularize(&f, 1.0).unwrap();
        let h = a.h();
        for (x, v) in a.nodes().iter().zip(g.values()) {
            let exact = if x.abs() <= 0.5 { x * x } else { x.abs() - 0.25 };
            assert!((v - exact).abs() <= h * h, "x={x}");
        }
        assert_eq!(g.symmetry(), Symmetry::Symmetric);
    }

    #[test]
    fn large_r_is_identity() {
        let a = ax(-3.0, 3.0, 61);
        let f = GridFunction::from_fn_1d(a, Symmetry::None, |x| (x - 0.3).powi(2) + x.abs()).unwrap();
        let g = lipschitz_regularize(&f, 1e6).unwrap();
        for (u, v) in f.values().iter().zip(g.values()) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn invalid_r() {
        let f = GridFunction::from_fn_1d(ax(-1.0, 1.0, 5), Symmetry::None, |x| x).unwrap();
        assert!(matches!(lipschitz_regularize(&f, 0.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(
            lipschitz_regularize(&f, -1.0),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn conjugate_is_restricted_to_ball() {
        let a = ax(-4.0, 4.0, 401);
        let f = GridFunction::from_fn_1d(a, Symmetry::None, |x| (x - 0.5).powi(2)).unwrap();
        let r = 2.0;
        let fr = lipschitz_regularize(&f, r).unwrap();
        let g = conjugate::legendre(&f).unwrap();
        let gr = conjugate::legendre_grid(&fr, g.axes()).unwrap();
        for ((y, u), v) in g.axis(0).nodes().iter().zip(g.values()).zip(gr.values()) {
            if y.abs() < r - 1e-9 && u.is_finite() {
                assert!((u - v).abs() < 1e-9, "y={y}");
            }
            if y.abs() > r + 1e-9 {
                assert!(v.is_infinite());
            }
        }
    }

    #[test]
    fn symmetrize_examples() {
        let a = ax(-2.0, 2.0, 21);
        let f = GridFunction::from_fn_1d(a.clone(), Symmetry::None, |x| x + x * x).unwrap();
        let s = symmetrize(&f, Symmetry::Symmetric).unwrap();
        for (x, v) in a.nodes().iter().zip(s.values()) {
            assert!((v - x * x).abs() < 1e-14);
        }
        let again = symmetrize(&s, Symmetry::Symmetric).unwrap();
        assert_eq!(again.values(), s.values());

        let f2 = GridFunction::from_fn(vec![a.clone(), a.clone()], Symmetry::None, |x| x[0] + x[1].abs()).unwrap();
        let u = symmetrize(&f2, Symmetry::Unconditional).unwrap();
        for k in 0..u.len() {
            let x = u.point(k);
            assert!((u.values()[k] - x[1].abs()).abs() < 1e-14);
        }
        assert_eq!(u.symmetry(), Symmetry::Unconditional);
    }

    #[test]
    fn symmetrize_needs_symmetric_grid() {
        let f = GridFunction::from_fn_1d(ax(-1.0, 2.0, 7), Symmetry::None, |x| x).unwrap();
        assert!(matches!(symmetrize(&f, Symmetry::Symmetric), Err(Error::Grid(_))));
    }
}
