//! Discrete Legendre–Fenchel transforms of grid functions.
//!
//! The 1D transform computes the lower convex envelope of the samples and
//! merges its slopes with the sorted dual nodes, so it runs in linear time.
//! The 2D transform factorizes over the coordinates: a 1D transform of every
//! row along the second axis, then a 1D transform of every column of the
//! negated intermediate along the first axis.

use crate::error::{Error, Result};
use crate::extended::INF;
use crate::grid::{Axis, GridFunction, Symmetry};
use crate::hull;
use crate::regularize;

/// Lower convex envelope of a sampled 1D function, with the extension rule.
#[derive(Clone, Debug)]
pub struct Envelope {
    pub xs: Vec<f64>,
    pub fs: Vec<f64>,
    pub left_open: bool,
    pub right_open: bool,
}

impl Envelope {
    /// `None` when every sample is `+∞`.
    pub fn new(xs: &[f64], fs: &[f64]) -> Option<Envelope> {
        let idx = hull::lower_hull(xs, fs);
        if idx.is_empty() {
            return None;
        }
        let n = fs.len();
        Some(Envelope {
            xs: idx.iter().map(|&i| xs[i]).collect(),
            fs: idx.iter().map(|&i| fs[i]).collect(),
            left_open: n >= 2 && fs[0].is_finite() && fs[1].is_finite(),
            right_open: n >= 2 && fs[n - 1].is_finite() && fs[n - 2].is_finite(),
        })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn slope(&self, k: usize) -> f64 {
        (self.fs[k + 1] - self.fs[k]) / (self.xs[k + 1] - self.xs[k])
    }

    /// `(first slope, last slope)`, or `None` for a single vertex.
    pub fn slope_range(&self) -> Option<(f64, f64)> {
        if self.len() < 2 {
            None
        } else {
            Some((self.slope(0), self.slope(self.len() - 2)))
        }
    }

    /// Checks that the sorted dual nodes `ys` represent the conjugate
    /// faithfully: an open side needs a `+∞` node beyond the slope range, a
    /// closed side needs two nodes on its affine part.
    pub fn check_range(&self, ys: &[f64], tol: f64) -> Result<()> {
        let Some((c0, c1)) = self.slope_range() else {
            return Ok(());
        };
        let n = ys.len();
        let fail = |detail: String| Error::Range {
            required_lo: c0,
            required_hi: c1,
            detail,
        };
        if self.left_open && ys[0] >= c0 - tol {
            return Err(fail(format!("first dual node must lie below {c0}")));
        }
        if !self.left_open && ys[1] > c0 + tol {
            return Err(fail(format!("second dual node must not exceed {c0}")));
        }
        if self.right_open && ys[n - 1] <= c1 + tol {
            return Err(fail(format!("last dual node must lie above {c1}")));
        }
        if !self.right_open && ys[n - 2] < c1 - tol {
            return Err(fail(format!("second-to-last dual node must be at least {c1}")));
        }
        Ok(())
    }

    /// Conjugate at ascending dual nodes.
    pub fn conjugate_at(&self, ys: &[f64], tol: f64) -> Vec<f64> {
        let m = self.len();
        if m == 1 {
            return ys.iter().map(|&y| self.xs[0] * y - self.fs[0]).collect();
        }
        let (c0, c1) = self.slope_range().unwrap();
        let mut k = 0usize;
        let mut out = Vec::with_capacity(ys.len());
        for &y in ys {
            let v = if y < c0 - tol {
                if self.left_open {
                    INF
                } else {
                    self.xs[0] * y - self.fs[0]
                }
            } else if y > c1 + tol {
                if self.right_open {
                    INF
                } else {
                    self.xs[m - 1] * y - self.fs[m - 1]
                }
            } else {
                while k < m - 1 && y > self.slope(k) {
                    k += 1;
                }
                self.xs[k] * y - self.fs[k]
            };
            out.push(v);
        }
        out
    }
}

fn node_tol(ys: &[f64]) -> f64 {
    if ys.len() >= 2 {
        1e-9 * (ys[1] - ys[0]).abs()
    } else {
        0.0
    }
}

fn even_up(n: usize) -> usize {
    n + (n % 2)
}

/// Chooses a dual axis for a family of envelopes (one per row in 2D):
/// the slope range `[c_min, c_max]` is split into about as many cells as the
/// primal axis has, an open side gets a `+∞` pad of 10% (at least two
/// nodes), and a closed side gets an affine pad long enough for `e^{-g}` to
/// decay by `e^{-25}`.
pub fn auto_dual_axis(envs: &[&Envelope], primal_cells: usize) -> Result<Axis> {
    let mut cmin = INF;
    let mut cmax = -INF;
    let mut wl: f64 = 0.0;
    let mut wr: f64 = 0.0;
    for e in envs {
        if let Some((c0, c1)) = e.slope_range() {
            cmin = cmin.min(c0);
            cmax = cmax.max(c1);
        }
        if !e.left_open && e.xs[0] < 0.0 {
            wl = wl.max(25.0 / -e.xs[0]);
        }
        if !e.right_open && *e.xs.last().unwrap() > 0.0 {
            wr = wr.max(25.0 / *e.xs.last().unwrap());
        }
    }
    let cells = even_up(primal_cells.max(2));
    let (n_in, hd) = if cmax > cmin {
        (cells, (cmax - cmin) / cells as f64)
    } else {
        if !cmin.is_finite() {
            cmin = 0.0;
            cmax = 0.0;
        }
        let span = wl.max(wr).max(1.0);
        (0, span / cells as f64)
    };
    let base = ((0.1 * n_in as f64).ceil() as usize).max(2);
    let cap = 4 * cells;
    let pad = |w: f64| -> usize {
        let want = ((w / hd).ceil() as usize).min(cap);
        even_up(base.max(want))
    };
    let (pl, pr) = (pad(wl), pad(wr));
    let lo = cmin - pl as f64 * hd;
    let hi = cmax + pr as f64 * hd;
    Axis::new(lo, hi, pl + n_in + pr + 1)
}

fn envelope_1d(f: &GridFunction) -> Result<Envelope> {
    Envelope::new(&f.axis(0).nodes(), f.values()).ok_or_else(|| Error::InvalidFunction("all values are +inf".into()))
}

/// Rows of a 2D function along the second axis.
fn rows(f: &GridFunction) -> Vec<Option<Envelope>> {
    let n1 = f.axis(1).steps;
    let xs = f.axis(1).nodes();
    f.values().chunks(n1).map(|row| Envelope::new(&xs, row)).collect()
}

fn finish(f: &GridFunction, axes: Vec<Axis>, mut values: Vec<f64>) -> Result<GridFunction> {
    if !values.iter().any(|v| v.is_finite()) {
        return Err(Error::InvalidFunction(
            "conjugate is +inf on the whole dual grid (input not convex?)".into(),
        ));
    }
    let sym = f.symmetry();
    if sym != Symmetry::None && axes.iter().all(|a| a.is_symmetric()) {
        regularize::average_over_flips(&axes, &mut values, sym);
        GridFunction::new(axes, values, sym)
    } else {
        GridFunction::new(axes, values, Symmetry::None)
    }
}

fn conj_2d(f: &GridFunction, dual: Option<&[Axis]>, check: bool) -> Result<GridFunction> {
    let n0 = f.axis(0).steps;
    let row_envs = rows(f);
    let finite_rows: Vec<&Envelope> = row_envs.iter().flatten().collect();
    if finite_rows.is_empty() {
        return Err(Error::InvalidFunction("all values are +inf".into()));
    }
    let b2 = match dual {
        Some(d) => d[1].clone(),
        None => auto_dual_axis(&finite_rows, f.axis(1).steps - 1)?,
    };
    let ys2 = b2.nodes();
    let tol2 = node_tol(&ys2);
    let m2 = ys2.len();
    // h[i * m2 + j] = row conjugate; -INF marks an all-+inf row.
    let mut h = vec![-INF; n0 * m2];
    for (i, env) in row_envs.iter().enumerate() {
        if let Some(env) = env {
            if check {
                env.check_range(&ys2, tol2)?;
            }
            h[i * m2..(i + 1) * m2].copy_from_slice(&env.conjugate_at(&ys2, tol2));
        }
    }
    let xs1 = f.axis(0).nodes();
    let mut col_envs: Vec<Option<Envelope>> = Vec::with_capacity(m2);
    for j in 0..m2 {
        let col: Vec<f64> = (0..n0).map(|i| h[i * m2 + j]).collect();
        if col.contains(&INF) {
            col_envs.push(None);
        } else {
            let phi: Vec<f64> = col.iter().map(|&v| -v).collect();
            col_envs.push(Envelope::new(&xs1, &phi));
        }
    }
    let finite_cols: Vec<&Envelope> = col_envs.iter().flatten().collect();
    if finite_cols.is_empty() {
        return Err(Error::InvalidFunction(
            "conjugate is +inf on the whole dual grid (input not convex?)".into(),
        ));
    }
    let b1 = match dual {
        Some(d) => d[0].clone(),
        None => auto_dual_axis(&finite_cols, n0 - 1)?,
    };
    let ys1 = b1.nodes();
    let tol1 = node_tol(&ys1);
    let m1 = ys1.len();
    let mut out = vec![INF; m1 * m2];
    for (j, env) in col_envs.iter().enumerate() {
        if let Some(env) = env {
            if check {
                env.check_range(&ys1, tol1)?;
            }
            let g = env.conjugate_at(&ys1, tol1);
            for k in 0..m1 {
                out[k * m2 + j] = g[k];
            }
        }
    }
    finish(f, vec![b1, b2], out)
}

fn conj(f: &GridFunction, dual: Option<&[Axis]>, check: bool) -> Result<GridFunction> {
    if let Some(d) = dual {
        if d.len() != f.dim() {
            return Err(Error::Dimension(format!(
                "dual grid has dimension {}, function has {}",
                d.len(),
                f.dim()
            )));
        }
    }
    match f.dim() {
        1 => {
            let env = envelope_1d(f)?;
            let axis = match dual {
                Some(d) => d[0].clone(),
                None => auto_dual_axis(&[&env], f.axis(0).steps - 1)?,
            };
            let ys = axis.nodes();
            let tol = node_tol(&ys);
            if check {
                env.check_range(&ys, tol)?;
            }
            let g = env.conjugate_at(&ys, tol);
            finish(f, vec![axis], g)
        }
        _ => conj_2d(f, dual, check),
    }
}

/// Legendre transform of `f` on the given dual grid.
///
/// `g(y) = sup_x (x·y - f(x))`, where `f` is read with its extension rule.
/// Fails with [`Error::Range`] when the dual grid cannot represent the
/// conjugate (see [`Envelope::check_range`]).
pub fn legendre_grid(f: &GridFunction, dual: &[Axis]) -> Result<GridFunction> {
    conj(f, Some(dual), true)
}

/// Legendre transform on an automatically chosen dual grid.
pub fn legendre(f: &GridFunction) -> Result<GridFunction> {
    conj(f, None, true)
}

/// Dual grid that [`legendre`] would use.
pub fn auto_dual_axes(f: &GridFunction) -> Result<Vec<Axis>> {
    Ok(legendre(f)?.axes().to_vec())
}

/// Transform onto an arbitrary grid without the range check; values at the
/// nodes are exact for the extended function but the result's own extension
/// may not match the true conjugate off the grid.
pub fn legendre_values(f: &GridFunction, dual: &[Axis]) -> Result<GridFunction> {
    conj(f, Some(dual), false)
}

/// Convex envelope `f**` on the grid of `f`.
pub fn biconjugate(f: &GridFunction) -> Result<GridFunction> {
    let g = legendre(f)?;
    let mut ff = conj(&g, Some(f.axes()), false)?;
    if f.symmetry() != Symmetry::None {
        ff = regularize::symmetrize_unchecked(&ff, f.symmetry());
    }
    Ok(ff)
}

/// Brute-force transform by direct maximization over the finite nodes.
/// Quadratic time; used as a reference.
pub fn legendre_brute(f: &GridFunction, dual: &[Axis]) -> Vec<f64> {
    let pts: Vec<(Vec<f64>, f64)> = (0..f.len())
        .filter(|&k| f.values()[k].is_finite())
        .map(|k| (f.point(k), f.values()[k]))
        .collect();
    let probe = GridFunction::new(
        dual.to_vec(),
        vec![0.0; dual.iter().map(|a| a.steps).product()],
        Symmetry::None,
    )
    .expect("dual grid");
    (0..probe.len())
        .map(|k| {
            let y = probe.point(k);
            pts.iter()
                .map(|(x, v)| x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() - v)
                .fold(-INF, f64::max)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ax(lo: f64, hi: f64, n: usize) -> Axis {
        Axis::new(lo, hi, n).unwrap()
    }

    fn quad(a: f64) -> GridFunction {
        GridFunction::from_fn_1d(ax(-8.0, 8.0, 1025), Symmetry::Symmetric, |x| a * x * x / 2.0).unwrap()
    }

    fn max_err_on(g: &GridFunction, lo: f64, hi: f64, exact: impl Fn(f64) -> f64) -> f64 {
        let ys = g.axis(0).nodes();
        ys.iter()
            .zip(g.values())
            .filter(|(y, _)| **y >= lo && **y <= hi)
            .map(|(y, v)| (v - exact(*y)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn quadratic_self_dual() {
        let g = legendre(&quad(1.0)).unwrap();
        assert!(max_err_on(&g, -4.0, 4.0, |y| y * y / 2.0) < 1e-4);
        assert_eq!(g.symmetry(), Symmetry::Symmetric);
    }

    #[test]
    fn scaled_quadratic() {
        let g = legendre(&quad(2.0)).unwrap();
        assert!(max_err_on(&g, -4.0, 4.0, |y| y * y / 4.0) < 1e-4);
    }

    #[test]
    fn indicator_to_abs() {
        let f = GridFunction::from_fn_1d(ax(-2.0, 2.0, 401), Symmetry::Symmetric, |x| {
            if x.abs() <= 1.0 + 1e-12 {
                0.0
            } else {
                INF
            }
        })
        .unwrap();
        let d = ax(-4.0, 4.0, 801);
        let g = legendre_grid(&f, std::slice::from_ref(&d)).unwrap();
        assert!(max_err_on(&g, -4.0, 4.0, |y| y.abs()) < 1e-12);
        let brute = legendre_brute(&f, &[d]);
        for (a, b) in g.values().iter().zip(&brute) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn abs_to_indicator() {
        let f = GridFunction::from_fn_1d(ax(-20.0, 20.0, 801), Symmetry::Symmetric, |x| x.abs()).unwrap();
        let g = legendre(&f).unwrap();
        for (y, v) in g.axis(0).nodes().iter().zip(g.values()) {
            if y.abs() <= 1.0 - 1e-9 {
                assert!(v.abs() < 1e-12, "y={y} v={v}");
            }
            if y.abs() > 1.0 + 1e-9 {
                assert!(v.is_infinite());
            }
        }
    }

    #[test]
    fn range_error_open_side() {
        let f = quad(1.0);
        let r = legendre_grid(&f, &[ax(-4.0, 4.0, 101)]);
        assert!(matches!(r, Err(Error::Range { .. })));
    }

    #[test]
    fn range_error_closed_side() {
        let f = GridFunction::from_fn_1d(
            ax(-2.0, 2.0, 401),
            Symmetry::None,
            |x| {
                if x.abs() <= 1.0 {
                    x
                } else {
                    INF
                }
            },
        )
        .unwrap();
        assert!(matches!(
            legendre_grid(&f, &[ax(1.5, 4.0, 11)]),
            Err(Error::Range { .. })
        ));
        assert!(legendre_grid(&f, &[ax(-1.0, 4.0, 11)]).is_ok());
    }

    #[test]
    fn biconjugate_of_convex_is_identity() {
        let f = GridFunction::from_fn_1d(ax(-3.0, 3.0, 121), Symmetry::Symmetric, |x| x.abs()).unwrap();
        let ff = biconjugate(&f).unwrap();
        let h = f.axis(0).h();
        for (a, b) in f.values().iter().zip(ff.values()) {
            assert!((a - b).abs() < 2.0 * h);
        }
    }

    #[test]
    fn biconjugate_fills_nonconvex_gap() {
        let axis = ax(-2.0, 4.0, 121);
        let f = GridFunction::from_fn_1d(axis.clone(), Symmetry::None, |x| (x * x).min((x - 2.0) * (x - 2.0))).unwrap();
        let ff = biconjugate(&f).unwrap();
        let xs = axis.nodes();
        let idx = hull::lower_hull(&xs, f.values());
        for (k, &x) in xs.iter().enumerate() {
            let p = idx.partition_point(|&i| xs[i] <= x);
            let expect = if p == 0 || p == idx.len() {
                f.values()[k]
            } else {
                let (a, b) = (idx[p - 1], idx[p]);
                let t = (x - xs[a]) / (xs[b] - xs[a]);
                f.values()[a] + t * (f.values()[b] - f.values()[a])
            };
            assert!((ff.values()[k] - expect).abs() < 1e-9, "x={x}");
            assert!(ff.values()[k] <= f.values()[k] + 1e-12);
        }
    }

    #[test]
    fn biconjugate_keeps_domain() {
        let f = GridFunction::from_fn_1d(ax(-2.0, 2.0, 81), Symmetry::Symmetric, |x| {
            if x.abs() <= 1.0 + 1e-12 {
                x * x
            } else {
                INF
            }
        })
        .unwrap();
        let ff = biconjugate(&f).unwrap();
        for (x, v) in f.axis(0).nodes().iter().zip(ff.values()) {
            assert_eq!(v.is_finite(), x.abs() <= 1.0 + 1e-12, "x={x}");
        }
    }

    #[test]
    fn gauge_l1_2d_to_box_indicator() {
        let a = ax(-20.0, 20.0, 161);
        let f =
            GridFunction::from_fn(vec![a.clone(), a], Symmetry::Unconditional, |x| x[0].abs() + x[1].abs()).unwrap();
        let g = legendre(&f).unwrap();
        for k in 0..g.len() {
            let y = g.point(k);
            let inside = y[0].abs() <= 1.0 - 1e-9 && y[1].abs() <= 1.0 - 1e-9;
            let outside = y[0].abs() > 1.0 + 1e-9 || y[1].abs() > 1.0 + 1e-9;
            if inside {
                assert!(g.values()[k].abs() < 1e-12);
            }
            if outside {
                assert!(g.values()[k].is_infinite());
            }
        }
    }

    #[test]
    fn quadratic_2d_matches_brute_force() {
        let a = ax(-3.0, 3.0, 25);
        let f = GridFunction::from_fn(vec![a.clone(), a], Symmetry::None, |x| {
            x[0] * x[0] + 0.5 * x[0] * x[1] + x[1] * x[1]
        })
        .unwrap();
        let d = vec![ax(-1.5, 1.5, 13), ax(-1.5, 1.5, 13)];
        let g = legendre_values(&f, &d).unwrap();
        let brute = legendre_brute(&f, &d);
        for (a, b) in g.values().iter().zip(&brute) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}
