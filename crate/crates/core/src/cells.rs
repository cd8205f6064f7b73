//! Exact integrals of `e^{-V}` over the linearity cells of a max-affine `V`.
//!
//! On a cell `V` is affine, so every integral reduces to exponential-affine
//! integrals over intervals (1D) or triangles (2D). These are divided
//! differences of `exp` at the vertex values, with repeated nodes for the
//! polynomial moments.

use crate::error::{Error, Result};
use crate::maxaffine::MaxAffine;

/// Divided difference `exp[z_0, ..., z_m]`, computed as the corner entry of
/// the exponential of the bidiagonal matrix with diagonal `z` and unit
/// superdiagonal (scaling and squaring). Stable for repeated and clustered
/// nodes.
pub fn exp_divdiff(z: &[f64]) -> f64 {
    let m = z.len();
    assert!((1..=8).contains(&m));
    let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == 1 {
        return zmax.exp();
    }
    let spread = z.iter().map(|v| zmax - v).fold(0.0, f64::max);
    let norm = spread + 1.0;
    let s = (norm / 0.5).log2().ceil().max(0.0) as i32;
    let scale = 0.5f64.powi(s);
    // B = A / 2^s, upper bidiagonal
    let mut b = [[0.0f64; 8]; 8];
    for i in 0..m {
        b[i][i] = (z[i] - zmax) * scale;
        if i + 1 < m {
            b[i][i + 1] = scale;
        }
    }
    let mul = |x: &[[f64; 8]; 8], y: &[[f64; 8]; 8]| -> [[f64; 8]; 8] {
        let mut r = [[0.0f64; 8]; 8];
        for i in 0..m {
            for k in i..m {
                if x[i][k] == 0.0 {
                    continue;
                }
                for j in k..m {
                    r[i][j] += x[i][k] * y[k][j];
                }
            }
        }
        r
    };
    let mut e = [[0.0f64; 8]; 8];
    let mut term = [[0.0f64; 8]; 8];
    for i in 0..m {
        e[i][i] = 1.0;
        term[i][i] = 1.0;
    }
    for k in 1..=20 {
        term = mul(&term, &b);
        let inv = 1.0 / k as f64;
        for i in 0..m {
            for j in i..m {
                term[i][j] *= inv;
                e[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..s {
        e = mul(&e, &e);
    }
    e[0][m - 1] * zmax.exp()
}

/// Moments `∫ e^u`, `∫ x e^u`, `∫ x xᵀ e^u` over a region.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Moments {
    pub m0: f64,
    pub m1: Vec<f64>,
    /// Row-major `dim × dim`.
    pub m2: Vec<f64>,
}

impl Moments {
    fn zero(dim: usize) -> Self {
        Moments {
            m0: 0.0,
            m1: vec![0.0; dim],
            m2: vec![0.0; dim * dim],
        }
    }

    fn add(&mut self, o: &Moments) {
        self.m0 += o.m0;
        for (a, b) in self.m1.iter_mut().zip(&o.m1) {
            *a += b;
        }
        for (a, b) in self.m2.iter_mut().zip(&o.m2) {
            *a += b;
        }
    }

    fn scale(&mut self, s: f64) {
        self.m0 *= s;
        self.m1.iter_mut().for_each(|v| *v *= s);
        self.m2.iter_mut().for_each(|v| *v *= s);
    }
}

/// Moments of `e^u` over `[p, q]` with `u` affine, `u(p) = up`, `u(q) = uq`.
/// Either end may be infinite provided `e^u` decays there.
pub fn interval_moments(p: f64, q: f64, up: f64, uq: f64, order: usize) -> Moments {
    let mut out = Moments::zero(1);
    if p.is_finite() && q.is_finite() {
        let l = q - p;
        out.m0 = l * exp_divdiff(&[up, uq]);
        if order >= 1 {
            out.m1[0] = l * (p * exp_divdiff(&[up, uq, up]) + q * exp_divdiff(&[up, uq, uq]));
        }
        if order >= 2 {
            out.m2[0] = l
                * (2.0 * p * p * exp_divdiff(&[up, uq, up, up])
                    + 2.0 * q * q * exp_divdiff(&[up, uq, uq, uq])
                    + 2.0 * p * q * exp_divdiff(&[up, uq, up, uq]));
        }
        return out;
    }
    // one infinite end: up/uq hold the value at the finite end and the slope
    if q.is_infinite() {
        // [p, ∞), u = up + s (x - p), s = uq < 0
        let a = -uq;
        let e = up.exp();
        out.m0 = e / a;
        out.m1[0] = e * (p / a + 1.0 / (a * a));
        out.m2[0] = e * (p * p / a + 2.0 * p / (a * a) + 2.0 / (a * a * a));
    } else {
        // (-∞, q], u = uq + s (x - q), s = up > 0
        let a = up;
        let e = uq.exp();
        out.m0 = e / a;
        out.m1[0] = e * (q / a - 1.0 / (a * a));
        out.m2[0] = e * (q * q / a - 2.0 * q / (a * a) + 2.0 / (a * a * a));
    }
    out
}

/// Moments of `e^u` over a triangle with vertex values `u`.
pub fn triangle_moments(p: [[f64; 2]; 3], u: [f64; 3], order: usize) -> Moments {
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let j = det.abs();
    let mut out = Moments::zero(2);
    out.m0 = j * exp_divdiff(&u);
    if order >= 1 {
        for i in 0..3 {
            let d = exp_divdiff(&[u[0], u[1], u[2], u[i]]);
            out.m1[0] += j * p[i][0] * d;
            out.m1[1] += j * p[i][1] * d;
        }
    }
    if order >= 2 {
        for a in 0..3 {
            for b in 0..3 {
                let c = if a == b { 2.0 } else { 1.0 };
                let d = c * exp_divdiff(&[u[0], u[1], u[2], u[a], u[b]]);
                for r in 0..2 {
                    for s in 0..2 {
                        out.m2[r * 2 + s] += j * p[a][r] * p[b][s] * d;
                    }
                }
            }
        }
    }
    out
}

/// Clips a convex polygon to `{x : a·x ≤ d}`.
fn clip(poly: &[[f64; 2]], a: [f64; 2], d: f64) -> Vec<[f64; 2]> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    let side = |p: [f64; 2]| a[0] * p[0] + a[1] * p[1] - d;
    for i in 0..n {
        let (p, q) = (poly[i], poly[(i + 1) % n]);
        let (sp, sq) = (side(p), side(q));
        if sp <= 0.0 {
            out.push(p);
        }
        if (sp < 0.0 && sq > 0.0) || (sp > 0.0 && sq < 0.0) {
            let t = sp / (sp - sq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

/// Per-piece moments of the probability density `e^{-V}/Z`.
#[derive(Clone, Debug)]
pub struct CellMoments {
    /// Normalized moments per piece, in the piece order of `V`.
    pub cells: Vec<Moments>,
    /// `log Z`, `Z = ∫ e^{-V}`.
    pub log_z: f64,
}

impl CellMoments {
    pub fn masses(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.m0).collect()
    }
}

fn not_integrable() -> Error {
    Error::NotAdmissible("e^(-V) is not integrable: the origin is not interior to the convex hull of the slopes".into())
}

/// Cell moments up to `order` (0, 1 or 2) for a 1D or 2D max-affine `V`.
/// Dominated pieces get empty cells.
pub fn cell_moments(v: &MaxAffine, order: usize) -> Result<CellMoments> {
    if v.inradius() <= 0.0 {
        return Err(not_integrable());
    }
    match v.dim() {
        1 => cells_1d(v, order),
        2 => cells_2d(v, order),
        d => Err(Error::Unsupported(format!("cell integration in dimension {d}"))),
    }
}

fn cells_1d(v: &MaxAffine, order: usize) -> Result<CellMoments> {
    let order_idx = v.order_1d();
    let ys: Vec<f64> = order_idx.iter().map(|&j| v.slopes()[j][0]).collect();
    let bs: Vec<f64> = order_idx.iter().map(|&j| v.intercepts()[j]).collect();
    let hull = crate::hull::lower_hull(&ys, &bs);
    let act: Vec<usize> = hull.iter().map(|&k| order_idx[k]).collect();
    let y = |j: usize| v.slopes()[j][0];
    let b = |j: usize| v.intercepts()[j];
    let bp: Vec<f64> = act
        .windows(2)
        .map(|w| (b(w[1]) - b(w[0])) / (y(w[1]) - y(w[0])))
        .collect();
    // u = -V = b_j - y_j x; shift by the maximum of u, attained at a breakpoint
    let shift = bp.iter().map(|&t| -v.eval(&[t])).fold(f64::NEG_INFINITY, f64::max);
    let mut cells = vec![Moments::zero(1); v.len()];
    let last = act.len() - 1;
    for (k, &j) in act.iter().enumerate() {
        let u = |x: f64| b(j) - y(j) * x - shift;
        let m = if k == 0 {
            let q = bp[0];
            interval_moments(f64::NEG_INFINITY, q, -y(j), u(q), order)
        } else if k == last {
            let p = bp[last - 1];
            interval_moments(p, f64::INFINITY, u(p), -y(j), order)
        } else {
            let (p, q) = (bp[k - 1], bp[k]);
            interval_moments(p, q, u(p), u(q), order)
        };
        cells[j] = m;
    }
    normalize(cells, shift)
}

fn normalize(mut cells: Vec<Moments>, shift: f64) -> Result<CellMoments> {
    let z: f64 = cells.iter().map(|c| c.m0).sum();
    if !(z > 0.0 && z.is_finite()) {
        return Err(not_integrable());
    }
    for c in cells.iter_mut() {
        c.scale(1.0 / z);
    }
    Ok(CellMoments {
        cells,
        log_z: z.ln() + shift,
    })
}

/// Convex polygon of the cell of piece `j`, clipped to `[-r, r]²`.
pub fn cell_polygon(v: &MaxAffine, j: usize, r: f64) -> Vec<[f64; 2]> {
    let mut poly = vec![[-r, -r], [r, -r], [r, r], [-r, r]];
    let yj = &v.slopes()[j];
    let bj = v.intercepts()[j];
    for k in 0..v.len() {
        if k == j {
            continue;
        }
        let yk = &v.slopes()[k];
        let a = [yk[0] - yj[0], yk[1] - yj[1]];
        poly = clip(&poly, a, v.intercepts()[k] - bj);
        if poly.len() < 3 {
            return vec![];
        }
    }
    poly
}

fn cells_2d(v: &MaxAffine, order: usize) -> Result<CellMoments> {
    let c = v.inradius();
    let bmax = v.intercepts().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut r = (bmax.abs() + v.eval(&[0.0, 0.0]).abs() + 40.0) / c;
    loop {
        let polys: Vec<Vec<[f64; 2]>> = (0..v.len()).map(|j| cell_polygon(v, j, r)).collect();
        let shift = polys
            .iter()
            .flatten()
            .map(|p| -v.eval(p))
            .fold(f64::NEG_INFINITY, f64::max);
        let mut cells = vec![Moments::zero(2); v.len()];
        for (j, poly) in polys.iter().enumerate() {
            if poly.len() < 3 {
                continue;
            }
            let yj = &v.slopes()[j];
            let bj = v.intercepts()[j];
            let u = |p: [f64; 2]| bj - yj[0] * p[0] - yj[1] * p[1] - shift;
            for t in 1..poly.len() - 1 {
                let tri = [poly[0], poly[t], poly[t + 1]];
                let m = triangle_moments(tri, [u(tri[0]), u(tri[1]), u(tri[2])], order);
                cells[j].add(&m);
            }
        }
        let z: f64 = cells.iter().map(|m| m.m0).sum();
        // mass outside the box: ∫_{|x|>r} e^{bmax - c|x|} dx, relative to Z
        let log_out = (2.0 * std::f64::consts::PI * (r / c + 1.0 / (c * c))).ln() + bmax - c * r;
        if log_out - shift <= z.ln() + (1e-16f64).ln() || r > 1e6 {
            return normalize(cells, shift);
        }
        r *= 1.5;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn divdiff_closed_forms() {
        assert!((exp_divdiff(&[0.0, 0.0]) - 1.0).abs() < 1e-15);
        assert!((exp_divdiff(&[0.0, 0.0, 0.0]) - 0.5).abs() < 1e-15);
        let (a, b) = (0.3f64, -1.7f64);
        let e2 = (a.exp() - b.exp()) / (a - b);
        assert!((exp_divdiff(&[a, b]) / e2 - 1.0).abs() < 1e-14);
        let c = 2.2f64;
        let e3 = (e2 - (b.exp() - c.exp()) / (b - c)) / (a - c);
        assert!((exp_divdiff(&[a, b, c]) / e3 - 1.0).abs() < 1e-13);
        // repeated node: e[a,a,a] = e^a / 2
        assert!((exp_divdiff(&[a, a, a]) / (a.exp() / 2.0) - 1.0).abs() < 1e-14);
        // large spread
        let big = exp_divdiff(&[0.0, -800.0]);
        assert!((big - 1.0 / 800.0).abs() < 1e-17);
        // nearly equal nodes
        let d = exp_divdiff(&[1e-9, 0.0]);
        assert!((d - 1.0).abs() < 1e-8);
    }

    #[test]
    fn interval_moment_values() {
        // ∫_0^1 e^x x dx = 1, ∫ x² e^x = e - 2
        let m = interval_moments(0.0, 1.0, 0.0, 1.0, 2);
        assert!((m.m0 - (1f64.exp() - 1.0)).abs() < 1e-14);
        assert!((m.m1[0] - 1.0).abs() < 1e-14);
        assert!((m.m2[0] - (1f64.exp() - 2.0)).abs() < 1e-14);
        // ∫_1^∞ e^{-(x-1)} x dx = 2
        let t = interval_moments(1.0, f64::INFINITY, 0.0, -1.0, 2);
        assert!((t.m0 - 1.0).abs() < 1e-15 && (t.m1[0] - 2.0).abs() < 1e-15);
        assert!((t.m2[0] - 5.0).abs() < 1e-14);
        let l = interval_moments(f64::NEG_INFINITY, -1.0, 1.0, 0.0, 2);
        assert!((l.m1[0] + 2.0).abs() < 1e-15 && (l.m2[0] - 5.0).abs() < 1e-14);
    }

    #[test]
    fn triangle_moment_values() {
        let p = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let m = triangle_moments(p, [0.0; 3], 2);
        assert!((m.m0 - 0.5).abs() < 1e-15);
        assert!((m.m1[0] - 1.0 / 6.0).abs() < 1e-15);
        assert!((m.m2[0] - 1.0 / 12.0).abs() < 1e-15);
        assert!((m.m2[1] - 1.0 / 24.0).abs() < 1e-15);
        // u = x: ∫_T e^x = ∫_0^1 (1-x) e^x dx = e - 2
        let m = triangle_moments(p, [0.0, 1.0, 0.0], 1);
        assert!((m.m0 - (1f64.exp() - 2.0)).abs() < 1e-14);
    }

    #[test]
    fn laplace_cells_1d() {
        let v = MaxAffine::from_1d(&[-1.0, 1.0], &[0.0, 0.0]).unwrap();
        let c = cell_moments(&v, 2).unwrap();
        assert!((c.log_z - 2f64.ln()).abs() < 1e-15);
        assert!((c.cells[0].m0 - 0.5).abs() < 1e-15);
        assert!((c.cells[1].m1[0] - 0.5).abs() < 1e-15);
        assert!((c.cells[0].m2[0] + c.cells[1].m2[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn uncond_cells() {
        let k = 100.0;
        let v = MaxAffine::from_1d(&[-k, 0.0, k], &[k, 0.0, k]).unwrap();
        let c = cell_moments(&v, 0).unwrap();
        let z = 2.0 * (k + 1.0) / k;
        assert!((c.log_z - z.ln()).abs() < 1e-14);
        assert!((c.cells[0].m0 - 1.0 / (2.0 * (k + 1.0))).abs() < 1e-15);
        assert!((c.cells[1].m0 - k / (k + 1.0)).abs() < 1e-14);
    }

    #[test]
    fn l1_gauge_cells_2d() {
        let v = MaxAffine::new(
            vec![vec![1.0, 1.0], vec![1.0, -1.0], vec![-1.0, 1.0], vec![-1.0, -1.0]],
            vec![0.0; 4],
        )
        .unwrap();
        let c = cell_moments(&v, 2).unwrap();
        assert!((c.log_z - 4f64.ln()).abs() < 1e-13);
        for cell in &c.cells {
            assert!((cell.m0 - 0.25).abs() < 1e-13);
            assert!((cell.m1[0].abs() - 0.25).abs() < 1e-13);
        }
        let m2: f64 = c.cells.iter().map(|m| m.m2[0]).sum();
        assert!((m2 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_integrable() {
        let v = MaxAffine::from_1d(&[0.5, 1.0], &[0.0, 0.0]).unwrap();
        assert!(cell_moments(&v, 0).is_err());
    }
}
