//! Max-affine functions `V(x) = max_j (y_j·x - b_j)` and their exact conjugates.

use crate::error::{Error, Result};
use crate::extended::INF;
use crate::hull;

/// A finite maximum of affine pieces in dimension 1, 2 or 3.
#[derive(Clone, Debug, PartialEq)]
pub struct MaxAffine {
    dim: usize,
    slopes: Vec<Vec<f64>>,
    intercepts: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Barycentric coordinates of `p` in the triangle `(a, b, c)`.
pub(crate) fn barycentric(p: [f64; 2], a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> Option<[f64; 3]> {
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let scale = ((b[0] - a[0]).abs() + (c[0] - a[0]).abs() + (b[1] - a[1]).abs() + (c[1] - a[1]).abs()).powi(2);
    if det.abs() <= 1e-14 * scale.max(1e-300) {
        return None;
    }
    let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
    let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
    Some([1.0 - l1 - l2, l1, l2])
}

impl MaxAffine {
    /// Builds the function and drops every piece that is nowhere strictly
    /// active. Slopes must be distinct and (in 1D/2D) their convex hull must
    /// have nonempty interior.
    pub fn new(slopes: Vec<Vec<f64>>, intercepts: Vec<f64>) -> Result<Self> {
        let v = MaxAffine::unpruned(slopes, intercepts)?;
        let keep = v.active_pieces();
        let v = v.select(&keep);
        v.check_full_dimensional()?;
        Ok(v)
    }

    /// Builds the function without pruning. Every piece is kept even if it
    /// is dominated; the slope hull must still be full-dimensional.
    pub fn unpruned(slopes: Vec<Vec<f64>>, intercepts: Vec<f64>) -> Result<Self> {
        if slopes.is_empty() {
            return Err(Error::InvalidFunction(
                "max-affine function needs at least one piece".into(),
            ));
        }
        if slopes.len() != intercepts.len() {
            return Err(Error::InvalidFunction(format!(
                "{} slopes but {} intercepts",
                slopes.len(),
                intercepts.len()
            )));
        }
        let dim = slopes[0].len();
        if !(1..=3).contains(&dim) || slopes.iter().any(|s| s.len() != dim) {
            return Err(Error::Dimension("slopes must share a dimension in 1..=3".into()));
        }
        if slopes.iter().flatten().chain(&intercepts).any(|v| !v.is_finite()) {
            return Err(Error::InvalidFunction("slopes and intercepts must be finite".into()));
        }
        for i in 0..slopes.len() {
            for j in 0..i {
                if slopes[i] == slopes[j] {
                    return Err(Error::InvalidFunction(format!("repeated slope {:?}", slopes[i])));
                }
            }
        }
        let v = MaxAffine {
            dim,
            slopes,
            intercepts,
        };
        v.check_full_dimensional()?;
        Ok(v)
    }

    pub fn from_1d(slopes: &[f64], intercepts: &[f64]) -> Result<Self> {
        MaxAffine::new(slopes.iter().map(|&s| vec![s]).collect(), intercepts.to_vec())
    }

    fn check_full_dimensional(&self) -> Result<()> {
        let ok = match self.dim {
            1 => self.len() >= 2,
            2 => {
                let pts = self.slopes_2d();
                hull::convex_hull_2d(&pts).len() >= 3
            }
            _ => self.len() >= 4,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidFunction(
                "slopes lie in a hyperplane (convex hull has empty interior)".into(),
            ))
        }
    }

    fn select(&self, keep: &[usize]) -> MaxAffine {
        MaxAffine {
            dim: self.dim,
            slopes: keep.iter().map(|&j| self.slopes[j].clone()).collect(),
            intercepts: keep.iter().map(|&j| self.intercepts[j]).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.slopes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slopes.is_empty()
    }

    pub fn slopes(&self) -> &[Vec<f64>] {
        &self.slopes
    }

    pub fn intercepts(&self) -> &[f64] {
        &self.intercepts
    }

    pub(crate) fn slopes_2d(&self) -> Vec<[f64; 2]> {
        self.slopes.iter().map(|s| [s[0], s[1]]).collect()
    }

    /// Same slopes, new intercepts.
    pub fn with_intercepts(&self, intercepts: Vec<f64>) -> MaxAffine {
        assert_eq!(intercepts.len(), self.len());
        MaxAffine {
            dim: self.dim,
            slopes: self.slopes.clone(),
            intercepts,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.slopes
            .iter()
            .zip(&self.intercepts)
            .map(|(y, b)| dot(y, x) - b)
            .fold(-INF, f64::max)
    }

    /// Index of the active piece at `x` (first one on ties).
    pub fn argmax(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut bv = -INF;
        for (j, (y, b)) in self.slopes.iter().zip(&self.intercepts).enumerate() {
            let v = dot(y, x) - b;
            if v > bv {
                bv = v;
                best = j;
            }
        }
        best
    }

    /// Indices of the pieces that are strictly active somewhere.
    pub fn active_pieces(&self) -> Vec<usize> {
        match self.dim {
            1 => {
                let order = self.order_1d();
                let ys: Vec<f64> = order.iter().map(|&j| self.slopes[j][0]).collect();
                let bs: Vec<f64> = order.iter().map(|&j| self.intercepts[j]).collect();
                let mut keep: Vec<usize> = hull::lower_hull(&ys, &bs).iter().map(|&k| order[k]).collect();
                keep.sort_unstable();
                keep
            }
            2 => (0..self.len())
                .filter(|&j| {
                    let env = self.envelope_excluding(self.slopes[j][0], self.slopes[j][1], Some(j));
                    self.intercepts[j] < env - 1e-12 * (1.0 + self.intercepts[j].abs())
                })
                .collect(),
            _ => (0..self.len()).collect(),
        }
    }

    /// Piece indices sorted by slope (1D).
    pub fn order_1d(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.slopes[a][0].total_cmp(&self.slopes[b][0]));
        order
    }

    /// Lower convex envelope of the lifted points `(y_k, b_k)`, `k ≠ skip`,
    /// evaluated at `(u, v)`; `+∞` outside the hull of those slopes.
    fn envelope_excluding(&self, u: f64, v: f64, skip: Option<usize>) -> f64 {
        let idx: Vec<usize> = (0..self.len()).filter(|&k| Some(k) != skip).collect();
        let p = [u, v];
        let pt = |k: usize| [self.slopes[k][0], self.slopes[k][1]];
        let scale = self.slopes.iter().map(|s| s[0].abs() + s[1].abs()).fold(1.0, f64::max);
        let tol = 1e-12 * scale;
        let mut best = INF;
        for &k in &idx {
            if (pt(k)[0] - u).abs() <= tol && (pt(k)[1] - v).abs() <= tol {
                best = best.min(self.intercepts[k]);
            }
        }
        for (a_i, &a) in idx.iter().enumerate() {
            for (b_i, &b) in idx.iter().enumerate().skip(a_i + 1) {
                // segment a-b
                let (pa, pb) = (pt(a), pt(b));
                let d = [pb[0] - pa[0], pb[1] - pa[1]];
                let len2 = d[0] * d[0] + d[1] * d[1];
                let t = ((u - pa[0]) * d[0] + (v - pa[1]) * d[1]) / len2;
                let q = [pa[0] + t * d[0], pa[1] + t * d[1]];
                if (-1e-12..=1.0 + 1e-12).contains(&t) && (q[0] - u).abs() <= tol && (q[1] - v).abs() <= tol {
                    best = best.min((1.0 - t) * self.intercepts[a] + t * self.intercepts[b]);
                }
                for &c in idx.iter().skip(b_i + 1) {
                    if let Some(l) = barycentric(p, pa, pb, pt(c)) {
                        if l.iter().all(|&w| w >= -1e-12) {
                            best = best
                                .min(l[0] * self.intercepts[a] + l[1] * self.intercepts[b] + l[2] * self.intercepts[c]);
                        }
                    }
                }
            }
        }
        best
    }

    /// Exact conjugate `V*(y)`: the lower convex envelope of the points
    /// `(y_j, b_j)`, `+∞` outside the convex hull of the slopes.
    pub fn conjugate(&self, y: &[f64]) -> f64 {
        match self.dim {
            1 => {
                let order = self.order_1d();
                let ys: Vec<f64> = order.iter().map(|&j| self.slopes[j][0]).collect();
                let bs: Vec<f64> = order.iter().map(|&j| self.intercepts[j]).collect();
                let h = hull::lower_hull(&ys, &bs);
                let (lo, hi) = (ys[h[0]], ys[*h.last().unwrap()]);
                let t = y[0];
                if t < lo || t > hi {
                    return INF;
                }
                let p = h.partition_point(|&k| ys[k] <= t);
                if p == 0 {
                    return bs[h[0]];
                }
                if p == h.len() {
                    return bs[h[p - 1]];
                }
                let (a, b) = (h[p - 1], h[p]);
                if t == ys[a] {
                    return bs[a];
                }
                let w = (t - ys[a]) / (ys[b] - ys[a]);
                (1.0 - w) * bs[a] + w * bs[b]
            }
            2 => self.envelope_excluding(y[0], y[1], None),
            _ => INF,
        }
    }

    /// `x ↦ V(x) + a·x`; its conjugate is `y ↦ V*(y - a)`.
    pub fn add_linear(&self, a: &[f64]) -> MaxAffine {
        MaxAffine {
            dim: self.dim,
            slopes: self
                .slopes
                .iter()
                .map(|s| s.iter().zip(a).map(|(u, v)| u + v).collect())
                .collect(),
            intercepts: self.intercepts.clone(),
        }
    }

    /// `x ↦ V(x - t)`.
    pub fn translate(&self, t: &[f64]) -> MaxAffine {
        MaxAffine {
            dim: self.dim,
            slopes: self.slopes.clone(),
            intercepts: self
                .slopes
                .iter()
                .zip(&self.intercepts)
                .map(|(y, b)| b + dot(y, t))
                .collect(),
        }
    }

    /// Distance from the origin to the boundary of the slope hull; zero or
    /// negative when the origin is not interior (then `e^{-V}` is not
    /// integrable).
    pub fn inradius(&self) -> f64 {
        match self.dim {
            1 => {
                let lo = self.slopes.iter().map(|s| s[0]).fold(INF, f64::min);
                let hi = self.slopes.iter().map(|s| s[0]).fold(-INF, f64::max);
                (-lo).min(hi)
            }
            2 => {
                let pts = self.slopes_2d();
                let h = hull::convex_hull_2d(&pts);
                let mut r = INF;
                for k in 0..h.len() {
                    let a = pts[h[k]];
                    let b = pts[h[(k + 1) % h.len()]];
                    let e = [b[0] - a[0], b[1] - a[1]];
                    let len = e[0].hypot(e[1]);
                    // CCW hull: interior lies to the left of every edge.
                    let d = (e[0] * (0.0 - a[1]) - e[1] * (0.0 - a[0])) / len;
                    r = r.min(d);
                }
                r
            }
            _ => {
                let mut r = INF;
                for j in 0..self.len() {
                    r = r.min(dot(&self.slopes[j], &self.slopes[j]).sqrt());
                }
                r
            }
        }
    }

    /// 1D breakpoints between consecutive pieces in slope order, for a
    /// function whose pieces are all active.
    pub fn breakpoints_1d(&self) -> Vec<f64> {
        let order = self.order_1d();
        order
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                (self.intercepts[b] - self.intercepts[a]) / (self.slopes[b][0] - self.slopes[a][0])
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn abs_conjugate_is_indicator() {
        let v = MaxAffine::from_1d(&[1.0, -1.0], &[0.0, 0.0]).unwrap();
        assert_eq!(v.eval(&[-3.0]), 3.0);
        assert_eq!(v.conjugate(&[0.3]), 0.0);
        assert_eq!(v.conjugate(&[-1.0]), 0.0);
        assert!(v.conjugate(&[1.5]).is_infinite());
    }

    #[test]
    fn three_pieces_indicator() {
        let v = MaxAffine::from_1d(&[-1.0, 0.0, 1.0], &[0.0, 0.0, 0.0]).unwrap();
        // the flat piece is only active at the origin
        assert_eq!(v.len(), 2);
        assert_eq!(v.conjugate(&[0.0]), 0.0);
    }

    #[test]
    fn pruning_drops_dominated() {
        let v = MaxAffine::from_1d(&[-1.0, 0.0, 1.0], &[0.0, 5.0, 0.0]).unwrap();
        assert_eq!(v.len(), 2);
        let w = MaxAffine::from_1d(&[-1.0, 0.0, 1.0], &[0.0, -1.0, 0.0]).unwrap();
        assert_eq!(w.len(), 3);
        assert_eq!(w.conjugate(&[0.0]), -1.0);
    }

    #[test]
    fn rejects_degenerate() {
        assert!(MaxAffine::from_1d(&[1.0], &[0.0]).is_err());
        assert!(MaxAffine::from_1d(&[1.0, 1.0], &[0.0, 1.0]).is_err());
        let line = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![-1.0, 0.0]];
        assert!(MaxAffine::new(line, vec![0.0; 3]).is_err());
    }

    #[test]
    fn biconjugate_1d_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let ys: Vec<f64> = (0..5).map(|i| i as f64 - 2.0 + rng.gen_range(-0.3..0.3)).collect();
            let bs: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let v = MaxAffine::from_1d(&ys, &bs).unwrap();
            for _ in 0..100 {
                let x = rng.gen_range(-5.0..5.0);
                // V**(x) = sup_y (x y - V*(y)), attained at the hull vertices
                let vv = v
                    .slopes()
                    .iter()
                    .map(|s| x * s[0] - v.conjugate(s))
                    .fold(-INF, f64::max);
                assert!((vv - v.eval(&[x])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conjugate_at_slopes_is_intercept_2d() {
        let s = vec![vec![1.0, 0.0], vec![-1.0, 0.5], vec![0.0, -1.0], vec![0.2, 0.1]];
        let v = MaxAffine::new(s, vec![0.3, -0.2, 0.1, 5.0]).unwrap();
        assert_eq!(v.len(), 3);
        for (y, b) in v.slopes().iter().zip(v.intercepts()) {
            assert!((v.conjugate(y) - b).abs() < 1e-12);
        }
        assert!(v.conjugate(&[3.0, 3.0]).is_infinite());
        assert!(v.inradius() > 0.0);
    }

    #[test]
    fn translation_covariance() {
        let v = MaxAffine::from_1d(&[-2.0, 0.5, 1.0], &[0.1, -0.3, 0.2]).unwrap();
        let a = 0.7;
        let w = v.add_linear(&[a]);
        for k in 0..50 {
            let y = -1.5 + 0.05 * k as f64;
            let lhs = w.conjugate(&[y + a]);
            let rhs = v.conjugate(&[y]);
            assert!(lhs == rhs || (lhs - rhs).abs() < 1e-12);
        }
    }
}
