//! Convex functions sampled on uniform 1D and 2D grids.

use crate::error::{Error, Result};
use crate::extended::{self, INF};
use crate::hull;

/// Symmetry class of a function or measure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Symmetry {
    #[default]
    None,
    /// Invariant under `x ↦ -x`.
    Symmetric,
    /// Invariant under every coordinate sign flip.
    Unconditional,
}

impl Symmetry {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "none" => Ok(Symmetry::None),
            "symmetric" => Ok(Symmetry::Symmetric),
            "unconditional" => Ok(Symmetry::Unconditional),
            other => Err(Error::InvalidParameter(format!("unknown symmetry '{other}'"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Symmetry::None => "none",
            Symmetry::Symmetric => "symmetric",
            Symmetry::Unconditional => "unconditional",
        }
    }

    /// Unconditional functions are in particular symmetric.
    pub fn implies(&self, other: Symmetry) -> bool {
        match other {
            Symmetry::None => true,
            Symmetry::Symmetric => *self != Symmetry::None,
            Symmetry::Unconditional => *self == Symmetry::Unconditional,
        }
    }
}

/// One uniform grid axis: `steps` nodes from `lo` to `hi` inclusive.
#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, steps: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::Grid(format!("non-finite bounds [{lo}, {hi}]")));
        }
        if steps < 3 {
            return Err(Error::Grid(format!("need at least 3 nodes per axis, got {steps}")));
        }
        if hi <= lo {
            return Err(Error::Grid(format!("empty axis [{lo}, {hi}]")));
        }
        Ok(Axis { lo, hi, steps })
    }

    /// Axis with spacing `h` starting at `lo`.
    pub fn with_spacing(lo: f64, h: f64, cells: usize) -> Result<Self> {
        Axis::new(lo, lo + h * cells as f64, cells + 1)
    }

    #[inline]
    pub fn h(&self) -> f64 {
        (self.hi - self.lo) / (self.steps - 1) as f64
    }

    /// Node `i`. Computed from the nearer endpoint so that a grid symmetric
    /// about the origin has exactly negated mirror nodes.
    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        let n = self.steps - 1;
        let w = self.hi - self.lo;
        if 2 * i <= n {
            self.lo + w * (i as f64) / (n as f64)
        } else {
            self.hi - w * ((n - i) as f64) / (n as f64)
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.steps).map(|i| self.node(i)).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        (self.lo + self.hi).abs() <= 1e-12 * self.hi.abs().max(self.lo.abs())
    }

    /// Index of the node nearest to `x`, if `x` is within `tol` of it.
    pub fn index_of(&self, x: f64, tol: f64) -> Option<usize> {
        let t = ((x - self.lo) / self.h()).round();
        if t < 0.0 || t > (self.steps - 1) as f64 {
            return None;
        }
        let i = t as usize;
        if (self.node(i) - x).abs() <= tol {
            Some(i)
        } else {
            None
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        let eps = 1e-12 * (self.hi - self.lo);
        x >= self.lo - eps && x <= self.hi + eps
    }
}

/// A function on a 1D or 2D uniform grid with values in `ℝ ∪ {+∞}`.
///
/// Values are stored row-major: in 2D the entry for nodes `(i, j)` lives at
/// `i * steps[1] + j`, `i` indexing the first axis.
///
/// Off the grid a 1D function continues affinely, with the boundary slope of
/// its convex envelope, on each side whose two outermost nodes are finite; a
/// side ending in a `+∞` node continues as `+∞`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    axes: Vec<Axis>,
    values: Vec<f64>,
    symmetry: Symmetry,
}

impl GridFunction {
    pub fn new(axes: Vec<Axis>, values: Vec<f64>, symmetry: Symmetry) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::Grid(format!(
                "grid functions are 1D or 2D, got dimension {}",
                axes.len()
            )));
        }
        let len: usize = axes.iter().map(|a| a.steps).product();
        if values.len() != len {
            return Err(Error::Grid(format!("expected {len} values, got {}", values.len())));
        }
        if let Some(v) = values.iter().find(|v| !extended::is_admissible(**v)) {
            return Err(Error::InvalidFunction(format!("inadmissible value {v}")));
        }
        if !values.iter().any(|v| v.is_finite()) {
            return Err(Error::InvalidFunction("all values are +inf".into()));
        }
        let f = GridFunction { axes, values, symmetry };
        if symmetry != Symmetry::None {
            f.check_symmetry(symmetry)?;
        }
        Ok(f)
    }

    /// Samples `f` at every node.
    pub fn from_fn<F>(axes: Vec<Axis>, symmetry: Symmetry, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64,
    {
        let values = match axes.len() {
            1 => axes[0].nodes().iter().map(|&x| f(&[x])).collect(),
            2 => {
                let (n0, n1) = (axes[0].nodes(), axes[1].nodes());
                let mut v = Vec::with_capacity(n0.len() * n1.len());
                for &x0 in &n0 {
                    for &x1 in &n1 {
                        v.push(f(&[x0, x1]));
                    }
                }
                v
            }
            d => return Err(Error::Grid(format!("unsupported dimension {d}"))),
        };
        GridFunction::new(axes, values, symmetry)
    }

    pub fn from_fn_1d<F: Fn(f64) -> f64>(axis: Axis, symmetry: Symmetry, f: F) -> Result<Self> {
        GridFunction::from_fn(vec![axis], symmetry, |x| f(x[0]))
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, k: usize) -> &Axis {
        &self.axes[k]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    /// Same values with a different symmetry flag (checked).
    pub fn with_symmetry(mut self, symmetry: Symmetry) -> Result<Self> {
        if symmetry != Symmetry::None {
            self.check_symmetry(symmetry)?;
        }
        self.symmetry = symmetry;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.axes[1].steps + j]
    }

    /// Node coordinates of flat index `k`.
    pub fn point(&self, k: usize) -> Vec<f64> {
        match self.dim() {
            1 => vec![self.axes[0].node(k)],
            _ => {
                let n1 = self.axes[1].steps;
                vec![self.axes[0].node(k / n1), self.axes[1].node(k % n1)]
            }
        }
    }

    pub fn has_infinite(&self) -> bool {
        self.values.iter().any(|v| extended::is_inf(*v))
    }

    pub fn min_finite(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(INF, f64::min)
    }

    /// Largest grid spacing.
    pub fn h_max(&self) -> f64 {
        self.axes.iter().map(|a| a.h()).fold(0.0, f64::max)
    }

    pub fn left_open(&self) -> bool {
        self.dim() == 1 && self.values[0].is_finite() && self.values[1].is_finite()
    }

    pub fn right_open(&self) -> bool {
        let n = self.values.len();
        self.dim() == 1 && self.values[n - 1].is_finite() && self.values[n - 2].is_finite()
    }

    fn reflect_index(&self, k: usize, flip: [bool; 2]) -> usize {
        match self.dim() {
            1 => self.values.len() - 1 - k,
            _ => {
                let (n0, n1) = (self.axes[0].steps, self.axes[1].steps);
                let (mut i, mut j) = (k / n1, k % n1);
                if flip[0] {
                    i = n0 - 1 - i;
                }
                if flip[1] {
                    j = n1 - 1 - j;
                }
                i * n1 + j
            }
        }
    }

    fn check_symmetry(&self, symmetry: Symmetry) -> Result<()> {
        if !self.axes.iter().all(|a| a.is_symmetric()) {
            return Err(Error::Grid(
                "symmetry requires a grid symmetric about the origin".into(),
            ));
        }
        let flips: Vec<[bool; 2]> = match (symmetry, self.dim()) {
            (Symmetry::None, _) => vec![],
            (Symmetry::Symmetric, _) | (_, 1) => vec![[true, true]],
            (Symmetry::Unconditional, _) => vec![[true, false], [false, true]],
        };
        for flip in flips {
            for k in 0..self.values.len() {
                if self.values[k] != self.values[self.reflect_index(k, flip)] {
                    return Err(Error::InvalidFunction(format!(
                        "values are not {} at node {:?}",
                        symmetry.as_str(),
                        self.point(k)
                    )));
                }
            }
        }
        Ok(())
    }

    /// Discrete convexity test: every second difference along the axes (and
    /// the diagonals in 2D) is at least `-1e-9 (1 + |f|)`. Differences that
    /// involve `+∞` are skipped unless the middle node alone is `+∞`.
    pub fn is_convex(&self) -> bool {
        let ok = |a: f64, b: f64, c: f64| -> bool {
            if b.is_infinite() {
                return a.is_infinite() || c.is_infinite();
            }
            if a.is_infinite() || c.is_infinite() {
                return true;
            }
            a - 2.0 * b + c >= -1e-9 * (1.0 + b.abs())
        };
        match self.dim() {
            1 => self.values.windows(3).all(|w| ok(w[0], w[1], w[2])),
            _ => {
                let (n0, n1) = (self.axes[0].steps, self.axes[1].steps);
                let v = |i: usize, j: usize| self.values[i * n1 + j];
                for i in 0..n0 {
                    for j in 0..n1 {
                        let b = v(i, j);
                        if i > 0 && i + 1 < n0 && !ok(v(i - 1, j), b, v(i + 1, j)) {
                            return false;
                        }
                        if j > 0 && j + 1 < n1 && !ok(v(i, j - 1), b, v(i, j + 1)) {
                            return false;
                        }
                        if i > 0 && i + 1 < n0 && j > 0 && j + 1 < n1 {
                            if !ok(v(i - 1, j - 1), b, v(i + 1, j + 1)) {
                                return false;
                            }
                            if !ok(v(i - 1, j + 1), b, v(i + 1, j - 1)) {
                                return false;
                            }
                        }
                    }
                }
                true
            }
        }
    }

    /// The 1D essential-continuity criterion: the function is continuous into
    /// `ℝ ∪ {+∞}`, i.e. no finite node sits next to a `+∞` node. Returns
    /// `None` in 2D, where the criterion is not decidable from samples.
    pub fn essentially_continuous_1d(&self) -> Option<bool> {
        if self.dim() != 1 {
            return None;
        }
        Some(!self.values.windows(2).any(|w| w[0].is_finite() != w[1].is_finite()))
    }

    /// Boundary slopes `(left, right)` of the lower convex envelope (1D).
    pub fn envelope_slopes(&self) -> Option<(f64, f64)> {
        if self.dim() != 1 {
            return None;
        }
        let xs = self.axes[0].nodes();
        let hv = hull::lower_hull(&xs, &self.values);
        if hv.len() < 2 {
            return None;
        }
        let s = |a: usize, b: usize| (self.values[b] - self.values[a]) / (xs[b] - xs[a]);
        Some((s(hv[0], hv[1]), s(hv[hv.len() - 2], hv[hv.len() - 1])))
    }

    /// Evaluates the function at an arbitrary point: linear interpolation in
    /// 1D (with the extension rule off the grid), bilinear in 2D (`+∞` off
    /// the grid or next to a `+∞` corner).
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self.dim() {
            1 => self.eval_1d(x[0]),
            _ => self.eval_2d(x[0], x[1]),
        }
    }

    fn eval_1d(&self, x: f64) -> f64 {
        let a = &self.axes[0];
        let n = a.steps;
        let h = a.h();
        if x < a.lo {
            if !self.left_open() {
                return INF;
            }
            let (sl, _) = self.envelope_slopes().unwrap_or((0.0, 0.0));
            return self.values[0] + sl * (x - a.lo);
        }
        if x > a.hi {
            if !self.right_open() {
                return INF;
            }
            let (_, sr) = self.envelope_slopes().unwrap_or((0.0, 0.0));
            return self.values[n - 1] + sr * (x - a.hi);
        }
        let t = ((x - a.lo) / h).clamp(0.0, (n - 1) as f64);
        let i = (t.floor() as usize).min(n - 2);
        let w = t - i as f64;
        let (f0, f1) = (self.values[i], self.values[i + 1]);
        if w == 0.0 {
            return f0;
        }
        if w == 1.0 {
            return f1;
        }
        if f0.is_infinite() || f1.is_infinite() {
            return INF;
        }
        f0 + w * (f1 - f0)
    }

    fn eval_2d(&self, x0: f64, x1: f64) -> f64 {
        let (a0, a1) = (&self.axes[0], &self.axes[1]);
        if !a0.contains(x0) || !a1.contains(x1) {
            return INF;
        }
        let loc = |a: &Axis, x: f64| {
            let t = ((x - a.lo) / a.h()).clamp(0.0, (a.steps - 1) as f64);
            let i = (t.floor() as usize).min(a.steps - 2);
            (i, t - i as f64)
        };
        let (i, u) = loc(a0, x0);
        let (j, v) = loc(a1, x1);
        let mut acc = 0.0;
        for (di, wi) in [(0, 1.0 - u), (1, u)] {
            for (dj, wj) in [(0, 1.0 - v), (1, v)] {
                let w = wi * wj;
                if w == 0.0 {
                    continue;
                }
                let f = self.at(i + di, j + dj);
                if f.is_infinite() {
                    return INF;
                }
                acc += w * f;
            }
        }
        acc
    }

    /// Nodewise map, keeping the grid. The symmetry flag is dropped.
    pub fn map_values<F: Fn(&[f64], f64) -> f64>(&self, f: F) -> Result<Self> {
        let values = (0..self.values.len())
            .map(|k| f(&self.point(k), self.values[k]))
            .collect();
        GridFunction::new(self.axes.clone(), values, Symmetry::None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ax(lo: f64, hi: f64, n: usize) -> Axis {
        Axis::new(lo, hi, n).unwrap()
    }

    #[test]
    fn axis_validation() {
        assert!(Axis::new(0.0, 1.0, 2).is_err());
        assert!(Axis::new(1.0, 1.0, 5).is_err());
        assert!(Axis::new(f64::NAN, 1.0, 5).is_err());
        let a = ax(-1.0, 1.0, 5);
        assert_eq!(a.h(), 0.5);
        assert_eq!(a.nodes(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn symmetric_axis_nodes_are_exact_mirrors() {
        let a = ax(-7.3, 7.3, 1001);
        for i in 0..a.steps {
            assert_eq!(a.node(i), -a.node(a.steps - 1 - i));
        }
    }

    #[test]
    fn rejects_all_infinite() {
        let r = GridFunction::new(vec![ax(0.0, 1.0, 3)], vec![INF; 3], Symmetry::None);
        assert!(matches!(r, Err(Error::InvalidFunction(_))));
    }

    #[test]
    fn rejects_wrong_length_and_nan() {
        assert!(GridFunction::new(vec![ax(0.0, 1.0, 3)], vec![0.0; 4], Symmetry::None).is_err());
        assert!(GridFunction::new(vec![ax(0.0, 1.0, 3)], vec![0.0, f64::NAN, 1.0], Symmetry::None).is_err());
    }

    #[test]
    fn symmetry_checked_exactly() {
        let f = GridFunction::from_fn_1d(ax(-2.0, 2.0, 9), Symmetry::Symmetric, |x| x * x);
        assert!(f.is_ok());
        let g = GridFunction::from_fn_1d(ax(-2.0, 2.0, 9), Symmetry::Symmetric, |x| x * x + x);
        assert!(g.is_err());
        let h = GridFunction::from_fn_1d(ax(-1.0, 2.0, 9), Symmetry::Symmetric, |x| x * x);
        assert!(matches!(h, Err(Error::Grid(_))));
    }

    #[test]
    fn unconditional_2d() {
        let axes = vec![ax(-1.0, 1.0, 5), ax(-2.0, 2.0, 7)];
        let f = GridFunction::from_fn(axes.clone(), Symmetry::Unconditional, |x| x[0].abs() + x[1] * x[1]);
        assert!(f.is_ok());
        let g = GridFunction::from_fn(axes, Symmetry::Unconditional, |x| (x[0] + x[1]).abs());
        assert!(g.is_err());
    }

    #[test]
    fn convexity_test() {
        let f = GridFunction::from_fn_1d(ax(-2.0, 2.0, 41), Symmetry::None, |x| x.abs()).unwrap();
        assert!(f.is_convex());
        let g = GridFunction::from_fn_1d(ax(-2.0, 2.0, 41), Symmetry::None, |x| {
            (x * x).min((x - 2.0) * (x - 2.0))
        })
        .unwrap();
        assert!(!g.is_convex());
        let axes = vec![ax(-1.0, 1.0, 11), ax(-1.0, 1.0, 11)];
        let s = GridFunction::from_fn(axes, Symmetry::None, |x| x[0] * x[1]).unwrap();
        assert!(!s.is_convex());
    }

    #[test]
    fn extension_rule() {
        let f = GridFunction::from_fn_1d(ax(-1.0, 1.0, 5), Symmetry::None, |x| x.abs()).unwrap();
        assert!(f.left_open() && f.right_open());
        assert!((f.eval(&[3.0]) - 3.0).abs() < 1e-15);
        assert!((f.eval(&[-2.5]) - 2.5).abs() < 1e-15);
        assert!((f.eval(&[0.25]) - 0.25).abs() < 1e-15);
        let g = GridFunction::from_fn_1d(
            ax(-2.0, 2.0, 5),
            Symmetry::None,
            |x| {
                if x.abs() <= 1.0 {
                    0.0
                } else {
                    INF
                }
            },
        )
        .unwrap();
        assert!(!g.left_open());
        assert!(g.eval(&[3.0]).is_infinite());
        assert!(g.eval(&[-1.5]).is_infinite());
        assert_eq!(g.eval(&[0.5]), 0.0);
        assert_eq!(g.essentially_continuous_1d(), Some(false));
        assert_eq!(f.essentially_continuous_1d(), Some(true));
    }

    #[test]
    fn bilinear_eval() {
        let axes = vec![ax(0.0, 1.0, 3), ax(0.0, 1.0, 3)];
        let f = GridFunction::from_fn(axes, Symmetry::None, |x| 2.0 * x[0] + 3.0 * x[1]).unwrap();
        assert!((f.eval(&[0.3, 0.7]) - 2.7).abs() < 1e-14);
        assert!(f.eval(&[1.5, 0.0]).is_infinite());
    }
}
