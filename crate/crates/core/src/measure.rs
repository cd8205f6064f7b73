//! Finitely supported probability measures and couplings.

use crate::error::{Error, Result};
use crate::grid::Symmetry;

/// Weighted atoms in `ℝⁿ`, `n ≤ 3`, weights summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

/// Weight-sum tolerance.
pub const WEIGHT_TOL: f64 = 1e-12;

impl DiscreteMeasure {
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        if atoms.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        let dim = atoms[0].len();
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidMeasure(format!(
                "atoms must have 1 to 3 coordinates, got {dim}"
            )));
        }
        if let Some(a) = atoms.iter().find(|a| a.len() != dim) {
            return Err(Error::InvalidMeasure(format!(
                "atom {a:?} does not have {dim} coordinates"
            )));
        }
        if atoms.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidMeasure("atom coordinates must be finite".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidMeasure(format!("weights must be positive, got {w}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}, not 1")));
        }
        let mut sorted: Vec<&Vec<f64>> = atoms.iter().collect();
        sorted.sort_by(|a, b| lex_cmp(a, b));
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidMeasure(format!("duplicate atom {:?}", w[0])));
        }
        Ok(DiscreteMeasure { dim, atoms, weights })
    }

    /// Like [`DiscreteMeasure::new`] but rescales the weights to sum to one
    /// and merges duplicate atoms.
    pub fn normalized(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidMeasure(format!("total mass {total} is not positive")));
        }
        let mut pairs: Vec<(Vec<f64>, f64)> = atoms.into_iter().zip(weights.into_iter().map(|w| w / total)).collect();
        pairs.sort_by(|a, b| lex_cmp(&a.0, &b.0));
        let mut merged: Vec<(Vec<f64>, f64)> = Vec::with_capacity(pairs.len());
        for (a, w) in pairs {
            match merged.last_mut() {
                Some(last) if last.0 == a => last.1 += w,
                _ => merged.push((a, w)),
            }
        }
        let (atoms, weights): (Vec<_>, Vec<_>) = merged.into_iter().unzip();
        DiscreteMeasure::new(atoms, weights)
    }

    pub fn dirac(x: &[f64]) -> Result<Self> {
        DiscreteMeasure::new(vec![x.to_vec()], vec![1.0])
    }

    /// Uniform measure on the given atoms.
    pub fn uniform(atoms: Vec<Vec<f64>>) -> Result<Self> {
        let m = atoms.len();
        DiscreteMeasure::new(atoms, vec![1.0 / m as f64; m])
    }

    /// `λ_{C_n}`: uniform measure on the vertices `{-1, 1}ⁿ` of the cube.
    pub fn cube(n: usize) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return Err(Error::InvalidParameter(format!(
                "cube dimension must be 1 to 3, got {n}"
            )));
        }
        let atoms = (0..1usize << n)
            .map(|mask| {
                (0..n)
                    .map(|i| if mask >> (n - 1 - i) & 1 == 1 { 1.0 } else { -1.0 })
                    .collect()
            })
            .collect();
        DiscreteMeasure::uniform(atoms)
    }

    /// `m` equal-weight atoms at the standard normal quantiles
    /// `Φ⁻¹((i - ½)/m)`, mirrored so the measure is exactly symmetric.
    pub fn gaussian_quantiles(m: usize) -> Result<Self> {
        use statrs::distribution::{ContinuousCDF, Normal};
        if m < 2 {
            return Err(Error::InvalidParameter("need at least 2 quantile atoms".into()));
        }
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        let mut xs = vec![0.0; m];
        for i in 0..m / 2 {
            let q = normal.inverse_cdf((i as f64 + 0.5) / m as f64);
            xs[i] = q;
            xs[m - 1 - i] = -q;
        }
        DiscreteMeasure::uniform(xs.into_iter().map(|x| vec![x]).collect())
    }

    /// Product measure `self ⊗ other`.
    pub fn product(&self, other: &DiscreteMeasure) -> Result<Self> {
        let mut atoms = Vec::new();
        let mut weights = Vec::new();
        for (a, wa) in self.atoms.iter().zip(&self.weights) {
            for (b, wb) in other.atoms.iter().zip(&other.weights) {
                atoms.push(a.iter().chain(b).copied().collect());
                weights.push(wa * wb);
            }
        }
        DiscreteMeasure::normalized(atoms, weights)
    }

    /// Parses the text format: one atom per line, `w x1 [x2 [x3]]`, `#`
    /// comments. Numbers may be written as fractions `p/q`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut atoms = Vec::new();
        let mut weights = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.split('#').next().unwrap_or("").trim();
            if s.is_empty() {
                continue;
            }
            let nums = s
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(|t| {
                    parse_number(t).ok_or_else(|| Error::Parse {
                        line,
                        message: format!("not a number: '{t}'"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if !(2..=4).contains(&nums.len()) {
                return Err(Error::Parse {
                    line,
                    message: format!("expected 'w x1 [x2 [x3]]', got {} numbers", nums.len()),
                });
            }
            if let Some(first) = atoms.first() {
                let first: &Vec<f64> = first;
                if first.len() != nums.len() - 1 {
                    return Err(Error::Parse {
                        line,
                        message: format!(
                            "atom has {} coordinates, earlier atoms have {}",
                            nums.len() - 1,
                            first.len()
                        ),
                    });
                }
            }
            weights.push(nums[0]);
            atoms.push(nums[1..].to_vec());
        }
        if atoms.is_empty() {
            return Err(Error::Parse {
                line: 0,
                message: "no atoms".into(),
            });
        }
        DiscreteMeasure::new(atoms, weights)
    }

    /// Text format with round-trip precision.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (a, w) in self.atoms.iter().zip(&self.weights) {
            s.push_str(&format!("{w:e}"));
            for c in a {
                s.push_str(&format!(" {c:e}"));
            }
            s.push('\n');
        }
        s
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn barycenter(&self) -> Vec<f64> {
        let mut b = vec![0.0; self.dim];
        for (a, w) in self.atoms.iter().zip(&self.weights) {
            for (bi, ai) in b.iter_mut().zip(a) {
                *bi += w * ai;
            }
        }
        b
    }

    /// `∫ |x|² dν`.
    pub fn second_moment(&self) -> f64 {
        self.atoms
            .iter()
            .zip(&self.weights)
            .map(|(a, w)| w * a.iter().map(|c| c * c).sum::<f64>())
            .sum()
    }

    /// `∫ g dν`.
    pub fn integrate<G: Fn(&[f64]) -> f64>(&self, g: G) -> f64 {
        self.atoms.iter().zip(&self.weights).map(|(a, w)| w * g(a)).sum()
    }

    /// Dimension of the affine hull of the atoms, with relative tolerance
    /// `tol` on the pivots of a Gram–Schmidt pass.
    pub fn affine_rank(&self, tol: f64) -> usize {
        let base = &self.atoms[0];
        let scale = self.atoms.iter().flatten().map(|c| c.abs()).fold(1.0, f64::max);
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for a in &self.atoms[1..] {
            let mut v: Vec<f64> = a.iter().zip(base).map(|(x, y)| x - y).collect();
            for q in &basis {
                let d: f64 = v.iter().zip(q).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(q).for_each(|(x, y)| *x -= d * y);
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > tol * scale {
                basis.push(v.iter().map(|x| x / norm).collect());
                if basis.len() == self.dim {
                    break;
                }
            }
        }
        basis.len()
    }

    /// Push-forward under `x ↦ s x`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if s == 0.0 || !s.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "scale must be finite and nonzero, got {s}"
            )));
        }
        DiscreteMeasure::new(
            self.atoms.iter().map(|a| a.iter().map(|c| c * s).collect()).collect(),
            self.weights.clone(),
        )
    }

    /// Strongest sign-flip symmetry satisfied exactly.
    pub fn symmetry(&self) -> Symmetry {
        let has = |flip: &dyn Fn(&[f64]) -> Vec<f64>| {
            self.atoms.iter().zip(&self.weights).all(|(a, w)| {
                let b = flip(a);
                self.atoms.iter().zip(&self.weights).any(|(c, v)| *c == b && v == w)
            })
        };
        let all_flips = (0..self.dim).all(|i| {
            has(&|a: &[f64]| {
                let mut b = a.to_vec();
                b[i] = -b[i];
                b
            })
        });
        if all_flips {
            Symmetry::Unconditional
        } else if has(&|a: &[f64]| a.iter().map(|c| -c).collect()) {
            Symmetry::Symmetric
        } else {
            Symmetry::None
        }
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

fn parse_number(t: &str) -> Option<f64> {
    match t.split_once('/') {
        Some((p, q)) => {
            let (p, q) = (p.parse::<f64>().ok()?, q.parse::<f64>().ok()?);
            (q != 0.0).then(|| p / q)
        }
        None => t.parse().ok(),
    }
}

/// A transport plan between two discrete measures.
#[derive(Clone, Debug, PartialEq)]
pub struct Coupling {
    pub rows: DiscreteMeasure,
    pub cols: DiscreteMeasure,
    /// Row-major `rows.len() × cols.len()` masses.
    pub mass: Vec<f64>,
}

impl Coupling {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.mass[i * self.cols.len() + j]
    }

    /// Largest deviation of the marginals from the two measures.
    pub fn marginal_error(&self) -> f64 {
        let (n1, n2) = (self.rows.len(), self.cols.len());
        let mut err: f64 = 0.0;
        for i in 0..n1 {
            let s: f64 = (0..n2).map(|j| self.at(i, j)).sum();
            err = err.max((s - self.rows.weights()[i]).abs());
        }
        for j in 0..n2 {
            let s: f64 = (0..n1).map(|i| self.at(i, j)).sum();
            err = err.max((s - self.cols.weights()[j]).abs());
        }
        err
    }

    /// `∑ π_ij c(x_i, y_j)`.
    pub fn cost<C: Fn(&[f64], &[f64]) -> f64>(&self, c: C) -> f64 {
        let n2 = self.cols.len();
        let mut total = 0.0;
        for (k, &m) in self.mass.iter().enumerate() {
            if m != 0.0 {
                total += m * c(&self.rows.atoms()[k / n2], &self.cols.atoms()[k % n2]);
            }
        }
        total
    }

    /// Nonzero entries as `(i, j, mass)`.
    pub fn support(&self) -> Vec<(usize, usize, f64)> {
        let n2 = self.cols.len();
        self.mass
            .iter()
            .enumerate()
            .filter(|(_, m)| **m > 0.0)
            .map(|(k, &m)| (k / n2, k % n2, m))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]).is_ok());
        assert!(DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.6]).is_err());
        assert!(DiscreteMeasure::new(vec![vec![0.0], vec![0.0]], vec![0.5, 0.5]).is_err());
        assert!(DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![1.0, 0.0]).is_err());
        assert!(DiscreteMeasure::new(vec![vec![0.0], vec![1.0, 2.0]], vec![0.5, 0.5]).is_err());
        let m = DiscreteMeasure::normalized(vec![vec![1.0], vec![0.0], vec![1.0]], vec![1.0, 2.0, 1.0]).unwrap();
        assert_eq!(m.atoms(), &[vec![0.0], vec![1.0]]);
        assert_eq!(m.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn parse_and_roundtrip() {
        let text = "# fm target\n1/3 -2\n2/3 1   # heavy atom\n\n";
        let m = DiscreteMeasure::parse(text).unwrap();
        assert_eq!(m.len(), 2);
        assert!(m.barycenter()[0].abs() < 1e-15);
        let back = DiscreteMeasure::parse(&m.to_text()).unwrap();
        assert_eq!(back, m);
        let err = DiscreteMeasure::parse("0.5 1\n0.5 x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = DiscreteMeasure::parse("0.5 1\n0.5 1 2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(DiscreteMeasure::parse("# nothing\n").is_err());
    }

    #[test]
    fn geometry() {
        let c2 = DiscreteMeasure::cube(2).unwrap();
        assert_eq!(c2.len(), 4);
        assert_eq!(c2.second_moment(), 2.0);
        assert_eq!(c2.affine_rank(1e-10), 2);
        assert_eq!(c2.symmetry(), Symmetry::Unconditional);
        let line = DiscreteMeasure::uniform(vec![vec![-1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(line.affine_rank(1e-10), 1);
        assert_eq!(line.symmetry(), Symmetry::Unconditional);
        let d = DiscreteMeasure::dirac(&[1.0]).unwrap();
        assert_eq!(d.affine_rank(1e-10), 0);
        let skew = DiscreteMeasure::uniform(vec![vec![-1.0, -1.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(skew.symmetry(), Symmetry::Symmetric);
    }

    #[test]
    fn quantiles_symmetric() {
        let q = DiscreteMeasure::gaussian_quantiles(127).unwrap();
        assert_eq!(q.symmetry(), Symmetry::Unconditional);
        assert!(q.barycenter()[0].abs() < 1e-15);
        assert!((q.second_moment() - 1.0).abs() < 0.05);
    }

    #[test]
    fn products() {
        let s = DiscreteMeasure::cube(1).unwrap();
        let p = s.product(&s).unwrap();
        assert_eq!(p, DiscreteMeasure::cube(2).unwrap());
    }
}
