//! Function specifications: built-in convex families and their text format.
//!
//! A spec file holds one or more sections:
//!
//! ```text
//! # comment
//! [wedge]
//! family = exp_wedge
//! params = 2, 1
//! grid.lo = -2
//! grid.hi = 40
//! grid.steps = 2689
//! symmetry = none
//! ```
//!
//! `grid.lo`, `grid.hi` and `grid.steps` take one comma-separated entry per
//! axis; their common length fixes the dimension. Unknown keys are rejected.
//! See `docs/formats.md` in the repository for the full grammar.

use crate::error::{Error, Result};
use crate::extended::INF;
use crate::grid::{Axis, GridFunction, Symmetry};
use crate::maxaffine::MaxAffine;

/// A built-in convex family with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    /// `a|x|²/2`
    Quadratic { a: f64 },
    /// `|x|^p / p`
    AbsPower { p: f64 },
    /// `max_j (y_j·x - b_j)`, params listed piece by piece as `y_j..., b_j`.
    MaxAffine {
        slopes: Vec<Vec<f64>>,
        intercepts: Vec<f64>,
    },
    /// `0` on `[lo, hi]ⁿ`, `+∞` elsewhere.
    IndicatorBox { lo: f64, hi: f64 },
    /// `‖x‖₁ / scale`, the gauge of `scale·B₁`.
    GaugeL1 { scale: f64 },
    /// `‖x‖_∞ / scale`, the gauge of `scale·B_∞`.
    GaugeLinf { scale: f64 },
    /// `Σ_i (a x_i + b)` on `{a x_i ≥ -1}`, `+∞` elsewhere.
    ExpWedge { a: f64, b: f64 },
    /// `Σ_i max(s x_i + 1, -k(s x_i + 1))` with `s = -1` when mirrored.
    FmSequence { k: u32, mirror: bool },
    /// `Σ_i k·max(|x_i| - 1, 0)`.
    UncondSequence { k: u32 },
}

fn need(params: &[f64], n: usize, name: &str) -> Result<()> {
    if params.len() != n {
        return Err(Error::InvalidParameter(format!(
            "{name} takes {n} parameter(s), got {}",
            params.len()
        )));
    }
    Ok(())
}

fn positive(v: f64, what: &str) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidParameter(format!("{what} must be positive, got {v}")))
    }
}

fn integer_k(v: f64) -> Result<u32> {
    if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as u32)
    } else {
        Err(Error::InvalidParameter(format!("k must be an integer >= 1, got {v}")))
    }
}

impl Family {
    /// Builds a family from its name and parameter list. `dim` is needed to
    /// split max-affine parameters into pieces.
    pub fn from_params(name: &str, params: &[f64], dim: usize) -> Result<Self> {
        match name {
            "quadratic" => {
                need(params, 1, name)?;
                Ok(Family::Quadratic {
                    a: positive(params[0], "a")?,
                })
            }
            "abs_power" => {
                need(params, 1, name)?;
                let p = params[0];
                if !(p >= 1.0 && p.is_finite()) {
                    return Err(Error::InvalidParameter(format!("p must be >= 1, got {p}")));
                }
                Ok(Family::AbsPower { p })
            }
            "max_affine" => {
                let w = dim + 1;
                if params.is_empty() || !params.len().is_multiple_of(w) {
                    return Err(Error::InvalidParameter(format!(
                        "max_affine params come in groups of {w} (slope components, intercept)"
                    )));
                }
                let slopes = params.chunks(w).map(|c| c[..dim].to_vec()).collect();
                let intercepts = params.chunks(w).map(|c| c[dim]).collect();
                Ok(Family::MaxAffine { slopes, intercepts })
            }
            "indicator_box" => {
                need(params, 2, name)?;
                if !(params[0] < params[1]) {
                    return Err(Error::InvalidParameter("indicator_box needs lo < hi".into()));
                }
                Ok(Family::IndicatorBox {
                    lo: params[0],
                    hi: params[1],
                })
            }
            "gauge_l1" => {
                need(params, 1, name)?;
                Ok(Family::GaugeL1 {
                    scale: positive(params[0], "scale")?,
                })
            }
            "gauge_linf" => {
                need(params, 1, name)?;
                Ok(Family::GaugeLinf {
                    scale: positive(params[0], "scale")?,
                })
            }
            "exp_wedge" => {
                need(params, 2, name)?;
                if !params[1].is_finite() {
                    return Err(Error::InvalidParameter("b must be finite".into()));
                }
                Ok(Family::ExpWedge {
                    a: positive(params[0], "a")?,
                    b: params[1],
                })
            }
            "fm_sequence" => {
                if params.is_empty() || params.len() > 2 {
                    return Err(Error::InvalidParameter("fm_sequence takes k [, mirror]".into()));
                }
                let mirror = match params.get(1) {
                    None => false,
                    Some(&0.0) => false,
                    Some(&1.0) => true,
                    Some(&m) => return Err(Error::InvalidParameter(format!("mirror flag must be 0 or 1, got {m}"))),
                };
                Ok(Family::FmSequence {
                    k: integer_k(params[0])?,
                    mirror,
                })
            }
            "uncond_sequence" => {
                need(params, 1, name)?;
                Ok(Family::UncondSequence {
                    k: integer_k(params[0])?,
                })
            }
            other => Err(Error::InvalidParameter(format!("unknown family '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Quadratic { .. } => "quadratic",
            Family::AbsPower { .. } => "abs_power",
            Family::MaxAffine { .. } => "max_affine",
            Family::IndicatorBox { .. } => "indicator_box",
            Family::GaugeL1 { .. } => "gauge_l1",
            Family::GaugeLinf { .. } => "gauge_linf",
            Family::ExpWedge { .. } => "exp_wedge",
            Family::FmSequence { .. } => "fm_sequence",
            Family::UncondSequence { .. } => "uncond_sequence",
        }
    }

    /// Pointwise value.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let norm2 = || x.iter().map(|v| v * v).sum::<f64>();
        match self {
            Family::Quadratic { a } => a * norm2() / 2.0,
            Family::AbsPower { p } => norm2().sqrt().powf(*p) / p,
            Family::MaxAffine { slopes, intercepts } => slopes
                .iter()
                .zip(intercepts)
                .map(|(y, b)| y.iter().zip(x).map(|(u, v)| u * v).sum::<f64>() - b)
                .fold(-INF, f64::max),
            Family::IndicatorBox { lo, hi } => {
                let eps = 1e-12 * (hi - lo);
                if x.iter().all(|&v| v >= lo - eps && v <= hi + eps) {
                    0.0
                } else {
                    INF
                }
            }
            Family::GaugeL1 { scale } => x.iter().map(|v| v.abs()).sum::<f64>() / scale,
            Family::GaugeLinf { scale } => x.iter().map(|v| v.abs()).fold(0.0, f64::max) / scale,
            Family::ExpWedge { a, b } => {
                let mut s = 0.0;
                for &v in x {
                    let t = a * v;
                    if t < -1.0 - 1e-12 {
                        return INF;
                    }
                    s += t + b;
                }
                s
            }
            Family::FmSequence { k, mirror } => {
                let sg = if *mirror { -1.0 } else { 1.0 };
                x.iter()
                    .map(|&v| {
                        let u = sg * v + 1.0;
                        u.max(-(*k as f64) * u)
                    })
                    .sum()
            }
            Family::UncondSequence { k } => x.iter().map(|&v| *k as f64 * (v.abs() - 1.0).max(0.0)).sum(),
        }
    }

    /// The family as an exact max-affine function, when it is one.
    pub fn max_affine(&self, dim: usize) -> Option<Result<MaxAffine>> {
        let one_d: (Vec<f64>, Vec<f64>) = match self {
            Family::MaxAffine { slopes, intercepts } => {
                return Some(MaxAffine::new(slopes.clone(), intercepts.clone()))
            }
            Family::GaugeL1 { scale } if dim == 1 => (vec![-1.0 / scale, 1.0 / scale], vec![0.0, 0.0]),
            Family::GaugeLinf { scale } if dim == 1 => (vec![-1.0 / scale, 1.0 / scale], vec![0.0, 0.0]),
            Family::GaugeL1 { scale } => {
                let s = 1.0 / scale;
                let slopes = vec![vec![s, s], vec![s, -s], vec![-s, s], vec![-s, -s]];
                return Some(MaxAffine::new(slopes, vec![0.0; 4]));
            }
            Family::GaugeLinf { scale } => {
                let s = 1.0 / scale;
                let slopes = vec![vec![s, 0.0], vec![-s, 0.0], vec![0.0, s], vec![0.0, -s]];
                return Some(MaxAffine::new(slopes, vec![0.0; 4]));
            }
            Family::FmSequence { k, mirror } => {
                let k = *k as f64;
                if *mirror {
                    (vec![-1.0, k], vec![-1.0, k])
                } else {
                    (vec![1.0, -k], vec![-1.0, k])
                }
            }
            Family::UncondSequence { k } => {
                let k = *k as f64;
                (vec![-k, 0.0, k], vec![k, 0.0, k])
            }
            _ => return None,
        };
        let (ys, bs) = one_d;
        if dim == 1 {
            return Some(MaxAffine::from_1d(&ys, &bs));
        }
        // coordinate sum: pieces are all pairs
        let mut slopes = Vec::new();
        let mut intercepts = Vec::new();
        for (ya, ba) in ys.iter().zip(&bs) {
            for (yb, bb) in ys.iter().zip(&bs) {
                slopes.push(vec![*ya, *yb]);
                intercepts.push(ba + bb);
            }
        }
        Some(MaxAffine::new(slopes, intercepts))
    }
}

/// A named function: family, sampling grid and symmetry flag.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionSpec {
    pub name: String,
    pub family: Family,
    pub axes: Vec<Axis>,
    pub symmetry: Symmetry,
}

const KEYS: [&str; 6] = ["family", "params", "grid.lo", "grid.hi", "grid.steps", "symmetry"];

fn parse_list(s: &str, line: usize) -> Result<Vec<f64>> {
    if s.trim().is_empty() {
        return Ok(vec![]);
    }
    s.split(',')
        .map(|t| {
            let t = t.trim();
            match t {
                "inf" | "+inf" => Ok(INF),
                "-inf" => Ok(-INF),
                _ => t.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("not a number: '{t}'"),
                }),
            }
        })
        .collect()
}

#[derive(Default)]
struct Section {
    name: String,
    line: usize,
    entries: Vec<(String, String, usize)>,
}

impl Section {
    fn get(&self, key: &str) -> Option<(&str, usize)> {
        self.entries
            .iter()
            .find(|(k, _, _)| k == key)
            .map(|(_, v, l)| (v.as_str(), *l))
    }

    fn build(&self) -> Result<FunctionSpec> {
        let missing = |k: &str| Error::Parse {
            line: self.line,
            message: format!("section [{}] is missing '{k}'", self.name),
        };
        let (fam, _) = self.get("family").ok_or_else(|| missing("family"))?;
        let (lo, l_lo) = self.get("grid.lo").ok_or_else(|| missing("grid.lo"))?;
        let (hi, l_hi) = self.get("grid.hi").ok_or_else(|| missing("grid.hi"))?;
        let (st, l_st) = self.get("grid.steps").ok_or_else(|| missing("grid.steps"))?;
        let lo = parse_list(lo, l_lo)?;
        let hi = parse_list(hi, l_hi)?;
        let steps = parse_list(st, l_st)?;
        if lo.len() != hi.len() || lo.len() != steps.len() || lo.is_empty() || lo.len() > 2 {
            return Err(Error::Parse {
                line: l_lo,
                message: "grid.lo, grid.hi, grid.steps need the same number (1 or 2) of entries".into(),
            });
        }
        let mut axes = Vec::new();
        for i in 0..lo.len() {
            let s = steps[i];
            if s.fract() != 0.0 || s < 0.0 {
                return Err(Error::Parse {
                    line: l_st,
                    message: format!("grid.steps must be integers, got {s}"),
                });
            }
            axes.push(Axis::new(lo[i], hi[i], s as usize)?);
        }
        let params = match self.get("params") {
            Some((p, l)) => parse_list(p, l)?,
            None => vec![],
        };
        let family = Family::from_params(fam.trim(), &params, axes.len())?;
        let symmetry = match self.get("symmetry") {
            Some((s, _)) => Symmetry::parse(s)?,
            None => Symmetry::None,
        };
        Ok(FunctionSpec {
            name: self.name.clone(),
            family,
            axes,
            symmetry,
        })
    }
}

impl FunctionSpec {
    pub fn new(name: &str, family: Family, axes: Vec<Axis>, symmetry: Symmetry) -> Self {
        FunctionSpec {
            name: name.to_string(),
            family,
            axes,
            symmetry,
        }
    }

    /// Parses every section of a spec file.
    pub fn parse_all(text: &str) -> Result<Vec<FunctionSpec>> {
        let mut sections: Vec<Section> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.split('#').next().unwrap_or("").trim();
            if s.is_empty() {
                continue;
            }
            if let Some(rest) = s.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| Error::Parse {
                    line,
                    message: "unterminated section header".into(),
                })?;
                let name = name.trim();
                if name.is_empty() {
                    return Err(Error::Parse {
                        line,
                        message: "empty section name".into(),
                    });
                }
                if sections.iter().any(|s| s.name == name) {
                    return Err(Error::Parse {
                        line,
                        message: format!("duplicate section [{name}]"),
                    });
                }
                sections.push(Section {
                    name: name.to_string(),
                    line,
                    entries: vec![],
                });
                continue;
            }
            let (k, v) = s.split_once('=').ok_or_else(|| Error::Parse {
                line,
                message: format!("expected 'key = value', got '{s}'"),
            })?;
            let k = k.trim();
            if !KEYS.contains(&k) {
                return Err(Error::Parse {
                    line,
                    message: format!("unknown key '{k}'"),
                });
            }
            let sec = sections.last_mut().ok_or_else(|| Error::Parse {
                line,
                message: "key outside of a section".into(),
            })?;
            if sec.get(k).is_some() {
                return Err(Error::Parse {
                    line,
                    message: format!("duplicate key '{k}'"),
                });
            }
            sec.entries.push((k.to_string(), v.trim().to_string(), line));
        }
        if sections.is_empty() {
            return Err(Error::Parse {
                line: 0,
                message: "no sections found".into(),
            });
        }
        sections.iter().map(Section::build).collect()
    }

    /// Parses a file that must contain exactly one section.
    pub fn parse(text: &str) -> Result<FunctionSpec> {
        let mut all = FunctionSpec::parse_all(text)?;
        if all.len() != 1 {
            return Err(Error::Parse {
                line: 0,
                message: format!("expected one section, found {}", all.len()),
            });
        }
        Ok(all.remove(0))
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    /// Samples the family on the grid.
    pub fn to_grid(&self) -> Result<GridFunction> {
        GridFunction::from_fn(self.axes.clone(), self.symmetry, |x| self.family.eval(x))
    }

    /// Exact max-affine representation, when the family has one.
    pub fn max_affine(&self) -> Option<Result<MaxAffine>> {
        self.family.max_affine(self.dim())
    }

    /// Serializes back to the text format.
    pub fn to_text(&self) -> String {
        let params: Vec<String> = match &self.family {
            Family::Quadratic { a } => vec![a.to_string()],
            Family::AbsPower { p } => vec![p.to_string()],
            Family::MaxAffine { slopes, intercepts } => slopes
                .iter()
                .zip(intercepts)
                .flat_map(|(y, b)| {
                    y.iter()
                        .chain(std::iter::once(b))
                        .map(|v| v.to_string())
                        .collect::<Vec<_>>()
                })
                .collect(),
            Family::IndicatorBox { lo, hi } => vec![lo.to_string(), hi.to_string()],
            Family::GaugeL1 { scale } | Family::GaugeLinf { scale } => vec![scale.to_string()],
            Family::ExpWedge { a, b } => vec![a.to_string(), b.to_string()],
            Family::FmSequence { k, mirror } => vec![k.to_string(), (*mirror as u8).to_string()],
            Family::UncondSequence { k } => vec![k.to_string()],
        };
        let join = |f: &dyn Fn(&Axis) -> String| self.axes.iter().map(f).collect::<Vec<_>>().join(", ");
        format!(
            "[{}]\nfamily = {}\nparams = {}\ngrid.lo = {}\ngrid.hi = {}\ngrid.steps = {}\nsymmetry = {}\n",
            self.name,
            self.family.name(),
            params.join(", "),
            join(&|a| a.lo.to_string()),
            join(&|a| a.hi.to_string()),
            join(&|a| a.steps.to_string()),
            self.symmetry.as_str()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "# two functions\n[g]\nfamily = quadratic\nparams = 1\ngrid.lo = -8\ngrid.hi = 8\ngrid.steps = 1025\nsymmetry = symmetric\n\n[w]\nfamily = exp_wedge\nparams = 2, 1  # a, b\ngrid.lo = -2\ngrid.hi = 40\ngrid.steps = 2689\n";

    #[test]
    fn parses_sections() {
        let all = FunctionSpec::parse_all(SAMPLE).unwrap();
        assert_eq!(all.len(), 2);
        assert_eq!(all[0].family, Family::Quadratic { a: 1.0 });
        assert_eq!(all[0].symmetry, Symmetry::Symmetric);
        assert_eq!(all[1].family, Family::ExpWedge { a: 2.0, b: 1.0 });
        assert_eq!(all[1].axes[0].steps, 2689);
        let g = all[1].to_grid().unwrap();
        assert!(g.values()[0].is_infinite());
    }

    #[test]
    fn rejects_unknown_key() {
        let t = "[a]\nfamily = quadratic\nparams = 1\ncolour = red\n";
        assert!(matches!(FunctionSpec::parse(t), Err(Error::Parse { line: 4, .. })));
    }

    #[test]
    fn rejects_bad_params() {
        let base = |fam: &str, p: &str| {
            format!("[a]\nfamily = {fam}\nparams = {p}\ngrid.lo = -1\ngrid.hi = 1\ngrid.steps = 11\n")
        };
        assert!(FunctionSpec::parse(&base("quadratic", "-1")).is_err());
        assert!(FunctionSpec::parse(&base("abs_power", "0.5")).is_err());
        assert!(FunctionSpec::parse(&base("fm_sequence", "2.5")).is_err());
        assert!(FunctionSpec::parse(&base("uncond_sequence", "0")).is_err());
        assert!(FunctionSpec::parse(&base("nope", "1")).is_err());
        assert!(FunctionSpec::parse(&base("max_affine", "1, 0, -1")).is_err());
        assert!(FunctionSpec::parse(&base("max_affine", "1, 0, -1, 0")).is_ok());
    }

    #[test]
    fn roundtrip_text() {
        for s in FunctionSpec::parse_all(SAMPLE).unwrap() {
            let back = FunctionSpec::parse(&s.to_text()).unwrap();
            assert_eq!(back, s);
        }
    }

    #[test]
    fn two_dimensional_grid() {
        let t = "[l1]\nfamily = gauge_l1\nparams = 1\ngrid.lo = -4, -4\ngrid.hi = 4, 4\ngrid.steps = 9, 9\nsymmetry = unconditional\n";
        let s = FunctionSpec::parse(t).unwrap();
        let g = s.to_grid().unwrap();
        assert_eq!(g.dim(), 2);
        assert_eq!(g.eval(&[1.0, -2.0]), 3.0);
        let m = s.max_affine().unwrap().unwrap();
        assert_eq!(m.eval(&[1.0, -2.0]), 3.0);
    }

    #[test]
    fn sequences_match_max_affine() {
        for fam in [
            Family::FmSequence { k: 5, mirror: false },
            Family::FmSequence { k: 5, mirror: true },
            Family::UncondSequence { k: 7 },
        ] {
            let m = fam.max_affine(1).unwrap().unwrap();
            for i in 0..41 {
                let x = -4.0 + 0.2 * i as f64;
                assert!((fam.eval(&[x]) - m.eval(&[x])).abs() < 1e-12, "{fam:?} at {x}");
            }
        }
    }
}
