//! Verification records.

use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    NotApplicable,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::NotApplicable => "not_applicable",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How `lhs` and `rhs` are compared.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    /// `lhs ≤ rhs`: pass iff `margin ≥ -tol`.
    AtMost,
    /// `lhs = rhs`: pass iff `|margin| ≤ tol`.
    Equal,
}

/// One verified statement. `margin = rhs - lhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub check_id: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub tol: f64,
    pub relation: Relation,
    pub status: Status,
    pub provenance: Vec<String>,
    pub est_error: f64,
    pub notes: Vec<String>,
    /// Sub-comparisons that must all pass.
    pub parts: Vec<CheckReport>,
}

impl CheckReport {
    fn build(id: &str, lhs: f64, rhs: f64, tol: f64, est_error: f64, relation: Relation, provenance: &str) -> Self {
        let mut r = CheckReport {
            check_id: id.to_string(),
            lhs,
            rhs,
            margin: margin(lhs, rhs),
            tol,
            relation,
            status: Status::Fail,
            provenance: vec![provenance.to_string()],
            est_error,
            notes: vec![],
            parts: vec![],
        };
        r.status = r.evaluate();
        r
    }

    /// `lhs ≤ rhs` up to `tol`.
    pub fn at_most(id: &str, lhs: f64, rhs: f64, tol: f64, est_error: f64, provenance: &str) -> Self {
        CheckReport::build(id, lhs, rhs, tol, est_error, Relation::AtMost, provenance)
    }

    /// `lhs = rhs` up to `tol`.
    pub fn equal(id: &str, lhs: f64, rhs: f64, tol: f64, est_error: f64, provenance: &str) -> Self {
        CheckReport::build(id, lhs, rhs, tol, est_error, Relation::Equal, provenance)
    }

    pub fn not_applicable(id: &str, reason: &str, provenance: &str) -> Self {
        CheckReport {
            check_id: id.to_string(),
            lhs: f64::NAN,
            rhs: f64::NAN,
            margin: f64::NAN,
            tol: 0.0,
            relation: Relation::AtMost,
            status: Status::NotApplicable,
            provenance: vec![provenance.to_string()],
            est_error: 0.0,
            notes: vec![reason.to_string()],
            parts: vec![],
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    /// Attaches sub-comparisons; the report passes only if they all do.
    pub fn with_parts(mut self, parts: Vec<CheckReport>) -> Self {
        self.parts = parts;
        self.status = self.evaluate();
        self
    }

    fn evaluate(&self) -> Status {
        if self.status == Status::NotApplicable {
            return Status::NotApplicable;
        }
        let own = match self.relation {
            Relation::AtMost => self.margin >= -self.tol,
            Relation::Equal => self.margin.abs() <= self.tol,
        };
        if own && self.parts.iter().all(|p| p.status == Status::Pass) {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    /// Multiplies every tolerance by `factor` and re-evaluates.
    pub fn scale_tolerance(mut self, factor: f64) -> Self {
        self.tol *= factor;
        self.parts = self.parts.into_iter().map(|p| p.scale_tolerance(factor)).collect();
        self.status = self.evaluate();
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn failed(&self) -> bool {
        self.status == Status::Fail
    }

    pub const CSV_HEADER: &'static str = "check_id,lhs,rhs,margin,tol,status,est_error";

    /// One CSV row per report and per part (parts get `id/part` ids).
    pub fn csv_rows(&self) -> Vec<String> {
        let mut rows = Vec::new();
        self.push_rows("", &mut rows);
        rows
    }

    fn push_rows(&self, prefix: &str, rows: &mut Vec<String>) {
        let id = format!("{prefix}{}", self.check_id);
        rows.push(format!(
            "{},{},{},{},{},{},{}",
            csv_field(&id),
            fmt_sig(self.lhs),
            fmt_sig(self.rhs),
            fmt_sig(self.margin),
            fmt_sig(self.tol),
            self.status,
            fmt_sig(self.est_error)
        ));
        for p in &self.parts {
            p.push_rows(&format!("{id}/"), rows);
        }
    }
}

/// Quotes a CSV field when it contains a comma, quote or line break.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn margin(lhs: f64, rhs: f64) -> f64 {
    if lhs == rhs {
        0.0
    } else {
        rhs - lhs
    }
}

/// Formats with 12 significant digits, `inf`/`-inf`/`nan` for non-finite.
pub fn fmt_sig(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else if v == 0.0 {
        "0".into()
    } else {
        format!("{v:.11e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn statuses() {
        let r = CheckReport::at_most("a", 1.0, 2.0, 1e-6, 0.0, "x");
        assert!(r.passed());
        assert_eq!(r.margin, 1.0);
        let r = CheckReport::at_most("a", 2.0, 1.0, 1e-6, 0.0, "x");
        assert!(r.failed());
        let r = CheckReport::equal("a", 2.0, 1.0, 1e-6, 0.0, "x");
        assert!(r.failed());
        assert!(r.clone().scale_tolerance(2e6).passed());
        let r = CheckReport::at_most("a", f64::NEG_INFINITY, 1.0, 0.0, 0.0, "x");
        assert!(r.passed());
        let r = CheckReport::at_most("a", f64::INFINITY, f64::INFINITY, 0.0, 0.0, "x");
        assert!(r.passed());
        let r = CheckReport::at_most("a", f64::NAN, 1.0, 0.0, 0.0, "x");
        assert!(r.failed());
    }

    #[test]
    fn parts_gate_status() {
        let bad = CheckReport::equal("p", 0.0, 1.0, 0.1, 0.0, "x");
        let r = CheckReport::at_most("a", 0.0, 1.0, 0.0, 0.0, "x").with_parts(vec![bad]);
        assert!(r.failed());
        assert_eq!(r.csv_rows().len(), 2);
        assert!(r.csv_rows()[1].starts_with("a/p,"));
    }

    #[test]
    fn ids_with_commas_are_quoted() {
        let r = CheckReport::equal("m[a,b]", 1.0, 1.0, 0.0, 0.0, "x")
            .with_parts(vec![CheckReport::equal("p", 1.0, 1.0, 0.0, 0.0, "x")]);
        let rows = r.csv_rows();
        assert!(rows[0].starts_with("\"m[a,b]\",1."));
        assert!(rows[1].starts_with("\"m[a,b]/p\","));
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }

    #[test]
    fn number_format() {
        assert_eq!(fmt_sig(1.0), "1.00000000000e0");
        assert_eq!(fmt_sig(-0.000123456789012345), "-1.23456789012e-4");
        assert_eq!(fmt_sig(f64::INFINITY), "inf");
        assert_eq!(fmt_sig(0.0), "0");
    }
}
