//! Arithmetic on the extended half-line `ℝ ∪ {+∞}`.
//!
//! `+∞` is stored as `f64::INFINITY`. `NaN` and `-∞` are never valid values
//! of a convex function here and are rejected at construction time.

/// The `+∞` sentinel.
pub const INF: f64 = f64::INFINITY;

#[inline]
pub fn is_inf(v: f64) -> bool {
    v == INF
}

/// A value is admissible if it is finite or `+∞`.
#[inline]
pub fn is_admissible(v: f64) -> bool {
    v.is_finite() || v == INF
}

/// Sum with `+∞` absorbing.
#[inline]
pub fn add(a: f64, b: f64) -> f64 {
    if is_inf(a) || is_inf(b) {
        INF
    } else {
        a + b
    }
}

#[inline]
pub fn min(a: f64, b: f64) -> f64 {
    if a <= b {
        a
    } else {
        b
    }
}

#[inline]
pub fn max(a: f64, b: f64) -> f64 {
    if a >= b {
        a
    } else {
        b
    }
}

/// `e^{-v}` with `e^{-∞} = 0`.
#[inline]
pub fn exp_neg(v: f64) -> f64 {
    if is_inf(v) {
        0.0
    } else {
        (-v).exp()
    }
}
