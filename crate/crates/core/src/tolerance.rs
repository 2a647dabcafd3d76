//! Numeric tolerances shared by every comparison in the crate.

/// Absolute slack for probability normalization checks.
pub const PROB_SUM_TOL: f64 = 1e-9;

/// Relative tolerance for cost and probability ties.
pub const REL_TOL: f64 = 1e-9;

/// Absolute floor under [`REL_TOL`].
pub const ABS_FLOOR: f64 = 1e-12;

/// Two reals are tied iff `|a - b| <= max(1e-12, 1e-9 * max(|a|, |b|))`.
///
/// This single predicate decides optimality verification, enumeration
/// pruning and MC-class counting, and most-probable-class ties.
pub fn tie(a: f64, b: f64) -> bool {
    let scale = a.abs().max(b.abs());
    (a - b).abs() <= ABS_FLOOR.max(REL_TOL * scale)
}
