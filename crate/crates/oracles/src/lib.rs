//! Slow, simple reference computations for testing `otcrm`.
//!
//! Nothing here depends on the library under test. Routines work on plain
//! vectors and matrices and favor obviousness over speed.

pub mod grid;
pub mod lp;
pub mod vertices;

/// `|a - b| <= tol * max(1, |a|, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}
