//! Exact computation of the t-adic Goss zeta function over F_q[t].
//!
//! The crate evaluates the power sums `S_d(y)` over monic polynomials prime
//! to `t`, computes their t-adic valuations by two independent routes
//! (literal enumeration and the carry-free digit expansion), builds the
//! Newton polygon of `zeta_t(x, y) = sum_d S_d(y) x^d`, and lifts every zero
//! in F_q((t)) by Newton iteration.

pub mod digits;
pub mod field;
pub mod polygon;
pub mod powersum;
pub mod series;
pub mod zeta;

pub mod cli;
