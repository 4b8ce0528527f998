//! Truncated negative binomial and Poisson approximation tools.
//!
//! The crate centers on laws conditioned to a finite window {0, ..., n} and
//! the characterization of those laws through a discrete identity: `W` has
//! the truncated law exactly when
//! `E[ birth_rate(W) * g(W + 1) * 1{W < n} - W * g(W) ] = 0`
//! for every bounded `g`. Around that identity the crate provides
//!
//! - the truncated laws themselves, tails, moments, and total-variation
//!   distances ([`distributions`]),
//! - exact solutions of the associated difference equation for indicator
//!   test functions ([`stein_solver`]),
//! - the worst-case first-difference of those solutions, exactly and via a
//!   closed-form bound that is attained at the origin ([`stein_factors`]),
//! - a machine-fault model whose fault count is provably never above its
//!   truncation level, with total-variation error bounds ([`fault_model`]),
//! - a birth-death simulator that checks all of the above against sample
//!   paths ([`bd_simulator`]).

mod error;
mod math;

pub mod bd_simulator;
pub mod distributions;
pub mod fault_model;
pub mod stein_factors;
pub mod stein_solver;

pub use error::{Error, Result};
