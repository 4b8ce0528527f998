//! Worst-case first differences of the equation solutions.
//!
//! For the law truncated to {0, ..., n} define the smoothness factor
//!
//! ```text
//! G2 = sup over sets A, states i of | g_A(i + 1) - g_A(i) |,
//! ```
//!
//! where `g_A` solves the difference equation for the indicator of `A`.
//! The supremum over sets has an exact per-state value built from window
//! masses alone, the overall supremum is attained at state 0, and at state
//! 0 it equals `(1 - pi(0)) / a(0)`. That closed form is therefore not just
//! an upper bound but the exact factor, it only grows as the window widens,
//! and it converges to the classical untruncated factor.

use serde::Serialize;

use crate::distributions::{DistParams, FinitePmf, Kind};
use crate::error::{Error, Result};
use crate::math::KahanSum;

/// Exhaustive-search cap: 2^(n+1) sets is kept below 2^21.
const BRUTE_FORCE_MAX_N: usize = 20;

/// Exact factor data for one law and window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorReport {
    /// The factor itself: the largest per-state value.
    pub exact: f64,
    /// The closed form `(1 - pi(0)) / a(0)`.
    pub bound: f64,
    /// First state attaining the factor (ties resolve to the smallest).
    pub attain_index: usize,
    /// Worst first difference at each state 0, ..., n.
    pub per_state: Vec<f64>,
}

/// The gap between the factor of a negative binomial close to a Poisson
/// limit and the factor of that Poisson, at one point of the approach.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitGap {
    /// Success probability of the approximating negative binomial.
    pub p: f64,
    /// Absolute difference of the exact factors.
    pub exact_gap: f64,
    /// Absolute difference of the closed-form state-0 values.
    pub bound_gap: f64,
}

/// Worst first difference of a solution at each state: over all sets `A`,
///
/// ```text
/// sup_A | g_A(i + 1) - g_A(i) |
///     = (pi(i+1) + ... + pi(n)) / a(i) + (pi(0) + ... + pi(i-1)) / i,
/// ```
///
/// with the second term absent at i = 0.
pub fn delta_sup_per_state(params: &DistParams, n: usize) -> Vec<f64> {
    per_state_with_law(params, &params.truncated(n))
}

fn per_state_with_law(params: &DistParams, pi: &FinitePmf) -> Vec<f64> {
    let n = pi.n();
    let probs = pi.probs();
    let mut s = vec![0.0; n + 1];
    let mut suffix = KahanSum::new();
    for i in (0..=n).rev() {
        s[i] = suffix.value() / params.birth_rate(i);
        suffix.add(probs[i]);
    }
    let mut prefix = KahanSum::new();
    for (i, &mass) in probs.iter().enumerate() {
        if i > 0 {
            s[i] += prefix.value() / i as f64;
        }
        prefix.add(mass);
    }
    s
}

/// The exact factor, its closed form, where it is attained, and the full
/// per-state profile. The attaining state is the first one whose value is
/// within relative 1e-12 of the maximum, because exact ties exist (state 0
/// ties state 1 for every truncated Poisson law).
pub fn exact_g2(params: &DistParams, n: usize) -> FactorReport {
    let pi = params.truncated(n);
    let per_state = per_state_with_law(params, &pi);
    let bound = (1.0 - pi.probs()[0]) / params.birth_rate(0);
    let raw_max = per_state.iter().cloned().fold(0.0, f64::max);
    let attain_index = per_state
        .iter()
        .position(|&x| x >= raw_max * (1.0 - 1e-12))
        .unwrap_or(0);
    FactorReport {
        exact: per_state[attain_index],
        bound,
        attain_index,
        per_state,
    }
}

/// Independent oracle for the factor: solves the equation for every one of
/// the 2^(n+1) indicator sets by forward recursion and takes the largest
/// first difference seen. Exponential in `n`, so capped at `n = 20`.
pub fn brute_force_g2(params: &DistParams, n: usize) -> Result<f64> {
    if n > BRUTE_FORCE_MAX_N {
        return Err(Error::BruteForceCap(n));
    }
    let pi = params.truncated(n);
    let probs = pi.probs();
    let alphas: Vec<f64> = (0..n).map(|i| params.birth_rate(i)).collect();
    let mut overall = 0.0f64;
    for mask in 0u64..1u64 << (n + 1) {
        let mut ef = 0.0;
        for (k, &mass) in probs.iter().enumerate() {
            if mask & (1 << k) != 0 {
                ef += mass;
            }
        }
        let mut g_i = 0.0;
        let mut sup = 0.0f64;
        for i in 0..=n {
            let g_next = if i < n {
                let f_i = if mask & (1 << i) != 0 { 1.0 } else { 0.0 };
                (f_i - ef + i as f64 * g_i) / alphas[i]
            } else {
                0.0
            };
            sup = sup.max((g_next - g_i).abs());
            g_i = g_next;
        }
        overall = overall.max(sup);
    }
    Ok(overall)
}

/// The closed-form value `(1 - pi(0)) / a(0)` for every window size
/// 0, ..., n_max, computed so that the floating-point sequence itself is
/// non-decreasing: the running cumulative mass uses plain summation of
/// non-negative ratios (compensated summation could make it dip), and
/// every later step is a monotone operation on it.
pub fn monotonicity_sweep(params: &DistParams, n_max: usize) -> Vec<f64> {
    let alpha0 = params.birth_rate(0);
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(0.0);
    // Masses relative to state 0, so steeply rising laws saturate at
    // infinity instead of dividing zero by zero.
    let mut ratio = 1.0f64;
    let mut total = 1.0f64;
    for n in 1..=n_max {
        ratio *= params.birth_rate(n - 1) / n as f64;
        total += ratio;
        out.push((1.0 - 1.0 / total) / alpha0);
    }
    out
}

/// Limit of the closed form as the window grows: `(1 - (1-p)^r) / (p r)`
/// for the negative binomial and `(1 - exp(-lambda)) / lambda` for the
/// Poisson, both evaluated without cancellation.
pub fn untruncated_limit(params: &DistParams) -> f64 {
    match *params.kind() {
        Kind::NegBinomial { r, p } => -(r * (-p).ln_1p()).exp_m1() / (p * r),
        Kind::Poisson { lambda } => -(-lambda).exp_m1() / lambda,
    }
}

/// Factor gaps along the classical approach of negative binomials to a
/// Poisson: for each `p` the comparison law has shape `lambda / p`, whose
/// birth rates `lambda + p i` converge to the constant `lambda`.
pub fn poisson_limit_gaps(lambda: f64, n: usize, p_seq: &[f64]) -> Result<Vec<LimitGap>> {
    let poisson = DistParams::poisson(lambda)?;
    let po_report = exact_g2(&poisson, n);
    p_seq
        .iter()
        .map(|&p| {
            let nb = DistParams::neg_binomial(lambda / p, p)?;
            let nb_report = exact_g2(&nb, n);
            Ok(LimitGap {
                p,
                exact_gap: (nb_report.exact - po_report.exact).abs(),
                bound_gap: (nb_report.bound - po_report.bound).abs(),
            })
        })
        .collect()
}
