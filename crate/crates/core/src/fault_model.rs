//! A machine that can fault at most once per working day.
//!
//! Over `N` days the machine faults on any working day with probability
//! `p`, independently; a fault triggers a repair lasting `R` days during
//! which no new fault can occur. The fault count `W` then never exceeds
//! `n = floor(N / R) + 1`, its indicators are negatively related, so
//! `Var W <= E W`, and `W` is close in total variation to a Poisson law
//! with rate `lambda = E W`, truncated to {0, ..., n}. The explicit error
//! bound of [`proposition_bounds`] is always at least as good as its
//! untruncated counterpart.

use serde::Serialize;

use crate::distributions::{tv_distance, tv_distance_vs_untruncated, DistParams, FinitePmf};
use crate::error::{Error, Result};
use crate::math::KahanSum;
use crate::stein_factors::exact_g2;

/// How the repair period relates to the fault day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RepairConvention {
    /// The fault day itself is the first of the `R` repair days, so the
    /// machine is blocked for the `R - 1` days after it.
    #[default]
    FaultDayCounts,
    /// The repair starts the day after the fault, blocking `R` full days.
    StartsNextDay,
}

/// Parameters of the fault model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultParams {
    days: usize,
    repair: usize,
    prob: f64,
    convention: RepairConvention,
}

impl FaultParams {
    /// Validates `days >= 1`, `repair >= 1` and `0 < prob < 1`; the repair
    /// convention defaults to [`RepairConvention::FaultDayCounts`].
    pub fn new(days: usize, repair: usize, prob: f64) -> Result<Self> {
        if days == 0 {
            return Err(Error::InvalidParameter(
                "the model needs at least one day".into(),
            ));
        }
        if repair == 0 {
            return Err(Error::InvalidParameter(
                "a repair lasts at least one day".into(),
            ));
        }
        if !prob.is_finite() || prob <= 0.0 || prob >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "daily fault probability must lie strictly in (0, 1), got {prob}"
            )));
        }
        Ok(Self {
            days,
            repair,
            prob,
            convention: RepairConvention::default(),
        })
    }

    /// Same parameters under a different repair convention.
    pub fn with_convention(mut self, convention: RepairConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn days(&self) -> usize {
        self.days
    }

    pub fn repair(&self) -> usize {
        self.repair
    }

    pub fn prob(&self) -> f64 {
        self.prob
    }

    pub fn convention(&self) -> RepairConvention {
        self.convention
    }

    /// The provable ceiling on the fault count: `floor(days / repair) + 1`.
    /// Under either convention the count can never reach past it, so the
    /// fault law lives on {0, ..., n} with this `n`.
    pub fn truncation_level(&self) -> usize {
        self.days / self.repair + 1
    }

    /// Days the machine stays blocked after a fault day.
    fn blocked_after(&self) -> usize {
        match self.convention {
            RepairConvention::FaultDayCounts => self.repair - 1,
            RepairConvention::StartsNextDay => self.repair,
        }
    }
}

/// The exact law of the fault count, by dynamic programming over
/// (remaining blocked days, faults so far). Runs in
/// `O(days * repair * truncation_level)` time.
pub fn fault_count_law(params: &FaultParams) -> FinitePmf {
    let n = params.truncation_level();
    let ba = params.blocked_after();
    let p = params.prob;
    let width = n + 1;
    let mut cur = vec![0.0f64; (ba + 1) * width];
    cur[0] = 1.0;
    let mut next = vec![0.0f64; (ba + 1) * width];
    for _ in 0..params.days {
        next.iter_mut().for_each(|x| *x = 0.0);
        for b in 0..=ba {
            for w in 0..=n {
                let mass = cur[b * width + w];
                if mass == 0.0 {
                    continue;
                }
                if b == 0 {
                    next[w] += (1.0 - p) * mass;
                    // A day count ceiling argument shows a working day with
                    // w = n faults already recorded cannot exist.
                    debug_assert!(w < n);
                    next[ba * width + w + 1] += p * mass;
                } else {
                    next[(b - 1) * width + w] += mass;
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    let mut probs = vec![0.0f64; width];
    for b in 0..=ba {
        for (w, slot) in probs.iter_mut().enumerate() {
            *slot += cur[b * width + w];
        }
    }
    // Renormalize away the round-off drift of `days` convex combinations.
    let mut total = KahanSum::new();
    for &x in &probs {
        total.add(x);
    }
    let total = total.value();
    for x in &mut probs {
        *x /= total;
    }
    FinitePmf::from_raw(probs)
}

/// Both error bounds and both realized distances for one parameter set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundComparison {
    /// Poisson rate used for the comparison: the exact mean fault count.
    pub lambda: f64,
    /// Exact variance of the fault count.
    pub var_w: f64,
    /// Truncation level of the comparison window.
    pub n: usize,
    /// Distance from the fault law to the truncated Poisson law.
    pub tv_trunc: f64,
    /// Distance from the fault law to the untruncated Poisson law.
    pub tv_untrunc: f64,
    /// Error bound against the truncated Poisson law.
    pub bound_trunc: f64,
    /// Classical error bound against the untruncated Poisson law.
    pub bound_untrunc: f64,
}

/// Computes the exact fault law, matches a Poisson rate to its mean, and
/// evaluates both total-variation distances together with their bounds:
///
/// ```text
/// bound = lambda * factor * (1 - Var W / lambda),
/// ```
///
/// with the truncated factor `(1 - pi(0)) / lambda` for the truncated
/// comparison and its untruncated limit for the classical one. The
/// truncated bound is never worse.
pub fn proposition_bounds(params: &FaultParams) -> Result<BoundComparison> {
    let law = fault_count_law(params);
    let n = law.n();
    let moments = law.moments();
    let lambda = moments.mean;
    let var_w = moments.variance;
    let deficit = 1.0 - var_w / lambda;
    if deficit < 0.0 {
        return Err(Error::Overdispersed { lambda, var_w });
    }
    let poisson = DistParams::poisson(lambda)?;
    let factor = exact_g2(&poisson, n);
    // The untruncated factor differs from the truncated one by the mass of
    // state 0 alone: pi(0) - pmf(0) = pmf(0) * tail / (1 - tail). Building
    // it as the truncated numerator plus that non-negative correction, then
    // applying the same divisions and products, keeps the computed pair
    // ordered the way the mathematics orders it even when the true gap is
    // far below one unit in the last place.
    let trunc_law = poisson.truncated(n);
    let trunc_numerator = 1.0 - trunc_law.probs()[0];
    let tail = poisson.tail_probability(n);
    let correction = poisson.pmf(0) * tail / (1.0 - tail);
    let limit_factor = (trunc_numerator + correction) / poisson.birth_rate(0);
    Ok(BoundComparison {
        lambda,
        var_w,
        n,
        tv_trunc: tv_distance(&law, &trunc_law)?,
        tv_untrunc: tv_distance_vs_untruncated(&law, &poisson),
        bound_trunc: lambda * factor.bound * deficit,
        bound_untrunc: lambda * limit_factor * deficit,
    })
}

/// One point of the small-probability sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderPoint {
    /// Daily fault probability.
    pub prob: f64,
    /// Error bound against the truncated Poisson law.
    pub bound_trunc: f64,
    /// That bound divided by `prob`.
    pub ratio: f64,
}

/// Sweeps the truncated bound over daily fault probabilities at fixed
/// `days` and `repair`, reporting each bound and its ratio to `prob`.
pub fn order_p_sweep(days: usize, repair: usize, probs: &[f64]) -> Result<Vec<OrderPoint>> {
    probs
        .iter()
        .map(|&prob| {
            let params = FaultParams::new(days, repair, prob)?;
            let comparison = proposition_bounds(&params)?;
            Ok(OrderPoint {
                prob,
                bound_trunc: comparison.bound_trunc,
                ratio: comparison.bound_trunc / prob,
            })
        })
        .collect()
}
