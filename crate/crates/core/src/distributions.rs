//! Negative binomial and Poisson laws, their truncations to {0, ..., n},
//! tail probabilities, and total-variation distances.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::math::{ln_gamma, normalize_log_weights, KahanSum};

/// Parameters of the untruncated law being approximated or truncated.
///
/// The negative binomial with shape `r > 0` and success probability
/// `p in (0, 1)` has mass proportional to `Gamma(r+k)/k! * p^k`; the Poisson
/// with rate `lambda > 0` has mass proportional to `lambda^k / k!`. Both are
/// stationary laws of a birth-death chain with death rate `k` at state `k`
/// and birth rate given by [`DistParams::birth_rate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistParams {
    kind: Kind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Kind {
    NegBinomial { r: f64, p: f64 },
    Poisson { lambda: f64 },
}

impl DistParams {
    /// Negative binomial parameters. Requires `r > 0` finite and
    /// `0 < p < 1`.
    pub fn neg_binomial(r: f64, p: f64) -> Result<Self> {
        if !r.is_finite() || r <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "negative binomial shape r must be finite and positive, got {r}"
            )));
        }
        if !p.is_finite() || p <= 0.0 || p >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "negative binomial success probability p must lie strictly in (0, 1), got {p}"
            )));
        }
        Ok(Self {
            kind: Kind::NegBinomial { r, p },
        })
    }

    /// Poisson parameters. Requires `lambda > 0` finite.
    pub fn poisson(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "Poisson rate lambda must be finite and positive, got {lambda}"
            )));
        }
        Ok(Self {
            kind: Kind::Poisson { lambda },
        })
    }

    pub(crate) fn kind(&self) -> &Kind {
        &self.kind
    }

    /// Upward rate of the associated birth-death chain at state `k`:
    /// `p * (r + k)` for the negative binomial and `lambda` for the Poisson.
    pub fn birth_rate(&self, k: usize) -> f64 {
        match self.kind {
            Kind::NegBinomial { r, p } => p * (r + k as f64),
            Kind::Poisson { lambda } => lambda,
        }
    }

    /// Log of the untruncated mass at `k`, computed in log space so deep
    /// tails and extreme parameters stay representable.
    pub fn log_pmf(&self, k: usize) -> f64 {
        let k_f = k as f64;
        match self.kind {
            Kind::NegBinomial { r, p } => {
                ln_gamma(r + k_f) - ln_gamma(r) - ln_gamma(k_f + 1.0)
                    + r * (-p).ln_1p()
                    + k_f * p.ln()
            }
            Kind::Poisson { lambda } => k_f * lambda.ln() - lambda - ln_gamma(k_f + 1.0),
        }
    }

    /// Untruncated mass at `k`.
    pub fn pmf(&self, k: usize) -> f64 {
        self.log_pmf(k).exp()
    }

    /// The law conditioned on {0, ..., n}: each mass divided by the total
    /// over the window. Normalization always uses the sum of the finite
    /// masses actually kept, so the result is a valid pmf even when the
    /// window captures nearly no untruncated mass.
    pub fn truncated(&self, n: usize) -> FinitePmf {
        let log_w: Vec<f64> = (0..=n).map(|k| self.log_pmf(k)).collect();
        FinitePmf::from_raw(normalize_log_weights(&log_w))
    }

    /// Upper tail mass `P(X > n)` of the untruncated law, summed directly
    /// from `n + 1` upward until a geometric cap on the remainder falls
    /// below round-off. Tails below roughly 1e-308 underflow to zero.
    pub fn tail_probability(&self, n: usize) -> f64 {
        let mut term = self.log_pmf(n + 1).exp();
        if term == 0.0 {
            return 0.0;
        }
        let mut sum = KahanSum::new();
        sum.add(term);
        let mut k = n + 1;
        loop {
            // Ratio of mass at k+1 to mass at k.
            let q = self.birth_rate(k) / (k as f64 + 1.0);
            // Every later ratio is at most this cap, so the remainder after
            // the current term is bounded by a geometric series.
            let cap = match self.kind {
                Kind::NegBinomial { p, .. } => q.max(p),
                Kind::Poisson { .. } => q,
            };
            if cap < 1.0 && term * cap / (1.0 - cap) <= sum.value() * 1e-17 + f64::MIN_POSITIVE {
                break;
            }
            term *= q;
            if term == 0.0 {
                break;
            }
            sum.add(term);
            k += 1;
        }
        sum.value().min(1.0)
    }
}

/// A probability mass function on {0, ..., n}, stored densely.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinitePmf {
    n: usize,
    probs: Vec<f64>,
}

impl FinitePmf {
    /// Validates that `probs` is a pmf: non-empty, finite, non-negative
    /// entries summing to 1 within 1e-12. The support is
    /// {0, ..., probs.len() - 1}.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::NotAPmf("probability vector is empty".into()));
        }
        for (k, &x) in probs.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::NotAPmf(format!("entry {k} is not finite: {x}")));
            }
            if x < 0.0 {
                return Err(Error::NotAPmf(format!("entry {k} is negative: {x}")));
            }
        }
        let mut total = KahanSum::new();
        for &x in &probs {
            total.add(x);
        }
        let total = total.value();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::NotAPmf(format!("entries sum to {total}, not 1")));
        }
        Ok(Self::from_raw(probs))
    }

    /// Internal constructor for vectors already known to be normalized.
    pub(crate) fn from_raw(probs: Vec<f64>) -> Self {
        debug_assert!(!probs.is_empty());
        debug_assert!(probs.iter().all(|&x| x.is_finite() && x >= 0.0));
        Self {
            n: probs.len() - 1,
            probs,
        }
    }

    /// Largest support point.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Mass at each support point, indexed by state.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Mean and variance, each accumulated with compensated summation.
    pub fn moments(&self) -> MomentSummary {
        let mut mean = KahanSum::new();
        for (k, &pk) in self.probs.iter().enumerate() {
            mean.add(k as f64 * pk);
        }
        let mean = mean.value();
        let mut var = KahanSum::new();
        for (k, &pk) in self.probs.iter().enumerate() {
            let d = k as f64 - mean;
            var.add(d * d * pk);
        }
        MomentSummary {
            mean,
            variance: var.value().max(0.0),
        }
    }
}

/// Mean and variance of a finite law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentSummary {
    pub mean: f64,
    pub variance: f64,
}

/// Total-variation distance between two laws on the same support:
/// half the sum of absolute mass differences.
pub fn tv_distance(a: &FinitePmf, b: &FinitePmf) -> Result<f64> {
    if a.n() != b.n() {
        return Err(Error::SupportMismatch {
            left: a.n(),
            right: b.n(),
        });
    }
    let mut sum = KahanSum::new();
    for (&x, &y) in a.probs().iter().zip(b.probs()) {
        sum.add((x - y).abs());
    }
    Ok(0.5 * sum.value())
}

/// Total-variation distance between a finite law and the full untruncated
/// law: half the absolute differences over the window plus half the
/// untruncated mass beyond it.
pub fn tv_distance_vs_untruncated(law: &FinitePmf, params: &DistParams) -> f64 {
    let mut sum = KahanSum::new();
    for (k, &pk) in law.probs().iter().enumerate() {
        sum.add((pk - params.pmf(k)).abs());
    }
    sum.add(params.tail_probability(law.n()));
    0.5 * sum.value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use proptest::test_runner::{FileFailurePersistence, RngAlgorithm};

    fn nb(r: f64, p: f64) -> DistParams {
        DistParams::neg_binomial(r, p).unwrap()
    }

    fn po(lambda: f64) -> DistParams {
        DistParams::poisson(lambda).unwrap()
    }

    #[test]
    fn constructors_reject_bad_parameters() {
        assert!(DistParams::neg_binomial(0.0, 0.5).is_err());
        assert!(DistParams::neg_binomial(-1.0, 0.5).is_err());
        assert!(DistParams::neg_binomial(f64::NAN, 0.5).is_err());
        assert!(DistParams::neg_binomial(1.0, 0.0).is_err());
        assert!(DistParams::neg_binomial(1.0, 1.0).is_err());
        assert!(DistParams::poisson(0.0).is_err());
        assert!(DistParams::poisson(f64::INFINITY).is_err());
    }

    #[test]
    fn pmf_matches_product_recurrence() {
        // Independent oracle: build the mass iteratively from the base mass
        // and the ratio birth_rate(k) / (k + 1), then compare against the
        // log-gamma route.
        let cases = [
            (nb(0.5, 0.1), 0.9f64.powf(0.5)),
            (nb(2.5, 0.6), 0.4f64.powf(2.5)),
            (nb(10.0, 0.9), 0.1f64.powf(10.0)),
            (po(0.3), (-0.3f64).exp()),
            (po(7.0), (-7.0f64).exp()),
        ];
        for (params, base) in cases {
            let mut expected = base;
            for k in 0..=50usize {
                let got = params.pmf(k);
                assert!(
                    (got - expected).abs() <= 1e-12 * expected.max(1e-300),
                    "{params:?} pmf({k}) = {got}, recurrence gives {expected}"
                );
                expected *= params.birth_rate(k) / (k as f64 + 1.0);
            }
        }
    }

    #[test]
    fn truncation_fixtures() {
        let law = po(1.0).truncated(1);
        assert!((law.probs()[0] - 0.5).abs() < 1e-15);
        assert!((law.probs()[1] - 0.5).abs() < 1e-15);

        let law = nb(1.0, 0.5).truncated(1);
        assert!((law.probs()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((law.probs()[1] - 1.0 / 3.0).abs() < 1e-15);

        let law = po(4.0).truncated(0);
        assert_eq!(law.probs(), &[1.0]);
        assert_eq!(law.n(), 0);
    }

    #[test]
    fn truncation_far_in_the_tail_still_normalizes() {
        // The window {0, ..., 3} holds almost none of the mass of a law with
        // mean 1800; normalization by the kept mass must still give a pmf.
        let law = nb(2000.0, 0.9).truncated(3);
        let total: f64 = law.probs().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(law.probs()[3] > law.probs()[0]);
    }

    #[test]
    fn tail_probability_fixtures() {
        let tail = po(1.0).tail_probability(0);
        assert!((tail - 0.6321205588285577).abs() < 1e-15);

        // Shape 1 with p = 1/2 is geometric: mass 2^-(k+1).
        let tail = nb(1.0, 0.5).tail_probability(1);
        assert!((tail - 0.25).abs() < 1e-15);

        // A tiny rate leaves a tail dominated by the first omitted mass.
        let params = po(1e-8);
        let tail = params.tail_probability(10);
        assert!(tail > 0.0 && tail < 1e-80);
        assert!((tail - params.pmf(11)).abs() <= 1e-6 * tail);

        // Far below the representable floor the tail underflows to zero.
        assert_eq!(po(1e-8).tail_probability(200), 0.0);
    }

    #[test]
    fn tail_plus_window_mass_is_one() {
        for params in [nb(0.5, 0.1), nb(2.5, 0.9), nb(10.0, 0.5), po(0.5), po(12.0)] {
            for n in [0usize, 3, 17] {
                let mut window = KahanSum::new();
                for k in 0..=n {
                    window.add(params.pmf(k));
                }
                let total = window.value() + params.tail_probability(n);
                assert!(
                    (total - 1.0).abs() < 1e-12,
                    "{params:?} n = {n}: window + tail = {total}"
                );
            }
        }
    }

    #[test]
    fn moments_of_a_two_point_law() {
        let law = FinitePmf::new(vec![0.25, 0.75]).unwrap();
        let m = law.moments();
        assert!((m.mean - 0.75).abs() < 1e-15);
        assert!((m.variance - 0.1875).abs() < 1e-15);
    }

    #[test]
    fn pmf_validation_rejects_bad_vectors() {
        assert!(FinitePmf::new(vec![]).is_err());
        assert!(FinitePmf::new(vec![0.5, 0.6]).is_err());
        assert!(FinitePmf::new(vec![-0.1, 1.1]).is_err());
        assert!(FinitePmf::new(vec![f64::NAN, 1.0]).is_err());
        assert!(FinitePmf::new(vec![0.5, 0.5]).is_ok());
    }

    #[test]
    fn tv_distance_fixture_and_mismatch() {
        let a = FinitePmf::new(vec![0.25, 0.75]).unwrap();
        let b = FinitePmf::new(vec![0.5, 0.5]).unwrap();
        assert!((tv_distance(&a, &b).unwrap() - 0.25).abs() < 1e-15);
        assert!((tv_distance(&a, &a).unwrap()).abs() < 1e-15);

        let c = FinitePmf::new(vec![1.0]).unwrap();
        assert!(matches!(
            tv_distance(&a, &c),
            Err(Error::SupportMismatch { left: 1, right: 0 })
        ));
    }

    #[test]
    fn tv_against_untruncated_law() {
        // Direct evaluation for a hand-built two-point law against a
        // Poisson with rate 3/4: masses E and 0.75E with E = exp(-3/4).
        let e = 0.4723665527410147;
        let law = FinitePmf::new(vec![0.25, 0.75]).unwrap();
        let expected = 0.5 * ((0.25f64 - e).abs() + (0.75 - 0.75 * e).abs() + (1.0 - 1.75 * e));
        let got = tv_distance_vs_untruncated(&law, &po(0.75));
        assert!((got - expected).abs() < 1e-14);
    }

    #[test]
    fn truncation_is_closest_in_tv_to_exactly_the_tail() {
        // For the truncated law itself, the distance to the untruncated law
        // collapses to the tail mass beyond the window.
        for params in [nb(2.0, 0.4), po(3.0)] {
            for n in [1usize, 4, 9] {
                let law = params.truncated(n);
                let got = tv_distance_vs_untruncated(&law, &params);
                let tail = params.tail_probability(n);
                assert!(
                    (got - tail).abs() < 1e-13,
                    "{params:?} n = {n}: tv {got} vs tail {tail}"
                );
            }
        }
    }

    fn any_params() -> impl Strategy<Value = DistParams> {
        prop_oneof![
            (0.05f64..20.0, 0.01f64..0.99).prop_map(|(r, p)| nb(r, p)),
            (0.01f64..20.0).prop_map(po),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig {
            cases: 64,
            source_file: Some(file!()),
            failure_persistence: Some(Box::new(FileFailurePersistence::WithSource(
                "proptest-regressions",
            ))),
            rng_algorithm: RngAlgorithm::ChaCha,
            .. ProptestConfig::default()
        })]

        #[test]
        fn truncated_is_always_a_pmf(params in any_params(), n in 0usize..60) {
            let law = params.truncated(n);
            prop_assert_eq!(law.n(), n);
            let mut total = KahanSum::new();
            for &x in law.probs() {
                prop_assert!(x.is_finite() && x >= 0.0);
                total.add(x);
            }
            prop_assert!((total.value() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn truncated_masses_satisfy_the_birth_death_ratio(
            params in any_params(),
            n in 1usize..40,
        ) {
            let law = params.truncated(n);
            let probs = law.probs();
            for k in 0..n {
                // Skip states whose mass is too small for a meaningful
                // relative comparison.
                if probs[k].min(probs[k + 1]) < 1e-250 {
                    continue;
                }
                let lhs = probs[k + 1] * (k as f64 + 1.0);
                let rhs = probs[k] * params.birth_rate(k);
                prop_assert!(
                    (lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()),
                    "ratio breaks at k = {}: {} vs {}", k, lhs, rhs
                );
            }
        }

        #[test]
        fn tv_distance_is_a_bounded_metric(
            params in any_params(),
            n in 0usize..30,
            m_shift in 0usize..5,
        ) {
            let a = params.truncated(n);
            let b = params.truncated(n + m_shift);
            if m_shift == 0 {
                let d = tv_distance(&a, &b).unwrap();
                prop_assert!(d.abs() < 1e-15);
            } else {
                prop_assert!(tv_distance(&a, &b).is_err());
            }
            let d = tv_distance_vs_untruncated(&a, &params);
            prop_assert!((0.0..=1.0).contains(&d));
        }
    }
}
