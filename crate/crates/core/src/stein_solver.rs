//! Exact solutions of the characterizing difference equation.
//!
//! For a law truncated to {0, ..., n} with birth rates `a(i)` and death
//! rates `i`, the equation reads
//!
//! ```text
//! a(i) * g(i + 1) * 1{i < n}  -  i * g(i)  =  f(i) - E f(Z),   0 <= i <= n,
//! ```
//!
//! where `Z` has the truncated law. Solutions use the conventions
//! `g(0) = 0` (state 0 has death rate 0, so `g(0)` never matters) and
//! `g(n + 1) = 0` (the indicator switches the birth term off at the
//! boundary, so the equation never constrains `g(n + 1)`).

use serde::Serialize;

use crate::distributions::{DistParams, FinitePmf};
use crate::error::{Error, Result};
use crate::math::{normalize_log_weights, KahanSum};

/// Indicator of a subset of {0, ..., n}, the test functions under which
/// expectation differences become total-variation distances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestFunction {
    n: usize,
    member: Vec<bool>,
}

impl TestFunction {
    /// Builds the indicator from a membership vector over {0, ..., len-1}.
    pub fn new(member: Vec<bool>) -> Result<Self> {
        if member.is_empty() {
            return Err(Error::InvalidParameter(
                "test function needs at least the single state 0".into(),
            ));
        }
        Ok(Self {
            n: member.len() - 1,
            member,
        })
    }

    /// The indicator of the empty set on {0, ..., n}.
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            member: vec![false; n + 1],
        }
    }

    /// The indicator of all of {0, ..., n}.
    pub fn full(n: usize) -> Self {
        Self {
            n,
            member: vec![true; n + 1],
        }
    }

    /// The indicator of the listed states inside {0, ..., n}.
    pub fn from_indices(n: usize, indices: &[usize]) -> Result<Self> {
        let mut member = vec![false; n + 1];
        for &i in indices {
            if i > n {
                return Err(Error::IndexOutOfRange { index: i, n });
            }
            member[i] = true;
        }
        Ok(Self { n, member })
    }

    /// Largest support point.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Membership of `k`; states beyond `n` are never members.
    pub fn contains(&self, k: usize) -> bool {
        k <= self.n && self.member[k]
    }

    /// The indicator as a number, extended by zero beyond the support.
    pub fn value(&self, k: usize) -> f64 {
        if self.contains(k) {
            1.0
        } else {
            0.0
        }
    }

    /// Set union with another indicator on the same support.
    pub fn union(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b| a || b)
    }

    /// Set intersection with another indicator on the same support.
    pub fn intersection(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b| a && b)
    }

    fn combine(&self, other: &Self, op: impl Fn(bool, bool) -> bool) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::SupportMismatch {
                left: self.n,
                right: other.n,
            });
        }
        Ok(Self {
            n: self.n,
            member: self
                .member
                .iter()
                .zip(&other.member)
                .map(|(&a, &b)| op(a, b))
                .collect(),
        })
    }

    /// Probability of the set under `law`, i.e. the expectation of the
    /// indicator.
    pub fn expectation(&self, law: &FinitePmf) -> Result<f64> {
        if self.n != law.n() {
            return Err(Error::SupportMismatch {
                left: self.n,
                right: law.n(),
            });
        }
        let mut sum = KahanSum::new();
        for (k, &pk) in law.probs().iter().enumerate() {
            if self.member[k] {
                sum.add(pk);
            }
        }
        Ok(sum.value())
    }
}

/// A solution `g(0), ..., g(n + 1)` of the difference equation, with the
/// boundary conventions `g(0) = g(n + 1) = 0` held exactly.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteinSolution {
    n: usize,
    g: Vec<f64>,
}

impl SteinSolution {
    /// Wraps an explicit value vector of length `n + 2`. Both boundary
    /// values must be exactly zero and every entry finite.
    pub fn from_values(g: Vec<f64>) -> Result<Self> {
        if g.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "solution vector needs length n + 2 >= 2, got {}",
                g.len()
            )));
        }
        let n = g.len() - 2;
        if g[0] != 0.0 || g[n + 1] != 0.0 {
            return Err(Error::InvalidParameter(
                "solution vector must have g(0) = g(n + 1) = 0".into(),
            ));
        }
        if let Some(state) = g.iter().position(|x| !x.is_finite()) {
            return Err(Error::SolutionOverflow { state, n });
        }
        Ok(Self { n, g })
    }

    /// Largest support point of the underlying window.
    pub fn n(&self) -> usize {
        self.n
    }

    /// The values `g(0), ..., g(n + 1)`.
    pub fn values(&self) -> &[f64] {
        &self.g
    }
}

/// A closed-form solution together with a flag recording whether the
/// evaluation had to fall back to the forward recursion because some
/// window mass underflowed the 1e-300 guard.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormSolution {
    pub solution: SteinSolution,
    pub used_forward_fallback: bool,
}

/// Solves the equation by forward recursion:
/// `g(i + 1) = (f(i) - E f + i * g(i)) / a(i)`.
///
/// Exact up to round-off on rows it visits, but round-off is amplified by
/// roughly `mass(0) / mass(i)` in states far beyond the bulk of the law;
/// the result is rejected only if a value leaves the finite range.
pub fn solve_forward(params: &DistParams, f: &TestFunction) -> Result<SteinSolution> {
    let pi = params.truncated(f.n());
    solve_forward_with_law(params, f, &pi)
}

pub(crate) fn solve_forward_with_law(
    params: &DistParams,
    f: &TestFunction,
    pi: &FinitePmf,
) -> Result<SteinSolution> {
    debug_assert_eq!(pi.n(), f.n());
    let n = f.n();
    let ef = f.expectation(pi)?;
    let mut g = vec![0.0; n + 2];
    if n >= 1 {
        g[1] = (f.value(0) - ef) / params.birth_rate(0);
        for i in 1..n {
            g[i + 1] = (f.value(i) - ef + i as f64 * g[i]) / params.birth_rate(i);
        }
    }
    SteinSolution::from_values(g)
}

/// Solves the equation in closed form via the window masses `pi`:
/// `g(i + 1) = sum_{j <= i} pi(j) * (f(j) - E f) / (a(i) * pi(i))`.
///
/// Each value is a single normalized prefix sum, so accuracy does not
/// degrade along the recursion. When any mass among the denominators
/// underflows the 1e-300 guard the routine falls back to
/// [`solve_forward`] and flags it.
pub fn solve_closed_form(params: &DistParams, f: &TestFunction) -> Result<ClosedFormSolution> {
    let n = f.n();
    let pi = params.truncated(n);
    let probs = pi.probs();
    if probs.iter().take(n).any(|&x| x < 1e-300) {
        let solution = solve_forward_with_law(params, f, &pi)?;
        return Ok(ClosedFormSolution {
            solution,
            used_forward_fallback: true,
        });
    }
    let ef = f.expectation(&pi)?;
    let mut g = vec![0.0; n + 2];
    let mut prefix = KahanSum::new();
    for i in 0..n {
        prefix.add(probs[i] * (f.value(i) - ef));
        g[i + 1] = prefix.value() / (params.birth_rate(i) * probs[i]);
    }
    // g(n + 1) stays zero: the full centered sum vanishes exactly, and the
    // equation never constrains the boundary value anyway.
    Ok(ClosedFormSolution {
        solution: SteinSolution::from_values(g)?,
        used_forward_fallback: false,
    })
}

/// The expectation `E[ a(W) g(W + 1) 1{W < n} - W g(W) ]` under an
/// arbitrary law `w` on the same window.
///
/// Zero (up to round-off) exactly when `w` is the truncated law; more
/// generally, when `g` solves the equation for a test function `f`, the
/// residual equals `E_w f - E_pi f`.
pub fn stein_residual(w: &FinitePmf, params: &DistParams, sol: &SteinSolution) -> Result<f64> {
    if w.n() != sol.n() {
        return Err(Error::SupportMismatch {
            left: w.n(),
            right: sol.n(),
        });
    }
    let n = w.n();
    let g = sol.values();
    let mut acc = KahanSum::new();
    for (k, &wk) in w.probs().iter().enumerate() {
        let birth = if k < n {
            params.birth_rate(k) * g[k + 1]
        } else {
            0.0
        };
        acc.add(wk * (birth - k as f64 * g[k]));
    }
    Ok(acc.value())
}

/// Largest absolute defect of `sol` over all n + 1 rows of the equation,
/// including the boundary row `-n * g(n) = f(n) - E f` that the forward
/// recursion never enforces. Diagnostic only: in states far beyond the
/// bulk of the law the defect reflects round-off amplification, not a
/// wrong solution.
pub fn max_equation_residual(
    params: &DistParams,
    f: &TestFunction,
    sol: &SteinSolution,
) -> Result<f64> {
    if f.n() != sol.n() {
        return Err(Error::SupportMismatch {
            left: f.n(),
            right: sol.n(),
        });
    }
    let n = f.n();
    let pi = params.truncated(n);
    let ef = f.expectation(&pi)?;
    let g = sol.values();
    let mut worst = 0.0f64;
    for i in 0..=n {
        let lhs = if i < n {
            params.birth_rate(i) * g[i + 1] - i as f64 * g[i]
        } else {
            -(n as f64) * g[n]
        };
        worst = worst.max((lhs - (f.value(i) - ef)).abs());
    }
    Ok(worst)
}

/// Reconstructs the window law implied by the equation alone: requiring a
/// zero residual for every singleton indicator forces the mass recurrence
/// `a(i - 1) * q(i - 1) = i * q(i)`, which is solved here in log space and
/// normalized.
pub fn recover_pmf_from_identity(params: &DistParams, n: usize) -> FinitePmf {
    let mut log_q = Vec::with_capacity(n + 1);
    log_q.push(0.0);
    for i in 1..=n {
        let prev = log_q[i - 1];
        log_q.push(prev + params.birth_rate(i - 1).ln() - (i as f64).ln());
    }
    FinitePmf::from_raw(normalize_log_weights(&log_q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::tv_distance;
    use proptest::collection::vec;
    use proptest::prelude::*;
    use proptest::test_runner::{FileFailurePersistence, RngAlgorithm};

    fn nb(r: f64, p: f64) -> DistParams {
        DistParams::neg_binomial(r, p).unwrap()
    }

    fn po(lambda: f64) -> DistParams {
        DistParams::poisson(lambda).unwrap()
    }

    #[test]
    fn test_function_construction_and_algebra() {
        let a = TestFunction::from_indices(3, &[0, 2]).unwrap();
        assert!(a.contains(0) && !a.contains(1) && a.contains(2) && !a.contains(3));
        assert_eq!(a.value(2), 1.0);
        assert_eq!(a.value(9), 0.0, "states beyond n are never members");

        let b = TestFunction::from_indices(3, &[2, 3]).unwrap();
        let u = a.union(&b).unwrap();
        let i = a.intersection(&b).unwrap();
        assert_eq!(u, TestFunction::from_indices(3, &[0, 2, 3]).unwrap());
        assert_eq!(i, TestFunction::from_indices(3, &[2]).unwrap());

        assert!(TestFunction::from_indices(3, &[4]).is_err());
        assert!(TestFunction::new(vec![]).is_err());
        assert!(a.union(&TestFunction::empty(5)).is_err());

        let law = FinitePmf::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let ef = a.expectation(&law).unwrap();
        assert!((ef - 0.4).abs() < 1e-15);
        assert!(a.expectation(&FinitePmf::new(vec![1.0]).unwrap()).is_err());
    }

    #[test]
    fn solution_vector_validation() {
        assert!(SteinSolution::from_values(vec![0.0, 3.5, 0.0]).is_ok());
        assert!(SteinSolution::from_values(vec![0.0]).is_err());
        assert!(SteinSolution::from_values(vec![0.5, 0.0]).is_err());
        assert!(SteinSolution::from_values(vec![0.0, 0.5]).is_err());
        assert!(matches!(
            SteinSolution::from_values(vec![0.0, f64::INFINITY, 0.0]),
            Err(Error::SolutionOverflow { state: 1, n: 1 })
        ));
    }

    #[test]
    fn known_solutions_on_a_two_state_window() {
        // Poisson rate 1 on {0, 1}: masses (1/2, 1/2), indicator of {0}.
        let f = TestFunction::from_indices(1, &[0]).unwrap();
        let sol = solve_forward(&po(1.0), &f).unwrap();
        assert_eq!(sol.values().len(), 3);
        assert_eq!(sol.values()[0], 0.0);
        assert!((sol.values()[1] - 0.5).abs() < 1e-15);
        assert_eq!(sol.values()[2], 0.0);

        // Negative binomial (1, 1/2) on {0, 1}: masses (2/3, 1/3), birth
        // rate 1/2 at state 0, so g(1) = (1 - 2/3) / (1/2) = 2/3.
        let sol = solve_forward(&nb(1.0, 0.5), &f).unwrap();
        assert!((sol.values()[1] - 2.0 / 3.0).abs() < 1e-15);

        let closed = solve_closed_form(&nb(1.0, 0.5), &f).unwrap();
        assert!(!closed.used_forward_fallback);
        assert!((closed.solution.values()[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn trivial_window_has_the_zero_solution() {
        for f in [TestFunction::empty(0), TestFunction::full(0)] {
            let sol = solve_forward(&po(2.0), &f).unwrap();
            assert_eq!(sol.values(), &[0.0, 0.0]);
            let law = po(2.0).truncated(0);
            assert_eq!(stein_residual(&law, &po(2.0), &sol).unwrap(), 0.0);
        }
    }

    #[test]
    fn residual_vanishes_on_the_truncated_law() {
        for params in [nb(2.0, 0.4), nb(0.5, 0.9), po(3.0)] {
            let n = 8;
            let law = params.truncated(n);
            for f in [
                TestFunction::from_indices(n, &[0, 3, 4]).unwrap(),
                TestFunction::from_indices(n, &[8]).unwrap(),
                TestFunction::full(n),
            ] {
                let sol = solve_forward(&params, &f).unwrap();
                let res = stein_residual(&law, &params, &sol).unwrap();
                assert!(res.abs() < 1e-13, "{params:?}: residual {res}");
                let worst = max_equation_residual(&params, &f, &sol).unwrap();
                assert!(worst < 1e-12, "{params:?}: row defect {worst}");
            }
        }
    }

    #[test]
    fn residual_checks_support() {
        let f = TestFunction::full(3);
        let sol = solve_forward(&po(1.0), &f).unwrap();
        let law = po(1.0).truncated(2);
        assert!(matches!(
            stein_residual(&law, &po(1.0), &sol),
            Err(Error::SupportMismatch { left: 2, right: 3 })
        ));
        assert!(max_equation_residual(&po(1.0), &TestFunction::full(2), &sol).is_err());
    }

    #[test]
    fn recovered_masses_match_direct_truncation() {
        // Poisson rate 2 on {0, ..., 3}: unnormalized 1, 2, 2, 4/3, which
        // normalizes to (3, 6, 6, 4) / 19.
        let law = recover_pmf_from_identity(&po(2.0), 3);
        let expected = [3.0 / 19.0, 6.0 / 19.0, 6.0 / 19.0, 4.0 / 19.0];
        for (got, want) in law.probs().iter().zip(expected) {
            assert!((got - want).abs() < 1e-15);
        }

        assert_eq!(recover_pmf_from_identity(&po(5.0), 0).probs(), &[1.0]);

        for params in [nb(2.0, 0.4), nb(0.5, 0.9), po(0.3)] {
            let d = tv_distance(&recover_pmf_from_identity(&params, 12), &params.truncated(12))
                .unwrap();
            assert!(d < 1e-14, "{params:?}: tv {d}");
        }
    }

    #[test]
    fn closed_form_falls_back_when_window_mass_underflows() {
        // The window mass at 0 of this steeply increasing law falls below
        // the 1e-300 guard, so the closed form cannot safely divide by it.
        let params = nb(800.0, 0.999);
        let n = 360;
        let pi0 = params.truncated(n).probs()[0];
        assert!(pi0 < 1e-300, "trigger mass is {pi0}");

        let f = TestFunction::from_indices(n, &[0, 17, 200]).unwrap();
        let closed = solve_closed_form(&params, &f).unwrap();
        assert!(closed.used_forward_fallback);
        assert_eq!(closed.solution, solve_forward(&params, &f).unwrap());
    }

    #[test]
    fn forward_recursion_reports_overflow_far_in_the_tail() {
        // A window 500 states wide on a rate-1 law: round-off in the
        // recursion is amplified beyond the finite range.
        let f = TestFunction::from_indices(500, &[0]).unwrap();
        assert!(matches!(
            solve_forward(&po(1.0), &f),
            Err(Error::SolutionOverflow { .. })
        ));
        assert!(matches!(
            solve_closed_form(&po(1.0), &f),
            Err(Error::SolutionOverflow { .. })
        ));
    }

    /// Parameters whose untruncated mean sits inside the window, so every
    /// state keeps appreciable mass and solutions stay well conditioned.
    fn matched_case() -> impl Strategy<Value = (DistParams, usize)> {
        (1usize..=12).prop_flat_map(|n| {
            let lo = (n as f64 / 2.0).max(0.5);
            let hi = n as f64 + 2.0;
            prop_oneof![
                (0.2f64..0.8, lo..hi)
                    .prop_map(move |(p, m)| (nb(m * (1.0 - p) / p, p), n)),
                (lo..hi).prop_map(move |m| (po(m), n)),
            ]
        })
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
        fn forward_and_closed_form_agree(
            (params, n) in matched_case(),
            member in vec(any::<bool>(), 13),
        ) {
            let f = TestFunction::new(member[..=n].to_vec()).unwrap();
            let fwd = solve_forward(&params, &f).unwrap();
            let closed = solve_closed_form(&params, &f).unwrap();
            prop_assert!(!closed.used_forward_fallback);
            let pi = params.truncated(n);
            for i in 1..=n {
                let scale = params.birth_rate(i - 1) * pi.probs()[i - 1];
                let tol = 1e-9 * (1.0 + 1.0 / scale);
                let diff = (fwd.values()[i] - closed.solution.values()[i]).abs();
                prop_assert!(diff <= tol, "state {}: {} vs {}", i,
                    fwd.values()[i], closed.solution.values()[i]);
            }
        }

        #[test]
        fn solutions_are_linear_in_the_test_set(
            (params, n) in matched_case(),
            mem_a in vec(any::<bool>(), 13),
            mem_b in vec(any::<bool>(), 13),
        ) {
            let a = TestFunction::new(mem_a[..=n].to_vec()).unwrap();
            let b = TestFunction::new(mem_b[..=n].to_vec()).unwrap();
            let ga = solve_forward(&params, &a).unwrap();
            let gb = solve_forward(&params, &b).unwrap();
            let gu = solve_forward(&params, &a.union(&b).unwrap()).unwrap();
            let gi = solve_forward(&params, &a.intersection(&b).unwrap()).unwrap();
            // Indicators satisfy 1(A) + 1(B) = 1(A u B) + 1(A n B), and the
            // equation is linear in f, so the solutions add the same way.
            for k in 0..=n + 1 {
                let lhs = ga.values()[k] + gb.values()[k];
                let rhs = gu.values()[k] + gi.values()[k];
                prop_assert!((lhs - rhs).abs() < 1e-10, "state {}: {} vs {}", k, lhs, rhs);
            }
        }

        #[test]
        fn residual_measures_expectation_differences(
            (params, n) in matched_case(),
            member in vec(any::<bool>(), 13),
            weights in vec(0.01f64..1.0, 13),
        ) {
            let f = TestFunction::new(member[..=n].to_vec()).unwrap();
            let sol = solve_forward(&params, &f).unwrap();

            let total: f64 = weights[..=n].iter().sum();
            let w = FinitePmf::new(weights[..=n].iter().map(|x| x / total).collect())
                .unwrap();

            let residual = stein_residual(&w, &params, &sol).unwrap();
            let expected =
                f.expectation(&w).unwrap() - f.expectation(&params.truncated(n)).unwrap();
            prop_assert!(
                (residual - expected).abs() < 1e-10,
                "residual {} vs expectation gap {}", residual, expected
            );
        }

        #[test]
        fn recovery_agrees_with_truncation_everywhere(
            params in any_params(),
            n in 0usize..60,
        ) {
            let rec = recover_pmf_from_identity(&params, n);
            let law = params.truncated(n);
            for (a, b) in rec.probs().iter().zip(law.probs()) {
                prop_assert!((a - b).abs() < 1e-10, "{} vs {}", a, b);
            }
        }
    }
}
