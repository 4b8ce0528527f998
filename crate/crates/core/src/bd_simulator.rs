//! A continuous-time birth-death chain whose stationary law is the
//! truncated law: births at rate `a(i)` for `i < n`, deaths at rate `i`.
//!
//! The simulator exists to check the exact machinery against sample paths:
//! occupation fractions against the truncated masses, the mean first
//! transition time out of state 0 against `1 / a(0)` (whose product with
//! `1 - pi(0)` is exactly the smoothness factor at state 0), and coupled
//! occupation integrals against solutions of the difference equation.
//!
//! All randomness flows from one 64-bit seed through counter-based streams,
//! so every estimate is reproducible and replications are independent.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use crate::distributions::{DistParams, FinitePmf};
use crate::error::{Error, Result};
use crate::math::KahanSum;
use crate::stein_solver::TestFunction;

/// How long one replication runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunLength {
    /// Simulate the clock up to this time.
    Horizon(f64),
    /// Stop after this many jumps.
    EventCap(u64),
}

/// A reproducible simulation setup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    params: DistParams,
    n: usize,
    initial_state: usize,
    run: RunLength,
    seed: u64,
    replications: usize,
}

impl SimConfig {
    /// Chain on {0, ..., n} started at state 0 with seed 0 and a single
    /// replication. A time horizon must be finite and positive; an event
    /// cap must be at least 1.
    pub fn new(params: DistParams, n: usize, run: RunLength) -> Result<Self> {
        match run {
            RunLength::Horizon(h) if !h.is_finite() || h <= 0.0 => {
                return Err(Error::InvalidParameter(format!(
                    "time horizon must be finite and positive, got {h}"
                )));
            }
            RunLength::EventCap(0) => {
                return Err(Error::InvalidParameter(
                    "event cap must be at least 1".into(),
                ));
            }
            _ => {}
        }
        Ok(Self {
            params,
            n,
            initial_state: 0,
            run,
            seed: 0,
            replications: 1,
        })
    }

    /// Starts each replication at `state`, which must lie in the window.
    pub fn with_initial_state(mut self, state: usize) -> Result<Self> {
        if state > self.n {
            return Err(Error::IndexOutOfRange {
                index: state,
                n: self.n,
            });
        }
        self.initial_state = state;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_replications(mut self, replications: usize) -> Result<Self> {
        if replications == 0 {
            return Err(Error::InvalidParameter(
                "at least one replication is required".into(),
            ));
        }
        self.replications = replications;
        Ok(self)
    }

    fn horizon(&self) -> Result<f64> {
        match self.run {
            RunLength::Horizon(h) => Ok(h),
            RunLength::EventCap(_) => Err(Error::HorizonRequired),
        }
    }
}

/// A point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimEstimate {
    pub point: f64,
    pub std_error: f64,
    pub replications: usize,
}

/// Simulated mean of the first transition time out of state 0, with the
/// exact quantities it verifies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TauZeroOneReport {
    /// Simulated mean and standard error of the transition time.
    pub estimate: SimEstimate,
    /// Exact mean `1 / a(0)`.
    pub analytic: f64,
    /// Simulated mean times `1 - pi(0)`.
    pub implied_sharp: f64,
    /// Standard error of that product.
    pub implied_sharp_std_error: f64,
    /// The exact value it estimates: the factor `(1 - pi(0)) / a(0)`.
    pub factor_bound: f64,
}

/// One stream of the seeded generator; distinct streams are independent.
fn stream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Jump times and post-jump states, starting with `(0, initial)`. The
/// internal entry state `n + 1` (used by the coupling estimator) has no
/// birth rate and falls into the window at its first jump. Every jump
/// consumes exactly two uniform draws, and a horizon cuts the path before
/// the first jump that would land beyond it.
fn run_path(
    params: &DistParams,
    n: usize,
    initial: usize,
    run: RunLength,
    rng: &mut ChaCha12Rng,
) -> Vec<(f64, usize)> {
    let mut path = vec![(0.0, initial)];
    let mut state = initial;
    let mut t = 0.0f64;
    loop {
        let up = if state < n {
            params.birth_rate(state)
        } else {
            0.0
        };
        let down = state as f64;
        let total = up + down;
        if total == 0.0 {
            break;
        }
        let u_time: f64 = rng.gen();
        let u_dir: f64 = rng.gen();
        let dt = -(-u_time).ln_1p() / total;
        if let RunLength::Horizon(h) = run {
            if t + dt > h {
                break;
            }
        }
        t += dt;
        state = if u_dir * total < up { state + 1 } else { state - 1 };
        path.push((t, state));
        if let RunLength::EventCap(cap) = run {
            if path.len() - 1 == cap as usize {
                break;
            }
        }
    }
    path
}

/// One sample path under stream 0 of the seed.
pub fn simulate_path(config: &SimConfig) -> Result<Vec<(f64, usize)>> {
    let mut rng = stream_rng(config.seed, 0);
    Ok(run_path(
        &config.params,
        config.n,
        config.initial_state,
        config.run,
        &mut rng,
    ))
}

/// Occupation fractions over `[0.1 * horizon, horizon]`, pooled across
/// replications (one stream per replication). Requires a time horizon.
pub fn empirical_stationary(config: &SimConfig) -> Result<FinitePmf> {
    let horizon = config.horizon()?;
    let burn = 0.1 * horizon;
    let mut occupancy = vec![0.0f64; config.n + 1];
    for rep in 0..config.replications {
        let mut rng = stream_rng(config.seed, rep as u64);
        let path = run_path(
            &config.params,
            config.n,
            config.initial_state,
            config.run,
            &mut rng,
        );
        for (idx, &(start, state)) in path.iter().enumerate() {
            let end = path.get(idx + 1).map_or(horizon, |&(next, _)| next);
            let clipped = end.min(horizon) - start.max(burn);
            if clipped > 0.0 {
                occupancy[state] += clipped;
            }
        }
    }
    let mut total = KahanSum::new();
    for &x in &occupancy {
        total.add(x);
    }
    let total = total.value();
    Ok(FinitePmf::from_raw(
        occupancy.into_iter().map(|x| x / total).collect(),
    ))
}

/// Mean first transition time out of state 0 across replications (one
/// stream each), against its exact value `1 / a(0)`. The product of the
/// mean with `1 - pi(0)` estimates the smoothness factor at state 0, which
/// is reported alongside. The initial state and run length of the
/// configuration are ignored: each replication starts at 0 and stops at
/// its first jump.
pub fn mean_first_transition_from_zero(config: &SimConfig) -> Result<TauZeroOneReport> {
    if config.n == 0 {
        return Err(Error::NoTransitions);
    }
    let mut welford = Welford::new();
    for rep in 0..config.replications {
        let mut rng = stream_rng(config.seed, rep as u64);
        let path = run_path(&config.params, config.n, 0, RunLength::EventCap(1), &mut rng);
        welford.add(path[1].0);
    }
    let estimate = welford.estimate();
    let pi0 = config.params.truncated(config.n).probs()[0];
    let alpha0 = config.params.birth_rate(0);
    Ok(TauZeroOneReport {
        estimate,
        analytic: 1.0 / alpha0,
        implied_sharp: estimate.point * (1.0 - pi0),
        implied_sharp_std_error: estimate.std_error * (1.0 - pi0),
        factor_bound: (1.0 - pi0) / alpha0,
    })
}

/// Coupled estimate of the solution value `g_f(i + 1)`: two independent
/// chains started at `i + 1` and `i` integrate the centered indicator
/// `f - E f` over the horizon, and the difference of the negated integrals
/// is averaged across replications (streams `2 rep` and `2 rep + 1`).
/// States beyond the window (only the entry state `n + 1` of the upper
/// chain at `i = n`) contribute zero, matching the boundary convention
/// `g(n + 1) = 0`: from there the chain earns nothing until it falls into
/// the window, so the two integrals agree in expectation.
pub fn estimate_h_difference(
    config: &SimConfig,
    f: &TestFunction,
    i: usize,
) -> Result<SimEstimate> {
    if f.n() != config.n {
        return Err(Error::SupportMismatch {
            left: f.n(),
            right: config.n,
        });
    }
    if i > config.n {
        return Err(Error::IndexOutOfRange {
            index: i,
            n: config.n,
        });
    }
    let horizon = config.horizon()?;
    let pi = config.params.truncated(config.n);
    let ef = f.expectation(&pi)?;
    let psi = |state: usize| {
        if state <= config.n {
            f.value(state) - ef
        } else {
            0.0
        }
    };
    let integrate = |path: &[(f64, usize)]| {
        let mut acc = KahanSum::new();
        for (idx, &(start, state)) in path.iter().enumerate() {
            let end = path.get(idx + 1).map_or(horizon, |&(next, _)| next);
            acc.add(psi(state) * (end.min(horizon) - start));
        }
        -acc.value()
    };
    let mut welford = Welford::new();
    for rep in 0..config.replications {
        let mut upper_rng = stream_rng(config.seed, 2 * rep as u64);
        let mut lower_rng = stream_rng(config.seed, 2 * rep as u64 + 1);
        let upper = run_path(&config.params, config.n, i + 1, config.run, &mut upper_rng);
        let lower = run_path(&config.params, config.n, i, config.run, &mut lower_rng);
        welford.add(integrate(&upper) - integrate(&lower));
    }
    Ok(welford.estimate())
}

/// Streaming mean and variance.
struct Welford {
    count: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn new() -> Self {
        Self {
            count: 0,
            mean: 0.0,
            m2: 0.0,
        }
    }

    fn add(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    fn estimate(&self) -> SimEstimate {
        let std_error = if self.count > 1 {
            (self.m2 / ((self.count - 1) as f64 * self.count as f64)).sqrt()
        } else {
            f64::INFINITY
        };
        SimEstimate {
            point: self.mean,
            std_error,
            replications: self.count,
        }
    }
}
