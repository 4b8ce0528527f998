//! Error type shared across the crate.

/// Errors produced by constructors and computations in this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A distribution, model, or simulation parameter is out of range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Two finite laws were combined but live on different supports.
    #[error("support mismatch: left has n = {left}, right has n = {right}")]
    SupportMismatch { left: usize, right: usize },

    /// A probability vector failed validation.
    #[error("not a probability mass function: {0}")]
    NotAPmf(String),

    /// An index lies outside the support {0, ..., n}.
    #[error("index {index} is out of range for support 0..={n}")]
    IndexOutOfRange { index: usize, n: usize },

    /// A difference-equation solution left the double-precision range.
    #[error(
        "solution value at state {state} left the double-precision range; \
         the window 0..={n} reaches too far into the tail of this law"
    )]
    SolutionOverflow { state: usize, n: usize },

    /// The exhaustive search over test functions was asked to enumerate
    /// more than 2^20 sets.
    #[error("brute-force search over 2^(n+1) test functions is capped at n = 20, got n = {0}")]
    BruteForceCap(usize),

    /// The fault-count law is overdispersed, so the variance-based bound
    /// does not apply.
    #[error(
        "fault count is overdispersed (variance {var_w} exceeds mean {lambda}); \
         the bound requires variance <= mean"
    )]
    Overdispersed { lambda: f64, var_w: f64 },

    /// The chain has no transitions to time (support is the single state 0).
    #[error("the chain on {{0}} never leaves its only state; no transition time exists")]
    NoTransitions,

    /// An estimator that integrates over time was run without a time horizon.
    #[error("this estimator requires a time horizon; configure run length as a horizon")]
    HorizonRequired,
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
