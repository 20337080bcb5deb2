use thiserror::Error;

/// Errors from parameter validation and the closed-form model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("parameter `{name}` = {value} is out of range: {expected}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("storage time must be non-negative, got {0} ns")]
    NegativeTime(f64),
    #[error("memory efficiency is zero at t = {0} ns; g2 after the memory is undefined")]
    ZeroEfficiency(f64),
    #[error("sync-trial rate {trials} exceeds DDG-2 trigger rate {trig2}")]
    TrialsExceedTriggers { trials: f64, trig2: f64 },
    #[error("memory downtime {0} exceeds 1; the analytic rates are not self-consistent")]
    DowntimeAboveOne(f64),
    #[error(
        "internal efficiency {0} exceeds 1; end-to-end efficiency is larger than the transmission"
    )]
    InternalEfficiencyAboveOne(f64),
}

/// Errors raised by the discrete-event simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ModelError),
    #[error("simulated duration must be positive")]
    NonPositiveDuration,
    #[error("trigger state machine violated {what}: pulses at {previous_ps} ps and {next_ps} ps")]
    SpacingViolation {
        what: &'static str,
        previous_ps: u64,
        next_ps: u64,
    },
}

/// Errors raised by the estimators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("no {0} counts; the estimate is undefined")]
    ZeroCounts(&'static str),
    #[error("histograms have different bin geometry")]
    GeometryMismatch,
    #[error("scan has no delays in the plateau region {lo_ps}..{hi_ps} ps")]
    NoPlateau { lo_ps: i64, hi_ps: i64 },
    #[error("the event log of memory operations is required but empty")]
    MissingLog,
    #[error("invalid histogram geometry: {0}")]
    BadGeometry(&'static str),
}

/// Errors raised by fits and calibrations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("need at least {need} data points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("data point {0} has a non-positive or non-finite uncertainty")]
    BadUncertainty(usize),
    #[error("data point {0} is not finite")]
    NonFinite(usize),
    #[error("target {target} is outside the feasible interval [{lo}, {hi}]")]
    Infeasible { target: f64, lo: f64, hi: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}
