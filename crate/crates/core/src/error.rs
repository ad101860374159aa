use thiserror::Error;

use crate::timing::TimingViolation;

/// Errors raised by the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("timing configuration invalid: {0}")]
    Timing(#[from] TimingViolation),

    #[error("radius {radius:.6e} m left the state domain [{r_min:.6e}, {r_max:.6e}] m")]
    Singularity { radius: f64, r_min: f64, r_max: f64 },

    #[error("integrator step must be positive, got {0}")]
    StepSize(f64),

    #[error("impulse magnitude {magnitude} exceeds actuation limit {limit}")]
    ActuationLimit { magnitude: f64, limit: f64 },

    #[error("barrier gradient undefined: position coincides with zone center")]
    BarrierSingularity,

    #[error("quadratic program infeasible")]
    QpInfeasible,

    #[error("quadratic program hit iteration limit {0}")]
    QpIterationLimit(usize),

    #[error("malformed quadratic program: {0}")]
    QpMalformed(String),

    #[error("no verifier sample satisfies the safe-set condition")]
    DomainEmpty,

    #[error("bracket invalid: {0}")]
    Bracket(String),

    #[error("zeno guard: {count} jumps at t = {t}")]
    Zeno { t: f64, count: usize },

    #[error("safety-infeasible at t = {t}: {reason}")]
    SafetyInfeasible { t: f64, reason: String },

    #[error("orbit is not elliptic (e = {0})")]
    NonElliptic(f64),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("run {run} (seed {seed}) failed: {source}")]
    Run {
        run: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
