use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("link index {0} out of range (arm has {max} links)", max = crate::DOF)]
    LinkIndex(usize),

    #[error("singular coupled acceleration system (condition estimate {condition:.3e})")]
    SingularDynamics { condition: f64 },

    #[error("pitch angle {pitch:.4} rad at t = {t:.4} s exceeds the Euler singularity guard")]
    PitchSingularity { t: f64, pitch: f64 },

    #[error("simulation diverged at t = {t:.4} s: {reason}")]
    Diverged { t: f64, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("empty series")]
    EmptySeries,

    #[error("all {0} samples fell below the MAPE denominator floor")]
    AllSamplesExcluded(usize),

    #[error("series length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
