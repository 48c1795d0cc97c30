//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Scenario/table configuration problems: unknown keys, missing fields,
    /// violated invariants. Maps to exit code 2 at the CLI.
    #[error("config error: {0}")]
    Config(String),

    /// A link distance of exactly zero; callers must clamp before computing
    /// path gain.
    #[error("degenerate co-location: link distance must be positive")]
    DegenerateColocation,

    /// SINR denominator is exactly zero (no interference, no noise).
    #[error("degenerate noiseless silent network: SINR denominator is zero")]
    SilentNetwork,

    /// The requested desired transmitter is not in the active set.
    #[error("desired transmitter {0} inactive or at non-positive power")]
    DesiredInactive(usize),

    /// Path-loss exponent <= 2 makes the mean Poisson-field interference
    /// diverge; the closed-form coverage expression does not exist.
    #[error("infinite mean interference: pathloss exponent must exceed 2 (got {0})")]
    InfiniteMeanInterference(f64),

    /// Rejection sampling exhausted its draw budget before collecting enough
    /// conditioned samples.
    #[error(
        "conditioning event too rare: acceptance rate {acceptance_rate:.3e} \
         after {total_drawn} draws ({accepted} accepted, {needed} needed)"
    )]
    ConditioningTooRare {
        acceptance_rate: f64,
        total_drawn: u64,
        accepted: u64,
        needed: u64,
    },

    /// More than half of the table cells failed conditioning.
    #[error("grid mismatched to field statistics: {absent} of {total} cells absent")]
    GridMismatch { absent: usize, total: usize },

    /// OP table lookup outside the grid hull. Never extrapolates.
    #[error("out of table range: {0}")]
    OutOfTableRange(String),

    /// OP table lookup needs a cell that failed conditioning during the build.
    #[error("missing cell at interference index {i_index}, distance index {d_index}")]
    MissingCell { i_index: usize, d_index: usize },

    /// A probability argument outside [0, 1].
    #[error("invalid probability: {0}")]
    InvalidProbability(f64),

    /// Simulation runtime failures (I/O aside). Maps to exit code 3.
    #[error("runtime error: {0}")]
    Runtime(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors that should be reported as configuration mistakes
    /// (CLI exit code 2) rather than runtime failures (exit code 3).
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
