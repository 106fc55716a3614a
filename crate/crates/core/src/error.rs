//! Crate-wide error type.

use thiserror::Error;

/// Errors reported by construction, decoding, and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Code distance must be an odd integer >= 3.
    #[error("invalid code distance {0}: must be odd and >= 3")]
    InvalidDistance(u32),

    /// Round counts must be at least 1.
    #[error("invalid round count {0}: must be >= 1")]
    InvalidRounds(u32),

    /// A probability parameter fell outside its allowed range.
    #[error("invalid probability {value} for {name}: must lie in [0, 0.5)")]
    InvalidProbability { name: &'static str, value: f64 },

    /// Burst round index does not address an existing round.
    #[error("burst round {round} out of range (circuit has {rounds} rounds)")]
    BurstRoundOutOfRange { round: u32, rounds: u32 },

    /// A noise-attachment routine was called with the wrong model kind.
    #[error("noise model mismatch: expected {expected}")]
    ModelMismatch { expected: &'static str },

    /// A fault mechanism could not be reduced to a one- or two-detector
    /// signature, so the decoding graph would be ill-defined.
    #[error("mechanism with {count} detectors cannot be decomposed into graph edges")]
    NonGraphlikeMechanism { count: usize },

    /// A Pauli was inserted at an instruction that does not support it.
    #[error("instruction {index} does not act on qubit {qubit}")]
    UnsupportedLocation { index: usize, qubit: u32 },

    /// Instruction index outside the circuit.
    #[error("instruction index {0} out of range")]
    InstructionOutOfRange(usize),

    /// Degenerate input to the burst detector (no usable panel vertices).
    #[error("empty detector panel for round {0}")]
    EmptyPanel(u32),

    /// The two hypothesis rates coincide, so no test is possible.
    #[error("degenerate hypothesis test: p1 == p2")]
    DegenerateHypotheses,

    /// A fit was requested with insufficient data.
    #[error("insufficient data for fit: {0}")]
    InsufficientData(String),

    /// Nonlinear fit failed to converge or produced an out-of-range optimum.
    #[error("fit failed: {0}")]
    FitFailed(String),

    /// Failure rates at or beyond 1/2 cannot be inverted to per-cycle rates.
    #[error("failure probability {0} is saturated (>= 1/2); per-cycle rate is not recoverable")]
    SaturatedFailureRate(f64),

    /// Extrapolation slope is non-negative: the configuration is above
    /// threshold and no finite footprint exists.
    #[error("above threshold: log-linear slope {0} is non-negative")]
    AboveThreshold(f64),

    /// Mean cycles between bursts must be at least 1.
    #[error("invalid tau {0}: must be >= 1")]
    InvalidTau(f64),

    /// Invalid experiment configuration.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Malformed serialized data.
    #[error("parse error: {0}")]
    Parse(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
