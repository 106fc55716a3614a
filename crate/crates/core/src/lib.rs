//! Surface-code memory experiments under noise models with single-round
//! error bursts.
//!
//! The crate covers the full simulation pipeline:
//!
//! * [`code`] — rotated surface code layouts and memory-experiment circuits.
//! * [`noise`] — phenomenological and circuit-level depolarizing noise,
//!   with one optional burst round where every rate is replaced by `p_B`.
//! * [`fault`] — Pauli propagation through Clifford circuits and detector
//!   error model construction.
//! * [`graph`] — weighted decoding graphs and burst-aware reweighting.
//! * [`sampler`] — reproducible Pauli-frame Monte Carlo sampling and the
//!   per-time-slice detector density diagnostic.
//! * [`matching`] — exact minimum-weight perfect matching decoding.
//! * [`burst`] — maximum-likelihood burst detection from syndrome weight.
//! * [`analysis`] — threshold fits, per-cycle failure rates, log-linear
//!   extrapolation, and teraquop footprints.

pub mod analysis;
pub mod burst;
pub mod circuit;
pub mod code;
pub mod error;
pub mod fault;
pub mod graph;
pub mod matching;
pub mod noise;
pub mod sampler;

pub use circuit::{ChannelKind, CircuitSpec, NoiseChannel, Pauli};
pub use code::{build_layout, build_memory_circuit, CheckRecord, CodeLayout};
pub use error::Error;
pub use fault::{build_detector_error_model, propagate_pauli, DetectorErrorModel, FaultMechanism};
pub use graph::{build_graph, reweight_burst, DecodingGraph};
pub use matching::{
    decode_shot, defect_distances, logical_error_rate, min_weight_matching, LogicalErrorEstimate,
    MatchingResult,
};
pub use noise::{attach_circuit_depolarizing, attach_phenomenological, NoiseConfig, NoiseModel};
pub use sampler::{detector_density, sample, ShotBatch, ShotRecord};
