//! Shared fixtures for the pipeline benchmarks.

use burstcode::circuit::CircuitSpec;
use burstcode::code::{build_layout, build_memory_circuit};
use burstcode::fault::build_detector_error_model;
use burstcode::graph::{build_graph, DecodingGraph};
use burstcode::noise::{attach_noise, NoiseConfig, NoiseModel};

/// Noisy memory circuit with a mid-experiment burst.
pub fn fixture_circuit(model: NoiseModel, d: u32, p: f64, p_b: f64) -> CircuitSpec {
    let rounds = 2 * d;
    let circuit = build_memory_circuit(&build_layout(d).unwrap(), rounds).unwrap();
    attach_noise(
        &circuit,
        &NoiseConfig {
            model,
            p,
            p_b,
            burst_round: Some(rounds / 2),
        },
    )
    .unwrap()
}

/// Decoding graph for a fixture circuit.
pub fn fixture_graph(circuit: &CircuitSpec) -> DecodingGraph {
    build_graph(&build_detector_error_model(circuit).unwrap()).unwrap()
}
