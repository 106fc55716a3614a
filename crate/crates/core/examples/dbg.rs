use burstcode::code::{build_layout, build_memory_circuit};
use burstcode::noise::{attach_noise, NoiseConfig, NoiseModel};
use burstcode::fault::build_detector_error_model;
use burstcode::graph::build_graph;
use burstcode::matching::logical_error_rate;
use burstcode::sampler::sample;

fn main() {
    for p in [0.024f64, 0.027, 0.030, 0.033] {
        let mut line = format!("p={p:.3}:");
        for d in [5u32, 11] {
            let c0 = build_memory_circuit(&build_layout(d).unwrap(), 2 * d).unwrap();
            let c = attach_noise(&c0, &NoiseConfig { model: NoiseModel::Phenomenological, p, p_b: p, burst_round: None }).unwrap();
            let g = build_graph(&build_detector_error_model(&c).unwrap()).unwrap();
            let r = logical_error_rate(&g, &sample(&c, 4000, 11)).rate;
            line += &format!("  d={d}: {r:.4}");
        }
        println!("{line}");
    }
}
