//! Cross-module checks: decoding-graph structure, circuit fault distance,
//! agreement between the two fault-propagation routes, sampler/model
//! distributional agreement, and decode correctness on known inputs.

use std::collections::{BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use burstcode::circuit::{CircuitSpec, Op, Pauli};
use burstcode::code::{build_layout, build_memory_circuit};
use burstcode::fault::{
    build_detector_error_model, decompose, merge_mechanisms, propagate_pauli, Contributor,
    RawMechanism,
};
use burstcode::graph::{build_graph, DecodingGraph};
use burstcode::matching::{
    decode_shot, defect_distances, logical_error_rate, min_weight_matching, Decoder,
    DecodeScratch,
};
use burstcode::noise::{attach_noise, NoiseConfig, NoiseModel};
use burstcode::sampler::{sample, ShotRecord};

fn noisy(d: u32, rounds: u32, model: NoiseModel, p: f64, p_b: f64, burst: Option<u32>) -> CircuitSpec {
    let c = build_memory_circuit(&build_layout(d).unwrap(), rounds).unwrap();
    attach_noise(
        &c,
        &NoiseConfig {
            model,
            p,
            p_b,
            burst_round: burst,
        },
    )
    .unwrap()
}

fn graph_for(circuit: &CircuitSpec) -> DecodingGraph {
    build_graph(&build_detector_error_model(circuit).unwrap()).unwrap()
}

#[test]
fn phenomenological_graph_census_d3() {
    // d=3, T=2: per layer 3 bulk data edges plus 4 boundary edges (the six
    // single-check data qubits share signatures pairwise and merge), 4
    // vertical measurement edges per round, and X-check measurement flips
    // collapsing to one boundary edge per X check.
    let g = graph_for(&noisy(3, 2, NoiseModel::Phenomenological, 0.02, 0.02, None));
    let boundary = g.boundary();
    let z_det = |d: u32| {
        let c = g.coords[d as usize];
        (c.x + c.y) % 4 == 0
    };
    let mut z_space = 0;
    let mut z_boundary = 0;
    let mut z_vertical = 0;
    let mut x_edges = 0;
    for e in &g.edges {
        if e.v == boundary {
            if z_det(e.u) {
                z_boundary += 1;
            } else {
                x_edges += 1;
            }
        } else if z_det(e.u) {
            let (cu, cv) = (g.coords[e.u as usize], g.coords[e.v as usize]);
            if cu.layer == cv.layer {
                z_space += 1;
            } else {
                z_vertical += 1;
            }
        } else {
            panic!("unexpected X-detector pair edge in the phenomenological model");
        }
    }
    assert_eq!(z_space, 3 * 2);
    assert_eq!(z_boundary, 4 * 2);
    assert_eq!(z_vertical, 4 * 2);
    assert_eq!(x_edges, 4);
}

#[test]
fn phenomenological_bulk_vertex_degree_is_six() {
    // Cubic-lattice structure: 4 space neighbors + 2 time neighbors.
    let g = graph_for(&noisy(5, 10, NoiseModel::Phenomenological, 0.02, 0.02, None));
    let mut bulk = 0;
    for d in 0..g.detector_count {
        let c = g.coords[d as usize];
        if (c.x + c.y) % 4 != 0 {
            continue; // X-check detector
        }
        // Interior in space and time.
        if c.x >= 4 && c.x <= 6 && c.y >= 4 && c.y <= 6 && c.layer >= 2 && c.layer <= 7 {
            assert_eq!(g.degree(d), 6, "detector {d} at {c:?}");
            bulk += 1;
        }
    }
    assert!(bulk > 10);
}

/// Minimum number of fault mechanisms that flip the observable while
/// leaving every detector quiet: breadth-first search over (vertex,
/// observable parity) states, from the boundary back to the boundary.
fn effective_distance(g: &DecodingGraph) -> usize {
    let n = g.vertex_count();
    let idx = |v: u32, parity: bool| v as usize * 2 + usize::from(parity);
    let mut dist = vec![usize::MAX; 2 * n];
    let mut queue = VecDeque::new();
    let boundary = g.boundary();
    dist[idx(boundary, false)] = 0;
    queue.push_back((boundary, false));
    while let Some((v, parity)) = queue.pop_front() {
        let d = dist[idx(v, parity)];
        for &(w, e) in g.neighbors(v) {
            let p2 = parity ^ g.edges[e as usize].observable;
            if dist[idx(w, p2)] == usize::MAX {
                dist[idx(w, p2)] = d + 1;
                queue.push_back((w, p2));
            }
        }
    }
    dist[idx(boundary, true)]
}

#[test]
fn effective_distance_matches_code_distance() {
    for d in [3u32, 5] {
        let g = graph_for(&noisy(d, 2 * d, NoiseModel::Phenomenological, 0.01, 0.01, None));
        assert_eq!(effective_distance(&g), d as usize, "phenomenological d={d}");
        let g = graph_for(&noisy(d, 2 * d, NoiseModel::CircuitDepolarizing, 0.001, 0.001, None));
        assert_eq!(effective_distance(&g), d as usize, "circuit-level d={d}");
    }
}

#[test]
fn burst_reweighting_preserves_effective_distance_and_edges() {
    let g = graph_for(&noisy(3, 6, NoiseModel::Phenomenological, 0.02, 0.02, None));
    let rw = burstcode::graph::reweight_burst(&g, 3, 0.09).unwrap();
    assert_eq!(g.edges.len(), rw.edges.len());
    assert_eq!(effective_distance(&rw), 3);
}

/// Forward single-fault enumeration: the independent oracle for the
/// backward-sweep detector error model builder.
fn forward_dem(circuit: &CircuitSpec) -> Vec<(Vec<u32>, bool, f64)> {
    let mut raw = Vec::new();
    for (idx, inst) in circuit.instructions.iter().enumerate() {
        let ch = match &inst.op {
            Op::Noise(ch) => ch,
            _ => continue,
        };
        if ch.kind == burstcode::circuit::ChannelKind::MeasureFlip {
            // Classical flip: equivalent to X on the ancilla right before
            // its measurement (the ancilla is reset or never used again).
            for &q in &ch.targets {
                let (dets, obs) = propagate_pauli(circuit, idx, &vec![(q, Pauli::X)]).unwrap();
                raw.push(RawMechanism {
                    probability: ch.rate,
                    detectors: dets,
                    flips_observable: obs,
                    contributor: Contributor {
                        instruction: idx as u32,
                        round: ch.round,
                        multiplier: 1.0,
                        pauli: Vec::new(),
                    },
                });
            }
            continue;
        }
        let multiplier = match ch.kind {
            burstcode::circuit::ChannelKind::BitFlip => 1.0,
            burstcode::circuit::ChannelKind::Depolarize1 => 1.0 / 3.0,
            burstcode::circuit::ChannelKind::Depolarize2 => 1.0 / 15.0,
            _ => unreachable!(),
        };
        let outcomes = ch.site_outcomes();
        for site in ch.sites() {
            for (legs, prob) in &outcomes {
                for part_is_x in [true, false] {
                    let pauli: Vec<(u32, Pauli)> = legs
                        .iter()
                        .filter(|(_, p)| if part_is_x { p.has_x() } else { p.has_z() })
                        .map(|&(leg, _)| (site[leg], if part_is_x { Pauli::X } else { Pauli::Z }))
                        .collect();
                    if pauli.is_empty() {
                        continue;
                    }
                    let (dets, obs) = propagate_pauli(circuit, idx, &pauli).unwrap();
                    if dets.is_empty() && !obs {
                        continue;
                    }
                    raw.push(RawMechanism {
                        probability: *prob,
                        detectors: dets,
                        flips_observable: obs,
                        contributor: Contributor {
                            instruction: idx as u32,
                            round: ch.round,
                            multiplier,
                            pauli,
                        },
                    });
                }
            }
        }
    }
    decompose(merge_mechanisms(raw))
        .unwrap()
        .into_iter()
        .map(|m| (m.detectors, m.flips_observable, m.probability))
        .collect()
}

#[test]
fn backward_dem_matches_forward_enumeration() {
    for (model, p) in [
        (NoiseModel::Phenomenological, 0.013),
        (NoiseModel::CircuitDepolarizing, 0.001),
    ] {
        let c = noisy(3, 6, model, p, 3.0 * p, Some(2));
        let dem = build_detector_error_model(&c).unwrap();
        let fast: Vec<(Vec<u32>, bool, f64)> = dem
            .mechanisms
            .iter()
            .map(|m| (m.detectors.clone(), m.flips_observable, m.probability))
            .collect();
        let slow = forward_dem(&c);
        assert_eq!(fast.len(), slow.len(), "{model:?} mechanism count");
        for (a, b) in fast.iter().zip(slow.iter()) {
            assert_eq!(a.0, b.0, "{model:?} detector sets");
            assert_eq!(a.1, b.1, "{model:?} observable bits");
            assert!((a.2 - b.2).abs() <= 1e-15, "{model:?} probabilities");
        }
    }
}

#[test]
fn frame_sampler_matches_mechanism_sampler_marginals() {
    // Firing the decomposed mechanisms independently must reproduce the
    // per-detector marginals of the direct Pauli-frame simulation.
    let c = noisy(3, 6, NoiseModel::CircuitDepolarizing, 0.004, 0.012, Some(3));
    let shots = 200_000usize;
    let batch = sample(&c, shots, 99);
    let frame_marginals = batch.detector_marginals();

    let dem = build_detector_error_model(&c).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    let mut counts = vec![0u64; dem.detector_count as usize];
    for _ in 0..shots {
        let mut bits = vec![false; dem.detector_count as usize];
        for m in &dem.mechanisms {
            if rng.gen::<f64>() < m.probability {
                for &d in &m.detectors {
                    bits[d as usize] ^= true;
                }
            }
        }
        for (d, &b) in bits.iter().enumerate() {
            counts[d] += u64::from(b);
        }
    }
    for d in 0..dem.detector_count as usize {
        let a = frame_marginals[d];
        let b = counts[d] as f64 / shots as f64;
        let sigma = ((a * (1.0 - a) + b * (1.0 - b)) / shots as f64).sqrt().max(1e-9);
        assert!(
            (a - b).abs() <= 4.0 * sigma,
            "detector {d}: frame {a} vs mechanisms {b} (sigma {sigma})"
        );
    }
}

#[test]
fn detector_marginals_match_analytic_odd_parity() {
    // Phenomenological mechanisms incident to a detector are independent,
    // so its marginal is exactly the odd-parity probability of its edges.
    let c = noisy(3, 6, NoiseModel::Phenomenological, 0.01, 0.01, None);
    let g = graph_for(&c);
    let shots = 200_000usize;
    let batch = sample(&c, shots, 4);
    let marginals = batch.detector_marginals();
    for d in 0..g.detector_count {
        let mut survive = 1.0;
        for &(_, e) in g.neighbors(d) {
            survive *= 1.0 - 2.0 * g.edges[e as usize].probability;
        }
        let analytic = (1.0 - survive) / 2.0;
        let sigma = (analytic * (1.0 - analytic) / shots as f64).sqrt().max(1e-9);
        assert!(
            (marginals[d as usize] - analytic).abs() <= 4.0 * sigma,
            "detector {d}: {} vs {analytic}",
            marginals[d as usize]
        );
    }
}

#[test]
fn single_mechanism_shots_decode_to_their_own_flip() {
    for (model, d, p) in [
        (NoiseModel::Phenomenological, 3, 0.01),
        (NoiseModel::Phenomenological, 5, 0.02),
        (NoiseModel::CircuitDepolarizing, 3, 0.001),
    ] {
        let c = noisy(d, 2 * d, model, p, p, None);
        let dem = build_detector_error_model(&c).unwrap();
        let g = build_graph(&dem).unwrap();
        let decoder = Decoder::new(&g);
        let mut scratch = DecodeScratch::default();
        for m in &dem.mechanisms {
            let (prediction, _, _) = decoder.decode_defects(&m.detectors, &mut scratch);
            assert_eq!(
                prediction, m.flips_observable,
                "{model:?} d={d}: mechanism {:?} mispredicted",
                m.detectors
            );
        }
    }
}

#[test]
fn corrections_explain_the_syndrome() {
    // XOR of edge signatures along every matched path must equal the
    // shot's defect set.
    let c = noisy(5, 10, NoiseModel::Phenomenological, 0.04, 0.04, None);
    let g = graph_for(&c);
    let batch = sample(&c, 100, 21);
    let z_component: Vec<bool> = (0..g.detector_count)
        .map(|d| (g.coords[d as usize].x + g.coords[d as usize].y) % 4 == 0)
        .collect();
    for shot in 0..batch.shots {
        let defects: Vec<u32> = batch
            .defects(shot)
            .into_iter()
            .filter(|&d| z_component[d as usize])
            .collect();
        if defects.is_empty() {
            continue;
        }
        let dd = defect_distances(&g, &defects);
        let result = min_weight_matching(&dd);
        let mut covered: BTreeSet<u32> = BTreeSet::new();
        for &(a, b) in &result.pairs {
            let i = defects.iter().position(|&x| x == a).unwrap();
            let target = match b {
                Some(b) => b,
                None => g.boundary(),
            };
            for e in dd.path(&g, i, target) {
                let edge = &g.edges[e as usize];
                for v in [edge.u, edge.v] {
                    if v != g.boundary() {
                        if !covered.remove(&v) {
                            covered.insert(v);
                        }
                    }
                }
            }
        }
        let expected: BTreeSet<u32> = defects.iter().copied().collect();
        assert_eq!(covered, expected, "shot {shot}");
    }
}

#[test]
fn decoder_matches_spec_level_matching() {
    // The production decoder (pruned instance + certificate) and the plain
    // matching over full defect distances find minima of identical weight.
    // Equal-weight matchings in different correction classes exist, so only
    // the weight is compared, never the pairing or its class.
    let c = noisy(5, 10, NoiseModel::Phenomenological, 0.05, 0.05, None);
    let g = graph_for(&c);
    let batch = sample(&c, 200, 33);
    let decoder = Decoder::new(&g);
    let mut scratch = DecodeScratch::default();
    let z_component: Vec<bool> = (0..g.detector_count)
        .map(|d| (g.coords[d as usize].x + g.coords[d as usize].y) % 4 == 0)
        .collect();
    for shot in 0..batch.shots {
        let all = batch.defects(shot);
        let (fast, fast_weight, _) = decoder.decode_defects(&all, &mut scratch);
        let z_defects: Vec<u32> = all
            .iter()
            .copied()
            .filter(|&d| z_component[d as usize])
            .collect();
        if z_defects.is_empty() {
            assert!(!fast);
            continue;
        }
        let dd = defect_distances(&g, &z_defects);
        let reference = min_weight_matching(&dd);
        assert!(
            (fast_weight - reference.total_weight).abs() < 1e-9,
            "shot {shot}: weights {fast_weight} vs {}",
            reference.total_weight
        );
        let _ = fast;
    }
}

#[test]
fn zero_noise_batch_decodes_to_zero_rate() {
    let c = noisy(3, 6, NoiseModel::Phenomenological, 0.0, 0.0, None);
    let g = graph_for(&noisy(3, 6, NoiseModel::Phenomenological, 0.01, 0.01, None));
    let batch = sample(&c, 100, 0);
    let est = logical_error_rate(&g, &batch);
    assert_eq!(est.failures, 0);
    assert_eq!(est.rate, 0.0);
    assert!(est.ci_low == 0.0 && est.ci_high < 0.05);
}

#[test]
fn failure_rate_orders_with_noise_strength() {
    let lo = noisy(3, 6, NoiseModel::Phenomenological, 0.01, 0.01, None);
    let hi = noisy(3, 6, NoiseModel::Phenomenological, 0.05, 0.05, None);
    let g_lo = graph_for(&lo);
    let g_hi = graph_for(&hi);
    let est_lo = logical_error_rate(&g_lo, &sample(&lo, 20_000, 5));
    let est_hi = logical_error_rate(&g_hi, &sample(&hi, 20_000, 5));
    assert!(
        est_lo.ci_high < est_hi.ci_low,
        "p=0.01 rate {} should sit strictly below p=0.05 rate {}",
        est_lo.rate,
        est_hi.rate
    );
}

#[test]
fn all_zero_shot_predicts_zero() {
    let c = noisy(3, 6, NoiseModel::Phenomenological, 0.02, 0.02, None);
    let g = graph_for(&c);
    let record = ShotRecord {
        detectors: vec![false; g.detector_count as usize],
        observable: false,
    };
    assert!(!decode_shot(&g, &record));
}

#[test]
fn noiseless_execution_flips_nothing() {
    // Construction-level invariant across distances and durations.
    for d in [3u32, 5, 7] {
        for rounds in [1, 2 * d] {
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            let c = noisy(d, rounds, NoiseModel::CircuitDepolarizing, 0.0, 0.0, None);
            let batch = sample(&c, 16, rng.gen());
            assert!(batch.bits.iter().all(|&w| w == 0));
            assert!(batch.observables.iter().all(|&o| !o));
        }
    }
}

#[test]
fn burst_aware_reweighting_does_not_hurt() {
    // Decoding with the burst-aware graph must do at least as well (up to
    // Monte Carlo noise) as decoding with the background-only graph.
    let d = 7;
    let (p, p_b) = (0.02, 0.09);
    let c = noisy(d, 2 * d, NoiseModel::Phenomenological, p, p_b, Some(d));
    let aware = graph_for(&c);
    let unaware = graph_for(&noisy(d, 2 * d, NoiseModel::Phenomenological, p, p, None));
    let batch = sample(&c, 30_000, 17);
    let est_aware = logical_error_rate(&aware, &batch);
    let est_unaware = logical_error_rate(&unaware, &batch);
    let sigma = (est_aware.std_err().powi(2) + est_unaware.std_err().powi(2)).sqrt();
    assert!(
        est_aware.rate <= est_unaware.rate + 2.0 * sigma,
        "aware {} vs unaware {} (sigma {sigma})",
        est_aware.rate,
        est_unaware.rate
    );
}

#[test]
fn single_x_errors_flip_one_or_two_z_detectors_d5() {
    // Exhaustive check at d=5 across all rounds.
    let c = noisy(5, 10, NoiseModel::Phenomenological, 0.01, 0.01, None);
    for round in 0..10u32 {
        let loc = c
            .instructions
            .iter()
            .position(|i| match &i.op {
                Op::Noise(ch) => {
                    ch.kind == burstcode::circuit::ChannelKind::BitFlip && ch.round == round
                }
                _ => false,
            })
            .unwrap();
        for q in 0..25u32 {
            let (dets, _) = propagate_pauli(&c, loc, &vec![(q, Pauli::X)]).unwrap();
            assert!(
                dets.len() == 1 || dets.len() == 2,
                "round {round} qubit {q}: {} detectors",
                dets.len()
            );
            let layers: BTreeSet<u32> = dets
                .iter()
                .map(|&d| c.detectors[d as usize].coord.layer)
                .collect();
            assert_eq!(layers, BTreeSet::from([round]));
        }
    }
}
