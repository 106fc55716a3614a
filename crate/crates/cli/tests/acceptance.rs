//! Acceptance suite: one test per shipping criterion, each printing a
//! pass line with the measured values. Monte Carlo budgets follow the
//! stated minimums, so the full suite takes tens of minutes on a laptop.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use burstcode::analysis::{
    extract_cycle_rates_from_survival, failure_per_cycle_qubit, fit_threshold,
    memory_survival_a, memory_survival_b, teraquop_footprint, LogLinearFit, SweepPoint,
    SweptVariable,
};
use burstcode::burst::{ml_estimate_weight, BurstTestModel, Decision};
use burstcode::circuit::DetectorCoord;
use burstcode::fault::{Contributor, DetectorErrorModel, FaultMechanism};
use burstcode::graph::build_graph;
use burstcode::matching::{defect_distances, min_weight_matching, LogicalErrorEstimate};
use burstcode::noise::NoiseModel;
use burstcode::sampler::{detector_density, sample};
use burstcode_cli::{run_point, run_sweep, BurstRule, ExperimentConfig, PointSpec, RoundsRule};

fn measure(model: NoiseModel, d: u32, p: f64, p_b: f64, burst: bool, shots: u64, seed: u64) -> LogicalErrorEstimate {
    let rounds = 2 * d;
    let point = PointSpec {
        model,
        d,
        p,
        p_b,
        rounds,
        burst_round: burst.then_some(rounds / 2),
        shots,
        seed,
    };
    let record = run_point(&point).unwrap();
    LogicalErrorEstimate::from_counts(record.failures, shots)
}

fn sweep_points(
    model: NoiseModel,
    distances: &[u32],
    p_values: &[f64],
    p_b_values: &[f64],
    burst: bool,
    shots: u64,
    seed: u64,
) -> Vec<SweepPoint> {
    let mut out = Vec::new();
    for &d in distances {
        for &p in p_values {
            for &p_b in p_b_values {
                let est = measure(model, d, p, p_b, burst, shots, seed);
                out.push(SweepPoint {
                    d,
                    p,
                    p_b,
                    rounds: 2 * d,
                    shots,
                    failures: est.failures,
                });
            }
        }
    }
    out
}

#[test]
fn acceptance_01_sustainable_threshold_phenomenological() {
    let distances = [5, 7, 9, 11];
    let p_values = [0.024, 0.0265, 0.029, 0.0315, 0.034];
    let points = sweep_points(
        NoiseModel::Phenomenological,
        &distances,
        &p_values,
        &[0.0],
        false,
        100_000,
        101,
    );
    let fit = fit_threshold(&points, SweptVariable::BackgroundRate).unwrap();
    println!(
        "[acceptance 01] sustainable threshold p* = {:.5} (nu0 = {:.3}, chi2/dof = {:.2}) in [0.026, 0.032] — {}",
        fit.p_star,
        fit.nu0,
        fit.chi2_per_dof,
        if (0.026..=0.032).contains(&fit.p_star) { "PASS" } else { "FAIL" },
    );
    assert!(
        (0.026..=0.032).contains(&fit.p_star),
        "fitted crossing {} outside [0.026, 0.032]",
        fit.p_star
    );
}

#[test]
fn acceptance_02_burst_threshold_at_two_percent_background() {
    let distances = [5, 7, 9, 11];
    let p_b_values = [0.07, 0.08, 0.09, 0.10, 0.11];
    let points = sweep_points(
        NoiseModel::Phenomenological,
        &distances,
        &[0.02],
        &p_b_values,
        true,
        100_000,
        102,
    );
    let fit = fit_threshold(&points, SweptVariable::BurstRate).unwrap();
    println!(
        "[acceptance 02] burst threshold p_B* = {:.5} (nu0 = {:.3}, chi2/dof = {:.2}) in [0.08, 0.10] — {}",
        fit.p_star,
        fit.nu0,
        fit.chi2_per_dof,
        if (0.08..=0.10).contains(&fit.p_star) { "PASS" } else { "FAIL" },
    );
    assert!(
        (0.08..=0.10).contains(&fit.p_star),
        "fitted burst crossing {} outside [0.08, 0.10]",
        fit.p_star
    );
}

#[test]
fn acceptance_03_phase_ordering_below_and_above_threshold() {
    let shots = 100_000;
    // Below threshold at (p, p_B) = (2%, 7%): larger distance must win.
    let low5 = measure(NoiseModel::Phenomenological, 5, 0.02, 0.07, true, shots, 103);
    let low9 = measure(NoiseModel::Phenomenological, 9, 0.02, 0.07, true, shots, 103);
    let sigma_low = (low5.std_err().powi(2) + low9.std_err().powi(2)).sqrt();
    let drop_sigmas = (low5.rate - low9.rate) / sigma_low;
    // Above threshold at (4%, 4%): larger distance must lose.
    let high5 = measure(NoiseModel::Phenomenological, 5, 0.04, 0.04, true, shots, 113);
    let high9 = measure(NoiseModel::Phenomenological, 9, 0.04, 0.04, true, shots, 113);
    let sigma_high = (high5.std_err().powi(2) + high9.std_err().powi(2)).sqrt();
    let rise_sigmas = (high9.rate - high5.rate) / sigma_high;
    println!(
        "[acceptance 03] (2%,7%): {:.4} -> {:.4} ({drop_sigmas:.1} sigma drop); (4%,4%): {:.4} -> {:.4} ({rise_sigmas:.1} sigma rise) — {}",
        low5.rate,
        low9.rate,
        high5.rate,
        high9.rate,
        if drop_sigmas >= 3.0 && rise_sigmas >= 3.0 { "PASS" } else { "FAIL" },
    );
    assert!(drop_sigmas >= 3.0, "below-threshold ordering only {drop_sigmas:.1} sigma");
    assert!(rise_sigmas >= 3.0, "above-threshold ordering only {rise_sigmas:.1} sigma");
}

#[test]
fn acceptance_04_circuit_level_distance_ordering() {
    let shots = 200_000;
    let r3 = measure(NoiseModel::CircuitDepolarizing, 3, 0.001, 0.015, true, shots, 104);
    let r5 = measure(NoiseModel::CircuitDepolarizing, 5, 0.001, 0.015, true, shots, 104);
    let r7 = measure(NoiseModel::CircuitDepolarizing, 7, 0.001, 0.015, true, shots, 104);
    let sigma = (r3.std_err().powi(2) + r7.std_err().powi(2)).sqrt();
    let drop_sigmas = (r3.rate - r7.rate) / sigma;
    println!(
        "[acceptance 04] circuit (0.1%, 1.5%): d=3 {:.5}, d=5 {:.5}, d=7 {:.5} ({drop_sigmas:.1} sigma drop 3->7) — {}",
        r3.rate,
        r5.rate,
        r7.rate,
        if drop_sigmas >= 3.0 { "PASS" } else { "FAIL" },
    );
    assert!(drop_sigmas >= 3.0, "d=3 -> d=7 decrease only {drop_sigmas:.1} sigma");
}

#[test]
fn acceptance_05_burst_density_diagnostic() {
    let shots = 100_000usize;
    let mut ratios = Vec::new();
    for model in [NoiseModel::Phenomenological, NoiseModel::CircuitDepolarizing] {
        let point = PointSpec {
            model,
            d: 3,
            p: 0.001,
            p_b: 0.01,
            rounds: 20,
            burst_round: Some(11),
            shots: shots as u64,
            seed: 105,
        };
        let circuit = point.build_circuit().unwrap();
        let coords: Vec<DetectorCoord> = circuit.detectors.iter().map(|d| d.coord).collect();
        let batch = sample(&circuit, shots, point.point_seed());
        let density = detector_density(&batch, &coords);
        // Background: bulk slices well before the burst.
        let background = density[1..=9].iter().sum::<f64>() / 9.0;
        let slice11 = density[11];
        let slice12 = density[12];
        let dets12 = coords.iter().filter(|c| c.layer == 12).count() as f64;
        // Per-shot spread of the slice-12 mean.
        let sigma12 = (slice12 * (1.0 - slice12) / dets12).sqrt();
        match model {
            NoiseModel::Phenomenological => {
                let ok = slice11 > 5.0 * background
                    && (slice12 - background).abs() < 3.0 * sigma12;
                println!(
                    "[acceptance 05] phenomenological density: bg {background:.4}, slice11 {slice11:.4} ({:.1}x), slice12 {slice12:.4} — {}",
                    slice11 / background,
                    if ok { "PASS" } else { "FAIL" },
                );
                assert!(slice11 > 5.0 * background);
                assert!(
                    (slice12 - background).abs() < 3.0 * sigma12,
                    "slice 12 at {slice12} vs background {background} (sigma {sigma12})"
                );
            }
            NoiseModel::CircuitDepolarizing => {
                let ok = slice11 > 2.0 * background && slice12 > 2.0 * background;
                println!(
                    "[acceptance 05] circuit-level density: bg {background:.4}, slice11 {slice11:.4} ({:.1}x), slice12 {slice12:.4} ({:.1}x) — {}",
                    slice11 / background,
                    slice12 / background,
                    if ok { "PASS" } else { "FAIL" },
                );
                assert!(slice11 > 2.0 * background);
                assert!(slice12 > 2.0 * background);
            }
        }
        ratios.push(slice12 / background);
    }
    // The burst visibly spills into the following slice only at circuit
    // level: its relative slice-12 elevation must exceed the
    // phenomenological one.
    assert!(
        ratios[1] > ratios[0],
        "circuit slice-12 ratio {} should exceed phenomenological {}",
        ratios[1],
        ratios[0]
    );
}

#[test]
fn acceptance_06_burst_detector_bounds_and_monte_carlo() {
    let (p, p_b, n, w) = (0.01, 0.1, 100usize, 10usize);
    let model = BurstTestModel::new(p, p_b, n, w).unwrap();
    let trials = 1_000_000u64;
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let bin1 = Binomial::new(n as u64, model.p1).unwrap();
    let bin2 = Binomial::new(n as u64, model.p2).unwrap();
    let mut false_pos = 0u64;
    let mut false_neg = 0u64;
    for _ in 0..trials {
        let x1 = bin1.sample(&mut rng) as usize;
        if ml_estimate_weight(x1, n, model.p1, model.p2) == Decision::Burst {
            false_pos += 1;
        }
        let x2 = bin2.sample(&mut rng) as usize;
        if ml_estimate_weight(x2, n, model.p1, model.p2) == Decision::Background {
            false_neg += 1;
        }
    }
    let fp_rate = false_pos as f64 / trials as f64;
    let fn_rate = false_neg as f64 / trials as f64;
    let ok = model.bound_false_pos <= 1e-4
        && model.bound_false_neg <= 1e-4
        && fp_rate <= model.bound_false_pos
        && fn_rate <= model.bound_false_neg;
    println!(
        "[acceptance 06] bounds fp {:.3e} fn {:.3e} (<= 1e-4); observed fp {fp_rate:.2e} fn {fn_rate:.2e} over 1e6 draws — {}",
        model.bound_false_pos,
        model.bound_false_neg,
        if ok { "PASS" } else { "FAIL" },
    );
    assert!(model.bound_false_pos <= 1e-4 && model.bound_false_neg <= 1e-4);
    assert!(fp_rate <= model.bound_false_pos, "fp {fp_rate} exceeds bound");
    assert!(fn_rate <= model.bound_false_neg, "fn {fn_rate} exceeds bound");
}

/// Exhaustive minimum over all pairings of defects with each other or the
/// boundary, in the exact integer weight unit.
fn exhaustive_min(dd: &burstcode::matching::DefectDistances, unmatched: &mut Vec<usize>) -> i64 {
    let Some(i) = unmatched.pop() else { return 0 };
    // Option 1: boundary.
    let mut best = dd.to_boundary_quantized(i) + exhaustive_min(dd, unmatched);
    // Option 2: pair with any remaining defect.
    for k in 0..unmatched.len() {
        let j = unmatched.remove(k);
        let cost = dd.between_quantized(i, j) + exhaustive_min(dd, unmatched);
        unmatched.insert(k, j);
        best = best.min(cost);
    }
    unmatched.push(i);
    best
}

#[test]
fn acceptance_07_matching_equals_exhaustive_pairing() {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let instances = 1_000;
    for instance in 0..instances {
        let n = rng.gen_range(6u32..=14);
        let mk = |dets: Vec<u32>, p: f64, obs: bool| FaultMechanism {
            probability: p,
            detectors: dets,
            flips_observable: obs,
            provenance: vec![Contributor {
                instruction: 0,
                round: 0,
                multiplier: 1.0,
                pauli: Vec::new(),
            }],
        };
        let mut mechs = Vec::new();
        // Ring for connectivity, random chords, random boundary edges.
        for i in 0..n {
            mechs.push(mk(
                vec![i.min((i + 1) % n), i.max((i + 1) % n)],
                rng.gen_range(0.02..0.45),
                rng.gen(),
            ));
            if rng.gen_bool(0.7) || i == 0 {
                mechs.push(mk(vec![i], rng.gen_range(0.02..0.45), rng.gen()));
            }
        }
        for _ in 0..n {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            if a != b && !mechs.iter().any(|m| m.detectors == vec![a.min(b), a.max(b)]) {
                mechs.push(mk(vec![a.min(b), a.max(b)], rng.gen_range(0.02..0.45), rng.gen()));
            }
        }
        mechs.sort_by(|a, b| a.detectors.cmp(&b.detectors));
        mechs.dedup_by(|a, b| a.detectors == b.detectors && a.flips_observable == b.flips_observable);
        let dem = DetectorErrorModel {
            detector_count: n,
            observable_count: 1,
            mechanisms: mechs,
            detector_coords: (0..n)
                .map(|i| DetectorCoord { x: i, y: 0, layer: 0 })
                .collect(),
            round_rates: vec![0.1],
        };
        let graph = build_graph(&dem).unwrap();
        let k = rng.gen_range(1..=10.min(n as usize));
        let mut defects: Vec<u32> = (0..n).collect();
        for i in (1..defects.len()).rev() {
            defects.swap(i, rng.gen_range(0..=i));
        }
        defects.truncate(k);
        defects.sort_unstable();
        let dd = defect_distances(&graph, &defects);
        let result = min_weight_matching(&dd);
        let matched: i64 = result
            .pairs
            .iter()
            .map(|&(a, b)| {
                let i = defects.iter().position(|&x| x == a).unwrap();
                match b {
                    Some(b) => {
                        let j = defects.iter().position(|&x| x == b).unwrap();
                        dd.between_quantized(i, j)
                    }
                    None => dd.to_boundary_quantized(i),
                }
            })
            .sum();
        let mut pool: Vec<usize> = (0..k).collect();
        let brute = exhaustive_min(&dd, &mut pool);
        assert_eq!(
            matched, brute,
            "instance {instance}: matching {matched} vs exhaustive {brute}"
        );
    }
    println!("[acceptance 07] {instances} random instances: matching weight equals exhaustive pairing minimum exactly — PASS");
}

#[test]
fn acceptance_08_cycle_rate_and_parity_identities() {
    // Round-trip of the per-cycle failure relations, composed in the
    // survival form that stays representable across the whole grid.
    let q_grid = [1e-6f64, 1e-5, 1e-4, 1e-3, 0.01, 0.05, 0.1, 0.2, 0.3, 0.4];
    let mut max_err: f64 = 0.0;
    for &q in &q_grid {
        for cycles in 1..=100u32 {
            let q_b = (q * 1.9).min(0.45);
            let s_a = memory_survival_a(q, cycles);
            let s_b = memory_survival_b(q_b, q, cycles);
            let rates = extract_cycle_rates_from_survival(s_a, s_b, cycles).unwrap();
            max_err = max_err.max((rates.q_d - q).abs());
            max_err = max_err.max((rates.q_d_b - q_b).abs());
        }
    }
    assert!(max_err < 1e-12, "round-trip error {max_err}");

    // Closed-form odd-parity probability against the explicit binomial sum.
    fn choose(n: u64, k: u64) -> f64 {
        let mut acc = 1.0;
        for i in 0..k {
            acc *= (n - i) as f64 / (i + 1) as f64;
        }
        acc
    }
    let mut parity_err: f64 = 0.0;
    let mut p = 0.001f64;
    while p <= 0.4 + 1e-12 {
        for w in 1..=20usize {
            let mut sum = 0.0;
            let mut i = 1usize;
            while i <= w {
                sum += choose(w as u64, i as u64) * p.powi(i as i32) * (1.0 - p).powi((w - i) as i32);
                i += 2;
            }
            parity_err = parity_err.max((sum - burstcode::burst::odd_parity_prob(p, w)).abs());
        }
        p += 0.021;
    }
    assert!(parity_err < 1e-12, "odd-parity closed form error {parity_err}");
    println!(
        "[acceptance 08] cycle-rate round trip max error {max_err:.2e}; odd-parity closed form max error {parity_err:.2e} — PASS"
    );
}

#[test]
fn acceptance_09_teraquop_pipeline() {
    // Fitted parameters for the 0.40% background row with a 2.5% burst.
    let background = LogLinearFit {
        c: -1.311,
        m: -0.1069,
        c_err: 0.002,
        m_err: 0.0003,
    };
    let burst = LogLinearFit {
        c: -0.833,
        m: -0.0188,
        c_err: 0.008,
        m_err: 0.0007,
    };
    let tau = 1e7;
    let result = teraquop_footprint(&background, &burst, tau).unwrap();

    // Independent scan oracle, written out directly.
    let mut d_oracle = 3u32;
    loop {
        let q_d = 10f64.powf(-1.311 - 0.1069 * f64::from(d_oracle));
        let q_db = 10f64.powf(-0.833 - 0.0188 * f64::from(d_oracle));
        let p_l = q_db / tau + (1.0 - 1.0 / tau) * q_d;
        if p_l <= 1e-12 {
            break;
        }
        d_oracle += 2;
    }
    let mut last_d = u32::MAX;
    let mut monotone = true;
    for t in [1.0, 1e3, 1e7, f64::INFINITY] {
        let r = teraquop_footprint(&background, &burst, t).unwrap();
        monotone &= r.d_min <= last_d;
        last_d = r.d_min;
    }
    let p_l_at = failure_per_cycle_qubit(
        tau,
        background.rate_at(result.d_min),
        burst.rate_at(result.d_min),
    )
    .unwrap();
    println!(
        "[acceptance 09] teraquop at tau=1e7: d_min = {} (oracle {}), footprint = {} qubits, P_L = {p_l_at:.2e}; d_min non-increasing in tau — {}",
        result.d_min,
        d_oracle,
        result.footprint,
        if result.d_min == d_oracle && monotone { "PASS" } else { "FAIL" },
    );
    assert_eq!(result.d_min, d_oracle);
    assert_eq!(result.footprint, 2 * u64::from(d_oracle) * u64::from(d_oracle));
    assert!(monotone);
}

#[test]
fn acceptance_10_sweep_determinism_across_workers() {
    let dir1 = tempfile::tempdir().unwrap();
    let dir2 = tempfile::tempdir().unwrap();
    let cfg = |out: std::path::PathBuf, workers: usize| ExperimentConfig {
        model: NoiseModel::Phenomenological,
        distances: vec![3, 5],
        p: vec![0.02],
        p_b: vec![0.05, 0.09],
        rounds: RoundsRule::TwoD,
        burst: BurstRule::MIDDLE,
        shots: 5_000,
        seed: 110,
        workers,
        out_dir: out,
    };
    let s1 = run_sweep(&cfg(dir1.path().to_path_buf(), 1)).unwrap();
    let s2 = run_sweep(&cfg(dir2.path().to_path_buf(), 2)).unwrap();
    let r1 = std::fs::read(&s1.results_path).unwrap();
    let r2 = std::fs::read(&s2.results_path).unwrap();
    let ok = r1 == r2;
    println!(
        "[acceptance 10] sweep outputs with 1 vs 2 workers: {} bytes, bit-identical — {}",
        r1.len(),
        if ok { "PASS" } else { "FAIL" },
    );
    assert_eq!(r1, r2, "results differ between 1 and 2 workers");
}
