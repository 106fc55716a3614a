//! Fault enumeration and propagation: turn a noisy circuit into a detector
//! error model (DEM).
//!
//! Every noise-channel outcome is split into its X part and Z part, which
//! are treated as independent mechanisms carrying the full outcome
//! probability. Each part is propagated through the remaining Clifford
//! circuit to find the set of detectors it flips and whether it flips the
//! logical observable. Mechanisms with identical signatures are merged with
//! the XOR probability rule `p <- p1(1-p2) + p2(1-p1)`.
//!
//! Two propagation routes exist on purpose. [`propagate_pauli`] runs a
//! forward Pauli-frame simulation of a single inserted fault; it is simple
//! and serves as the oracle. [`build_detector_error_model`] sweeps the
//! circuit backwards once, maintaining per-qubit detector-sensitivity sets,
//! which handles all fault locations in one pass.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::circuit::{
    ChannelKind, CircuitSpec, DetectorCoord, Instruction, Op, Pauli, QubitId, SparsePauli,
};
use crate::error::{Error, Result};

/// One elementary fault feeding a mechanism: where it happened, which round
/// rate it scales with, and the Pauli it applied (empty for classical
/// measurement flips).
#[derive(Debug, Clone, PartialEq)]
pub struct Contributor {
    /// Index of the noise instruction in the circuit.
    pub instruction: u32,
    /// Syndrome-extraction round whose rate this fault scales with.
    pub round: u32,
    /// Outcome probability as a multiple of the round rate (1, 1/3, or 1/15).
    pub multiplier: f64,
    /// The Pauli part this contributor applied.
    pub pauli: SparsePauli,
}

/// An independent error mechanism: probability, detector signature, and
/// logical-observable flip bit.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultMechanism {
    pub probability: f64,
    /// Sorted detector indices flipped by this mechanism.
    pub detectors: Vec<u32>,
    pub flips_observable: bool,
    pub provenance: Vec<Contributor>,
}

impl FaultMechanism {
    /// Recompute this mechanism's probability from per-round rates.
    pub fn probability_at(&self, rates: &[f64]) -> f64 {
        self.provenance.iter().fold(0.0, |acc, c| {
            xor_probability(acc, rates[c.round as usize] * c.multiplier)
        })
    }
}

/// Probability that an odd number of two independent events occur.
pub fn xor_probability(a: f64, b: f64) -> f64 {
    a * (1.0 - b) + b * (1.0 - a)
}

/// Detector error model: the merged mechanism list for one noisy circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorErrorModel {
    pub detector_count: u32,
    pub observable_count: u32,
    /// Mechanisms sorted by (detectors, flips_observable); no two share a
    /// signature.
    pub mechanisms: Vec<FaultMechanism>,
    pub detector_coords: Vec<DetectorCoord>,
    /// Per-round rates the probabilities were computed at.
    pub round_rates: Vec<f64>,
}

impl DetectorErrorModel {
    /// Line-oriented text form with stable ordering.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "dem v1 detectors={} observables={}",
            self.detector_count, self.observable_count
        );
        for (i, c) in self.detector_coords.iter().enumerate() {
            let _ = writeln!(s, "detector D{i} ({},{},{})", c.x, c.y, c.layer);
        }
        for m in &self.mechanisms {
            let dets: Vec<String> = m.detectors.iter().map(|d| format!("D{d}")).collect();
            let obs = if m.flips_observable { " L0" } else { "" };
            let _ = writeln!(s, "error({}) {}{}", m.probability, dets.join(" "), obs);
        }
        s
    }
}

/// Detector memberships of each measurement: which detectors (and whether
/// the observable) contain outcome `m`.
fn measurement_membership(circuit: &CircuitSpec) -> (Vec<Vec<u32>>, Vec<bool>) {
    let n = circuit.num_measurements as usize;
    let mut dets = vec![Vec::new(); n];
    let mut obs = vec![false; n];
    for (d, det) in circuit.detectors.iter().enumerate() {
        for &m in &det.measurements {
            dets[m as usize].push(d as u32);
        }
    }
    for &m in &circuit.observable {
        obs[m as usize] = true;
    }
    (dets, obs)
}

/// Insert `pauli` immediately after instruction `location` executes and
/// propagate it through the rest of the circuit.
///
/// Returns the sorted set of flipped detectors and the observable flip,
/// computed by symplectic Pauli-frame propagation (no state vectors).
pub fn propagate_pauli(
    circuit: &CircuitSpec,
    location: usize,
    pauli: &SparsePauli,
) -> Result<(Vec<u32>, bool)> {
    let inst = circuit
        .instructions
        .get(location)
        .ok_or(Error::InstructionOutOfRange(location))?;
    let supported: Vec<QubitId> = match &inst.op {
        Op::Reset(t) | Op::H(t) | Op::Measure(t) => t.clone(),
        Op::Cx(pairs) => pairs.iter().flat_map(|&(c, t)| [c, t]).collect(),
        Op::Noise(ch) => ch.targets.clone(),
    };
    for &(q, _) in pauli {
        if !supported.contains(&q) {
            return Err(Error::UnsupportedLocation {
                index: location,
                qubit: q,
            });
        }
    }

    let nq = circuit.num_qubits as usize;
    let mut fx = vec![false; nq];
    let mut fz = vec![false; nq];
    for &(q, p) in pauli {
        if p.has_x() {
            fx[q as usize] ^= true;
        }
        if p.has_z() {
            fz[q as usize] ^= true;
        }
    }

    let mut meas_flips = vec![false; circuit.num_measurements as usize];
    let mut meas_cursor = 0u32;
    for (idx, inst) in circuit.instructions.iter().enumerate() {
        let live = idx > location;
        match &inst.op {
            Op::Reset(targets) => {
                if live {
                    for &q in targets {
                        fx[q as usize] = false;
                        fz[q as usize] = false;
                    }
                }
            }
            Op::H(targets) => {
                if live {
                    for &q in targets {
                        let (a, b) = (fx[q as usize], fz[q as usize]);
                        fx[q as usize] = b;
                        fz[q as usize] = a;
                    }
                }
            }
            Op::Cx(pairs) => {
                if live {
                    for &(c, t) in pairs {
                        fx[t as usize] ^= fx[c as usize];
                        fz[c as usize] ^= fz[t as usize];
                    }
                }
            }
            Op::Measure(targets) => {
                for &q in targets {
                    if live && fx[q as usize] {
                        meas_flips[meas_cursor as usize] = true;
                    }
                    meas_cursor += 1;
                }
            }
            Op::Noise(_) => {}
        }
    }

    let mut detectors = Vec::new();
    for (d, det) in circuit.detectors.iter().enumerate() {
        let flip = det
            .measurements
            .iter()
            .fold(false, |acc, &m| acc ^ meas_flips[m as usize]);
        if flip {
            detectors.push(d as u32);
        }
    }
    let obs = circuit
        .observable
        .iter()
        .fold(false, |acc, &m| acc ^ meas_flips[m as usize]);
    Ok((detectors, obs))
}

/// Raw (unmerged) mechanism emitted during fault enumeration.
#[derive(Debug, Clone)]
pub struct RawMechanism {
    pub probability: f64,
    pub detectors: Vec<u32>,
    pub flips_observable: bool,
    pub contributor: Contributor,
}

/// Merge raw mechanisms by signature with XOR probability combination.
///
/// Zero-probability contributions are kept in provenance (their round rate
/// may change under reweighting) but empty signatures are dropped. The
/// result is sorted by (detectors, flips_observable).
pub fn merge_mechanisms(raw: Vec<RawMechanism>) -> Vec<FaultMechanism> {
    let mut map: HashMap<(Vec<u32>, bool), FaultMechanism> = HashMap::new();
    for r in raw {
        if r.detectors.is_empty() && !r.flips_observable {
            continue;
        }
        assert!(
            !r.detectors.is_empty(),
            "undetectable observable-flipping fault: {:?}",
            r.contributor
        );
        let key = (r.detectors.clone(), r.flips_observable);
        let entry = map.entry(key).or_insert_with(|| FaultMechanism {
            probability: 0.0,
            detectors: r.detectors,
            flips_observable: r.flips_observable,
            provenance: Vec::new(),
        });
        entry.probability = xor_probability(entry.probability, r.probability);
        entry.provenance.push(r.contributor);
    }
    let mut out: Vec<FaultMechanism> = map.into_values().collect();
    out.sort_by(|a, b| {
        a.detectors
            .cmp(&b.detectors)
            .then(a.flips_observable.cmp(&b.flips_observable))
    });
    out
}

/// Sensitivity rows: for each qubit, the set of detectors an X (or Z)
/// inserted at the current sweep position would flip.
struct Sensitivity {
    words: usize,
    x: Vec<Vec<u64>>,
    z: Vec<Vec<u64>>,
    obs_x: Vec<bool>,
    obs_z: Vec<bool>,
}

impl Sensitivity {
    fn new(num_qubits: usize, num_detectors: usize) -> Self {
        let words = num_detectors.div_ceil(64);
        Sensitivity {
            words,
            x: vec![vec![0; words]; num_qubits],
            z: vec![vec![0; words]; num_qubits],
            obs_x: vec![false; num_qubits],
            obs_z: vec![false; num_qubits],
        }
    }

    fn clear(&mut self, q: usize) {
        self.x[q].iter_mut().for_each(|w| *w = 0);
        self.z[q].iter_mut().for_each(|w| *w = 0);
        self.obs_x[q] = false;
        self.obs_z[q] = false;
    }

    fn swap_xz(&mut self, q: usize) {
        std::mem::swap(&mut self.x[q], &mut self.z[q]);
        let (a, b) = (self.obs_x[q], self.obs_z[q]);
        self.obs_x[q] = b;
        self.obs_z[q] = a;
    }
}

fn xor_rows(rows: &mut [Vec<u64>], dst: usize, src: usize) {
    if dst == src {
        return;
    }
    let (a, b) = if dst < src {
        let (lo, hi) = rows.split_at_mut(src);
        (&mut lo[dst], &hi[0])
    } else {
        let (lo, hi) = rows.split_at_mut(dst);
        (&mut hi[0], &lo[src])
    };
    for (dw, sw) in a.iter_mut().zip(b.iter()) {
        *dw ^= *sw;
    }
}

fn collect_bits(scratch: &[u64]) -> Vec<u32> {
    let mut out = Vec::new();
    for (w, &word) in scratch.iter().enumerate() {
        let mut bits = word;
        while bits != 0 {
            let b = bits.trailing_zeros();
            out.push((w as u32) * 64 + b);
            bits &= bits - 1;
        }
    }
    out
}

/// Build the detector error model of a noisy circuit.
///
/// Fails with [`Error::NonGraphlikeMechanism`] if any mechanism's signature
/// cannot be reduced to one or two detectors; see [`decompose`] for the
/// reduction applied to hook-style faults that fire three or four
/// detectors.
pub fn build_detector_error_model(circuit: &CircuitSpec) -> Result<DetectorErrorModel> {
    let nq = circuit.num_qubits as usize;
    let nd = circuit.detectors.len();
    let (meas_dets, meas_obs) = measurement_membership(circuit);

    // Forward prepass: measurement base index of each Measure instruction,
    // and the measurement index map for each MeasureFlip channel.
    let mut meas_base = vec![0u32; circuit.instructions.len()];
    let mut cursor = 0u32;
    for (i, inst) in circuit.instructions.iter().enumerate() {
        meas_base[i] = cursor;
        if let Op::Measure(targets) = &inst.op {
            cursor += targets.len() as u32;
        }
    }

    let mut sens = Sensitivity::new(nq, nd);
    let mut scratch = vec![0u64; sens.words];
    let mut raw: Vec<RawMechanism> = Vec::new();

    for (idx, inst) in circuit.instructions.iter().enumerate().rev() {
        match &inst.op {
            Op::Measure(targets) => {
                for (pos, &q) in targets.iter().enumerate() {
                    let m = meas_base[idx] + pos as u32;
                    for &d in &meas_dets[m as usize] {
                        sens.x[q as usize][(d / 64) as usize] ^= 1u64 << (d % 64);
                    }
                    sens.obs_x[q as usize] ^= meas_obs[m as usize];
                }
            }
            Op::Reset(targets) => {
                for &q in targets {
                    sens.clear(q as usize);
                }
            }
            Op::H(targets) => {
                for &q in targets {
                    sens.swap_xz(q as usize);
                }
            }
            Op::Cx(pairs) => {
                for &(c, t) in pairs {
                    xor_rows(&mut sens.x, c as usize, t as usize);
                    sens.obs_x[c as usize] ^= sens.obs_x[t as usize];
                    xor_rows(&mut sens.z, t as usize, c as usize);
                    sens.obs_z[t as usize] ^= sens.obs_z[c as usize];
                }
            }
            Op::Noise(ch) => match ch.kind {
                ChannelKind::MeasureFlip => {
                    // The paired Measure instruction follows this channel.
                    let (m_idx, m_targets) = circuit.instructions[idx + 1..]
                        .iter()
                        .enumerate()
                        .find_map(|(j, i2)| match &i2.op {
                            Op::Measure(t) => Some((idx + 1 + j, t)),
                            _ => None,
                        })
                        .expect("measure_flip channel without a following measurement");
                    let pos_of: HashMap<QubitId, usize> = m_targets
                        .iter()
                        .enumerate()
                        .map(|(p, &q)| (q, p))
                        .collect();
                    for &q in &ch.targets {
                        let m = meas_base[m_idx] + pos_of[&q] as u32;
                        let dets = meas_dets[m as usize].clone();
                        raw.push(RawMechanism {
                            probability: ch.rate,
                            detectors: dets,
                            flips_observable: meas_obs[m as usize],
                            contributor: Contributor {
                                instruction: idx as u32,
                                round: ch.round,
                                multiplier: 1.0,
                                pauli: Vec::new(),
                            },
                        });
                    }
                }
                _ => {
                    let multiplier = match ch.kind {
                        ChannelKind::BitFlip => 1.0,
                        ChannelKind::Depolarize1 => 1.0 / 3.0,
                        ChannelKind::Depolarize2 => 1.0 / 15.0,
                        ChannelKind::MeasureFlip => unreachable!(),
                    };
                    let outcomes = ch.site_outcomes();
                    for site in ch.sites() {
                        for (legs, prob) in &outcomes {
                            // Split the outcome into its X part and Z part;
                            // each becomes an independent mechanism carrying
                            // the full outcome probability.
                            for part_is_x in [true, false] {
                                scratch.iter_mut().for_each(|w| *w = 0);
                                let mut obs = false;
                                let mut pauli: SparsePauli = Vec::new();
                                for &(leg, p) in legs {
                                    let q = site[leg] as usize;
                                    let hit = if part_is_x { p.has_x() } else { p.has_z() };
                                    if hit {
                                        let row =
                                            if part_is_x { &sens.x[q] } else { &sens.z[q] };
                                        for (sw, rw) in scratch.iter_mut().zip(row) {
                                            *sw ^= rw;
                                        }
                                        obs ^= if part_is_x {
                                            sens.obs_x[q]
                                        } else {
                                            sens.obs_z[q]
                                        };
                                        pauli.push((
                                            site[leg],
                                            if part_is_x { Pauli::X } else { Pauli::Z },
                                        ));
                                    }
                                }
                                if pauli.is_empty() {
                                    continue;
                                }
                                let detectors = collect_bits(&scratch);
                                if detectors.is_empty() && !obs {
                                    continue;
                                }
                                raw.push(RawMechanism {
                                    probability: *prob,
                                    detectors,
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
            },
        }
    }

    let merged = merge_mechanisms(raw);
    let mechanisms = decompose(merged)?;

    Ok(DetectorErrorModel {
        detector_count: nd as u32,
        observable_count: 1,
        mechanisms,
        detector_coords: circuit.detectors.iter().map(|d| d.coord).collect(),
        round_rates: circuit.round_rates.clone(),
    })
}

/// Reduce mechanisms firing three or more detectors to products of
/// existing one- or two-detector mechanisms.
///
/// Mid-round ancilla faults spread onto several data qubits and can fire up
/// to six detectors; such a signature equals a disjoint union of signatures
/// the model already contains as plain edges, with consistent observable
/// parity. The partition is found by backtracking over pieces drawn from
/// the elementary pool (pairs preferred, then singletons). Anything that
/// cannot be written this way makes the decoding graph ill-defined and is
/// reported as an error.
pub fn decompose(merged: Vec<FaultMechanism>) -> Result<Vec<FaultMechanism>> {
    let mut pool: HashMap<(Vec<u32>, bool), usize> = HashMap::new();
    let mut elementary: Vec<FaultMechanism> = Vec::new();
    let mut composite: Vec<FaultMechanism> = Vec::new();
    for m in merged {
        if m.detectors.len() <= 2 {
            pool.insert((m.detectors.clone(), m.flips_observable), elementary.len());
            elementary.push(m);
        } else {
            composite.push(m);
        }
    }

    fn partition(
        remaining: &[u32],
        obs_needed: bool,
        pool: &HashMap<(Vec<u32>, bool), usize>,
        acc: &mut Vec<usize>,
    ) -> bool {
        let Some(&first) = remaining.first() else {
            return !obs_needed;
        };
        // Pair `first` with each later detector, then try it alone.
        for j in 1..remaining.len() {
            let piece = vec![first, remaining[j]];
            let rest: Vec<u32> = remaining[1..]
                .iter()
                .copied()
                .filter(|&d| d != remaining[j])
                .collect();
            for obs in [false, true] {
                if let Some(&idx) = pool.get(&(piece.clone(), obs)) {
                    acc.push(idx);
                    if partition(&rest, obs_needed ^ obs, pool, acc) {
                        return true;
                    }
                    acc.pop();
                }
            }
        }
        let piece = vec![first];
        for obs in [false, true] {
            if let Some(&idx) = pool.get(&(piece.clone(), obs)) {
                acc.push(idx);
                if partition(&remaining[1..], obs_needed ^ obs, pool, acc) {
                    return true;
                }
                acc.pop();
            }
        }
        false
    }

    for comp in composite {
        if comp.detectors.len() > 8 {
            return Err(Error::NonGraphlikeMechanism {
                count: comp.detectors.len(),
            });
        }
        let mut acc = Vec::new();
        if !partition(&comp.detectors, comp.flips_observable, &pool, &mut acc) {
            return Err(Error::NonGraphlikeMechanism {
                count: comp.detectors.len(),
            });
        }
        for idx in acc {
            let mech = &mut elementary[idx];
            mech.probability = xor_probability(mech.probability, comp.probability);
            mech.provenance.extend(comp.provenance.iter().cloned());
        }
    }

    elementary.sort_by(|a, b| {
        a.detectors
            .cmp(&b.detectors)
            .then(a.flips_observable.cmp(&b.flips_observable))
    });
    Ok(elementary)
}

/// Drop helper: list instruction indices of all noise channels, for tests
/// that exhaustively enumerate fault locations.
pub fn channel_locations(circuit: &CircuitSpec) -> Vec<usize> {
    circuit
        .instructions
        .iter()
        .enumerate()
        .filter_map(|(i, inst)| match inst.op {
            Op::Noise(_) => Some(i),
            _ => None,
        })
        .collect()
}

/// Access an instruction (bounds-checked), for oracle-side enumeration.
pub fn instruction_at<'a>(circuit: &'a CircuitSpec, idx: usize) -> Option<&'a Instruction> {
    circuit.instructions.get(idx)
}
