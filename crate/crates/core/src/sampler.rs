//! Monte Carlo shot sampling via Pauli-frame simulation, plus the
//! per-time-slice detector density diagnostic.
//!
//! Each shot maintains an X/Z frame per qubit, samples every noise channel,
//! conjugates the frame through the Clifford gates, records measurement-bit
//! flips, and derives detector and observable bits. Shots use counter-based
//! RNG streams keyed by (seed, shot index), so batches are bit-identical
//! regardless of worker count or scheduling.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::circuit::{ChannelKind, CircuitSpec, DetectorCoord, Op};
use crate::error::{Error, Result};

/// One Monte Carlo sample: detector bits plus the true observable flip.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotRecord {
    pub detectors: Vec<bool>,
    pub observable: bool,
}

/// A batch of shots with bit-packed detector data (64 detectors per word,
/// shot-major).
#[derive(Debug, Clone, PartialEq)]
pub struct ShotBatch {
    pub detector_count: u32,
    pub shots: usize,
    pub words_per_shot: usize,
    pub bits: Vec<u64>,
    pub observables: Vec<bool>,
    pub seed: u64,
    /// Human-readable snapshot of the sampled configuration.
    pub config: String,
}

impl ShotBatch {
    /// Detector bit for one shot.
    pub fn detector(&self, shot: usize, det: u32) -> bool {
        let w = self.words_per_shot * shot + (det / 64) as usize;
        (self.bits[w] >> (det % 64)) & 1 == 1
    }

    /// Indices of fired detectors in one shot.
    pub fn defects(&self, shot: usize) -> Vec<u32> {
        let row = &self.bits[self.words_per_shot * shot..self.words_per_shot * (shot + 1)];
        let mut out = Vec::new();
        for (w, &word) in row.iter().enumerate() {
            let mut bits = word;
            while bits != 0 {
                out.push((w as u32) * 64 + bits.trailing_zeros());
                bits &= bits - 1;
            }
        }
        out
    }

    /// True observable flip for one shot.
    pub fn observable(&self, shot: usize) -> bool {
        self.observables[shot]
    }

    /// Expand one shot into a [`ShotRecord`].
    pub fn record(&self, shot: usize) -> ShotRecord {
        let mut detectors = vec![false; self.detector_count as usize];
        for d in self.defects(shot) {
            detectors[d as usize] = true;
        }
        ShotRecord {
            detectors,
            observable: self.observables[shot],
        }
    }

    /// Mean value of each detector across shots.
    pub fn detector_marginals(&self) -> Vec<f64> {
        let counts = self.detector_counts();
        counts
            .into_iter()
            .map(|c| c as f64 / self.shots as f64)
            .collect()
    }

    /// Number of shots in which each detector fired.
    pub fn detector_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.detector_count as usize];
        for shot in 0..self.shots {
            for d in self.defects(shot) {
                counts[d as usize] += 1;
            }
        }
        counts
    }

    /// Stable 64-bit hash of the configuration snapshot.
    pub fn config_hash(&self) -> u64 {
        fnv1a(self.config.as_bytes())
    }

    /// Binary export: one text header line, then the raw little-endian
    /// detector words followed by packed observable bits.
    pub fn to_binary(&self) -> Vec<u8> {
        let header = format!(
            "batch v1 shots={} detectors={} words={} seed={} config={:016x}\n",
            self.shots,
            self.detector_count,
            self.words_per_shot,
            self.seed,
            self.config_hash(),
        );
        let mut out = header.into_bytes();
        for w in &self.bits {
            out.extend_from_slice(&w.to_le_bytes());
        }
        let obs_words = self.shots.div_ceil(64);
        let mut packed = vec![0u64; obs_words];
        for (i, &o) in self.observables.iter().enumerate() {
            if o {
                packed[i / 64] |= 1 << (i % 64);
            }
        }
        for w in &packed {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out
    }

    /// Parse a binary export. The configuration snapshot is not recoverable
    /// from the hash and is left as the hash string.
    pub fn from_binary(data: &[u8]) -> Result<ShotBatch> {
        let nl = data
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Parse("missing batch header".into()))?;
        let header = std::str::from_utf8(&data[..nl])
            .map_err(|e| Error::Parse(e.to_string()))?;
        let mut shots = 0usize;
        let mut detectors = 0u32;
        let mut words = 0usize;
        let mut seed = 0u64;
        let mut config = String::new();
        for tok in header.split_whitespace() {
            if let Some(v) = tok.strip_prefix("shots=") {
                shots = v.parse().map_err(|e: std::num::ParseIntError| {
                    Error::Parse(e.to_string())
                })?;
            } else if let Some(v) = tok.strip_prefix("detectors=") {
                detectors = v.parse().map_err(|e: std::num::ParseIntError| {
                    Error::Parse(e.to_string())
                })?;
            } else if let Some(v) = tok.strip_prefix("words=") {
                words = v.parse().map_err(|e: std::num::ParseIntError| {
                    Error::Parse(e.to_string())
                })?;
            } else if let Some(v) = tok.strip_prefix("seed=") {
                seed = v.parse().map_err(|e: std::num::ParseIntError| {
                    Error::Parse(e.to_string())
                })?;
            } else if let Some(v) = tok.strip_prefix("config=") {
                config = v.to_string();
            }
        }
        let body = &data[nl + 1..];
        let need = (shots * words + shots.div_ceil(64)) * 8;
        if body.len() != need {
            return Err(Error::Parse(format!(
                "batch body has {} bytes, expected {need}",
                body.len()
            )));
        }
        let mut bits = Vec::with_capacity(shots * words);
        for chunk in body[..shots * words * 8].chunks_exact(8) {
            bits.push(u64::from_le_bytes(chunk.try_into().unwrap()));
        }
        let mut observables = Vec::with_capacity(shots);
        let obs_body = &body[shots * words * 8..];
        for i in 0..shots {
            let w = u64::from_le_bytes(
                obs_body[(i / 64) * 8..(i / 64) * 8 + 8].try_into().unwrap(),
            );
            observables.push((w >> (i % 64)) & 1 == 1);
        }
        Ok(ShotBatch {
            detector_count: detectors,
            shots,
            words_per_shot: words,
            bits,
            observables,
            seed,
            config,
        })
    }

    /// CSV export for small batches: shot index, observable, and fired
    /// detector indices.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("shot,observable,defects\n");
        for shot in 0..self.shots {
            let defects: Vec<String> =
                self.defects(shot).iter().map(|d| d.to_string()).collect();
            let _ = writeln!(
                s,
                "{},{},{}",
                shot,
                u8::from(self.observables[shot]),
                defects.join(" ")
            );
        }
        s
    }
}

fn fnv1a(data: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in data {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

struct Frame {
    fx: Vec<u64>,
    fz: Vec<u64>,
    pending: Vec<u64>,
    meas: Vec<u64>,
}

impl Frame {
    fn new(num_qubits: usize, num_meas: usize) -> Frame {
        let qw = num_qubits.div_ceil(64);
        Frame {
            fx: vec![0; qw],
            fz: vec![0; qw],
            pending: vec![0; qw],
            meas: vec![0; num_meas.div_ceil(64)],
        }
    }

    fn reset(&mut self) {
        self.fx.iter_mut().for_each(|w| *w = 0);
        self.fz.iter_mut().for_each(|w| *w = 0);
        self.pending.iter_mut().for_each(|w| *w = 0);
        self.meas.iter_mut().for_each(|w| *w = 0);
    }
}

#[inline]
fn get(bits: &[u64], i: u32) -> bool {
    (bits[(i / 64) as usize] >> (i % 64)) & 1 == 1
}

#[inline]
fn flip(bits: &mut [u64], i: u32) {
    bits[(i / 64) as usize] ^= 1 << (i % 64);
}

#[inline]
fn clear(bits: &mut [u64], i: u32) {
    bits[(i / 64) as usize] &= !(1 << (i % 64));
}

// Apply a two-bit Pauli code (1 = X, 2 = Y, 3 = Z) to a frame.
#[inline]
fn apply_code(frame: &mut Frame, q: u32, code: u8) {
    if code == 1 || code == 2 {
        flip(&mut frame.fx, q);
    }
    if code == 2 || code == 3 {
        flip(&mut frame.fz, q);
    }
}

fn run_shot(circuit: &CircuitSpec, frame: &mut Frame, rng: &mut ChaCha8Rng) {
    frame.reset();
    let mut meas_cursor: u32 = 0;
    for inst in &circuit.instructions {
        match &inst.op {
            Op::Reset(targets) => {
                for &q in targets {
                    clear(&mut frame.fx, q);
                    clear(&mut frame.fz, q);
                }
            }
            Op::H(targets) => {
                for &q in targets {
                    let x = get(&frame.fx, q);
                    let z = get(&frame.fz, q);
                    if x != z {
                        flip(&mut frame.fx, q);
                        flip(&mut frame.fz, q);
                    }
                }
            }
            Op::Cx(pairs) => {
                for &(c, t) in pairs {
                    if get(&frame.fx, c) {
                        flip(&mut frame.fx, t);
                    }
                    if get(&frame.fz, t) {
                        flip(&mut frame.fz, c);
                    }
                }
            }
            Op::Measure(targets) => {
                for &q in targets {
                    let bit = get(&frame.fx, q) ^ get(&frame.pending, q);
                    clear(&mut frame.pending, q);
                    if bit {
                        flip(&mut frame.meas, meas_cursor);
                    }
                    meas_cursor += 1;
                }
            }
            Op::Noise(ch) => {
                let rate = ch.rate;
                if rate <= 0.0 {
                    continue;
                }
                match ch.kind {
                    ChannelKind::BitFlip => {
                        for &q in &ch.targets {
                            if rng.gen::<f64>() < rate {
                                flip(&mut frame.fx, q);
                            }
                        }
                    }
                    ChannelKind::MeasureFlip => {
                        for &q in &ch.targets {
                            if rng.gen::<f64>() < rate {
                                flip(&mut frame.pending, q);
                            }
                        }
                    }
                    ChannelKind::Depolarize1 => {
                        for &q in &ch.targets {
                            let u: f64 = rng.gen();
                            if u < rate {
                                let code = ((u / rate * 3.0) as u8).min(2) + 1;
                                apply_code(frame, q, code);
                            }
                        }
                    }
                    ChannelKind::Depolarize2 => {
                        for site in ch.targets.chunks_exact(2) {
                            let u: f64 = rng.gen();
                            if u < rate {
                                let idx = ((u / rate * 15.0) as u8).min(14) + 1;
                                let (a, b) = (idx / 4, idx % 4);
                                if a != 0 {
                                    apply_code(frame, site[0], a);
                                }
                                if b != 0 {
                                    apply_code(frame, site[1], b);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Sample `shots` Monte Carlo shots from a noisy circuit.
///
/// Shot `i` always uses RNG stream `(seed, i)`; results are reproducible
/// and independent of parallel scheduling.
pub fn sample(circuit: &CircuitSpec, shots: usize, seed: u64) -> ShotBatch {
    assert!(shots >= 1, "shot count must be >= 1");
    let nd = circuit.detectors.len();
    let words_per_shot = nd.div_ceil(64).max(1);
    let mut bits = vec![0u64; words_per_shot * shots];
    let mut observables = vec![false; shots];

    bits.par_chunks_mut(words_per_shot)
        .zip(observables.par_iter_mut())
        .enumerate()
        .for_each_init(
            || Frame::new(circuit.num_qubits as usize, circuit.num_measurements as usize),
            |frame, (shot, (row, obs))| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(shot as u64);
                run_shot(circuit, frame, &mut rng);
                for (d, det) in circuit.detectors.iter().enumerate() {
                    let fired = det
                        .measurements
                        .iter()
                        .fold(false, |acc, &m| acc ^ get(&frame.meas, m));
                    if fired {
                        row[d / 64] |= 1 << (d % 64);
                    }
                }
                *obs = circuit
                    .observable
                    .iter()
                    .fold(false, |acc, &m| acc ^ get(&frame.meas, m));
            },
        );

    let config = format!(
        "qubits={} measurements={} detectors={} rounds={} rates={:?}",
        circuit.num_qubits,
        circuit.num_measurements,
        nd,
        circuit.rounds,
        circuit.round_rates,
    );
    ShotBatch {
        detector_count: nd as u32,
        shots,
        words_per_shot,
        bits,
        observables,
        seed,
        config,
    }
}

/// Per-round mean detector value: for each round index, the mean over shots
/// and over the detectors in that time slice.
pub fn detector_density(batch: &ShotBatch, coords: &[DetectorCoord]) -> Vec<f64> {
    assert_eq!(coords.len(), batch.detector_count as usize);
    let layers = coords.iter().map(|c| c.layer).max().map_or(0, |l| l + 1);
    let mut sums = vec![0u64; layers as usize];
    let mut sizes = vec![0u64; layers as usize];
    for c in coords {
        sizes[c.layer as usize] += 1;
    }
    let counts = batch.detector_counts();
    for (d, c) in coords.iter().enumerate() {
        sums[c.layer as usize] += counts[d];
    }
    sums.iter()
        .zip(sizes.iter())
        .map(|(&s, &n)| {
            if n == 0 {
                0.0
            } else {
                s as f64 / (n * batch.shots as u64) as f64
            }
        })
        .collect()
}
