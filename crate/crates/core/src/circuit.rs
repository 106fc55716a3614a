//! Circuit representation shared by code construction, noise attachment,
//! fault propagation, and sampling.
//!
//! A circuit is a time-tagged instruction list over qubits identified by
//! dense indices. Measurements are implicitly numbered in execution order.
//! Detectors are XORs of measurement outcomes; a single logical observable
//! is the XOR of the final data measurements on the logical support.
//! Noise channels are instructions too, so a noisy circuit serializes to a
//! single diffable text stream.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// Dense qubit index within one circuit.
pub type QubitId = u32;

/// Single-qubit Pauli operator (phase ignored).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    /// Whether the operator has an X component (anticommutes with Z).
    pub fn has_x(self) -> bool {
        matches!(self, Pauli::X | Pauli::Y)
    }

    /// Whether the operator has a Z component (anticommutes with X).
    pub fn has_z(self) -> bool {
        matches!(self, Pauli::Z | Pauli::Y)
    }

    fn symbol(self) -> char {
        match self {
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Kinds of stochastic noise operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChannelKind {
    /// Pauli X applied independently to each target with the channel rate.
    BitFlip,
    /// One-qubit depolarizing: X, Y, Z each with rate/3 per target.
    Depolarize1,
    /// Two-qubit depolarizing on consecutive target pairs: each of the 15
    /// nontrivial two-qubit Paulis with rate/15.
    Depolarize2,
    /// Classical flip of the next recorded measurement outcome per target.
    MeasureFlip,
}

impl ChannelKind {
    fn name(self) -> &'static str {
        match self {
            ChannelKind::BitFlip => "bitflip",
            ChannelKind::Depolarize1 => "depolarize1",
            ChannelKind::Depolarize2 => "depolarize2",
            ChannelKind::MeasureFlip => "measure_flip",
        }
    }
}

/// A stochastic noise operation attached to a circuit.
///
/// A channel acts independently per *site*: one qubit per site for
/// [`ChannelKind::BitFlip`], [`ChannelKind::Depolarize1`], and
/// [`ChannelKind::MeasureFlip`], and one consecutive target pair for
/// [`ChannelKind::Depolarize2`].
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseChannel {
    pub kind: ChannelKind,
    pub rate: f64,
    pub targets: Vec<QubitId>,
    /// Index of the syndrome-extraction round this channel belongs to.
    pub round: u32,
}

impl NoiseChannel {
    /// Number of qubits per independent site.
    pub fn site_width(&self) -> usize {
        match self.kind {
            ChannelKind::Depolarize2 => 2,
            _ => 1,
        }
    }

    /// The nontrivial outcomes of one site, as `(leg index within the site,
    /// Pauli)` lists with their probabilities. Measurement flips are
    /// classical and are not expressible as Paulis; they report no outcomes.
    pub fn site_outcomes(&self) -> Vec<(Vec<(usize, Pauli)>, f64)> {
        match self.kind {
            ChannelKind::BitFlip => vec![(vec![(0, Pauli::X)], self.rate)],
            ChannelKind::Depolarize1 => [Pauli::X, Pauli::Y, Pauli::Z]
                .iter()
                .map(|&p| (vec![(0, p)], self.rate / 3.0))
                .collect(),
            ChannelKind::Depolarize2 => {
                let opts = [None, Some(Pauli::X), Some(Pauli::Y), Some(Pauli::Z)];
                let mut out = Vec::with_capacity(15);
                for &a in &opts {
                    for &b in &opts {
                        if a.is_none() && b.is_none() {
                            continue;
                        }
                        let legs: Vec<(usize, Pauli)> = [(0, a), (1, b)]
                            .into_iter()
                            .filter_map(|(i, o)| o.map(|p| (i, p)))
                            .collect();
                        out.push((legs, self.rate / 15.0));
                    }
                }
                out
            }
            ChannelKind::MeasureFlip => Vec::new(),
        }
    }

    /// Iterate over sites as slices of `targets`.
    pub fn sites(&self) -> impl Iterator<Item = &[QubitId]> {
        self.targets.chunks(self.site_width())
    }
}

/// A single circuit operation at a fixed time step.
#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    /// Z-basis reset to |0> on each target.
    Reset(Vec<QubitId>),
    /// Hadamard on each target.
    H(Vec<QubitId>),
    /// CNOT on each (control, target) pair; pairs are disjoint.
    Cx(Vec<(QubitId, QubitId)>),
    /// Destructive Z-basis measurement of each target, recorded in order.
    Measure(Vec<QubitId>),
    /// Stochastic noise.
    Noise(NoiseChannel),
}

/// Time-tagged instruction.
#[derive(Debug, Clone, PartialEq)]
pub struct Instruction {
    pub time: u32,
    pub op: Op,
}

/// Role a qubit plays in the code block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QubitRole {
    Data,
    ZCheck,
    XCheck,
}

impl QubitRole {
    fn name(self) -> &'static str {
        match self {
            QubitRole::Data => "data",
            QubitRole::ZCheck => "zcheck",
            QubitRole::XCheck => "xcheck",
        }
    }
}

/// Spatial coordinate plus round index identifying a detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DetectorCoord {
    pub x: u32,
    pub y: u32,
    /// Round index: 0..rounds for check comparisons, `rounds` for the final
    /// data-readout comparison layer.
    pub layer: u32,
}

/// XOR of a set of measurement outcomes; deterministically 0 when the
/// circuit runs noise-free.
#[derive(Debug, Clone, PartialEq)]
pub struct Detector {
    pub measurements: Vec<u32>,
    pub coord: DetectorCoord,
}

/// A Clifford memory-experiment circuit with detector and observable
/// declarations, optionally annotated with noise channels.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitSpec {
    pub instructions: Vec<Instruction>,
    pub num_qubits: u32,
    pub qubit_coords: Vec<(u32, u32)>,
    pub qubit_roles: Vec<QubitRole>,
    pub num_measurements: u32,
    pub detectors: Vec<Detector>,
    /// Measurement indices whose XOR defines the logical observable.
    pub observable: Vec<u32>,
    /// Number of syndrome-extraction rounds.
    pub rounds: u32,
    /// Per-round noise rate, filled in by noise attachment (empty while
    /// noiseless).
    pub round_rates: Vec<f64>,
}

impl CircuitSpec {
    /// Whether any noise channels are attached.
    pub fn is_noisy(&self) -> bool {
        self.instructions
            .iter()
            .any(|i| matches!(i.op, Op::Noise(_)))
    }

    /// All noise channels in circuit order.
    pub fn channels(&self) -> impl Iterator<Item = &NoiseChannel> {
        self.instructions.iter().filter_map(|i| match &i.op {
            Op::Noise(ch) => Some(ch),
            _ => None,
        })
    }

    /// Line-oriented text form, stable across runs, suitable for diffing
    /// and golden tests.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "circuit v1 qubits={} measurements={} detectors={} rounds={}",
            self.num_qubits, self.num_measurements, self.detectors.len(), self.rounds,
        );
        for q in 0..self.num_qubits as usize {
            let (x, y) = self.qubit_coords[q];
            let _ = writeln!(s, "qubit {q} ({x},{y}) {}", self.qubit_roles[q].name());
        }
        for inst in &self.instructions {
            match &inst.op {
                Op::Reset(ts) => {
                    let _ = writeln!(s, "reset @{} : {}", inst.time, join_ids(ts));
                }
                Op::H(ts) => {
                    let _ = writeln!(s, "h @{} : {}", inst.time, join_ids(ts));
                }
                Op::Cx(pairs) => {
                    let body: Vec<String> =
                        pairs.iter().map(|(c, t)| format!("{c}>{t}")).collect();
                    let _ = writeln!(s, "cx @{} : {}", inst.time, body.join(" "));
                }
                Op::Measure(ts) => {
                    let _ = writeln!(s, "measure @{} : {}", inst.time, join_ids(ts));
                }
                Op::Noise(ch) => {
                    let body: Vec<String> = ch
                        .sites()
                        .map(|site| {
                            site.iter()
                                .map(|q| q.to_string())
                                .collect::<Vec<_>>()
                                .join(">")
                        })
                        .collect();
                    let _ = writeln!(
                        s,
                        "noise {} p={} round={} @{} : {}",
                        ch.kind.name(),
                        ch.rate,
                        ch.round,
                        inst.time,
                        body.join(" "),
                    );
                }
            }
        }
        for det in &self.detectors {
            let ms: Vec<String> = det.measurements.iter().map(|m| format!("m{m}")).collect();
            let _ = writeln!(
                s,
                "detector ({},{},{}) : {}",
                det.coord.x, det.coord.y, det.coord.layer, ms.join(" "),
            );
        }
        let ms: Vec<String> = self.observable.iter().map(|m| format!("m{m}")).collect();
        let _ = writeln!(s, "observable : {}", ms.join(" "));
        s
    }
}

fn join_ids(ids: &[QubitId]) -> String {
    ids.iter()
        .map(|q| q.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Sparse Pauli operator given as (qubit, Pauli) pairs.
pub type SparsePauli = Vec<(QubitId, Pauli)>;

/// Render a sparse Pauli for error messages and debugging.
pub fn format_sparse_pauli(p: &[(QubitId, Pauli)]) -> String {
    p.iter()
        .map(|(q, pl)| format!("{}{}", pl.symbol(), q))
        .collect::<Vec<_>>()
        .join(" ")
}
