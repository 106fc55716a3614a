//! Noise attachment: phenomenological and circuit-level depolarizing
//! models, with one optional burst round where every rate is replaced by
//! the burst rate `p_B`.

use serde::{Deserialize, Serialize};

use crate::circuit::{ChannelKind, CircuitSpec, Instruction, NoiseChannel, Op, QubitRole};
use crate::code::TICKS_PER_ROUND;
use crate::error::{Error, Result};

pub use crate::circuit::NoiseChannel as Channel;

/// Which noise model to attach.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    /// Data bit flips plus measurement flips around perfect extraction.
    Phenomenological,
    /// Depolarizing noise after every gate plus measurement flips.
    CircuitDepolarizing,
}

impl std::fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NoiseModel::Phenomenological => write!(f, "phenomenological"),
            NoiseModel::CircuitDepolarizing => write!(f, "circuit_depolarizing"),
        }
    }
}

impl std::str::FromStr for NoiseModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "phenomenological" | "phenom" => Ok(NoiseModel::Phenomenological),
            "circuit_depolarizing" | "circuit" => Ok(NoiseModel::CircuitDepolarizing),
            other => Err(Error::InvalidConfig(format!("unknown noise model {other:?}"))),
        }
    }
}

/// Noise parameters for one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub model: NoiseModel,
    /// Background error rate, in [0, 1/2). Rates at or above 1/2 would give
    /// non-positive edge weights.
    pub p: f64,
    /// Burst error rate, in [0, 1/2).
    pub p_b: f64,
    /// Round index that carries the burst, or `None` for no burst.
    pub burst_round: Option<u32>,
}

impl NoiseConfig {
    /// Validate rates and the burst round against a circuit with `rounds`
    /// rounds.
    pub fn validate(&self, rounds: u32) -> Result<()> {
        for (name, value) in [("p", self.p), ("p_b", self.p_b)] {
            if !(0.0..0.5).contains(&value) || !value.is_finite() {
                return Err(Error::InvalidProbability { name, value });
            }
        }
        if let Some(round) = self.burst_round {
            if round >= rounds {
                return Err(Error::BurstRoundOutOfRange { round, rounds });
            }
        }
        Ok(())
    }

    /// Rate applied during `round`.
    pub fn rate_for(&self, round: u32) -> f64 {
        if self.burst_round == Some(round) {
            self.p_b
        } else {
            self.p
        }
    }
}

fn round_rates(cfg: &NoiseConfig, rounds: u32) -> Vec<f64> {
    (0..rounds).map(|r| cfg.rate_for(r)).collect()
}

/// Attach phenomenological noise: each round gains X-flip channels on all
/// data qubits before extraction and measurement-flip channels on all check
/// outcomes, both at the round's rate. Extraction gates stay noiseless and
/// the final data readout is perfect.
pub fn attach_phenomenological(circuit: &CircuitSpec, cfg: &NoiseConfig) -> Result<CircuitSpec> {
    if cfg.model != NoiseModel::Phenomenological {
        return Err(Error::ModelMismatch {
            expected: "phenomenological",
        });
    }
    cfg.validate(circuit.rounds)?;

    let data: Vec<u32> = (0..circuit.num_qubits)
        .filter(|&q| circuit.qubit_roles[q as usize] == QubitRole::Data)
        .collect();
    let final_time = circuit.rounds * TICKS_PER_ROUND;

    let mut out = circuit.clone();
    let mut instructions = Vec::with_capacity(circuit.instructions.len() * 2);
    for inst in &circuit.instructions {
        let round = inst.time / TICKS_PER_ROUND;
        match &inst.op {
            Op::Reset(_) if inst.time % TICKS_PER_ROUND == 0 => {
                instructions.push(inst.clone());
                instructions.push(Instruction {
                    time: inst.time,
                    op: Op::Noise(NoiseChannel {
                        kind: ChannelKind::BitFlip,
                        rate: cfg.rate_for(round),
                        targets: data.clone(),
                        round,
                    }),
                });
            }
            Op::Measure(targets) if inst.time < final_time => {
                instructions.push(Instruction {
                    time: inst.time,
                    op: Op::Noise(NoiseChannel {
                        kind: ChannelKind::MeasureFlip,
                        rate: cfg.rate_for(round),
                        targets: targets.clone(),
                        round,
                    }),
                });
                instructions.push(inst.clone());
            }
            _ => instructions.push(inst.clone()),
        }
    }
    out.instructions = instructions;
    out.round_rates = round_rates(cfg, circuit.rounds);
    Ok(out)
}

/// Attach circuit-level depolarizing noise: one-qubit depolarizing after
/// every reset and Hadamard, two-qubit depolarizing after every CNOT, and a
/// classical flip on every check measurement outcome, all at the round's
/// rate. The final data readout stays perfect.
pub fn attach_circuit_depolarizing(circuit: &CircuitSpec, cfg: &NoiseConfig) -> Result<CircuitSpec> {
    if cfg.model != NoiseModel::CircuitDepolarizing {
        return Err(Error::ModelMismatch {
            expected: "circuit_depolarizing",
        });
    }
    cfg.validate(circuit.rounds)?;

    let final_time = circuit.rounds * TICKS_PER_ROUND;
    let mut out = circuit.clone();
    let mut instructions = Vec::with_capacity(circuit.instructions.len() * 2);
    for inst in &circuit.instructions {
        let round = inst.time / TICKS_PER_ROUND;
        let rate = cfg.rate_for(round);
        match &inst.op {
            Op::Reset(targets) | Op::H(targets) if inst.time < final_time => {
                instructions.push(inst.clone());
                instructions.push(Instruction {
                    time: inst.time,
                    op: Op::Noise(NoiseChannel {
                        kind: ChannelKind::Depolarize1,
                        rate,
                        targets: targets.clone(),
                        round,
                    }),
                });
            }
            Op::Cx(pairs) => {
                instructions.push(inst.clone());
                let targets = pairs.iter().flat_map(|&(c, t)| [c, t]).collect();
                instructions.push(Instruction {
                    time: inst.time,
                    op: Op::Noise(NoiseChannel {
                        kind: ChannelKind::Depolarize2,
                        rate,
                        targets,
                        round,
                    }),
                });
            }
            Op::Measure(targets) if inst.time < final_time => {
                instructions.push(Instruction {
                    time: inst.time,
                    op: Op::Noise(NoiseChannel {
                        kind: ChannelKind::MeasureFlip,
                        rate,
                        targets: targets.clone(),
                        round,
                    }),
                });
                instructions.push(inst.clone());
            }
            _ => instructions.push(inst.clone()),
        }
    }
    out.instructions = instructions;
    out.round_rates = round_rates(cfg, circuit.rounds);
    Ok(out)
}

/// Attach noise according to `cfg.model`.
pub fn attach_noise(circuit: &CircuitSpec, cfg: &NoiseConfig) -> Result<CircuitSpec> {
    match cfg.model {
        NoiseModel::Phenomenological => attach_phenomenological(circuit, cfg),
        NoiseModel::CircuitDepolarizing => attach_circuit_depolarizing(circuit, cfg),
    }
}
