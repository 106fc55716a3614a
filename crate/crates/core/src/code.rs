//! Rotated surface code layout and Z-memory experiment circuits.
//!
//! Geometry convention: data qubits sit at odd-odd coordinates
//! `(2c+1, 2r+1)` for `0 <= c, r < d` on a `(2d+1) x (2d+1)` grid, with `x`
//! growing rightward and `y` growing downward. Check (ancilla) qubits sit at
//! even-even coordinates `(2c, 2r)`. A check at column/row index `(c, r)` is
//! Z-type when `c + r` is even, X-type otherwise. All interior checks are
//! present; on the top and bottom boundary rows only Z-type weight-2 checks
//! survive, and on the left and right boundary columns only X-type weight-2
//! checks survive. The logical Z operator runs along the left data column.

use std::collections::HashMap;

use crate::circuit::{
    CircuitSpec, Detector, DetectorCoord, Instruction, Op, QubitId, QubitRole,
};
use crate::error::{Error, Result};

/// Lattice coordinate (x, y).
pub type Coord = (u32, u32);

/// Basis of a stabilizer check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckBasis {
    X,
    Z,
}

/// One stabilizer check: its ancilla coordinate and the data qubits it
/// touches, slotted by the four-step CNOT schedule (absent slots are
/// off-lattice neighbors of boundary checks).
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRecord {
    pub coord: Coord,
    pub basis: CheckBasis,
    /// Data-qubit coordinate per schedule step, `None` where the diagonal
    /// neighbor falls outside the lattice.
    pub schedule: [Option<Coord>; 4],
}

impl CheckRecord {
    /// Data-qubit neighbors in schedule order, skipping absent slots.
    pub fn neighbors(&self) -> Vec<Coord> {
        self.schedule.iter().filter_map(|n| *n).collect()
    }
}

/// CNOT target offsets per step for X checks (ancilla is the control).
/// The last two targets share a column, so mid-round ancilla faults spread
/// along the direction harmless to the horizontally-terminating X chains.
pub const X_CHECK_SCHEDULE: [(i32, i32); 4] = [(1, -1), (1, 1), (-1, -1), (-1, 1)];

/// CNOT control offsets per step for Z checks (ancilla is the target).
/// The last two controls share a row, the direction harmless to the
/// vertically-terminating Z chains.
pub const Z_CHECK_SCHEDULE: [(i32, i32); 4] = [(-1, 1), (1, 1), (-1, -1), (1, -1)];

/// Number of time ticks occupied by one syndrome-extraction round:
/// reset, H, four CNOT layers, H, measure.
pub const TICKS_PER_ROUND: u32 = 8;

/// Rotated surface code geometry for odd distance `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeLayout {
    pub distance: u32,
    /// Data-qubit coordinates, sorted by (y, x).
    pub data_qubits: Vec<Coord>,
    pub x_checks: Vec<CheckRecord>,
    pub z_checks: Vec<CheckRecord>,
    /// Data qubits supporting the logical Z operator (left column).
    pub logical_z_support: Vec<Coord>,
}

impl CodeLayout {
    /// Total number of stabilizer checks, `d^2 - 1`.
    pub fn check_count(&self) -> usize {
        self.x_checks.len() + self.z_checks.len()
    }
}

fn check_exists(d: i64, c: i64, r: i64) -> bool {
    if c < 0 || r < 0 || c > d || r > d {
        return false;
    }
    let interior_c = c >= 1 && c <= d - 1;
    let interior_r = r >= 1 && r <= d - 1;
    let z_type = (c + r) % 2 == 0;
    if interior_c && interior_r {
        true
    } else if interior_c {
        // Top/bottom boundary rows keep Z checks only.
        z_type
    } else if interior_r {
        // Left/right boundary columns keep X checks only.
        !z_type
    } else {
        false
    }
}

/// Construct the rotated surface code of odd distance `d >= 3`.
///
/// Deterministic: the same distance always yields an identical layout.
pub fn build_layout(d: u32) -> Result<CodeLayout> {
    if d < 3 || d % 2 == 0 {
        return Err(Error::InvalidDistance(d));
    }
    let di = i64::from(d);

    let mut data_qubits = Vec::with_capacity((d * d) as usize);
    for r in 0..di {
        for c in 0..di {
            data_qubits.push(((2 * c + 1) as u32, (2 * r + 1) as u32));
        }
    }

    let mut x_checks = Vec::new();
    let mut z_checks = Vec::new();
    for r in 0..=di {
        for c in 0..=di {
            if !check_exists(di, c, r) {
                continue;
            }
            let (x, y) = (2 * c, 2 * r);
            let z_type = (c + r) % 2 == 0;
            let offsets = if z_type {
                Z_CHECK_SCHEDULE
            } else {
                X_CHECK_SCHEDULE
            };
            let schedule = offsets.map(|(dx, dy)| {
                let (nx, ny) = (x + i64::from(dx), y + i64::from(dy));
                if nx >= 1 && nx <= 2 * di - 1 && ny >= 1 && ny <= 2 * di - 1 {
                    Some((nx as u32, ny as u32))
                } else {
                    None
                }
            });
            let rec = CheckRecord {
                coord: (x as u32, y as u32),
                basis: if z_type { CheckBasis::Z } else { CheckBasis::X },
                schedule,
            };
            if z_type {
                z_checks.push(rec);
            } else {
                x_checks.push(rec);
            }
        }
    }

    let logical_z_support = (0..d).map(|r| (1, 2 * r + 1)).collect();

    Ok(CodeLayout {
        distance: d,
        data_qubits,
        x_checks,
        z_checks,
        logical_z_support,
    })
}

/// Build the Z-memory experiment circuit: |0> data initialization, `rounds`
/// rounds of syndrome extraction with the standard interleaved CNOT
/// schedule, and a final transversal Z-basis data readout.
///
/// First-round Z-check detectors compare against the deterministic +1
/// value; X-check detectors begin at the second round since first-round X
/// outcomes are nondeterministic under Z initialization; the final layer
/// compares Z-check parities reconstructed from the data readout against
/// the last round of ancilla outcomes.
pub fn build_memory_circuit(layout: &CodeLayout, rounds: u32) -> Result<CircuitSpec> {
    if rounds == 0 {
        return Err(Error::InvalidRounds(rounds));
    }
    let n_data = layout.data_qubits.len();
    let n_z = layout.z_checks.len();
    let n_x = layout.x_checks.len();
    let n_checks = (n_z + n_x) as u32;

    let mut qubit_coords: Vec<Coord> = Vec::with_capacity(n_data + n_z + n_x);
    let mut qubit_roles = Vec::with_capacity(n_data + n_z + n_x);
    qubit_coords.extend(layout.data_qubits.iter().copied());
    qubit_roles.extend(std::iter::repeat(QubitRole::Data).take(n_data));
    qubit_coords.extend(layout.z_checks.iter().map(|c| c.coord));
    qubit_roles.extend(std::iter::repeat(QubitRole::ZCheck).take(n_z));
    qubit_coords.extend(layout.x_checks.iter().map(|c| c.coord));
    qubit_roles.extend(std::iter::repeat(QubitRole::XCheck).take(n_x));

    let index: HashMap<Coord, QubitId> = qubit_coords
        .iter()
        .enumerate()
        .map(|(i, &c)| (c, i as QubitId))
        .collect();
    let data_id = |coord: Coord| index[&coord];
    let z_anc: Vec<QubitId> = (n_data..n_data + n_z).map(|i| i as QubitId).collect();
    let x_anc: Vec<QubitId> = (n_data + n_z..n_data + n_z + n_x)
        .map(|i| i as QubitId)
        .collect();
    let ancillas: Vec<QubitId> = z_anc.iter().chain(x_anc.iter()).copied().collect();

    let mut instructions = Vec::new();
    for round in 0..rounds {
        let t0 = round * TICKS_PER_ROUND;
        let reset_targets = if round == 0 {
            (0..qubit_coords.len() as u32).collect()
        } else {
            ancillas.clone()
        };
        instructions.push(Instruction {
            time: t0,
            op: Op::Reset(reset_targets),
        });
        instructions.push(Instruction {
            time: t0 + 1,
            op: Op::H(x_anc.clone()),
        });
        for step in 0..4 {
            let mut pairs = Vec::new();
            for (i, check) in layout.z_checks.iter().enumerate() {
                if let Some(nb) = check.schedule[step] {
                    pairs.push((data_id(nb), z_anc[i]));
                }
            }
            for (i, check) in layout.x_checks.iter().enumerate() {
                if let Some(nb) = check.schedule[step] {
                    pairs.push((x_anc[i], data_id(nb)));
                }
            }
            instructions.push(Instruction {
                time: t0 + 2 + step as u32,
                op: Op::Cx(pairs),
            });
        }
        instructions.push(Instruction {
            time: t0 + 6,
            op: Op::H(x_anc.clone()),
        });
        instructions.push(Instruction {
            time: t0 + 7,
            op: Op::Measure(ancillas.clone()),
        });
    }
    let final_time = rounds * TICKS_PER_ROUND;
    instructions.push(Instruction {
        time: final_time,
        op: Op::Measure((0..n_data as u32).collect()),
    });

    // Measurement index helpers: round r emits n_checks outcomes, Z checks
    // first; the final layer emits one outcome per data qubit.
    let meas_z = |check: usize, round: u32| round * n_checks + check as u32;
    let meas_x = |check: usize, round: u32| round * n_checks + (n_z + check) as u32;
    let meas_data = |q: QubitId| rounds * n_checks + q;

    let mut detectors = Vec::new();
    for round in 0..rounds {
        for (i, check) in layout.z_checks.iter().enumerate() {
            let measurements = if round == 0 {
                vec![meas_z(i, 0)]
            } else {
                vec![meas_z(i, round), meas_z(i, round - 1)]
            };
            detectors.push(Detector {
                measurements,
                coord: DetectorCoord {
                    x: check.coord.0,
                    y: check.coord.1,
                    layer: round,
                },
            });
        }
        if round > 0 {
            for (i, check) in layout.x_checks.iter().enumerate() {
                detectors.push(Detector {
                    measurements: vec![meas_x(i, round), meas_x(i, round - 1)],
                    coord: DetectorCoord {
                        x: check.coord.0,
                        y: check.coord.1,
                        layer: round,
                    },
                });
            }
        }
    }
    for (i, check) in layout.z_checks.iter().enumerate() {
        let mut measurements: Vec<u32> = check
            .neighbors()
            .iter()
            .map(|&nb| meas_data(data_id(nb)))
            .collect();
        measurements.sort_unstable();
        measurements.push(meas_z(i, rounds - 1));
        detectors.push(Detector {
            measurements,
            coord: DetectorCoord {
                x: check.coord.0,
                y: check.coord.1,
                layer: rounds,
            },
        });
    }

    let observable: Vec<u32> = layout
        .logical_z_support
        .iter()
        .map(|&c| meas_data(data_id(c)))
        .collect();

    let num_measurements = rounds * n_checks + n_data as u32;
    Ok(CircuitSpec {
        instructions,
        num_qubits: qubit_coords.len() as u32,
        qubit_coords,
        qubit_roles,
        num_measurements,
        detectors,
        observable,
        rounds,
        round_rates: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_counts_d3() {
        let layout = build_layout(3).unwrap();
        assert_eq!(layout.data_qubits.len(), 9);
        assert_eq!(layout.x_checks.len(), 4);
        assert_eq!(layout.z_checks.len(), 4);
        assert_eq!(layout.logical_z_support.len(), 3);
    }

    #[test]
    fn layout_counts_d5() {
        let layout = build_layout(5).unwrap();
        assert_eq!(layout.data_qubits.len(), 25);
        assert_eq!(layout.x_checks.len(), 12);
        assert_eq!(layout.z_checks.len(), 12);
    }

    #[test]
    fn layout_rejects_bad_distance() {
        assert!(matches!(build_layout(2), Err(Error::InvalidDistance(2))));
        assert!(matches!(build_layout(4), Err(Error::InvalidDistance(4))));
        assert!(matches!(build_layout(1), Err(Error::InvalidDistance(1))));
        assert!(matches!(build_layout(0), Err(Error::InvalidDistance(0))));
    }

    #[test]
    fn layout_is_deterministic() {
        assert_eq!(build_layout(5).unwrap(), build_layout(5).unwrap());
    }

    #[test]
    fn every_data_qubit_touches_at_least_two_checks() {
        for d in [3, 5, 7] {
            let layout = build_layout(d).unwrap();
            let mut touch: HashMap<Coord, usize> = HashMap::new();
            for check in layout.z_checks.iter().chain(layout.x_checks.iter()) {
                for nb in check.neighbors() {
                    *touch.entry(nb).or_default() += 1;
                }
            }
            for q in &layout.data_qubits {
                assert!(touch.get(q).copied().unwrap_or(0) >= 2, "d={d} qubit {q:?}");
            }
        }
    }

    #[test]
    fn logical_z_commutes_with_all_x_checks() {
        for d in [3, 5, 7, 9] {
            let layout = build_layout(d).unwrap();
            let support: std::collections::HashSet<Coord> =
                layout.logical_z_support.iter().copied().collect();
            for check in &layout.x_checks {
                let overlap = check
                    .neighbors()
                    .iter()
                    .filter(|nb| support.contains(nb))
                    .count();
                assert_eq!(overlap % 2, 0, "d={d} X check {:?}", check.coord);
            }
        }
    }

    #[test]
    fn stabilizers_commute_pairwise() {
        // Each X check must overlap each Z check on an even number of qubits.
        for d in [3, 5] {
            let layout = build_layout(d).unwrap();
            for xc in &layout.x_checks {
                let xs: std::collections::HashSet<Coord> =
                    xc.neighbors().into_iter().collect();
                for zc in &layout.z_checks {
                    let overlap = zc.neighbors().iter().filter(|nb| xs.contains(nb)).count();
                    assert_eq!(
                        overlap % 2,
                        0,
                        "d={d} X {:?} vs Z {:?}",
                        xc.coord,
                        zc.coord
                    );
                }
            }
        }
    }

    #[test]
    fn schedule_uses_each_data_qubit_once_per_step() {
        for d in [3, 5, 7] {
            let layout = build_layout(d).unwrap();
            for step in 0..4 {
                let mut seen = std::collections::HashSet::new();
                for check in layout.z_checks.iter().chain(layout.x_checks.iter()) {
                    if let Some(nb) = check.schedule[step] {
                        assert!(seen.insert(nb), "d={d} step {step} reuses {nb:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn memory_circuit_measurement_counts() {
        let layout = build_layout(3).unwrap();
        let circuit = build_memory_circuit(&layout, 6).unwrap();
        // 6 rounds x 8 checks + 9 data readouts.
        assert_eq!(circuit.num_measurements, 48 + 9);
        for round in 0..6u32 {
            let per_round: usize = circuit
                .instructions
                .iter()
                .filter_map(|i| match &i.op {
                    Op::Measure(ts) if i.time == round * TICKS_PER_ROUND + 7 => Some(ts.len()),
                    _ => None,
                })
                .sum();
            assert_eq!(per_round, 8);
        }
    }

    #[test]
    fn memory_circuit_detector_layers() {
        // T=1: detectors exist for round-0 Z checks and the final comparison
        // layer only (no X-check detectors at all).
        let layout = build_layout(3).unwrap();
        let circuit = build_memory_circuit(&layout, 1).unwrap();
        assert_eq!(circuit.detectors.len(), 4 + 4);
        assert!(circuit.detectors.iter().all(|d| d.coord.layer <= 1));

        let circuit = build_memory_circuit(&layout, 6).unwrap();
        // Z: 6 rounds + final = 7 layers of 4; X: rounds 1..=5, 5 layers of 4.
        assert_eq!(circuit.detectors.len(), 7 * 4 + 5 * 4);
    }

    #[test]
    fn detectors_reference_existing_measurements() {
        let layout = build_layout(5).unwrap();
        let circuit = build_memory_circuit(&layout, 10).unwrap();
        for det in &circuit.detectors {
            for &m in &det.measurements {
                assert!(m < circuit.num_measurements);
            }
            assert!(det.coord.layer <= circuit.rounds);
        }
        for &m in &circuit.observable {
            assert!(m < circuit.num_measurements);
        }
        assert_eq!(circuit.observable.len(), 5);
    }

    #[test]
    fn rejects_zero_rounds() {
        let layout = build_layout(3).unwrap();
        assert!(matches!(
            build_memory_circuit(&layout, 0),
            Err(Error::InvalidRounds(0))
        ));
    }

    #[test]
    fn circuit_text_is_stable() {
        let layout = build_layout(3).unwrap();
        let circuit = build_memory_circuit(&layout, 2).unwrap();
        let a = circuit.to_text();
        let b = build_memory_circuit(&build_layout(3).unwrap(), 2)
            .unwrap()
            .to_text();
        assert_eq!(a, b);
        // Z detectors: layers 0, 1, and the final comparison layer; X
        // detectors: layer 1 only.
        assert!(a.starts_with("circuit v1 qubits=17 measurements=25 detectors=16 rounds=2"));
    }
}
