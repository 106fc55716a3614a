//! Weighted decoding graph: vertices are detectors plus one boundary
//! vertex, edges are merged fault mechanisms weighted `log((1-p)/p)`.

use std::fmt::Write as _;

use crate::circuit::DetectorCoord;
use crate::error::{Error, Result};
use crate::fault::DetectorErrorModel;

/// Fixed-point scale for integer edge weights used by the matching stage.
/// Weights stay below ~30, so scaled values and path sums fit comfortably
/// in i64.
pub const WEIGHT_SCALE: f64 = (1u64 << 20) as f64;

/// One decoding-graph edge. `v == boundary` marks a boundary edge.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphEdge {
    pub u: u32,
    pub v: u32,
    pub probability: f64,
    /// `log((1-p)/p)`, finite and non-negative for p in (0, 1/2].
    pub weight: f64,
    /// Quantized weight used by shortest paths and matching.
    pub iweight: i64,
    pub observable: bool,
    /// Round index of the earliest contributing fault.
    pub round: u32,
    /// Rate terms (round, multiplier) whose XOR combination gives `p`.
    pub terms: Vec<(u32, f64)>,
}

/// Weighted decoding graph.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodingGraph {
    pub detector_count: u32,
    pub coords: Vec<DetectorCoord>,
    pub edges: Vec<GraphEdge>,
    /// Per-round rates the edge probabilities were computed at.
    pub round_rates: Vec<f64>,
    adjacency_offsets: Vec<u32>,
    adjacency: Vec<(u32, u32)>,
}

impl DecodingGraph {
    /// Index of the boundary vertex.
    pub fn boundary(&self) -> u32 {
        self.detector_count
    }

    /// Total vertex count including the boundary vertex.
    pub fn vertex_count(&self) -> usize {
        self.detector_count as usize + 1
    }

    /// Neighbors of `v` as (other endpoint, edge index).
    pub fn neighbors(&self, v: u32) -> &[(u32, u32)] {
        let lo = self.adjacency_offsets[v as usize] as usize;
        let hi = self.adjacency_offsets[v as usize + 1] as usize;
        &self.adjacency[lo..hi]
    }

    /// Number of incident edges (the fault locations touching `v`).
    pub fn degree(&self, v: u32) -> usize {
        self.neighbors(v).len()
    }

    fn rebuild_adjacency(&mut self) {
        let n = self.vertex_count();
        let mut counts = vec![0u32; n + 1];
        for e in &self.edges {
            counts[e.u as usize + 1] += 1;
            counts[e.v as usize + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut adjacency = vec![(0u32, 0u32); self.edges.len() * 2];
        let mut cursor = counts.clone();
        for (k, e) in self.edges.iter().enumerate() {
            adjacency[cursor[e.u as usize] as usize] = (e.v, k as u32);
            cursor[e.u as usize] += 1;
            adjacency[cursor[e.v as usize] as usize] = (e.u, k as u32);
            cursor[e.v as usize] += 1;
        }
        self.adjacency_offsets = counts;
        self.adjacency = adjacency;
    }

    /// Text dump: vertex list with coordinates, then edges with
    /// (u, v, weight, p, obs, round) plus the rate terms needed to
    /// recompute probabilities under reweighting. Round-trips via
    /// [`DecodingGraph::from_text`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "graph v1 detectors={} edges={} rates={}",
            self.detector_count,
            self.edges.len(),
            self.round_rates
                .iter()
                .map(|r| r.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        for (i, c) in self.coords.iter().enumerate() {
            let _ = writeln!(s, "vertex {i} ({},{},{})", c.x, c.y, c.layer);
        }
        for e in &self.edges {
            let v = if e.v == self.boundary() {
                "boundary".to_string()
            } else {
                e.v.to_string()
            };
            let terms = e
                .terms
                .iter()
                .map(|(r, m)| format!("{r}:{m}"))
                .collect::<Vec<_>>()
                .join(",");
            let _ = writeln!(
                s,
                "edge {} {} w={} p={} obs={} round={} terms={}",
                e.u,
                v,
                e.weight,
                e.probability,
                u8::from(e.observable),
                e.round,
                terms,
            );
        }
        s
    }

    /// Parse a graph dump produced by [`DecodingGraph::to_text`].
    pub fn from_text(text: &str) -> Result<DecodingGraph> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty dump".into()))?;
        let mut detector_count = None;
        let mut round_rates = Vec::new();
        for tok in header.split_whitespace().skip(2) {
            if let Some(v) = tok.strip_prefix("detectors=") {
                detector_count =
                    Some(v.parse::<u32>().map_err(|e| Error::Parse(e.to_string()))?);
            } else if let Some(v) = tok.strip_prefix("rates=") {
                if !v.is_empty() {
                    round_rates = v
                        .split(',')
                        .map(|r| r.parse::<f64>().map_err(|e| Error::Parse(e.to_string())))
                        .collect::<Result<Vec<_>>>()?;
                }
            }
        }
        let detector_count =
            detector_count.ok_or_else(|| Error::Parse("missing detectors= field".into()))?;
        let boundary = detector_count;

        let mut coords = vec![
            DetectorCoord { x: 0, y: 0, layer: 0 };
            detector_count as usize
        ];
        let mut edges = Vec::new();
        for line in lines {
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("vertex") => {
                    let idx: usize = parts
                        .next()
                        .ok_or_else(|| Error::Parse("vertex index".into()))?
                        .parse()
                        .map_err(|e: std::num::ParseIntError| Error::Parse(e.to_string()))?;
                    let c = parts
                        .next()
                        .ok_or_else(|| Error::Parse("vertex coord".into()))?;
                    let nums: Vec<u32> = c
                        .trim_matches(|ch| ch == '(' || ch == ')')
                        .split(',')
                        .map(|v| v.parse().map_err(|e: std::num::ParseIntError| {
                            Error::Parse(e.to_string())
                        }))
                        .collect::<Result<Vec<_>>>()?;
                    coords[idx] = DetectorCoord {
                        x: nums[0],
                        y: nums[1],
                        layer: nums[2],
                    };
                }
                Some("edge") => {
                    let u: u32 = parts
                        .next()
                        .ok_or_else(|| Error::Parse("edge u".into()))?
                        .parse()
                        .map_err(|e: std::num::ParseIntError| Error::Parse(e.to_string()))?;
                    let vtok = parts.next().ok_or_else(|| Error::Parse("edge v".into()))?;
                    let v = if vtok == "boundary" {
                        boundary
                    } else {
                        vtok.parse()
                            .map_err(|e: std::num::ParseIntError| Error::Parse(e.to_string()))?
                    };
                    let mut weight = 0.0;
                    let mut probability = 0.0;
                    let mut observable = false;
                    let mut round = 0;
                    let mut terms = Vec::new();
                    for tok in parts {
                        if let Some(val) = tok.strip_prefix("w=") {
                            weight = val.parse().map_err(|e: std::num::ParseFloatError| {
                                Error::Parse(e.to_string())
                            })?;
                        } else if let Some(val) = tok.strip_prefix("p=") {
                            probability =
                                val.parse().map_err(|e: std::num::ParseFloatError| {
                                    Error::Parse(e.to_string())
                                })?;
                        } else if let Some(val) = tok.strip_prefix("obs=") {
                            observable = val == "1";
                        } else if let Some(val) = tok.strip_prefix("round=") {
                            round = val.parse().map_err(|e: std::num::ParseIntError| {
                                Error::Parse(e.to_string())
                            })?;
                        } else if let Some(val) = tok.strip_prefix("terms=") {
                            for t in val.split(',').filter(|t| !t.is_empty()) {
                                let (r, m) = t.split_once(':').ok_or_else(|| {
                                    Error::Parse(format!("bad term {t:?}"))
                                })?;
                                terms.push((
                                    r.parse().map_err(|e: std::num::ParseIntError| {
                                        Error::Parse(e.to_string())
                                    })?,
                                    m.parse().map_err(|e: std::num::ParseFloatError| {
                                        Error::Parse(e.to_string())
                                    })?,
                                ));
                            }
                        }
                    }
                    edges.push(GraphEdge {
                        u,
                        v,
                        probability,
                        weight,
                        iweight: (weight * WEIGHT_SCALE).round() as i64,
                        observable,
                        round,
                        terms,
                    });
                }
                _ => {}
            }
        }
        let mut g = DecodingGraph {
            detector_count,
            coords,
            edges,
            round_rates,
            adjacency_offsets: Vec::new(),
            adjacency: Vec::new(),
        };
        g.rebuild_adjacency();
        Ok(g)
    }
}

fn edge_weight(p: f64) -> f64 {
    ((1.0 - p) / p).ln()
}

/// Build the decoding graph from a detector error model.
///
/// One-detector mechanisms become boundary edges, two-detector mechanisms
/// connect their detectors. Zero-probability mechanisms are dropped rather
/// than given infinite weight. Mechanisms with zero or more than two
/// detectors are rejected.
pub fn build_graph(dem: &DetectorErrorModel) -> Result<DecodingGraph> {
    let boundary = dem.detector_count;
    let mut edges = Vec::with_capacity(dem.mechanisms.len());
    for m in &dem.mechanisms {
        let (u, v) = match m.detectors.len() {
            1 => (m.detectors[0], boundary),
            2 => (m.detectors[0], m.detectors[1]),
            n => return Err(Error::NonGraphlikeMechanism { count: n }),
        };
        if m.probability == 0.0 {
            continue;
        }
        let weight = edge_weight(m.probability);
        edges.push(GraphEdge {
            u,
            v,
            probability: m.probability,
            weight,
            iweight: (weight * WEIGHT_SCALE).round() as i64,
            observable: m.flips_observable,
            round: m
                .provenance
                .iter()
                .map(|c| c.round)
                .min()
                .unwrap_or(0),
            terms: m.provenance.iter().map(|c| (c.round, c.multiplier)).collect(),
        });
    }
    let mut g = DecodingGraph {
        detector_count: dem.detector_count,
        coords: dem.detector_coords.clone(),
        edges,
        round_rates: dem.round_rates.clone(),
        adjacency_offsets: Vec::new(),
        adjacency: Vec::new(),
    };
    g.rebuild_adjacency();
    Ok(g)
}

/// Reweight a graph for a burst at `burst_round` with rate `p_b`: every
/// edge probability is recomputed from its rate terms with that round's
/// rate replaced, and weights updated accordingly. Edges outside the burst
/// round are unchanged.
pub fn reweight_burst(graph: &DecodingGraph, burst_round: u32, p_b: f64) -> Result<DecodingGraph> {
    if !(0.0..0.5).contains(&p_b) || !p_b.is_finite() {
        return Err(Error::InvalidProbability {
            name: "p_b",
            value: p_b,
        });
    }
    let rounds = graph.round_rates.len() as u32;
    if burst_round >= rounds {
        return Err(Error::BurstRoundOutOfRange {
            round: burst_round,
            rounds,
        });
    }
    let mut rates = graph.round_rates.clone();
    rates[burst_round as usize] = p_b;

    let mut out = graph.clone();
    out.round_rates = rates.clone();
    for e in &mut out.edges {
        if e.terms.iter().all(|&(r, _)| {
            graph.round_rates[r as usize] == rates[r as usize]
        }) {
            continue;
        }
        let p = e.terms.iter().fold(0.0, |acc, &(r, mult)| {
            crate::fault::xor_probability(acc, rates[r as usize] * mult)
        });
        e.probability = p;
        e.weight = edge_weight(p);
        e.iweight = (e.weight * WEIGHT_SCALE).round() as i64;
    }
    Ok(out)
}
