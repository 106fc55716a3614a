//! Minimum-weight perfect matching decoding on the decoding graph.
//!
//! Defect pairing costs are shortest-path weights in the decoding graph
//! (Dijkstra; all weights non-negative), with one distinguished boundary
//! vertex. Matching a defect pair directly is profitable only when the pair
//! distance undercuts the sum of their boundary distances, so the problem
//! reduces to a maximum-weight matching over defects with edge profit
//! `db(u) + db(v) - d(u, v)`; unmatched defects pair with the boundary.
//! The blossom solver is exact on the supplied edges, and a dual-slack
//! certificate over every omitted profitable pair guarantees the result is
//! optimal for the complete graph; violated pairs are added and the
//! instance re-solved (rare in practice).
//!
//! Weights are quantized to integers at graph construction, so matching
//! optimality is exact, not approximate.

pub mod blossom;

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::graph::{DecodingGraph, WEIGHT_SCALE};
use crate::sampler::{ShotBatch, ShotRecord};

use blossom::MaxWeightMatching;

const UNREACHED: i64 = i64::MAX;
const NO_EDGE: u32 = u32::MAX;

/// Result of matching one shot's defects.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchingResult {
    /// Each defect appears in exactly one pair; `None` partners the
    /// boundary.
    pub pairs: Vec<(u32, Option<u32>)>,
    /// Total weight of all matched shortest paths.
    pub total_weight: f64,
    /// XOR of edge observable bits along all matched paths.
    pub predicted_observable: bool,
}

/// Logical error rate estimate with a Wilson 95% interval.
#[derive(Debug, Clone, PartialEq)]
pub struct LogicalErrorEstimate {
    pub failures: u64,
    pub shots: u64,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(failures: u64, shots: u64, z: f64) -> (f64, f64) {
    assert!(shots > 0);
    let n = shots as f64;
    let p = failures as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // Guard against last-ulp rounding excluding the point estimate itself.
    (
        (center - half).max(0.0).min(p),
        (center + half).min(1.0).max(p),
    )
}

impl LogicalErrorEstimate {
    /// Build an estimate from counts with a 95% Wilson interval.
    pub fn from_counts(failures: u64, shots: u64) -> LogicalErrorEstimate {
        let (lo, hi) = wilson_interval(failures, shots, 1.96);
        LogicalErrorEstimate {
            failures,
            shots,
            rate: failures as f64 / shots as f64,
            ci_low: lo,
            ci_high: hi,
        }
    }

    /// Standard error of the rate estimate.
    pub fn std_err(&self) -> f64 {
        let n = self.shots as f64;
        (self.rate * (1.0 - self.rate) / n).sqrt()
    }
}

/// Single-source shortest paths over the decoding graph.
///
/// Paths may end at the boundary vertex but never pass through it, so
/// defect-to-defect distances measure genuine correction chains.
fn dijkstra(
    graph: &DecodingGraph,
    source: u32,
    dist: &mut [i64],
    pred: &mut [u32],
    obs: &mut [bool],
) {
    dist.fill(UNREACHED);
    pred.fill(NO_EDGE);
    obs.fill(false);
    let boundary = graph.boundary();
    let mut heap: BinaryHeap<Reverse<(i64, u32)>> = BinaryHeap::new();
    dist[source as usize] = 0;
    heap.push(Reverse((0, source)));
    while let Some(Reverse((d, v))) = heap.pop() {
        if d > dist[v as usize] {
            continue;
        }
        if v == boundary {
            continue;
        }
        for &(w, e) in graph.neighbors(v) {
            let nd = d + graph.edges[e as usize].iweight;
            if nd < dist[w as usize] {
                dist[w as usize] = nd;
                pred[w as usize] = e;
                obs[w as usize] = obs[v as usize] ^ graph.edges[e as usize].observable;
                heap.push(Reverse((nd, w)));
            }
        }
    }
}

/// Pairwise shortest-path distances between defects and from each defect to
/// the boundary, with paths retrievable.
#[derive(Debug, Clone)]
pub struct DefectDistances {
    pub defects: Vec<u32>,
    k: usize,
    nv: usize,
    /// Full distance rows, one per defect, over every vertex.
    dist_rows: Vec<i64>,
    pred_rows: Vec<u32>,
    obs_rows: Vec<bool>,
    boundary: u32,
}

impl DefectDistances {
    /// Distance between defects `i` and `j` (indices into `defects`).
    pub fn between(&self, i: usize, j: usize) -> f64 {
        self.ibetween(i, j) as f64 / WEIGHT_SCALE
    }

    /// Distance from defect `i` to the boundary.
    pub fn to_boundary(&self, i: usize) -> f64 {
        self.ito_boundary(i) as f64 / WEIGHT_SCALE
    }

    /// Quantized (integer) pair distance, the exact unit the matching
    /// optimizes.
    pub fn between_quantized(&self, i: usize, j: usize) -> i64 {
        self.ibetween(i, j)
    }

    /// Quantized (integer) boundary distance.
    pub fn to_boundary_quantized(&self, i: usize) -> i64 {
        self.ito_boundary(i)
    }

    fn ibetween(&self, i: usize, j: usize) -> i64 {
        self.dist_rows[i * self.nv + self.defects[j] as usize]
    }

    fn ito_boundary(&self, i: usize) -> i64 {
        self.dist_rows[i * self.nv + self.boundary as usize]
    }

    fn obs_between(&self, i: usize, j: usize) -> bool {
        self.obs_rows[i * self.nv + self.defects[j] as usize]
    }

    fn obs_to_boundary(&self, i: usize) -> bool {
        self.obs_rows[i * self.nv + self.boundary as usize]
    }

    /// Edge indices of the shortest path from defect `i` to vertex `target`
    /// (pass the boundary vertex index for boundary paths).
    pub fn path(&self, graph: &DecodingGraph, i: usize, target: u32) -> Vec<u32> {
        let row = &self.pred_rows[i * self.nv..(i + 1) * self.nv];
        let mut path = Vec::new();
        let mut v = target;
        while v != self.defects[i] {
            let e = row[v as usize];
            assert!(e != NO_EDGE, "vertex {v} not reached from defect {i}");
            path.push(e);
            let edge = &graph.edges[e as usize];
            v = if edge.u == v { edge.v } else { edge.u };
        }
        path.reverse();
        path
    }
}

/// Compute exact shortest-path weights between all defect pairs and from
/// each defect to the boundary vertex.
pub fn defect_distances(graph: &DecodingGraph, defects: &[u32]) -> DefectDistances {
    let nv = graph.vertex_count();
    let k = defects.len();
    let mut dist_rows = vec![UNREACHED; k * nv];
    let mut pred_rows = vec![NO_EDGE; k * nv];
    let mut obs_rows = vec![false; k * nv];
    for (i, &d) in defects.iter().enumerate() {
        assert!((d as usize) < nv - 1, "defect {d} is not a detector vertex");
        dijkstra(
            graph,
            d,
            &mut dist_rows[i * nv..(i + 1) * nv],
            &mut pred_rows[i * nv..(i + 1) * nv],
            &mut obs_rows[i * nv..(i + 1) * nv],
        );
        assert!(
            dist_rows[i * nv + graph.boundary() as usize] != UNREACHED,
            "defect {d} disconnected from the boundary"
        );
    }
    DefectDistances {
        defects: defects.to_vec(),
        k,
        nv,
        dist_rows,
        pred_rows,
        obs_rows,
        boundary: graph.boundary(),
    }
}

/// Matching instance over defects in compact index space.
struct Instance<'a> {
    k: usize,
    dist: &'a [i64],
    bdist: &'a [i64],
    obs: &'a [bool],
    bobs: &'a [bool],
}

impl Instance<'_> {
    fn profit(&self, i: usize, j: usize) -> i64 {
        self.bdist[i] + self.bdist[j] - self.dist[i * self.k + j]
    }
}

/// Tuning knobs for the decoder.
#[derive(Debug, Clone, Copy)]
pub struct DecoderOptions {
    /// Nearest-neighbor candidate edges per defect before the exactness
    /// certificate kicks in; larger values trade speed for fewer re-solves.
    pub neighbor_cap: usize,
    /// Maximum detector count for which all-pairs distances are
    /// precomputed; larger graphs fall back to per-shot Dijkstra.
    pub apsp_limit: usize,
}

impl Default for DecoderOptions {
    fn default() -> Self {
        DecoderOptions {
            neighbor_cap: 12,
            apsp_limit: 10_000,
        }
    }
}

/// Solve the defect matching for an instance; returns the mate array.
///
/// Candidate edges start from nearest neighbors; after each solve, every
/// omitted profitable pair is checked against the dual certificate and any
/// violation is added before re-solving, so the final matching is exact for
/// the complete profit graph.
fn solve_instance(inst: &Instance<'_>, neighbor_cap: usize) -> Vec<Option<u32>> {
    let k = inst.k;
    let mut edges: Vec<(u32, u32, i64)> = Vec::new();
    let mut present = std::collections::HashSet::new();
    if k <= neighbor_cap + 1 {
        for i in 0..k {
            for j in i + 1..k {
                let p = inst.profit(i, j);
                if p > 0 {
                    edges.push((i as u32, j as u32, p));
                    present.insert((i as u32, j as u32));
                }
            }
        }
    } else {
        let mut nearest: Vec<(i64, u32)> = Vec::with_capacity(k);
        for i in 0..k {
            nearest.clear();
            for j in 0..k {
                if j != i {
                    nearest.push((inst.dist[i * k + j], j as u32));
                }
            }
            let cap = neighbor_cap.min(nearest.len());
            nearest.select_nth_unstable(cap - 1);
            for &(_, j) in &nearest[..cap] {
                let (a, b) = if (i as u32) < j { (i as u32, j) } else { (j, i as u32) };
                let p = inst.profit(a as usize, b as usize);
                if p > 0 && present.insert((a, b)) {
                    edges.push((a, b, p));
                }
            }
        }
    }

    loop {
        let mut solver = MaxWeightMatching::new(k, edges.clone());
        let mate = solver.solve();
        let mut violations = Vec::new();
        for i in 0..k {
            for j in i + 1..k {
                let p = inst.profit(i, j);
                if p <= 0 || present.contains(&(i as u32, j as u32)) {
                    continue;
                }
                if solver.pair_slack(i, j, p) < 0 {
                    violations.push((i as u32, j as u32, p));
                }
            }
        }
        if violations.is_empty() {
            return mate;
        }
        for &(i, j, _) in &violations {
            present.insert((i, j));
        }
        edges.extend(violations);
    }
}

/// Exact minimum-weight perfect matching of defects against each other and
/// the boundary. An odd defect count is made even by the boundary; every
/// defect appears in exactly one pair.
pub fn min_weight_matching(dd: &DefectDistances) -> MatchingResult {
    let k = dd.k;
    let mut dist = vec![0i64; k * k];
    let mut obs = vec![false; k * k];
    let mut bdist = vec![0i64; k];
    let mut bobs = vec![false; k];
    for i in 0..k {
        for j in 0..k {
            if i != j {
                dist[i * k + j] = dd.ibetween(i, j);
                obs[i * k + j] = dd.obs_between(i, j);
            }
        }
        bdist[i] = dd.ito_boundary(i);
        bobs[i] = dd.obs_to_boundary(i);
    }
    let inst = Instance {
        k,
        dist: &dist,
        bdist: &bdist,
        obs: &obs,
        bobs: &bobs,
    };
    let mate = solve_instance(&inst, usize::MAX.min(64));
    instance_result(&inst, &mate, &dd.defects)
}

fn instance_result(inst: &Instance<'_>, mate: &[Option<u32>], defects: &[u32]) -> MatchingResult {
    let mut pairs = Vec::new();
    let mut total: i64 = 0;
    let mut prediction = false;
    for i in 0..inst.k {
        match mate[i] {
            Some(j) if (j as usize) > i => {
                pairs.push((defects[i], Some(defects[j as usize])));
                total += inst.dist[i * inst.k + j as usize];
                prediction ^= inst.obs[i * inst.k + j as usize];
            }
            Some(_) => {}
            None => {
                pairs.push((defects[i], None));
                total += inst.bdist[i];
                prediction ^= inst.bobs[i];
            }
        }
    }
    MatchingResult {
        pairs,
        total_weight: total as f64 / WEIGHT_SCALE,
        predicted_observable: prediction,
    }
}

/// All-pairs shortest-path cache over the decodable component.
struct ApspCache {
    /// Compact row per detector id (u32::MAX if outside the component).
    row_of: Vec<u32>,
    dist: Vec<i64>,
    obs: Vec<bool>,
}

/// Reusable per-thread decode scratch buffers.
#[derive(Default)]
pub struct DecodeScratch {
    ids: Vec<u32>,
    rows: Vec<u32>,
    dist: Vec<i64>,
    obs: Vec<bool>,
    bdist: Vec<i64>,
    bobs: Vec<bool>,
    // Per-shot Dijkstra rows when no cache is available.
    full_dist: Vec<i64>,
    full_pred: Vec<u32>,
    full_obs: Vec<bool>,
}

/// Decoder for one decoding graph: precomputes shortest paths and relevance
/// and decodes shots by exact matching.
pub struct Decoder<'g> {
    graph: &'g DecodingGraph,
    /// Detectors in components that carry at least one observable-flipping
    /// edge; defects elsewhere cannot affect the prediction and are skipped.
    relevant: Vec<bool>,
    cache: Option<ApspCache>,
    opts: DecoderOptions,
}

fn relevant_detectors(graph: &DecodingGraph) -> Vec<bool> {
    let n = graph.detector_count as usize;
    let mut parent: Vec<u32> = (0..n as u32).collect();
    fn find(parent: &mut [u32], mut v: u32) -> u32 {
        while parent[v as usize] != v {
            parent[v as usize] = parent[parent[v as usize] as usize];
            v = parent[v as usize];
        }
        v
    }
    let boundary = graph.boundary();
    for e in &graph.edges {
        if e.u != boundary && e.v != boundary {
            let (a, b) = (find(&mut parent, e.u), find(&mut parent, e.v));
            if a != b {
                parent[a as usize] = b;
            }
        }
    }
    let mut marked = vec![false; n];
    for e in &graph.edges {
        if e.observable {
            if e.u != boundary {
                let r = find(&mut parent, e.u);
                marked[r as usize] = true;
            }
            if e.v != boundary {
                let r = find(&mut parent, e.v);
                marked[r as usize] = true;
            }
        }
    }
    (0..n as u32)
        .map(|v| marked[find(&mut parent, v) as usize])
        .collect()
}

impl<'g> Decoder<'g> {
    /// Build a decoder with default options.
    pub fn new(graph: &'g DecodingGraph) -> Decoder<'g> {
        Decoder::with_options(graph, DecoderOptions::default())
    }

    pub fn with_options(graph: &'g DecodingGraph, opts: DecoderOptions) -> Decoder<'g> {
        let relevant = relevant_detectors(graph);
        let nv = graph.vertex_count();
        let sources: Vec<u32> = (0..graph.detector_count)
            .filter(|&d| relevant[d as usize])
            .collect();
        let cache = if sources.len() <= opts.apsp_limit {
            let n = sources.len();
            let mut dist = vec![UNREACHED; n * nv];
            let mut obs = vec![false; n * nv];
            dist.par_chunks_mut(nv)
                .zip(obs.par_chunks_mut(nv))
                .enumerate()
                .for_each_init(
                    || vec![NO_EDGE; nv],
                    |pred, (i, (drow, orow))| {
                        dijkstra(graph, sources[i], drow, pred, orow);
                    },
                );
            let mut row_of = vec![u32::MAX; graph.detector_count as usize];
            for (i, &d) in sources.iter().enumerate() {
                row_of[d as usize] = i as u32;
            }
            Some(ApspCache { row_of, dist, obs })
        } else {
            None
        };
        Decoder {
            graph,
            relevant,
            cache,
            opts,
        }
    }

    /// Decode a defect list; returns (prediction, matching weight, pairs).
    pub fn decode_defects(
        &self,
        defects: &[u32],
        scratch: &mut DecodeScratch,
    ) -> (bool, f64, Vec<(u32, Option<u32>)>) {
        scratch.ids.clear();
        scratch.rows.clear();
        for &d in defects {
            if self.relevant[d as usize] {
                scratch.ids.push(d);
            }
        }
        let k = scratch.ids.len();
        if k == 0 {
            return (false, 0.0, Vec::new());
        }
        let nv = self.graph.vertex_count();
        let boundary = self.graph.boundary() as usize;

        scratch.dist.clear();
        scratch.dist.resize(k * k, 0);
        scratch.obs.clear();
        scratch.obs.resize(k * k, false);
        scratch.bdist.clear();
        scratch.bdist.resize(k, 0);
        scratch.bobs.clear();
        scratch.bobs.resize(k, false);

        match &self.cache {
            Some(cache) => {
                for (i, &d) in scratch.ids.iter().enumerate() {
                    let row = cache.row_of[d as usize] as usize;
                    let drow = &cache.dist[row * nv..(row + 1) * nv];
                    let orow = &cache.obs[row * nv..(row + 1) * nv];
                    for (j, &e) in scratch.ids.iter().enumerate() {
                        if i != j {
                            scratch.dist[i * k + j] = drow[e as usize];
                            scratch.obs[i * k + j] = orow[e as usize];
                        }
                    }
                    scratch.bdist[i] = drow[boundary];
                    scratch.bobs[i] = orow[boundary];
                }
            }
            None => {
                scratch.full_dist.resize(nv, UNREACHED);
                scratch.full_pred.resize(nv, NO_EDGE);
                scratch.full_obs.resize(nv, false);
                for i in 0..k {
                    dijkstra(
                        self.graph,
                        scratch.ids[i],
                        &mut scratch.full_dist,
                        &mut scratch.full_pred,
                        &mut scratch.full_obs,
                    );
                    for (j, &e) in scratch.ids.iter().enumerate() {
                        if i != j {
                            scratch.dist[i * k + j] = scratch.full_dist[e as usize];
                            scratch.obs[i * k + j] = scratch.full_obs[e as usize];
                        }
                    }
                    scratch.bdist[i] = scratch.full_dist[boundary];
                    scratch.bobs[i] = scratch.full_obs[boundary];
                }
            }
        }
        debug_assert!(scratch.bdist.iter().all(|&d| d != UNREACHED));

        let inst = Instance {
            k,
            dist: &scratch.dist,
            bdist: &scratch.bdist,
            obs: &scratch.obs,
            bobs: &scratch.bobs,
        };
        let mate = solve_instance(&inst, self.opts.neighbor_cap);
        let result = instance_result(&inst, &mate, &scratch.ids);
        (
            result.predicted_observable,
            result.total_weight,
            result.pairs,
        )
    }

    /// Decode one expanded shot record.
    pub fn decode_record(&self, shot: &ShotRecord, scratch: &mut DecodeScratch) -> bool {
        let defects: Vec<u32> = shot
            .detectors
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i as u32))
            .collect();
        self.decode_defects(&defects, scratch).0
    }
}

/// Decode one shot: defects are the set detector bits; the prediction is
/// the XOR of observable bits along all matched shortest paths.
///
/// Builds a throwaway decoder; use [`Decoder`] directly (or
/// [`logical_error_rate`]) to amortize preprocessing across shots.
pub fn decode_shot(graph: &DecodingGraph, shot: &ShotRecord) -> bool {
    let decoder = Decoder::with_options(
        graph,
        DecoderOptions {
            apsp_limit: 0,
            ..DecoderOptions::default()
        },
    );
    decoder.decode_record(shot, &mut DecodeScratch::default())
}

/// Per-shot decode summary row.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeRow {
    pub shot: usize,
    pub defect_count: usize,
    pub matching_weight: f64,
    pub prediction: bool,
    pub actual: bool,
    pub failure: bool,
}

/// Decode every shot of a batch in parallel, preserving shot order.
pub fn decode_batch(graph: &DecodingGraph, batch: &ShotBatch) -> Vec<DecodeRow> {
    let decoder = Decoder::new(graph);
    (0..batch.shots)
        .into_par_iter()
        .map_init(DecodeScratch::default, |scratch, shot| {
            let defects = batch.defects(shot);
            let (prediction, weight, _) = decoder.decode_defects(&defects, scratch);
            let actual = batch.observable(shot);
            DecodeRow {
                shot,
                defect_count: defects.len(),
                matching_weight: weight,
                prediction,
                actual,
                failure: prediction != actual,
            }
        })
        .collect()
}

/// Decode every shot and estimate the logical error rate with a Wilson 95%
/// interval.
pub fn logical_error_rate(graph: &DecodingGraph, batch: &ShotBatch) -> LogicalErrorEstimate {
    assert!(batch.shots > 0, "batch must be nonempty");
    let decoder = Decoder::new(graph);
    let failures: u64 = (0..batch.shots)
        .into_par_iter()
        .map_init(DecodeScratch::default, |scratch, shot| {
            let defects = batch.defects(shot);
            let (prediction, _, _) = decoder.decode_defects(&defects, scratch);
            u64::from(prediction != batch.observable(shot))
        })
        .sum();
    LogicalErrorEstimate::from_counts(failures, batch.shots as u64)
}
