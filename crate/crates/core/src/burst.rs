//! Burst detection from syndrome statistics: decide whether one round's
//! panel of detectors was drawn at the background rate or the burst rate,
//! with maximum-likelihood estimation and Chernoff/KL error bounds.

use crate::error::{Error, Result};
use crate::graph::DecodingGraph;
use crate::sampler::ShotBatch;

/// Pairwise non-adjacent detectors in one time slice, all with the same
/// number `w` of incident fault locations (boundary edges included).
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorPanel {
    pub round: u32,
    /// Detector indices of the panel, ascending.
    pub vertices: Vec<u32>,
    /// Incident fault locations per vertex.
    pub w: usize,
}

impl DetectorPanel {
    pub fn n(&self) -> usize {
        self.vertices.len()
    }

    /// Hamming weight of one shot's syndrome restricted to the panel.
    pub fn weight(&self, batch: &ShotBatch, shot: usize) -> usize {
        self.vertices
            .iter()
            .filter(|&&v| batch.detector(shot, v))
            .count()
    }
}

/// Two-hypothesis test model for one panel.
#[derive(Debug, Clone, PartialEq)]
pub struct BurstTestModel {
    pub p: f64,
    pub p_b: f64,
    /// Marginal odd-parity probability per vertex at the background rate.
    pub p1: f64,
    /// Marginal odd-parity probability per vertex at the burst rate.
    pub p2: f64,
    /// Decision point: burst is declared when |x|/n exceeds alpha.
    pub alpha: f64,
    pub bound_false_pos: f64,
    pub bound_false_neg: f64,
}

impl BurstTestModel {
    /// Build the model for a panel of size `n` and degree `w`.
    pub fn new(p: f64, p_b: f64, n: usize, w: usize) -> Result<BurstTestModel> {
        let p1 = odd_parity_prob(p, w);
        let p2 = odd_parity_prob(p_b, w);
        let alpha = decision_point(p1, p2)?;
        let (fp, fn_) = error_bounds(n, p1, p2)?;
        Ok(BurstTestModel {
            p,
            p_b,
            p1,
            p2,
            alpha,
            bound_false_pos: fp,
            bound_false_neg: fn_,
        })
    }
}

/// ML decision for one panel observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Background,
    Burst,
}

/// Probability that an odd number of `w` independent rate-`p` faults occur:
/// the binomial odd-weight sum, evaluated in closed form
/// `(1 - (1 - 2p)^w) / 2`.
pub fn odd_parity_prob(p: f64, w: usize) -> f64 {
    assert!((0.0..0.5).contains(&p), "rate must lie in [0, 1/2)");
    assert!(w >= 1);
    (1.0 - (1.0 - 2.0 * p).powi(w as i32)) / 2.0
}

/// Decision point `alpha` of the likelihood-ratio test between per-vertex
/// flip rates `p1 < p2`, guaranteed to lie strictly inside `(p1, p2)`.
///
/// Written in `ln_1p` form so the ratio stays accurate as `p2 - p1`
/// shrinks (finite down to separations of 1e-9 and below).
pub fn decision_point(p1: f64, p2: f64) -> Result<f64> {
    if !(p1 > 0.0 && p2 < 1.0 && p1 < p2) {
        return Err(Error::DegenerateHypotheses);
    }
    let delta = p2 - p1;
    // log((1-p2)/(1-p1)) and log(p1(1-p2)/(p2(1-p1))).
    let num = (-delta / (1.0 - p1)).ln_1p();
    let den = (-delta / p2).ln_1p() + num;
    let alpha = num / den;
    assert!(
        alpha > p1 && alpha < p2,
        "decision point {alpha} outside ({p1}, {p2})"
    );
    Ok(alpha)
}

/// Log-likelihood ratio of background over burst for Hamming weight `x`
/// out of `n` panel bits.
pub fn log_likelihood_ratio(x: usize, n: usize, p1: f64, p2: f64) -> f64 {
    let x = x as f64;
    let n = n as f64;
    x * (p1 / p2).ln() + (n - x) * ((1.0 - p1) / (1.0 - p2)).ln()
}

/// Maximum-likelihood estimate from panel syndrome bits: burst when the
/// log-likelihood ratio is negative, equivalently when `|x|/n > alpha`.
pub fn ml_estimate(x: &[bool], p1: f64, p2: f64) -> Decision {
    let weight = x.iter().filter(|&&b| b).count();
    ml_estimate_weight(weight, x.len(), p1, p2)
}

/// ML estimate from the sufficient statistic `|x|`.
pub fn ml_estimate_weight(weight: usize, n: usize, p1: f64, p2: f64) -> Decision {
    if log_likelihood_ratio(weight, n, p1, p2) < 0.0 {
        Decision::Burst
    } else {
        Decision::Background
    }
}

/// Bernoulli Kullback-Leibler divergence D(a || b).
pub fn kl_bernoulli(a: f64, b: f64) -> f64 {
    let term = |x: f64, y: f64| if x == 0.0 { 0.0 } else { x * (x / y).ln() };
    term(a, b) + term(1.0 - a, 1.0 - b)
}

/// Chernoff bounds on the false-positive and false-negative probabilities:
/// `exp(-n D(alpha || p1))` and `exp(-n D(alpha || p2))`.
pub fn error_bounds(n: usize, p1: f64, p2: f64) -> Result<(f64, f64)> {
    assert!(n >= 1);
    let alpha = decision_point(p1, p2)?;
    Ok((
        (-(n as f64) * kl_bernoulli(alpha, p1)).exp(),
        (-(n as f64) * kl_bernoulli(alpha, p2)).exp(),
    ))
}

/// Select a detector panel for one round: a greedy maximal independent set
/// (ascending detector index) over the round's time slice, restricted to
/// vertices of the slice's most common degree so that `w` is well defined.
/// Boundary edges count toward the degree.
pub fn select_panel(graph: &DecodingGraph, round: u32) -> Result<DetectorPanel> {
    let slice: Vec<u32> = (0..graph.detector_count)
        .filter(|&d| graph.coords[d as usize].layer == round)
        .collect();
    if slice.is_empty() {
        return Err(Error::EmptyPanel(round));
    }
    // Most common incident-edge count over the slice.
    let mut degree_counts: std::collections::BTreeMap<usize, usize> =
        std::collections::BTreeMap::new();
    for &v in &slice {
        *degree_counts.entry(graph.degree(v)).or_default() += 1;
    }
    let w = degree_counts
        .iter()
        .max_by_key(|&(deg, count)| (*count, std::cmp::Reverse(*deg)))
        .map(|(&deg, _)| deg)
        .unwrap();

    let in_slice: std::collections::HashSet<u32> = slice
        .iter()
        .copied()
        .filter(|&v| graph.degree(v) == w)
        .collect();
    let mut chosen = Vec::new();
    let mut blocked: std::collections::HashSet<u32> = std::collections::HashSet::new();
    for &v in &slice {
        if !in_slice.contains(&v) || blocked.contains(&v) {
            continue;
        }
        chosen.push(v);
        for &(nb, _) in graph.neighbors(v) {
            blocked.insert(nb);
        }
    }
    if chosen.is_empty() {
        return Err(Error::EmptyPanel(round));
    }
    Ok(DetectorPanel {
        round,
        vertices: chosen,
        w,
    })
}
