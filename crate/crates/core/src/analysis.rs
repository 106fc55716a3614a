//! Statistical post-processing: threshold fits in a scaled variable,
//! per-cycle failure extraction, log-linear extrapolation to large
//! distances, and the teraquop footprint.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::wilson_interval;

/// One Monte Carlo sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub d: u32,
    pub p: f64,
    pub p_b: f64,
    pub rounds: u32,
    pub shots: u64,
    pub failures: u64,
}

impl SweepPoint {
    /// Observed failure rate.
    pub fn rate(&self) -> f64 {
        self.failures as f64 / self.shots as f64
    }

    /// Standard error from the Wilson 95% interval (never zero).
    pub fn sigma(&self) -> f64 {
        let (lo, hi) = wilson_interval(self.failures, self.shots, 1.96);
        ((hi - lo) / 2.0 / 1.96).max(1e-12)
    }
}

/// Which rate a threshold sweep varied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweptVariable {
    BurstRate,
    BackgroundRate,
}

impl SweptVariable {
    fn value(self, pt: &SweepPoint) -> f64 {
        match self {
            SweptVariable::BurstRate => pt.p_b,
            SweptVariable::BackgroundRate => pt.p,
        }
    }
}

/// Quadratic scaled-variable threshold fit
/// `P_L = A + Bx + Cx^2`, `x = (v - v*) d^(1/nu0)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdFit {
    pub p_star: f64,
    pub nu0: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Standard errors of (p_star, nu0, a, b, c) from the Gauss-Newton
    /// parameter covariance, when the normal matrix is invertible.
    pub std_errs: Option<[f64; 5]>,
    pub chi2_per_dof: f64,
    pub swept: SweptVariable,
}

fn scaled_x(v: f64, d: u32, p_star: f64, nu0: f64) -> f64 {
    (v - p_star) * f64::from(d).powf(1.0 / nu0)
}

/// Weighted quadratic least squares in x; returns (a, b, c, chi2).
fn quad_fit(xs: &[f64], ys: &[f64], ws: &[f64]) -> Option<(f64, f64, f64, f64)> {
    // Normal equations for the basis (1, x, x^2).
    let mut m = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    for ((&x, &y), &w) in xs.iter().zip(ys).zip(ws) {
        let phi = [1.0, x, x * x];
        for r in 0..3 {
            for c in 0..3 {
                m[r][c] += w * phi[r] * phi[c];
            }
            rhs[r] += w * phi[r] * y;
        }
    }
    let coef = solve3(m, rhs)?;
    let chi2: f64 = xs
        .iter()
        .zip(ys)
        .zip(ws)
        .map(|((&x, &y), &w)| {
            let f = coef[0] + coef[1] * x + coef[2] * x * x;
            w * (f - y) * (f - y)
        })
        .sum();
    Some((coef[0], coef[1], coef[2], chi2))
}

fn solve3(mut m: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| {
            m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap()
        })?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        b.swap(col, pivot);
        for row in 0..3 {
            if row != col {
                let f = m[row][col] / m[col][col];
                for k in col..3 {
                    m[row][k] -= f * m[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    Some([b[0] / m[0][0], b[1] / m[1][1], b[2] / m[2][2]])
}

struct FitData {
    vs: Vec<f64>,
    ds: Vec<u32>,
    ys: Vec<f64>,
    ws: Vec<f64>,
}

fn chi2_at(data: &FitData, p_star: f64, nu0: f64) -> Option<(f64, f64, f64, f64)> {
    let xs: Vec<f64> = data
        .vs
        .iter()
        .zip(&data.ds)
        .map(|(&v, &d)| scaled_x(v, d, p_star, nu0))
        .collect();
    quad_fit(&xs, &data.ys, &data.ws).map(|(a, b, c, chi2)| (a, b, c, chi2))
}

/// Fit the threshold crossing by nonlinear least squares over
/// `(A, B, C, p_star, nu0)`.
///
/// The linear coefficients are profiled out exactly; the remaining
/// two-dimensional landscape over `(p_star, nu0)` is minimized by a coarse
/// grid followed by Nelder-Mead refinement. Points are sorted internally,
/// so the fit does not depend on input order.
pub fn fit_threshold(points: &[SweepPoint], swept: SweptVariable) -> Result<ThresholdFit> {
    let mut points: Vec<SweepPoint> = points.to_vec();
    points.sort_by(|a, b| {
        (a.d, swept.value(a))
            .partial_cmp(&(b.d, swept.value(b)))
            .unwrap()
    });
    let distances: std::collections::BTreeSet<u32> = points.iter().map(|p| p.d).collect();
    if distances.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "threshold fit needs >= 3 distances, got {}",
            distances.len()
        )));
    }
    let mut values: Vec<f64> = points.iter().map(|p| swept.value(p)).collect();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values.dedup();
    if values.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "threshold fit needs >= 4 swept values, got {}",
            values.len()
        )));
    }
    let (v_min, v_max) = (values[0], values[values.len() - 1]);

    let data = FitData {
        vs: points.iter().map(|p| swept.value(p)).collect(),
        ds: points.iter().map(|p| p.d).collect(),
        ys: points.iter().map(|p| p.rate()).collect(),
        ws: points.iter().map(|p| 1.0 / (p.sigma() * p.sigma())).collect(),
    };

    // Coarse grid over (p_star, nu0).
    let mut best = (f64::INFINITY, v_min, 1.0);
    for i in 0..41 {
        let p_star = v_min + (v_max - v_min) * i as f64 / 40.0;
        for j in 0..25 {
            let nu0 = 0.4 * (3.0f64 / 0.4).powf(j as f64 / 24.0);
            if let Some((_, _, _, chi2)) = chi2_at(&data, p_star, nu0) {
                if chi2 < best.0 {
                    best = (chi2, p_star, nu0);
                }
            }
        }
    }
    if !best.0.is_finite() {
        return Err(Error::FitFailed("no finite chi-square on the grid".into()));
    }

    // Nelder-Mead refinement in (p_star, ln nu0).
    let objective = |p_star: f64, lnnu: f64| -> f64 {
        let nu0 = lnnu.exp();
        if !(0.05..=20.0).contains(&nu0) {
            return f64::INFINITY;
        }
        chi2_at(&data, p_star, nu0).map_or(f64::INFINITY, |(_, _, _, c)| c)
    };
    let span = (v_max - v_min).max(1e-9);
    let mut simplex = [
        (best.1, best.2.ln()),
        (best.1 + 0.05 * span, best.2.ln()),
        (best.1, best.2.ln() + 0.1),
    ];
    let mut fvals = simplex.map(|(p, l)| objective(p, l));
    for _ in 0..300 {
        // Order the simplex.
        let mut idx = [0, 1, 2];
        idx.sort_by(|&i, &j| fvals[i].partial_cmp(&fvals[j]).unwrap());
        let (b, m, w) = (idx[0], idx[1], idx[2]);
        if (fvals[w] - fvals[b]).abs() <= 1e-12 * (1.0 + fvals[b].abs()) {
            break;
        }
        let centroid = (
            (simplex[b].0 + simplex[m].0) / 2.0,
            (simplex[b].1 + simplex[m].1) / 2.0,
        );
        let refl = (
            centroid.0 + (centroid.0 - simplex[w].0),
            centroid.1 + (centroid.1 - simplex[w].1),
        );
        let f_refl = objective(refl.0, refl.1);
        if f_refl < fvals[b] {
            let exp = (
                centroid.0 + 2.0 * (centroid.0 - simplex[w].0),
                centroid.1 + 2.0 * (centroid.1 - simplex[w].1),
            );
            let f_exp = objective(exp.0, exp.1);
            if f_exp < f_refl {
                simplex[w] = exp;
                fvals[w] = f_exp;
            } else {
                simplex[w] = refl;
                fvals[w] = f_refl;
            }
        } else if f_refl < fvals[m] {
            simplex[w] = refl;
            fvals[w] = f_refl;
        } else {
            let con = (
                centroid.0 + 0.5 * (simplex[w].0 - centroid.0),
                centroid.1 + 0.5 * (simplex[w].1 - centroid.1),
            );
            let f_con = objective(con.0, con.1);
            if f_con < fvals[w] {
                simplex[w] = con;
                fvals[w] = f_con;
            } else {
                for i in [m, w] {
                    simplex[i] = (
                        (simplex[i].0 + simplex[b].0) / 2.0,
                        (simplex[i].1 + simplex[b].1) / 2.0,
                    );
                    fvals[i] = objective(simplex[i].0, simplex[i].1);
                }
            }
        }
    }
    let mut idx = [0, 1, 2];
    idx.sort_by(|&i, &j| fvals[i].partial_cmp(&fvals[j]).unwrap());
    let (p_star, nu0) = (simplex[idx[0]].0, simplex[idx[0]].1.exp());
    let (a, b, c, chi2) = chi2_at(&data, p_star, nu0)
        .ok_or_else(|| Error::FitFailed("degenerate design matrix".into()))?;

    if !(v_min..=v_max).contains(&p_star) {
        return Err(Error::FitFailed(format!(
            "crossing {p_star} outside swept range [{v_min}, {v_max}]"
        )));
    }

    let dof = points.len().saturating_sub(5).max(1) as f64;
    let std_errs = parameter_std_errs(&data, [p_star, nu0, a, b, c]);
    Ok(ThresholdFit {
        p_star,
        nu0,
        a,
        b,
        c,
        std_errs,
        chi2_per_dof: chi2 / dof,
        swept,
    })
}

/// Gauss-Newton standard errors from the weighted Jacobian at the optimum.
fn parameter_std_errs(data: &FitData, theta: [f64; 5]) -> Option<[f64; 5]> {
    let n = data.vs.len();
    let model = |t: &[f64; 5], i: usize| -> f64 {
        let x = scaled_x(data.vs[i], data.ds[i], t[0], t[1]);
        t[2] + t[3] * x + t[4] * x * x
    };
    // Weighted Jacobian, numeric central differences.
    let mut jac = vec![[0.0f64; 5]; n];
    for (k, scale) in [
        (0usize, 1e-6_f64.max(theta[0].abs() * 1e-6)),
        (1, 1e-6_f64.max(theta[1].abs() * 1e-6)),
        (2, 1e-9_f64.max(theta[2].abs() * 1e-6)),
        (3, 1e-9_f64.max(theta[3].abs() * 1e-6)),
        (4, 1e-9_f64.max(theta[4].abs() * 1e-6)),
    ] {
        let mut plus = theta;
        plus[k] += scale;
        let mut minus = theta;
        minus[k] -= scale;
        for (i, row) in jac.iter_mut().enumerate() {
            let sw = data.ws[i].sqrt();
            row[k] = sw * (model(&plus, i) - model(&minus, i)) / (2.0 * scale);
        }
    }
    // Normal matrix J^T J.
    let mut m = [[0.0f64; 5]; 5];
    for row in &jac {
        for r in 0..5 {
            for c in 0..5 {
                m[r][c] += row[r] * row[c];
            }
        }
    }
    invert5(m).map(|inv| {
        let mut out = [0.0; 5];
        for (k, o) in out.iter_mut().enumerate() {
            *o = inv[k][k].max(0.0).sqrt();
        }
        out
    })
}

fn invert5(m: [[f64; 5]; 5]) -> Option<[[f64; 5]; 5]> {
    let mut a = m;
    let mut inv = [[0.0f64; 5]; 5];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for col in 0..5 {
        let pivot = (col..5).max_by(|&i, &j| {
            a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()
        })?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let f = a[col][col];
        for k in 0..5 {
            a[col][k] /= f;
            inv[col][k] /= f;
        }
        for row in 0..5 {
            if row != col {
                let f = a[row][col];
                for k in 0..5 {
                    a[row][k] -= f * a[col][k];
                    inv[row][k] -= f * inv[col][k];
                }
            }
        }
    }
    Some(inv)
}

/// Percentile bootstrap confidence interval for the fitted crossing:
/// failure counts are resampled binomially per point and the fit repeated.
pub fn bootstrap_p_star(
    points: &[SweepPoint],
    swept: SweptVariable,
    resamples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    assert!(resamples >= 10);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stars = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let resampled: Vec<SweepPoint> = points
            .iter()
            .map(|pt| {
                let mut failures = 0u64;
                // Binomial via inverse transform on the normal approximation
                // would bias small counts; draw exactly.
                let p = pt.rate();
                if pt.shots > 10_000 && pt.failures > 50 {
                    // Normal approximation is safe here and much faster.
                    let std = (pt.shots as f64 * p * (1.0 - p)).sqrt();
                    let u: f64 = rng.gen();
                    let v: f64 = rng.gen();
                    let z = (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos();
                    failures = ((pt.shots as f64 * p + std * z).round().max(0.0) as u64)
                        .min(pt.shots);
                } else {
                    for _ in 0..pt.shots {
                        if rng.gen::<f64>() < p {
                            failures += 1;
                        }
                    }
                }
                SweepPoint { failures, ..*pt }
            })
            .collect();
        if let Ok(fit) = fit_threshold(&resampled, swept) {
            stars.push(fit.p_star);
        }
    }
    if stars.len() < resamples / 2 {
        return Err(Error::FitFailed(
            "most bootstrap resamples failed to fit".into(),
        ));
    }
    stars.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo = stars[(stars.len() as f64 * 0.025) as usize];
    let hi = stars[((stars.len() as f64 * 0.975) as usize).min(stars.len() - 1)];
    Ok((lo, hi))
}

/// Background and burst-cycle failure rates extracted from memory
/// experiments A and B.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleRates {
    /// Background failure probability per logical cycle.
    pub q_d: f64,
    /// Failure probability of the logical cycle containing the burst.
    pub q_d_b: f64,
    /// Whether statistical noise drove a raw estimate negative and it was
    /// clamped to zero.
    pub clamped: bool,
}

/// Survival form of the experiment-A relation: `1 - 2 p_A = (1 - q_d)^D`.
///
/// The survival probability keeps full precision where `p_A` itself would
/// round to 1/2, so round-trip composition is done in this form.
pub fn memory_survival_a(q_d: f64, cycles: u32) -> f64 {
    (1.0 - q_d).powi(cycles as i32)
}

/// Survival form of the experiment-B relation:
/// `1 - 2 p_B = (1 - q_dB)(1 - q_d)^(D-1)`.
pub fn memory_survival_b(q_d_b: f64, q_d: f64, cycles: u32) -> f64 {
    (1.0 - q_d_b) * (1.0 - q_d).powi(cycles as i32 - 1)
}

/// Memory failure probability of experiment A given the per-cycle rate:
/// `2 p_A = 1 - (1 - q_d)^D`.
pub fn memory_failure_a(q_d: f64, cycles: u32) -> f64 {
    (1.0 - memory_survival_a(q_d, cycles)) / 2.0
}

/// Memory failure probability of experiment B given both rates:
/// `2 p_B = 1 - (1 - q_dB)(1 - q_d)^(D-1)`.
pub fn memory_failure_b(q_d_b: f64, q_d: f64, cycles: u32) -> f64 {
    (1.0 - memory_survival_b(q_d_b, q_d, cycles)) / 2.0
}

/// Invert the survival probabilities of experiments A and B into per-cycle
/// rates. `s_a = 1 - 2 p_A`, `s_b = 1 - 2 p_B`.
pub fn extract_cycle_rates_from_survival(s_a: f64, s_b: f64, cycles: u32) -> Result<CycleRates> {
    if cycles < 1 {
        return Err(Error::InvalidConfig("cycle count must be >= 1".into()));
    }
    for s in [s_a, s_b] {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::SaturatedFailureRate((1.0 - s) / 2.0));
        }
    }
    let q_d = 1.0 - s_a.powf(1.0 / f64::from(cycles));
    let raw = 1.0 - s_b / (1.0 - q_d).powi(cycles as i32 - 1);
    let clamped = raw < 0.0;
    Ok(CycleRates {
        q_d,
        q_d_b: raw.max(0.0),
        clamped,
    })
}

/// Invert the memory-experiment failure probabilities into per-cycle rates.
///
/// `p_a` and `p_b_expt` are the observed failure rates of memory
/// experiments A (no burst) and B (one burst) over `cycles` logical cycles.
pub fn extract_cycle_rates(p_a: f64, p_b_expt: f64, cycles: u32) -> Result<CycleRates> {
    for v in [p_a, p_b_expt] {
        if !(0.0..0.5).contains(&v) {
            return Err(Error::SaturatedFailureRate(v));
        }
    }
    extract_cycle_rates_from_survival(1.0 - 2.0 * p_a, 1.0 - 2.0 * p_b_expt, cycles)
}

/// Accept the largest-cycle estimate once consecutive estimates agree
/// within two combined standard errors. `series` holds
/// `(cycles, estimate, sigma)` in ascending cycle order.
pub fn plateau_value(series: &[(u32, f64, f64)]) -> Option<f64> {
    if series.len() < 2 {
        return None;
    }
    let last = series[series.len() - 1];
    let prev = series[series.len() - 2];
    let combined = (last.2 * last.2 + prev.2 * prev.2).sqrt();
    if (last.1 - prev.1).abs() < 2.0 * combined {
        Some(last.1)
    } else {
        None
    }
}

/// Weighted log-linear fit `log10 q = c + d * m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLinearFit {
    pub c: f64,
    pub m: f64,
    pub c_err: f64,
    pub m_err: f64,
}

impl LogLinearFit {
    /// Extrapolated failure rate at distance `d`.
    pub fn rate_at(&self, d: u32) -> f64 {
        10f64.powf(self.c + self.m * f64::from(d))
    }
}

/// Fit `log10 q` against distance by weighted least squares.
///
/// Points with `q = 0` carry no two-sided information (they are lower
/// bounds only) and are excluded; at least three usable distances must
/// remain. `sigma` is the standard error of `q` and is propagated to log
/// space.
pub fn fit_log_linear(points: &[(u32, f64, f64)]) -> Result<LogLinearFit> {
    let usable: Vec<(u32, f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(_, q, _)| q > 0.0)
        .collect();
    if usable.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "log-linear fit needs >= 3 nonzero points, got {}",
            usable.len()
        )));
    }
    let ln10 = std::f64::consts::LN_10;
    let mut s = 0.0;
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(d, q, sigma) in &usable {
        let x = f64::from(d);
        let y = q.log10();
        let sig_log = if sigma > 0.0 { sigma / (q * ln10) } else { 1e-9 };
        let w = 1.0 / (sig_log * sig_log);
        s += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let det = s * sxx - sx * sx;
    if det.abs() < 1e-300 {
        return Err(Error::FitFailed("degenerate log-linear design".into()));
    }
    let c = (sxx * sy - sx * sxy) / det;
    let m = (s * sxy - sx * sy) / det;
    Ok(LogLinearFit {
        c,
        m,
        c_err: (sxx / det).sqrt(),
        m_err: (s / det).sqrt(),
    })
}

/// Logical failure per logical cycle-qubit when bursts arrive every `tau`
/// cycles on average: `P_L = q_dB / tau + (1 - 1/tau) q_d`.
pub fn failure_per_cycle_qubit(tau: f64, q_d: f64, q_d_b: f64) -> Result<f64> {
    if !(tau >= 1.0) {
        return Err(Error::InvalidTau(tau));
    }
    let inv = if tau.is_infinite() { 0.0 } else { 1.0 / tau };
    Ok(inv * q_d_b + (1.0 - inv) * q_d)
}

/// Teraquop footprint: minimum odd distance reaching `P_L <= 1e-12` and the
/// corresponding physical qubit count `2 d^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TeraquopResult {
    pub tau: f64,
    pub d_min: u32,
    pub footprint: u64,
}

/// Target logical failure rate per cycle-qubit for a 10^12-operation
/// circuit (`W * D = 10^12`).
pub const TERAQUOP_TARGET: f64 = 1e-12;

/// Scan odd distances for the smallest footprint that reaches the teraquop
/// target under the fitted background and burst rates.
pub fn teraquop_footprint(
    background: &LogLinearFit,
    burst: &LogLinearFit,
    tau: f64,
) -> Result<TeraquopResult> {
    if !(tau >= 1.0) {
        return Err(Error::InvalidTau(tau));
    }
    let slope_bound = background.m.max(if tau.is_infinite() { f64::NEG_INFINITY } else { burst.m });
    if background.m >= 0.0 || (!tau.is_infinite() && burst.m >= 0.0) {
        return Err(Error::AboveThreshold(slope_bound));
    }
    let mut d = 3u32;
    loop {
        let p = failure_per_cycle_qubit(tau, background.rate_at(d), burst.rate_at(d))?;
        if p <= TERAQUOP_TARGET {
            return Ok(TeraquopResult {
                tau,
                d_min: d,
                footprint: 2 * u64::from(d) * u64::from(d),
            });
        }
        d += 2;
        if d > 2_000_001 {
            return Err(Error::FitFailed(
                "teraquop scan exceeded the distance guard".into(),
            ));
        }
    }
}
