//! Sweep orchestration: configuration, point hashing, resumable result
//! files, and the pipeline helpers shared by the command-line tools.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use burstcode::circuit::CircuitSpec;
use burstcode::code::{build_layout, build_memory_circuit};
use burstcode::error::{Error, Result};
use burstcode::fault::build_detector_error_model;
use burstcode::graph::{build_graph, DecodingGraph};
use burstcode::matching::logical_error_rate;
use burstcode::noise::{attach_noise, NoiseConfig, NoiseModel};
use burstcode::sampler::sample;

/// How many syndrome-extraction rounds each distance runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RoundsRule {
    /// Fixed round count for every distance.
    Fixed(u32),
    /// The memory-experiment default, `T = 2d`, written as `"2d"`.
    #[serde(with = "two_d_tag")]
    TwoD,
}

mod two_d_tag {
    pub fn serialize<S: serde::Serializer>(s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str("2d")
    }
    pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        let tag = <String as serde::Deserialize>::deserialize(d)?;
        if tag == "2d" {
            Ok(())
        } else {
            Err(serde::de::Error::custom(format!(
                "expected \"2d\" or an integer round count, got {tag:?}"
            )))
        }
    }
}

impl RoundsRule {
    pub fn rounds_for(&self, d: u32) -> u32 {
        match self {
            RoundsRule::Fixed(t) => *t,
            RoundsRule::TwoD => 2 * d,
        }
    }
}

/// Where the burst round sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BurstRule {
    /// Explicit round index.
    Round(u32),
    /// `"middle"` (round T/2, floored) or `"none"`.
    #[serde(with = "burst_tag")]
    Tagged(BurstTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BurstTag {
    Middle,
    None,
}

mod burst_tag {
    use super::BurstTag;
    pub fn serialize<S: serde::Serializer>(t: &BurstTag, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(match t {
            BurstTag::Middle => "middle",
            BurstTag::None => "none",
        })
    }
    pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<BurstTag, D::Error> {
        let tag = <String as serde::Deserialize>::deserialize(d)?;
        match tag.as_str() {
            "middle" => Ok(BurstTag::Middle),
            "none" => Ok(BurstTag::None),
            other => Err(serde::de::Error::custom(format!(
                "expected \"middle\", \"none\", or a round index, got {other:?}"
            ))),
        }
    }
}

impl BurstRule {
    pub const MIDDLE: BurstRule = BurstRule::Tagged(BurstTag::Middle);
    pub const NONE: BurstRule = BurstRule::Tagged(BurstTag::None);

    pub fn burst_round_for(&self, rounds: u32) -> Option<u32> {
        match self {
            BurstRule::Round(r) => Some(*r),
            BurstRule::Tagged(BurstTag::Middle) => Some(rounds / 2),
            BurstRule::Tagged(BurstTag::None) => None,
        }
    }
}

/// Full sweep specification.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: NoiseModel,
    pub distances: Vec<u32>,
    pub p: Vec<f64>,
    pub p_b: Vec<f64>,
    #[serde(default = "default_rounds")]
    pub rounds: RoundsRule,
    #[serde(default = "default_burst")]
    pub burst: BurstRule,
    pub shots: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub out_dir: PathBuf,
}

fn default_rounds() -> RoundsRule {
    RoundsRule::TwoD
}

fn default_burst() -> BurstRule {
    BurstRule::MIDDLE
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.distances.is_empty() || self.p.is_empty() || self.p_b.is_empty() {
            return Err(Error::InvalidConfig(
                "distances, p, and p_b lists must be nonempty".into(),
            ));
        }
        if self.shots == 0 {
            return Err(Error::InvalidConfig("shots must be >= 1".into()));
        }
        for &d in &self.distances {
            if d < 3 || d % 2 == 0 {
                return Err(Error::InvalidConfig(format!(
                    "distance {d} must be odd and >= 3"
                )));
            }
            let rounds = self.rounds.rounds_for(d);
            if rounds == 0 {
                return Err(Error::InvalidConfig("rounds must be >= 1".into()));
            }
            if let Some(b) = self.burst.burst_round_for(rounds) {
                if b >= rounds {
                    return Err(Error::InvalidConfig(format!(
                        "burst round {b} out of range for {rounds} rounds"
                    )));
                }
            }
        }
        for &v in self.p.iter().chain(self.p_b.iter()) {
            if !(0.0..0.5).contains(&v) {
                return Err(Error::InvalidConfig(format!(
                    "rate {v} outside [0, 0.5)"
                )));
            }
        }
        Ok(())
    }

    /// Points in deterministic order: distance-major, then p, then p_b.
    pub fn points(&self) -> Vec<PointSpec> {
        let mut out = Vec::new();
        for &d in &self.distances {
            let rounds = self.rounds.rounds_for(d);
            let burst_round = self.burst.burst_round_for(rounds);
            for &p in &self.p {
                for &p_b in &self.p_b {
                    out.push(PointSpec {
                        model: self.model,
                        d,
                        p,
                        p_b,
                        rounds,
                        burst_round,
                        shots: self.shots,
                        seed: self.seed,
                    });
                }
            }
        }
        out
    }
}

/// One sweep point, fully determining a sampled-and-decoded experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointSpec {
    pub model: NoiseModel,
    pub d: u32,
    pub p: f64,
    pub p_b: f64,
    pub rounds: u32,
    pub burst_round: Option<u32>,
    pub shots: u64,
    pub seed: u64,
}

pub fn fnv1a(data: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in data {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

impl PointSpec {
    /// Canonical key: field order is fixed here, so reordering config
    /// fields cannot change the hash.
    pub fn canonical(&self) -> String {
        format!(
            "model={};d={};p={};p_b={};rounds={};burst={};shots={};seed={}",
            self.model,
            self.d,
            self.p,
            self.p_b,
            self.rounds,
            self.burst_round.map_or("none".into(), |b| b.to_string()),
            self.shots,
            self.seed,
        )
    }

    pub fn config_hash(&self) -> u64 {
        fnv1a(self.canonical().as_bytes())
    }

    /// Per-point RNG seed, derived so distinct points draw independent
    /// streams while staying reproducible.
    pub fn point_seed(&self) -> u64 {
        self.seed ^ fnv1a(
            format!(
                "point;model={};d={};p={};p_b={};rounds={};burst={}",
                self.model,
                self.d,
                self.p,
                self.p_b,
                self.rounds,
                self.burst_round.map_or("none".into(), |b| b.to_string()),
            )
            .as_bytes(),
        )
    }

    pub fn noise_config(&self) -> NoiseConfig {
        NoiseConfig {
            model: self.model,
            p: self.p,
            p_b: self.p_b,
            burst_round: self.burst_round,
        }
    }

    /// Build the noisy circuit for this point.
    pub fn build_circuit(&self) -> Result<CircuitSpec> {
        let layout = build_layout(self.d)?;
        let circuit = build_memory_circuit(&layout, self.rounds)?;
        attach_noise(&circuit, &self.noise_config())
    }

    /// Build the decoding graph for this point.
    pub fn build_graph(&self) -> Result<DecodingGraph> {
        let noisy = self.build_circuit()?;
        build_graph(&build_detector_error_model(&noisy)?)
    }
}

/// One completed sweep point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRecord {
    pub config_hash: String,
    pub point: PointSpec,
    pub failures: u64,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

pub const RESULTS_HEADER: &str =
    "hash,model,d,p,p_b,rounds,burst_round,shots,seed,failures,rate,ci_low,ci_high";

impl ResultRecord {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.config_hash,
            self.point.model,
            self.point.d,
            self.point.p,
            self.point.p_b,
            self.point.rounds,
            self.point
                .burst_round
                .map_or("none".into(), |b| b.to_string()),
            self.point.shots,
            self.point.seed,
            self.failures,
            self.rate,
            self.ci_low,
            self.ci_high,
        )
    }
}

/// Parse a results CSV into sweep points for fitting.
pub fn parse_results_csv(text: &str) -> Result<Vec<burstcode::analysis::SweepPoint>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty results file".into()))?;
    if header != RESULTS_HEADER {
        return Err(Error::Parse(format!(
            "unexpected results header {header:?}"
        )));
    }
    let mut out = Vec::new();
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 13 {
            return Err(Error::Parse(format!("row {} has {} columns", ln + 2, cols.len())));
        }
        let parse_f = |s: &str| -> Result<f64> {
            s.parse().map_err(|e: std::num::ParseFloatError| Error::Parse(e.to_string()))
        };
        let parse_u = |s: &str| -> Result<u64> {
            s.parse().map_err(|e: std::num::ParseIntError| Error::Parse(e.to_string()))
        };
        out.push(burstcode::analysis::SweepPoint {
            d: parse_u(cols[2])? as u32,
            p: parse_f(cols[3])?,
            p_b: parse_f(cols[4])?,
            rounds: parse_u(cols[5])? as u32,
            shots: parse_u(cols[7])?,
            failures: parse_u(cols[9])?,
        });
    }
    Ok(out)
}

/// Sweep outcome summary.
#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub total_points: usize,
    pub computed: usize,
    pub skipped: usize,
    pub results_path: PathBuf,
    pub manifest_path: PathBuf,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    version: &'static str,
    config: &'a ExperimentConfig,
    completed_points: usize,
    wall_seconds: Vec<(String, f64)>,
}

/// Run the work inside a dedicated thread pool (`workers == 0` uses the
/// rayon default).
pub fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Run a sweep: for each point, build the circuit with its burst, sample,
/// decode, and append a result row. Completed points (matched by config
/// hash) are skipped, so interrupted sweeps resume without resampling; a
/// rerun of a complete sweep rewrites nothing.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepSummary> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out_dir)?;
    let results_path = cfg.out_dir.join("results.csv");
    let manifest_path = cfg.out_dir.join("manifest.json");

    let mut existing: HashSet<String> = HashSet::new();
    let mut need_header = true;
    if results_path.exists() {
        let text = fs::read_to_string(&results_path)?;
        for (i, line) in text.lines().enumerate() {
            if i == 0 {
                if line != RESULTS_HEADER {
                    return Err(Error::Parse(format!(
                        "existing results file has unexpected header {line:?}"
                    )));
                }
                need_header = false;
                continue;
            }
            if let Some(hash) = line.split(',').next() {
                existing.insert(hash.to_string());
            }
        }
    }

    let points = cfg.points();
    let mut computed = 0usize;
    let mut skipped = 0usize;
    let mut timings: Vec<(String, f64)> = Vec::new();
    let mut out_file: Option<fs::File> = None;
    for point in &points {
        let hash = format!("{:016x}", point.config_hash());
        if existing.contains(&hash) {
            skipped += 1;
            continue;
        }
        let start = Instant::now();
        let record = with_pool(cfg.workers, || run_point(point))??;
        timings.push((hash.clone(), start.elapsed().as_secs_f64()));
        // Open lazily and append, so reruns of complete sweeps touch nothing.
        let file = match out_file.as_mut() {
            Some(f) => f,
            None => {
                let mut f = fs::OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(&results_path)?;
                if need_header {
                    use std::io::Write;
                    writeln!(f, "{RESULTS_HEADER}")?;
                    need_header = false;
                }
                out_file.insert(f)
            }
        };
        {
            use std::io::Write;
            writeln!(file, "{}", record.to_csv_row())?;
            file.flush()?;
        }
        existing.insert(hash);
        computed += 1;
    }

    if computed > 0 {
        let manifest = Manifest {
            version: env!("CARGO_PKG_VERSION"),
            config: cfg,
            completed_points: existing.len(),
            wall_seconds: timings,
        };
        fs::write(
            &manifest_path,
            serde_json::to_string_pretty(&manifest).expect("manifest serialization"),
        )?;
    }

    Ok(SweepSummary {
        total_points: points.len(),
        computed,
        skipped,
        results_path,
        manifest_path,
    })
}

/// Sample and decode a single point.
pub fn run_point(point: &PointSpec) -> Result<ResultRecord> {
    let noisy = point.build_circuit()?;
    let graph = build_graph(&build_detector_error_model(&noisy)?)?;
    let batch = sample(&noisy, point.shots as usize, point.point_seed());
    let est = logical_error_rate(&graph, &batch);
    Ok(ResultRecord {
        config_hash: format!("{:016x}", point.config_hash()),
        point: *point,
        failures: est.failures,
        rate: est.rate,
        ci_low: est.ci_low,
        ci_high: est.ci_high,
    })
}

/// Default output directory: `$BURSTCODE_OUT` or `./burstcode-out`.
pub fn default_out_dir() -> PathBuf {
    std::env::var_os("BURSTCODE_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("burstcode-out"))
}

/// Load a TOML experiment configuration.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(dir: PathBuf) -> ExperimentConfig {
        ExperimentConfig {
            model: NoiseModel::Phenomenological,
            distances: vec![3],
            p: vec![0.02],
            p_b: vec![0.05, 0.08],
            rounds: RoundsRule::TwoD,
            burst: BurstRule::MIDDLE,
            shots: 200,
            seed: 7,
            workers: 1,
            out_dir: dir,
        }
    }

    #[test]
    fn config_hash_is_stable_and_field_order_free() {
        let p = PointSpec {
            model: NoiseModel::Phenomenological,
            d: 5,
            p: 0.02,
            p_b: 0.09,
            rounds: 10,
            burst_round: Some(5),
            shots: 1000,
            seed: 3,
        };
        assert_eq!(p.config_hash(), p.config_hash());
        let mut q = p;
        q.p_b = 0.091;
        assert_ne!(p.config_hash(), q.config_hash());
    }

    #[test]
    fn sweep_rejects_bad_configs() {
        let mut cfg = small_config(std::env::temp_dir());
        cfg.shots = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = small_config(std::env::temp_dir());
        cfg.distances = vec![4];
        assert!(cfg.validate().is_err());
        let mut cfg = small_config(std::env::temp_dir());
        cfg.p = vec![0.6];
        assert!(cfg.validate().is_err());
        let mut cfg = small_config(std::env::temp_dir());
        cfg.burst = BurstRule::Round(99);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn toml_round_trip_with_rule_tags() {
        let text = r#"
model = "phenomenological"
distances = [3, 5]
p = [0.02]
p_b = [0.07]
rounds = "2d"
burst = "middle"
shots = 100
seed = 1
"#;
        let cfg: ExperimentConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.rounds, RoundsRule::TwoD);
        assert_eq!(cfg.burst, BurstRule::MIDDLE);
        let text = r#"
model = "circuit_depolarizing"
distances = [3]
p = [0.001]
p_b = [0.01]
rounds = 20
burst = 11
shots = 100
"#;
        let cfg: ExperimentConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.rounds, RoundsRule::Fixed(20));
        assert_eq!(cfg.burst, BurstRule::Round(11));
        assert_eq!(cfg.seed, 0);
    }
}
