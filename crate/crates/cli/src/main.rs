//! Command-line driver: circuit generation, sampling, decoding, sweeps,
//! threshold fits, teraquop footprints, burst detection, and the detector
//! density diagnostic.

use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use burstcode::analysis::{
    bootstrap_p_star, failure_per_cycle_qubit, fit_threshold, teraquop_footprint, LogLinearFit,
    SweptVariable,
};
use burstcode::burst::{select_panel, BurstTestModel, Decision};
use burstcode::error::Error;
use burstcode::matching::decode_batch;
use burstcode::noise::NoiseModel;
use burstcode::sampler::{detector_density, sample};
use burstcode_cli::{
    default_out_dir, load_config, parse_results_csv, run_sweep, with_pool, BurstRule,
    ExperimentConfig, PointSpec, RoundsRule,
};

#[derive(Parser)]
#[command(
    name = "burstcode",
    about = "Surface-code memory experiments with single-round error bursts",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Circuit and noise parameters shared by the single-point commands.
#[derive(Args, Debug)]
struct PointArgs {
    /// Code distance (odd, >= 3).
    #[arg(long, short = 'd')]
    distance: u32,
    /// Syndrome-extraction rounds; defaults to 2d.
    #[arg(long)]
    rounds: Option<u32>,
    /// Noise model: phenomenological | circuit_depolarizing.
    #[arg(long)]
    model: NoiseModel,
    /// Background error rate.
    #[arg(long)]
    p: f64,
    /// Burst error rate.
    #[arg(long, default_value_t = 0.0)]
    pb: f64,
    /// Burst round index; omit for no burst.
    #[arg(long)]
    burst_round: Option<u32>,
}

impl PointArgs {
    fn point(&self, shots: u64, seed: u64) -> PointSpec {
        let rounds = self.rounds.unwrap_or(2 * self.distance);
        PointSpec {
            model: self.model,
            d: self.distance,
            p: self.p,
            p_b: self.pb,
            rounds,
            burst_round: self.burst_round,
            shots,
            seed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Emit the (optionally noisy) memory-experiment circuit as text.
    GenerateCircuit {
        #[command(flatten)]
        point: PointArgs,
        /// Output file (stdout when omitted).
        #[arg(long, short = 'o')]
        out: Option<PathBuf>,
    },
    /// Sample detector data from the noisy circuit.
    Sample {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long)]
        shots: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Output format: binary | csv.
        #[arg(long, default_value = "binary")]
        format: String,
        #[arg(long, short = 'o')]
        out: PathBuf,
    },
    /// Sample and decode; prints a summary as JSON.
    Decode {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long)]
        shots: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Write per-shot decode rows as CSV to this path.
        #[arg(long)]
        per_shot: Option<PathBuf>,
    },
    /// Run a full sweep from a config file and/or flags.
    Sweep {
        /// TOML configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        model: Option<NoiseModel>,
        /// Comma-separated distances.
        #[arg(long, value_delimiter = ',')]
        distances: Vec<u32>,
        /// Comma-separated background rates.
        #[arg(long, value_delimiter = ',')]
        p: Vec<f64>,
        /// Comma-separated burst rates.
        #[arg(long, value_delimiter = ',')]
        pb: Vec<f64>,
        /// Rounds per distance: "2d" or an integer.
        #[arg(long)]
        rounds: Option<String>,
        /// Burst placement: "middle", "none", or a round index.
        #[arg(long)]
        burst: Option<String>,
        #[arg(long)]
        shots: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory (defaults to $BURSTCODE_OUT or ./burstcode-out).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Fit the threshold crossing from a sweep results CSV.
    FitThreshold {
        #[arg(long)]
        input: PathBuf,
        /// Which rate was swept: pb | p.
        #[arg(long, default_value = "pb")]
        swept: String,
        /// Restrict the fit to these distances.
        #[arg(long, value_delimiter = ',')]
        distances: Vec<u32>,
        /// Bootstrap resamples for the p* confidence interval (0 = skip).
        #[arg(long, default_value_t = 0)]
        bootstrap: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Teraquop footprint from log-linear fit parameters.
    Teraquop {
        /// Intercept of log10 q_d.
        #[arg(long)]
        c_background: f64,
        /// Slope of log10 q_d.
        #[arg(long)]
        m_background: f64,
        /// Intercept of log10 q_dB.
        #[arg(long)]
        c_burst: f64,
        /// Slope of log10 q_dB.
        #[arg(long)]
        m_burst: f64,
        /// Comma-separated mean cycles between bursts ("inf" allowed).
        #[arg(long, value_delimiter = ',')]
        tau: Vec<String>,
    },
    /// Per-round burst detection statistics as CSV.
    DetectBurst {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long)]
        shots: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report the log-likelihood ratio of one specific shot instead of
        /// aggregate statistics.
        #[arg(long)]
        shot: Option<usize>,
    },
    /// Per-round mean detector value as CSV.
    Density {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long)]
        shots: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let config_error = matches!(
                e,
                Error::InvalidConfig(_)
                    | Error::InvalidDistance(_)
                    | Error::InvalidRounds(_)
                    | Error::InvalidProbability { .. }
                    | Error::BurstRoundOutOfRange { .. }
                    | Error::ModelMismatch { .. }
                    | Error::InvalidTau(_)
            );
            ExitCode::from(if config_error { 1 } else { 2 })
        }
    }
}

fn write_or_print(out: Option<&PathBuf>, content: &str) -> Result<(), Error> {
    match out {
        Some(path) => fs::write(path, content).map_err(Error::from),
        None => {
            print!("{content}");
            std::io::stdout().flush().map_err(Error::from)
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::GenerateCircuit { point, out } => {
            let circuit = if point.p > 0.0 || point.pb > 0.0 || point.burst_round.is_some() {
                point.point(1, 0).build_circuit()?
            } else {
                let layout = burstcode::code::build_layout(point.distance)?;
                burstcode::code::build_memory_circuit(
                    &layout,
                    point.rounds.unwrap_or(2 * point.distance),
                )?
            };
            write_or_print(out.as_ref(), &circuit.to_text())
        }
        Command::Sample {
            point,
            shots,
            seed,
            workers,
            format,
            out,
        } => {
            if shots == 0 {
                return Err(Error::InvalidConfig("shots must be >= 1".into()));
            }
            let spec = point.point(shots, seed);
            let circuit = spec.build_circuit()?;
            let batch = with_pool(workers, || {
                sample(&circuit, shots as usize, spec.point_seed())
            })?;
            match format.as_str() {
                "binary" => fs::write(&out, batch.to_binary())?,
                "csv" => fs::write(&out, batch.to_csv())?,
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "unknown format {other:?} (use binary or csv)"
                    )))
                }
            }
            eprintln!(
                "wrote {} shots x {} detectors to {}",
                batch.shots,
                batch.detector_count,
                out.display()
            );
            Ok(())
        }
        Command::Decode {
            point,
            shots,
            seed,
            workers,
            per_shot,
        } => {
            if shots == 0 {
                return Err(Error::InvalidConfig("shots must be >= 1".into()));
            }
            let spec = point.point(shots, seed);
            let circuit = spec.build_circuit()?;
            let graph = spec.build_graph()?;
            let (est, rows) = with_pool(workers, || {
                let batch = sample(&circuit, shots as usize, spec.point_seed());
                let rows = per_shot.as_ref().map(|_| decode_batch(&graph, &batch));
                (burstcode::matching::logical_error_rate(&graph, &batch), rows)
            })?;
            if let (Some(path), Some(rows)) = (per_shot.as_ref(), rows) {
                let mut csv =
                    String::from("shot,defect_count,matching_weight,prediction,actual,failure\n");
                for r in rows {
                    csv.push_str(&format!(
                        "{},{},{},{},{},{}\n",
                        r.shot,
                        r.defect_count,
                        r.matching_weight,
                        u8::from(r.prediction),
                        u8::from(r.actual),
                        u8::from(r.failure)
                    ));
                }
                fs::write(path, csv)?;
            }
            let summary = serde_json::json!({
                "shots": est.shots,
                "failures": est.failures,
                "rate": est.rate,
                "ci_low": est.ci_low,
                "ci_high": est.ci_high,
            });
            println!("{}", serde_json::to_string_pretty(&summary).unwrap());
            Ok(())
        }
        Command::Sweep {
            config,
            model,
            distances,
            p,
            pb,
            rounds,
            burst,
            shots,
            seed,
            workers,
            out_dir,
        } => {
            let mut cfg = match config {
                Some(path) => load_config(&path)?,
                None => ExperimentConfig {
                    model: model.ok_or_else(|| {
                        Error::InvalidConfig("--model required without --config".into())
                    })?,
                    distances: Vec::new(),
                    p: Vec::new(),
                    p_b: Vec::new(),
                    rounds: RoundsRule::TwoD,
                    burst: BurstRule::MIDDLE,
                    shots: 0,
                    seed: 0,
                    workers: 0,
                    out_dir: PathBuf::new(),
                },
            };
            if let Some(m) = model {
                cfg.model = m;
            }
            if !distances.is_empty() {
                cfg.distances = distances;
            }
            if !p.is_empty() {
                cfg.p = p;
            }
            if !pb.is_empty() {
                cfg.p_b = pb;
            }
            if let Some(r) = rounds {
                cfg.rounds = if r == "2d" {
                    RoundsRule::TwoD
                } else {
                    RoundsRule::Fixed(r.parse().map_err(|_| {
                        Error::InvalidConfig(format!("bad rounds value {r:?}"))
                    })?)
                };
            }
            if let Some(b) = burst {
                cfg.burst = match b.as_str() {
                    "middle" => BurstRule::MIDDLE,
                    "none" => BurstRule::NONE,
                    other => BurstRule::Round(other.parse().map_err(|_| {
                        Error::InvalidConfig(format!("bad burst value {other:?}"))
                    })?),
                };
            }
            if let Some(s) = shots {
                cfg.shots = s;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            if let Some(dir) = out_dir {
                cfg.out_dir = dir;
            } else if cfg.out_dir.as_os_str().is_empty() {
                cfg.out_dir = default_out_dir();
            }
            let summary = run_sweep(&cfg)?;
            eprintln!(
                "sweep complete: {} points ({} computed, {} resumed), results in {}",
                summary.total_points,
                summary.computed,
                summary.skipped,
                summary.results_path.display()
            );
            Ok(())
        }
        Command::FitThreshold {
            input,
            swept,
            distances,
            bootstrap,
            seed,
        } => {
            let swept = match swept.as_str() {
                "pb" | "p_b" => SweptVariable::BurstRate,
                "p" => SweptVariable::BackgroundRate,
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "unknown swept variable {other:?} (use pb or p)"
                    )))
                }
            };
            let mut points = parse_results_csv(&fs::read_to_string(&input)?)?;
            if !distances.is_empty() {
                points.retain(|pt| distances.contains(&pt.d));
            }
            let fit = fit_threshold(&points, swept)?;
            let bootstrap_ci = if bootstrap > 0 {
                let (lo, hi) = bootstrap_p_star(&points, swept, bootstrap, seed)?;
                Some(serde_json::json!({ "p_star_low": lo, "p_star_high": hi }))
            } else {
                None
            };
            let report = serde_json::json!({
                "fit": fit,
                "n_points": points.len(),
                "bootstrap": bootstrap_ci,
            });
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
            Ok(())
        }
        Command::Teraquop {
            c_background,
            m_background,
            c_burst,
            m_burst,
            tau,
        } => {
            let background = LogLinearFit {
                c: c_background,
                m: m_background,
                c_err: 0.0,
                m_err: 0.0,
            };
            let burst = LogLinearFit {
                c: c_burst,
                m: m_burst,
                c_err: 0.0,
                m_err: 0.0,
            };
            println!("tau,d_min,footprint,p_l_at_d_min");
            for t in tau {
                let value = if t == "inf" {
                    f64::INFINITY
                } else {
                    t.parse().map_err(|_| {
                        Error::InvalidConfig(format!("bad tau value {t:?}"))
                    })?
                };
                let r = teraquop_footprint(&background, &burst, value)?;
                let p_l = failure_per_cycle_qubit(
                    value,
                    background.rate_at(r.d_min),
                    burst.rate_at(r.d_min),
                )?;
                println!("{t},{},{},{}", r.d_min, r.footprint, p_l);
            }
            Ok(())
        }
        Command::DetectBurst {
            point,
            shots,
            seed,
            shot,
        } => {
            if shots == 0 {
                return Err(Error::InvalidConfig("shots must be >= 1".into()));
            }
            let spec = point.point(shots, seed);
            let circuit = spec.build_circuit()?;
            let graph = spec.build_graph()?;
            let batch = sample(&circuit, shots as usize, spec.point_seed());
            let layers = 0..=circuit.rounds;
            match shot {
                Some(s) => {
                    if s >= batch.shots {
                        return Err(Error::InvalidConfig(format!(
                            "shot {s} out of range (batch has {})",
                            batch.shots
                        )));
                    }
                    println!("round,n,w,weight,ratio,llr,decision,bound_fp,bound_fn");
                    for layer in layers {
                        let Ok(panel) = select_panel(&graph, layer) else {
                            continue;
                        };
                        let model =
                            BurstTestModel::new(spec.p, spec.p_b, panel.n(), panel.w)?;
                        let weight = panel.weight(&batch, s);
                        let llr = burstcode::burst::log_likelihood_ratio(
                            weight,
                            panel.n(),
                            model.p1,
                            model.p2,
                        );
                        let decision = burstcode::burst::ml_estimate_weight(
                            weight,
                            panel.n(),
                            model.p1,
                            model.p2,
                        );
                        println!(
                            "{layer},{},{},{weight},{},{llr},{},{},{}",
                            panel.n(),
                            panel.w,
                            weight as f64 / panel.n() as f64,
                            match decision {
                                Decision::Burst => "burst",
                                Decision::Background => "background",
                            },
                            model.bound_false_pos,
                            model.bound_false_neg,
                        );
                    }
                }
                None => {
                    println!("round,n,w,mean_ratio,burst_fraction,bound_fp,bound_fn");
                    for layer in layers {
                        let Ok(panel) = select_panel(&graph, layer) else {
                            continue;
                        };
                        let model =
                            BurstTestModel::new(spec.p, spec.p_b, panel.n(), panel.w)?;
                        let mut total_weight = 0usize;
                        let mut burst_count = 0usize;
                        for s in 0..batch.shots {
                            let weight = panel.weight(&batch, s);
                            total_weight += weight;
                            if burstcode::burst::ml_estimate_weight(
                                weight,
                                panel.n(),
                                model.p1,
                                model.p2,
                            ) == Decision::Burst
                            {
                                burst_count += 1;
                            }
                        }
                        println!(
                            "{layer},{},{},{},{},{},{}",
                            panel.n(),
                            panel.w,
                            total_weight as f64 / (panel.n() * batch.shots) as f64,
                            burst_count as f64 / batch.shots as f64,
                            model.bound_false_pos,
                            model.bound_false_neg,
                        );
                    }
                }
            }
            Ok(())
        }
        Command::Density {
            point,
            shots,
            seed,
            workers,
        } => {
            if shots == 0 {
                return Err(Error::InvalidConfig("shots must be >= 1".into()));
            }
            let spec = point.point(shots, seed);
            let circuit = spec.build_circuit()?;
            let batch = with_pool(workers, || {
                sample(&circuit, shots as usize, spec.point_seed())
            })?;
            let coords: Vec<_> = circuit.detectors.iter().map(|d| d.coord).collect();
            let density = detector_density(&batch, &coords);
            println!("round,mean_detector_value");
            for (layer, value) in density.iter().enumerate() {
                println!("{layer},{value}");
            }
            Ok(())
        }
    }
}
