//! Command-line interface: simulate schedules, run the classifiers over
//! measured CSVs, profile design assets, and render plots.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::asset;
use crate::bti::{AnchorTargets, Environment, Model, ModelParams};
use crate::chart;
use crate::config::{RunConfig, RunManifest};
use crate::error::{Error, Result};
use crate::experiment;
use crate::recovery::{self, ScoreReport, SeriesInput};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_MODEL: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "pentimento",
    about = "Simulator of slow-aging data remanence on FPGA routes and its TDC measurement pipeline",
    version
)]
pub struct Cli {
    /// RNG seed; overrides the config value and PENTIMENTO_SEED.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run a configured schedule and write the measured series CSV.
    Simulate {
        /// TOML run configuration.
        config: PathBuf,
        /// Output directory (created if missing).
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Conditioning granularity override for named schedules.
        #[arg(long)]
        hours_per_step: Option<f64>,
    },
    /// Recover burned bits from a measured series CSV.
    Attack {
        /// Experiment CSV produced by `simulate`.
        csv: PathBuf,
        /// Classifier: burn-window trend (tm1) or recovery-window (tm2).
        #[arg(long)]
        mode: AttackMode,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Compute route-length statistics and remanence vulnerability for a
    /// design-asset inventory CSV.
    Profile {
        /// CSV with header asset_path,asset_type,length_ps.
        csv: PathBuf,
        /// Burn duration assumed for the vulnerability prediction.
        #[arg(long, default_value_t = 200.0)]
        burn_hours: f64,
        /// Environment for the prediction: lab or cloud.
        #[arg(long, default_value = "cloud")]
        regime: String,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Render a measured series CSV as an SVG line chart.
    Plot {
        csv: PathBuf,
        /// Output path; defaults to the CSV path with an .svg extension.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "delta ps vs hours")]
        title: String,
    },
    /// Refit the degradation constants to the anchor targets and print them.
    CalibrateModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AttackMode {
    Tm1,
    Tm2,
}

/// Seed precedence: CLI flag, then config value, then PENTIMENTO_SEED.
fn resolve_seed(flag: Option<u64>, config_seed: Option<u64>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Some(s) = config_seed {
        return Ok(s);
    }
    match std::env::var("PENTIMENTO_SEED") {
        Ok(v) => v
            .parse()
            .map_err(|_| Error::Data(format!("PENTIMENTO_SEED is not a u64: {v:?}"))),
        Err(_) => Ok(0),
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn cmd_simulate(
    config_path: &Path,
    out_dir: &Path,
    seed_flag: Option<u64>,
    hours_override: Option<f64>,
) -> Result<()> {
    let text = read_to_string(config_path)?;
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(h) = hours_override {
        cfg.hours_per_step = Some(h);
    }
    let seed = resolve_seed(seed_flag, cfg.seed)?;
    let env = cfg.environment()?;
    let routes = cfg.routes()?;
    let schedule = cfg.schedule()?;
    let burn = cfg.burn_vector(seed, routes.len())?;

    let result = experiment::run_schedule(&routes, &burn, &schedule, &env, seed)?;

    let csv_path = out_dir.join("experiment.csv");
    let mut buf = Vec::new();
    experiment::write_csv(&mut buf, &result)?;
    write_file(&csv_path, &buf)?;

    let manifest = RunManifest::new(
        text.as_bytes(),
        seed,
        result.total_hours,
        vec![csv_path.display().to_string()],
    );
    write_file(&out_dir.join("manifest.json"), manifest.to_json().as_bytes())?;

    println!(
        "simulated {} routes over {} h ({} measurements/route) -> {}",
        result.series.len(),
        result.total_hours,
        result.series.first().map_or(0, |s| s.points.len()),
        csv_path.display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct AttackSummary {
    mode: String,
    routes: usize,
    has_truth: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    score: Option<ScoreReport>,
}

pub fn cmd_attack(csv_path: &Path, mode: AttackMode, out_dir: &Path) -> Result<()> {
    let text = read_to_string(csv_path)?;
    let (series, has_truth) = experiment::read_csv(&text)?;
    let inputs: Vec<SeriesInput> = series.iter().map(SeriesInput::from).collect();
    let verdicts = match mode {
        AttackMode::Tm1 => recovery::classify_tm1(&inputs)?,
        AttackMode::Tm2 => recovery::classify_tm2(&inputs)?,
    };

    let mut buf = String::from("route_id,predicted,confidence\n");
    for v in &verdicts {
        buf.push_str(&format!(
            "{},{},{:.4}\n",
            v.route_id, v.predicted_bit as u8, v.confidence
        ));
    }
    let verdicts_path = out_dir.join("verdicts.csv");
    write_file(&verdicts_path, buf.as_bytes())?;

    let score = if has_truth {
        let lengths: Vec<f64> = series.iter().map(|s| s.length_ps).collect();
        let truth = experiment::BurnVector(series.iter().map(|s| s.burn_bit).collect());
        Some(recovery::score(&verdicts, &lengths, &truth)?)
    } else {
        None
    };
    let summary = AttackSummary {
        mode: format!("{mode:?}").to_lowercase(),
        routes: verdicts.len(),
        has_truth,
        score,
    };
    let summary_json =
        serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_file(&out_dir.join("summary.json"), summary_json.as_bytes())?;

    match &summary.score {
        Some(s) => println!(
            "{} routes classified, accuracy {:.4} -> {}",
            summary.routes,
            s.overall_accuracy,
            verdicts_path.display()
        ),
        None => println!(
            "{} routes classified (no ground truth column) -> {}",
            summary.routes,
            verdicts_path.display()
        ),
    }
    Ok(())
}

pub fn cmd_profile(
    csv_path: &Path,
    burn_hours: f64,
    regime: &str,
    out_dir: &Path,
) -> Result<()> {
    let env = match regime {
        "lab" => Environment::lab(),
        "cloud" => Environment::cloud(),
        other => {
            return Err(Error::Data(format!(
                "regime must be \"lab\" or \"cloud\", got {other:?}"
            )))
        }
    };
    let text = read_to_string(csv_path)?;
    let records = asset::read_asset_csv(&text)?;

    let stats: Result<Vec<_>> = records
        .iter()
        .map(|r| asset::compute_stats(r).map(|s| (r.clone(), s)))
        .collect();
    let mut stats_buf = Vec::new();
    asset::write_stats_csv(&mut stats_buf, &stats?)?;
    let stats_path = out_dir.join("asset_stats.csv");
    write_file(&stats_path, &stats_buf)?;

    let vuln: Result<Vec<_>> = records
        .iter()
        .map(|r| asset::vulnerability(r, burn_hours, &env))
        .collect();
    let mut vuln_buf = Vec::new();
    asset::write_vulnerability_csv(&mut vuln_buf, &vuln?)?;
    let vuln_path = out_dir.join("asset_vulnerability.csv");
    write_file(&vuln_path, &vuln_buf)?;

    println!(
        "profiled {} assets -> {}, {}",
        records.len(),
        stats_path.display(),
        vuln_path.display()
    );
    Ok(())
}

pub fn cmd_plot(csv_path: &Path, out: Option<&Path>, title: &str) -> Result<()> {
    let text = read_to_string(csv_path)?;
    let (series, has_truth) = experiment::read_csv(&text)?;
    let svg = chart::render_svg(&series, has_truth, title)?;
    let out_path: PathBuf = match out {
        Some(p) => p.to_path_buf(),
        None => csv_path.with_extension("svg"),
    };
    write_file(&out_path, svg.as_bytes())?;
    println!("plotted {} series -> {}", series.len(), out_path.display());
    Ok(())
}

pub fn cmd_calibrate_model() -> Result<()> {
    let targets = AnchorTargets::default();
    let params = ModelParams::calibrated(&targets);
    let model = Model::new(params.clone());
    println!("{params:#?}");
    let env = Environment::lab();
    let anchors = [(1000.0, 1.0, 2.0), (2000.0, 2.0, 3.0), (5000.0, 5.0, 6.0), (10000.0, 10.0, 11.0)];
    for (length, lo, hi) in anchors {
        let d = model.predicted_delta_ps(length, 200.0, &env);
        println!("{length:>7.0} ps route, 200 h lab burn -> {d:.3} ps (target [{lo}, {hi}])");
        if d < lo || d > hi {
            return Err(Error::Contract(format!(
                "calibrated model misses the {length} ps anchor: {d:.3} ps"
            )));
        }
    }
    Ok(())
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Data(_) | Error::Io(_) | Error::Schedule(_) | Error::InsufficientData(_) => {
            EXIT_DATA
        }
        Error::Calibration { .. } | Error::Measurement { .. } | Error::Contract(_) => EXIT_MODEL,
    }
}

/// Parse arguments and dispatch; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are not usage errors.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Simulate {
            config,
            out_dir,
            hours_per_step,
        } => cmd_simulate(config, out_dir, cli.seed, *hours_per_step),
        Command::Attack { csv, mode, out_dir } => cmd_attack(csv, *mode, out_dir),
        Command::Profile {
            csv,
            burn_hours,
            regime,
            out_dir,
        } => cmd_profile(csv, *burn_hours, regime, out_dir),
        Command::Plot { csv, out, title } => cmd_plot(csv, out.as_deref(), title),
        Command::CalibrateModel => cmd_calibrate_model(),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
