use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use sparse_koopman::experiment::{
    fit_window, reference_spectrum, run_many, unknown_system_message, write_report, ExperimentConfig,
    SYSTEM_NAMES,
};
use sparse_koopman::io::{load_model, pairs_to_csv, save_model, trajectory_to_csv};
use sparse_koopman::predictor::{evaluate_prediction, predict, to_csv as prediction_csv};
use sparse_koopman::spectrum::{analyze, report_from_eigenvalues, spectrum_distance, to_csv as spectrum_csv};
use sparse_koopman::Error;

#[derive(Parser)]
#[command(name = "sparse-koopman", version, about = "Learn Koopman operators from sparse snapshot data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (JSON). Missing keys take the preset of its system.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset to use when no config file is given.
    #[arg(long, default_value = "oscillator_ring")]
    preset: String,
    /// Output directory; defaults to the config's output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured system and write trajectory.csv.
    Simulate(Common),
    /// Fit the plain and regularized models on the training window and write
    /// the enriched training pairs to pairs.csv.
    Fit(Common),
    /// Predict from a saved model.
    Predict {
        #[command(flatten)]
        common: Common,
        /// Model file; defaults to <out>/model_robust.json.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Initial state as comma-separated values; defaults to the state at
        /// the end of the training window, with the simulation as reference.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Eigenvalues of a saved model.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Number of dominant eigenvalues to report.
        #[arg(long)]
        modes: Option<usize>,
    },
    /// Run benchmark pipelines: one experiment name or `all`.
    Benchmark {
        name: String,
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(common: &Common, name: Option<&str>) -> Result<ExperimentConfig, Error> {
    let mut cfg = match (&common.config, name) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(name)) => ExperimentConfig::preset(name)?,
        (None, None) => ExperimentConfig::preset(&common.preset)?,
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(common: &Common, cfg: &ExperimentConfig) -> Result<PathBuf, Error> {
    let dir = common.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), Error> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

fn simulate(common: &Common) -> Result<(), Error> {
    let cfg = load_config(common, None)?;
    let dir = out_dir(common, &cfg)?;
    let traj = cfg.system.simulate()?;
    let path = dir.join("trajectory.csv");
    fs::write(&path, trajectory_to_csv(&traj, cfg.system.t0(), cfg.system.dt()))?;
    println!("wrote {} ({} snapshots, {} states)", path.display(), traj.ncols(), traj.nrows());
    Ok(())
}

fn fit(common: &Common) -> Result<(), Error> {
    let cfg = load_config(common, None)?;
    let dir = out_dir(common, &cfg)?;
    let traj = cfg.system.simulate()?;
    let fit = fit_window(&cfg, &traj.columns(0, cfg.train_steps).into_owned(), cfg.artificial_points)?;
    save_model(&fit.robust, &dir.join("model_robust.json"))?;
    fs::write(dir.join("pairs.csv"), pairs_to_csv(&fit.pairs))?;
    if cfg.compare {
        save_model(&fit.plain, &dir.join("model_plain.json"))?;
    }
    if !fit.sweep_models.is_empty() {
        let sweep = dir.join("sweep");
        fs::create_dir_all(&sweep)?;
        for (i, m) in fit.sweep_models.iter().enumerate() {
            save_model(m, &sweep.join(format!("model_{i:02}.json")))?;
        }
    }
    let diag = json!({
        "plain": { "rank": fit.plain.diagnostics.rank, "objective": fit.plain.diagnostics.objective },
        "robust": {
            "solver": fit.robust.solver,
            "lambda": fit.robust.lambda,
            "rank": fit.robust.diagnostics.rank,
            "objective": fit.robust.diagnostics.objective,
            "iterations": fit.robust.diagnostics.iterations,
            "converged": fit.robust.diagnostics.converged,
        },
        "pairs": fit.pairs.len(),
        "observed_pairs": fit.pairs.n_observed(),
        "radius_x": fit.radius_x,
        "radius_y": fit.radius_y,
        "samples_over_augmentation_budget": fit.over_budget,
        "sweep": fit.robust.sweep,
    });
    write_json(&dir.join("fit_diagnostics.json"), &diag)?;
    println!("fitted {} (lambda = {:e}) into {}", cfg.system.name(), fit.robust.lambda, dir.display());
    Ok(())
}

fn predict_cmd(common: &Common, model: &Option<PathBuf>, x0: &Option<Vec<f64>>, horizon: Option<usize>) -> Result<(), Error> {
    let cfg = load_config(common, None)?;
    let dir = out_dir(common, &cfg)?;
    let model_path = model.clone().unwrap_or_else(|| dir.join("model_robust.json"));
    let model = load_model(&model_path)?;
    let horizon = horizon.unwrap_or(cfg.predict_horizon);
    let dt = model.dt.unwrap_or(cfg.system.dt());
    let (result, t0) = match x0 {
        Some(x0) => (predict(&model, x0, horizon)?, 0.0),
        None => {
            let traj = cfg.system.simulate()?;
            let start = cfg.train_steps - 1;
            if start + horizon >= traj.ncols() {
                return Err(Error::Config(format!("horizon {horizon} runs past the simulated trajectory")));
            }
            let x0: Vec<f64> = traj.column(start).iter().cloned().collect();
            let p = predict(&model, &x0, horizon)?;
            let reference = traj.columns(start, p.predicted.ncols()).into_owned();
            (evaluate_prediction(&p, &reference)?, cfg.system.t0() + start as f64 * dt)
        }
    };
    if result.truncated {
        eprintln!("warning: prediction became non-finite after {} steps", result.steps());
    }
    let path = dir.join("prediction.csv");
    fs::write(&path, prediction_csv(&result, t0, dt))?;
    println!("wrote {} ({} rows)", path.display(), result.predicted.ncols());
    Ok(())
}

fn spectrum_cmd(common: &Common, model: &Option<PathBuf>, modes: Option<usize>) -> Result<(), Error> {
    let cfg = load_config(common, None)?;
    let dir = out_dir(common, &cfg)?;
    let model_path = model.clone().unwrap_or_else(|| dir.join("model_robust.json"));
    let model = load_model(&model_path)?;
    let m = modes.unwrap_or(cfg.spectrum_modes).min(model.dim());
    let report = analyze(&model, model.dt, m)?;
    fs::write(dir.join("spectrum.csv"), spectrum_csv(&report))?;
    println!("spectral radius {:.6}", report.spectral_radius);
    if model.dictionary == cfg.dictionary {
        if let Some(ev) = reference_spectrum(&cfg)? {
            let reference = report_from_eigenvalues(ev, model.dt, m)?;
            fs::write(dir.join("spectrum_reference.csv"), spectrum_csv(&reference))?;
            println!("distance to reference (top {m}): {:.6e}", spectrum_distance(&report, &reference, m)?);
        }
    }
    Ok(())
}

fn benchmark(name: &str, common: &Common) -> Result<(), Error> {
    let names: Vec<&str> = if name == "all" {
        SYSTEM_NAMES.to_vec()
    } else if SYSTEM_NAMES.contains(&name) {
        vec![name]
    } else {
        return Err(Error::Config(unknown_system_message(name)));
    };
    let mut configs = Vec::new();
    for n in &names {
        let mut cfg = match &common.config {
            Some(path) if names.len() == 1 => ExperimentConfig::load(path)?,
            _ => ExperimentConfig::preset(n)?,
        };
        if let Some(seed) = common.seed {
            cfg.seed = seed;
        }
        configs.push(cfg);
    }
    let root = common.out.clone();
    let mut failed = false;
    for (cfg, result) in configs.iter().zip(run_many(&configs)) {
        let dir = match &root {
            Some(r) => r.join(cfg.system.name()),
            None => cfg.output_dir.clone(),
        };
        match result {
            Ok(report) => {
                write_report(&report, &dir)?;
                for c in &report.checks {
                    println!("[{}] {} {}: {}", cfg.system.name(), if c.passed { "PASS" } else { "FAIL" }, c.name, c.measured);
                }
                println!("[{}] {:.2} s, outputs in {}", cfg.system.name(), report.seconds, dir.display());
            }
            Err(e) => {
                failed = true;
                eprintln!("[{}] error: {e}", cfg.system.name());
                fs::create_dir_all(&dir)?;
                write_json(&dir.join("summary.json"), &json!({ "experiment": cfg.system.name(), "error": e.to_string() }))?;
            }
        }
    }
    if failed {
        Err(Error::InvalidInput("one or more experiments failed".into()))
    } else {
        Ok(())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(c) => simulate(c),
        Command::Fit(c) => fit(c),
        Command::Predict { common, model, x0, horizon } => predict_cmd(common, model, x0, *horizon),
        Command::Spectrum { common, model, modes } => spectrum_cmd(common, model, *modes),
        Command::Benchmark { name, common } => benchmark(name, common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
