//! Experiment configuration and the benchmark pipelines.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dictionary::{DictionaryKind, DictionarySpec};
use crate::dynamics::{
    default_ring_initial_state, exact_oscillator_spectrum, simulate_burgers, simulate_oscillator_ring,
    simulate_stuart_landau, BurgersConfig, OscillatorRingConfig, StuartLandauConfig,
};
use crate::enrichment::{
    check_augmentation_budget, enrich_trajectory_points, trajectory_spread, EnrichmentConfig, SnapshotPairs,
    DEFAULT_RANK_TOL,
};
use crate::error::{invalid, Error, Result};
use crate::io::{save_model, table_to_csv, trajectory_to_csv};
use crate::linalg::C64;
use crate::predictor::{self, evaluate_prediction, fit_output_map, predict, PredictionResult};
use crate::solver::{
    assemble_gram_with, default_lambda_grid, edmd_solve, ridge_solve, robust_solve, sweep_lambda, EnrichmentRecord,
    KoopmanModel, PenaltyKind, RobustOptions, Transpose,
};
use crate::spectrum::{self, analyze, report_from_eigenvalues, spectrum_distance, SpectrumReport};

pub const SYSTEM_NAMES: [&str; 3] = ["oscillator_ring", "stuart_landau", "burgers"];

#[derive(Clone, Debug, PartialEq)]
pub enum SystemConfig {
    OscillatorRing(OscillatorRingConfig),
    StuartLandau(StuartLandauConfig),
    Burgers(BurgersConfig),
}

impl SystemConfig {
    pub fn name(&self) -> &'static str {
        match self {
            SystemConfig::OscillatorRing(_) => "oscillator_ring",
            SystemConfig::StuartLandau(_) => "stuart_landau",
            SystemConfig::Burgers(_) => "burgers",
        }
    }

    pub fn dt(&self) -> f64 {
        match self {
            SystemConfig::OscillatorRing(c) => c.dt,
            SystemConfig::StuartLandau(c) => c.dt,
            SystemConfig::Burgers(c) => c.dt,
        }
    }

    pub fn t0(&self) -> f64 {
        match self {
            SystemConfig::Burgers(c) => c.t_range.0,
            _ => 0.0,
        }
    }

    pub fn n_steps(&self) -> Result<usize> {
        match self {
            SystemConfig::OscillatorRing(c) => Ok(c.n_steps),
            SystemConfig::StuartLandau(c) => Ok(c.n_steps),
            SystemConfig::Burgers(c) => c.n_time_steps(),
        }
    }

    pub fn state_dim(&self) -> Result<usize> {
        match self {
            SystemConfig::OscillatorRing(c) => Ok(c.state_dim()),
            SystemConfig::StuartLandau(_) => Ok(2),
            SystemConfig::Burgers(c) => c.state_dim(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SystemConfig::OscillatorRing(c) => c.validate(),
            SystemConfig::StuartLandau(c) => c.validate(),
            SystemConfig::Burgers(c) => c.validate(),
        }
    }

    /// One column per snapshot, `n_steps + 1` columns.
    pub fn simulate(&self) -> Result<DMatrix<f64>> {
        match self {
            SystemConfig::OscillatorRing(c) => simulate_oscillator_ring(c),
            SystemConfig::StuartLandau(c) => simulate_stuart_landau(c),
            SystemConfig::Burgers(c) => simulate_burgers(c),
        }
    }

    fn parameters(&self) -> Value {
        match self {
            SystemConfig::OscillatorRing(c) => serde_json::to_value(c),
            SystemConfig::StuartLandau(c) => serde_json::to_value(c),
            SystemConfig::Burgers(c) => serde_json::to_value(c),
        }
        .expect("system parameters serialize")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum SweepWord {
    Sweep,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum LambdaDoc {
    Fixed(f64),
    Word(SweepWord),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LambdaSetting {
    Fixed(f64),
    Sweep,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputMapData {
    /// Observed and artificial points.
    All,
    Observed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnrichmentSettings {
    /// Absolute ball radius for states; `None` scales the training spread.
    pub radius_x: Option<f64>,
    /// Defaults to the state radius.
    pub radius_y: Option<f64>,
    /// Multiplier of the training-window spread used when `radius_x` is unset.
    pub radius_factor: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub train_steps: usize,
    pub artificial_points: usize,
    pub enrichment: EnrichmentSettings,
    pub dictionary: DictionarySpec,
    pub lambda: LambdaSetting,
    pub lambda_grid: Vec<f64>,
    pub solver: PenaltyKind,
    pub transpose: Transpose,
    pub output_map: OutputMapData,
    pub predict_horizon: usize,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Extra training sizes, each topped up to `sweep_total_points`.
    pub training_sizes: Vec<usize>,
    pub sweep_total_points: usize,
    /// Number of dominant eigenvalues compared against the reference.
    pub spectrum_modes: usize,
    pub compare: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    system: String,
    parameters: Value,
    train_steps: usize,
    artificial_points: usize,
    enrichment: EnrichmentSettings,
    dictionary: DictionarySpec,
    lambda: LambdaDoc,
    lambda_grid: Vec<f64>,
    solver: PenaltyKind,
    transpose: Transpose,
    output_map: OutputMapData,
    predict_horizon: usize,
    output_dir: PathBuf,
    seed: u64,
    training_sizes: Vec<usize>,
    sweep_total_points: usize,
    spectrum_modes: usize,
    compare: bool,
}

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let base = |system: SystemConfig, dictionary: DictionarySpec, train, artificial, horizon, modes| Self {
            output_dir: PathBuf::from("out").join(system.name()),
            system,
            train_steps: train,
            artificial_points: artificial,
            enrichment: EnrichmentSettings { radius_x: None, radius_y: None, radius_factor: 1e-2 },
            dictionary,
            lambda: LambdaSetting::Sweep,
            lambda_grid: default_lambda_grid(),
            solver: PenaltyKind::Robust,
            transpose: Transpose::Conjugate,
            output_map: OutputMapData::All,
            predict_horizon: horizon,
            seed: 0,
            training_sizes: Vec::new(),
            sweep_total_points: 0,
            spectrum_modes: modes,
            compare: true,
        };
        match name {
            "oscillator_ring" => {
                let sys = OscillatorRingConfig::benchmark_default();
                let dict = DictionarySpec::identity(sys.state_dim())?;
                Ok(base(SystemConfig::OscillatorRing(sys), dict, 15, 30, 45, 10))
            }
            "stuart_landau" => {
                let dict = DictionarySpec::fourier_on(2, 1, -10, 10)?;
                Ok(base(SystemConfig::StuartLandau(StuartLandauConfig::benchmark_default()), dict, 30, 30, 70, 5))
            }
            "burgers" => {
                let sys = BurgersConfig::benchmark_default();
                let dict = DictionarySpec::identity(sys.state_dim()?)?;
                let mut cfg = base(SystemConfig::Burgers(sys), dict, 8, 40, 35, 10);
                cfg.training_sizes = vec![5, 10, 15, 20, 25, 30, 35];
                cfg.sweep_total_points = 40;
                Ok(cfg)
            }
            other => Err(Error::Config(unknown_system_message(other))),
        }
    }

    fn to_doc(&self) -> ConfigDoc {
        ConfigDoc {
            system: self.system.name().to_string(),
            parameters: self.system.parameters(),
            train_steps: self.train_steps,
            artificial_points: self.artificial_points,
            enrichment: self.enrichment.clone(),
            dictionary: self.dictionary.clone(),
            lambda: match self.lambda {
                LambdaSetting::Fixed(v) => LambdaDoc::Fixed(v),
                LambdaSetting::Sweep => LambdaDoc::Word(SweepWord::Sweep),
            },
            lambda_grid: self.lambda_grid.clone(),
            solver: self.solver,
            transpose: self.transpose,
            output_map: self.output_map,
            predict_horizon: self.predict_horizon,
            output_dir: self.output_dir.clone(),
            seed: self.seed,
            training_sizes: self.training_sizes.clone(),
            sweep_total_points: self.sweep_total_points,
            spectrum_modes: self.spectrum_modes,
            compare: self.compare,
        }
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self.to_doc()).expect("config serializes")
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_doc()).expect("config serializes");
        s.push('\n');
        s
    }

    /// Parses a config document. Keys that are absent take the preset value
    /// of the named system.
    pub fn from_json(text: &str) -> Result<Self> {
        let user: Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let obj = user.as_object().ok_or_else(|| Error::Config("config must be a JSON object".into()))?;
        let name = obj
            .get("system")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Config("missing string field `system`".into()))?;
        let preset = Self::preset(name)?;
        let mut merged = preset.to_value();
        // A new ring size without explicit positions gets a matching default state.
        if let (Some(Value::Object(p)), "oscillator_ring") = (obj.get("parameters"), name) {
            if let (Some(n), None) = (p.get("n_oscillators").and_then(Value::as_u64), p.get("initial_state")) {
                merged["parameters"]["initial_state"] = json!(default_ring_initial_state(n as usize, 0));
            }
        }
        merge(&mut merged, &user);
        let doc: ConfigDoc = from_value(merged, text)?;
        let system = match name {
            "oscillator_ring" => SystemConfig::OscillatorRing(from_value(doc.parameters, text)?),
            "stuart_landau" => SystemConfig::StuartLandau(from_value(doc.parameters, text)?),
            _ => SystemConfig::Burgers(from_value(doc.parameters, text)?),
        };
        let cfg = Self {
            system,
            train_steps: doc.train_steps,
            artificial_points: doc.artificial_points,
            enrichment: doc.enrichment,
            dictionary: doc.dictionary,
            lambda: match doc.lambda {
                LambdaDoc::Fixed(v) => LambdaSetting::Fixed(v),
                LambdaDoc::Word(_) => LambdaSetting::Sweep,
            },
            lambda_grid: doc.lambda_grid,
            solver: doc.solver,
            transpose: doc.transpose,
            output_map: doc.output_map,
            predict_horizon: doc.predict_horizon,
            output_dir: doc.output_dir,
            seed: doc.seed,
            training_sizes: doc.training_sizes,
            sweep_total_points: doc.sweep_total_points,
            spectrum_modes: doc.spectrum_modes,
            compare: doc.compare,
        };
        cfg.validate().map_err(|e| match e {
            Error::Config(m) => Error::Config(m),
            other => Error::Config(other.to_string()),
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        let n_steps = self.system.n_steps()?;
        let state_dim = self.system.state_dim()?;
        if self.dictionary.state_dim() != state_dim {
            return Err(Error::Config(format!(
                "dictionary state_dim {} does not match the system state dimension {state_dim}",
                self.dictionary.state_dim()
            )));
        }
        let check_window = |train: usize, what: &str| -> Result<()> {
            if train < 2 {
                return Err(Error::Config(format!("{what} must be at least 2 snapshots")));
            }
            if train >= n_steps {
                return Err(Error::Config(format!("{what} ({train}) must be below the simulated steps ({n_steps})")));
            }
            if self.predict_horizon > n_steps - train {
                return Err(Error::Config(format!(
                    "predict_horizon {} exceeds the {} steps left after {what} {train}",
                    self.predict_horizon,
                    n_steps - train
                )));
            }
            Ok(())
        };
        check_window(self.train_steps, "train_steps")?;
        for &n in &self.training_sizes {
            check_window(n, "training size")?;
        }
        if self.predict_horizon == 0 {
            return Err(Error::Config("predict_horizon must be positive".into()));
        }
        match self.lambda {
            LambdaSetting::Fixed(v) if !(v >= 0.0 && v.is_finite()) => {
                return Err(Error::Config(format!("lambda must be nonnegative, got {v}")));
            }
            LambdaSetting::Sweep if self.lambda_grid.is_empty() || self.lambda_grid.iter().any(|&v| !(v > 0.0)) => {
                return Err(Error::Config("lambda_grid must hold positive values".into()));
            }
            _ => {}
        }
        let positive = |v: Option<f64>| v.map_or(true, |r| r > 0.0 && r.is_finite());
        if !positive(self.enrichment.radius_x)
            || !positive(self.enrichment.radius_y)
            || !(self.enrichment.radius_factor > 0.0)
        {
            return Err(Error::Config("enrichment radii must be positive".into()));
        }
        if self.spectrum_modes == 0 || self.spectrum_modes > self.dictionary.feature_dim() {
            return Err(Error::Config(format!(
                "spectrum_modes must be in 1..={}",
                self.dictionary.feature_dim()
            )));
        }
        Ok(())
    }
}

pub fn unknown_system_message(name: &str) -> String {
    format!("unknown experiment `{name}`; valid names: {}", SYSTEM_NAMES.join(", "))
}

fn merge(base: &mut Value, over: &Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() && k != "dictionary" => merge(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, o) => *b = o.clone(),
    }
}

/// Deserializes with errors that point at the offending key in the source.
fn from_value<T: DeserializeOwned>(value: Value, source: &str) -> Result<T> {
    serde_json::from_value(value).map_err(|e| {
        let msg = e.to_string();
        let line = msg
            .split('`')
            .nth(1)
            .and_then(|key| source.lines().position(|l| l.contains(&format!("\"{key}\""))))
            .map(|i| format!("line {}: ", i + 1))
            .unwrap_or_default();
        Error::Config(format!("{line}{msg}"))
    })
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub plain: KoopmanModel,
    pub robust: KoopmanModel,
    /// All models of a lambda sweep, in grid order.
    pub sweep_models: Vec<KoopmanModel>,
    pub pairs: SnapshotPairs,
    pub radius_x: f64,
    pub radius_y: f64,
    /// Observed samples whose requested enrichment exceeds the Jacobian-rank cap.
    pub over_budget: usize,
}

/// Fits the plain EDMD model on the observed pairs and the regularized model
/// on the enriched pairs of a training window.
pub fn fit_window(cfg: &ExperimentConfig, train: &DMatrix<f64>, artificial_points: usize) -> Result<FitOutcome> {
    let spec = &cfg.dictionary;
    let observed = SnapshotPairs::from_trajectory(train)?;
    let radius_x = cfg.enrichment.radius_x.unwrap_or(cfg.enrichment.radius_factor * trajectory_spread(train));
    let radius_y = cfg.enrichment.radius_y.unwrap_or(radius_x);
    let ecfg = EnrichmentConfig { radius_x, radius_y: Some(radius_y), points_per_sample: 1, seed: cfg.seed };
    let pairs = if artificial_points == 0 || radius_x <= 0.0 {
        observed.clone()
    } else {
        enrich_trajectory_points(train, artificial_points, &ecfg)?
    };
    let copies = artificial_points.div_ceil(train.ncols()).max(1);
    let budget_cfg = EnrichmentConfig { points_per_sample: copies, ..ecfg.clone() };
    let over_budget = if radius_x > 0.0 {
        check_augmentation_budget(&observed, spec, &budget_cfg, DEFAULT_RANK_TOL)?
            .iter()
            .filter(|e| !e.within_budget)
            .count()
    } else {
        0
    };

    let gram_plain = assemble_gram_with(&observed, spec, cfg.transpose)?;
    let c_plain = fit_output_map(&observed, spec, false)?.c;
    let mut plain = edmd_solve(&gram_plain, spec)?.with_output_map(c_plain)?;
    plain.dt = Some(cfg.system.dt());

    let gram = assemble_gram_with(&pairs, spec, cfg.transpose)?;
    let c = fit_output_map(&pairs, spec, cfg.output_map == OutputMapData::All)?.c;
    let opts = RobustOptions::default();
    let mut sweep_models = Vec::new();
    let robust = match cfg.lambda {
        LambdaSetting::Fixed(l) if l == 0.0 => edmd_solve(&gram, spec)?,
        LambdaSetting::Fixed(l) => match cfg.solver {
            PenaltyKind::Robust => robust_solve(&gram, spec, l, &opts)?,
            PenaltyKind::Ridge => ridge_solve(&gram, spec, l)?,
        },
        LambdaSetting::Sweep => {
            let (models, best) = sweep_lambda(&gram, &pairs, spec, &cfg.lambda_grid, cfg.solver, &opts, Some(&c))?;
            sweep_models = models;
            sweep_models[best].clone()
        }
    };
    let record = EnrichmentRecord {
        seed: cfg.seed,
        radius_x,
        radius_y,
        artificial_pairs: pairs.len() - pairs.n_observed(),
    };
    let finish = |m: KoopmanModel| -> Result<KoopmanModel> {
        let mut m = m.with_output_map(c.clone())?;
        m.enrichment = Some(record.clone());
        m.dt = Some(cfg.system.dt());
        Ok(m)
    };
    let robust = finish(robust)?;
    let sweep_models = sweep_models.into_iter().map(finish).collect::<Result<Vec<_>>>()?;
    Ok(FitOutcome { plain, robust, sweep_models, pairs, radius_x, radius_y, over_budget })
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub train_steps: usize,
    pub artificial_points: usize,
    pub fit: FitOutcome,
    pub plain_spectrum: SpectrumReport,
    pub robust_spectrum: SpectrumReport,
    pub reference_spectrum: Option<SpectrumReport>,
    pub plain_prediction: PredictionResult,
    pub robust_prediction: PredictionResult,
    /// Time of the first predicted column.
    pub t_start: f64,
    pub seconds: f64,
}

impl RunReport {
    pub fn plain_mse(&self) -> &[f64] {
        self.plain_prediction.mse_per_state.as_ref().expect("evaluated").as_slice()
    }

    pub fn robust_mse(&self) -> &[f64] {
        self.robust_prediction.mse_per_state.as_ref().expect("evaluated").as_slice()
    }

    /// Fraction of states where the regularized model has the lower MSE.
    pub fn robust_win_fraction(&self) -> f64 {
        let wins = self.plain_mse().iter().zip(self.robust_mse()).filter(|(p, r)| r < p).count();
        wins as f64 / self.plain_mse().len() as f64
    }

    pub fn spectrum_distances(&self, m: usize) -> Option<(f64, f64)> {
        let reference = self.reference_spectrum.as_ref()?;
        let m = m.min(reference.eigenvalues.len());
        Some((
            spectrum_distance(&self.plain_spectrum, reference, m).ok()?,
            spectrum_distance(&self.robust_spectrum, reference, m).ok()?,
        ))
    }
}

/// Reference spectrum where one is known in closed form.
pub fn reference_spectrum(cfg: &ExperimentConfig) -> Result<Option<Vec<C64>>> {
    match &cfg.system {
        SystemConfig::OscillatorRing(c) => {
            if matches!(cfg.dictionary.kind(), DictionaryKind::Identity) {
                Ok(Some(exact_oscillator_spectrum(c)?))
            } else {
                Ok(None)
            }
        }
        SystemConfig::StuartLandau(c) => {
            // On the limit cycle theta advances by a constant, so each Fourier
            // feature is an eigenfunction.
            let on_cycle = (c.r0 - c.mu.sqrt()).abs() < 1e-12;
            match cfg.dictionary.kind() {
                DictionaryKind::FourierExponential { min_mode, max_mode, component: 1 } if on_cycle => {
                    let omega = (c.gamma - c.beta * c.mu) * c.dt;
                    Ok(Some((*min_mode..=*max_mode).map(|m| C64::from_polar(1.0, m as f64 * omega)).collect()))
                }
                _ => Ok(None),
            }
        }
        SystemConfig::Burgers(_) => Ok(None),
    }
}

pub fn run_window(cfg: &ExperimentConfig, traj: &DMatrix<f64>, train_steps: usize, artificial_points: usize) -> Result<RunReport> {
    let start = Instant::now();
    let train = traj.columns(0, train_steps).into_owned();
    let fit = fit_window(cfg, &train, artificial_points)?;
    let m = cfg.spectrum_modes;
    let dt = Some(cfg.system.dt());
    let plain_spectrum = analyze(&fit.plain, dt, m)?;
    let robust_spectrum = analyze(&fit.robust, dt, m)?;
    let reference_spectrum = match reference_spectrum(cfg)? {
        Some(ev) => {
            let mm = m.min(ev.len());
            Some(report_from_eigenvalues(ev, dt, mm)?)
        }
        None => None,
    };
    let x0: Vec<f64> = traj.column(train_steps - 1).iter().cloned().collect();
    let reference = traj.columns(train_steps - 1, cfg.predict_horizon + 1).into_owned();
    let evaluate = |model: &KoopmanModel| -> Result<PredictionResult> {
        let p = predict(model, &x0, cfg.predict_horizon)?;
        if p.truncated {
            let cols = p.predicted.ncols();
            return evaluate_prediction(&p, &reference.columns(0, cols).into_owned());
        }
        evaluate_prediction(&p, &reference)
    };
    let plain_prediction = evaluate(&fit.plain)?;
    let robust_prediction = evaluate(&fit.robust)?;
    Ok(RunReport {
        train_steps,
        artificial_points,
        fit,
        plain_spectrum,
        robust_spectrum,
        reference_spectrum,
        plain_prediction,
        robust_prediction,
        t_start: cfg.system.t0() + (train_steps - 1) as f64 * cfg.system.dt(),
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: Value,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub trajectory: DMatrix<f64>,
    pub main: RunReport,
    pub sweep: Vec<RunReport>,
    pub checks: Vec<Check>,
    pub seconds: f64,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let start = Instant::now();
    let traj = cfg.system.simulate()?;
    let main = run_window(cfg, &traj, cfg.train_steps, cfg.artificial_points)?;
    let mut sweep = Vec::with_capacity(cfg.training_sizes.len());
    for &n in &cfg.training_sizes {
        sweep.push(run_window(cfg, &traj, n, cfg.sweep_total_points.saturating_sub(n))?);
    }
    let checks = acceptance_checks(cfg, &main, &sweep);
    Ok(ExperimentReport { config: cfg.clone(), trajectory: traj, main, sweep, checks, seconds: start.elapsed().as_secs_f64() })
}

fn acceptance_checks(cfg: &ExperimentConfig, main: &RunReport, sweep: &[RunReport]) -> Vec<Check> {
    let mut out = Vec::new();
    let mut push = |name: &str, passed: bool, measured: Value| out.push(Check { name: name.into(), passed, measured });
    let rho_p = main.plain_spectrum.spectral_radius;
    let rho_r = main.robust_spectrum.spectral_radius;
    match &cfg.system {
        SystemConfig::OscillatorRing(_) => {
            push("plain_spectral_radius_above_one", rho_p > 1.0, json!({ "plain": rho_p }));
            push("robust_spectral_radius_at_most_1.001", rho_r <= 1.001, json!({ "robust": rho_r }));
            if let Some((dp, dr)) = main.spectrum_distances(cfg.spectrum_modes) {
                push("robust_spectrum_closer_to_reference", dr < dp, json!({ "plain": dp, "robust": dr }));
            }
            let (mp, mr) = (main.plain_mse(), main.robust_mse());
            if mp.len() >= 4 {
                push(
                    "robust_mse_lower_oscillators_3_4",
                    mr[2] < mp[2] && mr[3] < mp[3],
                    json!({ "plain": [mp[2], mp[3]], "robust": [mr[2], mr[3]] }),
                );
            }
        }
        SystemConfig::StuartLandau(_) => {
            push("plain_has_eigenvalue_outside_unit_circle", rho_p > 1.0, json!({ "plain": rho_p }));
            let moduli: Vec<f64> = main.robust_spectrum.dominant.iter().map(|z| z.norm()).collect();
            push(
                "robust_dominant_within_0.05_of_unit_circle",
                moduli.iter().all(|m| (m - 1.0).abs() <= 0.05),
                json!({ "moduli": moduli }),
            );
            let (mp, mr) = (main.plain_mse(), main.robust_mse());
            push(
                "robust_mse_lower_r_theta",
                mp.iter().zip(mr).all(|(p, r)| r < p),
                json!({ "plain": mp, "robust": mr }),
            );
        }
        SystemConfig::Burgers(_) => {
            push(
                "robust_mse_lower_80pct_states_main",
                main.robust_win_fraction() >= 0.8,
                json!({ "train_steps": main.train_steps, "fraction": main.robust_win_fraction() }),
            );
            for run in sweep {
                let f = run.robust_win_fraction();
                push(
                    &format!("robust_mse_lower_80pct_states_train_{}", run.train_steps),
                    f >= 0.8,
                    json!({ "fraction": f, "artificial_points": run.artificial_points }),
                );
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Output files
// ---------------------------------------------------------------------------

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

fn mse_table(run: &RunReport) -> String {
    let header = ["state", "plain", "robust"].map(String::from);
    let rows: Vec<Vec<f64>> = (0..run.plain_mse().len())
        .map(|i| vec![(i + 1) as f64, run.plain_mse()[i], run.robust_mse()[i]])
        .collect();
    table_to_csv(&header, &rows).replace(".0,", ",")
}

/// Writes the models, spectra and predictions of one run into `dir`.
pub fn write_run(run: &RunReport, cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    save_model(&run.fit.plain, &dir.join("model_plain.json"))?;
    save_model(&run.fit.robust, &dir.join("model_robust.json"))?;
    if !run.fit.sweep_models.is_empty() {
        let sweep_dir = dir.join("sweep");
        fs::create_dir_all(&sweep_dir)?;
        for (i, m) in run.fit.sweep_models.iter().enumerate() {
            save_model(m, &sweep_dir.join(format!("model_{i:02}.json")))?;
        }
    }
    write(&dir.join("spectrum_plain.csv"), &spectrum::to_csv(&run.plain_spectrum))?;
    write(&dir.join("spectrum_robust.csv"), &spectrum::to_csv(&run.robust_spectrum))?;
    if let Some(r) = &run.reference_spectrum {
        write(&dir.join("spectrum_reference.csv"), &spectrum::to_csv(r))?;
    }
    let dt = cfg.system.dt();
    write(&dir.join("prediction_plain.csv"), &predictor::to_csv(&run.plain_prediction, run.t_start, dt))?;
    write(&dir.join("prediction_robust.csv"), &predictor::to_csv(&run.robust_prediction, run.t_start, dt))?;
    write(&dir.join("mse.csv"), &mse_table(run))?;
    Ok(())
}

fn run_summary(run: &RunReport, cfg: &ExperimentConfig) -> Value {
    json!({
        "train_steps": run.train_steps,
        "artificial_points": run.artificial_points,
        "artificial_pairs": run.fit.pairs.len() - run.fit.pairs.n_observed(),
        "radius_x": run.fit.radius_x,
        "radius_y": run.fit.radius_y,
        "samples_over_augmentation_budget": run.fit.over_budget,
        "lambda": run.fit.robust.lambda,
        "plain_spectral_radius": run.plain_spectrum.spectral_radius,
        "robust_spectral_radius": run.robust_spectrum.spectral_radius,
        "spectrum_distance": run.spectrum_distances(cfg.spectrum_modes).map(|(p, r)| json!({"plain": p, "robust": r})),
        "plain_mse": run.plain_mse(),
        "robust_mse": run.robust_mse(),
        "robust_win_fraction": run.robust_win_fraction(),
        "robust_objective": run.fit.robust.diagnostics.objective,
        "robust_iterations": run.fit.robust.diagnostics.iterations,
        "seconds": run.seconds,
    })
}

pub fn summary_json(report: &ExperimentReport) -> Value {
    let cfg = &report.config;
    json!({
        "experiment": cfg.system.name(),
        "passed": report.passed(),
        "checks": report.checks,
        "main": run_summary(&report.main, cfg),
        "sweep": report.sweep.iter().map(|r| run_summary(r, cfg)).collect::<Vec<_>>(),
        "seconds": report.seconds,
        "config": cfg.to_value(),
    })
}

/// Writes every output of an experiment under `dir`.
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<()> {
    let cfg = &report.config;
    fs::create_dir_all(dir)?;
    write(&dir.join("trajectory.csv"), &trajectory_to_csv(&report.trajectory, cfg.system.t0(), cfg.system.dt()))?;
    write_run(&report.main, cfg, dir)?;
    for run in &report.sweep {
        write_run(run, cfg, &dir.join(format!("train_{}", run.train_steps)))?;
    }
    if !report.sweep.is_empty() {
        let n = report.trajectory.nrows();
        let mut header = vec!["train_steps".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        for (name, pick) in [("plain", true), ("robust", false)] {
            let rows: Vec<Vec<f64>> = report
                .sweep
                .iter()
                .map(|r| {
                    let mse = if pick { r.plain_mse() } else { r.robust_mse() };
                    std::iter::once(r.train_steps as f64).chain(mse.iter().cloned()).collect()
                })
                .collect();
            write(&dir.join(format!("mse_sweep_{name}.csv")), &table_to_csv(&header, &rows))?;
        }
    }
    let mut s = serde_json::to_string_pretty(&summary_json(report))?;
    s.push('\n');
    write(&dir.join("summary.json"), &s)?;
    Ok(())
}

/// Runs several experiments on separate threads. Each result is independent,
/// so one failure does not stop the others.
pub fn run_many(configs: &[ExperimentConfig]) -> Vec<Result<ExperimentReport>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = configs.iter().map(|c| s.spawn(move || run_experiment(c))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(invalid("experiment thread panicked"))))
            .collect()
    })
}
