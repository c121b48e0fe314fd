//! Benchmark harness: the cross-validated kernel-machine baseline, the
//! feature-learning runs it is compared against, and the P-sweep that
//! contrasts their training-time growth.
//!
//! Both entry points take the raw table plus a split spec and draw a
//! fresh 80/20 split per restart, so the reported mean ± std covers
//! split randomness as well as initialization randomness. All seeds
//! derive deterministically from the configured bases.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::als::{fit, AlsError, TrainConfig};
use crate::data::{kfold, mse, preprocess, DataError, Dataset, RawTable, SplitSpec};
use crate::features::{FeatureError, FeatureFamily};
use crate::model::{predict_batch, ModelError};

/// The θ grid searched by the cross-validation baseline, in its original
/// order (sweeps take prefixes of it, ties select the earlier entry).
pub const THETA_GRID: [f64; 8] = [10.0, 2.0, 128.0, 25.0, 64.0, 600.0, 2000.0, 1024.0];

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Als(#[from] AlsError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("theta grid is empty")]
    EmptyGrid,
    #[error("every theta in the grid failed cross-validation")]
    AllThetasFailed,
    #[error("sweep P values must be ascending, positive, and at most {max}")]
    BadSweep { max: usize },
    #[error("unknown preset {0:?} (available: {1})")]
    UnknownPreset(String, String),
}

/// Cross-validation baseline settings: the θ grid, fold count, and the
/// trainer configuration shared with the feature-learning runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub theta_grid: Vec<f64>,
    pub folds: usize,
    pub base: TrainConfig,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            theta_grid: THETA_GRID.to_vec(),
            folds: 6,
            base: TrainConfig::default(),
        }
    }
}

/// Aggregated outcome of a benchmark run (either method).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// "fl" or "cv".
    pub method: String,
    pub per_restart_mse: Vec<f64>,
    pub mean_mse: f64,
    /// Population standard deviation over restarts.
    pub std_mse: f64,
    /// Total training wall time, all restarts, same exclusions for both
    /// methods (data loading excluded, feature construction included).
    pub wall_seconds: f64,
    pub per_restart_seconds: Vec<f64>,
    /// Learned λ per restart (feature-learning runs only).
    pub lambdas: Option<Vec<Vec<f64>>>,
    /// Selected θ per restart (cross-validation runs only).
    pub selected_thetas: Option<Vec<f64>>,
    pub guard_trips: usize,
    pub rebuilds: usize,
    pub lambda_iterations: usize,
    pub restarts: usize,
    pub config: TrainConfig,
    /// The θ values the run drew features from.
    pub thetas: Vec<f64>,
}

fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn restart_split(split: &SplitSpec, restart: usize) -> SplitSpec {
    SplitSpec {
        seed: split.seed.wrapping_add(restart as u64),
        ..*split
    }
}

fn restart_config(config: &TrainConfig, restart: usize) -> TrainConfig {
    TrainConfig {
        seed: config.seed.wrapping_add(restart as u64),
        ..config.clone()
    }
}

struct FlRestart {
    mse: f64,
    seconds: f64,
    lambdas: Vec<f64>,
    guard_trips: usize,
    rebuilds: usize,
    lambda_iterations: usize,
}

fn run_fl_restart(
    raw: &RawTable,
    split: &SplitSpec,
    config: &TrainConfig,
    family: &FeatureFamily,
    restart: usize,
) -> Result<FlRestart, BenchError> {
    let (train, test) = preprocess(raw, &restart_split(split, restart))?;
    let cfg = restart_config(config, restart);
    let result = fit(&train.x, &train.y, &cfg, family)?;
    let predictions = predict_batch(&test.x, &result.model)?;
    Ok(FlRestart {
        mse: mse(&predictions, &test.y)?,
        seconds: result.train_seconds,
        lambdas: result.model.lambdas,
        guard_trips: result.guard_trips,
        rebuilds: result.rebuilds,
        lambda_iterations: result.lambda_iterations,
    })
}

/// Train the feature-learning model over `config.restarts` independent
/// restarts (fresh split and fresh init each) and aggregate test MSEs.
/// `parallel` distributes restarts across threads; keep it off for
/// timing comparisons.
pub fn run_fl(
    raw: &RawTable,
    split: &SplitSpec,
    config: &TrainConfig,
    family: &FeatureFamily,
    parallel: bool,
) -> Result<RunReport, BenchError> {
    config.validate()?;
    split.validate()?;
    let restarts: Vec<FlRestart> = if parallel {
        (0..config.restarts)
            .into_par_iter()
            .map(|t| run_fl_restart(raw, split, config, family, t))
            .collect::<Result<_, _>>()?
    } else {
        (0..config.restarts)
            .map(|t| run_fl_restart(raw, split, config, family, t))
            .collect::<Result<_, _>>()?
    };
    let per_restart_mse: Vec<f64> = restarts.iter().map(|r| r.mse).collect();
    let per_restart_seconds: Vec<f64> = restarts.iter().map(|r| r.seconds).collect();
    let (mean_mse, std_mse) = mean_and_std(&per_restart_mse);
    Ok(RunReport {
        method: "fl".into(),
        mean_mse,
        std_mse,
        wall_seconds: per_restart_seconds.iter().sum(),
        lambdas: Some(restarts.iter().map(|r| r.lambdas.clone()).collect()),
        selected_thetas: None,
        guard_trips: restarts.iter().map(|r| r.guard_trips).sum(),
        rebuilds: restarts.iter().map(|r| r.rebuilds).sum(),
        lambda_iterations: restarts.iter().map(|r| r.lambda_iterations).sum(),
        restarts: config.restarts,
        config: config.clone(),
        thetas: family.thetas.clone(),
        per_restart_mse,
        per_restart_seconds,
    })
}

fn subset(dataset: &Dataset, idx: &[usize]) -> (ndarray::Array2<f64>, Vec<f64>) {
    let x = dataset.x.select(ndarray::Axis(0), idx);
    let y = idx.iter().map(|&i| dataset.y[i]).collect();
    (x, y)
}

/// A single-θ family sharing the base family's per-dimension specs.
fn single_theta_family(family: &FeatureFamily, theta: f64) -> Result<FeatureFamily, FeatureError> {
    FeatureFamily::new(vec![theta], family.specs.clone())
}

struct CvRestart {
    mse: f64,
    seconds: f64,
    selected_theta: f64,
    guard_trips: usize,
    rebuilds: usize,
}

fn run_cv_restart(
    raw: &RawTable,
    split: &SplitSpec,
    cv: &CvConfig,
    family: &FeatureFamily,
    restart: usize,
) -> Result<CvRestart, BenchError> {
    let (train, test) = preprocess(raw, &restart_split(split, restart))?;
    let split_seed = restart_split(split, restart).seed;
    // The kernel machine baseline: one feature map, λ frozen at 1.
    let cfg = TrainConfig {
        freeze_lambda: true,
        ..restart_config(&cv.base, restart)
    };
    let folds = kfold(train.num_rows(), cv.folds, split_seed)?;
    let mut seconds = 0.0;
    let mut guard_trips = 0;
    let mut rebuilds = 0;
    let mut best: Option<(usize, f64)> = None;
    for (g, &theta) in cv.theta_grid.iter().enumerate() {
        let theta_family = single_theta_family(family, theta)?;
        let mut fold_scores = Vec::with_capacity(folds.len());
        let mut failed = false;
        for (fold_index, (train_idx, val_idx)) in folds.iter().enumerate() {
            let (fx, fy) = subset(&train, train_idx);
            let (vx, vy) = subset(&train, val_idx);
            match fit(&fx, &fy, &cfg, &theta_family) {
                Ok(result) => {
                    seconds += result.train_seconds;
                    guard_trips += result.guard_trips;
                    rebuilds += result.rebuilds;
                    let predictions = predict_batch(&vx, &result.model)?;
                    fold_scores.push(mse(&predictions, &vy)?);
                }
                Err(error) => {
                    eprintln!(
                        "warning: theta {theta} fold {fold_index} failed, \
                         skipping this theta: {error}"
                    );
                    failed = true;
                    break;
                }
            }
        }
        if failed {
            continue;
        }
        let score = fold_scores.iter().sum::<f64>() / fold_scores.len() as f64;
        // Strict < keeps the earlier grid entry on ties.
        if best.map_or(true, |(_, best_score)| score < best_score) {
            best = Some((g, score));
        }
    }
    let (best_index, _) = best.ok_or(BenchError::AllThetasFailed)?;
    let selected_theta = cv.theta_grid[best_index];
    let final_family = single_theta_family(family, selected_theta)?;
    let result = fit(&train.x, &train.y, &cfg, &final_family)?;
    seconds += result.train_seconds;
    guard_trips += result.guard_trips;
    rebuilds += result.rebuilds;
    let predictions = predict_batch(&test.x, &result.model)?;
    Ok(CvRestart {
        mse: mse(&predictions, &test.y)?,
        seconds,
        selected_theta,
        guard_trips,
        rebuilds,
    })
}

/// The baseline: for every θ in the grid, 6-fold cross-validate the
/// single-feature kernel machine (λ ≡ 1); retrain the best θ on the full
/// training split and report its test MSE. Wall time counts every fold
/// fit plus the final fit.
pub fn run_cv(
    raw: &RawTable,
    split: &SplitSpec,
    cv: &CvConfig,
    family: &FeatureFamily,
    parallel: bool,
) -> Result<RunReport, BenchError> {
    cv.base.validate()?;
    split.validate()?;
    if cv.theta_grid.is_empty() {
        return Err(BenchError::EmptyGrid);
    }
    let restarts: Vec<CvRestart> = if parallel {
        (0..cv.base.restarts)
            .into_par_iter()
            .map(|t| run_cv_restart(raw, split, cv, family, t))
            .collect::<Result<_, _>>()?
    } else {
        (0..cv.base.restarts)
            .map(|t| run_cv_restart(raw, split, cv, family, t))
            .collect::<Result<_, _>>()?
    };
    let per_restart_mse: Vec<f64> = restarts.iter().map(|r| r.mse).collect();
    let per_restart_seconds: Vec<f64> = restarts.iter().map(|r| r.seconds).collect();
    let (mean_mse, std_mse) = mean_and_std(&per_restart_mse);
    Ok(RunReport {
        method: "cv".into(),
        mean_mse,
        std_mse,
        wall_seconds: per_restart_seconds.iter().sum(),
        lambdas: None,
        selected_thetas: Some(restarts.iter().map(|r| r.selected_theta).collect()),
        guard_trips: restarts.iter().map(|r| r.guard_trips).sum(),
        rebuilds: restarts.iter().map(|r| r.rebuilds).sum(),
        lambda_iterations: 0,
        restarts: cv.base.restarts,
        config: cv.base.clone(),
        thetas: cv.theta_grid.clone(),
        per_restart_mse,
        per_restart_seconds,
    })
}

/// One row of the P sweep, ready for CSV output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p: usize,
    pub time_fl: f64,
    pub time_cv: f64,
    pub mse_fl: f64,
    pub mse_cv: f64,
}

/// Compare training cost as the number of feature maps grows: for each P
/// (ascending), both methods use the first P θ values — the FL model as
/// its feature family, the baseline as its search grid.
pub fn sweep_p(
    raw: &RawTable,
    split: &SplitSpec,
    cv: &CvConfig,
    family: &FeatureFamily,
    p_values: &[usize],
    parallel: bool,
) -> Result<Vec<SweepRow>, BenchError> {
    let max = family.num_features().min(cv.theta_grid.len());
    let ascending = p_values.windows(2).all(|w| w[0] < w[1]);
    if p_values.is_empty()
        || !ascending
        || p_values[0] == 0
        || *p_values.last().unwrap() > max
    {
        return Err(BenchError::BadSweep { max });
    }
    let mut rows = Vec::with_capacity(p_values.len());
    for &p in p_values {
        let fl_family = FeatureFamily::new(family.thetas[..p].to_vec(), family.specs.clone())?;
        let fl = run_fl(raw, split, &cv.base, &fl_family, parallel)?;
        let cv_config = CvConfig {
            theta_grid: cv.theta_grid[..p].to_vec(),
            ..cv.clone()
        };
        let cv_report = run_cv(raw, split, &cv_config, family, parallel)?;
        rows.push(SweepRow {
            p,
            time_fl: fl.wall_seconds,
            time_cv: cv_report.wall_seconds,
            mse_fl: fl.mean_mse,
            mse_cv: cv_report.mean_mse,
        });
    }
    Ok(rows)
}

/// A complete experiment description: trainer settings plus the feature
/// family and split parameters. This is also the config-file schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub train: TrainConfig,
    pub thetas: Vec<f64>,
    pub num_freq: usize,
    pub quantized: bool,
    pub folds: usize,
    pub train_fraction: f64,
    pub split_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            thetas: THETA_GRID.to_vec(),
            num_freq: 4,
            quantized: true,
            folds: 6,
            train_fraction: 0.8,
            split_seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            train_fraction: self.train_fraction,
            seed: self.split_seed,
            folds: self.folds,
        }
    }

    pub fn family(&self, dims: usize) -> Result<FeatureFamily, FeatureError> {
        FeatureFamily::uniform(self.thetas.clone(), dims, self.num_freq, self.quantized)
    }

    pub fn cv_config(&self) -> CvConfig {
        CvConfig {
            theta_grid: self.thetas.clone(),
            folds: self.folds,
            base: self.train.clone(),
        }
    }
}

/// Partial experiment settings parsed from a config file; unset fields
/// fall through to the preset or defaults underneath.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct PartialExperiment {
    #[serde(default)]
    pub train: PartialTrain,
    pub thetas: Option<Vec<f64>>,
    pub num_freq: Option<usize>,
    pub quantized: Option<bool>,
    pub folds: Option<usize>,
    pub train_fraction: Option<f64>,
    pub split_seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct PartialTrain {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub rank: Option<usize>,
    pub epochs: Option<usize>,
    pub reg: Option<crate::als::RegKind>,
    pub nonneg: Option<bool>,
    pub inner_steps: Option<usize>,
    pub seed: Option<u64>,
    pub restarts: Option<usize>,
    pub freeze_lambda: Option<bool>,
    pub cache_features: Option<bool>,
}

impl PartialExperiment {
    /// Overlay the set fields onto `base`.
    pub fn apply(&self, base: &mut ExperimentConfig) {
        let t = &self.train;
        let train = &mut base.train;
        if let Some(v) = t.alpha {
            train.alpha = v;
        }
        if let Some(v) = t.beta {
            train.beta = v;
        }
        if let Some(v) = t.rank {
            train.rank = v;
        }
        if let Some(v) = t.epochs {
            train.epochs = v;
        }
        if let Some(v) = t.reg {
            train.reg = v;
        }
        if let Some(v) = t.nonneg {
            train.nonneg = v;
        }
        if let Some(v) = t.inner_steps {
            train.inner_steps = v;
        }
        if let Some(v) = t.seed {
            train.seed = v;
        }
        if let Some(v) = t.restarts {
            train.restarts = v;
        }
        if let Some(v) = t.freeze_lambda {
            train.freeze_lambda = v;
        }
        if let Some(v) = t.cache_features {
            train.cache_features = v;
        }
        if let Some(v) = &self.thetas {
            base.thetas = v.clone();
        }
        if let Some(v) = self.num_freq {
            base.num_freq = v;
        }
        if let Some(v) = self.quantized {
            base.quantized = v;
        }
        if let Some(v) = self.folds {
            base.folds = v;
        }
        if let Some(v) = self.train_fraction {
            base.train_fraction = v;
        }
        if let Some(v) = self.split_seed {
            base.split_seed = v;
        }
    }
}

/// Names of the benchmark presets shipped with the crate.
pub const PRESET_NAMES: [&str; 5] = ["yacht", "energy", "airfoil", "concrete", "wine"];

/// Load a named preset (embedded copies of the files under `presets/`).
pub fn preset(name: &str) -> Result<ExperimentConfig, BenchError> {
    let body = match name {
        "yacht" => include_str!("../presets/yacht.json"),
        "energy" => include_str!("../presets/energy.json"),
        "airfoil" => include_str!("../presets/airfoil.json"),
        "concrete" => include_str!("../presets/concrete.json"),
        "wine" => include_str!("../presets/wine.json"),
        other => {
            return Err(BenchError::UnknownPreset(
                other.to_string(),
                PRESET_NAMES.join(", "),
            ))
        }
    };
    let mut config = ExperimentConfig::default();
    let partial: PartialExperiment =
        serde_json::from_str(body).expect("embedded preset is valid JSON");
    partial.apply(&mut config);
    Ok(config)
}
