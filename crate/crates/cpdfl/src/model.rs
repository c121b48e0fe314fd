//! CPD kernel machine and feature-learning model evaluation, plus a
//! brute-force materialization path used by oracle tests.
//!
//! Predictions contract one per-mode inner product at a time:
//! `f(x) = Re( Σ_r ∏_c ⟨ψ^{(c)}(x), w_r^{(c)}⟩ )`, which costs `O(DIR)`
//! per sample and never forms the length-`∏I_d` feature vector. The
//! feature side of every inner product is conjugated — transposes on
//! complex quantities are conjugate transposes throughout this crate —
//! and the real part is taken once at the end of the full contraction.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureError, FeatureFamily, FourierSpec, ModeId};
use crate::tncore::{kron_vec, CMatrix};

/// Hard cap on `∏ I_d` for [`materialize_weights`].
pub const MATERIALIZE_GUARD: usize = 1 << 16;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("input has {got} coordinates but the model expects {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("weights must have at least one core")]
    Empty,
    #[error("core {index} has {got} columns, expected rank {expected}")]
    RankMismatch {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("core {index} has a non-finite entry")]
    NonFiniteCore { index: usize },
    #[error("model has {got} cores but the family defines {expected} modes")]
    CoreCountMismatch { got: usize, expected: usize },
    #[error("core {index} has {got} rows but its mode has size {expected}")]
    CoreSizeMismatch {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("lambda vector has {got} entries for {expected} feature maps")]
    LambdaLength { got: usize, expected: usize },
    #[error("lambda entry {0} is not finite")]
    NonFiniteLambda(usize),
    #[error("materialization would need {size} entries (guard {MATERIALIZE_GUARD})")]
    TooLarge { size: usize },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("model file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("model file is invalid: {0}")]
    BadFile(String),
}

/// The CPD cores housing the weight tensor `w`: one `I_c×R` matrix per
/// (virtual) tensor mode, fastest mode first. Quantized dimensions
/// contribute `K_d` cores of two rows each instead of one `I_d`-row core.
#[derive(Debug, Clone, PartialEq)]
pub struct CpdWeights {
    pub cores: Vec<CMatrix>,
    pub rank: usize,
}

impl CpdWeights {
    pub fn new(cores: Vec<CMatrix>) -> Result<Self, ModelError> {
        let rank = cores.first().ok_or(ModelError::Empty)?.ncols();
        for (index, core) in cores.iter().enumerate() {
            if core.ncols() != rank {
                return Err(ModelError::RankMismatch {
                    index,
                    got: core.ncols(),
                    expected: rank,
                });
            }
            if core.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(ModelError::NonFiniteCore { index });
            }
        }
        Ok(Self { cores, rank })
    }
}

/// The feature-learning model: CPD weights, feature weights `λ`, and the
/// family of candidate feature maps. Evaluates
/// `f(x) = Re[(Σ_p λ_p φ_{θ_p}(x))ᴴ w]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlModel {
    pub weights: CpdWeights,
    pub lambdas: Vec<f64>,
    pub family: FeatureFamily,
}

impl FlModel {
    pub fn new(
        weights: CpdWeights,
        lambdas: Vec<f64>,
        family: FeatureFamily,
    ) -> Result<Self, ModelError> {
        if lambdas.len() != family.num_features() {
            return Err(ModelError::LambdaLength {
                got: lambdas.len(),
                expected: family.num_features(),
            });
        }
        if let Some(i) = lambdas.iter().position(|l| !l.is_finite()) {
            return Err(ModelError::NonFiniteLambda(i));
        }
        let modes = family.mode_ids();
        if weights.cores.len() != modes.len() {
            return Err(ModelError::CoreCountMismatch {
                got: weights.cores.len(),
                expected: modes.len(),
            });
        }
        for (index, (core, mode)) in weights.cores.iter().zip(&modes).enumerate() {
            let expected = family.mode_size(mode);
            if core.nrows() != expected {
                return Err(ModelError::CoreSizeMismatch {
                    index,
                    got: core.nrows(),
                    expected,
                });
            }
        }
        Ok(Self {
            weights,
            lambdas,
            family,
        })
    }

    /// Save as a self-describing JSON document; `load_json` restores it
    /// exactly (floats round-trip bit-for-bit).
    pub fn save_json(&self, path: &Path) -> Result<(), ModelError> {
        let file = ModelFile::from_model(self);
        let writer = BufWriter::new(File::create(path).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })?);
        serde_json::to_writer_pretty(writer, &file)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self, ModelError> {
        let reader = BufReader::new(File::open(path).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })?);
        let file: ModelFile = serde_json::from_reader(reader)?;
        file.into_model()
    }
}

/// Per-mode inner products `⟨ψ^{(c)}(x_d), w_r^{(c)}⟩` folded across all
/// modes: the `O(DIR)` contraction shared by both prediction paths.
fn contract_modes(
    x: &[f64],
    specs: &[FourierSpec],
    theta: f64,
    weights: &CpdWeights,
    modes: &[ModeId],
) -> Result<Complex64, ModelError> {
    let mut acc = vec![Complex64::new(1.0, 0.0); weights.rank];
    let mut quantized_cache: Vec<[Complex64; 2]> = Vec::new();
    let mut cached_dim = usize::MAX;
    for (core, mode) in weights.cores.iter().zip(modes) {
        match mode.bit {
            None => {
                let psi = crate::features::fourier_factor(
                    x[mode.dim],
                    &specs[mode.dim].with_theta(theta),
                )?;
                contract_one(&mut acc, &psi, core);
            }
            Some(bit) => {
                if cached_dim != mode.dim {
                    quantized_cache = crate::features::quantize_factor(
                        x[mode.dim],
                        &specs[mode.dim].with_theta(theta),
                    )?;
                    cached_dim = mode.dim;
                }
                contract_one(&mut acc, &quantized_cache[bit][..], core);
            }
        }
    }
    Ok(acc.into_iter().sum())
}

fn contract_one(acc: &mut [Complex64], psi: &[Complex64], core: &CMatrix) {
    for (r, a) in acc.iter_mut().enumerate() {
        let mut s = Complex64::new(0.0, 0.0);
        for (i, v) in psi.iter().enumerate() {
            s += v.conj() * core[(i, r)];
        }
        *a *= s;
    }
}

/// CPD kernel machine response at a single `θ`:
/// `Re( Σ_r ∏_c ⟨ψ^{(c)}(x), w_r^{(c)}⟩ )`. No length-`∏I_d` object is
/// ever formed.
pub fn predict_cpd(
    x: &[f64],
    weights: &CpdWeights,
    family: &FeatureFamily,
    theta: f64,
) -> Result<f64, ModelError> {
    if x.len() != family.num_dims() {
        return Err(ModelError::DimensionMismatch {
            got: x.len(),
            expected: family.num_dims(),
        });
    }
    let modes = family.mode_ids();
    if modes.len() != weights.cores.len() {
        return Err(ModelError::CoreCountMismatch {
            got: weights.cores.len(),
            expected: modes.len(),
        });
    }
    Ok(contract_modes(x, &family.specs, theta, weights, &modes)?.re)
}

/// Feature-learning model response `Σ_p λ_p · predict_cpd(x, w, θ_p)`.
/// Feature maps with `λ_p = 0` are skipped entirely.
pub fn predict_fl(x: &[f64], model: &FlModel) -> Result<f64, ModelError> {
    let mut out = 0.0;
    for (p, &lambda) in model.lambdas.iter().enumerate() {
        if lambda == 0.0 {
            continue;
        }
        out += lambda * predict_cpd(x, &model.weights, &model.family, model.family.thetas[p])?;
    }
    Ok(out)
}

/// Row-wise [`predict_fl`] over an `N×D` input matrix.
pub fn predict_batch(x: &Array2<f64>, model: &FlModel) -> Result<Vec<f64>, ModelError> {
    let mut out = Vec::with_capacity(x.nrows());
    for row in x.rows() {
        out.push(predict_fl(row.to_vec().as_slice(), model)?);
    }
    Ok(out)
}

/// Materialize `vec(W) = Σ_r w_r^{(C)} ⊗ … ⊗ w_r^{(1)}` as a dense vector.
/// Test-only brute force; guarded at `∏ I_c ≤ 2^16` entries.
pub fn materialize_weights(weights: &CpdWeights) -> Result<Vec<Complex64>, ModelError> {
    let size: usize = weights.cores.iter().map(|c| c.nrows()).product();
    if size > MATERIALIZE_GUARD {
        return Err(ModelError::TooLarge { size });
    }
    let mut out = vec![Complex64::new(0.0, 0.0); size];
    for r in 0..weights.rank {
        let mut v = vec![Complex64::new(1.0, 0.0)];
        // Fold slowest (last) to fastest (first) core so that the left
        // Kronecker factor is the slower axis, matching vectorization.
        for core in weights.cores.iter().rev() {
            let col: Vec<Complex64> = core.column(r).to_vec();
            v = kron_vec(&v, &col);
        }
        for (o, t) in out.iter_mut().zip(v) {
            *o += t;
        }
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct DimFile {
    num_freq: usize,
    quantized: bool,
}

#[derive(Serialize, Deserialize)]
struct CoreFile {
    rows: usize,
    cols: usize,
    /// Entries as (re, im) pairs, row-major.
    entries: Vec<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    rank: usize,
    thetas: Vec<f64>,
    lambdas: Vec<f64>,
    dims: Vec<DimFile>,
    cores: Vec<CoreFile>,
}

const MODEL_FORMAT: &str = "cpdfl-model/1";

impl ModelFile {
    fn from_model(model: &FlModel) -> Self {
        Self {
            format: MODEL_FORMAT.to_string(),
            rank: model.weights.rank,
            thetas: model.family.thetas.clone(),
            lambdas: model.lambdas.clone(),
            dims: model
                .family
                .specs
                .iter()
                .map(|s| DimFile {
                    num_freq: s.num_freq,
                    quantized: s.quantized,
                })
                .collect(),
            cores: model
                .weights
                .cores
                .iter()
                .map(|c| CoreFile {
                    rows: c.nrows(),
                    cols: c.ncols(),
                    entries: c.iter().map(|z| (z.re, z.im)).collect(),
                })
                .collect(),
        }
    }

    fn into_model(self) -> Result<FlModel, ModelError> {
        if self.format != MODEL_FORMAT {
            return Err(ModelError::BadFile(format!(
                "unknown format {:?} (expected {MODEL_FORMAT:?})",
                self.format
            )));
        }
        let theta0 = *self
            .thetas
            .first()
            .ok_or_else(|| ModelError::BadFile("empty theta grid".into()))?;
        let specs = self
            .dims
            .iter()
            .map(|d| FourierSpec::new(d.num_freq, theta0, d.quantized))
            .collect::<Result<Vec<_>, _>>()?;
        let family = FeatureFamily::new(self.thetas, specs)?;
        let mut cores = Vec::with_capacity(self.cores.len());
        for (i, c) in self.cores.into_iter().enumerate() {
            if c.entries.len() != c.rows * c.cols {
                return Err(ModelError::BadFile(format!(
                    "core {i}: {} entries for a {}×{} matrix",
                    c.entries.len(),
                    c.rows,
                    c.cols
                )));
            }
            let data: Vec<Complex64> = c
                .entries
                .into_iter()
                .map(|(re, im)| Complex64::new(re, im))
                .collect();
            cores.push(
                Array2::from_shape_vec((c.rows, c.cols), data)
                    .map_err(|e| ModelError::BadFile(format!("core {i}: {e}")))?,
            );
        }
        FlModel::new(CpdWeights::new(cores)?, self.lambdas, family)
    }
}
