//! Alternating least squares for the feature-learning model: closed-form
//! core updates against cached Hadamard state, alternated with a λ solve.
//!
//! The workspace maintains, between block updates,
//! `Z_p = ⊛_c Ψ^{(c,p)} W^{(c)}` (one N×R matrix per feature map) and
//! `H = ⊛_c W^{(c)ᴴ} W^{(c)}`. A core update divides the factor of one
//! core out of this state (guarded elementwise division, with a
//! rebuild-from-definition fallback), solves the regularized normal
//! equations for that core, and multiplies the new factor back in — so
//! every sweep costs one pass over the cores instead of rebuilding the
//! full products each time.

use std::borrow::Cow;
use std::time::Instant;

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureError, FeatureFamily, ModeId};
use crate::lambda_reg::{solve_fixed_norm, solve_l1, solve_l2, LambdaError, LambdaProblem};
use crate::model::{CpdWeights, FlModel, ModelError};
use crate::tncore::{hadamard, hadamard_div, hermitian_gram, kron, solve_hpd, CMatrix, TnError};

/// Relative residual bound enforced by [`solve_core`].
pub const CORE_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum AlsError {
    #[error("invalid training configuration: {0}")]
    BadConfig(String),
    #[error("x has {rows} rows but y has {y_len}")]
    DataShape { rows: usize, y_len: usize },
    #[error("x has {got} columns but the family defines {expected} dimensions")]
    DimMismatch { got: usize, expected: usize },
    #[error("lambda has {got} entries for {expected} feature maps")]
    LambdaLength { got: usize, expected: usize },
    #[error("core {core} out of range ({cores} cores)")]
    CoreRange { core: usize, cores: usize },
    #[error("{0}")]
    BlockOrder(String),
    #[error(
        "core {core} system is singular; set alpha > 0 (or reduce the rank): {source}"
    )]
    SingularCore { core: usize, source: TnError },
    #[error(
        "core {core} solve is ill-conditioned: residual {residual:.3e} exceeds {bound:.3e}"
    )]
    IllConditioned {
        core: usize,
        residual: f64,
        bound: f64,
    },
    #[error("objective became non-finite at epoch {epoch}, block {block}")]
    NonFiniteObjective { epoch: usize, block: String },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lambda(#[from] LambdaError),
}

/// Which λ regularizer the training objective uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegKind {
    #[serde(rename = "l1")]
    L1,
    #[serde(rename = "l2")]
    L2,
    #[serde(rename = "fn")]
    FixedNorm,
}

impl std::str::FromStr for RegKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(RegKind::L1),
            "l2" => Ok(RegKind::L2),
            "fn" => Ok(RegKind::FixedNorm),
            other => Err(format!("unknown regularizer {other:?} (use l1, l2, or fn)")),
        }
    }
}

impl std::fmt::Display for RegKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RegKind::L1 => "l1",
            RegKind::L2 => "l2",
            RegKind::FixedNorm => "fn",
        })
    }
}

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Weight regularization α ≥ 0.
    pub alpha: f64,
    /// λ regularization strength β ≥ 0.
    pub beta: f64,
    /// CPD rank R ≥ 1.
    pub rank: usize,
    /// Number of full ALS sweeps ℰ ≥ 1.
    pub epochs: usize,
    pub reg: RegKind,
    /// Constrain λ entrywise non-negative.
    pub nonneg: bool,
    /// Proximal iteration budget S per L1 λ solve.
    pub inner_steps: usize,
    pub seed: u64,
    /// Number of random restarts a benchmark run performs.
    pub restarts: usize,
    /// Keep λ fixed at 1 (plain kernel-machine training).
    #[serde(default)]
    pub freeze_lambda: bool,
    /// Cache all Ψ feature matrices (O(N·I·P·D) memory). Disable to
    /// recompute them on demand at O(NRP) peak memory.
    #[serde(default = "default_true")]
    pub cache_features: bool,
}

fn default_true() -> bool {
    true
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            beta: 0.1,
            rank: 10,
            epochs: 10,
            reg: RegKind::L1,
            nonneg: false,
            inner_steps: 50,
            seed: 0,
            restarts: 10,
            freeze_lambda: false,
            cache_features: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), AlsError> {
        if self.rank == 0 {
            return Err(AlsError::BadConfig("rank must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(AlsError::BadConfig("epochs must be at least 1".into()));
        }
        if self.inner_steps == 0 {
            return Err(AlsError::BadConfig("inner_steps must be at least 1".into()));
        }
        if self.restarts == 0 {
            return Err(AlsError::BadConfig("restarts must be at least 1".into()));
        }
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(AlsError::BadConfig(format!(
                "alpha must be finite and non-negative, got {}",
                self.alpha
            )));
        }
        if !self.beta.is_finite() || self.beta < 0.0 {
            return Err(AlsError::BadConfig(format!(
                "beta must be finite and non-negative, got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

/// Identifies the block an objective trace entry was recorded after.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockId {
    /// Random initialization, before any update.
    Init,
    /// Closed-form update of one core (index into the core list).
    Core(usize),
    /// A completed λ solve.
    Lambda,
    /// One inner proximal iteration of an L1 λ solve.
    LambdaInner(usize),
}

impl std::fmt::Display for BlockId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BlockId::Init => write!(f, "init"),
            BlockId::Core(k) => write!(f, "core({k})"),
            BlockId::Lambda => write!(f, "lambda"),
            BlockId::LambdaInner(s) => write!(f, "lambda-inner({s})"),
        }
    }
}

/// One objective sample along the training path. Serializes to a single
/// JSON object, one per line, for appendable trace logs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub epoch: usize,
    pub block: BlockId,
    pub objective: f64,
    /// Wall-clock milliseconds since the start of the fit.
    pub wall_ms: f64,
}

/// Everything a finished fit hands back.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: FlModel,
    pub trace: Vec<TraceEntry>,
    /// Times an elementwise division hit the guard during downdates.
    pub guard_trips: usize,
    /// Times the cached state was rebuilt from definitions.
    pub rebuilds: usize,
    /// Total λ-solver iterations (proximal steps for L1, solves otherwise).
    pub lambda_iterations: usize,
    /// Training wall time, feature construction included.
    pub train_seconds: f64,
}

/// Draw the starting point: every core entry has standard-normal real and
/// imaginary parts, then each column is scaled to unit Euclidean norm;
/// λ entries are uniform on [0,1).
pub fn init<R: Rng>(
    config: &TrainConfig,
    family: &FeatureFamily,
    rng: &mut R,
) -> (CpdWeights, Vec<f64>) {
    let modes = family.mode_ids();
    let mut cores = Vec::with_capacity(modes.len());
    for mode in &modes {
        let size = family.mode_size(mode);
        let mut core = CMatrix::zeros((size, config.rank));
        for r in 0..config.rank {
            let mut norm_sq = 0.0;
            for i in 0..size {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                core[(i, r)] = Complex64::new(re, im);
                norm_sq += re * re + im * im;
            }
            let norm = norm_sq.sqrt();
            for i in 0..size {
                core[(i, r)] /= norm;
            }
        }
        cores.push(core);
    }
    let lambdas: Vec<f64> = (0..family.num_features())
        .map(|_| rng.random::<f64>())
        .collect();
    let weights = CpdWeights {
        rank: config.rank,
        cores,
    };
    (weights, lambdas)
}

/// Cached training state. Between block updates `z[p]` and `h` hold the
/// full Hadamard products over all cores; during one core's update they
/// hold the products with that core divided out.
pub struct AlsWorkspace<'a> {
    y: &'a [f64],
    family: &'a FeatureFamily,
    /// Input columns, copied once for contiguous per-dimension access.
    cols: Vec<Vec<f64>>,
    pub weights: CpdWeights,
    pub lambdas: Vec<f64>,
    modes: Vec<ModeId>,
    z: Vec<CMatrix>,
    h: CMatrix,
    grams: Vec<CMatrix>,
    /// Conjugated feature matrices, `psi[c][p]`, when cached.
    psi: Option<Vec<Vec<CMatrix>>>,
    /// Which core is currently divided out of `z`/`h`, if any.
    down: Option<usize>,
    pub guard_trips: usize,
    pub rebuilds: usize,
}

impl<'a> AlsWorkspace<'a> {
    pub fn new(
        x: &Array2<f64>,
        y: &'a [f64],
        family: &'a FeatureFamily,
        weights: CpdWeights,
        lambdas: Vec<f64>,
        cache_features: bool,
    ) -> Result<Self, AlsError> {
        if x.nrows() != y.len() {
            return Err(AlsError::DataShape {
                rows: x.nrows(),
                y_len: y.len(),
            });
        }
        if x.ncols() != family.num_dims() {
            return Err(AlsError::DimMismatch {
                got: x.ncols(),
                expected: family.num_dims(),
            });
        }
        if lambdas.len() != family.num_features() {
            return Err(AlsError::LambdaLength {
                got: lambdas.len(),
                expected: family.num_features(),
            });
        }
        let cols: Vec<Vec<f64>> = (0..x.ncols()).map(|d| x.column(d).to_vec()).collect();
        let modes = family.mode_ids();
        let mut workspace = Self {
            y,
            family,
            cols,
            weights,
            lambdas,
            modes,
            z: Vec::new(),
            h: CMatrix::zeros((0, 0)),
            grams: Vec::new(),
            psi: None,
            down: None,
            guard_trips: 0,
            rebuilds: 0,
        };
        if cache_features {
            let mut psi = Vec::with_capacity(workspace.modes.len());
            for c in 0..workspace.modes.len() {
                let mut per_p = Vec::with_capacity(family.num_features());
                for p in 0..family.num_features() {
                    per_p.push(workspace.compute_psi(c, p)?);
                }
                psi.push(per_p);
            }
            workspace.psi = Some(psi);
        }
        workspace.rebuild_state()?;
        Ok(workspace)
    }

    fn num_samples(&self) -> usize {
        self.y.len()
    }

    pub fn num_cores(&self) -> usize {
        self.modes.len()
    }

    /// The conjugated feature matrix Ψ^{(c,p)} (N×I_c): row n holds the
    /// conjugate of the feature factor of sample n, so `Ψ W` stacks the
    /// per-mode inner products `⟨ψ(x_n), w_r⟩`.
    fn compute_psi(&self, c: usize, p: usize) -> Result<CMatrix, FeatureError> {
        let mode = &self.modes[c];
        let spec = self.family.spec_at(mode.dim, p);
        let theta = self.family.thetas[p];
        let column = &self.cols[mode.dim];
        let mut psi = match mode.bit {
            None => crate::features::feature_matrix(column, theta, &spec)?,
            Some(bit) => crate::features::bit_matrix(column, theta, &spec, bit)?,
        };
        psi.mapv_inplace(|v| v.conj());
        Ok(psi)
    }

    fn psi_matrix(&self, c: usize, p: usize) -> Result<Cow<'_, CMatrix>, FeatureError> {
        match &self.psi {
            Some(cache) => Ok(Cow::Borrowed(&cache[c][p])),
            None => Ok(Cow::Owned(self.compute_psi(c, p)?)),
        }
    }

    /// Hadamard product of `Ψ^{(c,p)} W^{(c)}` over `cores`, fresh from
    /// definitions.
    fn product_over(&self, p: usize, cores: impl Iterator<Item = usize>) -> Result<CMatrix, AlsError> {
        let mut out = CMatrix::from_elem(
            (self.num_samples(), self.weights.rank),
            Complex64::new(1.0, 0.0),
        );
        for c in cores {
            let factor = self.psi_matrix(c, p)?.dot(&self.weights.cores[c]);
            out *= &factor;
        }
        Ok(out)
    }

    /// Recompute grams, `z`, and `h` from the current cores. Restores the
    /// full-product invariant unconditionally.
    pub fn rebuild_state(&mut self) -> Result<(), AlsError> {
        self.grams = self
            .weights
            .cores
            .iter()
            .map(hermitian_gram)
            .collect();
        self.z = (0..self.family.num_features())
            .map(|p| self.product_over(p, 0..self.num_cores()))
            .collect::<Result<_, _>>()?;
        self.h = self
            .grams
            .iter()
            .fold(hermitian_ones(self.weights.rank), |acc, g| {
                hadamard(&acc, g).expect("gram shapes agree")
            });
        self.down = None;
        Ok(())
    }

    /// Divide core `k`'s factor out of `z` and `h`. If any elementwise
    /// division hits the guard, the downdated state is rebuilt from
    /// definitions instead and the rebuild counter increments.
    pub fn downdate_state(&mut self, k: usize) -> Result<(), AlsError> {
        if let Some(active) = self.down {
            return Err(AlsError::BlockOrder(format!(
                "cannot downdate core {k}: core {active} is already downdated"
            )));
        }
        if k >= self.num_cores() {
            return Err(AlsError::CoreRange {
                core: k,
                cores: self.num_cores(),
            });
        }
        let mut tripped = false;
        'divide: {
            for p in 0..self.family.num_features() {
                let factor = self.psi_matrix(k, p)?.dot(&self.weights.cores[k]);
                match hadamard_div(&self.z[p], &factor) {
                    Ok(divided) => self.z[p] = divided,
                    Err(TnError::DivisionGuard { .. }) => {
                        tripped = true;
                        break 'divide;
                    }
                    Err(other) => panic!("shape invariant violated: {other}"),
                }
            }
            match hadamard_div(&self.h, &self.grams[k]) {
                Ok(divided) => self.h = divided,
                Err(TnError::DivisionGuard { .. }) => tripped = true,
                Err(other) => panic!("shape invariant violated: {other}"),
            }
        }
        if tripped {
            self.guard_trips += 1;
            self.rebuilds += 1;
            self.rebuild_downdated(k)?;
        }
        self.down = Some(k);
        Ok(())
    }

    fn rebuild_downdated(&mut self, k: usize) -> Result<(), AlsError> {
        for p in 0..self.family.num_features() {
            self.z[p] = self.product_over(p, (0..self.num_cores()).filter(|&c| c != k))?;
        }
        self.h = self
            .grams
            .iter()
            .enumerate()
            .filter(|(c, _)| *c != k)
            .fold(hermitian_ones(self.weights.rank), |acc, (_, g)| {
                hadamard(&acc, g).expect("gram shapes agree")
            });
        Ok(())
    }

    /// Install a new core `k` and multiply its factor back into `z`/`h`.
    pub fn update_state(&mut self, k: usize, core: CMatrix) -> Result<(), AlsError> {
        if self.down != Some(k) {
            return Err(AlsError::BlockOrder(format!(
                "update of core {k} requires downdating it first"
            )));
        }
        self.weights.cores[k] = core;
        self.grams[k] = hermitian_gram(&self.weights.cores[k]);
        for p in 0..self.family.num_features() {
            let factor = self.psi_matrix(k, p)?.dot(&self.weights.cores[k]);
            self.z[p] = hadamard(&self.z[p], &factor).expect("shapes agree");
        }
        self.h = hadamard(&self.h, &self.grams[k]).expect("shapes agree");
        self.down = None;
        Ok(())
    }

    /// Assemble the normal-equation pieces for core `d`:
    /// `A_d = Σ_p λ_p (Z^{(d,p)} ⊙ᵣ Ψ^{(d,p)})` (column `r·I_d + i`
    /// multiplies `W^{(d)}[i,r]`, matching `vec`), and the downdated,
    /// exactly-symmetrized `H_d`. Feature maps with `λ_p = 0` are skipped.
    pub fn build_core_system(
        &self,
        d: usize,
        lambdas: &[f64],
    ) -> Result<(CMatrix, CMatrix), AlsError> {
        if self.down != Some(d) {
            return Err(AlsError::BlockOrder(format!(
                "core system for {d} requires downdating it first"
            )));
        }
        if lambdas.len() != self.family.num_features() {
            return Err(AlsError::LambdaLength {
                got: lambdas.len(),
                expected: self.family.num_features(),
            });
        }
        let n = self.num_samples();
        let rank = self.weights.rank;
        let size = self.family.mode_size(&self.modes[d]);
        let mut a = CMatrix::zeros((n, size * rank));
        for (p, &lambda) in lambdas.iter().enumerate() {
            if lambda == 0.0 {
                continue;
            }
            let psi = self.psi_matrix(d, p)?;
            let z = &self.z[p];
            for row in 0..n {
                for r in 0..rank {
                    let weighted = z[(row, r)] * lambda;
                    for i in 0..size {
                        a[(row, r * size + i)] += weighted * psi[(row, i)];
                    }
                }
            }
        }
        let mut h_d = self.h.clone();
        symmetrize(&mut h_d);
        Ok((a, h_d))
    }

    /// The design matrix `F = [Φ_1 w … Φ_P w]` of the λ subproblem,
    /// real part. Column p row n is `Re Σ_r Z_p[n,r]`.
    pub fn build_f(&self) -> Result<Array2<f64>, AlsError> {
        Ok(self.build_f_complex()?.mapv(|v| v.re))
    }

    /// Complex responses `Φ_p w` before taking real parts — the λ solve
    /// stacks real and imaginary parts to keep the full residual.
    pub fn build_f_complex(&self) -> Result<Array2<Complex64>, AlsError> {
        if let Some(active) = self.down {
            return Err(AlsError::BlockOrder(format!(
                "F requires full state, but core {active} is downdated"
            )));
        }
        let n = self.num_samples();
        let p_count = self.family.num_features();
        let mut f = Array2::zeros((n, p_count));
        for p in 0..p_count {
            for row in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for r in 0..self.weights.rank {
                    acc += self.z[p][(row, r)];
                }
                f[(row, p)] = acc;
            }
        }
        Ok(f)
    }

    /// `‖w‖²` from the cached gram products, no materialization.
    pub fn weight_norm_sq(&self) -> Result<f64, AlsError> {
        if let Some(active) = self.down {
            return Err(AlsError::BlockOrder(format!(
                "‖w‖² requires full state, but core {active} is downdated"
            )));
        }
        Ok(self.h.iter().sum::<Complex64>().re)
    }

    /// Training objective
    /// `½‖y − Σ_p λ_p Φ_p w‖² + α/2·‖w‖² + β·Reg(λ)`
    /// at the current state (complex residual norm; λ is real).
    pub fn objective(&self, config: &TrainConfig) -> Result<f64, AlsError> {
        let f = self.build_f_complex()?;
        Ok(objective_given_f(
            &f,
            self.y,
            &self.lambdas,
            self.weight_norm_sq()?,
            config,
        ))
    }
}

fn hermitian_ones(rank: usize) -> CMatrix {
    CMatrix::from_elem((rank, rank), Complex64::new(1.0, 0.0))
}

/// Force exact Hermitian symmetry (average with the conjugate mirror,
/// zero the diagonal's imaginary part).
fn symmetrize(m: &mut CMatrix) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)] = Complex64::new(m[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)].conj());
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}

fn regularizer(lambdas: &[f64], config: &TrainConfig) -> f64 {
    match config.reg {
        RegKind::L1 => lambdas.iter().map(|v| v.abs()).sum::<f64>(),
        // Chosen so the ridge formula solves this objective exactly.
        RegKind::L2 => 0.5 * lambdas.iter().map(|v| v * v).sum::<f64>(),
        // Constraint ‖λ‖ ≤ 1: no additive term.
        RegKind::FixedNorm => 0.0,
    }
}

fn objective_given_f(
    f: &Array2<Complex64>,
    y: &[f64],
    lambdas: &[f64],
    weight_norm_sq: f64,
    config: &TrainConfig,
) -> f64 {
    let mut data = 0.0;
    for (row, &target) in y.iter().enumerate() {
        let mut pred = Complex64::new(0.0, 0.0);
        for (p, &lambda) in lambdas.iter().enumerate() {
            if lambda != 0.0 {
                pred += lambda * f[(row, p)];
            }
        }
        let residual = Complex64::new(target, 0.0) - pred;
        data += residual.norm_sqr();
    }
    0.5 * data + 0.5 * config.alpha * weight_norm_sq + config.beta * regularizer(lambdas, config)
}

/// Solve `(A_dᴴA_d + α(H_d ⊗ I)) vec(W) = A_dᴴ y` by Cholesky (with one
/// round of iterative refinement if needed) and reshape to the `I_d×R`
/// core. The residual is verified against [`CORE_RESIDUAL_TOL`].
pub fn solve_core(
    a: &CMatrix,
    h_d: &CMatrix,
    y: &[f64],
    alpha: f64,
    core_index: usize,
) -> Result<CMatrix, AlsError> {
    let rank = h_d.nrows();
    let cols = a.ncols();
    assert_eq!(cols % rank, 0, "A columns must be a multiple of the rank");
    let size = cols / rank;
    let mut system = hermitian_gram(a);
    if alpha != 0.0 {
        let penalty = kron(h_d, &CMatrix::eye(size));
        system += &(penalty * Complex64::new(alpha, 0.0));
    }
    let mut rhs = vec![Complex64::new(0.0, 0.0); cols];
    for (row, &target) in y.iter().enumerate() {
        for (col, r) in rhs.iter_mut().enumerate() {
            *r += a[(row, col)].conj() * target;
        }
    }
    let mut solution = solve_hpd(&system, &rhs).map_err(|source| AlsError::SingularCore {
        core: core_index,
        source,
    })?;
    let rhs_norm = rhs.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    for _ in 0..2 {
        let residual = residual_vec(&system, &solution, &rhs);
        let res_norm = residual.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if res_norm <= CORE_RESIDUAL_TOL * rhs_norm {
            break;
        }
        let correction = solve_hpd(&system, &residual).map_err(|source| {
            AlsError::SingularCore {
                core: core_index,
                source,
            }
        })?;
        for (s, c) in solution.iter_mut().zip(correction) {
            *s += c;
        }
    }
    let residual = residual_vec(&system, &solution, &rhs);
    let res_norm = residual.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if res_norm > CORE_RESIDUAL_TOL * rhs_norm {
        return Err(AlsError::IllConditioned {
            core: core_index,
            residual: res_norm,
            bound: CORE_RESIDUAL_TOL * rhs_norm,
        });
    }
    // vec index i + I·r ↦ core entry (i, r).
    let mut core = CMatrix::zeros((size, rank));
    for r in 0..rank {
        for i in 0..size {
            core[(i, r)] = solution[i + size * r];
        }
    }
    Ok(core)
}

fn residual_vec(system: &CMatrix, x: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let n = b.len();
    let mut residual = b.to_vec();
    for row in 0..n {
        let mut acc = Complex64::new(0.0, 0.0);
        for col in 0..n {
            acc += system[(row, col)] * x[col];
        }
        residual[row] -= acc;
    }
    residual
}

/// Train the feature-learning model: random init, then `epochs` sweeps of
/// per-core closed-form updates followed by a λ solve, tracing the
/// objective after every block. Deterministic given `config.seed`.
pub fn fit(
    x: &Array2<f64>,
    y: &[f64],
    config: &TrainConfig,
    family: &FeatureFamily,
) -> Result<FitResult, AlsError> {
    config.validate()?;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (weights, mut lambdas) = init(config, family, &mut rng);
    if config.freeze_lambda {
        lambdas = vec![1.0; lambdas.len()];
    } else if config.reg == RegKind::FixedNorm {
        // Project the random start into the feasible ball so the first
        // λ solve cannot increase the constrained objective.
        let norm = lambdas.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1.0 {
            for l in &mut lambdas {
                *l /= norm;
            }
        }
    }
    let mut workspace = AlsWorkspace::new(x, y, family, weights, lambdas, config.cache_features)?;

    let mut trace = Vec::new();
    let mut lambda_iterations = 0usize;
    let record = |trace: &mut Vec<TraceEntry>,
                      epoch: usize,
                      block: BlockId,
                      objective: f64|
     -> Result<(), AlsError> {
        if !objective.is_finite() {
            return Err(AlsError::NonFiniteObjective {
                epoch,
                block: block.to_string(),
            });
        }
        trace.push(TraceEntry {
            epoch,
            block,
            objective,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        Ok(())
    };

    let initial = workspace.objective(config)?;
    record(&mut trace, 0, BlockId::Init, initial)?;

    for epoch in 1..=config.epochs {
        for k in 0..workspace.num_cores() {
            workspace.downdate_state(k)?;
            let (a, h_k) = workspace.build_core_system(k, &workspace.lambdas)?;
            let core = solve_core(&a, &h_k, y, config.alpha, k)?;
            workspace.update_state(k, core)?;
            let objective = workspace.objective(config)?;
            record(&mut trace, epoch, BlockId::Core(k), objective)?;
        }
        if !config.freeze_lambda {
            let f = workspace.build_f_complex()?;
            let weight_norm_sq = workspace.weight_norm_sq()?;
            let n = y.len();
            let p_count = family.num_features();
            let mut stacked = Array2::zeros((2 * n, p_count));
            for row in 0..n {
                for p in 0..p_count {
                    stacked[(row, p)] = f[(row, p)].re;
                    stacked[(n + row, p)] = f[(row, p)].im;
                }
            }
            let mut target = vec![0.0; 2 * n];
            target[..n].copy_from_slice(y);
            let problem = LambdaProblem::new(
                stacked,
                target,
                config.beta,
                config.nonneg,
                config.inner_steps,
            )?;
            match config.reg {
                RegKind::L1 => {
                    let result = solve_l1(&problem, &workspace.lambdas)?;
                    for (s, iterate) in result.iterates.iter().enumerate() {
                        let objective =
                            objective_given_f(&f, y, iterate, weight_norm_sq, config);
                        record(&mut trace, epoch, BlockId::LambdaInner(s), objective)?;
                    }
                    lambda_iterations += result.iterations;
                    workspace.lambdas = result.lambda;
                }
                RegKind::L2 => {
                    workspace.lambdas = solve_l2(&problem)?;
                    lambda_iterations += 1;
                }
                RegKind::FixedNorm => {
                    workspace.lambdas = solve_fixed_norm(&problem)?;
                    lambda_iterations += 1;
                }
            }
            let objective = workspace.objective(config)?;
            record(&mut trace, epoch, BlockId::Lambda, objective)?;
        }
    }

    let train_seconds = start.elapsed().as_secs_f64();
    let model = FlModel::new(
        workspace.weights.clone(),
        workspace.lambdas.clone(),
        family.clone(),
    )?;
    Ok(FitResult {
        model,
        trace,
        guard_trips: workspace.guard_trips,
        rebuilds: workspace.rebuilds,
        lambda_iterations,
        train_seconds,
    })
}
