//! CPD kernel machines over (quantized) Fourier tensor-product features,
//! with feature-hyperparameter learning by alternating least squares.
//!
//! The model predicts `f(x) = Re[(Σ_p λ_p φ_{θ_p}(x))ᴴ w]`, where each
//! `φ_{θ_p}` is a Kronecker (tensor-product) Fourier feature map with
//! periodicity `θ_p`, the weight tensor `w` is stored as a rank-`R` CPD,
//! and the feature weights `λ` are learned jointly with the cores. Training
//! alternates exact regularized least-squares updates of every CPD core
//! with a λ solve under L1, L2, or fixed-norm regularization.
//!
//! Module map:
//! - [`tncore`]: complex dense tensor-algebra primitives (Kronecker,
//!   row-wise Khatri-Rao, Hadamard, vectorization, Cholesky).
//! - [`features`]: (quantized) Fourier feature factors and matrices.
//! - [`model`]: model types and prediction, plus brute-force
//!   materialization used by tests.
//! - [`als`]: the alternating least-squares training loop.
//! - [`lambda_reg`]: the three λ-subproblem solvers and their
//!   non-negative variants.
//! - [`data`]: CSV ingestion, preprocessing, splits, and metrics.
//! - [`bench`]: cross-validation baseline, FL-vs-CV benchmark harness,
//!   presets, and report types backing the CLI.

pub mod als;
pub mod bench;
pub mod data;
pub mod features;
pub mod lambda_reg;
pub mod model;
pub mod tncore;
