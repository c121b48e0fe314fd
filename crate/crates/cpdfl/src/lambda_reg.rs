//! Solvers for the λ subproblem
//! `min_λ ½‖y − Fλ‖² + β·Reg(λ)` under the three supported
//! regularizers — L1 (proximal gradient), L2 (ridge), and a fixed-norm
//! constraint `‖λ‖₂ ≤ 1` (SVD secular equation) — each with an optional
//! non-negative variant.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use thiserror::Error;

use crate::tncore::{solve_hpd, CMatrix, TnError};

/// Convergence tolerance on `|‖λ(μ)‖₂ − 1|` for the fixed-norm bisection.
pub const FIXED_NORM_TOL: f64 = 1e-10;
/// Early-stop tolerance `‖λ_{s+1} − λ_s‖∞` for proximal-gradient iterations.
pub const L1_STALL_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum LambdaError {
    #[error("design matrix has {rows} rows but y has {y_len}")]
    LengthMismatch { rows: usize, y_len: usize },
    #[error("design matrix or target contains a non-finite value")]
    NonFinite,
    #[error("beta must be finite and non-negative, got {0}")]
    BadBeta(f64),
    #[error("inner_steps must be at least 1")]
    BadSteps,
    #[error("lambda start has {got} entries, expected {expected}")]
    StartLength { got: usize, expected: usize },
    #[error("ridge system is singular (need beta > 0 or full-rank design)")]
    Singular(#[source] TnError),
    #[error("fixed-norm bisection failed to bracket a root")]
    NoBracket,
}

/// One λ subproblem: design matrix `F` (N×P), target `y`, regularization
/// strength `β`, non-negativity flag, and the proximal iteration budget `S`.
#[derive(Debug, Clone)]
pub struct LambdaProblem {
    pub f: Array2<f64>,
    pub y: Vec<f64>,
    pub beta: f64,
    pub nonneg: bool,
    pub inner_steps: usize,
}

impl LambdaProblem {
    pub fn new(
        f: Array2<f64>,
        y: Vec<f64>,
        beta: f64,
        nonneg: bool,
        inner_steps: usize,
    ) -> Result<Self, LambdaError> {
        if f.nrows() != y.len() {
            return Err(LambdaError::LengthMismatch {
                rows: f.nrows(),
                y_len: y.len(),
            });
        }
        if f.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
            return Err(LambdaError::NonFinite);
        }
        if !self_finite_nonneg(beta) {
            return Err(LambdaError::BadBeta(beta));
        }
        if inner_steps == 0 {
            return Err(LambdaError::BadSteps);
        }
        if f.nrows() < f.ncols() {
            eprintln!(
                "warning: lambda system is underdetermined ({}×{})",
                f.nrows(),
                f.ncols()
            );
        }
        Ok(Self {
            f,
            y,
            beta,
            nonneg,
            inner_steps,
        })
    }

    fn check_start(&self, lambda0: &[f64]) -> Result<(), LambdaError> {
        if lambda0.len() != self.f.ncols() {
            return Err(LambdaError::StartLength {
                got: lambda0.len(),
                expected: self.f.ncols(),
            });
        }
        Ok(())
    }
}

fn self_finite_nonneg(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}

/// Outcome of the proximal-gradient L1 solve. `iterates` holds λ after
/// every performed step (so callers can trace per-iterate objectives);
/// `lambda` equals the last iterate.
#[derive(Debug, Clone)]
pub struct L1Result {
    pub lambda: Vec<f64>,
    pub iterates: Vec<Vec<f64>>,
    pub step: f64,
    pub iterations: usize,
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration
/// (50 steps, relative tolerance 1e-10). Returns 0 for the zero matrix.
fn spectral_norm_psd(g: &Array2<f64>) -> f64 {
    let p = g.nrows();
    if p == 0 {
        return 0.0;
    }
    // Deterministic starts: all-ones first; if that lands in the null
    // space, retry from the coordinate with the largest diagonal entry.
    let ones = Array1::from_elem(p, 1.0 / (p as f64).sqrt());
    let mut fallback = Array1::zeros(p);
    let argmax = (0..p)
        .max_by(|&a, &b| g[(a, a)].partial_cmp(&g[(b, b)]).unwrap())
        .unwrap_or(0);
    fallback[argmax] = 1.0;
    for start in [ones, fallback] {
        let mut v = start;
        let mut prev = 0.0;
        for _ in 0..50 {
            let w = g.dot(&v);
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                prev = 0.0;
                break;
            }
            v = w / norm;
            if (norm - prev).abs() <= 1e-10 * norm.max(1.0) {
                return norm;
            }
            prev = norm;
        }
        if prev > 0.0 {
            return prev;
        }
    }
    0.0
}

fn soft_threshold(p: f64, threshold: f64) -> f64 {
    if p > threshold {
        p - threshold
    } else if p < -threshold {
        p + threshold
    } else {
        0.0
    }
}

fn nonneg_threshold(p: f64, threshold: f64) -> f64 {
    if p > threshold {
        p - threshold
    } else {
        0.0
    }
}

/// Proximal gradient (ISTA) for `½‖y − Fλ‖² + β‖λ‖₁`, starting from
/// `lambda0`, step `t = 0.99/‖FᵀF‖₂`. Thresholded entries come out as
/// exact `0.0`. Stops after `S` steps or when the update stalls below
/// [`L1_STALL_TOL`] in the max norm.
pub fn solve_l1(problem: &LambdaProblem, lambda0: &[f64]) -> Result<L1Result, LambdaError> {
    problem.check_start(lambda0)?;
    let gram = problem.f.t().dot(&problem.f);
    let norm = spectral_norm_psd(&gram);
    let step = if norm > 0.0 { 0.99 / norm } else { 1.0 };
    let threshold = problem.beta * step;
    let y = Array1::from_vec(problem.y.clone());
    let fty = problem.f.t().dot(&y);

    let mut lambda = Array1::from_vec(lambda0.to_vec());
    let mut iterates = Vec::new();
    for _ in 0..problem.inner_steps {
        // p = λ − t·Fᵀ(Fλ − y)
        let grad = gram.dot(&lambda) - &fty;
        let p = &lambda - &(grad * step);
        let next = p.mapv(|v| {
            if problem.nonneg {
                nonneg_threshold(v, threshold)
            } else {
                soft_threshold(v, threshold)
            }
        });
        let delta = next
            .iter()
            .zip(lambda.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        lambda = next;
        iterates.push(lambda.to_vec());
        if delta < L1_STALL_TOL {
            break;
        }
    }
    Ok(L1Result {
        lambda: lambda.to_vec(),
        iterations: iterates.len(),
        iterates,
        step,
    })
}

/// Ridge solve `λ = (FᵀF + βI)⁻¹ Fᵀy` through a Cholesky factorization.
/// With `nonneg`, negative entries are clamped to zero after the solve.
pub fn solve_l2(problem: &LambdaProblem) -> Result<Vec<f64>, LambdaError> {
    let p = problem.f.ncols();
    let gram = problem.f.t().dot(&problem.f);
    let y = Array1::from_vec(problem.y.clone());
    let fty = problem.f.t().dot(&y);
    let mut system = CMatrix::zeros((p, p));
    for i in 0..p {
        for j in 0..p {
            system[(i, j)] = Complex64::new(gram[(i, j)], 0.0);
        }
        system[(i, i)] += Complex64::new(problem.beta, 0.0);
    }
    let rhs: Vec<Complex64> = fty.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let solution = solve_hpd(&system, &rhs).map_err(LambdaError::Singular)?;
    let mut lambda: Vec<f64> = solution.into_iter().map(|z| z.re).collect();
    if problem.nonneg {
        for v in &mut lambda {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
    }
    Ok(lambda)
}

/// Thin SVD `F = U Σ Vᵀ` by one-sided Jacobi rotations. Returns
/// `(u, sigma, v)` with `u` N×P column-orthonormal on the numerical
/// range (zero columns for vanishing σ), σ sorted descending.
fn jacobi_svd(f: &Array2<f64>) -> (Array2<f64>, Vec<f64>, Array2<f64>) {
    let (n, p) = (f.nrows(), f.ncols());
    let mut b = f.clone();
    let mut v = Array2::<f64>::eye(p);
    for _ in 0..60 {
        let mut rotated = false;
        for i in 0..p {
            for j in (i + 1)..p {
                let mut aii = 0.0;
                let mut ajj = 0.0;
                let mut aij = 0.0;
                for k in 0..n {
                    aii += b[(k, i)] * b[(k, i)];
                    ajj += b[(k, j)] * b[(k, j)];
                    aij += b[(k, i)] * b[(k, j)];
                }
                if aij.abs() <= 1e-15 * (aii * ajj).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (ajj - aii) / (2.0 * aij);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..n {
                    let bi = b[(k, i)];
                    let bj = b[(k, j)];
                    b[(k, i)] = c * bi - s * bj;
                    b[(k, j)] = s * bi + c * bj;
                }
                for k in 0..p {
                    let vi = v[(k, i)];
                    let vj = v[(k, j)];
                    v[(k, i)] = c * vi - s * vj;
                    v[(k, j)] = s * vi + c * vj;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sigma: Vec<f64> = (0..p)
        .map(|i| b.column(i).iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    // Sort singular triplets descending by σ.
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &c| sigma[c].partial_cmp(&sigma[a]).unwrap());
    let b_sorted = Array2::from_shape_fn((n, p), |(r, c)| b[(r, order[c])]);
    let v_sorted = Array2::from_shape_fn((p, p), |(r, c)| v[(r, order[c])]);
    sigma = order.iter().map(|&i| sigma[i]).collect();
    let cutoff = sigma.first().copied().unwrap_or(0.0) * 1e-14;
    let mut u = Array2::<f64>::zeros((n, p));
    for i in 0..p {
        if sigma[i] > cutoff {
            for k in 0..n {
                u[(k, i)] = b_sorted[(k, i)] / sigma[i];
            }
        } else {
            sigma[i] = 0.0;
        }
    }
    (u, sigma, v_sorted)
}

fn fn_lambda_at(v: &Array2<f64>, sigma: &[f64], c: &[f64], mu: f64) -> Vec<f64> {
    // λ(μ) = V diag(σᵢ/(σᵢ² + μ)) c, skipping σᵢ = 0 terms.
    let p = v.nrows();
    let mut lambda = vec![0.0; p];
    for (i, (&s, &ci)) in sigma.iter().zip(c).enumerate() {
        if s == 0.0 {
            continue;
        }
        let coeff = s * ci / (s * s + mu);
        for (k, l) in lambda.iter_mut().enumerate() {
            *l += v[(k, i)] * coeff;
        }
    }
    lambda
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Constrained least squares `min ½‖y − Fλ‖²` subject to `‖λ‖₂ ≤ 1`.
/// Interior unconstrained solutions are returned as-is; otherwise the
/// Lagrange multiplier μ is found by safeguarded bisection on
/// `‖λ(μ)‖₂ = 1` over `(0, σ₁‖c‖]` (the norm is monotone decreasing
/// in μ). With `nonneg`, negatives are clamped, then the result is
/// renormalized only if the clamped norm still exceeds 1.
pub fn solve_fixed_norm(problem: &LambdaProblem) -> Result<Vec<f64>, LambdaError> {
    let (u, sigma, v) = jacobi_svd(&problem.f);
    let p = problem.f.ncols();
    let y = Array1::from_vec(problem.y.clone());
    let c: Vec<f64> = (0..p).map(|i| u.column(i).dot(&y)).collect();

    let lambda = if sigma.iter().all(|&s| s == 0.0) {
        vec![0.0; p]
    } else {
        let interior = fn_lambda_at(&v, &sigma, &c, 0.0);
        if norm2(&interior) <= 1.0 {
            interior
        } else {
            let mut lo = 0.0;
            let mut hi = sigma[0] * norm2(&c);
            if norm2(&fn_lambda_at(&v, &sigma, &c, hi)) > 1.0 {
                return Err(LambdaError::NoBracket);
            }
            let mut mid = hi;
            for _ in 0..200 {
                mid = 0.5 * (lo + hi);
                let norm = norm2(&fn_lambda_at(&v, &sigma, &c, mid));
                if (norm - 1.0).abs() <= FIXED_NORM_TOL {
                    break;
                }
                if norm > 1.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            fn_lambda_at(&v, &sigma, &c, mid)
        }
    };

    let mut lambda = lambda;
    if problem.nonneg {
        for l in &mut lambda {
            if *l < 0.0 {
                *l = 0.0;
            }
        }
        let norm = norm2(&lambda);
        if norm > 1.0 {
            for l in &mut lambda {
                *l /= norm;
            }
        }
    }
    Ok(lambda)
}
