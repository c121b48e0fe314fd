//! Complex dense tensor-algebra primitives used by every other module:
//! Kronecker product, row-wise Khatri-Rao product, Hadamard product and
//! guarded division, vectorization/tensorization, Gram matrices, and a
//! Hermitian positive-definite solver.
//!
//! A single index convention runs through the whole crate: vectorization
//! stacks mode 1 fastest, i.e. a tensor entry `(i_1, …, i_D)` lands at
//! linear index `i = i_1 + Σ_{d≥2} i_d ∏_{j<d} I_j`, and the *left*
//! Kronecker factor indexes the *slower* axis. Every normal-equation
//! layout downstream relies on these two conventions agreeing.

use ndarray::Array2;
use num_complex::Complex64;
use thiserror::Error;

/// Complex dense matrix in row-major (C) layout.
pub type CMatrix = Array2<Complex64>;

/// Divisor entries with magnitude below this trip the Hadamard-division
/// guard; callers are expected to rebuild the divided quantity from its
/// definition instead of trusting the quotient.
pub const DIV_GUARD: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum TnError {
    #[error("row count mismatch: {0} vs {1}")]
    RowMismatch(usize, usize),
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch((usize, usize), (usize, usize)),
    #[error(
        "division guard tripped at ({row}, {col}): |divisor| = {magnitude:.3e} < {DIV_GUARD:.0e}; \
         recompute the quantity from scratch"
    )]
    DivisionGuard {
        row: usize,
        col: usize,
        magnitude: f64,
    },
    #[error("entry count {len} does not match shape {shape:?} (expected {expected})")]
    LengthMismatch {
        len: usize,
        expected: usize,
        shape: Vec<usize>,
    },
    #[error("matrix is not positive definite at pivot {pivot} (diagonal {value:.3e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("vector length {0} does not match system size {1}")]
    BadRhs(usize, usize),
}

/// Kronecker product `a ⊗ b`.
///
/// Result entry `(i_a·b.rows + i_b, j_a·b.cols + j_b) = a[i_a, j_a]·b[i_b, j_b]`:
/// the left factor varies slower on both axes.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = CMatrix::zeros((ar * br, ac * bc));
    for ia in 0..ar {
        for ja in 0..ac {
            let va = a[(ia, ja)];
            for ib in 0..br {
                for jb in 0..bc {
                    out[(ia * br + ib, ja * bc + jb)] = va * b[(ib, jb)];
                }
            }
        }
    }
    out
}

/// Kronecker product of two vectors, left factor slower.
pub fn kron_vec(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &va in a {
        for &vb in b {
            out.push(va * vb);
        }
    }
    out
}

/// Row-wise Khatri-Rao product `a ⊙_R b`: row `n` of the result is
/// `kron(a_n, b_n)`, so the output is `(rows, a.cols·b.cols)`.
pub fn khatri_rao_rows(a: &CMatrix, b: &CMatrix) -> Result<CMatrix, TnError> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    if ar != br {
        return Err(TnError::RowMismatch(ar, br));
    }
    let mut out = CMatrix::zeros((ar, ac * bc));
    for n in 0..ar {
        for ja in 0..ac {
            let va = a[(n, ja)];
            for jb in 0..bc {
                out[(n, ja * bc + jb)] = va * b[(n, jb)];
            }
        }
    }
    Ok(out)
}

/// Element-wise (Hadamard) product `a ⊛ b`.
pub fn hadamard(a: &CMatrix, b: &CMatrix) -> Result<CMatrix, TnError> {
    if a.dim() != b.dim() {
        return Err(TnError::ShapeMismatch(a.dim(), b.dim()));
    }
    Ok(a * b)
}

/// Element-wise division `a ⊘ b` with a magnitude guard on the divisor.
///
/// Any divisor entry with `|b[i,j]| < DIV_GUARD` aborts the division: the
/// quotient would be numerically meaningless, and the caller (the ALS
/// downdate) is expected to rebuild the quantity from its definition.
pub fn hadamard_div(a: &CMatrix, b: &CMatrix) -> Result<CMatrix, TnError> {
    if a.dim() != b.dim() {
        return Err(TnError::ShapeMismatch(a.dim(), b.dim()));
    }
    for ((row, col), v) in b.indexed_iter() {
        let magnitude = v.norm();
        if magnitude < DIV_GUARD {
            return Err(TnError::DivisionGuard {
                row,
                col,
                magnitude,
            });
        }
    }
    Ok(a / b)
}

/// Dense complex tensor with entries stored in vectorization order
/// (mode 1 fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    entries: Vec<Complex64>,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, entries: Vec<Complex64>) -> Result<Self, TnError> {
        let expected: usize = shape.iter().product();
        if entries.len() != expected {
            return Err(TnError::LengthMismatch {
                len: entries.len(),
                expected,
                shape,
            });
        }
        Ok(Self { shape, entries })
    }

    /// Build a tensor by evaluating `f` at every multi-index.
    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> Complex64) -> Self {
        let total: usize = shape.iter().product();
        let mut idx = vec![0usize; shape.len()];
        let mut entries = Vec::with_capacity(total);
        for lin in 0..total {
            decompose_index(lin, &shape, &mut idx);
            entries.push(f(&idx));
        }
        Self { shape, entries }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn get(&self, idx: &[usize]) -> Complex64 {
        self.entries[linear_index(&self.shape, idx)]
    }
}

/// Linear index of a multi-index under the mode-1-fastest convention.
pub fn linear_index(shape: &[usize], idx: &[usize]) -> usize {
    debug_assert_eq!(shape.len(), idx.len());
    let mut lin = 0;
    let mut stride = 1;
    for (i, s) in idx.iter().zip(shape) {
        debug_assert!(i < s);
        lin += i * stride;
        stride *= s;
    }
    lin
}

fn decompose_index(mut lin: usize, shape: &[usize], idx: &mut [usize]) {
    for (i, s) in idx.iter_mut().zip(shape) {
        *i = lin % s;
        lin /= s;
    }
}

/// Vectorization: entries in linear order, mode 1 fastest.
pub fn vectorize(t: &DenseTensor) -> Vec<Complex64> {
    t.entries.clone()
}

/// Tensorization: inverse of [`vectorize`] for the given shape.
pub fn tensorize(v: Vec<Complex64>, shape: &[usize]) -> Result<DenseTensor, TnError> {
    DenseTensor::new(shape.to_vec(), v)
}

/// Gram matrix `AᴴA`, symmetrized so it is Hermitian to the last bit.
pub fn hermitian_gram(a: &CMatrix) -> CMatrix {
    let ah = a.t().mapv(|z| z.conj());
    let mut g = ah.dot(a);
    let m = g.nrows();
    for i in 0..m {
        g[(i, i)] = Complex64::new(g[(i, i)].re, 0.0);
        for j in (i + 1)..m {
            let avg = 0.5 * (g[(i, j)] + g[(j, i)].conj());
            g[(i, j)] = avg;
            g[(j, i)] = avg.conj();
        }
    }
    g
}

/// Solve `M x = rhs` for Hermitian positive-definite `M` by an LLᴴ
/// Cholesky factorization (no explicit inverse is ever formed).
pub fn solve_hpd(m: &CMatrix, rhs: &[Complex64]) -> Result<Vec<Complex64>, TnError> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(TnError::ShapeMismatch(m.dim(), (n, n)));
    }
    if rhs.len() != n {
        return Err(TnError::BadRhs(rhs.len(), n));
    }
    // Lower-triangular factor, built column by column.
    let mut l = CMatrix::zeros((n, n));
    for j in 0..n {
        let mut d = m[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(TnError::NotPositiveDefinite { pivot: j, value: d });
        }
        let ljj = d.sqrt();
        l[(j, j)] = Complex64::new(ljj, 0.0);
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / ljj;
        }
    }
    // Forward substitution: L z = rhs.
    let mut z = rhs.to_vec();
    for i in 0..n {
        for k in 0..i {
            let lik = l[(i, k)];
            let zk = z[k];
            z[i] -= lik * zk;
        }
        z[i] /= l[(i, i)];
    }
    // Back substitution: Lᴴ x = z.
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let lki = l[(k, i)].conj();
            let zk = z[k];
            z[i] -= lki * zk;
        }
        z[i] /= l[(i, i)];
    }
    Ok(z)
}
