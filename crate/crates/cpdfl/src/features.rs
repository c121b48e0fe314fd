//! (Quantized) Fourier tensor-product feature construction.
//!
//! Per input coordinate the feature factor is the pure-phase vector
//! `ψ_θ(x) = c·[e^{-2πjxk/θ}]_{k=0..I-1}` with `c = e^{2πjx(2+I)/(2θ)}`,
//! which recenters the frequency band to `-I/2 … I/2-1`. When `I = 2^K`
//! the factor itself factorizes into `K` Kronecker factors of length 2
//! ("quantization"), one per bit of the frequency index, so the weight
//! tensor can be stored as `Σ K_d` cores of two rows each.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use thiserror::Error;

use crate::tncore::CMatrix;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("need at least 2 basis frequencies per dimension (got {0})")]
    TooFewFrequencies(usize),
    #[error("theta must be positive and finite (got {0})")]
    BadTheta(f64),
    #[error("quantized features require a power-of-two frequency count (got {0})")]
    NotPowerOfTwo(usize),
    #[error("input value is not finite")]
    NonFinite,
    #[error("input {value} at row {row} lies outside [0, 1]; scale inputs to the unit hypercube first")]
    OutOfRange { row: usize, value: f64 },
    #[error("quantize_factor requires a quantized spec")]
    NotQuantized,
    #[error("bit index {bit} out of range for {bits} quantization bits")]
    BadBit { bit: usize, bits: usize },
    #[error("a feature family needs at least one theta")]
    EmptyFamily,
    #[error("thetas must be finite, positive, and pairwise distinct")]
    BadThetas,
    #[error("a feature family needs at least one dimension")]
    NoDimensions,
}

/// Per-dimension Fourier feature configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierSpec {
    /// Number of basis frequencies `I_d` (a power of two when quantized).
    pub num_freq: usize,
    /// Periodicity hyperparameter `θ > 0`.
    pub theta: f64,
    /// Whether the factor is built as `K_d = log2(I_d)` Kronecker factors
    /// of length two.
    pub quantized: bool,
}

impl FourierSpec {
    pub fn new(num_freq: usize, theta: f64, quantized: bool) -> Result<Self, FeatureError> {
        if num_freq < 2 {
            return Err(FeatureError::TooFewFrequencies(num_freq));
        }
        if !(theta.is_finite() && theta > 0.0) {
            return Err(FeatureError::BadTheta(theta));
        }
        if quantized && !num_freq.is_power_of_two() {
            return Err(FeatureError::NotPowerOfTwo(num_freq));
        }
        Ok(Self {
            num_freq,
            theta,
            quantized,
        })
    }

    /// Quantization bit count `K_d = log2(I_d)`; `None` when unquantized.
    pub fn bits(&self) -> Option<usize> {
        self.quantized
            .then(|| self.num_freq.trailing_zeros() as usize)
    }

    /// The same spec evaluated at a different periodicity.
    pub fn with_theta(&self, theta: f64) -> Self {
        Self { theta, ..*self }
    }
}

/// The `P` candidate periodicities `θ_1 … θ_P` plus the per-dimension
/// feature configuration shared by all of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureFamily {
    pub thetas: Vec<f64>,
    pub specs: Vec<FourierSpec>,
}

impl FeatureFamily {
    pub fn new(thetas: Vec<f64>, specs: Vec<FourierSpec>) -> Result<Self, FeatureError> {
        if thetas.is_empty() {
            return Err(FeatureError::EmptyFamily);
        }
        if specs.is_empty() {
            return Err(FeatureError::NoDimensions);
        }
        for (i, &t) in thetas.iter().enumerate() {
            if !(t.is_finite() && t > 0.0) {
                return Err(FeatureError::BadThetas);
            }
            if thetas[..i].contains(&t) {
                return Err(FeatureError::BadThetas);
            }
        }
        Ok(Self { thetas, specs })
    }

    /// A family with the same number of basis functions in every dimension.
    pub fn uniform(
        thetas: Vec<f64>,
        dims: usize,
        num_freq: usize,
        quantized: bool,
    ) -> Result<Self, FeatureError> {
        if dims == 0 {
            return Err(FeatureError::NoDimensions);
        }
        let theta0 = *thetas.first().ok_or(FeatureError::EmptyFamily)?;
        let spec = FourierSpec::new(num_freq, theta0, quantized)?;
        Self::new(thetas, vec![spec; dims])
    }

    /// Number of feature maps `P`.
    pub fn num_features(&self) -> usize {
        self.thetas.len()
    }

    /// Input dimensionality `D`.
    pub fn num_dims(&self) -> usize {
        self.specs.len()
    }

    /// The dimension-`d` spec evaluated at `θ_p`.
    pub fn spec_at(&self, d: usize, p: usize) -> FourierSpec {
        self.specs[d].with_theta(self.thetas[p])
    }

    /// The virtual tensor modes of this family, fastest to slowest: one
    /// mode per dimension, or per bit of each quantized dimension
    /// (dimension-major, bit-minor).
    pub fn mode_ids(&self) -> Vec<ModeId> {
        let mut out = Vec::new();
        for (dim, spec) in self.specs.iter().enumerate() {
            match spec.bits() {
                Some(bits) => {
                    for bit in 0..bits {
                        out.push(ModeId {
                            dim,
                            bit: Some(bit),
                        });
                    }
                }
                None => out.push(ModeId { dim, bit: None }),
            }
        }
        out
    }

    /// Row count of the core belonging to `mode`.
    pub fn mode_size(&self, mode: &ModeId) -> usize {
        match mode.bit {
            Some(_) => 2,
            None => self.specs[mode.dim].num_freq,
        }
    }
}

/// One virtual tensor mode: a whole input dimension, or a single bit of a
/// quantized dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeId {
    pub dim: usize,
    /// `None` for an unquantized dimension, `Some(b)` for frequency bit `b`.
    pub bit: Option<usize>,
}

/// The length-`I_d` Fourier factor `c·[e^{-2πjxk/θ}]_k` for one scalar.
/// Every entry has unit modulus.
pub fn fourier_factor(x: f64, spec: &FourierSpec) -> Result<Vec<Complex64>, FeatureError> {
    if !x.is_finite() {
        return Err(FeatureError::NonFinite);
    }
    let i_d = spec.num_freq;
    let base = TAU * x / spec.theta;
    let center = 0.5 * (2 + i_d) as f64;
    Ok((0..i_d)
        .map(|k| Complex64::from_polar(1.0, base * (center - k as f64)))
        .collect())
}

/// The `K_d` Kronecker factors of length two whose product (highest bit
/// slowest) reproduces [`fourier_factor`]. Factor `b` is
/// `[1, e^{-2πjx·2^b/θ}]`; the `c` prefactor is absorbed into factor 0.
pub fn quantize_factor(x: f64, spec: &FourierSpec) -> Result<Vec<[Complex64; 2]>, FeatureError> {
    if !x.is_finite() {
        return Err(FeatureError::NonFinite);
    }
    let bits = spec.bits().ok_or(FeatureError::NotQuantized)?;
    let base = TAU * x / spec.theta;
    let c_d = Complex64::from_polar(1.0, base * 0.5 * (2 + spec.num_freq) as f64);
    Ok((0..bits)
        .map(|b| {
            let step = Complex64::from_polar(1.0, -base * (1u64 << b) as f64);
            if b == 0 {
                [c_d, c_d * step]
            } else {
                [Complex64::new(1.0, 0.0), step]
            }
        })
        .collect())
}

/// The `N×I_d` feature matrix for one data column at one `θ_p`: row `n`
/// is `fourier_factor(column[n])`. Inputs must already lie in `[0, 1]`.
pub fn feature_matrix(
    column: &[f64],
    theta_p: f64,
    spec: &FourierSpec,
) -> Result<CMatrix, FeatureError> {
    let spec = spec.with_theta(theta_p);
    check_unit_interval(column)?;
    let mut out = Array2::zeros((column.len(), spec.num_freq));
    for (n, &x) in column.iter().enumerate() {
        let row = fourier_factor(x, &spec)?;
        for (k, v) in row.into_iter().enumerate() {
            out[(n, k)] = v;
        }
    }
    Ok(out)
}

/// The `N×2` matrix of quantization factor `bit` for one data column at
/// one `θ_p`: row `n` is `quantize_factor(column[n])[bit]`.
pub fn bit_matrix(
    column: &[f64],
    theta_p: f64,
    spec: &FourierSpec,
    bit: usize,
) -> Result<CMatrix, FeatureError> {
    let spec = spec.with_theta(theta_p);
    let bits = spec.bits().ok_or(FeatureError::NotQuantized)?;
    if bit >= bits {
        return Err(FeatureError::BadBit { bit, bits });
    }
    check_unit_interval(column)?;
    let base_scale = TAU / spec.theta;
    let weight = (1u64 << bit) as f64;
    let with_c = bit == 0;
    let center = 0.5 * (2 + spec.num_freq) as f64;
    let mut out = Array2::zeros((column.len(), 2));
    for (n, &x) in column.iter().enumerate() {
        let base = base_scale * x;
        let c_d = if with_c {
            Complex64::from_polar(1.0, base * center)
        } else {
            Complex64::new(1.0, 0.0)
        };
        out[(n, 0)] = c_d;
        out[(n, 1)] = c_d * Complex64::from_polar(1.0, -base * weight);
    }
    Ok(out)
}

fn check_unit_interval(column: &[f64]) -> Result<(), FeatureError> {
    for (row, &x) in column.iter().enumerate() {
        if !x.is_finite() {
            return Err(FeatureError::NonFinite);
        }
        if !(0.0..=1.0).contains(&x) {
            return Err(FeatureError::OutOfRange { row, value: x });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tncore::kron_vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn max_entry_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    /// Kron-reconstruct the full factor from quantized bit factors,
    /// highest bit slowest.
    fn reconstruct(factors: &[[Complex64; 2]]) -> Vec<Complex64> {
        let mut v = vec![Complex64::new(1.0, 0.0)];
        for f in factors.iter().rev() {
            v = kron_vec(&v, &f[..]);
        }
        v
    }

    #[test]
    fn zero_input_gives_all_ones() {
        let spec = FourierSpec::new(4, 1.7, false).unwrap();
        let f = fourier_factor(0.0, &spec).unwrap();
        for v in f {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn factor_at_theta_has_unit_moduli() {
        let spec = FourierSpec::new(6, 0.8, false).unwrap();
        let f = fourier_factor(spec.theta, &spec).unwrap();
        // exp(2πj(2+I)/2)·exp(-2πjk): all moduli stay exactly on the circle.
        for v in &f {
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
        let expected = Complex64::from_polar(1.0, std::f64::consts::TAU * 0.5 * (2.0 + 6.0));
        assert!((f[0] - expected).norm() < 1e-12);
    }

    #[test]
    fn factor_matches_scalar_oracle() {
        // x = 0.25, θ = 2, I = 4: entry k = e^{2πj·0.25·3/2}·e^{-πjk/4}.
        let spec = FourierSpec::new(4, 2.0, false).unwrap();
        let f = fourier_factor(0.25, &spec).unwrap();
        for (k, v) in f.iter().enumerate() {
            let c = Complex64::from_polar(1.0, std::f64::consts::TAU * 0.25 * 3.0 / 2.0);
            let w = Complex64::from_polar(
                1.0,
                -std::f64::consts::TAU * 0.25 * k as f64 / 2.0,
            );
            assert!((v - c * w).norm() < 1e-14);
        }
    }

    #[test]
    fn unit_modulus_over_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        for _ in 0..50 {
            let i_d = [2usize, 3, 4, 8, 16][rng.random_range(0..5)];
            let theta = 0.5 + 3.0 * rng.random::<f64>();
            let spec = FourierSpec::new(i_d, theta, false).unwrap();
            let f = fourier_factor(rng.random::<f64>(), &spec).unwrap();
            for v in f {
                assert!((v.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn theta_periodicity_for_even_frequency_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for &i_d in &[2usize, 4, 6, 8, 16] {
            let theta = 0.3 + 2.0 * rng.random::<f64>();
            let spec = FourierSpec::new(i_d, theta, false).unwrap();
            let x = rng.random::<f64>();
            let a = fourier_factor(x, &spec).unwrap();
            let b = fourier_factor(x + theta, &spec).unwrap();
            assert!(max_entry_diff(&a, &b) < 1e-10);
        }
    }

    #[test]
    fn quantized_all_ones_at_zero() {
        let spec = FourierSpec::new(8, 1.3, true).unwrap();
        let factors = quantize_factor(0.0, &spec).unwrap();
        assert_eq!(factors.len(), 3);
        for f in factors {
            for v in f {
                assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn single_bit_factor_equals_fourier_factor() {
        let spec = FourierSpec::new(2, 0.9, true).unwrap();
        let q = quantize_factor(0.37, &spec).unwrap();
        assert_eq!(q.len(), 1);
        let full = fourier_factor(0.37, &spec).unwrap();
        assert!(max_entry_diff(&q[0][..], &full) < 1e-14);
    }

    #[test]
    fn quantized_reconstruction_of_eight_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let theta = 0.4 + rng.random::<f64>();
        let spec = FourierSpec::new(8, theta, true).unwrap();
        let x = rng.random::<f64>();
        let q = quantize_factor(x, &spec).unwrap();
        let full = fourier_factor(x, &spec).unwrap();
        assert!(max_entry_diff(&reconstruct(&q), &full) < 1e-12);
    }

    #[test]
    fn quantized_reconstruction_over_random_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let i_d = [2usize, 4, 8, 16, 64][rng.random_range(0..5)];
            let theta = 10f64.powf(rng.random::<f64>() * 3.5 - 0.3);
            let spec = FourierSpec::new(i_d, theta, true).unwrap();
            let x = rng.random::<f64>();
            let q = quantize_factor(x, &spec).unwrap();
            let full = fourier_factor(x, &spec).unwrap();
            assert!(max_entry_diff(&reconstruct(&q), &full) < 1e-12);
        }
    }

    #[test]
    fn quantize_rejects_unquantized_spec() {
        let spec = FourierSpec::new(4, 1.0, false).unwrap();
        assert!(matches!(
            quantize_factor(0.5, &spec),
            Err(FeatureError::NotQuantized)
        ));
    }

    #[test]
    fn spec_validation() {
        assert!(matches!(
            FourierSpec::new(1, 1.0, false),
            Err(FeatureError::TooFewFrequencies(1))
        ));
        assert!(matches!(
            FourierSpec::new(4, 0.0, false),
            Err(FeatureError::BadTheta(_))
        ));
        assert!(matches!(
            FourierSpec::new(6, 1.0, true),
            Err(FeatureError::NotPowerOfTwo(6))
        ));
        assert_eq!(FourierSpec::new(16, 1.0, true).unwrap().bits(), Some(4));
        assert_eq!(FourierSpec::new(16, 1.0, false).unwrap().bits(), None);
    }

    #[test]
    fn feature_matrix_of_zero_column_is_all_ones() {
        let spec = FourierSpec::new(4, 1.0, false).unwrap();
        let m = feature_matrix(&[0.0, 0.0, 0.0], 2.0, &spec).unwrap();
        for v in m.iter() {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn feature_matrix_single_row_equals_factor() {
        let spec = FourierSpec::new(4, 1.0, false).unwrap();
        let m = feature_matrix(&[0.63], 1.8, &spec).unwrap();
        let f = fourier_factor(0.63, &spec.with_theta(1.8)).unwrap();
        for k in 0..4 {
            assert_eq!(m[(0, k)], f[k]);
        }
    }

    #[test]
    fn feature_matrix_rows_match_per_sample_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let column: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
        let spec = FourierSpec::new(5, 1.0, false).unwrap();
        let m = feature_matrix(&column, 0.7, &spec).unwrap();
        for (n, &x) in column.iter().enumerate() {
            let f = fourier_factor(x, &spec.with_theta(0.7)).unwrap();
            for k in 0..5 {
                assert_eq!(m[(n, k)], f[k]);
            }
        }
    }

    #[test]
    fn feature_matrix_rejects_out_of_range() {
        let spec = FourierSpec::new(4, 1.0, false).unwrap();
        match feature_matrix(&[0.2, 1.4], 1.0, &spec) {
            Err(FeatureError::OutOfRange { row: 1, value }) => assert_eq!(value, 1.4),
            other => panic!("expected out-of-range error, got {other:?}"),
        }
    }

    #[test]
    fn bit_matrix_rows_match_quantize_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let column: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
        let spec = FourierSpec::new(8, 1.0, true).unwrap();
        for bit in 0..3 {
            let m = bit_matrix(&column, 1.9, &spec, bit).unwrap();
            for (n, &x) in column.iter().enumerate() {
                let q = quantize_factor(x, &spec.with_theta(1.9)).unwrap();
                assert!((m[(n, 0)] - q[bit][0]).norm() < 1e-15);
                assert!((m[(n, 1)] - q[bit][1]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn family_modes_enumerate_bits_dimension_major() {
        let quant = FourierSpec::new(4, 1.0, true).unwrap();
        let plain = FourierSpec::new(3, 1.0, false).unwrap();
        let family = FeatureFamily::new(vec![1.0, 2.0], vec![quant, plain]).unwrap();
        let modes = family.mode_ids();
        assert_eq!(
            modes,
            vec![
                ModeId { dim: 0, bit: Some(0) },
                ModeId { dim: 0, bit: Some(1) },
                ModeId { dim: 1, bit: None },
            ]
        );
        assert_eq!(family.mode_size(&modes[0]), 2);
        assert_eq!(family.mode_size(&modes[2]), 3);
    }

    #[test]
    fn family_validation() {
        assert!(matches!(
            FeatureFamily::uniform(vec![], 2, 4, false),
            Err(FeatureError::EmptyFamily)
        ));
        assert!(matches!(
            FeatureFamily::uniform(vec![1.0, 1.0], 2, 4, false),
            Err(FeatureError::BadThetas)
        ));
        assert!(matches!(
            FeatureFamily::uniform(vec![1.0, -2.0], 2, 4, false),
            Err(FeatureError::BadThetas)
        ));
        let fam = FeatureFamily::uniform(vec![2.0, 5.0], 3, 4, true).unwrap();
        assert_eq!(fam.num_features(), 2);
        assert_eq!(fam.num_dims(), 3);
        assert_eq!(fam.mode_ids().len(), 6);
        assert_eq!(fam.spec_at(1, 1).theta, 5.0);
    }
}
