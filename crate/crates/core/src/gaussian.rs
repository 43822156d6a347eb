//! Gaussian log-densities in Cholesky form.
//!
//! With `Σ = L Lᵀ` and `P = L⁻¹`,
//! `ln N(x; μ, Σ) = -½ (D ln 2π + ‖P (x - μ)‖²) + Σⱼ ln Pⱼⱼ`.
//! `P` is lower triangular so the Mahalanobis term is a triangular
//! mat-vec and the normalizer a sum over its diagonal.

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};
use crate::types::Component;

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Default covariance regularization (added to the diagonal at the M-step).
pub const DEFAULT_REGULARIZATION: f64 = 1e-6;

/// Lower Cholesky factor of an SPD matrix.
pub fn cholesky_lower<const D: usize>(cov: &SMatrix<f64, D, D>) -> Result<SMatrix<f64, D, D>> {
    if !cov.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("covariance"));
    }
    let mut l = SMatrix::<f64, D, D>::zeros();
    for j in 0..D {
        let mut d = cov[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..D {
            let mut s = cov[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Inverse of a lower-triangular factor, itself lower triangular.
pub fn invert_lower<const D: usize>(l: &SMatrix<f64, D, D>) -> Result<SMatrix<f64, D, D>> {
    for j in 0..D {
        let d = l[(j, j)];
        if d == 0.0 || !d.is_finite() {
            return Err(Error::SingularFactor);
        }
    }
    let mut p = SMatrix::<f64, D, D>::zeros();
    for j in 0..D {
        p[(j, j)] = 1.0 / l[(j, j)];
        for i in (j + 1)..D {
            let mut s = 0.0;
            for k in j..i {
                s += l[(i, k)] * p[(k, j)];
            }
            p[(i, j)] = -s / l[(i, i)];
        }
    }
    Ok(p)
}

/// `‖P v‖²` for lower-triangular `P`.
#[inline]
fn lower_sq_norm<const D: usize>(p: &SMatrix<f64, D, D>, v: &SVector<f64, D>) -> f64 {
    let mut acc = 0.0;
    for i in 0..D {
        let mut s = 0.0;
        for k in 0..=i {
            s += p[(i, k)] * v[k];
        }
        acc += s * s;
    }
    acc
}

/// Log-density of `x` under `N(mean, L Lᵀ)` given the lower Cholesky factor `L`.
pub fn gaussian_log_density<const D: usize>(
    x: &SVector<f64, D>,
    mean: &SVector<f64, D>,
    chol_lower: &SMatrix<f64, D, D>,
) -> Result<f64> {
    if !x.iter().all(|v| v.is_finite()) || !mean.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("gaussian_log_density input"));
    }
    let p = invert_lower(chol_lower)?;
    let maha = lower_sq_norm(&p, &(x - mean));
    let log_diag: f64 = (0..D).map(|j| p[(j, j)].ln()).sum();
    Ok(-0.5 * (D as f64 * LN_2PI + maha) + log_diag)
}

/// A Gaussian with its precision factor precomputed, for repeated evaluation.
#[derive(Clone, Debug)]
pub struct PreparedGaussian<const D: usize> {
    pub mean: SVector<f64, D>,
    /// `P = L⁻¹`, lower triangular.
    pub precision_factor: SMatrix<f64, D, D>,
    /// `-½ D ln 2π + Σ ln Pⱼⱼ`; excludes the mixture weight.
    pub log_normalizer: f64,
}

impl<const D: usize> PreparedGaussian<D> {
    pub fn new(mean: SVector<f64, D>, covariance: &SMatrix<f64, D, D>) -> Result<Self> {
        if !mean.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("mean"));
        }
        let l = cholesky_lower(covariance)?;
        let p = invert_lower(&l)?;
        let log_diag: f64 = (0..D).map(|j| p[(j, j)].ln()).sum();
        Ok(Self {
            mean,
            precision_factor: p,
            log_normalizer: -0.5 * D as f64 * LN_2PI + log_diag,
        })
    }

    pub fn from_component(c: &Component<D>) -> Result<Self> {
        Self::new(c.mean, &c.covariance)
    }

    #[inline]
    pub fn mahalanobis_sq(&self, x: &SVector<f64, D>) -> f64 {
        lower_sq_norm(&self.precision_factor, &(x - self.mean))
    }

    #[inline]
    pub fn log_density(&self, x: &SVector<f64, D>) -> f64 {
        self.log_normalizer - 0.5 * self.mahalanobis_sq(x)
    }
}

/// One-pass log-sum-exp accumulator.
#[derive(Clone, Copy, Debug)]
pub struct LogSumExp {
    max: f64,
    scaled_sum: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self::new()
    }
}

impl LogSumExp {
    pub fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            scaled_sum: 0.0,
        }
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        if v <= self.max {
            if v > f64::NEG_INFINITY {
                self.scaled_sum += (v - self.max).exp();
            }
        } else if v.is_nan() {
            self.max = f64::NAN;
        } else {
            self.scaled_sum = self.scaled_sum * (self.max - v).exp() + 1.0;
            self.max = v;
        }
    }

    /// `ln Σ exp(vᵢ)`; `-∞` when nothing finite was added.
    #[inline]
    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled_sum.ln()
        }
    }
}

/// `ln Σ exp(vᵢ)` over a slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};

    #[test]
    fn standard_normal_at_mean_4d() {
        let l = Matrix4::identity();
        let x = Vector4::new(0.3, -1.0, 2.0, 0.5);
        let v = gaussian_log_density(&x, &x, &l).unwrap();
        assert!((v - (-2.0 * LN_2PI)).abs() < 1e-14);
    }

    #[test]
    fn unit_mahalanobis_3d() {
        let l = Matrix3::identity();
        let m = Vector3::zeros();
        let x = Vector3::new(1.0, 0.0, 0.0);
        let v = gaussian_log_density(&x, &m, &l).unwrap();
        assert!((v - (-1.5 * LN_2PI - 0.5)).abs() < 1e-14);
    }

    #[test]
    fn rejects_non_finite_and_singular() {
        let l = Matrix3::identity();
        let m = Vector3::zeros();
        let x = Vector3::new(f64::NAN, 0.0, 0.0);
        assert!(matches!(
            gaussian_log_density(&x, &m, &l),
            Err(Error::NonFinite(_))
        ));
        let mut s = Matrix3::identity();
        s[(1, 1)] = 0.0;
        assert!(matches!(
            gaussian_log_density(&Vector3::zeros(), &m, &s),
            Err(Error::SingularFactor)
        ));
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let c = Matrix3::new(1.0, 2.0, 0.0, 2.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(matches!(cholesky_lower(&c), Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn cholesky_reconstructs() {
        let c = Matrix3::new(4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0);
        let l = cholesky_lower(&c).unwrap();
        assert!((l * l.transpose() - c).amax() < 1e-14);
        let p = invert_lower(&l).unwrap();
        assert!((p * l - Matrix3::identity()).amax() < 1e-14);
    }

    #[test]
    fn streaming_lse_matches_slice() {
        let vals = [-1000.0, -3.0, 2.5, -0.1, 700.0, 699.0];
        let mut acc = LogSumExp::new();
        for v in vals {
            acc.add(v);
        }
        assert!((acc.value() - log_sum_exp(&vals)).abs() < 1e-12);
        assert_eq!(LogSumExp::new().value(), f64::NEG_INFINITY);
    }
}
