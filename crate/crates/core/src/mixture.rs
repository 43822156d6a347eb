//! Mixture-level numerics: log-likelihood, spatial marginal, intensity conditioning.

use nalgebra::{Matrix3, RowVector3, SVector, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussian::{cholesky_lower, LogSumExp, PreparedGaussian};
use crate::types::{Component, Gmm3, Gmm4, Mixture};

/// A mixture whose components have precomputed precision factors.
///
/// Weights are stored as logs separately from the Gaussians so a merge that
/// rescales every weight only rewrites `log_weights`.
#[derive(Clone, Debug, Default)]
pub struct PreparedMixture<const D: usize> {
    gaussians: Vec<PreparedGaussian<D>>,
    log_weights: Vec<f64>,
}

impl<const D: usize> PreparedMixture<D> {
    pub fn new(model: &Mixture<D>) -> Result<Self> {
        let mut p = Self::default();
        p.append(&model.components)?;
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.gaussians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaussians.is_empty()
    }

    /// Appends components; their weights are taken as given.
    pub fn append(&mut self, components: &[Component<D>]) -> Result<()> {
        let prepared = components
            .iter()
            .map(PreparedGaussian::from_component)
            .collect::<Result<Vec<_>>>()?;
        self.gaussians.extend(prepared);
        self.log_weights
            .extend(components.iter().map(|c| c.weight.ln()));
        Ok(())
    }

    /// Replaces all weights (length must match).
    pub fn set_weights(&mut self, weights: impl IntoIterator<Item = f64>) {
        self.log_weights.clear();
        self.log_weights.extend(weights.into_iter().map(f64::ln));
        debug_assert_eq!(self.log_weights.len(), self.gaussians.len());
    }

    pub fn gaussian(&self, k: usize) -> &PreparedGaussian<D> {
        &self.gaussians[k]
    }

    /// `ln τ_k + ln N(x; ν_k, Λ_k)`.
    #[inline]
    pub fn log_weighted_density(&self, k: usize, x: &SVector<f64, D>) -> f64 {
        self.log_weights[k] + self.gaussians[k].log_density(x)
    }

    fn check_subset(&self, subset: Option<&[usize]>) -> Result<()> {
        if let Some(s) = subset {
            if s.is_empty() {
                return Err(Error::EmptySubset);
            }
            if let Some(&bad) = s.iter().find(|&&k| k >= self.len()) {
                return Err(Error::IndexOutOfRange {
                    index: bad,
                    len: self.len(),
                });
            }
        } else if self.is_empty() {
            return Err(Error::EmptySubset);
        }
        Ok(())
    }

    #[inline]
    fn log_likelihood_unchecked(&self, x: &SVector<f64, D>, subset: Option<&[usize]>) -> f64 {
        let mut acc = LogSumExp::new();
        match subset {
            Some(s) => {
                for &k in s {
                    acc.add(self.log_weighted_density(k, x));
                }
            }
            None => {
                for k in 0..self.len() {
                    acc.add(self.log_weighted_density(k, x));
                }
            }
        }
        acc.value()
    }

    /// Log-likelihood of one point over `subset` (all components when `None`).
    pub fn log_likelihood(&self, x: &SVector<f64, D>, subset: Option<&[usize]>) -> Result<f64> {
        self.check_subset(subset)?;
        Ok(self.log_likelihood_unchecked(x, subset))
    }

    /// Per-point log-likelihoods, parallel over points.
    pub fn log_likelihoods(
        &self,
        points: &[SVector<f64, D>],
        subset: Option<&[usize]>,
    ) -> Result<Vec<f64>> {
        self.check_subset(subset)?;
        if points.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(Error::NonFinite("query point"));
        }
        Ok(points
            .par_iter()
            .with_min_len(256)
            .map(|x| self.log_likelihood_unchecked(x, subset))
            .collect())
    }
}

/// Per-point `ln Σ_{k∈subset} τ_k N(x_n; ν_k, Λ_k)`.
///
/// An empty point set yields an empty vector; an empty subset is an error.
pub fn gmm_log_likelihood<const D: usize>(
    points: &[SVector<f64, D>],
    model: &Mixture<D>,
    subset: Option<&[usize]>,
) -> Result<Vec<f64>> {
    if let Some(s) = subset {
        if s.is_empty() {
            return Err(Error::EmptySubset);
        }
        if let Some(&bad) = s.iter().find(|&&k| k >= model.len()) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                len: model.len(),
            });
        }
    }
    // Only prepare the components that will be evaluated.
    match subset {
        Some(s) => {
            let comps: Vec<Component<D>> = s.iter().map(|&k| model.components[k].clone()).collect();
            let prepared = PreparedMixture::new(&Mixture::from_parts_unchecked(comps, 0))?;
            prepared.log_likelihoods(points, None)
        }
        None => PreparedMixture::new(model)?.log_likelihoods(points, None),
    }
}

/// The spatial marginal: weights, `ν^x` and `Λ^xx` blocks.
pub fn marginalize_spatial(model: &Gmm4) -> Gmm3 {
    Mixture::from_parts_unchecked(
        model
            .components
            .iter()
            .map(Component::spatial_marginal)
            .collect(),
        model.support_count,
    )
}

/// Linear-Gaussian regression of intensity on position for one component.
#[derive(Clone, Debug)]
pub struct IntensityRegression {
    pub spatial: PreparedGaussian<3>,
    pub spatial_mean: Vector3<f64>,
    pub intensity_mean: f64,
    /// `Λ^ix (Λ^xx)⁻¹`.
    pub gain: RowVector3<f64>,
    /// `Λ^ii - Λ^ix (Λ^xx)⁻¹ Λ^xi`.
    pub residual_variance: f64,
}

impl IntensityRegression {
    pub fn new(c: &Component<4>) -> Result<Self> {
        let sxx: Matrix3<f64> = c.spatial_covariance();
        let sxi = c.cross_covariance();
        let l = cholesky_lower(&sxx)?;
        let solved = l
            .solve_lower_triangular(&sxi)
            .and_then(|y| l.tr_solve_lower_triangular(&y))
            .ok_or(Error::SingularFactor)?;
        Ok(Self {
            spatial: PreparedGaussian::new(c.spatial_mean(), &sxx)?,
            spatial_mean: c.spatial_mean(),
            intensity_mean: c.intensity_mean(),
            gain: solved.transpose(),
            residual_variance: (c.intensity_variance() - sxi.dot(&solved)).max(0.0),
        })
    }

    /// Unclamped conditional mean `E[i | x]` for this component.
    #[inline]
    pub fn conditional_mean(&self, x: &Vector3<f64>) -> f64 {
        self.intensity_mean + (self.gain * (x - self.spatial_mean))[0]
    }
}

/// Mixture-conditional intensity at one position.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionalIntensity {
    /// `E[i | x]` clamped to `[0, 1]`.
    pub mean: f64,
    /// `E[i | x]` before clamping.
    pub unclamped_mean: f64,
    pub variance: f64,
}

/// Precomputed per-component regressions for repeated conditioning.
#[derive(Clone, Debug)]
pub struct IntensityConditioner {
    regressions: Vec<IntensityRegression>,
    log_weights: Vec<f64>,
}

impl IntensityConditioner {
    pub fn new(model: &Gmm4) -> Result<Self> {
        if model.is_empty() {
            return Err(Error::Empty("model"));
        }
        Ok(Self {
            regressions: model
                .components
                .iter()
                .map(IntensityRegression::new)
                .collect::<Result<_>>()?,
            log_weights: model.components.iter().map(|c| c.weight.ln()).collect(),
        })
    }

    pub fn regression(&self, k: usize) -> &IntensityRegression {
        &self.regressions[k]
    }

    /// Posterior component weights `w_k(x) ∝ τ_k N(x; ν^x_k, Λ^xx_k)`.
    pub fn weights(&self, x: &Vector3<f64>) -> Result<Vec<f64>> {
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("conditioning point"));
        }
        let logs: Vec<f64> = self
            .regressions
            .iter()
            .zip(&self.log_weights)
            .map(|(r, lw)| lw + r.spatial.log_density(x))
            .collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::NoSupport);
        }
        let mut w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let s: f64 = w.iter().sum();
        for v in &mut w {
            *v /= s;
        }
        Ok(w)
    }

    pub fn condition(&self, x: &Vector3<f64>) -> Result<ConditionalIntensity> {
        let w = self.weights(x)?;
        let mut mean = 0.0;
        let mut second = 0.0;
        for (wk, r) in w.iter().zip(&self.regressions) {
            if *wk == 0.0 {
                continue;
            }
            let m = r.conditional_mean(x);
            mean += wk * m;
            second += wk * (r.residual_variance + m * m);
        }
        Ok(ConditionalIntensity {
            mean: mean.clamp(0.0, 1.0),
            unclamped_mean: mean,
            variance: (second - mean * mean).max(0.0),
        })
    }
}

/// `E[i | x]` (clamped to `[0, 1]`) and `Var[i | x]` under the mixture.
pub fn condition_intensity(model: &Gmm4, x: &Vector3<f64>) -> Result<ConditionalIntensity> {
    IntensityConditioner::new(model)?.condition(x)
}
