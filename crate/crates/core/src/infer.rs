//! Dense point-cloud reconstruction from a global model.
//!
//! Spatial samples come from each component's marginal `N(ν^x_k, Λ^xx_k)`;
//! intensity is the conditional mean `E[i | x]`. Component `k` draws from
//! its own generator stream, so output is independent of batching and
//! thread count.

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::cholesky_lower;
use crate::mixture::{IntensityConditioner, IntensityRegression};
use crate::sampling::{sample_with_factor, stream_rng, BoxMuller};
use crate::types::{Gmm4, MultimodalPoint, MultimodalPointCloud};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferenceConfig {
    pub total_samples: usize,
    /// Components processed per batch.
    pub batch_components: usize,
    pub rng_seed: u64,
    /// Condition on the whole mixture instead of the generating component.
    pub full_mixture_conditioning: bool,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            total_samples: 1_000_000,
            batch_components: 1024,
            rng_seed: 0,
            full_mixture_conditioning: false,
        }
    }
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_components < 1 {
            return Err(Error::InvalidConfig("batch_components must be at least 1".into()));
        }
        Ok(())
    }
}

/// Samples per component: `round(τ_k T)`, at least one each when `T ≥ |K|`.
pub fn sample_allocation(model: &Gmm4, total_samples: usize) -> Vec<usize> {
    let at_least_one = total_samples >= model.len();
    model
        .components
        .iter()
        .map(|c| {
            let n = (c.weight * total_samples as f64).round() as usize;
            if at_least_one {
                n.max(1)
            } else {
                n
            }
        })
        .collect()
}

/// Samples the model into a multimodal point cloud.
pub fn reconstruct(model: &Gmm4, cfg: &InferenceConfig) -> Result<MultimodalPointCloud> {
    cfg.validate()?;
    if cfg.total_samples == 0 || model.is_empty() {
        return Ok(MultimodalPointCloud::new());
    }
    let counts = sample_allocation(model, cfg.total_samples);
    let mixture = if cfg.full_mixture_conditioning {
        Some(IntensityConditioner::new(model)?)
    } else {
        None
    };

    let mut points = Vec::with_capacity(counts.iter().sum());
    let indices: Vec<usize> = (0..model.len()).collect();
    for batch in indices.chunks(cfg.batch_components) {
        let sampled: Vec<Vec<MultimodalPoint>> = batch
            .par_iter()
            .map(|&k| sample_one(model, k, counts[k], cfg.rng_seed, mixture.as_ref()))
            .collect::<Result<_>>()?;
        for s in sampled {
            points.extend(s);
        }
    }
    Ok(MultimodalPointCloud { points })
}

fn sample_one(
    model: &Gmm4,
    k: usize,
    n: usize,
    seed: u64,
    mixture: Option<&IntensityConditioner>,
) -> Result<Vec<MultimodalPoint>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let c = &model.components[k];
    let regression = IntensityRegression::new(c)?;
    let l = cholesky_lower(&c.spatial_covariance())?;
    let mut normals = BoxMuller::new(stream_rng(seed, k as u64));
    let xs: Vec<Vector3<f64>> = sample_with_factor(&c.spatial_mean(), &l, n, &mut normals);
    xs.into_iter()
        .map(|x| {
            let intensity = match mixture {
                Some(m) => m.condition(&x)?.mean,
                None => regression.conditional_mean(&x).clamp(0.0, 1.0),
            };
            Ok(MultimodalPoint {
                position: x,
                intensity,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Component, Mixture};
    use nalgebra::{Matrix4, Vector4};

    fn two_component() -> Gmm4 {
        Mixture::new(
            vec![
                Component::new(0.3, Vector4::new(0.0, 0.0, 0.0, 0.2), Matrix4::identity() * 0.01),
                Component::new(0.7, Vector4::new(1.0, 0.0, 0.0, 0.8), Matrix4::identity() * 0.02),
            ],
            100,
        )
        .unwrap()
    }

    #[test]
    fn zero_samples_is_empty() {
        let cfg = InferenceConfig {
            total_samples: 0,
            ..InferenceConfig::default()
        };
        assert!(reconstruct(&two_component(), &cfg).unwrap().is_empty());
    }

    #[test]
    fn independent_intensity_is_constant() {
        let m = Mixture::new(
            vec![Component::new(1.0, Vector4::new(0.0, 1.0, 2.0, 0.42), Matrix4::identity() * 0.05)],
            1,
        )
        .unwrap();
        let cfg = InferenceConfig {
            total_samples: 500,
            ..InferenceConfig::default()
        };
        let cloud = reconstruct(&m, &cfg).unwrap();
        assert_eq!(cloud.len(), 500);
        assert!(cloud.iter().all(|p| (p.intensity - 0.42).abs() < 1e-15));
    }

    #[test]
    fn batching_does_not_change_output() {
        let m = two_component();
        let base = InferenceConfig {
            total_samples: 1000,
            rng_seed: 9,
            ..InferenceConfig::default()
        };
        let a = reconstruct(&m, &base).unwrap();
        let b = reconstruct(
            &m,
            &InferenceConfig {
                batch_components: 1,
                ..base.clone()
            },
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn allocation_bounds() {
        let m = two_component();
        assert_eq!(sample_allocation(&m, 10), vec![3, 7]);
        assert_eq!(sample_allocation(&m, 1), vec![0, 1]);
        assert_eq!(sample_allocation(&m, 2), vec![1, 1]);
    }
}
