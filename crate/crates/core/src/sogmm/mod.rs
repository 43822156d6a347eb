//! Self-organizing GMM fitting for a single frame.
//!
//! Mode seeking over 2D (normalized depth, intensity) features picks the
//! component count, the modes seed hard responsibilities, and log-space EM
//! refines a full-covariance 4D mixture.

mod em;
mod gbms;
mod kinit;

pub use em::{e_step, em_fit, m_step, EmOutcome};
pub use gbms::{gbms_mode_count, ModeSeeking};
pub use kinit::{kinit_responsibilities, KInit, ResponsibilityMatrix};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::DEFAULT_REGULARIZATION;
use crate::types::{Gmm4, MultimodalPointCloud};

/// Parameters of the per-frame fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SogmmConfig {
    /// Mode-seeking bandwidth on normalized features.
    pub bandwidth: f64,
    pub em_max_iters: usize,
    /// Relative change in data log-likelihood that ends EM.
    pub em_tol: f64,
    pub gbms_max_iters: usize,
    /// Seed shift below which mode seeking stops. `None` means `1e-4 · bandwidth`.
    pub gbms_shift_tol: Option<f64>,
    pub min_points_per_component: usize,
    /// Added to every covariance diagonal at the M-step.
    pub regularization: f64,
}

impl Default for SogmmConfig {
    fn default() -> Self {
        Self {
            bandwidth: 0.02,
            em_max_iters: 100,
            em_tol: 1e-4,
            gbms_max_iters: 100,
            gbms_shift_tol: None,
            min_points_per_component: 4,
            regularization: DEFAULT_REGULARIZATION,
        }
    }
}

impl SogmmConfig {
    pub fn with_bandwidth(bandwidth: f64) -> Self {
        Self {
            bandwidth,
            ..Self::default()
        }
    }

    pub fn shift_tol(&self) -> f64 {
        self.gbms_shift_tol.unwrap_or(1e-4 * self.bandwidth)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return bad("bandwidth must be positive");
        }
        if !(self.em_tol > 0.0) {
            return bad("em_tol must be positive");
        }
        if self.em_max_iters < 1 || self.gbms_max_iters < 1 {
            return bad("iteration caps must be at least 1");
        }
        if self.min_points_per_component < 1 {
            return bad("min_points_per_component must be at least 1");
        }
        if !(self.shift_tol() > 0.0) {
            return bad("gbms_shift_tol must be positive");
        }
        if !(self.regularization >= 0.0) {
            return bad("regularization must be nonnegative");
        }
        Ok(())
    }
}

/// A fitted local model and how it was obtained.
#[derive(Clone, Debug)]
pub struct SogmmFit {
    pub model: Gmm4,
    /// Modes found by mode seeking, before any reduction.
    pub modes_found: usize,
    /// Components EM started from.
    pub initial_components: usize,
    pub em_iterations: usize,
    pub removed_components: usize,
}

/// Min-max normalized depth paired with intensity.
pub fn frame_features(cloud: &MultimodalPointCloud, depths: &[f64]) -> Result<Vec<[f64; 2]>> {
    if depths.len() != cloud.len() {
        return Err(Error::InvalidInput(format!(
            "{} depths for {} points",
            depths.len(),
            cloud.len()
        )));
    }
    if depths.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFinite("depth"));
    }
    let lo = depths.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = depths.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    Ok(depths
        .iter()
        .zip(cloud.iter())
        .map(|(&d, p)| {
            let nd = if span > 0.0 { (d - lo) / span } else { 0.0 };
            [nd, p.intensity]
        })
        .collect())
}

/// Keeps the `keep` best-supported modes and reassigns the rest by nearest
/// surviving mode in feature space.
fn reduce_modes(
    features: &[[f64; 2]],
    seeking: &ModeSeeking,
    keep: usize,
) -> (Vec<usize>, usize) {
    let n_modes = seeking.modes.len();
    let mut support = vec![0usize; n_modes];
    for &a in &seeking.assignments {
        support[a] += 1;
    }
    let mut ranked: Vec<usize> = (0..n_modes).collect();
    ranked.sort_by(|&a, &b| support[b].cmp(&support[a]).then(a.cmp(&b)));
    ranked.truncate(keep);
    ranked.sort_unstable();
    let kept: Vec<[f64; 2]> = ranked.iter().map(|&m| seeking.modes[m]).collect();
    let tree = crate::kdtree::KdTree::new(kept);
    let assignments = features
        .iter()
        .map(|f| tree.nearest(f).map(|n| n.index).unwrap_or(0))
        .collect();
    (assignments, ranked.len())
}

/// Fits a 4D mixture to one frame's points.
pub fn fit_sogmm(
    cloud: &MultimodalPointCloud,
    depths: &[f64],
    cfg: &SogmmConfig,
) -> Result<SogmmFit> {
    cfg.validate()?;
    if cloud.is_empty() {
        return Err(Error::Empty("frame points"));
    }
    let features = frame_features(cloud, depths)?;
    let seeking = gbms_mode_count(&features, cfg)?;
    let modes_found = seeking.modes.len();
    let n = cloud.len();
    let max_components = (n / cfg.min_points_per_component).max(1);
    let (assignments, n_modes) = if modes_found > max_components {
        reduce_modes(&features, &seeking, max_components)
    } else {
        (seeking.assignments.clone(), modes_found)
    };
    let points = cloud.to_vec4s();
    let init = kinit_responsibilities(&assignments, n_modes)?;
    let initial_components = init.responsibilities.n_components();
    let outcome = em_fit(&points, &init.responsibilities, cfg)?;
    Ok(SogmmFit {
        model: outcome.model,
        modes_found,
        initial_components,
        em_iterations: outcome.iterations,
        removed_components: outcome.removed_components,
    })
}
