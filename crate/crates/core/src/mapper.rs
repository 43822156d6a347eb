//! Incremental mapping: novelty filtering, local fitting, merging and hashing.
//!
//! Each frame is scored against the global model. Points whose spatial
//! log-likelihood falls below `φ` are novel; once enough of them accumulate
//! a local model is fit, appended to the global model, and its components
//! are inserted into the spatial hash. The hash restricts scoring to the
//! components near the frame.

use std::time::Instant;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::PreparedMixture;
use crate::sogmm::{fit_sogmm, SogmmConfig};
use crate::spatialhash::{HashGridSpec, SpatialHashTable};
use crate::types::{Gmm4, Mixture, MultimodalPoint, MultimodalPointCloud};

/// World-frame points of one frame with the sensor depth of each point.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObservedFrame {
    pub cloud: MultimodalPointCloud,
    pub depths: Vec<f64>,
}

impl ObservedFrame {
    pub fn new(cloud: MultimodalPointCloud, depths: Vec<f64>) -> Result<Self> {
        if cloud.len() != depths.len() {
            return Err(Error::InvalidInput(format!(
                "{} depths for {} points",
                depths.len(),
                cloud.len()
            )));
        }
        Ok(Self { cloud, depths })
    }

    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }

    pub fn select(&self, mask: &[bool]) -> ObservedFrame {
        let mut out = ObservedFrame::default();
        for ((p, d), &keep) in self.cloud.iter().zip(&self.depths).zip(mask) {
            if keep {
                out.cloud.points.push(*p);
                out.depths.push(*d);
            }
        }
        out
    }

    pub fn append(&mut self, other: &ObservedFrame) {
        self.cloud.extend(&other.cloud);
        self.depths.extend_from_slice(&other.depths);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapperConfig {
    /// Fixed log-likelihood threshold. When unset, it is calibrated on the
    /// first fitted frame and then frozen.
    pub phi: Option<f64>,
    /// Quantile used for calibration.
    pub phi_quantile: f64,
    /// A local model is fit once more than this many relevant points exist.
    pub min_relevant_points: usize,
    /// Score on the spatial marginal (`true`) or the full 4D density.
    pub use_marginal: bool,
    /// Restrict scoring to components found through the spatial hash.
    pub use_submap: bool,
    /// Cached points beyond this force a fit.
    pub cache_cap: usize,
}

impl Default for MapperConfig {
    fn default() -> Self {
        Self {
            phi: None,
            phi_quantile: 0.02,
            min_relevant_points: 640,
            use_marginal: true,
            use_submap: true,
            cache_cap: 1_000_000,
        }
    }
}

impl MapperConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_relevant_points < 1 {
            return Err(Error::InvalidConfig("min_relevant_points must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.phi_quantile) {
            return Err(Error::InvalidConfig("phi_quantile must lie in [0, 1]".into()));
        }
        if let Some(phi) = self.phi {
            if phi.is_nan() {
                return Err(Error::InvalidConfig("phi is NaN".into()));
            }
        }
        if self.cache_cap < 1 {
            return Err(Error::InvalidConfig("cache_cap must be at least 1".into()));
        }
        Ok(())
    }
}

/// Which path `process_frame` took.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Fit,
    Cached,
    FitFailed,
}

/// One line of the per-frame report stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameReport {
    pub frame: u64,
    pub n_points: usize,
    pub n_relevant: usize,
    /// `|B|`; `None` when the submap was not used or the model was empty.
    pub n_submap: Option<usize>,
    pub n_components: usize,
    pub n_new_components: usize,
    pub n_cached: usize,
    pub branch: Branch,
    pub zr_seconds: f64,
    pub fit_seconds: f64,
    pub merge_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

/// Per-frame timings kept in the state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameTiming {
    pub zr_seconds: f64,
    pub fit_seconds: f64,
    pub merge_seconds: f64,
}

/// Relevant points of a frame and the per-point scores.
#[derive(Clone, Debug)]
pub struct RelevantSubset {
    pub frame: ObservedFrame,
    pub mask: Vec<bool>,
    /// `|B|` when a submap query was made.
    pub submap_size: Option<usize>,
}

/// Global model, hash table, residual cache and counters.
#[derive(Clone, Debug)]
pub struct MapperState {
    global: Option<Gmm4>,
    marginal: PreparedMixture<3>,
    full: PreparedMixture<4>,
    table: SpatialHashTable,
    cache: ObservedFrame,
    phi: Option<f64>,
    frame_counter: u64,
    timings: Vec<FrameTiming>,
}

impl MapperState {
    pub fn new(spec: HashGridSpec) -> Result<Self> {
        Ok(Self {
            global: None,
            marginal: PreparedMixture::default(),
            full: PreparedMixture::default(),
            table: SpatialHashTable::new(spec)?,
            cache: ObservedFrame::default(),
            phi: None,
            frame_counter: 0,
            timings: Vec::new(),
        })
    }

    /// Resumes from a saved model; the hash table is rebuilt.
    pub fn from_model(spec: HashGridSpec, model: Gmm4) -> Result<Self> {
        model.validate_with_tolerance(1e-5)?;
        let mut s = Self::new(spec.clone())?;
        s.marginal.append(&crate::mixture::marginalize_spatial(&model).components)?;
        s.full.append(&model.components)?;
        s.table = SpatialHashTable::rebuild(spec, &model)?;
        s.global = Some(model);
        Ok(s)
    }

    pub fn global(&self) -> Option<&Gmm4> {
        self.global.as_ref()
    }

    pub fn table(&self) -> &SpatialHashTable {
        &self.table
    }

    pub fn cache(&self) -> &ObservedFrame {
        &self.cache
    }

    /// Threshold in use, if known yet.
    pub fn phi(&self) -> Option<f64> {
        self.phi
    }

    pub fn frame_counter(&self) -> u64 {
        self.frame_counter
    }

    pub fn timings(&self) -> &[FrameTiming] {
        &self.timings
    }

    pub fn n_components(&self) -> usize {
        self.global.as_ref().map_or(0, Mixture::len)
    }

    fn effective_phi(&self, cfg: &MapperConfig) -> Option<f64> {
        cfg.phi.or(self.phi)
    }

    /// Component indices near the given points.
    pub fn submap(&self, positions: &[Vector3<f64>]) -> Vec<usize> {
        self.table.query_submap(positions)
    }

    /// Per-point scores under the global model; `None` when uninitialized.
    /// An empty subset scores every point `-∞`.
    pub fn score(
        &self,
        cloud: &MultimodalPointCloud,
        use_marginal: bool,
        subset: Option<&[usize]>,
    ) -> Result<Option<Vec<f64>>> {
        if self.global.is_none() {
            return Ok(None);
        }
        if subset.is_some_and(<[usize]>::is_empty) {
            return Ok(Some(vec![f64::NEG_INFINITY; cloud.len()]));
        }
        let scores = if use_marginal {
            self.marginal.log_likelihoods(&cloud.positions(), subset)?
        } else {
            self.full.log_likelihoods(&cloud.to_vec4s(), subset)?
        };
        Ok(Some(scores))
    }

    /// Novelty mask for a frame under explicit path choices.
    pub fn classify(
        &self,
        cloud: &MultimodalPointCloud,
        phi: f64,
        use_marginal: bool,
        use_submap: bool,
    ) -> Result<(Vec<bool>, Option<usize>)> {
        if self.global.is_none() {
            return Ok((vec![true; cloud.len()], None));
        }
        let subset = if use_submap {
            Some(self.submap(&cloud.positions()))
        } else {
            None
        };
        let n_submap = subset.as_ref().map(Vec::len);
        let scores = self
            .score(cloud, use_marginal, subset.as_deref())?
            .expect("initialized");
        Ok((scores.iter().map(|&l| l < phi).collect(), n_submap))
    }

    /// Points of `frame` not yet explained by the global model.
    pub fn relevant_subset(&self, frame: &ObservedFrame, cfg: &MapperConfig) -> Result<RelevantSubset> {
        let phi = match (self.global.is_some(), self.effective_phi(cfg)) {
            (true, Some(phi)) => phi,
            // Uninitialized, or no threshold yet: everything is novel.
            _ => {
                return Ok(RelevantSubset {
                    frame: frame.clone(),
                    mask: vec![true; frame.len()],
                    submap_size: None,
                })
            }
        };
        let (mask, submap_size) = self.classify(&frame.cloud, phi, cfg.use_marginal, cfg.use_submap)?;
        Ok(RelevantSubset {
            frame: frame.select(&mask),
            mask,
            submap_size,
        })
    }

    /// Appends a local model with support-proportional weights and hashes
    /// its components.
    pub fn merge_global(&mut self, local: &Gmm4) -> Result<()> {
        local.validate()?;
        let start = self.n_components();
        match self.global.as_mut() {
            None => {
                self.global = Some(local.clone());
            }
            Some(global) => {
                merge_into(global, local);
            }
        }
        let global = self.global.as_ref().expect("just set");
        self.marginal
            .append(&crate::mixture::marginalize_spatial(local).components)?;
        self.full.append(&local.components)?;
        let weights: Vec<f64> = global.components.iter().map(|c| c.weight).collect();
        self.marginal.set_weights(weights.iter().copied());
        self.full.set_weights(weights);
        for (j, c) in local.components.iter().enumerate() {
            self.table.insert_component(start + j, c);
        }
        Ok(())
    }

    /// Runs one frame through the pipeline.
    pub fn process_frame(&mut self, frame: &ObservedFrame, cfg: &MapperConfig, sogmm: &SogmmConfig) -> Result<FrameReport> {
        cfg.validate()?;
        let frame_id = self.frame_counter;
        self.frame_counter += 1;

        let t0 = Instant::now();
        let relevant = self.relevant_subset(frame, cfg)?;
        let zr_seconds = t0.elapsed().as_secs_f64();

        let mut candidates = self.cache.clone();
        candidates.append(&relevant.frame);
        let n_relevant = relevant.frame.len();

        let mut report = FrameReport {
            frame: frame_id,
            n_points: frame.len(),
            n_relevant,
            n_submap: relevant.submap_size,
            n_components: self.n_components(),
            n_new_components: 0,
            n_cached: 0,
            branch: Branch::Cached,
            zr_seconds,
            fit_seconds: 0.0,
            merge_seconds: 0.0,
            error: None,
        };

        let must_fit = candidates.len() > cfg.min_relevant_points || candidates.len() >= cfg.cache_cap;
        if !must_fit || candidates.is_empty() {
            report.n_cached = candidates.len();
            self.cache = candidates;
            self.timings.push(FrameTiming {
                zr_seconds,
                fit_seconds: 0.0,
                merge_seconds: 0.0,
            });
            return Ok(report);
        }

        let t1 = Instant::now();
        let fit = fit_sogmm(&candidates.cloud, &candidates.depths, sogmm);
        report.fit_seconds = t1.elapsed().as_secs_f64();
        match fit {
            Ok(fit) => {
                let t2 = Instant::now();
                let local = fit.model;
                self.merge_global(&local)?;
                if cfg.phi.is_none() && self.phi.is_none() {
                    self.phi = Some(self.calibrate_on(&candidates.cloud, cfg)?);
                }
                report.merge_seconds = t2.elapsed().as_secs_f64();
                report.branch = Branch::Fit;
                report.n_new_components = local.len();
                report.n_components = self.n_components();
                self.cache = ObservedFrame::default();
            }
            Err(e) => {
                log::warn!("frame {frame_id}: local fit failed: {e}");
                report.branch = Branch::FitFailed;
                report.error = Some(e.to_string());
                report.n_cached = candidates.len();
                self.cache = candidates;
            }
        }
        self.timings.push(FrameTiming {
            zr_seconds,
            fit_seconds: report.fit_seconds,
            merge_seconds: report.merge_seconds,
        });
        Ok(report)
    }

    fn calibrate_on(&self, cloud: &MultimodalPointCloud, cfg: &MapperConfig) -> Result<f64> {
        let scores = self.score(cloud, cfg.use_marginal, None)?.expect("initialized");
        quantile_threshold(scores, cfg.phi_quantile)
    }
}

/// Appends `local` to `global`, weighting each side by its support count.
pub fn merge_into(global: &mut Gmm4, local: &Gmm4) {
    let ng = global.support_count as f64;
    let nl = local.support_count as f64;
    let total = ng + nl;
    let (scale_g, scale_l) = if total > 0.0 {
        (ng / total, nl / total)
    } else {
        // No support information: treat both sides as equally supported.
        (0.5, 0.5)
    };
    for c in &mut global.components {
        c.weight *= scale_g;
    }
    global.components.extend(local.components.iter().map(|c| {
        let mut c = c.clone();
        c.weight *= scale_l;
        c
    }));
    global.support_count += local.support_count;
}

/// Threshold such that `⌈q N⌉` scores lie strictly below it: `q = 0` gives
/// the minimum, `q = 1` the next float above the maximum.
pub fn quantile_threshold(mut scores: Vec<f64>, quantile: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::Empty("calibration frame"));
    }
    if !(0.0..=1.0).contains(&quantile) {
        return Err(Error::InvalidInput(format!("quantile {quantile} outside [0, 1]")));
    }
    scores.sort_by(f64::total_cmp);
    let k = (quantile * scores.len() as f64).ceil() as usize;
    Ok(if k >= scores.len() {
        scores[scores.len() - 1].next_up()
    } else {
        scores[k]
    })
}

/// Threshold from a model's spatial-marginal scores on a frame.
pub fn calibrate_phi(model: &Gmm4, frame: &MultimodalPointCloud, quantile: f64) -> Result<f64> {
    if frame.is_empty() {
        return Err(Error::Empty("calibration frame"));
    }
    let marginal = PreparedMixture::new(&crate::mixture::marginalize_spatial(model))?;
    let scores = marginal.log_likelihoods(&frame.positions(), None)?;
    quantile_threshold(scores, quantile)
}

/// Points of a cloud as a frame with unknown depth (depth taken as range).
pub fn frame_from_cloud(cloud: MultimodalPointCloud) -> ObservedFrame {
    let depths = cloud.iter().map(|p: &MultimodalPoint| p.position.norm()).collect();
    ObservedFrame { cloud, depths }
}
