//! Paired timing of relevant-subset computation with and without the submap.
//!
//! Mapping runs normally; before each frame is processed, the same state
//! scores the frame once against all components and once against the hash
//! submap, so both timings see identical models.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mapper::{MapperConfig, MapperState, ObservedFrame};
use crate::sogmm::SogmmConfig;
use crate::spatialhash::HashGridSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Hash resolutions α to sweep.
    pub resolutions: Vec<f64>,
    /// Timing repeats per frame; the minimum is kept.
    pub repeats: usize,
    /// Worker threads for the timed scoring.
    pub timing_threads: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            resolutions: vec![0.1, 0.2, 0.4, 0.8],
            repeats: 3,
            timing_threads: 1,
        }
    }
}

/// One frame of one sweep point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchFrame {
    pub resolution: f64,
    pub frame: usize,
    pub n_points: usize,
    /// `|K|` when the frame was scored.
    pub n_components: usize,
    pub n_submap: usize,
    pub full_seconds: f64,
    pub submap_seconds: f64,
    /// Fraction of points with the same relevance under both paths.
    pub agreement: f64,
    pub cumulative_full: f64,
    pub cumulative_submap: f64,
}

impl BenchFrame {
    pub fn cumulative_ratio(&self) -> f64 {
        self.cumulative_full / self.cumulative_submap
    }
}

/// Summary of one resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub resolution: f64,
    pub frames_scored: usize,
    pub mean_submap: f64,
    pub final_components: usize,
    pub cumulative_ratio: f64,
    /// Agreement pooled over every scored point.
    pub agreement: f64,
}

fn min_time<T>(repeats: usize, mut f: impl FnMut() -> Result<T>) -> Result<(f64, T)> {
    let mut best = f64::INFINITY;
    let mut out = None;
    for _ in 0..repeats.max(1) {
        let t = Instant::now();
        let v = f()?;
        best = best.min(t.elapsed().as_secs_f64());
        out = Some(v);
    }
    Ok((best, out.expect("at least one repeat")))
}

/// Maps `frames` at one hash resolution, timing both scoring paths per frame.
pub fn bench_resolution(
    frames: &[ObservedFrame],
    spec: &HashGridSpec,
    mapper: &MapperConfig,
    sogmm: &SogmmConfig,
    bench: &BenchConfig,
) -> Result<Vec<BenchFrame>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(bench.timing_threads.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut state = MapperState::new(spec.clone())?;
    let mut out = Vec::new();
    let (mut cum_full, mut cum_sub) = (0.0, 0.0);
    for (k, frame) in frames.iter().enumerate() {
        let phi = mapper.phi.or(state.phi());
        if let (Some(phi), true) = (phi, state.global().is_some()) {
            let cloud = &frame.cloud;
            let (full_s, (full_mask, _)) = pool.install(|| {
                min_time(bench.repeats, || state.classify(cloud, phi, mapper.use_marginal, false))
            })?;
            let (sub_s, (sub_mask, n_submap)) = pool.install(|| {
                min_time(bench.repeats, || state.classify(cloud, phi, mapper.use_marginal, true))
            })?;
            let same = full_mask.iter().zip(&sub_mask).filter(|(a, b)| a == b).count();
            cum_full += full_s;
            cum_sub += sub_s;
            out.push(BenchFrame {
                resolution: spec.resolution,
                frame: k,
                n_points: frame.len(),
                n_components: state.n_components(),
                n_submap: n_submap.unwrap_or(0),
                full_seconds: full_s,
                submap_seconds: sub_s,
                agreement: if frame.is_empty() { 1.0 } else { same as f64 / frame.len() as f64 },
                cumulative_full: cum_full,
                cumulative_submap: cum_sub,
            });
        }
        state.process_frame(frame, mapper, sogmm)?;
    }
    Ok(out)
}

/// Runs [`bench_resolution`] for every configured resolution.
pub fn bench_sweep(
    frames: &[ObservedFrame],
    base: &HashGridSpec,
    mapper: &MapperConfig,
    sogmm: &SogmmConfig,
    bench: &BenchConfig,
) -> Result<Vec<BenchFrame>> {
    if bench.resolutions.is_empty() {
        return Err(Error::InvalidConfig("no resolutions to sweep".into()));
    }
    let mut all = Vec::new();
    for &alpha in &bench.resolutions {
        let spec = HashGridSpec {
            resolution: alpha,
            ..base.clone()
        };
        spec.validate()?;
        log::info!("bench: resolution {alpha}");
        all.extend(bench_resolution(frames, &spec, mapper, sogmm, bench)?);
    }
    Ok(all)
}

pub fn summarize(rows: &[BenchFrame]) -> Vec<BenchSummary> {
    let mut resolutions: Vec<f64> = rows.iter().map(|r| r.resolution).collect();
    resolutions.dedup();
    resolutions
        .into_iter()
        .map(|alpha| {
            let rs: Vec<&BenchFrame> = rows.iter().filter(|r| r.resolution == alpha).collect();
            let n = rs.len().max(1) as f64;
            let points: usize = rs.iter().map(|r| r.n_points).sum();
            let agreeing: f64 = rs.iter().map(|r| r.agreement * r.n_points as f64).sum();
            BenchSummary {
                resolution: alpha,
                frames_scored: rs.len(),
                mean_submap: rs.iter().map(|r| r.n_submap as f64).sum::<f64>() / n,
                final_components: rs.last().map_or(0, |r| r.n_components),
                cumulative_ratio: rs.last().map_or(f64::NAN, |r| r.cumulative_ratio()),
                agreement: if points == 0 { 1.0 } else { agreeing / points as f64 },
            }
        })
        .collect()
}

/// Text table of the sweep summary.
pub fn render_summary(rows: &[BenchSummary]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>6}  {:>6}  {:>9}  {:>6}  {:>8}  {:>9}",
        "alpha", "frames", "mean |B|", "|K|", "ratio", "agreement"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:>6.2}  {:>6}  {:>9.1}  {:>6}  {:>7.2}x  {:>9.4}",
            r.resolution, r.frames_scored, r.mean_submap, r.final_components, r.cumulative_ratio, r.agreement
        );
    }
    s
}
