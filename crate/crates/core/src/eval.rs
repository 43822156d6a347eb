//! Reconstruction quality: MRE, precision, recall, PSNR and model size.

use std::fmt::Write as _;

use nalgebra::Vector3;
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{transform_cloud, Pose, MODEL_COMPONENT_BYTES, MODEL_HEADER_BYTES};
use crate::kdtree::KdTree;
use crate::types::{Gmm4, MultimodalPoint, MultimodalPointCloud};

/// PSNR reported when the intensity error vanishes.
pub const PSNR_CAP_DB: f64 = 99.0;

/// Default distance for precision and recall, meters.
pub const DEFAULT_DIST_THRESH: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    /// Mean distance from each predicted point to its nearest ground-truth point.
    pub mre: f64,
    pub precision: f64,
    pub recall: f64,
    pub psnr: f64,
    pub model_bytes: Option<u64>,
}

/// Serialized size of a model: 16-byte header plus 60 bytes per component.
pub fn model_bytes(model: &Gmm4) -> u64 {
    (MODEL_HEADER_BYTES + MODEL_COMPONENT_BYTES * model.len()) as u64
}

/// One representative per occupied voxel: the centroid of its points.
/// Output is ordered by voxel index.
pub fn voxel_downsample(cloud: &MultimodalPointCloud, voxel: f64) -> Result<MultimodalPointCloud> {
    if !(voxel > 0.0 && voxel.is_finite()) {
        return Err(Error::InvalidInput(format!("voxel size {voxel}")));
    }
    let mut cells: FxHashMap<[i64; 3], (Vector3<f64>, f64, usize)> = FxHashMap::default();
    for p in cloud.iter() {
        let key = voxel_key(&p.position, voxel);
        let e = cells.entry(key).or_insert((Vector3::zeros(), 0.0, 0));
        e.0 += p.position;
        e.1 += p.intensity;
        e.2 += 1;
    }
    let mut cells: Vec<_> = cells.into_iter().collect();
    cells.sort_unstable_by_key(|(k, _)| *k);
    Ok(cells
        .into_iter()
        .map(|(_, (sum, isum, n))| MultimodalPoint {
            position: sum / n as f64,
            intensity: (isum / n as f64).clamp(0.0, 1.0),
        })
        .collect())
}

#[inline]
pub fn voxel_key(p: &Vector3<f64>, voxel: f64) -> [i64; 3] {
    [
        (p.x / voxel).floor() as i64,
        (p.y / voxel).floor() as i64,
        (p.z / voxel).floor() as i64,
    ]
}

/// Concatenates sensor-frame clouds in the world frame and voxel-filters them.
pub fn build_ground_truth(frames: &[(MultimodalPointCloud, Pose)], voxel: f64) -> Result<MultimodalPointCloud> {
    if frames.iter().all(|(c, _)| c.is_empty()) {
        return Err(Error::Empty("ground-truth frames"));
    }
    let mut all = MultimodalPointCloud::new();
    for (cloud, pose) in frames {
        all.extend(&transform_cloud(cloud, pose));
    }
    voxel_downsample(&all, voxel)
}

fn tree_of(cloud: &MultimodalPointCloud) -> KdTree<3> {
    KdTree::new(
        cloud
            .iter()
            .map(|p| [p.position.x, p.position.y, p.position.z])
            .collect(),
    )
}

/// Nearest-neighbor metrics of `pred` against `gt`.
///
/// PSNR uses the intensity error of each predicted point against its
/// nearest ground-truth point, with peak value 1.
pub fn compute_metrics(
    pred: &MultimodalPointCloud,
    gt: &MultimodalPointCloud,
    dist_thresh: f64,
) -> Result<ReconstructionReport> {
    if pred.is_empty() {
        return Err(Error::Empty("predicted cloud"));
    }
    if gt.is_empty() {
        return Err(Error::Empty("ground-truth cloud"));
    }
    let gt_tree = tree_of(gt);
    let pred_tree = tree_of(pred);

    // (distance, within threshold, squared intensity error) per predicted point.
    let forward: Vec<(f64, bool, f64)> = pred
        .points
        .par_iter()
        .with_min_len(1024)
        .map(|p| {
            let q = [p.position.x, p.position.y, p.position.z];
            let nn = gt_tree.nearest(&q).expect("non-empty");
            let d = nn.distance_sq.sqrt();
            let di = p.intensity - gt.points[nn.index].intensity;
            (d, d <= dist_thresh, di * di)
        })
        .collect();
    let backward: Vec<bool> = gt
        .points
        .par_iter()
        .with_min_len(1024)
        .map(|p| {
            let q = [p.position.x, p.position.y, p.position.z];
            pred_tree.nearest(&q).expect("non-empty").distance_sq.sqrt() <= dist_thresh
        })
        .collect();

    let n = forward.len() as f64;
    let mre = forward.iter().map(|f| f.0).sum::<f64>() / n;
    let precision = forward.iter().filter(|f| f.1).count() as f64 / n;
    let mse = forward.iter().map(|f| f.2).sum::<f64>() / n;
    let recall = backward.iter().filter(|&&b| b).count() as f64 / backward.len() as f64;
    Ok(ReconstructionReport {
        mre,
        precision,
        recall,
        psnr: psnr_from_mse(mse),
        model_bytes: None,
    })
}

/// `-10 log10(MSE)` for peak 1, capped at [`PSNR_CAP_DB`].
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        return PSNR_CAP_DB;
    }
    (-10.0 * mse.log10()).min(PSNR_CAP_DB)
}

/// One row of the results table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub param: String,
    pub report: ReconstructionReport,
}

/// Megabytes (2^20 bytes) for the Mem. column.
pub fn bytes_to_mb(bytes: u64) -> f64 {
    bytes as f64 / (1u64 << 20) as f64
}

/// Aligned text table with columns Method, Param., MRE, Prec., Rec., PSNR, Mem.
pub fn render_table(rows: &[ReportRow]) -> String {
    let header = ["Method", "Param.", "MRE", "Prec.", "Rec.", "PSNR", "Mem."];
    let body: Vec<[String; 7]> = rows
        .iter()
        .map(|r| {
            [
                r.method.clone(),
                r.param.clone(),
                format!("{:.4}", r.report.mre),
                format!("{:.3}", r.report.precision),
                format!("{:.3}", r.report.recall),
                format!("{:.2}", r.report.psnr),
                r.report
                    .model_bytes
                    .map_or_else(|| "-".to_string(), |b| format!("{:.3}", bytes_to_mb(b))),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let line = |cells: &[&str], out: &mut String| {
        let mut first = true;
        for (c, w) in cells.iter().zip(widths) {
            if !first {
                out.push_str("  ");
            }
            first = false;
            let _ = write!(out, "{c:>w$}");
        }
        out.push('\n');
    };
    line(&header, &mut out);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    line(&rule.iter().map(String::as_str).collect::<Vec<_>>(), &mut out);
    for row in &body {
        line(&row.iter().map(String::as_str).collect::<Vec<_>>(), &mut out);
    }
    out
}
