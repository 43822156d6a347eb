//! Adapters from common RGB-D trajectory formats to a [`Manifest`].

use std::path::{Path, PathBuf};

use nalgebra::Vector3;

use super::frame::CameraIntrinsics;
use super::manifest::{Manifest, ManifestFrame};
use super::pose::Pose;
use crate::error::{Error, Result};

/// Largest timestamp gap, in seconds, when pairing TUM streams.
pub const TUM_MAX_DT: f64 = 0.02;

fn line_err(line: usize, message: impl Into<String>) -> Error {
    Error::Manifest {
        line,
        message: message.into(),
    }
}

/// Parses a Redwood/ICL-NUIM `.log` trajectory: blocks of one metadata
/// line followed by four rows of a sensor-to-world matrix.
pub fn parse_trajectory_log(text: &str) -> Result<Vec<Pose>> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    if !lines.len().is_multiple_of(5) {
        return Err(line_err(
            lines.last().map_or(0, |l| l.0),
            format!("{} non-empty lines is not a multiple of 5", lines.len()),
        ));
    }
    lines
        .chunks_exact(5)
        .map(|block| {
            let mut m = [0.0; 16];
            for (r, (line, row)) in block[1..].iter().enumerate() {
                let vals: Vec<&str> = row.split_whitespace().collect();
                if vals.len() != 4 {
                    return Err(line_err(*line, "matrix row needs 4 values"));
                }
                for (c, v) in vals.iter().enumerate() {
                    m[4 * r + c] = v.parse().map_err(|_| line_err(*line, format!("bad number {v:?}")))?;
                }
            }
            Pose::from_row_major(&m).map_err(|e| line_err(block[0].0, e.to_string()))
        })
        .collect()
}

/// Parses a TUM file list (`timestamp path` per line, `#` comments).
pub fn parse_tum_list(text: &str) -> Result<Vec<(f64, String)>> {
    let mut out = Vec::new();
    for (i, l) in text.lines().enumerate() {
        let l = l.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let mut tok = l.split_whitespace();
        let (Some(t), Some(p)) = (tok.next(), tok.next()) else {
            return Err(line_err(i + 1, "expected 'timestamp path'"));
        };
        let t: f64 = t.parse().map_err(|_| line_err(i + 1, format!("bad timestamp {t:?}")))?;
        out.push((t, p.to_string()));
    }
    Ok(out)
}

/// Parses a TUM trajectory (`timestamp tx ty tz qx qy qz qw`).
pub fn parse_tum_trajectory(text: &str) -> Result<Vec<(f64, Pose)>> {
    let mut out = Vec::new();
    for (i, l) in text.lines().enumerate() {
        let l = l.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let v: Vec<f64> = l
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| line_err(i + 1, format!("bad number {t:?}"))))
            .collect::<Result<_>>()?;
        if v.len() != 8 {
            return Err(line_err(i + 1, "expected 8 values"));
        }
        let pose = Pose::from_quaternion(Vector3::new(v[1], v[2], v[3]), [v[4], v[5], v[6], v[7]])
            .map_err(|e| line_err(i + 1, e.to_string()))?;
        out.push((v[0], pose));
    }
    Ok(out)
}

/// Index of the entry in `sorted` (by timestamp) nearest to `t`, within `max_dt`.
fn nearest_stamp<T>(sorted: &[(f64, T)], t: f64, max_dt: f64) -> Option<usize> {
    let i = sorted.partition_point(|(s, _)| *s < t);
    [i.checked_sub(1), (i < sorted.len()).then_some(i)]
        .into_iter()
        .flatten()
        .min_by(|&a, &b| (sorted[a].0 - t).abs().total_cmp(&(sorted[b].0 - t).abs()))
        .filter(|&k| (sorted[k].0 - t).abs() <= max_dt)
}

/// Builds a manifest from a TUM RGB-D sequence directory holding
/// `depth.txt`, `rgb.txt` and `groundtruth.txt`. Each depth image is paired
/// with the nearest color image and pose within [`TUM_MAX_DT`]; unmatched
/// depth images are dropped.
pub fn tum_manifest(
    depth_list: &str,
    rgb_list: &str,
    trajectory: &str,
    root: &Path,
    intrinsics: CameraIntrinsics,
) -> Result<Manifest> {
    let depth = parse_tum_list(depth_list)?;
    let mut rgb = parse_tum_list(rgb_list)?;
    let mut traj = parse_tum_trajectory(trajectory)?;
    rgb.sort_by(|a, b| a.0.total_cmp(&b.0));
    traj.sort_by(|a, b| a.0.total_cmp(&b.0));
    let frames = depth
        .iter()
        .filter_map(|(t, d)| {
            let c = nearest_stamp(&rgb, *t, TUM_MAX_DT)?;
            let p = nearest_stamp(&traj, *t, TUM_MAX_DT)?;
            Some(ManifestFrame {
                depth: root.join(d),
                intensity: root.join(&rgb[c].1),
                pose: traj[p].1,
            })
        })
        .collect();
    Ok(Manifest { intrinsics, frames })
}

/// Builds a manifest from a `.log` trajectory and matching sorted image
/// lists, as laid out by the Redwood and ICL-NUIM distributions.
pub fn log_manifest(
    trajectory: &str,
    depth: Vec<PathBuf>,
    color: Vec<PathBuf>,
    intrinsics: CameraIntrinsics,
) -> Result<Manifest> {
    let poses = parse_trajectory_log(trajectory)?;
    if depth.len() != color.len() || depth.len() < poses.len() {
        return Err(Error::InvalidInput(format!(
            "{} poses, {} depth images, {} color images",
            poses.len(),
            depth.len(),
            color.len()
        )));
    }
    let frames = poses
        .into_iter()
        .zip(depth.into_iter().zip(color))
        .map(|(pose, (depth, intensity))| ManifestFrame {
            depth,
            intensity,
            pose,
        })
        .collect();
    Ok(Manifest { intrinsics, frames })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn intr() -> CameraIntrinsics {
        CameraIntrinsics {
            fx: 525.0,
            fy: 525.0,
            cx: 319.5,
            cy: 239.5,
            width: 640,
            height: 480,
            depth_scale: 5000.0,
        }
    }

    #[test]
    fn log_blocks() {
        let text = "0 0 1\n1 0 0 0\n0 1 0 0\n0 0 1 0\n0 0 0 1\n1 1 2\n1 0 0 2\n0 1 0 0\n0 0 1 0\n0 0 0 1\n";
        let poses = parse_trajectory_log(text).unwrap();
        assert_eq!(poses.len(), 2);
        assert_eq!(poses[1].translation.x, 2.0);
        assert!(parse_trajectory_log("0 0 1\n1 0 0 0\n").is_err());
    }

    #[test]
    fn tum_association() {
        let depth = "# depth\n1.00 depth/1.png\n2.00 depth/2.png\n3.00 depth/3.png\n";
        let rgb = "1.01 rgb/1.png\n2.50 rgb/2.png\n2.99 rgb/3.png\n";
        let gt = "0.99 0 0 0 0 0 0 1\n2.01 1 0 0 0 0 0 1\n3.00 2 0 0 0 0 0 1\n";
        let m = tum_manifest(depth, rgb, gt, Path::new("/seq"), intr()).unwrap();
        // Frame at t=2 has no color image within tolerance.
        assert_eq!(m.frames.len(), 2);
        assert_eq!(m.frames[0].intensity, Path::new("/seq/rgb/1.png"));
        assert_eq!(m.frames[1].pose.translation.x, 2.0);
    }

    #[test]
    fn log_manifest_checks_counts() {
        let text = "0 0 1\n1 0 0 0\n0 1 0 0\n0 0 1 0\n0 0 0 1\n";
        assert!(log_manifest(text, vec![], vec![], intr()).is_err());
        let m = log_manifest(text, vec!["d.png".into()], vec!["c.png".into()], intr()).unwrap();
        assert_eq!(m.frames.len(), 1);
    }
}
