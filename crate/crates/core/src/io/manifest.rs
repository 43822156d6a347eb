//! Line-oriented dataset manifest.
//!
//! ```text
//! # comment
//! intrinsics <fx> <fy> <cx> <cy> <width> <height> <depth_scale>
//! frame <depth.png> <intensity.png> <16 numbers: row-major 4x4 sensor-to-world pose>
//! ```
//!
//! Exactly one `intrinsics` line must precede the first `frame`. Tokens are
//! separated by whitespace, so paths cannot contain spaces. Relative paths
//! are resolved against the manifest's directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::frame::{load_frame, read_depth_png, read_intensity_png, CameraIntrinsics};
use super::pose::Pose;
use crate::error::{Error, Result};
use crate::types::MultimodalPointCloud;

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestFrame {
    pub depth: PathBuf,
    pub intensity: PathBuf,
    pub pose: Pose,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub intrinsics: CameraIntrinsics,
    pub frames: Vec<ManifestFrame>,
}

/// A frame loaded from disk, still in the sensor frame.
#[derive(Clone, Debug)]
pub struct LoadedFrame {
    pub cloud: MultimodalPointCloud,
    pub depths: Vec<f64>,
    pub pose: Pose,
}

fn num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::Manifest {
        line,
        message: format!("{what}: cannot parse {tok:?}"),
    })
}

/// Parses manifest text; relative paths are joined onto `base_dir`.
pub fn parse_manifest(text: &str, base_dir: &Path) -> Result<Manifest> {
    let mut intrinsics = None;
    let mut frames = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("");
        let tok: Vec<&str> = body.split_whitespace().collect();
        let Some((&kw, args)) = tok.split_first() else {
            continue;
        };
        let err = |message: String| Error::Manifest { line, message };
        match kw {
            "intrinsics" => {
                if intrinsics.is_some() {
                    return Err(err("duplicate intrinsics line".into()));
                }
                if args.len() != 7 {
                    return Err(err(format!("intrinsics takes 7 values, found {}", args.len())));
                }
                let k = CameraIntrinsics {
                    fx: num(args[0], line, "fx")?,
                    fy: num(args[1], line, "fy")?,
                    cx: num(args[2], line, "cx")?,
                    cy: num(args[3], line, "cy")?,
                    width: num(args[4], line, "width")?,
                    height: num(args[5], line, "height")?,
                    depth_scale: num(args[6], line, "depth_scale")?,
                };
                k.validate().map_err(|e| err(e.to_string()))?;
                intrinsics = Some(k);
            }
            "frame" => {
                if intrinsics.is_none() {
                    return Err(err("frame before intrinsics".into()));
                }
                if args.len() != 18 {
                    return Err(err(format!(
                        "frame takes 2 paths and 16 pose values, found {} tokens",
                        args.len()
                    )));
                }
                let mut m = [0.0; 16];
                for (slot, t) in m.iter_mut().zip(&args[2..]) {
                    *slot = num(t, line, "pose")?;
                }
                let pose = Pose::from_row_major(&m).map_err(|e| err(e.to_string()))?;
                frames.push(ManifestFrame {
                    depth: base_dir.join(args[0]),
                    intensity: base_dir.join(args[1]),
                    pose,
                });
            }
            other => return Err(err(format!("unknown keyword {other:?}"))),
        }
    }
    let intrinsics = intrinsics.ok_or(Error::Manifest {
        line: text.lines().count(),
        message: "missing intrinsics line".into(),
    })?;
    Ok(Manifest { intrinsics, frames })
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_manifest(&text, path.parent().unwrap_or(Path::new(".")))
}

impl Manifest {
    /// Renders the manifest, writing paths relative to `base_dir` where possible.
    pub fn to_text(&self, base_dir: &Path) -> String {
        let k = &self.intrinsics;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "intrinsics {} {} {} {} {} {} {}",
            k.fx, k.fy, k.cx, k.cy, k.width, k.height, k.depth_scale
        );
        for f in &self.frames {
            let rel = |p: &Path| p.strip_prefix(base_dir).unwrap_or(p).display().to_string();
            let _ = write!(s, "frame {} {}", rel(&f.depth), rel(&f.intensity));
            for v in f.pose.to_row_major() {
                let _ = write!(s, " {v}");
            }
            s.push('\n');
        }
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text(path.parent().unwrap_or(Path::new("."))))?;
        Ok(())
    }

    pub fn load_frame(&self, index: usize, decimation: u32) -> Result<LoadedFrame> {
        let f = self.frames.get(index).ok_or(Error::IndexOutOfRange {
            index,
            len: self.frames.len(),
        })?;
        let depth = read_depth_png(&f.depth)?;
        let intensity = read_intensity_png(&f.intensity)?;
        let (cloud, depths) = load_frame(&depth, &intensity, &self.intrinsics, decimation)?;
        Ok(LoadedFrame {
            cloud,
            depths,
            pose: f.pose,
        })
    }
}
