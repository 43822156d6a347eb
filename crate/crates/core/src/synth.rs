//! Synthetic RGB-D scenes: textured rectangles seen by a pinhole camera.
//!
//! Camera axes are x right, y down, z forward; the world frame shares the
//! y-down convention, so floors sit at positive y.

use std::fs;
use std::path::{Path, PathBuf};

use image::Luma;
use nalgebra::{Matrix3, Rotation3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{
    load_frame, transform_cloud, write_depth_png, write_gray_png, CameraIntrinsics, DepthImage, GrayImage,
    Manifest, ManifestFrame, Pose,
};
use crate::sampling::{stream_rng, BoxMuller};
use crate::types::MultimodalPointCloud;

/// Intensity as a function of metric surface coordinates `(s, t)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Texture {
    Constant(f64),
    /// `base + amplitude · sin(2π s/λ_s + φ_s) · sin(2π t/λ_t + φ_t)`.
    Waves {
        base: f64,
        amplitude: f64,
        wavelength: [f64; 2],
        phase: [f64; 2],
    },
    /// Squares of side `size` alternating between `low` and `high`.
    Checker { low: f64, high: f64, size: f64 },
}

impl Texture {
    pub fn eval(&self, s: f64, t: f64) -> f64 {
        let v = match *self {
            Texture::Constant(c) => c,
            Texture::Waves {
                base,
                amplitude,
                wavelength,
                phase,
            } => {
                let tau = std::f64::consts::TAU;
                base + amplitude * (tau * s / wavelength[0] + phase[0]).sin() * (tau * t / wavelength[1] + phase[1]).sin()
            }
            Texture::Checker { low, high, size } => {
                if ((s / size).floor() + (t / size).floor()).rem_euclid(2.0) == 0.0 {
                    low
                } else {
                    high
                }
            }
        };
        v.clamp(0.0, 1.0)
    }
}

/// Parallelogram `origin + a·edge_u + b·edge_v`, `a, b ∈ [0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Quad {
    pub origin: Vector3<f64>,
    pub edge_u: Vector3<f64>,
    pub edge_v: Vector3<f64>,
    pub texture: Texture,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    /// Ray parameter; equals camera-frame depth for rays with unit z.
    pub t: f64,
    pub point: Vector3<f64>,
    pub intensity: f64,
}

impl Quad {
    pub fn new(origin: Vector3<f64>, edge_u: Vector3<f64>, edge_v: Vector3<f64>, texture: Texture) -> Self {
        Self {
            origin,
            edge_u,
            edge_v,
            texture,
        }
    }

    pub fn intersect(&self, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<Hit> {
        let n = self.edge_u.cross(&self.edge_v);
        let denom = n.dot(d);
        if denom.abs() < 1e-12 {
            return None;
        }
        let t = n.dot(&(self.origin - o)) / denom;
        if !(t > 1e-9) {
            return None;
        }
        let p = o + t * d;
        let r = p - self.origin;
        let a = r.dot(&self.edge_u) / self.edge_u.norm_squared();
        let b = r.dot(&self.edge_v) / self.edge_v.norm_squared();
        if !((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b)) {
            return None;
        }
        Some(Hit {
            t,
            point: p,
            intensity: self.texture.eval(a * self.edge_u.norm(), b * self.edge_v.norm()),
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Scene {
    pub quads: Vec<Quad>,
}

/// Depth noise applied when rendering.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderNoise {
    /// Standard deviation of additive depth noise, meters.
    pub depth_sigma: f64,
    pub seed: u64,
}

impl Default for RenderNoise {
    fn default() -> Self {
        Self {
            depth_sigma: 0.005,
            seed: 0,
        }
    }
}

impl RenderNoise {
    pub fn none() -> Self {
        Self {
            depth_sigma: 0.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RenderedFrame {
    pub depth: DepthImage,
    pub intensity: GrayImage,
}

impl Scene {
    /// Nearest intersection along a ray.
    pub fn cast(&self, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<Hit> {
        self.quads
            .iter()
            .filter_map(|q| q.intersect(o, d))
            .min_by(|a, b| a.t.total_cmp(&b.t))
    }

    /// Renders depth and 8-bit intensity. Depth noise is drawn per row from
    /// stream `(seed, frame · height + v)`, so output does not depend on
    /// thread count.
    pub fn render(&self, intr: &CameraIntrinsics, pose: &Pose, noise: &RenderNoise, frame: u64) -> Result<RenderedFrame> {
        intr.validate()?;
        let (w, h) = (intr.width as usize, intr.height as usize);
        let max_raw = u16::MAX as f64;
        let rows: Vec<(Vec<u16>, Vec<u8>)> = (0..h)
            .into_par_iter()
            .map(|v| {
                let mut normals = BoxMuller::new(stream_rng(noise.seed, frame * h as u64 + v as u64));
                let mut drow = vec![0u16; w];
                let mut irow = vec![0u8; w];
                for u in 0..w {
                    let ray = Vector3::new((u as f64 - intr.cx) / intr.fx, (v as f64 - intr.cy) / intr.fy, 1.0);
                    let d = pose.rotation * ray;
                    let eps = normals.next_standard();
                    if let Some(hit) = self.cast(&pose.translation, &d) {
                        let z = hit.t + noise.depth_sigma * eps;
                        let raw = (z * intr.depth_scale).round();
                        if raw >= 1.0 && raw <= max_raw {
                            drow[u] = raw as u16;
                            irow[u] = (hit.intensity * 255.0).round() as u8;
                        }
                    }
                }
                (drow, irow)
            })
            .collect();
        let mut depth = Vec::with_capacity(w * h);
        let mut gray = Vec::with_capacity(w * h);
        for (d, i) in rows {
            depth.extend(d);
            gray.extend(i);
        }
        Ok(RenderedFrame {
            depth: DepthImage::from_raw(intr.width, intr.height, depth).expect("sized buffer"),
            intensity: GrayImage::from_raw(intr.width, intr.height, gray).expect("sized buffer"),
        })
    }
}

/// Axis-aligned box as six quads.
pub fn box_quads(min: Vector3<f64>, max: Vector3<f64>, texture: &Texture) -> Vec<Quad> {
    let e = max - min;
    let (ex, ey, ez) = (Vector3::new(e.x, 0.0, 0.0), Vector3::new(0.0, e.y, 0.0), Vector3::new(0.0, 0.0, e.z));
    vec![
        Quad::new(min, ey, ex, texture.clone()),
        Quad::new(min + ez, ex, ey, texture.clone()),
        Quad::new(min, ez, ey, texture.clone()),
        Quad::new(min + ex, ey, ez, texture.clone()),
        Quad::new(min, ex, ez, texture.clone()),
        Quad::new(min + ey, ez, ex, texture.clone()),
    ]
}

fn waves(base: f64, amplitude: f64, l0: f64, l1: f64, p0: f64, p1: f64) -> Texture {
    Texture::Waves {
        base,
        amplitude,
        wavelength: [l0, l1],
        phase: [p0, p1],
    }
}

/// Camera-to-world rotation for a yaw about world y followed by a downward pitch.
pub fn yaw_pitch(yaw: f64, pitch_down: f64) -> Matrix3<f64> {
    let ry = Rotation3::from_axis_angle(&Vector3::y_axis(), yaw);
    let rx = Rotation3::from_axis_angle(&Vector3::x_axis(), -pitch_down);
    (ry * rx).into_inner()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    /// Closed textured room with a box, camera turning in place.
    Room,
    /// Long corridor swept sideways by a camera facing one wall.
    Corridor,
    /// Two partially overlapping views of a room corner.
    Overlap,
}

impl std::str::FromStr for SceneKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "room" => Ok(Self::Room),
            "corridor" => Ok(Self::Corridor),
            "overlap" => Ok(Self::Overlap),
            _ => Err(Error::InvalidInput(format!("unknown scene {s:?}; expected room, corridor or overlap"))),
        }
    }
}

/// A scene, a camera and a trajectory.
#[derive(Clone, Debug)]
pub struct SynthDataset {
    pub scene: Scene,
    pub intrinsics: CameraIntrinsics,
    pub poses: Vec<Pose>,
}

/// VGA Kinect-like intrinsics.
pub fn vga_intrinsics() -> CameraIntrinsics {
    CameraIntrinsics {
        fx: 525.0,
        fy: 525.0,
        cx: 319.5,
        cy: 239.5,
        width: 640,
        height: 480,
        depth_scale: 1000.0,
    }
}

fn room_scene() -> Scene {
    // x ∈ [-2, 2], y ∈ [-1.3, 1.2] (floor at +1.2), z ∈ [-1.6, 1.6].
    let (x0, x1, y0, y1, z0, z1) = (-2.0, 2.0, -1.3, 1.2, -1.6, 1.6);
    let v = Vector3::new;
    let mut quads = vec![
        // floor and ceiling
        Quad::new(v(x0, y1, z0), v(0.0, 0.0, z1 - z0), v(x1 - x0, 0.0, 0.0), waves(0.45, 0.3, 1.6, 1.3, 0.3, 1.1)),
        Quad::new(v(x0, y0, z0), v(x1 - x0, 0.0, 0.0), v(0.0, 0.0, z1 - z0), waves(0.7, 0.15, 2.2, 2.0, 0.0, 0.5)),
        // walls
        Quad::new(v(x0, y0, z1), v(x1 - x0, 0.0, 0.0), v(0.0, y1 - y0, 0.0), waves(0.5, 0.35, 1.1, 1.7, 0.2, 0.9)),
        Quad::new(v(x0, y0, z0), v(0.0, y1 - y0, 0.0), v(x1 - x0, 0.0, 0.0), waves(0.55, 0.3, 1.4, 1.2, 1.3, 0.1)),
        Quad::new(v(x0, y0, z0), v(0.0, 0.0, z1 - z0), v(0.0, y1 - y0, 0.0), waves(0.4, 0.3, 0.9, 1.5, 0.7, 0.4)),
        Quad::new(v(x1, y0, z0), v(0.0, y1 - y0, 0.0), v(0.0, 0.0, z1 - z0), waves(0.6, 0.3, 1.2, 1.9, 2.0, 0.6)),
    ];
    quads.extend(box_quads(v(0.9, 0.6, 0.7), v(1.6, y1, 1.3), &waves(0.3, 0.2, 0.8, 0.8, 0.0, 0.0)));
    Scene { quads }
}

/// Corridor along z over `[z0, z1]`. Wall textures repeat every `period`
/// meters along the corridor.
fn corridor_scene(z0: f64, z1: f64, period: f64) -> Scene {
    // Facing wall at x = 0.7, back wall at x = -1.3, floor at y = 1.0.
    let (x0, x1, y0, y1) = (-1.3, 0.7, -1.5, 1.0);
    let v = Vector3::new;
    Scene {
        quads: vec![
            Quad::new(v(x1, y0, z0), v(0.0, y1 - y0, 0.0), v(0.0, 0.0, z1 - z0), waves(0.5, 0.35, 1.3, period, 0.4, 0.2)),
            Quad::new(v(x0, y1, z0), v(0.0, 0.0, z1 - z0), v(x1 - x0, 0.0, 0.0), waves(0.45, 0.3, period, 0.9, 0.0, 0.7)),
            Quad::new(v(x0, y0, z0), v(x1 - x0, 0.0, 0.0), v(0.0, 0.0, z1 - z0), Texture::Constant(0.8)),
            Quad::new(v(x0, y0, z0), v(0.0, 0.0, z1 - z0), v(0.0, y1 - y0, 0.0), waves(0.5, 0.3, period, 1.1, 0.9, 0.3)),
        ],
    }
}

/// Builds a dataset of `frames` poses for the given scene kind.
pub fn build_dataset(kind: SceneKind, frames: usize) -> Result<SynthDataset> {
    if frames == 0 {
        return Err(Error::InvalidInput("at least one frame is required".into()));
    }
    let intrinsics = vga_intrinsics();
    let (scene, poses) = match kind {
        SceneKind::Room => {
            let poses = (0..frames)
                .map(|k| {
                    let yaw = std::f64::consts::TAU * k as f64 / frames as f64;
                    let pitch = if k % 2 == 0 { 0.25 } else { -0.05 };
                    Pose::new(yaw_pitch(yaw, pitch), Vector3::new(-0.2, 0.0, -0.1))
                })
                .collect::<Result<Vec<_>>>()?;
            (room_scene(), poses)
        }
        SceneKind::Corridor => {
            // Centered on the origin so long sweeps stay inside the default hash grid.
            let step = 0.7;
            let start = -0.5 * step * (frames - 1) as f64;
            let poses = (0..frames)
                .map(|k| {
                    Pose::new(
                        yaw_pitch(std::f64::consts::FRAC_PI_2, 0.3),
                        Vector3::new(0.0, 0.0, start + step * k as f64),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            (corridor_scene(start - 3.0, -start + 3.0, step), poses)
        }
        SceneKind::Overlap => {
            let poses = (0..frames)
                .map(|k| {
                    let yaw = 0.45 + 0.5 * k as f64;
                    Pose::new(yaw_pitch(yaw, 0.15), Vector3::new(0.1 * k as f64, 0.0, -0.1 * k as f64))
                })
                .collect::<Result<Vec<_>>>()?;
            (room_scene(), poses)
        }
    };
    Ok(SynthDataset {
        scene,
        intrinsics,
        poses,
    })
}

impl SynthDataset {
    pub fn render(&self, index: usize, noise: &RenderNoise) -> Result<RenderedFrame> {
        let pose = self.poses.get(index).ok_or(Error::IndexOutOfRange {
            index,
            len: self.poses.len(),
        })?;
        self.scene.render(&self.intrinsics, pose, noise, index as u64)
    }

    /// Renders and back-projects one frame into the world frame, returning
    /// the cloud and the sensor depths.
    pub fn world_frame(&self, index: usize, noise: &RenderNoise, decimation: u32) -> Result<(MultimodalPointCloud, Vec<f64>)> {
        let r = self.render(index, noise)?;
        let (cloud, depths) = load_frame(&r.depth, &r.intensity, &self.intrinsics, decimation)?;
        Ok((transform_cloud(&cloud, &self.poses[index]), depths))
    }

    /// Whether a world point is the first surface seen by camera `index`.
    pub fn visible_from(&self, index: usize, p: &Vector3<f64>, tol: f64) -> bool {
        let pose = &self.poses[index];
        let local = pose.inverse().transform_point(p);
        let Some((u, v)) = self.intrinsics.project(&local) else {
            return false;
        };
        let k = &self.intrinsics;
        if !(u >= -0.5 && v >= -0.5 && u < k.width as f64 - 0.5 && v < k.height as f64 - 0.5) {
            return false;
        }
        let d = pose.rotation * (local / local.z);
        self.scene
            .cast(&pose.translation, &d)
            .is_some_and(|h| (h.t - local.z).abs() <= tol)
    }

    /// Writes PNGs and a manifest under `dir`; returns the manifest path.
    /// `prefix` distinguishes noisy frames from noise-free ground truth.
    pub fn write(&self, dir: &Path, prefix: &str, noise: &RenderNoise) -> Result<PathBuf> {
        fs::create_dir_all(dir.join(prefix))?;
        let mut frames = Vec::with_capacity(self.poses.len());
        for (k, pose) in self.poses.iter().enumerate() {
            let r = self.render(k, noise)?;
            let depth = dir.join(prefix).join(format!("{k:04}_depth.png"));
            let intensity = dir.join(prefix).join(format!("{k:04}_gray.png"));
            write_depth_png(&r.depth, &depth)?;
            write_gray_png(&r.intensity, &intensity)?;
            frames.push(ManifestFrame {
                depth,
                intensity,
                pose: *pose,
            });
        }
        let manifest = Manifest {
            intrinsics: self.intrinsics,
            frames,
        };
        let path = dir.join(format!("{prefix}.txt"));
        manifest.save(&path)?;
        Ok(path)
    }
}

/// Count of pixels with a valid depth reading.
pub fn valid_pixels(depth: &DepthImage) -> usize {
    depth.pixels().filter(|p: &&Luma<u16>| p[0] > 0).count()
}
