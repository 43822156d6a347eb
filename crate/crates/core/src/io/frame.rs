use std::path::Path;

use image::{DynamicImage, GrayImage, ImageBuffer, ImageFormat, Luma};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::ply::REC601;
use crate::error::{Error, Result};
use crate::types::{MultimodalPoint, MultimodalPointCloud};

/// 16-bit depth raster; raw values divided by `depth_scale` give meters.
pub type DepthImage = ImageBuffer<Luma<u16>, Vec<u16>>;

/// Pinhole intrinsics of the full-resolution images.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    /// Raw depth units per meter.
    pub depth_scale: f64,
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy, self.depth_scale]
            .iter()
            .all(|v| v.is_finite());
        if !finite || !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::InvalidInput(format!(
                "focal lengths must be positive and finite, got ({}, {})",
                self.fx, self.fy
            )));
        }
        if self.width < 1 || self.height < 1 {
            return Err(Error::InvalidInput("image size must be at least 1×1".into()));
        }
        if !(self.depth_scale > 0.0) {
            return Err(Error::InvalidInput(format!("depth_scale {}", self.depth_scale)));
        }
        Ok(())
    }

    /// Sensor-frame point for pixel `(u, v)` at depth `d` meters.
    #[inline]
    pub fn back_project(&self, u: f64, v: f64, d: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) * d / self.fx, (v - self.cy) * d / self.fy, d)
    }

    /// Pixel coordinates of a sensor-frame point in front of the camera.
    #[inline]
    pub fn project(&self, x: &Vector3<f64>) -> Option<(f64, f64)> {
        (x.z > 0.0).then(|| (self.fx * x.x / x.z + self.cx, self.fy * x.y / x.z + self.cy))
    }
}

/// Back-projects every `decimation`-th pixel (in both axes) with nonzero depth.
///
/// Returns the sensor-frame cloud and the per-point depth in meters.
pub fn load_frame(
    depth: &DepthImage,
    intensity: &GrayImage,
    intrinsics: &CameraIntrinsics,
    decimation: u32,
) -> Result<(MultimodalPointCloud, Vec<f64>)> {
    intrinsics.validate()?;
    if decimation < 1 {
        return Err(Error::InvalidInput("decimation must be at least 1".into()));
    }
    if depth.dimensions() != intensity.dimensions() {
        return Err(Error::InvalidInput(format!(
            "depth is {:?} but intensity is {:?}",
            depth.dimensions(),
            intensity.dimensions()
        )));
    }
    if depth.dimensions() != (intrinsics.width, intrinsics.height) {
        return Err(Error::InvalidInput(format!(
            "images are {:?} but intrinsics expect {}×{}",
            depth.dimensions(),
            intrinsics.width,
            intrinsics.height
        )));
    }
    let step = decimation as usize;
    let mut points = Vec::new();
    let mut depths = Vec::new();
    for v in (0..intrinsics.height).step_by(step) {
        for u in (0..intrinsics.width).step_by(step) {
            let raw = depth.get_pixel(u, v)[0];
            if raw == 0 {
                continue;
            }
            let d = raw as f64 / intrinsics.depth_scale;
            points.push(MultimodalPoint {
                position: intrinsics.back_project(u as f64, v as f64, d),
                intensity: intensity.get_pixel(u, v)[0] as f64 / 255.0,
            });
            depths.push(d);
        }
    }
    Ok((MultimodalPointCloud { points }, depths))
}

fn image_err(path: &Path, message: impl ToString) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

fn open(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|e| image_err(path, e))
}

fn png_from_memory(bytes: &[u8]) -> Result<DynamicImage> {
    image::load_from_memory_with_format(bytes, ImageFormat::Png).map_err(|e| image_err(Path::new(MEMORY), e))
}

/// Stand-in path for errors from in-memory decoding.
const MEMORY: &str = "<memory>";

fn depth_from(img: DynamicImage, path: &Path) -> Result<DepthImage> {
    match img {
        DynamicImage::ImageLuma16(img) => Ok(img),
        other => Err(image_err(path, format!("expected 16-bit grayscale depth, found {:?}", other.color()))),
    }
}

fn gray_from(img: DynamicImage) -> GrayImage {
    match img {
        DynamicImage::ImageLuma8(img) => img,
        DynamicImage::ImageLuma16(img) => GrayImage::from_fn(img.width(), img.height(), |u, v| {
            Luma([((img.get_pixel(u, v)[0] as f64) / 257.0).round() as u8])
        }),
        other => rgb_to_gray(&other.to_rgb8()),
    }
}

/// Reads a single-channel 16-bit depth PNG.
pub fn read_depth_png(path: impl AsRef<Path>) -> Result<DepthImage> {
    let path = path.as_ref();
    depth_from(open(path)?, path)
}

/// Reads an intensity image as 8-bit gray. Color images are converted with
/// Rec.601 luma; 16-bit gray is rescaled.
pub fn read_intensity_png(path: impl AsRef<Path>) -> Result<GrayImage> {
    Ok(gray_from(open(path.as_ref())?))
}

/// [`read_depth_png`] on encoded bytes.
pub fn decode_depth_png(bytes: &[u8]) -> Result<DepthImage> {
    depth_from(png_from_memory(bytes)?, Path::new(MEMORY))
}

/// [`read_intensity_png`] on encoded bytes.
pub fn decode_intensity_png(bytes: &[u8]) -> Result<GrayImage> {
    Ok(gray_from(png_from_memory(bytes)?))
}

/// Rec.601 luma of an 8-bit RGB image.
pub fn rgb_to_gray(rgb: &image::RgbImage) -> GrayImage {
    GrayImage::from_fn(rgb.width(), rgb.height(), |u, v| {
        let p = rgb.get_pixel(u, v);
        let y: f64 = p.0.iter().zip(REC601).map(|(&c, w)| w * c as f64).sum();
        Luma([y.round().clamp(0.0, 255.0) as u8])
    })
}

pub fn write_depth_png(img: &DepthImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    img.save(path).map_err(|e| image_err(path, e))
}

pub fn write_gray_png(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    img.save(path).map_err(|e| image_err(path, e))
}
