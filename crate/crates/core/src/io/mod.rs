//! Dataset ingestion, model serialization and point-cloud export.

pub mod convert;
mod frame;
mod manifest;
mod model;
mod ply;
mod pose;

pub use frame::{
    decode_depth_png, decode_intensity_png, load_frame, read_depth_png, read_intensity_png, rgb_to_gray, write_depth_png, write_gray_png,
    CameraIntrinsics, DepthImage,
};
pub use image::GrayImage;
pub use manifest::{load_manifest, parse_manifest, LoadedFrame, Manifest, ManifestFrame};
pub use model::{
    decode_model, encode_model, load_model, save_model, LOADED_WEIGHT_TOL, MODEL_COMPONENT_BYTES,
    MODEL_HEADER_BYTES, MODEL_MAGIC, MODEL_VERSION,
};
pub use ply::{export_ply, import_ply, intensity_to_gray, parse_ply, read_ply, write_ply, REC601};
pub use pose::{transform_cloud, Pose, ROTATION_TOL};
