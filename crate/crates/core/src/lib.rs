//! Incremental multimodal surface mapping with Gaussian mixtures.
//!
//! Each depth+intensity frame is scored against the global 4D
//! (x, y, z, intensity) mixture. Points the model does not yet explain are
//! fit with a self-organizing GMM and appended. A spatial hash restricts
//! scoring to the components near the frame, and the finished model can be
//! sampled back into a dense point cloud.

// Negated comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod config;
pub mod error;
pub mod eval;
pub mod gaussian;
pub mod infer;
pub mod io;
pub mod kdtree;
pub mod mapper;
pub mod mixture;
pub mod sampling;
pub mod sogmm;
pub mod spatialhash;
pub mod synth;
pub mod types;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use eval::{compute_metrics, model_bytes, ReconstructionReport};
pub use infer::{reconstruct, InferenceConfig};
pub use mapper::{FrameReport, MapperConfig, MapperState, ObservedFrame};
pub use sogmm::{fit_sogmm, SogmmConfig};
pub use spatialhash::{HashGridSpec, SpatialHashTable};
pub use types::{Component, Gmm3, Gmm4, Mixture, MultimodalPoint, MultimodalPointCloud};
