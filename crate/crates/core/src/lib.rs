//! Semi-synthetic stereo dataset generation.
//!
//! Procedurally placed meshes are textured with square patches cropped from
//! real photographs and rendered unlit through a rectified stereo rig. Every
//! frame carries dense, point-sampled disparity ground truth, an occlusion
//! mask and a foreground mask. The [`metrics`] module scores disparity maps
//! with the usual benchmark error measures.

pub mod cli;
pub mod config;
pub mod error;
pub mod grid;
pub mod io;
pub mod math;
pub mod metrics;
pub mod pipeline;
pub mod placement;
pub mod render;
pub mod rng;
pub mod scene;
pub mod texture;
pub mod viz;

pub use error::{Error, Result};
pub use grid::{DepthBuffer, DisparityMap, Grid, Mask, RgbImage};
pub use math::{Quat, Vec3};
pub use scene::{MeshAsset, Scene, StereoRig, Transform};
