//! Point tracking toolkit.
//!
//! Modules:
//! - [`trackstore`]: tracks, flow, depth and their file formats
//! - [`metrics`]: occlusion accuracy, position accuracy and Jaccard scores
//! - [`assist`]: flow-guided shortest-path interpolation between control points
//! - [`chaintrack`]: flow chaining and cycle-consistency baselines
//! - [`simscene`]: synthetic rigid scenes with ground-truth tracks
//! - [`trajstats`]: trajectory statistics and agglomerative clustering
//! - [`tapnet`]: cost volumes, soft argmax and the tracking loss

pub mod assist;
pub mod chaintrack;
pub mod metrics;
pub mod par;
pub mod simscene;
pub mod tapnet;
pub mod trackstore;
pub mod trajstats;

pub use trackstore::{
    rescale_to_eval, Dataset, DepthMap, FlowField, FlowVolume, Point, Query, Resolution, Track,
};
