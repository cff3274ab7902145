//! Synthetic rigid scenes with exact ground truth.
//!
//! A scene is a pinhole camera plus textured rigid meshes with one pose per
//! frame. Rendering produces color, depth and object ids; ground-truth tracks
//! follow a surface point in its object's local frame and reproject it, with
//! occlusion decided against the rendered depth.

pub mod geometry;
mod output;
mod presets;
mod render;
mod sampling;
pub mod texture;
mod truth;

use crate::trackstore::StoreError;
use geometry::{Camera, Pose, Shape};
use nalgebra::Point3;
use serde::{Deserialize, Serialize};
use texture::Texture;
use thiserror::Error;

pub use output::{read_video_info, simulate, write_video, GeneratedVideo, VideoInfo};
pub use presets::{build_preset, Preset, SceneParams, TRANSLATE_SPEED};
pub use render::{render, RenderFrame, RenderOutput};
pub use sampling::{allocate_queries, sample_queries, QueryBudget, SampledQuery};
pub use truth::{gt_flow, gt_flow_volume, gt_track, occlusion_test, surface_point, FlowDirection};

/// Id of pixels with no surface.
pub const VOID: u32 = 0;
/// Near clipping distance, world units.
pub const NEAR: f64 = 1e-2;
/// Relative depth margin before a point counts as behind the depth map.
pub const OCCLUSION_MARGIN: f64 = 0.01;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("no surface under query ({x}, {y}) at frame {t}")]
    QueryOnVoid { t: usize, x: f64, y: f64 },
    #[error("query ({x}, {y}) at frame {t} lies outside the image")]
    QueryOutsideImage { t: usize, x: f64, y: f64 },
    #[error("frame {t} beyond {num_frames} frames")]
    FrameOutOfRange { t: usize, num_frames: usize },
    #[error("unknown scene preset '{0}'")]
    UnknownPreset(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    /// Nonzero; zero marks empty pixels.
    pub id: u32,
    pub name: String,
    pub shape: Shape,
    pub texture: Texture,
    /// Local-to-world transform per frame.
    pub poses: Vec<Pose>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidScene {
    pub width: usize,
    pub height: usize,
    pub num_frames: usize,
    pub fps: f64,
    pub seed: u64,
    pub camera: Camera,
    pub objects: Vec<SceneObject>,
}

impl RigidScene {
    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |m: String| Err(SceneError::InvalidScene(m));
        if self.width == 0 || self.height == 0 || self.num_frames == 0 {
            return bad(format!(
                "{}x{} with {} frames",
                self.width, self.height, self.num_frames
            ));
        }
        let k = &self.camera.intrinsics;
        if !(k.fx > 0.0 && k.fy > 0.0 && k.cx.is_finite() && k.cy.is_finite()) {
            return bad("focal lengths must be positive".into());
        }
        if self.camera.extrinsics.len() != self.num_frames {
            return bad(format!(
                "{} camera poses for {} frames",
                self.camera.extrinsics.len(),
                self.num_frames
            ));
        }
        if let Some(t) = self.camera.extrinsics.iter().position(|p| !p.is_rigid(1e-9)) {
            return bad(format!("camera pose {t} is not a rigid transform"));
        }
        let mut seen = std::collections::HashSet::new();
        for o in &self.objects {
            if o.id == VOID || !seen.insert(o.id) {
                return bad(format!("object id {} is zero or repeated", o.id));
            }
            if o.poses.len() != self.num_frames {
                return bad(format!(
                    "object {}: {} poses for {} frames",
                    o.id,
                    o.poses.len(),
                    self.num_frames
                ));
            }
            if let Some(t) = o.poses.iter().position(|p| !p.is_rigid(1e-9)) {
                return bad(format!("object {}: pose {t} is not a rigid transform", o.id));
            }
        }
        Ok(())
    }

    pub fn object_index(&self, id: u32) -> Option<usize> {
        if id == VOID {
            return None;
        }
        self.objects.iter().position(|o| o.id == id)
    }

    /// Camera-space point seen at image position `(x, y)` with depth `z`.
    pub fn pixel_to_camera(&self, x: f64, y: f64, z: f64) -> Point3<f64> {
        Point3::from(self.camera.intrinsics.ray(x, y) * z)
    }

    /// Local-frame point of object `obj` seen at `(x, y)` with depth `z` on
    /// frame `t`.
    pub fn pixel_to_local(&self, t: usize, obj: usize, x: f64, y: f64, z: f64) -> Point3<f64> {
        let world = self.camera.to_world(t, &self.pixel_to_camera(x, y, z));
        self.objects[obj].poses[t].apply_inverse(&world)
    }

    /// Image position and depth of object `obj`'s local point on frame `t`.
    pub fn project_local(&self, t: usize, obj: usize, local: &Point3<f64>) -> (f64, f64, f64) {
        let world = self.objects[obj].poses[t].apply(local);
        let cam = self.camera.to_camera(t, &world);
        self.camera.intrinsics.project(&cam)
    }
}
