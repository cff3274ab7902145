//! Z-buffer triangle rasterizer.

use super::geometry::{Intrinsics, Mesh};
use super::{RigidScene, SceneError, NEAR, VOID};
use crate::par;
use crate::trackstore::DepthMap;
use nalgebra::Point3;

/// One rendered frame. `ids[y * width + x]` is the nearest object's id, or
/// [`VOID`] where nothing was hit (depth `+inf`).
#[derive(Debug, Clone, PartialEq)]
pub struct RenderFrame {
    pub color: Vec<[u8; 3]>,
    pub depth: DepthMap,
    pub ids: Vec<u32>,
}

impl RenderFrame {
    pub fn id_at(&self, x: usize, y: usize) -> u32 {
        self.ids[y * self.depth.width + x]
    }

    pub fn color_bytes(&self) -> Vec<u8> {
        self.color.iter().flatten().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutput {
    pub width: usize,
    pub height: usize,
    pub frames: Vec<RenderFrame>,
}

impl RenderOutput {
    /// Local-frame surface coordinates per pixel of frame `t`, recovered by
    /// back-projecting depth and undoing the object pose.
    pub fn local_coordinates(&self, scene: &RigidScene, t: usize) -> Vec<Option<[f64; 3]>> {
        let f = &self.frames[t];
        (0..self.width * self.height)
            .map(|k| {
                let (x, y) = (k % self.width, k / self.width);
                let id = f.ids[k];
                let obj = scene.object_index(id)?;
                let local = scene.pixel_to_local(t, obj, x as f64, y as f64, f.depth.depth[k]);
                Some([local.x, local.y, local.z])
            })
            .collect()
    }
}

const VOID_COLOR: [u8; 3] = [24, 24, 32];

struct Target {
    width: usize,
    height: usize,
    depth: Vec<f64>,
    ids: Vec<u32>,
}

/// Clips a camera-space polygon to `z >= NEAR`.
fn clip_near(poly: &[Point3<f64>]) -> Vec<Point3<f64>> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let (ina, inb) = (a.z >= NEAR, b.z >= NEAR);
        if ina {
            out.push(a);
        }
        if ina != inb {
            let s = (NEAR - a.z) / (b.z - a.z);
            let mut p = a + (b - a) * s;
            p.z = NEAR;
            out.push(p);
        }
    }
    out
}

fn edge(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0)
}

fn raster_triangle(target: &mut Target, k: &Intrinsics, tri: [Point3<f64>; 3], id: u32) {
    let s = tri.map(|p| {
        let (x, y, _) = k.project(&p);
        (x, y)
    });
    let area = edge(s[0], s[1], s[2]);
    if area == 0.0 || !area.is_finite() {
        return;
    }
    let xmin = s.iter().map(|p| p.0).fold(f64::INFINITY, f64::min).ceil().max(0.0);
    let xmax = s
        .iter()
        .map(|p| p.0)
        .fold(f64::NEG_INFINITY, f64::max)
        .floor()
        .min((target.width - 1) as f64);
    let ymin = s.iter().map(|p| p.1).fold(f64::INFINITY, f64::min).ceil().max(0.0);
    let ymax = s
        .iter()
        .map(|p| p.1)
        .fold(f64::NEG_INFINITY, f64::max)
        .floor()
        .min((target.height - 1) as f64);
    if xmin > xmax || ymin > ymax {
        return;
    }
    let inv_z = tri.map(|p| 1.0 / p.z);
    for y in ymin as usize..=ymax as usize {
        for x in xmin as usize..=xmax as usize {
            let p = (x as f64, y as f64);
            let w0 = edge(s[1], s[2], p) / area;
            let w1 = edge(s[2], s[0], p) / area;
            let w2 = edge(s[0], s[1], p) / area;
            if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                continue;
            }
            let z = 1.0 / (w0 * inv_z[0] + w1 * inv_z[1] + w2 * inv_z[2]);
            let i = y * target.width + x;
            if z < target.depth[i] {
                target.depth[i] = z;
                target.ids[i] = id;
            }
        }
    }
}

/// Meshes in scene order with degenerate triangles removed.
pub(crate) fn scene_meshes(scene: &RigidScene) -> Vec<Mesh> {
    scene
        .objects
        .iter()
        .map(|o| {
            let mut m = o.shape.mesh();
            let dropped = m.remove_degenerate();
            if dropped > 0 {
                log::warn!("object {} ('{}'): skipped {dropped} degenerate triangles", o.id, o.name);
            }
            m
        })
        .collect()
}

pub(crate) fn render_frame(scene: &RigidScene, meshes: &[Mesh], t: usize) -> RenderFrame {
    let (w, h) = (scene.width, scene.height);
    let k = &scene.camera.intrinsics;
    let mut target = Target {
        width: w,
        height: h,
        depth: vec![f64::INFINITY; w * h],
        ids: vec![VOID; w * h],
    };
    for (obj, mesh) in scene.objects.iter().zip(meshes) {
        let to_cam = scene.camera.extrinsics[t].compose(&obj.poses[t]);
        let cam: Vec<Point3<f64>> = mesh.vertices.iter().map(|v| to_cam.apply(v)).collect();
        for tri in &mesh.triangles {
            let poly = clip_near(&tri.map(|i| cam[i as usize]));
            for j in 1..poly.len().saturating_sub(1) {
                raster_triangle(&mut target, k, [poly[0], poly[j], poly[j + 1]], obj.id);
            }
        }
    }
    let color = (0..w * h)
        .map(|i| match scene.object_index(target.ids[i]) {
            None => VOID_COLOR,
            Some(o) => {
                let p = scene.pixel_to_local(t, o, (i % w) as f64, (i / w) as f64, target.depth[i]);
                scene.objects[o].texture.color([p.x, p.y, p.z])
            }
        })
        .collect();
    RenderFrame {
        color,
        depth: DepthMap {
            width: w,
            height: h,
            depth: target.depth,
        },
        ids: target.ids,
    }
}

/// Renders every frame, in parallel across frames.
pub fn render(scene: &RigidScene) -> Result<RenderOutput, SceneError> {
    scene.validate()?;
    let meshes = scene_meshes(scene);
    let frames = par::map_range(scene.num_frames, |t| render_frame(scene, &meshes, t));
    Ok(RenderOutput {
        width: scene.width,
        height: scene.height,
        frames,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_keeps_front_and_cuts_crossing() {
        let poly = [
            Point3::new(0.0, 0.0, 1.0),
            Point3::new(1.0, 0.0, 1.0),
            Point3::new(0.0, 1.0, -1.0),
        ];
        let c = clip_near(&poly);
        assert_eq!(c.len(), 4);
        assert!(c.iter().all(|p| p.z >= NEAR));
        let behind = poly.map(|p| Point3::new(p.x, p.y, -1.0));
        assert!(clip_near(&behind).is_empty());
    }
}
