//! Ground-truth tracks, occlusion and flow from scene geometry.

use super::render::RenderOutput;
use super::{RigidScene, SceneError, NEAR, OCCLUSION_MARGIN};
use crate::par;
use crate::trackstore::{DepthMap, FlowField, FlowVolume, Point, Query, Resolution, Track};
use nalgebra::{Point3, Vector3};

fn res(w: usize, h: usize) -> Resolution {
    Resolution::new(w as u32, h as u32)
}

/// True when a point projecting to `(x, y)` at `projected_depth` lies behind
/// the depth map by more than the margin. The depth map is read at the four
/// pixels nearest `(x, y)` (clamped to the image) and the largest value is
/// used. Positions outside `[0, W) x [0, H)` are occluded.
pub fn occlusion_test(projected_depth: f64, depth: &DepthMap, x: f64, y: f64) -> bool {
    if !res(depth.width, depth.height).contains(Point::new(x, y)) {
        return true;
    }
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(depth.width - 1);
    let y1 = (y0 + 1).min(depth.height - 1);
    let m = depth
        .at(x0, y0)
        .max(depth.at(x1, y0))
        .max(depth.at(x0, y1))
        .max(depth.at(x1, y1));
    projected_depth > m * (1.0 + OCCLUSION_MARGIN)
}

fn nearest_pixel(render: &RenderOutput, x: f64, y: f64) -> (usize, usize) {
    (
        x.round().clamp(0.0, (render.width - 1) as f64) as usize,
        y.round().clamp(0.0, (render.height - 1) as f64) as usize,
    )
}

/// Object index and local-frame point under image position `(x, y)` on
/// frame `t`, by back-projecting the depth of the nearest pixel.
pub fn surface_point(
    scene: &RigidScene,
    render: &RenderOutput,
    t: usize,
    x: f64,
    y: f64,
) -> Result<(usize, Point3<f64>), SceneError> {
    if t >= render.frames.len() {
        return Err(SceneError::FrameOutOfRange {
            t,
            num_frames: render.frames.len(),
        });
    }
    if !res(render.width, render.height).contains(Point::new(x, y)) {
        return Err(SceneError::QueryOutsideImage { t, x, y });
    }
    let (px, py) = nearest_pixel(render, x, y);
    let frame = &render.frames[t];
    let obj = scene
        .object_index(frame.id_at(px, py))
        .ok_or(SceneError::QueryOnVoid { t, x, y })?;
    let z = frame.depth.at(px, py);
    Ok((obj, scene.pixel_to_local(t, obj, x, y, z)))
}

/// Follows the surface point under `query` through every frame.
///
/// Frames where the point falls behind the near plane keep the previous
/// position and are occluded.
pub fn gt_track(scene: &RigidScene, render: &RenderOutput, query: Query) -> Result<Track, SceneError> {
    let (obj, local) = surface_point(scene, render, query.t, query.x, query.y)?;
    let n = render.frames.len();
    let projected: Vec<Option<(f64, f64, f64)>> = (0..n)
        .map(|t| {
            let p = scene.project_local(t, obj, &local);
            (p.2 > NEAR).then_some(p)
        })
        .collect();
    let mut points = Vec::with_capacity(n);
    let mut visible = Vec::with_capacity(n);
    let mut last = query.point();
    for (t, p) in projected.into_iter().enumerate() {
        match p {
            Some((x, y, z)) => {
                last = Point::new(x, y);
                points.push(last);
                visible.push(!occlusion_test(z, &render.frames[t].depth, x, y));
            }
            None => {
                points.push(last);
                visible.push(false);
            }
        }
    }
    // The query frame reprojects onto itself.
    points[query.t] = query.point();
    visible[query.t] = true;
    Ok(Track::new(
        String::new(),
        query,
        points,
        visible,
        res(render.width, render.height),
    )?)
}

/// Displacement of the surface visible at each pixel of frame `from` to its
/// projection on frame `to`. Empty pixels move like points at infinity.
/// Points that fall behind the near plane get zero flow.
pub fn gt_flow(scene: &RigidScene, render: &RenderOutput, from: usize, to: usize) -> FlowField {
    let (w, h) = (render.width, render.height);
    let k = &scene.camera.intrinsics;
    let frame = &render.frames[from];
    let rot_from = scene.camera.extrinsics[from].matrix();
    let rot_to = scene.camera.extrinsics[to].matrix();
    let rows: Vec<Vec<[f32; 2]>> = par::map_range(h, |y| {
        (0..w)
            .map(|x| {
                let (xf, yf) = (x as f64, y as f64);
                let target = match scene.object_index(frame.id_at(x, y)) {
                    Some(obj) => {
                        let local = scene.pixel_to_local(from, obj, xf, yf, frame.depth.at(x, y));
                        let (px, py, pz) = scene.project_local(to, obj, &local);
                        (pz > NEAR).then_some((px, py))
                    }
                    None => {
                        let dir: Vector3<f64> = rot_to * (rot_from.transpose() * k.ray(xf, yf));
                        (dir.z > 0.0).then(|| k.project(&Point3::from(dir))).map(|p| (p.0, p.1))
                    }
                };
                match target {
                    Some((px, py)) => [(px - xf) as f32, (py - yf) as f32],
                    None => [0.0, 0.0],
                }
            })
            .collect()
    });
    FlowField {
        width: w,
        height: h,
        data: rows.into_iter().flatten().collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowDirection {
    /// `fields[t]` maps frame `t` to `t + 1`.
    Forward,
    /// `fields[t]` maps frame `t + 1` to `t`.
    Backward,
}

pub fn gt_flow_volume(scene: &RigidScene, render: &RenderOutput, dir: FlowDirection) -> FlowVolume {
    let n = render.frames.len();
    let fields = (0..n.saturating_sub(1))
        .map(|t| match dir {
            FlowDirection::Forward => gt_flow(scene, render, t, t + 1),
            FlowDirection::Backward => gt_flow(scene, render, t + 1, t),
        })
        .collect();
    FlowVolume {
        width: render.width,
        height: render.height,
        fields,
    }
}
