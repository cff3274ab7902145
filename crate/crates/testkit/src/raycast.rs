//! World-space ray casting against every scene triangle.
//!
//! Poses are applied from their stored arrays and intersections use the
//! Möller–Trumbore test, so nothing here shares code with the rasterizer.

use tapkit_core::simscene::{geometry::Pose, RigidScene, NEAR, OCCLUSION_MARGIN};

type V = [f64; 3];

fn sub(a: V, b: V) -> V {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}
fn dot(a: V, b: V) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
fn cross(a: V, b: V) -> V {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn apply(p: &Pose, v: V) -> V {
    let r = &p.rotation;
    std::array::from_fn(|i| r[i][0] * v[0] + r[i][1] * v[1] + r[i][2] * v[2] + p.translation[i])
}

fn apply_inverse(p: &Pose, v: V) -> V {
    let d = sub(v, p.translation);
    let r = &p.rotation;
    std::array::from_fn(|i| r[0][i] * d[0] + r[1][i] * d[1] + r[2][i] * d[2])
}

/// Rotation part only, transposed.
fn rotate_inverse(p: &Pose, v: V) -> V {
    let r = &p.rotation;
    std::array::from_fn(|i| r[0][i] * v[0] + r[1][i] * v[1] + r[2][i] * v[2])
}

pub struct Caster<'a> {
    scene: &'a RigidScene,
    /// Per frame: (object id, world-space triangle).
    triangles: Vec<Vec<(u32, [V; 3])>>,
}

impl<'a> Caster<'a> {
    pub fn new(scene: &'a RigidScene) -> Self {
        let meshes: Vec<_> = scene.objects.iter().map(|o| o.shape.mesh()).collect();
        let triangles = (0..scene.num_frames)
            .map(|t| {
                let mut out = Vec::new();
                for (o, m) in scene.objects.iter().zip(&meshes) {
                    let verts: Vec<V> = m
                        .vertices
                        .iter()
                        .map(|v| apply(&o.poses[t], [v.x, v.y, v.z]))
                        .collect();
                    for tri in &m.triangles {
                        out.push((o.id, tri.map(|i| verts[i as usize])));
                    }
                }
                out
            })
            .collect();
        Caster { scene, triangles }
    }

    fn camera_ray(&self, t: usize, x: f64, y: f64) -> (V, V) {
        let k = &self.scene.camera.intrinsics;
        let e = &self.scene.camera.extrinsics[t];
        let origin = apply_inverse(e, [0.0; 3]);
        let dir = rotate_inverse(e, [(x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0]);
        (origin, dir)
    }

    /// Nearest surface along the ray through `(x, y)`: camera z-depth and
    /// object id. Hits closer than the near plane are ignored.
    pub fn cast(&self, t: usize, x: f64, y: f64) -> Option<(f64, u32)> {
        let (o, d) = self.camera_ray(t, x, y);
        let mut best: Option<(f64, u32)> = None;
        for &(id, [a, b, c]) in &self.triangles[t] {
            let e1 = sub(b, a);
            let e2 = sub(c, a);
            let p = cross(d, e2);
            let det = dot(e1, p);
            if det.abs() < 1e-14 {
                continue;
            }
            let s = sub(o, a);
            let u = dot(s, p) / det;
            if !(0.0..=1.0).contains(&u) {
                continue;
            }
            let q = cross(s, e1);
            let v = dot(d, q) / det;
            if v < 0.0 || u + v > 1.0 {
                continue;
            }
            // The ray's camera-space z component is 1, so the parameter is
            // the z-depth.
            let z = dot(e2, q) / det;
            if z >= NEAR && best.is_none_or(|(bz, _)| z < bz) {
                best = Some((z, id));
            }
        }
        best
    }

    pub fn depth(&self, t: usize, x: usize, y: usize) -> f64 {
        self.cast(t, x as f64, y as f64).map_or(f64::INFINITY, |h| h.0)
    }

    /// Occlusion of a world point on frame `t` from ray-cast depths at the
    /// four pixels around its projection.
    pub fn occluded(&self, t: usize, world: V) -> bool {
        let k = &self.scene.camera.intrinsics;
        let c = apply(&self.scene.camera.extrinsics[t], world);
        if c[2] <= NEAR {
            return true;
        }
        let x = k.fx * c[0] / c[2] + k.cx;
        let y = k.fy * c[1] / c[2] + k.cy;
        let (w, h) = (self.scene.width as f64, self.scene.height as f64);
        if !(x >= 0.0 && x < w && y >= 0.0 && y < h) {
            return true;
        }
        let (x0, y0) = (x.floor() as usize, y.floor() as usize);
        let x1 = (x0 + 1).min(self.scene.width - 1);
        let y1 = (y0 + 1).min(self.scene.height - 1);
        let m = [(x0, y0), (x1, y0), (x0, y1), (x1, y1)]
            .iter()
            .map(|&(px, py)| self.depth(t, px, py))
            .fold(f64::NEG_INFINITY, f64::max);
        c[2] > m * (1.0 + OCCLUSION_MARGIN)
    }

    /// Visibility per frame of the surface point under pixel `(x, y)` on
    /// frame `t0`, or `None` if that ray hits nothing.
    pub fn track_visibility(&self, t0: usize, x: f64, y: f64) -> Option<Vec<bool>> {
        let (z, id) = self.cast(t0, x, y)?;
        let (o, d) = self.camera_ray(t0, x, y);
        let world = [o[0] + z * d[0], o[1] + z * d[1], o[2] + z * d[2]];
        let obj = self.scene.objects.iter().find(|ob| ob.id == id)?;
        let local = apply_inverse(&obj.poses[t0], world);
        Some(
            (0..self.scene.num_frames)
                .map(|t| t == t0 || !self.occluded(t, apply(&obj.poses[t], local)))
                .collect(),
        )
    }
}
