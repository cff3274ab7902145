//! Rigid transforms, pinhole projection and triangle meshes.

use nalgebra::{Matrix3, Point3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

/// Rigid transform `p -> R p + t`, stored row-major so scene files stay
/// readable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl Pose {
    pub fn identity() -> Pose {
        Pose::from_parts(Matrix3::identity(), Vector3::zeros())
    }

    pub fn translation(t: [f64; 3]) -> Pose {
        Pose::from_parts(Matrix3::identity(), Vector3::from(t))
    }

    /// Rotation of `angle` radians about `axis`, then translation by `t`.
    pub fn axis_angle(axis: [f64; 3], angle: f64, t: [f64; 3]) -> Pose {
        let axis = Vector3::from(axis);
        let r = if axis.norm() == 0.0 || angle == 0.0 {
            Matrix3::identity()
        } else {
            Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle).into_inner()
        };
        Pose::from_parts(r, Vector3::from(t))
    }

    pub fn from_parts(r: Matrix3<f64>, t: Vector3<f64>) -> Pose {
        let mut rotation = [[0.0; 3]; 3];
        for (i, row) in rotation.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = r[(i, j)];
            }
        }
        Pose {
            rotation,
            translation: [t.x, t.y, t.z],
        }
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.rotation[i][j])
    }

    pub fn vector(&self) -> Vector3<f64> {
        Vector3::from(self.translation)
    }

    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.matrix() * p.coords + self.vector())
    }

    pub fn apply_inverse(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.matrix().transpose() * (p.coords - self.vector()))
    }

    /// `self` after `other`: `p -> self(other(p))`.
    pub fn compose(&self, other: &Pose) -> Pose {
        let r = self.matrix() * other.matrix();
        let t = self.matrix() * other.vector() + self.vector();
        Pose::from_parts(r, t)
    }

    /// Orthonormal with determinant +1, to `tol`.
    pub fn is_rigid(&self, tol: f64) -> bool {
        let r = self.matrix();
        let finite = r.iter().chain(self.translation.iter()).all(|v| v.is_finite());
        finite
            && (r.transpose() * r - Matrix3::identity()).amax() <= tol
            && (r.determinant() - 1.0).abs() <= tol
    }
}

/// Pinhole intrinsics in pixels. Pixel centers sit at integer coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    /// Principal point at the image center, `fx = fy = focal`.
    pub fn centered(width: usize, height: usize, focal: f64) -> Intrinsics {
        Intrinsics {
            fx: focal,
            fy: focal,
            cx: (width as f64 - 1.0) / 2.0,
            cy: (height as f64 - 1.0) / 2.0,
        }
    }

    /// Image position and depth of a camera-space point.
    pub fn project(&self, p: &Point3<f64>) -> (f64, f64, f64) {
        (
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
            p.z,
        )
    }

    /// Camera-space ray direction through image position `(x, y)` with unit z.
    pub fn ray(&self, x: f64, y: f64) -> Vector3<f64> {
        Vector3::new((x - self.cx) / self.fx, (y - self.cy) / self.fy, 1.0)
    }
}

/// Camera looking down +z, x right, y down. `extrinsics[t]` maps world to
/// camera coordinates at frame `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub intrinsics: Intrinsics,
    pub extrinsics: Vec<Pose>,
}

impl Camera {
    pub fn to_camera(&self, t: usize, world: &Point3<f64>) -> Point3<f64> {
        self.extrinsics[t].apply(world)
    }

    pub fn to_world(&self, t: usize, cam: &Point3<f64>) -> Point3<f64> {
        self.extrinsics[t].apply_inverse(cam)
    }

    /// Camera center in world coordinates at frame `t`.
    pub fn center(&self, t: usize) -> Point3<f64> {
        self.to_world(t, &Point3::origin())
    }
}

/// Triangle mesh in an object's local frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Mesh {
    pub vertices: Vec<Point3<f64>>,
    pub triangles: Vec<[u32; 3]>,
}

impl Mesh {
    /// Drops triangles with (near) zero area, returning how many went.
    pub fn remove_degenerate(&mut self) -> usize {
        let before = self.triangles.len();
        let v = &self.vertices;
        self.triangles.retain(|&[a, b, c]| {
            let (a, b, c) = (v[a as usize], v[b as usize], v[c as usize]);
            let n = (b - a).cross(&(c - a)).norm();
            let scale = (b - a).norm().max((c - a).norm()).max(1e-300);
            n > 1e-12 * scale * scale
        });
        before - self.triangles.len()
    }

    /// Axis-aligned rectangle in the z = 0 plane, centered on the origin.
    pub fn quad(width: f64, height: f64) -> Mesh {
        let (w, h) = (width / 2.0, height / 2.0);
        Mesh {
            vertices: vec![
                Point3::new(-w, -h, 0.0),
                Point3::new(w, -h, 0.0),
                Point3::new(w, h, 0.0),
                Point3::new(-w, h, 0.0),
            ],
            triangles: vec![[0, 1, 2], [0, 2, 3]],
        }
    }

    /// Box with the given edge lengths, centered on the origin.
    pub fn cuboid(size: [f64; 3]) -> Mesh {
        let [x, y, z] = size.map(|s| s / 2.0);
        let vertices = (0..8)
            .map(|i| {
                Point3::new(
                    if i & 1 == 0 { -x } else { x },
                    if i & 2 == 0 { -y } else { y },
                    if i & 4 == 0 { -z } else { z },
                )
            })
            .collect();
        let faces = [
            [0, 1, 3, 2],
            [4, 6, 7, 5],
            [0, 4, 5, 1],
            [2, 3, 7, 6],
            [0, 2, 6, 4],
            [1, 5, 7, 3],
        ];
        let triangles = faces
            .iter()
            .flat_map(|f| [[f[0], f[1], f[2]], [f[0], f[2], f[3]]])
            .collect();
        Mesh {
            vertices,
            triangles,
        }
    }

    /// Latitude/longitude sphere.
    pub fn sphere(radius: f64, rings: u32, segments: u32) -> Mesh {
        let rings = rings.max(2);
        let segments = segments.max(3);
        let mut vertices = vec![Point3::new(0.0, -radius, 0.0)];
        for r in 1..rings {
            let phi = std::f64::consts::PI * r as f64 / rings as f64;
            for s in 0..segments {
                let theta = std::f64::consts::TAU * s as f64 / segments as f64;
                vertices.push(Point3::new(
                    radius * phi.sin() * theta.cos(),
                    -radius * phi.cos(),
                    radius * phi.sin() * theta.sin(),
                ));
            }
        }
        let bottom = vertices.len() as u32;
        vertices.push(Point3::new(0.0, radius, 0.0));
        let ring = |r: u32, s: u32| 1 + (r - 1) * segments + s % segments;
        let mut triangles = Vec::new();
        for s in 0..segments {
            triangles.push([0, ring(1, s + 1), ring(1, s)]);
            triangles.push([bottom, ring(rings - 1, s), ring(rings - 1, s + 1)]);
        }
        for r in 1..rings - 1 {
            for s in 0..segments {
                let (a, b) = (ring(r, s), ring(r, s + 1));
                let (c, d) = (ring(r + 1, s), ring(r + 1, s + 1));
                triangles.push([a, b, d]);
                triangles.push([a, d, c]);
            }
        }
        Mesh {
            vertices,
            triangles,
        }
    }
}

/// Serializable description of an object's geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Quad { width: f64, height: f64 },
    Cuboid { size: [f64; 3] },
    Sphere { radius: f64, rings: u32, segments: u32 },
    Mesh {
        vertices: Vec<[f64; 3]>,
        triangles: Vec<[u32; 3]>,
    },
}

impl Shape {
    pub fn mesh(&self) -> Mesh {
        match self {
            Shape::Quad { width, height } => Mesh::quad(*width, *height),
            Shape::Cuboid { size } => Mesh::cuboid(*size),
            Shape::Sphere {
                radius,
                rings,
                segments,
            } => Mesh::sphere(*radius, *rings, *segments),
            Shape::Mesh {
                vertices,
                triangles,
            } => Mesh {
                vertices: vertices.iter().map(|&v| Point3::from(v)).collect(),
                triangles: triangles.clone(),
            },
        }
    }
}
