//! Scripted scenes.

use super::geometry::{Camera, Intrinsics, Pose, Shape};
use super::texture::Texture;
use super::{RigidScene, SceneError, SceneObject};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Objects in front of a backdrop; nothing moves.
    Static,
    /// Static objects, camera translating sideways.
    Pan,
    /// One fronto-parallel textured plane sliding sideways at 1.5 px/frame.
    Translate,
    /// Objects with random rigid motion, camera drifting with slight shake.
    Random,
}

impl FromStr for Preset {
    type Err = SceneError;
    fn from_str(s: &str) -> Result<Self, SceneError> {
        match s {
            "static" => Ok(Preset::Static),
            "pan" => Ok(Preset::Pan),
            "translate" => Ok(Preset::Translate),
            "random" => Ok(Preset::Random),
            _ => Err(SceneError::UnknownPreset(s.to_string())),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Static => "static",
            Preset::Pan => "pan",
            Preset::Translate => "translate",
            Preset::Random => "random",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneParams {
    pub width: usize,
    pub height: usize,
    pub num_frames: usize,
    pub seed: u64,
}

/// Image speed of the translate preset, px/frame.
pub const TRANSLATE_SPEED: f64 = 1.5;

fn random_texture(rng: &mut ChaCha8Rng) -> Texture {
    Texture {
        seed: rng.random(),
        base: [rng.random(), rng.random(), rng.random()],
        accent: [rng.random(), rng.random(), rng.random()],
        frequency: rng.random_range(0.6..2.5),
    }
}

fn unit_vector(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 0.1 && n <= 1.0 {
            return v.map(|c| c / n);
        }
    }
}

/// Backdrop far enough to sit behind every object and wide enough to fill
/// the view throughout the camera's travel.
fn backdrop(rng: &mut ChaCha8Rng, frames: usize) -> SceneObject {
    let mut texture = random_texture(rng);
    texture.frequency = 0.4;
    SceneObject {
        id: 1,
        name: "backdrop".into(),
        shape: Shape::Quad {
            width: 200.0,
            height: 200.0,
        },
        texture,
        poses: vec![Pose::translation([0.0, 0.0, 40.0]); frames],
    }
}

fn random_objects(rng: &mut ChaCha8Rng, frames: usize, moving: bool) -> Vec<SceneObject> {
    let count = rng.random_range(3..=6);
    (0..count)
        .map(|i| {
            let id = i as u32 + 2;
            let size = rng.random_range(1.5..4.0);
            let (shape, name) = match rng.random_range(0..3) {
                0 => (
                    Shape::Quad {
                        width: size,
                        height: size * rng.random_range(0.6..1.4),
                    },
                    "quad",
                ),
                1 => (
                    Shape::Cuboid {
                        size: [size, size * rng.random_range(0.6..1.4), size * rng.random_range(0.6..1.4)],
                    },
                    "box",
                ),
                _ => (
                    Shape::Sphere {
                        radius: size / 2.0,
                        rings: 12,
                        segments: 20,
                    },
                    "sphere",
                ),
            };
            let texture = random_texture(rng);
            let start = [
                rng.random_range(-4.0..4.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(10.0..22.0),
            ];
            let axis0 = unit_vector(rng);
            let angle0 = rng.random_range(-1.0..1.0);
            let (vel, spin_axis, spin) = if moving {
                (
                    [
                        rng.random_range(-0.12..0.12),
                        rng.random_range(-0.08..0.08),
                        rng.random_range(-0.1..0.1),
                    ],
                    unit_vector(rng),
                    rng.random_range(-0.03..0.03),
                )
            } else {
                ([0.0; 3], [0.0, 0.0, 1.0], 0.0)
            };
            let base = Pose::axis_angle(axis0, angle0, [0.0; 3]);
            let poses = (0..frames)
                .map(|t| {
                    let tf = t as f64;
                    let spin = Pose::axis_angle(spin_axis, spin * tf, [0.0; 3]);
                    let pos = std::array::from_fn(|k| start[k] + vel[k] * tf);
                    Pose::translation(pos).compose(&spin.compose(&base))
                })
                .collect();
            SceneObject {
                id,
                name: format!("{name}{id}"),
                shape,
                texture,
                poses,
            }
        })
        .collect()
}

/// Builds a preset scene. Everything random is drawn from `params.seed`.
pub fn build_preset(preset: Preset, params: SceneParams) -> RigidScene {
    let SceneParams {
        width,
        height,
        num_frames: n,
        seed,
    } = params;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let focal = width.max(height) as f64;
    let intrinsics = Intrinsics::centered(width, height, focal);
    let still = vec![Pose::identity(); n];
    let (extrinsics, objects) = match preset {
        Preset::Static => {
            let mut objs = vec![backdrop(&mut rng, n)];
            objs.extend(random_objects(&mut rng, n, false));
            (still, objs)
        }
        Preset::Pan => {
            let mut objs = vec![backdrop(&mut rng, n)];
            objs.extend(random_objects(&mut rng, n, false));
            let speed = rng.random_range(0.03..0.08) * if rng.random() { 1.0 } else { -1.0 };
            let cams = (0..n).map(|t| Pose::translation([-speed * t as f64, 0.0, 0.0])).collect();
            (cams, objs)
        }
        Preset::Translate => {
            // Depth equal to the focal length makes one world unit one pixel.
            let depth = focal;
            let travel = TRANSLATE_SPEED * n as f64;
            let (hw, hh) = (width as f64 / 2.0 + 2.0, height as f64 / 2.0 + 2.0);
            // Left edge stays left of the view for the whole clip.
            let left = -hw - travel;
            let plane_w = 2.0 * hw + travel;
            let x0 = left + plane_w / 2.0;
            let mut texture = random_texture(&mut rng);
            texture.frequency = 0.08;
            let plane = SceneObject {
                id: 1,
                name: "plane".into(),
                shape: Shape::Quad {
                    width: plane_w,
                    height: 2.0 * hh,
                },
                texture,
                poses: (0..n)
                    .map(|t| Pose::translation([x0 + TRANSLATE_SPEED * t as f64, 0.0, depth]))
                    .collect(),
            };
            (still, vec![plane])
        }
        Preset::Random => {
            let mut objs = vec![backdrop(&mut rng, n)];
            objs.extend(random_objects(&mut rng, n, true));
            let drift = [rng.random_range(-0.05..0.05), rng.random_range(-0.03..0.03)];
            let shake = rng.random_range(0.0..0.004);
            let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let cams = (0..n)
                .map(|t| {
                    let tf = t as f64;
                    let yaw = shake * (0.9 * tf + phase).sin();
                    let c = [drift[0] * tf, drift[1] * tf, 0.0];
                    // World-to-camera: rotate after moving the center to the origin.
                    Pose::axis_angle([0.0, 1.0, 0.0], yaw, [0.0; 3])
                        .compose(&Pose::translation(c.map(|v| -v)))
                })
                .collect();
            (cams, objs)
        }
    };
    RigidScene {
        width,
        height,
        num_frames: n,
        fps: 24.0,
        seed,
        camera: Camera {
            intrinsics,
            extrinsics,
        },
        objects,
    }
}
