//! Weight-free numerics of a cost-volume point tracker: feature lookup,
//! per-query cost volumes, spatial soft argmax and the training loss with
//! its gradient.

mod check;
mod heatmap;
mod loss;

pub use check::{gradient_check, random_instance, run_checks, CheckReport, GradientCheck};
pub use heatmap::{argmax, normalized_coords, pixel_coords, soft_argmax, softmax};
pub use loss::{bce_with_logit, huber, loss_gradient, tap_loss, Forward, Gradient, LossInputs};

use crate::par;
use crate::simscene::RenderOutput;
use crate::trackstore::Query;
use ndarray::{Array1, Array3, Array4, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Ball radius for the soft argmax, in grid cells.
pub const TAU: f64 = 5.0;
/// Huber threshold in normalized `[-1, 1]` coordinates.
pub const HUBER_DELTA: f64 = 1.0 / 32.0;
/// Weight of the occlusion term.
pub const OCCLUSION_WEIGHT: f64 = 100.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TapnetError {
    #[error("feature grid must be non-empty with at least one channel, got {0:?}")]
    EmptyGrid([usize; 4]),
    #[error("feature grid holds a non-finite value")]
    NonFinite,
    #[error("frame {t} out of range for {frames} frames")]
    FrameOutOfRange { t: usize, frames: usize },
    #[error("heatmap mass inside the ball is {0:e}")]
    DegenerateMass(f64),
    #[error("shape mismatch: {0}")]
    Shape(String),
}

/// Features indexed `(t, y, x, channel)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    values: Array4<f64>,
}

impl FeatureGrid {
    pub fn new(values: Array4<f64>) -> Result<Self, TapnetError> {
        let d = values.dim();
        if d.0 == 0 || d.1 == 0 || d.2 == 0 || d.3 == 0 {
            return Err(TapnetError::EmptyGrid([d.0, d.1, d.2, d.3]));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(TapnetError::NonFinite);
        }
        Ok(Self { values })
    }

    /// Uniform features in `[-1, 1)` from a seed.
    pub fn random(frames: usize, height: usize, width: usize, channels: usize, seed: u64) -> Result<Self, TapnetError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = Array4::from_shape_simple_fn((frames, height, width, channels), || rng.random_range(-1.0..1.0));
        Self::new(values)
    }

    /// Mean-centred colour averaged over `stride x stride` blocks.
    pub fn from_render(render: &RenderOutput, stride: usize) -> Result<Self, TapnetError> {
        let stride = stride.max(1);
        let (h, w) = (render.height / stride, render.width / stride);
        let mut values = Array4::zeros((render.frames.len(), h, w, 3));
        for (t, frame) in render.frames.iter().enumerate() {
            for i in 0..h {
                for j in 0..w {
                    for dy in 0..stride {
                        for dx in 0..stride {
                            let c = frame.color[(i * stride + dy) * render.width + j * stride + dx];
                            for k in 0..3 {
                                values[[t, i, j, k]] += c[k] as f64 / 255.0;
                            }
                        }
                    }
                }
            }
        }
        let n = (stride * stride) as f64;
        values.mapv_inplace(|v| v / n - 0.5);
        Self::new(values)
    }

    pub fn values(&self) -> &Array4<f64> {
        &self.values
    }

    pub fn frames(&self) -> usize {
        self.values.dim().0
    }

    pub fn height(&self) -> usize {
        self.values.dim().1
    }

    pub fn width(&self) -> usize {
        self.values.dim().2
    }

    pub fn channels(&self) -> usize {
        self.values.dim().3
    }
}

fn corner(v: f64, size: usize) -> (usize, f64) {
    let v = v.clamp(0.0, (size - 1) as f64);
    let i = (v.floor() as usize).min(size.saturating_sub(2));
    (i, v - i as f64)
}

/// Bilinear blend of the four cells around `(x, y)` on frame `t`;
/// coordinates are clamped to the grid.
pub fn bilinear_lookup(grid: &FeatureGrid, x: f64, y: f64, t: usize) -> Result<Array1<f64>, TapnetError> {
    if t >= grid.frames() {
        return Err(TapnetError::FrameOutOfRange { t, frames: grid.frames() });
    }
    let frame = grid.values.index_axis(Axis(0), t);
    let (j0, fx) = corner(x, grid.width());
    let (i0, fy) = corner(y, grid.height());
    let j1 = (j0 + 1).min(grid.width() - 1);
    let i1 = (i0 + 1).min(grid.height() - 1);
    let cell = |i: usize, j: usize| frame.index_axis(Axis(0), i).index_axis(Axis(0), j).to_owned();
    Ok(cell(i0, j0) * ((1.0 - fx) * (1.0 - fy))
        + cell(i0, j1) * (fx * (1.0 - fy))
        + cell(i1, j0) * ((1.0 - fx) * fy)
        + cell(i1, j1) * (fx * fy))
}

/// Dot products of the query feature with every cell, before the ReLU.
pub fn raw_cost_volume(grid: &FeatureGrid, query: &Query) -> Result<Array3<f64>, TapnetError> {
    let fq = bilinear_lookup(grid, query.x, query.y, query.t)?;
    let (t, h, w) = (grid.frames(), grid.height(), grid.width());
    let d = grid.channels();
    let frames = par::map_range(t, |k| {
        let cells = grid.values.index_axis(Axis(0), k);
        let flat = cells.to_shape((h * w, d)).expect("contiguous frame");
        flat.dot(&fq)
    });
    let mut out = Array3::zeros((t, h, w));
    for (k, f) in frames.into_iter().enumerate() {
        out.index_axis_mut(Axis(0), k)
            .assign(&f.into_shape_with_order((h, w)).expect("h * w values"));
    }
    Ok(out)
}

/// Per-query cost volume `(t, y, x)`: ReLU of the query feature dotted with
/// every cell.
pub fn cost_volume(grid: &FeatureGrid, query: &Query) -> Result<Array3<f64>, TapnetError> {
    let mut c = raw_cost_volume(grid, query)?;
    c.mapv_inplace(|v| v.max(0.0));
    Ok(c)
}
