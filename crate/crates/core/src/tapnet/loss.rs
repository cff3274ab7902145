use super::heatmap::{argmax, in_ball, softmax};
use super::{TapnetError, HUBER_DELTA};
use crate::par;
use ndarray::{Array2, Array3, Axis};

/// `d^2 / 2` up to `HUBER_DELTA`, linear beyond.
pub fn huber(d: f64) -> f64 {
    if d <= HUBER_DELTA {
        0.5 * d * d
    } else {
        HUBER_DELTA * (d - 0.5 * HUBER_DELTA)
    }
}

fn huber_slope(d: f64) -> f64 {
    if d <= HUBER_DELTA {
        d
    } else {
        HUBER_DELTA
    }
}

fn sigmoid(l: f64) -> f64 {
    if l >= 0.0 {
        1.0 / (1.0 + (-l).exp())
    } else {
        let e = l.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of `sigmoid(logit)` against `occluded`.
pub fn bce_with_logit(logit: f64, occluded: bool) -> f64 {
    let softplus = logit.max(0.0) + (-logit.abs()).exp().ln_1p();
    softplus - if occluded { logit } else { 0.0 }
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Summed over frames: Huber position loss on ground-truth-visible frames
/// plus `lambda` times the occlusion cross-entropy. Positions are in
/// normalized `[-1, 1]` coordinates. Panics on length mismatch.
pub fn tap_loss(pred_pos: &[[f64; 2]], pred_occ_logit: &[f64], gt_pos: &[[f64; 2]], gt_occ: &[bool], lambda: f64) -> f64 {
    let n = pred_pos.len();
    assert!(
        pred_occ_logit.len() == n && gt_pos.len() == n && gt_occ.len() == n,
        "per-frame inputs must have equal lengths"
    );
    (0..n)
        .map(|t| {
            let pos = if gt_occ[t] { 0.0 } else { huber(distance(pred_pos[t], gt_pos[t])) };
            pos + lambda * bce_with_logit(pred_occ_logit[t], gt_occ[t])
        })
        .sum()
}

/// One query track: heatmap logits per frame feed the soft argmax.
#[derive(Debug, Clone, PartialEq)]
pub struct LossInputs {
    /// `(t, y, x)` softmax logits.
    pub logits: Array3<f64>,
    /// `(y, x, 2)` coordinate of each cell, normalized to `[-1, 1]`.
    pub coords: Array3<f64>,
    pub occ_logits: Vec<f64>,
    pub gt_pos: Vec<[f64; 2]>,
    pub gt_occ: Vec<bool>,
    pub tau: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub loss: f64,
    pub positions: Vec<[f64; 2]>,
    pub argmax: Vec<(usize, usize)>,
    /// Position error per frame.
    pub distances: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub loss: f64,
    pub logits: Array3<f64>,
    pub occ_logits: Vec<f64>,
}

struct FrameState {
    s: Array2<f64>,
    center: (usize, usize),
    mass: f64,
    pos: [f64; 2],
}

impl LossInputs {
    fn validate(&self) -> Result<(), TapnetError> {
        let (t, h, w) = self.logits.dim();
        if self.coords.dim() != (h, w, 2) {
            return Err(TapnetError::Shape(format!("logits {:?} vs coordinates {:?}", self.logits.dim(), self.coords.dim())));
        }
        if self.occ_logits.len() != t || self.gt_pos.len() != t || self.gt_occ.len() != t {
            return Err(TapnetError::Shape(format!("{t} frames of logits but per-frame inputs of other lengths")));
        }
        Ok(())
    }

    fn frame(&self, t: usize) -> Result<FrameState, TapnetError> {
        let s = softmax(self.logits.index_axis(Axis(0), t));
        let center = argmax(s.view());
        let (mut mass, mut x, mut y) = (0.0, 0.0, 0.0);
        for ((i, j), &v) in s.indexed_iter() {
            if in_ball(center, i, j, self.tau) {
                mass += v;
                x += v * self.coords[[i, j, 0]];
                y += v * self.coords[[i, j, 1]];
            }
        }
        if !(mass >= 1e-20) {
            return Err(TapnetError::DegenerateMass(mass));
        }
        Ok(FrameState {
            s,
            center,
            mass,
            pos: [x / mass, y / mass],
        })
    }

    fn frames(&self) -> Result<Vec<FrameState>, TapnetError> {
        self.validate()?;
        par::map_range(self.logits.dim().0, |t| self.frame(t)).into_iter().collect()
    }

    pub fn forward(&self) -> Result<Forward, TapnetError> {
        let frames = self.frames()?;
        let positions: Vec<[f64; 2]> = frames.iter().map(|f| f.pos).collect();
        Ok(Forward {
            loss: tap_loss(&positions, &self.occ_logits, &self.gt_pos, &self.gt_occ, self.lambda),
            distances: positions.iter().zip(&self.gt_pos).map(|(&p, &g)| distance(p, g)).collect(),
            argmax: frames.iter().map(|f| f.center).collect(),
            positions,
        })
    }
}

/// Analytic gradient of the loss with respect to the heatmap logits and the
/// occlusion logits. The argmax cell and its ball are held fixed.
pub fn loss_gradient(inputs: &LossInputs) -> Result<Gradient, TapnetError> {
    let frames = inputs.frames()?;
    let positions: Vec<[f64; 2]> = frames.iter().map(|f| f.pos).collect();
    let loss = tap_loss(&positions, &inputs.occ_logits, &inputs.gt_pos, &inputs.gt_occ, inputs.lambda);
    let (_, h, w) = inputs.logits.dim();
    let per_frame = par::map_range(frames.len(), |t| {
        let f = &frames[t];
        let d = distance(f.pos, inputs.gt_pos[t]);
        let mut grad = Array2::zeros((h, w));
        if inputs.gt_occ[t] || d == 0.0 {
            return grad;
        }
        let scale = huber_slope(d) / d;
        let g = [scale * (f.pos[0] - inputs.gt_pos[t][0]), scale * (f.pos[1] - inputs.gt_pos[t][1])];
        // dL/dS over the ball, then back through the softmax.
        let mut a = Array2::zeros((h, w));
        for i in 0..h {
            for j in 0..w {
                if in_ball(f.center, i, j, inputs.tau) {
                    a[[i, j]] = (g[0] * (inputs.coords[[i, j, 0]] - f.pos[0]) + g[1] * (inputs.coords[[i, j, 1]] - f.pos[1])) / f.mass;
                }
            }
        }
        let mean: f64 = (&f.s * &a).sum();
        grad.zip_mut_with(&f.s, |o, &s| *o = s);
        grad.zip_mut_with(&a, |o, &ak| *o *= ak - mean);
        grad
    });
    let mut logits = Array3::zeros(inputs.logits.dim());
    for (t, g) in per_frame.into_iter().enumerate() {
        logits.index_axis_mut(Axis(0), t).assign(&g);
    }
    let occ_logits = inputs
        .occ_logits
        .iter()
        .zip(&inputs.gt_occ)
        .map(|(&l, &o)| inputs.lambda * (sigmoid(l) - if o { 1.0 } else { 0.0 }))
        .collect();
    Ok(Gradient { loss, logits, occ_logits })
}
