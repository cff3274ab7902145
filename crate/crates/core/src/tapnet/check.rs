use super::heatmap::{normalized_coords, pixel_coords, soft_argmax, softmax};
use super::loss::{loss_gradient, LossInputs};
use super::{TapnetError, HUBER_DELTA, OCCLUSION_WEIGHT, TAU};
use ndarray::{Array2, Array3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Gradients smaller than this are compared absolutely.
const GRADIENT_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradientCheck {
    /// `|analytic - numeric| / max(|analytic|, |numeric|)` over the heatmap
    /// logits.
    pub logits_error: f64,
    /// Same over the occlusion logits.
    pub occlusion_error: f64,
    /// A probe moved an argmax cell or crossed the Huber knee, so the
    /// finite differences do not see the linearization.
    pub unstable: bool,
}

impl GradientCheck {
    pub fn error(&self) -> f64 {
        self.logits_error.max(self.occlusion_error)
    }
}

fn relative(a: &[f64], n: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(n).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(n)).max(GRADIENT_FLOOR)
}

/// Compares `loss_gradient` against central differences with step `h`.
pub fn gradient_check(inputs: &LossInputs, h: f64) -> Result<GradientCheck, TapnetError> {
    let analytic = loss_gradient(inputs)?;
    let base = inputs.forward()?;
    let side = |d: &[f64]| d.iter().map(|&v| v <= HUBER_DELTA).collect::<Vec<_>>();
    let base_side = side(&base.distances);
    let mut unstable = false;
    let mut probe = inputs.clone();
    let mut numeric = Vec::with_capacity(inputs.logits.len());
    let shape = inputs.logits.dim();
    for t in 0..shape.0 {
        for i in 0..shape.1 {
            for j in 0..shape.2 {
                let z = inputs.logits[[t, i, j]];
                let mut eval = |v: f64| -> Result<f64, TapnetError> {
                    probe.logits[[t, i, j]] = v;
                    let f = probe.forward()?;
                    if f.argmax != base.argmax || side(&f.distances) != base_side {
                        unstable = true;
                    }
                    Ok(f.loss)
                };
                let hi = eval(z + h)?;
                let lo = eval(z - h)?;
                probe.logits[[t, i, j]] = z;
                numeric.push((hi - lo) / (2.0 * h));
            }
        }
    }
    let mut occ = Vec::with_capacity(inputs.occ_logits.len());
    for t in 0..inputs.occ_logits.len() {
        let l = inputs.occ_logits[t];
        probe.occ_logits[t] = l + h;
        let hi = probe.forward()?.loss;
        probe.occ_logits[t] = l - h;
        let lo = probe.forward()?.loss;
        probe.occ_logits[t] = l;
        occ.push((hi - lo) / (2.0 * h));
    }
    Ok(GradientCheck {
        logits_error: relative(analytic.logits.as_slice().expect("standard layout"), &numeric),
        occlusion_error: relative(&analytic.occ_logits, &occ),
        unstable,
    })
}

/// A single-peaked random instance with ground truth near the prediction so
/// both Huber branches occur.
pub fn random_instance(rng: &mut impl Rng, frames: usize, height: usize, width: usize) -> LossInputs {
    let mut logits = Array3::from_shape_simple_fn((frames, height, width), || rng.random_range(-2.0..2.0));
    for t in 0..frames {
        let (i, j) = (rng.random_range(0..height), rng.random_range(0..width));
        logits[[t, i, j]] += rng.random_range(3.0..6.0);
    }
    let coords = normalized_coords(height, width);
    let mut inputs = LossInputs {
        logits,
        coords,
        occ_logits: (0..frames).map(|_| rng.random_range(-4.0..4.0)).collect(),
        gt_pos: vec![[0.0, 0.0]; frames],
        gt_occ: (0..frames).map(|_| rng.random_bool(0.3)).collect(),
        tau: TAU,
        lambda: OCCLUSION_WEIGHT,
    };
    let pred = inputs.forward().expect("well-formed instance").positions;
    inputs.gt_pos = pred
        .iter()
        .map(|p| {
            let r = rng.random_range(0.0..3.0 * HUBER_DELTA);
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            [p[0] + r * a.cos(), p[1] + r * a.sin()]
        })
        .collect();
    inputs
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub seed: u64,
    pub instances: usize,
    pub stable: usize,
    pub passed: usize,
    pub tolerance: f64,
    pub max_error: f64,
    pub one_hot_exact: bool,
    pub softmax_normalized: bool,
    pub loss_nonnegative: bool,
}

impl CheckReport {
    pub fn pass_rate(&self) -> f64 {
        if self.stable == 0 {
            0.0
        } else {
            self.passed as f64 / self.stable as f64
        }
    }

    pub fn ok(&self) -> bool {
        self.one_hot_exact && self.softmax_normalized && self.loss_nonnegative && self.pass_rate() >= 0.99
    }
}

/// Runs the gradient check on `instances` random stable instances plus the
/// soft argmax and loss invariants.
pub fn run_checks(seed: u64, instances: usize, h: f64, tolerance: f64) -> Result<CheckReport, TapnetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut stable, mut passed, mut drawn) = (0, 0, 0);
    let mut max_error: f64 = 0.0;
    let (mut one_hot_exact, mut softmax_normalized, mut loss_nonnegative) = (true, true, true);
    while stable < instances && drawn < 20 * instances.max(1) {
        drawn += 1;
        let frames = rng.random_range(1..=3);
        let (height, width) = (rng.random_range(2..=12), rng.random_range(2..=12));
        let inputs = random_instance(&mut rng, frames, height, width);

        let (i, j) = (rng.random_range(0..height), rng.random_range(0..width));
        let mut one_hot = Array2::zeros((height, width));
        one_hot[[i, j]] = 1.0;
        let g = pixel_coords(height, width);
        one_hot_exact &= soft_argmax(one_hot.view(), g.view(), TAU)? == [j as f64, i as f64];
        for t in 0..frames {
            let s = softmax(inputs.logits.index_axis(ndarray::Axis(0), t));
            softmax_normalized &= (s.sum() - 1.0).abs() <= 1e-6 && s.iter().all(|&v| v >= 0.0);
        }
        loss_nonnegative &= inputs.forward()?.loss >= 0.0;

        let check = gradient_check(&inputs, h)?;
        if check.unstable {
            continue;
        }
        stable += 1;
        max_error = max_error.max(check.error());
        if check.error() < tolerance {
            passed += 1;
        }
    }
    Ok(CheckReport {
        seed,
        instances: drawn,
        stable,
        passed,
        tolerance,
        max_error,
        one_hot_exact,
        softmax_normalized,
        loss_nonnegative,
    })
}
