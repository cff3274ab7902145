//! Scalar loops for the cost volume and the tracking loss, plus central
//! finite differences over the loss.

use tapkit_core::tapnet::{FeatureGrid, LossInputs};

fn lookup(grid: &FeatureGrid, x: f64, y: f64, t: usize) -> Vec<f64> {
    let v = grid.values();
    let (w, h, d) = (grid.width(), grid.height(), grid.channels());
    let x = x.max(0.0).min((w - 1) as f64);
    let y = y.max(0.0).min((h - 1) as f64);
    let mut out = vec![0.0; d];
    // Sum over the four integer neighbours with tent weights.
    for i in 0..h {
        for j in 0..w {
            let wx = (1.0 - (x - j as f64).abs()).max(0.0);
            let wy = (1.0 - (y - i as f64).abs()).max(0.0);
            if wx * wy > 0.0 {
                for k in 0..d {
                    out[k] += wx * wy * v[[t, i, j, k]];
                }
            }
        }
    }
    out
}

/// ReLU'd dot products, flattened `(t, y, x)`.
pub fn cost_volume(grid: &FeatureGrid, t: usize, x: f64, y: f64) -> Vec<f64> {
    let q = lookup(grid, x, y, t);
    let v = grid.values();
    let mut out = Vec::new();
    for tt in 0..grid.frames() {
        for i in 0..grid.height() {
            for j in 0..grid.width() {
                let mut dot = 0.0;
                for k in 0..grid.channels() {
                    dot += q[k] * v[[tt, i, j, k]];
                }
                out.push(if dot > 0.0 { dot } else { 0.0 });
            }
        }
    }
    out
}

/// The loss evaluated directly: softmax, argmax, strict ball, Huber and
/// logistic cross-entropy.
pub fn loss(inp: &LossInputs) -> f64 {
    let (frames, h, w) = inp.logits.dim();
    let delta = 1.0 / 32.0;
    let mut total = 0.0;
    for t in 0..frames {
        let mut max = f64::NEG_INFINITY;
        for i in 0..h {
            for j in 0..w {
                max = max.max(inp.logits[[t, i, j]]);
            }
        }
        let mut z = 0.0;
        for i in 0..h {
            for j in 0..w {
                z += (inp.logits[[t, i, j]] - max).exp();
            }
        }
        let s = |i: usize, j: usize| (inp.logits[[t, i, j]] - max).exp() / z;
        let mut best = (0, 0);
        for i in 0..h {
            for j in 0..w {
                if s(i, j) > s(best.0, best.1) {
                    best = (i, j);
                }
            }
        }
        let (mut m, mut px, mut py) = (0.0, 0.0, 0.0);
        for i in 0..h {
            for j in 0..w {
                let di = i as f64 - best.0 as f64;
                let dj = j as f64 - best.1 as f64;
                if (di * di + dj * dj).sqrt() < inp.tau {
                    m += s(i, j);
                    px += s(i, j) * inp.coords[[i, j, 0]];
                    py += s(i, j) * inp.coords[[i, j, 1]];
                }
            }
        }
        let (px, py) = (px / m, py / m);
        let o = if inp.gt_occ[t] { 1.0 } else { 0.0 };
        let d = ((px - inp.gt_pos[t][0]).powi(2) + (py - inp.gt_pos[t][1]).powi(2)).sqrt();
        let hub = if d <= delta { 0.5 * d * d } else { delta * (d - 0.5 * delta) };
        let p = 1.0 / (1.0 + (-inp.occ_logits[t]).exp());
        let bce = -(o * p.ln() + (1.0 - o) * (1.0 - p).ln());
        total += (1.0 - o) * hub + inp.lambda * bce;
    }
    total
}

/// Central differences of `loss` over every heatmap logit (flattened
/// `(t, y, x)`) and every occlusion logit.
pub fn finite_differences(inp: &LossInputs, h: f64) -> (Vec<f64>, Vec<f64>) {
    let mut probe = inp.clone();
    let (frames, hh, ww) = inp.logits.dim();
    let mut logits = Vec::new();
    for t in 0..frames {
        for i in 0..hh {
            for j in 0..ww {
                let z = inp.logits[[t, i, j]];
                probe.logits[[t, i, j]] = z + h;
                let hi = loss(&probe);
                probe.logits[[t, i, j]] = z - h;
                let lo = loss(&probe);
                probe.logits[[t, i, j]] = z;
                logits.push((hi - lo) / (2.0 * h));
            }
        }
    }
    let mut occ = Vec::new();
    for t in 0..frames {
        let l = inp.occ_logits[t];
        probe.occ_logits[t] = l + h;
        let hi = loss(&probe);
        probe.occ_logits[t] = l - h;
        let lo = loss(&probe);
        probe.occ_logits[t] = l;
        occ.push((hi - lo) / (2.0 * h));
    }
    (logits, occ)
}
