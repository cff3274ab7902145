use super::TapnetError;
use ndarray::{Array2, Array3, ArrayView2, ArrayView3};

/// Softmax over all cells of a `(y, x)` map.
pub fn softmax(logits: ArrayView2<f64>) -> Array2<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut e = logits.mapv(|z| (z - max).exp());
    let sum = e.sum();
    e /= sum;
    e
}

/// Cell `(i, j)` holding the largest value; ties go to the smallest row, then
/// column.
pub fn argmax(s: ArrayView2<f64>) -> (usize, usize) {
    let mut best = ((0, 0), f64::NEG_INFINITY);
    for (ij, &v) in s.indexed_iter() {
        if v > best.1 {
            best = (ij, v);
        }
    }
    best.0
}

/// Coordinate grid `(y, x, 2)` holding `(x, y) = (j, i)`.
pub fn pixel_coords(height: usize, width: usize) -> Array3<f64> {
    Array3::from_shape_fn((height, width, 2), |(i, j, k)| if k == 0 { j as f64 } else { i as f64 })
}

fn normalize(v: usize, size: usize) -> f64 {
    if size < 2 {
        0.0
    } else {
        2.0 * v as f64 / (size - 1) as f64 - 1.0
    }
}

/// Coordinate grid with cell centres spread over `[-1, 1]` on each axis.
pub fn normalized_coords(height: usize, width: usize) -> Array3<f64> {
    Array3::from_shape_fn((height, width, 2), |(i, j, k)| if k == 0 { normalize(j, width) } else { normalize(i, height) })
}

pub(crate) fn in_ball(center: (usize, usize), i: usize, j: usize, tau: f64) -> bool {
    let di = i as f64 - center.0 as f64;
    let dj = j as f64 - center.1 as f64;
    di * di + dj * dj < tau * tau
}

/// Mass-weighted mean of `coords` over cells strictly within `tau` cells of
/// the argmax of `s`.
pub fn soft_argmax(s: ArrayView2<f64>, coords: ArrayView3<f64>, tau: f64) -> Result<[f64; 2], TapnetError> {
    let (h, w) = s.dim();
    if coords.dim() != (h, w, 2) {
        return Err(TapnetError::Shape(format!("heatmap {:?} vs coordinates {:?}", s.dim(), coords.dim())));
    }
    let center = argmax(s);
    let (mut mass, mut x, mut y) = (0.0, 0.0, 0.0);
    for ((i, j), &v) in s.indexed_iter() {
        if in_ball(center, i, j, tau) {
            mass += v;
            x += v * coords[[i, j, 0]];
            y += v * coords[[i, j, 1]];
        }
    }
    if !(mass >= 1e-20) {
        return Err(TapnetError::DegenerateMass(mass));
    }
    Ok([x / mass, y / mass])
}
