//! Lower envelope of unit-curvature parabolas `h_k + (x - c_k)^2`.
//!
//! Sites may sit at any real position, including outside the evaluated range
//! `0..n`. This is the one-dimensional pass of the generalized squared
//! distance transform.

/// Reusable scratch space for [`LowerEnvelope::evaluate`].
#[derive(Debug, Default)]
pub struct LowerEnvelope {
    /// Indices into the site arrays of parabolas on the envelope.
    hull: Vec<usize>,
    /// `bounds[k]..bounds[k + 1]` is where `hull[k]` is lowest.
    bounds: Vec<f64>,
}

impl LowerEnvelope {
    pub fn new() -> Self {
        Self::default()
    }

    /// Evaluates `min_k heights[k] + (x - positions[k])^2` at `x = 0..out.len()`.
    ///
    /// `positions` must be sorted ascending. Sites sharing a position keep the
    /// first lowest one. `out[x]` receives `(value, site index)`.
    pub fn evaluate(&mut self, positions: &[f64], heights: &[f64], out: &mut [(f64, usize)]) {
        debug_assert_eq!(positions.len(), heights.len());
        debug_assert!(positions.windows(2).all(|w| w[0] <= w[1]));
        self.hull.clear();
        self.bounds.clear();
        if positions.is_empty() {
            out.iter_mut().for_each(|o| *o = (f64::INFINITY, usize::MAX));
            return;
        }

        self.bounds.push(f64::NEG_INFINITY);
        for q in 0..positions.len() {
            let (pq, hq) = (positions[q], heights[q]);
            if let Some(&last) = self.hull.last() {
                if positions[last] == pq {
                    if hq < heights[last] {
                        self.hull.pop();
                        self.bounds.pop();
                    } else {
                        continue;
                    }
                }
            }
            let mut s = f64::NEG_INFINITY;
            while let Some(&top) = self.hull.last() {
                let pt = positions[top];
                s = ((hq + pq * pq) - (heights[top] + pt * pt)) / (2.0 * (pq - pt));
                if s <= *self.bounds.last().unwrap() {
                    self.hull.pop();
                    self.bounds.pop();
                    s = f64::NEG_INFINITY;
                } else {
                    break;
                }
            }
            if self.hull.is_empty() {
                self.bounds.clear();
                self.bounds.push(f64::NEG_INFINITY);
            } else {
                self.bounds.push(s);
            }
            self.hull.push(q);
        }
        self.bounds.push(f64::INFINITY);

        let mut k = 0;
        for (x, o) in out.iter_mut().enumerate() {
            let xf = x as f64;
            while self.bounds[k + 1] < xf {
                k += 1;
            }
            let site = self.hull[k];
            let d = xf - positions[site];
            *o = (heights[site] + d * d, site);
        }
    }
}
