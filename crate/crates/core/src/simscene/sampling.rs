//! Per-object query sampling under a global budget.

use super::render::RenderFrame;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryBudget {
    /// Total queries per video.
    pub budget: usize,
    /// Per-object cap as a fraction of its pixel count, in parts per million.
    pub cap_ppm: u64,
}

impl Default for QueryBudget {
    fn default() -> Self {
        QueryBudget {
            budget: 256,
            cap_ppm: 1600,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampledQuery {
    pub object: u32,
    pub x: usize,
    pub y: usize,
}

/// Queries per object. Objects are visited from fewest to most pixels (ties
/// by id); each gets `min(P * cap, remaining / objects_left)`, rounded down.
pub fn allocate_queries(pixel_counts: &[(u32, usize)], budget: QueryBudget) -> Vec<(u32, usize)> {
    let mut order = pixel_counts.to_vec();
    order.sort_by_key(|&(id, p)| (p, id));
    let mut remaining = budget.budget;
    let mut left = order.len();
    order
        .into_iter()
        .map(|(id, p)| {
            let cap = (p as u128 * budget.cap_ppm as u128 / 1_000_000) as usize;
            let n = cap.min(remaining / left);
            remaining -= n;
            left -= 1;
            (id, n)
        })
        .collect()
}

/// Samples query pixels uniformly without replacement from each object's
/// visible pixels on `frame`. `objects` lists every object id in the scene,
/// including ones with no visible pixels. Results are grouped by object in
/// allocation order, pixels in row-major order.
pub fn sample_queries(
    frame: &RenderFrame,
    objects: &[u32],
    budget: QueryBudget,
    rng: &mut impl Rng,
) -> Vec<SampledQuery> {
    let w = frame.depth.width;
    let pixels: Vec<Vec<usize>> = objects
        .iter()
        .map(|&id| {
            frame
                .ids
                .iter()
                .enumerate()
                .filter(|(_, &o)| o == id)
                .map(|(k, _)| k)
                .collect()
        })
        .collect();
    let counts: Vec<(u32, usize)> = objects.iter().zip(&pixels).map(|(&id, p)| (id, p.len())).collect();
    let mut out = Vec::new();
    for (id, n) in allocate_queries(&counts, budget) {
        let pool = &pixels[objects.iter().position(|&o| o == id).unwrap()];
        let mut picked: Vec<usize> = index::sample(rng, pool.len(), n).into_iter().map(|i| pool[i]).collect();
        picked.sort_unstable();
        out.extend(picked.into_iter().map(|k| SampledQuery {
            object: id,
            x: k % w,
            y: k / w,
        }));
    }
    out
}
