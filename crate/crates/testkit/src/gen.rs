//! Seeded random inputs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tapkit_core::{FlowField, FlowVolume};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform flow in `[-mag, mag]` per component, or integers in that range.
pub fn random_flow(
    rng: &mut impl Rng,
    w: usize,
    h: usize,
    frames: usize,
    mag: f32,
    integer: bool,
) -> FlowVolume {
    let fields = (0..frames - 1)
        .map(|_| {
            FlowField::from_fn(w, h, |_, _| {
                if integer {
                    let m = mag as i32;
                    [rng.random_range(-m..=m) as f32, rng.random_range(-m..=m) as f32]
                } else {
                    [rng.random_range(-mag..mag), rng.random_range(-mag..mag)]
                }
            })
        })
        .collect();
    FlowVolume::new(fields).unwrap()
}

pub fn random_cell(rng: &mut impl Rng, w: usize, h: usize) -> (usize, usize) {
    (rng.random_range(0..w), rng.random_range(0..h))
}
