//! Seeded value-noise albedo, evaluated in an object's local frame.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Texture {
    pub seed: u64,
    pub base: [u8; 3],
    pub accent: [u8; 3],
    /// Lattice cells per local unit.
    pub frequency: f64,
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn lattice(seed: u64, x: i64, y: i64, z: i64) -> f64 {
    let h = mix64(
        seed ^ mix64(x as u64)
            ^ mix64((y as u64).wrapping_add(0x9e37_79b9_7f4a_7c15))
            ^ mix64((z as u64).wrapping_add(0x3c6e_f372_fe94_f82b)),
    );
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn smooth(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

impl Texture {
    /// Noise in `[0, 1]` at a local-frame point.
    pub fn noise(&self, p: [f64; 3]) -> f64 {
        let q = p.map(|v| v * self.frequency);
        let i = q.map(|v| v.floor());
        let f = [smooth(q[0] - i[0]), smooth(q[1] - i[1]), smooth(q[2] - i[2])];
        let i = i.map(|v| v as i64);
        let mut acc = 0.0;
        for corner in 0..8 {
            let d = [corner & 1, (corner >> 1) & 1, (corner >> 2) & 1];
            let mut w = 1.0;
            for k in 0..3 {
                w *= if d[k] == 1 { f[k] } else { 1.0 - f[k] };
            }
            acc += w * lattice(self.seed, i[0] + d[0] as i64, i[1] + d[1] as i64, i[2] + d[2] as i64);
        }
        acc
    }

    pub fn color(&self, p: [f64; 3]) -> [u8; 3] {
        // Two octaves so edges read at both scales.
        let n = 0.7 * self.noise(p) + 0.3 * self.noise(p.map(|v| v * 4.0 + 17.0));
        std::array::from_fn(|k| {
            let (a, b) = (self.base[k] as f64, self.accent[k] as f64);
            (a + (b - a) * n).round().clamp(0.0, 255.0) as u8
        })
    }
}
