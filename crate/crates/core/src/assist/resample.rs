use crate::trackstore::{FlowField, FlowVolume};

/// Overlap of source pixels `[i, i + 1)` with the target pixel's footprint,
/// as `(source index, weight)` pairs.
fn footprint(target: usize, n_src: usize, n_dst: usize) -> Vec<(usize, f64)> {
    let scale = n_src as f64 / n_dst as f64;
    let lo = target as f64 * scale;
    let hi = (target + 1) as f64 * scale;
    let first = lo.floor() as usize;
    let last = (hi.ceil() as usize).min(n_src);
    (first..last)
        .filter_map(|i| {
            let w = hi.min(i as f64 + 1.0) - lo.max(i as f64);
            (w > 0.0).then_some((i, w))
        })
        .collect()
}

/// Area-averages each flow field onto a `width x height` grid and rescales
/// the vectors into the new pixel units.
pub fn resample_flow(flow: &FlowVolume, width: usize, height: usize) -> FlowVolume {
    let xs: Vec<_> = (0..width)
        .map(|x| footprint(x, flow.width, width))
        .collect();
    let ys: Vec<_> = (0..height)
        .map(|y| footprint(y, flow.height, height))
        .collect();
    let su = width as f64 / flow.width as f64;
    let sv = height as f64 / flow.height as f64;
    let fields = crate::par::map_slice(&flow.fields, |f| {
        FlowField::from_fn(width, height, |x, y| {
            let (mut u, mut v, mut wsum) = (0.0, 0.0, 0.0);
            for &(sy, wy) in &ys[y] {
                for &(sx, wx) in &xs[x] {
                    let [fu, fv] = f.at(sx, sy);
                    let w = wx * wy;
                    u += w * fu;
                    v += w * fv;
                    wsum += w;
                }
            }
            [(u / wsum * su) as f32, (v / wsum * sv) as f32]
        })
    });
    FlowVolume {
        width,
        height,
        fields,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halving_averages_blocks_and_scales_vectors() {
        let f = FlowField::from_fn(4, 2, |x, _| [x as f32 * 2.0, 4.0]);
        let vol = FlowVolume::new(vec![f]).unwrap();
        let r = resample_flow(&vol, 2, 1);
        // Block means of u: (0+2)/2 = 1, (4+6)/2 = 5; then halved.
        assert_eq!(r.fields[0].data, vec![[0.5, 2.0], [2.5, 2.0]]);
    }

    #[test]
    fn identity_resolution() {
        let f = FlowField::from_fn(3, 3, |x, y| [x as f32 - 1.0, y as f32 * 0.5]);
        let vol = FlowVolume::new(vec![f]).unwrap();
        assert_eq!(resample_flow(&vol, 3, 3), vol);
    }

    #[test]
    fn fractional_footprints_cover_the_source() {
        for (src, dst) in [(5, 3), (7, 2), (3, 5)] {
            let total: f64 = (0..dst).flat_map(|t| footprint(t, src, dst)).map(|(_, w)| w).sum();
            assert!((total - src as f64).abs() < 1e-12);
        }
    }
}
