use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;
use tapkit_core::tapnet::{
    cost_volume, gradient_check, loss_gradient, pixel_coords, random_instance, raw_cost_volume, soft_argmax, tap_loss,
    FeatureGrid, TAU,
};
use tapkit_core::trackstore::Query;
use tapkit_testkit::{gen, tapnet as oracle};

fn rel(a: &[f64], n: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(n).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(n)).max(1e-8)
}

#[test]
fn cost_volume_matches_triple_loop() {
    let mut rng = gen::rng(11);
    for seed in 0..50 {
        let (t, h, w, d) = (rng.random_range(1..4), rng.random_range(1..9), rng.random_range(1..9), rng.random_range(1..6));
        let grid = FeatureGrid::random(t, h, w, d, seed).unwrap();
        let q = Query {
            t: rng.random_range(0..t),
            x: rng.random_range(-0.5..w as f64 - 0.5),
            y: rng.random_range(-0.5..h as f64 - 0.5),
        };
        let ours = cost_volume(&grid, &q).unwrap();
        let want = oracle::cost_volume(&grid, q.t, q.x, q.y);
        assert_eq!(ours.len(), want.len());
        for (a, b) in ours.iter().zip(&want) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
            assert!(*a >= 0.0);
        }
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = gen::rng(5);
    let (mut stable, mut passed, mut worst) = (0, 0, 0.0f64);
    while stable < 1000 {
        let (t, h, w) = (rng.random_range(1..4), rng.random_range(2..11), rng.random_range(2..11));
        let inp = random_instance(&mut rng, t, h, w);
        if gradient_check(&inp, 1e-4).unwrap().unstable {
            continue;
        }
        stable += 1;
        let g = loss_gradient(&inp).unwrap();
        assert!((g.loss - oracle::loss(&inp)).abs() <= 1e-9 * (1.0 + g.loss));
        let (num_logits, num_occ) = oracle::finite_differences(&inp, 1e-4);
        let e = rel(g.logits.as_slice().unwrap(), &num_logits).max(rel(&g.occ_logits, &num_occ));
        worst = worst.max(e);
        if e < 1e-4 {
            passed += 1;
        }
    }
    println!("gradient check: {passed}/{stable} within 1e-4, worst {worst:e}");
    assert!(passed * 100 >= stable * 99);
}

#[test]
fn one_hot_identity_everywhere() {
    let g = pixel_coords(9, 13);
    for i in 0..9 {
        for j in 0..13 {
            let mut s = Array2::zeros((9, 13));
            s[[i, j]] = 1.0;
            assert_eq!(soft_argmax(s.view(), g.view(), TAU).unwrap(), [j as f64, i as f64]);
        }
    }
}

fn heatmap(h: usize, w: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(0.0..1.0f64, h * w).prop_map(move |v| {
        let s: f64 = v.iter().sum::<f64>().max(1e-9);
        Array2::from_shape_vec((h, w), v.into_iter().map(|x| x / s).collect()).unwrap()
    })
}

proptest! {
    #[test]
    fn output_inside_ball(s in heatmap(12, 10)) {
        let p = soft_argmax(s.view(), pixel_coords(12, 10).view(), TAU).unwrap();
        let (i, j) = tapkit_core::tapnet::argmax(s.view());
        prop_assert!((p[0] - j as f64).hypot(p[1] - i as f64) < TAU);
    }

    #[test]
    fn shift_equivariance(patch in heatmap(7, 7), at in (0usize..10, 0usize..10), by in (0usize..10, 0usize..10)) {
        let place = |r: usize, c: usize| {
            let mut s = Array2::zeros((26, 26));
            s.slice_mut(ndarray::s![r..r + 7, c..c + 7]).assign(&patch);
            s
        };
        let g = pixel_coords(26, 26);
        let a = soft_argmax(place(at.0, at.1).view(), g.view(), TAU).unwrap();
        let b = soft_argmax(place(at.0 + by.0, at.1 + by.1).view(), g.view(), TAU).unwrap();
        prop_assert!((b[0] - a[0] - by.1 as f64).abs() < 1e-9);
        prop_assert!((b[1] - a[1] - by.0 as f64).abs() < 1e-9);
    }

    #[test]
    fn raw_cost_is_bilinear_in_query(seed in any::<u64>(), fx in 0.0..1.0f64, fy in 0.0..1.0f64, cell in (0usize..4, 0usize..5)) {
        let grid = FeatureGrid::random(2, 5, 6, 3, seed).unwrap();
        let (i, j) = cell;
        let at = |x: f64, y: f64| raw_cost_volume(&grid, &Query { t: 1, x, y }).unwrap();
        let (x0, y0) = (j as f64, i as f64);
        let want = at(x0, y0) * ((1.0 - fx) * (1.0 - fy))
            + at(x0 + 1.0, y0) * (fx * (1.0 - fy))
            + at(x0, y0 + 1.0) * ((1.0 - fx) * fy)
            + at(x0 + 1.0, y0 + 1.0) * (fx * fy);
        let got = at(x0 + fx, y0 + fy);
        for (a, b) in got.iter().zip(want.iter()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_nonnegative(
        frames in prop::collection::vec(((-1.0..1.0f64, -1.0..1.0f64), (-1.0..1.0f64, -1.0..1.0f64), -30.0..30.0f64, any::<bool>()), 1..8),
    ) {
        let pred: Vec<[f64; 2]> = frames.iter().map(|f| [f.0 .0, f.0 .1]).collect();
        let gt: Vec<[f64; 2]> = frames.iter().map(|f| [f.1 .0, f.1 .1]).collect();
        let logits: Vec<f64> = frames.iter().map(|f| f.2).collect();
        let occ: Vec<bool> = frames.iter().map(|f| f.3).collect();
        prop_assert!(tap_loss(&pred, &logits, &gt, &occ, 100.0) >= 0.0);
    }
}
