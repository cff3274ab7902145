use rand::Rng;
use tapkit_core::assist::{solve_segment, solve_segment_fast};
use tapkit_core::Point;
use tapkit_testkit::gen::{random_cell, rng};
use tapkit_testkit::paths::{enumerate_best_path, path_cost};

fn random_flow(
    rng: &mut impl Rng,
    w: usize,
    h: usize,
    frames: usize,
    integer: bool,
) -> tapkit_core::FlowVolume {
    tapkit_testkit::gen::random_flow(rng, w, h, frames, 2.0, integer)
}

#[test]
fn exact_matches_enumeration() {
    let mut rng = rng(11);
    for _ in 0..40 {
        let (w, h) = (rng.random_range(2..=6), rng.random_range(2..=6));
        let frames = rng.random_range(2..=5);
        let flow = random_flow(&mut rng, w, h, frames, false);
        let a = random_cell(&mut rng, w, h);
        let b = random_cell(&mut rng, w, h);
        let t = frames - 1;
        let (cost, path) = enumerate_best_path(&flow, 0, t, a, b);
        let got = solve_segment(
            &flow,
            Point::new(a.0 as f64, a.1 as f64),
            0,
            Point::new(b.0 as f64, b.1 as f64),
            t,
        )
        .unwrap();
        assert_eq!(got.cost, cost);
        assert_eq!(got.cells, path);
    }
}

#[test]
fn fast_error_bound_on_fractional_flow() {
    let mut rng = rng(5);
    let mut worst: f64 = 0.0;
    for _ in 0..std::env::var("N").map(|v| v.parse().unwrap()).unwrap_or(200) {
        let (w, h) = (rng.random_range(4..=16), rng.random_range(4..=16));
        let frames = rng.random_range(2..=6);
        let flow = random_flow(&mut rng, w, h, frames, false);
        let a = random_cell(&mut rng, w, h);
        let b = random_cell(&mut rng, w, h);
        let t = frames - 1;
        let pa = Point::new(a.0 as f64, a.1 as f64);
        let pb = Point::new(b.0 as f64, b.1 as f64);
        let exact = solve_segment(&flow, pa, 0, pb, t).unwrap();
        let fast = solve_segment_fast(&flow, pa, 0, pb, t).unwrap();
        assert_eq!(fast.cost, path_cost(&flow, 0, &fast.cells));
        let gap = fast.cost - exact.cost;
        assert!(gap >= -1e-9);
        worst = worst.max(gap / t as f64);
        assert!(gap <= 2.0 * t as f64, "gap {gap} over {t} transitions");
    }
    eprintln!("worst per-transition gap {worst}");
}
