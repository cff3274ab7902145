//! End-to-end acceptance checks. Each test writes one `PASS <name>` or
//! `FAIL <name>: <reason>` line straight to stdout so the summary shows up
//! even when the harness captures output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::time::Instant;
use tapkit_core::assist::{solve_segment, solve_segment_fast, solve_track, AssistConfig, ControlPointSet};
use tapkit_core::chaintrack::{chain_track, ChainConfig};
use tapkit_core::metrics::{evaluate, evaluate_videos, EvalConfig, QueryMode, THRESHOLDS};
use tapkit_core::simscene::{build_preset, occlusion_test, simulate, Preset, QueryBudget, SceneParams};
use tapkit_core::tapnet::{
    cost_volume, gradient_check, loss_gradient, pixel_coords, random_instance, soft_argmax, FeatureGrid, TAU,
};
use tapkit_core::trackstore::{Dataset, DepthMap, FlowField, FlowVolume, Point, Query, Resolution, Track};
use tapkit_core::{par, trajstats};
use tapkit_testkit::annotator::controls_from_track;
use tapkit_testkit::paths::{enumerate_best_path, path_cost};
use tapkit_testkit::raycast::Caster;
use tapkit_testkit::{gen, metrics as naive, refcluster, tapnet as tapnet_oracle};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn report(name: &str, result: Check) {
    let line = match &result {
        Ok(detail) if detail.is_empty() => format!("PASS {name}\n"),
        Ok(detail) => format!("PASS {name} ({detail})\n"),
        Err(why) => format!("FAIL {name}: {why}\n"),
    };
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    if let Err(why) = result {
        panic!("{name}: {why}");
    }
}

fn params(w: usize, h: usize, frames: usize, seed: u64) -> SceneParams {
    SceneParams { width: w, height: h, num_frames: frames, seed }
}

// ---------------------------------------------------------------- metrics

fn metric_instance(rng: &mut impl Rng, id: usize) -> (Dataset, Dataset) {
    let frames = rng.random_range(1..=24);
    let (w, h) = [(256, 256), (512, 384), (100, 80), (1024, 576)][rng.random_range(0..4)];
    let res = Resolution::new(w, h);
    let (mut gt, mut pred) = (Vec::new(), Vec::new());
    for k in 0..rng.random_range(1..=16) {
        let p_vis = rng.random_range(0.0..1.0);
        let vis: Vec<bool> = (0..frames).map(|_| rng.random_bool(p_vis)).collect();
        let pts: Vec<Point> = (0..frames)
            .map(|_| Point::new(rng.random_range(0.0..w as f64), rng.random_range(0.0..h as f64)))
            .collect();
        let ppts: Vec<Point> = pts
            .iter()
            .map(|p| {
                // On-threshold errors are axis-aligned so every way of
                // computing the distance agrees.
                let (e, a) = match rng.random_range(0..4) {
                    0 => (0.0, 0.0),
                    1 => (
                        THRESHOLDS[rng.random_range(0..5)],
                        std::f64::consts::FRAC_PI_2 * rng.random_range(0..4) as f64,
                    ),
                    _ => (rng.random_range(0.0..24.0), rng.random_range(0.0..std::f64::consts::TAU)),
                };
                Point::new(p.x + e * a.cos() * w as f64 / 256.0, p.y + e * a.sin() * h as f64 / 256.0)
            })
            .collect();
        let pvis: Vec<bool> = vis.iter().map(|&v| v ^ rng.random_bool(0.2)).collect();
        let q = vis.iter().position(|&v| v).unwrap_or(0);
        let query = Query { t: q, x: pts[q].x, y: pts[q].y };
        gt.push(Track::new(format!("t{k}"), query, pts, vis, res).unwrap());
        pred.push(Track::new(format!("t{k}"), query, ppts, pvis, res).unwrap());
    }
    let ds = |tracks| Dataset { video_id: format!("v{id}"), width: w, height: h, fps: 24.0, tracks };
    (ds(gt), ds(pred))
}

fn metrics_oracle_equivalence() -> Check {
    let start = Instant::now();
    let mut rng = gen::rng(99);
    let cfg = EvalConfig::default();
    let (mut compared, mut identities) = (0, 0);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    for i in 0..200 {
        let videos: Vec<(Dataset, Dataset)> =
            (0..rng.random_range(1..=3)).map(|v| metric_instance(&mut rng, i * 10 + v)).collect();
        let pairs: Vec<(&Dataset, &Dataset)> = videos.iter().map(|(g, p)| (g, p)).collect();
        let selfpairs: Vec<(&Dataset, &Dataset)> = videos.iter().map(|(g, _)| (g, g)).collect();
        for mode in [QueryMode::Strided, QueryMode::First] {
            let want = naive::evaluate(&pairs, mode == QueryMode::First, cfg.stride, &THRESHOLDS);
            let got = evaluate_videos(&pairs, mode, &cfg);
            match (want, got) {
                (None, Err(_)) => continue,
                (Some(w), Ok(g)) => {
                    compared += 1;
                    ensure!(close(g.occlusion_accuracy, w.occlusion_accuracy), "instance {i}: OA");
                    ensure!(close(g.delta_x_avg, w.delta_avg), "instance {i}: delta avg");
                    ensure!(close(g.average_jaccard, w.average_jaccard), "instance {i}: AJ");
                    for (k, t) in g.thresholds.iter().enumerate() {
                        ensure!(close(t.position_accuracy, w.delta[k]), "instance {i}: delta {k}");
                        ensure!(close(t.jaccard, w.jaccard[k]), "instance {i}: jaccard {k}");
                    }
                }
                (w, g) => return Err(format!("instance {i}: oracle {} vs evaluate {}", w.is_some(), g.is_ok())),
            }
            if let Ok(r) = evaluate_videos(&selfpairs, mode, &cfg) {
                identities += 1;
                ensure!(
                    (r.occlusion_accuracy, r.delta_x_avg, r.average_jaccard) == (1.0, 1.0, 1.0),
                    "instance {i}: evaluate(gt, gt) is not 1"
                );
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(compared >= 200, "only {compared} comparable evaluations");
    ensure!(secs < 5.0, "took {secs:.2} s");
    Ok(format!("{compared} evaluations, {identities} self-evaluations, {secs:.2} s"))
}

#[test]
fn metrics_oracle() {
    report("metrics oracle equivalence", metrics_oracle_equivalence());
}

fn hand_vector() -> Check {
    let res = Resolution::new(256, 256);
    let errors = [0.0, 1.5, 3.0, 10.0];
    let gt_pts: Vec<Point> = (0..4).map(|t| Point::new(50.0 + t as f64, 80.0)).collect();
    let pred_pts: Vec<Point> = gt_pts.iter().zip(errors).map(|(p, e)| Point::new(p.x + e, p.y)).collect();
    let q = Query { t: 0, x: gt_pts[0].x, y: gt_pts[0].y };
    let ds = |pts: Vec<Point>| Dataset {
        video_id: "hand".into(),
        width: 256,
        height: 256,
        fps: 24.0,
        tracks: vec![Track::new("a", q, pts, vec![true; 4], res).unwrap()],
    };
    let r = evaluate(&ds(gt_pts), &ds(pred_pts), QueryMode::First, &EvalConfig::default()).map_err(|e| e.to_string())?;
    let j2 = r.jaccard(2.0).unwrap();
    ensure!(j2 == 1.0 / 3.0, "Jaccard(2) = {j2}");
    ensure!(r.delta_x_avg == 0.6, "delta avg = {} (expected 0.6); Jaccard(2) = 1/3 holds", r.delta_x_avg);
    Ok(String::new())
}

#[test]
fn hand_computed_metric_vector() {
    report("hand-computed metric vector", hand_vector());
}

// ---------------------------------------------------------------- assist

fn pt(c: (usize, usize)) -> Point {
    Point::new(c.0 as f64, c.1 as f64)
}

fn solver_exactness_check() -> Check {
    let mut rng = gen::rng(31);
    for i in 0..120 {
        let (w, h) = (rng.random_range(1..=8), rng.random_range(1..=8));
        let frames = rng.random_range(2..=5);
        let flow = gen::random_flow(&mut rng, w, h, frames, 2.0, false);
        let (a, b) = (gen::random_cell(&mut rng, w, h), gen::random_cell(&mut rng, w, h));
        let t = frames - 1;
        let (cost, path) = enumerate_best_path(&flow, 0, t, a, b);
        let got = solve_segment(&flow, pt(a), 0, pt(b), t).map_err(|e| e.to_string())?;
        ensure!(got.cost == cost, "exhaustive {i}: cost {} vs {cost}", got.cost);
        ensure!(got.cells == path, "exhaustive {i}: path differs");
    }
    let mut worst: f64 = 0.0;
    for i in 0..300 {
        let integer = i % 2 == 0;
        let (w, h) = (rng.random_range(2..=16), rng.random_range(2..=16));
        let frames = rng.random_range(2..=8);
        let flow = gen::random_flow(&mut rng, w, h, frames, 2.0, integer);
        let (a, b) = (gen::random_cell(&mut rng, w, h), gen::random_cell(&mut rng, w, h));
        let t = frames - 1;
        let exact = solve_segment(&flow, pt(a), 0, pt(b), t).map_err(|e| e.to_string())?;
        let fast = solve_segment_fast(&flow, pt(a), 0, pt(b), t).map_err(|e| e.to_string())?;
        ensure!(fast.cost == path_cost(&flow, 0, &fast.cells), "fast {i}: reported cost is not its path's cost");
        if integer {
            ensure!(fast.cost == exact.cost, "integer {i}: fast {} vs exact {}", fast.cost, exact.cost);
        } else {
            let gap = fast.cost - exact.cost;
            ensure!(gap >= -1e-9 && gap <= 2.0 * t as f64, "fractional {i}: gap {gap} over {t} transitions");
            worst = worst.max(gap);
        }
    }
    Ok(format!("120 exhaustive, 300 fast-vs-exact, worst fractional gap {worst:.2e}"))
}

#[test]
fn solver_exactness() {
    report("solver exactness", solver_exactness_check());
}

fn smooth_flow(w: usize, h: usize, frames: usize, seed: u64) -> FlowVolume {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fields = (0..frames - 1)
        .map(|i| {
            let a = 0.004 * (i as f32 * 0.3).sin();
            let (cx, cy) = (w as f32 / 2.0, h as f32 / 2.0);
            FlowField::from_fn(w, h, |x, y| {
                let (dx, dy) = (x as f32 - cx, y as f32 - cy);
                [
                    -a * dy + 0.7 + rng.random_range(-0.3..0.3),
                    a * dx - 0.4 + rng.random_range(-0.3..0.3),
                ]
            })
        })
        .collect();
    FlowVolume::new(fields).unwrap()
}

fn solver_performance_check() -> Check {
    let flow = smooth_flow(256, 256, 50, 8);
    let start = Instant::now();
    let path = par::with_threads(1, || solve_segment_fast(&flow, Point::new(40.0, 200.0), 0, Point::new(77.0, 181.0), 49))
        .map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    ensure!(path.positions.len() == 50, "path has {} frames", path.positions.len());
    ensure!(secs < 5.0, "256x256x50 took {secs:.2} s on one thread");
    Ok(format!("{secs:.2} s"))
}

#[test]
fn solver_performance() {
    report("solver performance", solver_performance_check());
}

fn annotator_recovery_check() -> Check {
    let (mut visible, mut within2, mut within8) = (0usize, 0usize, 0usize);
    for seed in 0..10 {
        let scene = build_preset(Preset::Random, params(128, 128, 30, 500 + seed));
        let video = simulate(&scene, "v", QueryBudget::default()).map_err(|e| e.to_string())?;
        for gt in &video.dataset.tracks {
            let set = ControlPointSet::new(controls_from_track(gt, 10));
            let solved = solve_track(&video.forward, &set, &AssistConfig::default())
                .map_err(|e| format!("seed {seed} {}: {e}", gt.tag))?;
            for t in 0..gt.points.len() {
                if !gt.visible[t] {
                    continue;
                }
                visible += 1;
                let e = solved.track.points[t].distance(gt.points[t]);
                within2 += (e <= 2.0) as usize;
                within8 += (e <= 8.0) as usize;
            }
        }
    }
    let (r2, r8) = (within2 as f64 / visible as f64, within8 as f64 / visible as f64);
    let detail = format!("{visible} visible frames, {:.2}% within 2 px, {:.2}% within 8 px", 100.0 * r2, 100.0 * r8);
    ensure!(visible > 1000, "too few visible frames: {detail}");
    ensure!(r2 >= 0.95 && r8 >= 0.99, "{detail}");
    Ok(detail)
}

#[test]
fn simulated_annotator_recovery() {
    report("simulated-annotator recovery", annotator_recovery_check());
}

// ---------------------------------------------------------------- simscene

fn occlusion_gt_check() -> Check {
    ensure!(occlusion_test(1.00, &DepthMap::filled(4, 4, 0.98), 1.5, 1.5), "1.00 behind 0.98 is not occluded");
    ensure!(!occlusion_test(0.985, &DepthMap::filled(4, 4, 0.98), 1.5, 1.5), "0.985 within 1% of 0.98 is occluded");
    let mut pairs = 0;
    for seed in 0..10 {
        let scene = build_preset(Preset::Random, params(128, 128, 12, 900 + seed));
        let video = simulate(&scene, "v", QueryBudget::default()).map_err(|e| e.to_string())?;
        let caster = Caster::new(&scene);
        for tr in &video.dataset.tracks {
            let want = caster
                .track_visibility(tr.query.t, tr.query.x, tr.query.y)
                .ok_or_else(|| format!("seed {seed} {}: query misses every surface", tr.tag))?;
            for (t, (&a, &b)) in tr.visible.iter().zip(&want).enumerate() {
                ensure!(a == b, "seed {seed} {} frame {t}: gt {a}, ray cast {b}", tr.tag);
            }
            pairs += want.len();
        }
    }
    ensure!(pairs > 1000, "only {pairs} pairs");
    Ok(format!("{pairs} pairs"))
}

#[test]
fn occlusion_ground_truth() {
    report("occlusion ground truth", occlusion_gt_check());
}

fn chaining_check() -> Check {
    let (w, h, n) = (64, 48, 40);
    let scene = build_preset(Preset::Translate, params(w, h, n, 3));
    let video = simulate(&scene, "v", QueryBudget::default()).map_err(|e| e.to_string())?;
    let q = Query { t: 0, x: 20.0, y: 24.0 };
    let chained = chain_track(&video.forward, Some(&video.backward), q, &ChainConfig::default()).map_err(|e| e.to_string())?;
    let speed = tapkit_core::simscene::TRANSLATE_SPEED;
    // First frame whose position x0 + v t reaches the right border.
    let exit = ((w as f64 - q.x) / speed).ceil() as usize;
    let mut worst: f64 = 0.0;
    for t in 0..n {
        let want = Point::new(q.x + speed * t as f64, q.y);
        let inside = t < exit;
        ensure!(chained.visible[t] == inside, "frame {t}: visible {} expected {inside}", chained.visible[t]);
        if inside {
            let e = chained.points[t].distance(want);
            worst = worst.max(e);
            ensure!(e < 1e-6, "frame {t}: off by {e}");
        }
    }
    Ok(format!("leaves at frame {exit}, worst error {worst:.1e}"))
}

#[test]
fn chaining_sanity() {
    report("chaining sanity", chaining_check());
}

// ---------------------------------------------------------------- trajstats

fn random_track_set(rng: &mut impl Rng) -> Vec<Track> {
    const FRAMES: usize = 24;
    let bases: Vec<Vec<(f64, f64)>> = (0..rng.random_range(1..4))
        .map(|_| (0..FRAMES).map(|_| (rng.random_range(0.0..40.0), rng.random_range(0.0..40.0))).collect())
        .collect();
    (0..rng.random_range(1..12))
        .map(|_| {
            let b = &bases[rng.random_range(0..bases.len())];
            let off = (rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
            let jitter = rng.random_range(0.0..3.0);
            let pts: Vec<Point> = b
                .iter()
                .map(|&(x, y)| {
                    Point::new(
                        100.0 + x + off.0 + rng.random_range(-jitter..=jitter),
                        100.0 + y + off.1 + rng.random_range(-jitter..=jitter),
                    )
                })
                .collect();
            let mut vis: Vec<bool> = (0..FRAMES).map(|_| rng.random_bool(0.85)).collect();
            vis[0] = true;
            let q = Query { t: 0, x: pts[0].x, y: pts[0].y };
            Track::new("", q, pts, vis, Resolution::new(256, 256)).unwrap()
        })
        .collect()
}

fn partition(labels: &[usize]) -> Vec<Vec<usize>> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort();
    out
}

fn clustering_check() -> Check {
    let mut rng = gen::rng(17);
    for i in 0..100 {
        let tracks = random_track_set(&mut rng);
        let threshold = rng.random_range(0.5..4.0);
        let ours = partition(&trajstats::cluster(&tracks, threshold).labels);
        let mut theirs = refcluster::greedy_cluster(&tracks, threshold);
        theirs.sort();
        ensure!(ours == theirs, "set {i}: {ours:?} vs reference {theirs:?}");
    }
    // Two groups: identical motion within a group, 50 px apart in motion
    // between groups.
    let res = Resolution::new(256, 256);
    let make = |dx: f64, dy: f64, swing: f64| {
        let pts: Vec<Point> =
            (0..20).map(|t| Point::new(60.0 + dx + if t % 2 == 0 { swing } else { -swing }, 60.0 + dy)).collect();
        Track::new("", Query { t: 0, x: pts[0].x, y: pts[0].y }, pts, vec![true; 20], res).unwrap()
    };
    let tracks = vec![make(0.0, 0.0, 0.0), make(10.0, 5.0, 0.0), make(20.0, 90.0, 50.0), make(3.0, 40.0, 0.0), make(30.0, 120.0, 50.0)];
    let d = trajstats::track_distance(&tracks[0], &tracks[2]).unwrap();
    ensure!((d - 50.0).abs() < 1e-9, "inter-group distance {d}");
    let c = trajstats::cluster(&tracks, trajstats::CLUSTER_THRESHOLD);
    ensure!(c.num_clusters == 2, "two groups gave {} clusters", c.num_clusters);
    ensure!(partition(&c.labels) == vec![vec![0, 1, 3], vec![2, 4]], "wrong grouping {:?}", c.labels);
    Ok(String::new())
}

#[test]
fn clustering_parity() {
    report("clustering parity", clustering_check());
}

// ---------------------------------------------------------------- tapnet

fn rel(a: &[f64], n: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(n).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(n)).max(1e-8)
}

fn tapnet_check() -> Check {
    let coords = pixel_coords(7, 11);
    for i in 0..7 {
        for j in 0..11 {
            let mut s = ndarray::Array2::zeros((7, 11));
            s[[i, j]] = 1.0;
            let got = soft_argmax(s.view(), coords.view(), TAU).map_err(|e| e.to_string())?;
            ensure!(got == [j as f64, i as f64], "one-hot at ({i},{j}) gave {got:?}");
        }
    }

    let mut rng = gen::rng(41);
    let (mut stable, mut passed) = (0, 0);
    while stable < 1000 {
        let (t, h, w) = (rng.random_range(1..4), rng.random_range(2..11), rng.random_range(2..11));
        let inp = random_instance(&mut rng, t, h, w);
        if gradient_check(&inp, 1e-4).map_err(|e| e.to_string())?.unstable {
            continue;
        }
        stable += 1;
        let g = loss_gradient(&inp).map_err(|e| e.to_string())?;
        let (num_logits, num_occ) = tapnet_oracle::finite_differences(&inp, 1e-4);
        let e = rel(g.logits.as_slice().unwrap(), &num_logits).max(rel(&g.occ_logits, &num_occ));
        passed += (e < 1e-4) as usize;
    }
    ensure!(passed * 100 >= stable * 99, "gradient checks {passed}/{stable}");

    for seed in 0..30 {
        let (t, h, w, d) = (rng.random_range(1..4), rng.random_range(1..10), rng.random_range(1..10), rng.random_range(1..8));
        let grid = FeatureGrid::random(t, h, w, d, seed).map_err(|e| e.to_string())?;
        let q = Query {
            t: rng.random_range(0..t),
            x: rng.random_range(-0.5..w as f64 - 0.5),
            y: rng.random_range(-0.5..h as f64 - 0.5),
        };
        let ours = cost_volume(&grid, &q).map_err(|e| e.to_string())?;
        let want = tapnet_oracle::cost_volume(&grid, q.t, q.x, q.y);
        ensure!(ours.len() == want.len(), "grid {seed}: size");
        for (a, b) in ours.iter().zip(&want) {
            ensure!((a - b).abs() < 1e-6, "grid {seed}: {a} vs {b}");
        }
    }
    Ok(format!("gradient checks {passed}/{stable}"))
}

#[test]
fn tapnet_numerics() {
    report("TAP-Net numerics", tapnet_check());
}

// ---------------------------------------------------------------- determinism

fn tapkit(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_tapkit"))
        .args(args)
        .env_remove("TAPKIT_DATA")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

struct Server(Child, String);

impl Server {
    fn start(data: &Path) -> Result<Server, String> {
        let mut child = Command::new(env!("CARGO_BIN_EXE_tapkit"))
            .args(["serve", "--data", data.to_str().unwrap(), "--port", "0"])
            .env_remove("TAPKIT_DATA")
            .env("RUST_LOG", "info")
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| e.to_string())?;
        let mut lines = BufReader::new(child.stderr.take().unwrap()).lines();
        let addr = loop {
            let Some(Ok(line)) = lines.next() else {
                let _ = child.kill();
                return Err("server exited before listening".into());
            };
            if let Some(i) = line.find("http://") {
                break line[i + 7..].trim().to_string();
            }
        };
        // Keep draining the log so the server never blocks on a full pipe.
        std::thread::spawn(move || lines.for_each(drop));
        Ok(Server(child, addr))
    }

    fn request(&self, method: &str, path: &str, body: &str) -> Result<Vec<u8>, String> {
        let mut s = TcpStream::connect(&self.1).map_err(|e| e.to_string())?;
        write!(
            s,
            "{method} {path} HTTP/1.1\r\nHost: {}\r\nConnection: close\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{body}",
            self.1,
            body.len()
        )
        .map_err(|e| e.to_string())?;
        let mut raw = Vec::new();
        s.read_to_end(&mut raw).map_err(|e| e.to_string())?;
        let split = raw.windows(4).position(|w| w == b"\r\n\r\n").ok_or("no header terminator")?;
        let head = String::from_utf8_lossy(&raw[..split]).to_string();
        if !head.starts_with("HTTP/1.1 200") {
            return Err(format!("{method} {path}: {}", head.lines().next().unwrap_or("")));
        }
        // Bodies are small and unchunked; drop the Date header by keeping
        // the body only.
        Ok(raw[split + 4..].to_vec())
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn determinism_check() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path();
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let run_twice = |name: &str, args: &dyn Fn(&Path) -> Vec<String>| -> Result<(), String> {
        let mut outs = Vec::new();
        for k in 0..2 {
            let out_dir = root.join(format!("{name}-{k}"));
            fs::create_dir_all(&out_dir).map_err(|e| e.to_string())?;
            let argv = args(&out_dir);
            let argv: Vec<&str> = argv.iter().map(String::as_str).collect();
            let stdout = tapkit(&argv)?;
            outs.push((stdout, tree(&out_dir)));
        }
        if outs[0] != outs[1] {
            return Err(format!("{name} differs between runs"));
        }
        if outs[0].0.is_empty() && outs[0].1.is_empty() {
            return Err(format!("{name} produced nothing"));
        }
        Ok(())
    };

    let video = root.join("video");
    run_twice("simgen", &|o| {
        ["simgen", "--seed", "12", "--frames", "16", "--width", "64", "--height", "48", "--video-id", "video", "--out"]
            .iter()
            .map(|a| a.to_string())
            .chain([s(&o.join("v"))])
            .collect()
    })?;
    fs::rename(root.join("simgen-0/v"), &video).map_err(|e| e.to_string())?;
    let gt = s(&video.join("tracks.json"));
    let flow = s(&video.join("flow"));
    let back = s(&video.join("flow_backward"));
    let own = |v: &[&str]| v.iter().map(|a| a.to_string()).collect::<Vec<_>>();

    let chained = root.join("chained.json");
    tapkit(&["chain", "--flow", &flow, "--flow-back", &back, "--queries", &gt, "--out", &s(&chained)])?;
    run_twice("chain", &|o| {
        let mut a = own(&["chain", "--flow", &flow, "--flow-back", &back, "--queries", &gt, "--cycle-threshold", "4"]);
        a.extend(["--out".into(), s(&o.join("c.json"))]);
        a
    })?;
    run_twice("eval", &|o| {
        let mut a = own(&["eval", "--gt", &gt, "--pred", &s(&chained)]);
        a.extend(["--out".into(), s(&o.join("r.json"))]);
        a
    })?;
    run_twice("eval-stdout", &|_| own(&["eval", "--gt", &gt, "--pred", &s(&chained), "--query-mode", "first"]))?;

    let dataset = tapkit_core::trackstore::read_tracks(video.join("tracks.json")).map_err(|e| e.to_string())?;
    let tracks: Vec<serde_json::Value> = dataset
        .tracks
        .iter()
        .map(|t| serde_json::json!({ "tag": t.tag, "segments": controls_from_track(t, 6) }))
        .collect();
    let controls = root.join("controls.json");
    let file = serde_json::json!({ "video_id": "video", "width": 64, "height": 48, "fps": dataset.fps, "tracks": tracks });
    fs::write(&controls, file.to_string()).map_err(|e| e.to_string())?;
    for solver in ["fast", "exact"] {
        run_twice(&format!("assist-{solver}"), &|o| {
            let mut a = own(&["assist", "--flow", &flow, "--controls", &s(&controls), "--solver", solver]);
            a.extend(["--out".into(), s(&o.join("a.json"))]);
            a
        })?;
    }
    run_twice("stats", &|o| {
        let mut a = own(&["stats", "--tracks", &gt]);
        a.extend(["--out".into(), s(&o.join("s.json"))]);
        a
    })?;
    run_twice("cluster", &|_| own(&["cluster", "--tracks", &gt, "--threshold", "3"]))?;
    run_twice("tapnet-check", &|o| {
        let mut a = own(&["tapnet-check", "--seed", "4", "--instances", "40"]);
        a.extend(["--out".into(), s(&o.join("t.json"))]);
        a
    })?;

    // Two independent server processes answer identically.
    let data = root.join("data");
    fs::create_dir(&data).map_err(|e| e.to_string())?;
    fs::rename(&video, data.join("video")).map_err(|e| e.to_string())?;
    let solve = serde_json::json!({ "controls": controls_from_track(&dataset.tracks[0], 6) }).to_string();
    let mut answers = Vec::new();
    for _ in 0..2 {
        let server = Server::start(&data)?;
        answers.push((
            server.request("GET", "/api/videos", "")?,
            server.request("GET", "/api/videos/video/frames/3", "")?,
            server.request("POST", "/api/videos/video/solve", &solve)?,
            server.request("GET", "/api/videos/video/tracks", "")?,
        ));
    }
    ensure!(answers[0] == answers[1], "serve answers differ between processes");
    Ok("simgen eval assist chain stats cluster tapnet-check serve".into())
}

#[test]
fn determinism() {
    report("determinism", determinism_check());
}
