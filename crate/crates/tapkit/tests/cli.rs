use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tapkit_core::trackstore::{read_tracks, Point, Query, Resolution, Track};
use tapkit_testkit::annotator::controls_from_track;

fn tapkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tapkit"))
        .args(args)
        .env_remove("TAPKIT_DATA")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = tapkit(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn simgen(dir: &Path, name: &str, scene: &str, seed: u64) -> PathBuf {
    let out = dir.join(name);
    let seed = seed.to_string();
    ok(&["simgen", "--seed", &seed, "--frames", "10", "--width", "40", "--height", "32", "--scene", scene, "--out", p(&out)]);
    out
}

#[test]
fn unknown_subcommand_exits_2() {
    let out = tapkit(&["bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(tapkit(&[]).status.code(), Some(2));
}

#[test]
fn failures_exit_nonzero_with_a_diagnostic() {
    let out = tapkit(&["eval", "--gt", "/nonexistent/g.json", "--pred", "/nonexistent/p.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn self_evaluation_reports_ones() {
    let dir = tempfile::tempdir().unwrap();
    let v = simgen(dir.path(), "v", "random", 3);
    let gt = v.join("tracks.json");
    let report = dir.path().join("r.json");
    ok(&["eval", "--gt", p(&gt), "--pred", p(&gt), "--query-mode", "strided", "--out", p(&report)]);
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["average_jaccard"], 1.0);
    assert_eq!(r["delta_x_avg"], 1.0);
    assert_eq!(r["occlusion_accuracy"], 1.0);
    for t in r["thresholds"].as_array().unwrap() {
        assert_eq!(t["position_accuracy"], 1.0);
        assert_eq!(t["jaccard"], 1.0);
    }
    // Without --out the report goes to stdout.
    let out = ok(&["eval", "--gt", p(&gt), "--pred", p(&gt), "--query-mode", "first"]);
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["query_mode"], "first");
}

#[test]
fn simgen_writes_the_documented_layout() {
    let dir = tempfile::tempdir().unwrap();
    let v = simgen(dir.path(), "v", "translate", 1);
    for f in ["video.json", "scene.json", "tracks.json", "frames/00000.ppm", "frames/00009.ppm", "depth/00009.tapd"] {
        assert!(v.join(f).is_file(), "{f}");
    }
    assert_eq!(fs::read_dir(v.join("flow")).unwrap().count(), 9);
    assert_eq!(fs::read_dir(v.join("flow_backward")).unwrap().count(), 9);
    assert_eq!(read_tracks(v.join("tracks.json")).unwrap().video_id, "v");

    // A scene file reproduces the preset it was written from.
    let again = dir.path().join("again");
    ok(&["simgen", "--scene", p(&v.join("scene.json")), "--video-id", "v", "--out", p(&again)]);
    assert_eq!(fs::read(v.join("tracks.json")).unwrap(), fs::read(again.join("tracks.json")).unwrap());
    assert_eq!(fs::read(v.join("flow/00004.flo")).unwrap(), fs::read(again.join("flow/00004.flo")).unwrap());

    assert_eq!(tapkit(&["simgen", "--scene", "nebula", "--out", p(&dir.path().join("x"))]).status.code(), Some(1));
}

#[test]
fn assist_recovers_ground_truth_on_a_translation() {
    let dir = tempfile::tempdir().unwrap();
    let v = simgen(dir.path(), "v", "translate", 2);
    let gt = read_tracks(v.join("tracks.json")).unwrap();
    let tracks: Vec<serde_json::Value> = gt
        .tracks
        .iter()
        .map(|t| serde_json::json!({ "tag": t.tag, "segments": controls_from_track(t, 9) }))
        .collect();
    let controls = serde_json::json!({ "video_id": "v", "width": 40, "height": 32, "fps": 24.0, "tracks": tracks });
    let cpath = dir.path().join("controls.json");
    fs::write(&cpath, controls.to_string()).unwrap();
    let out = dir.path().join("solved.json");
    ok(&["assist", "--flow", p(&v.join("flow")), "--controls", p(&cpath), "--out", p(&out)]);
    let solved = read_tracks(&out).unwrap();
    assert_eq!(solved.tracks.len(), gt.tracks.len());
    for (s, g) in solved.tracks.iter().zip(&gt.tracks) {
        assert_eq!(s.tag, g.tag);
        assert_eq!(s.visible, g.visible);
        for t in 0..g.points.len() {
            if g.visible[t] {
                assert!(s.points[t].distance(g.points[t]) <= 2.0, "{} frame {t}: {:?} vs {:?}", g.tag, s.points[t], g.points[t]);
            }
        }
    }
    // Linear override and an explicit grid are accepted.
    ok(&["assist", "--flow", p(&v.join("flow")), "--controls", p(&cpath), "--mode", "linear", "--resolution", "20x16", "--out", p(&out)]);
    let bad = tapkit(&["assist", "--flow", p(&v.join("flow")), "--controls", p(&cpath), "--resolution", "20", "--out", p(&out)]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn chain_follows_rigid_translation() {
    let dir = tempfile::tempdir().unwrap();
    let v = simgen(dir.path(), "v", "translate", 4);
    let out = dir.path().join("chain.json");
    ok(&["chain", "--flow", p(&v.join("flow")), "--flow-back", p(&v.join("flow_backward")), "--queries", p(&v.join("tracks.json")), "--out", p(&out)]);
    let chained = read_tracks(&out).unwrap();
    let gt = read_tracks(v.join("tracks.json")).unwrap();
    for (c, g) in chained.tracks.iter().zip(&gt.tracks) {
        for t in 0..g.points.len() {
            if g.visible[t] && c.visible[t] {
                assert!(c.points[t].distance(g.points[t]) < 1e-3);
            }
        }
    }
    let cyc = tapkit(&["chain", "--flow", p(&v.join("flow")), "--queries", p(&v.join("tracks.json")), "--cycle-threshold", "48", "--out", p(&out)]);
    assert_eq!(cyc.status.code(), Some(1));
}

#[test]
fn stats_and_cluster_reports() {
    let dir = tempfile::tempdir().unwrap();
    // Two rigid groups of three tracks each, 50 px apart in motion.
    let mk = |tag: &str, wiggle: f64| {
        let pts: Vec<Point> = (0..20)
            .map(|i| Point::new(100.0 + i as f64 + if i % 2 == 0 { wiggle } else { -wiggle }, 100.0))
            .collect();
        Track::new(tag, Query { t: 0, x: pts[0].x, y: pts[0].y }, pts, vec![true; 20], Resolution::new(256, 256)).unwrap()
    };
    let ds = tapkit_core::trackstore::Dataset {
        video_id: "g".into(),
        width: 256,
        height: 256,
        fps: 25.0,
        tracks: vec![mk("a0", 0.0), mk("a1", 0.0), mk("b0", 50.0), mk("a2", 0.0), mk("b1", 50.0)],
    };
    let tracks = dir.path().join("t.json");
    tapkit_core::trackstore::write_tracks(&ds, &tracks).unwrap();
    let out = ok(&["cluster", "--tracks", p(&tracks), "--threshold", "2"]);
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["num_clusters"], 2);
    let labels: Vec<u64> = r["assignments"].as_array().unwrap().iter().map(|a| a["cluster"].as_u64().unwrap()).collect();
    assert_eq!(labels, vec![0, 0, 1, 0, 1]);

    let out = ok(&["stats", "--tracks", p(&tracks), "--bin-width", "50"]);
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["num_clusters"], 2);
    assert_eq!(r["tracks"][0]["diameter"], 19.0);
    assert_eq!(r["segment_histogram"], serde_json::json!([{ "lo": 0.0, "count": 0 }, { "lo": 1.0, "count": 5 }]));
    assert_eq!(r["diameter_histogram"][0]["count"], 3);
}

#[test]
fn tapnet_check_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("check.json");
    let run = ok(&["tapnet-check", "--instances", "50", "--seed", "9", "--out", p(&out)]);
    let text = String::from_utf8_lossy(&run.stdout);
    assert!(text.contains("50/50"), "{text}");
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(r["one_hot_exact"], true);
}

#[test]
fn serve_prefers_tapkit_data_and_fails_fast() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good");
    simgen(&good, "v", "static", 1);
    // The environment wins over --data: the empty directory is rejected.
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_tapkit"))
        .args(["serve", "--data", p(&good), "--port", "0"])
        .env("TAPKIT_DATA", &empty)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no videos"));

    // Port already taken.
    let held = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = held.local_addr().unwrap().port().to_string();
    let out = tapkit(&["serve", "--data", p(&good), "--port", &port]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("binding"));
}
