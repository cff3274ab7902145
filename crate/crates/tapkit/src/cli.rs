//! Subcommand definitions and their drivers.

use crate::controls::{parse_resolution, solve_controls, ControlsFile};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::path::{Path, PathBuf};
use tapkit_core::assist::{default_working_resolution, AssistConfig, InterpMode, ParentStorage, SolverKind};
use tapkit_core::chaintrack::{chain_track, chain_with_cycle, ChainConfig};
use tapkit_core::metrics::{evaluate, EvalConfig, MetricsReport, QueryMode, ThresholdRule};
use tapkit_core::simscene::{build_preset, simulate, write_video, Preset, QueryBudget, RigidScene, SceneParams};
use tapkit_core::tapnet::run_checks;
use tapkit_core::trackstore::{read_flow_dir, read_json, read_tracks, write_json, write_tracks, Dataset};
use tapkit_core::trajstats::{cluster, histogram, video_stats, Merge, VideoStats};

#[derive(Debug, Parser)]
#[command(name = "tapkit", version, about = "Point-tracking toolkit: evaluation, track assist, synthetic data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic rigid scene with ground-truth flow, depth and tracks.
    Simgen(SimgenArgs),
    /// Score predicted tracks against ground truth.
    Eval(EvalArgs),
    /// Solve tracks from control points with flow-guided interpolation.
    Assist(AssistArgs),
    /// Track queries by chaining flow.
    Chain(ChainArgs),
    /// Per-track diameter and segment statistics with histograms.
    Stats(StatsArgs),
    /// Group tracks by single-linkage clustering.
    Cluster(ClusterArgs),
    /// Run the soft-argmax and loss-gradient checks.
    TapnetCheck(TapnetCheckArgs),
    /// Serve frames, solves and annotations over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct SimgenArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 24)]
    pub frames: usize,
    #[arg(long, default_value_t = 256)]
    pub width: usize,
    #[arg(long, default_value_t = 256)]
    pub height: usize,
    /// Preset name (static, pan, translate, random) or a scene file. A scene
    /// file fixes its own size, length and seed.
    #[arg(long, default_value = "random")]
    pub scene: String,
    /// Maximum number of sampled query points.
    #[arg(long, default_value_t = 256)]
    pub budget: usize,
    /// Defaults to the output directory's name.
    #[arg(long)]
    pub video_id: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long, default_value = "strided")]
    pub query_mode: QueryMode,
    #[arg(long, default_value_t = 5)]
    pub stride: usize,
    /// Count errors equal to a threshold as within it.
    #[arg(long)]
    pub inclusive: bool,
    /// Report file; the report goes to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AssistArgs {
    /// Directory of forward flow files.
    #[arg(long)]
    pub flow: PathBuf,
    #[arg(long)]
    pub controls: PathBuf,
    /// Force every gap to this mode; per-gap modes in the file apply otherwise.
    #[arg(long)]
    pub mode: Option<InterpMode>,
    /// Solver grid, WxH. Defaults to 256x256 for larger videos, native otherwise.
    #[arg(long)]
    pub resolution: Option<String>,
    #[arg(long, default_value = "fast", value_parser = parse_solver)]
    pub solver: SolverKind,
    /// Keep cost checkpoints every N frames instead of all parent pointers.
    #[arg(long)]
    pub checkpoint: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_solver(s: &str) -> Result<SolverKind, String> {
    match s {
        "fast" => Ok(SolverKind::Fast),
        "exact" => Ok(SolverKind::Exact),
        other => Err(format!("unknown solver '{other}' (expected fast|exact)")),
    }
}

#[derive(Debug, Args)]
pub struct ChainArgs {
    #[arg(long)]
    pub flow: PathBuf,
    #[arg(long)]
    pub flow_back: Option<PathBuf>,
    /// Track file whose queries (and tags) are chained.
    #[arg(long)]
    pub queries: PathBuf,
    /// Occlude frames failing a forward-backward check at this many
    /// 256x256 pixels. Needs --flow-back.
    #[arg(long)]
    pub cycle_threshold: Option<f64>,
    /// Keep points occluded after they first leave the image.
    #[arg(long)]
    pub no_reentry: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub tracks: PathBuf,
    /// Clustering threshold in 256x256 pixels.
    #[arg(long, default_value_t = 2.0)]
    pub threshold: f64,
    /// Diameter histogram bin width in 256x256 pixels.
    #[arg(long, default_value_t = 16.0)]
    pub bin_width: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub tracks: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    pub threshold: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TapnetCheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub instances: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Directory of simgen videos; TAPKIT_DATA takes precedence.
    #[arg(long, default_value = "data")]
    pub data: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Static UI bundle served at /.
    #[arg(long)]
    pub ui: Option<PathBuf>,
}

/// Pretty JSON to `out`, or to stdout.
fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => write_json(value, path).with_context(|| format!("writing {}", path.display())),
        None => {
            println!("{}", serde_json::to_string_pretty(value)?);
            Ok(())
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simgen(a) => simgen(a),
        Command::Eval(a) => eval(a),
        Command::Assist(a) => assist(a),
        Command::Chain(a) => chain(a),
        Command::Stats(a) => stats(a),
        Command::Cluster(a) => cluster_cmd(a),
        Command::TapnetCheck(a) => tapnet_check(a),
        Command::Serve(a) => serve(a),
    }
}

fn simgen(a: SimgenArgs) -> Result<()> {
    let (scene, preset): (RigidScene, Option<String>) = match a.scene.parse::<Preset>() {
        Ok(p) => {
            if a.width == 0 || a.height == 0 || a.frames == 0 {
                bail!("width, height and frames must be positive");
            }
            let params = SceneParams { width: a.width, height: a.height, num_frames: a.frames, seed: a.seed };
            (build_preset(p, params), Some(p.to_string()))
        }
        Err(_) if Path::new(&a.scene).is_file() => (read_json(&a.scene)?, None),
        Err(e) => bail!("{e}; not a scene file either"),
    };
    let video_id = match a.video_id {
        Some(id) => id,
        None => a
            .out
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "video".into()),
    };
    let budget = QueryBudget { budget: a.budget, ..QueryBudget::default() };
    let video = simulate(&scene, &video_id, budget)?;
    write_video(&video, &a.out, preset.as_deref())?;
    eprintln!(
        "{}: {}x{}, {} frames, {} tracks -> {}",
        video_id,
        scene.width,
        scene.height,
        scene.num_frames,
        video.dataset.tracks.len(),
        a.out.display()
    );
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let gt = read_tracks(&a.gt)?;
    let pred = read_tracks(&a.pred)?;
    let config = EvalConfig {
        rule: if a.inclusive { ThresholdRule::Inclusive } else { ThresholdRule::Strict },
        stride: a.stride,
        ..EvalConfig::default()
    };
    let report: MetricsReport = evaluate(&gt, &pred, a.query_mode, &config)?;
    emit(&report, a.out.as_deref())?;
    if a.out.is_some() {
        eprintln!(
            "AJ {:.4}  <delta_avg {:.4}  OA {:.4}  ({} queries)",
            report.average_jaccard, report.delta_x_avg, report.occlusion_accuracy, report.num_queries
        );
    }
    Ok(())
}

fn assist(a: AssistArgs) -> Result<()> {
    let flow = read_flow_dir(&a.flow)?;
    let controls: ControlsFile = read_json(&a.controls)?;
    let working = match &a.resolution {
        Some(r) => Some(parse_resolution(r)?),
        None => default_working_resolution(flow.resolution()),
    };
    let config = AssistConfig {
        solver: a.solver,
        parents: match a.checkpoint {
            Some(interval) if interval > 0 => ParentStorage::Checkpointed { interval },
            Some(_) => bail!("--checkpoint must be positive"),
            None => ParentStorage::Full,
        },
        working_resolution: working,
        mode_override: a.mode,
    };
    let solved = solve_controls(&flow, &controls, &config)?;
    write_tracks(&solved, &a.out)?;
    Ok(())
}

fn chain(a: ChainArgs) -> Result<()> {
    let forward = read_flow_dir(&a.flow)?;
    let backward = a.flow_back.as_ref().map(read_flow_dir).transpose()?;
    let queries = read_tracks(&a.queries)?;
    let mut config = ChainConfig { reentry_visible: !a.no_reentry, ..ChainConfig::default() };
    if let Some(t) = a.cycle_threshold {
        config.cycle_threshold = t;
    }
    let res = forward.resolution();
    let mut tracks = Vec::with_capacity(queries.tracks.len());
    for q in &queries.tracks {
        // Queries written at another resolution are mapped onto the flow grid.
        let query = tapkit_core::trackstore::Query {
            t: q.query.t,
            x: q.query.x * res.width as f64 / q.source_resolution.width as f64,
            y: q.query.y * res.height as f64 / q.source_resolution.height as f64,
        };
        let mut track = match (&backward, a.cycle_threshold) {
            (Some(back), Some(_)) => chain_with_cycle(&forward, back, query, &config),
            (None, Some(_)) => bail!("--cycle-threshold needs --flow-back"),
            (back, None) => chain_track(&forward, back.as_ref(), query, &config),
        }
        .with_context(|| format!("track '{}'", q.tag))?;
        track.tag = q.tag.clone();
        tracks.push(track);
    }
    let out = Dataset {
        video_id: queries.video_id.clone(),
        width: res.width,
        height: res.height,
        fps: queries.fps,
        tracks,
    };
    write_tracks(&out, &a.out)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct Bin {
    lo: f64,
    count: usize,
}

#[derive(Debug, Serialize)]
struct StatsReport {
    #[serde(flatten)]
    video: VideoStats,
    cluster_threshold: f64,
    diameter_bin_width: f64,
    diameter_histogram: Vec<Bin>,
    segment_histogram: Vec<Bin>,
}

fn bins(h: Vec<(f64, usize)>) -> Vec<Bin> {
    h.into_iter().map(|(lo, count)| Bin { lo, count }).collect()
}

fn stats(a: StatsArgs) -> Result<()> {
    if !(a.bin_width > 0.0) {
        bail!("--bin-width must be positive");
    }
    let ds = read_tracks(&a.tracks)?;
    let video = video_stats(&ds, a.threshold)?;
    let diam: Vec<f64> = video.tracks.iter().map(|t| t.diameter).collect();
    let segs: Vec<f64> = video.tracks.iter().map(|t| t.num_segments as f64).collect();
    let report = StatsReport {
        diameter_histogram: bins(histogram(&diam, a.bin_width)),
        segment_histogram: bins(histogram(&segs, 1.0)),
        cluster_threshold: a.threshold,
        diameter_bin_width: a.bin_width,
        video,
    };
    emit(&report, a.out.as_deref())
}

#[derive(Debug, Serialize)]
struct Assignment {
    tag: String,
    cluster: usize,
}

#[derive(Debug, Serialize)]
struct ClusterReport {
    video_id: String,
    threshold: f64,
    num_clusters: usize,
    assignments: Vec<Assignment>,
    merges: Vec<Merge>,
}

fn cluster_cmd(a: ClusterArgs) -> Result<()> {
    let ds = read_tracks(&a.tracks)?;
    let tracks = tapkit_core::trajstats::eval_space_tracks(&ds)?;
    let c = cluster(&tracks, a.threshold);
    let report = ClusterReport {
        video_id: ds.video_id.clone(),
        threshold: a.threshold,
        num_clusters: c.num_clusters,
        assignments: ds
            .tracks
            .iter()
            .zip(&c.labels)
            .map(|(t, &cluster)| Assignment { tag: t.tag.clone(), cluster })
            .collect(),
        merges: c.merges,
    };
    emit(&report, a.out.as_deref())
}

fn tapnet_check(a: TapnetCheckArgs) -> Result<()> {
    let report = run_checks(a.seed, a.instances, 1e-4, 1e-4)?;
    println!("soft argmax one-hot identity: {}", if report.one_hot_exact { "ok" } else { "FAILED" });
    println!("softmax normalization:        {}", if report.softmax_normalized { "ok" } else { "FAILED" });
    println!("loss non-negative:            {}", if report.loss_nonnegative { "ok" } else { "FAILED" });
    println!(
        "gradient check:               {}/{} stable instances within {:e} (worst {:.3e}, {} drawn)",
        report.passed, report.stable, report.tolerance, report.max_error, report.instances
    );
    if let Some(out) = &a.out {
        write_json(&report, out)?;
    }
    if !report.ok() {
        bail!("tapnet checks failed");
    }
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let data = std::env::var_os("TAPKIT_DATA").map(PathBuf::from).unwrap_or(a.data);
    let state = crate::server::AppState::load(&data, a.ui.as_deref())?;
    let addr = format!("{}:{}", a.host, a.port);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        log::info!("serving {} on http://{}", data.display(), listener.local_addr()?);
        axum::serve(listener, crate::server::router(state)).await?;
        Ok(())
    })
}
