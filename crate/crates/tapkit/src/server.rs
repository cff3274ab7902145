//! Annotation service: video listing, PNG frames, on-demand solves and
//! revisioned per-video annotation sets stored next to each video.

use anyhow::{bail, Context, Result};
use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use tapkit_core::assist::{
    default_working_resolution, solve_track, AssistConfig, ControlPointSet, InterpMode, Provenance, Segment, SolverKind,
};
use tapkit_core::simscene::{read_video_info, VideoInfo};
use tapkit_core::trackstore::{read_flow_dir, read_ppm, Dataset, FlowVolume, Point, Resolution};
use tokio::sync::OnceCell;
use tower_http::services::ServeDir;

const ANNOTATIONS: &str = "annotations.json";
/// Frames kept in the PNG cache before it is flushed.
const FRAME_CACHE_LIMIT: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationTrack {
    pub id: String,
    #[serde(default)]
    pub tag: String,
    #[serde(default)]
    pub segments: Vec<Segment>,
    /// Client fields stored and returned untouched.
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

/// On-disk annotation set. Also readable as an `assist` control file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct AnnotationFile {
    video_id: String,
    width: u32,
    height: u32,
    fps: f64,
    revision: u64,
    tracks: Vec<AnnotationTrack>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackSet {
    pub revision: u64,
    pub tracks: Vec<AnnotationTrack>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRequest {
    pub controls: Vec<Segment>,
    /// Forces every gap to this mode when set.
    #[serde(default)]
    pub mode: Option<InterpMode>,
    #[serde(default)]
    pub solver: Option<SolverKind>,
    /// Solver grid `[w, h]`; 256x256 for larger videos when absent.
    #[serde(default)]
    pub resolution: Option<[u32; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResponse {
    pub points: Vec<Point>,
    pub visible: Vec<bool>,
    pub provenance: Vec<Provenance>,
    pub cost: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VideoSummary {
    pub id: String,
    pub width: usize,
    pub height: usize,
    pub num_frames: usize,
    pub fps: f64,
}

#[derive(Default)]
struct Session {
    revision: u64,
    tracks: Vec<AnnotationTrack>,
    /// Solved tracks by id, with the controls they were solved from.
    solved: HashMap<String, (Vec<Segment>, SolveResponse)>,
}

struct Video {
    dir: PathBuf,
    info: VideoInfo,
    flow: OnceCell<Arc<FlowVolume>>,
    session: tokio::sync::Mutex<Session>,
}

struct Inner {
    videos: BTreeMap<String, Video>,
    ui: Option<PathBuf>,
    frames: Mutex<HashMap<(String, usize), Bytes>>,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

fn load_session(dir: &Path, info: &VideoInfo) -> Result<Session> {
    let path = dir.join(ANNOTATIONS);
    if !path.exists() {
        return Ok(Session::default());
    }
    let text = fs::read_to_string(&path)?;
    let file: AnnotationFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if file.video_id != info.video_id {
        bail!("{} belongs to video '{}'", path.display(), file.video_id);
    }
    Ok(Session {
        revision: file.revision,
        tracks: file.tracks,
        solved: HashMap::new(),
    })
}

impl AppState {
    /// Scans `data_dir` for simgen video directories. Fails when there are
    /// none or one is incomplete.
    pub fn load(data_dir: &Path, ui: Option<&Path>) -> Result<Self> {
        let entries = fs::read_dir(data_dir).with_context(|| format!("reading data directory {}", data_dir.display()))?;
        let mut dirs: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join("video.json").is_file())
            .collect();
        dirs.sort();
        let mut videos = BTreeMap::new();
        for dir in dirs {
            let info = read_video_info(&dir)?;
            for sub in ["frames", "flow"] {
                if !dir.join(sub).is_dir() {
                    bail!("video '{}' has no {sub}/ directory", info.video_id);
                }
            }
            let session = load_session(&dir, &info)?;
            let id = info.video_id.clone();
            let video = Video {
                dir,
                info,
                flow: OnceCell::new(),
                session: tokio::sync::Mutex::new(session),
            };
            if videos.insert(id.clone(), video).is_some() {
                bail!("duplicate video id '{id}'");
            }
        }
        if videos.is_empty() {
            bail!("no videos (directories with video.json) in {}", data_dir.display());
        }
        if let Some(ui) = ui {
            if !ui.is_dir() {
                bail!("UI directory {} does not exist", ui.display());
            }
        }
        Ok(AppState(Arc::new(Inner {
            videos,
            ui: ui.map(Path::to_path_buf),
            frames: Mutex::new(HashMap::new()),
        })))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, msg: impl Into<String>) -> Self {
        ApiError {
            status,
            body: serde_json::json!({ "error": msg.into() }),
        }
    }

    fn bad_request(msg: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, msg)
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        log::error!("{e}");
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

impl Inner {
    fn video(&self, id: &str) -> ApiResult<&Video> {
        self.videos
            .get(id)
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no video '{id}'")))
    }
}

impl Video {
    async fn flow(&self) -> ApiResult<Arc<FlowVolume>> {
        let dir = self.dir.join("flow");
        self.flow
            .get_or_try_init(|| async move {
                tokio::task::spawn_blocking(move || read_flow_dir(dir))
                    .await
                    .map_err(ApiError::internal)?
                    .map(Arc::new)
                    .map_err(ApiError::internal)
            })
            .await
            .cloned()
    }

    fn write_session(&self, session: &Session) -> Result<()> {
        let file = AnnotationFile {
            video_id: self.info.video_id.clone(),
            width: self.info.width as u32,
            height: self.info.height as u32,
            fps: self.info.fps,
            revision: session.revision,
            tracks: session.tracks.clone(),
        };
        let tmp = self.dir.join(format!("{ANNOTATIONS}.tmp"));
        fs::write(&tmp, serde_json::to_string_pretty(&file)? + "\n")?;
        fs::rename(&tmp, self.dir.join(ANNOTATIONS))?;
        Ok(())
    }
}

fn solve(flow: &FlowVolume, req: &SolveRequest) -> ApiResult<SolveResponse> {
    let working = match req.resolution {
        Some([w, h]) if w > 0 && h > 0 => Some(Resolution::new(w, h)),
        Some(_) => return Err(ApiError::bad_request("resolution must be positive")),
        None => default_working_resolution(flow.resolution()),
    };
    let config = AssistConfig {
        solver: req.solver.unwrap_or_default(),
        working_resolution: working,
        mode_override: req.mode,
        ..AssistConfig::default()
    };
    let solved = solve_track(flow, &ControlPointSet::new(req.controls.clone()), &config)
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    Ok(SolveResponse {
        points: solved.track.points,
        visible: solved.track.visible,
        provenance: solved.provenance,
        cost: solved.cost,
    })
}

async fn list_videos(State(s): State<AppState>) -> Json<Vec<VideoSummary>> {
    Json(
        s.0.videos
            .values()
            .map(|v| VideoSummary {
                id: v.info.video_id.clone(),
                width: v.info.width,
                height: v.info.height,
                num_frames: v.info.num_frames,
                fps: v.info.fps,
            })
            .collect(),
    )
}

async fn frame(State(s): State<AppState>, UrlPath((id, t)): UrlPath<(String, usize)>) -> ApiResult<Response> {
    let video = s.0.video(&id)?;
    if t >= video.info.num_frames {
        return Err(ApiError::new(
            StatusCode::NOT_FOUND,
            format!("frame {t} beyond {} frames", video.info.num_frames),
        ));
    }
    let key = (id.clone(), t);
    let cached = s.0.frames.lock().unwrap().get(&key).cloned();
    let png = match cached {
        Some(png) => png,
        None => {
            let path = video.dir.join("frames").join(format!("{t:05}.ppm"));
            let png = tokio::task::spawn_blocking(move || -> Result<Bytes> {
                let img = read_ppm(&path)?;
                let mut buf = Cursor::new(Vec::new());
                img.write_to(&mut buf, image::ImageFormat::Png)?;
                Ok(Bytes::from(buf.into_inner()))
            })
            .await
            .map_err(ApiError::internal)?
            .map_err(ApiError::internal)?;
            let mut cache = s.0.frames.lock().unwrap();
            if cache.len() >= FRAME_CACHE_LIMIT {
                cache.clear();
            }
            cache.insert(key, png.clone());
            png
        }
    };
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

async fn solve_handler(
    State(s): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<SolveRequest>,
) -> ApiResult<Json<SolveResponse>> {
    let flow = s.0.video(&id)?.flow().await?;
    let out = tokio::task::spawn_blocking(move || solve(&flow, &req))
        .await
        .map_err(ApiError::internal)??;
    Ok(Json(out))
}

async fn get_tracks(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<TrackSet>> {
    let session = s.0.video(&id)?.session.lock().await;
    Ok(Json(TrackSet {
        revision: session.revision,
        tracks: session.tracks.clone(),
    }))
}

fn validate_tracks(tracks: &[AnnotationTrack], num_frames: usize) -> ApiResult<()> {
    let mut ids = HashSet::new();
    for t in tracks {
        if !ids.insert(t.id.as_str()) {
            return Err(ApiError::bad_request(format!("duplicate track id '{}'", t.id)));
        }
        if !t.segments.is_empty() {
            ControlPointSet::new(t.segments.clone())
                .validate(num_frames)
                .map_err(|e| ApiError::bad_request(format!("track '{}': {e}", t.id)))?;
        }
    }
    Ok(())
}

async fn put_tracks(
    State(s): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Json(body): Json<TrackSet>,
) -> ApiResult<Json<Value>> {
    let video = s.0.video(&id)?;
    validate_tracks(&body.tracks, video.info.num_frames)?;
    let mut session = video.session.lock().await;
    if body.revision != session.revision {
        return Err(ApiError {
            status: StatusCode::CONFLICT,
            body: serde_json::json!({
                "error": format!("stale revision {} (current {})", body.revision, session.revision),
                "revision": session.revision,
            }),
        });
    }
    let mut next = Session {
        revision: session.revision + 1,
        tracks: body.tracks,
        solved: std::mem::take(&mut session.solved),
    };
    let current: HashMap<&str, &Vec<Segment>> = next.tracks.iter().map(|t| (t.id.as_str(), &t.segments)).collect();
    next.solved.retain(|k, (segs, _)| current.get(k.as_str()).is_some_and(|s| *s == segs));
    if let Err(e) = video.write_session(&next) {
        // Keep the old state, including its cache, on a failed write.
        session.solved = next.solved;
        return Err(ApiError::internal(e));
    }
    *session = next;
    Ok(Json(serde_json::json!({ "revision": session.revision })))
}

/// The current annotation set solved into the track file schema.
async fn solved_tracks(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let video = s.0.video(&id)?;
    let flow = video.flow().await?;
    let (revision, tracks, mut solved) = {
        let session = video.session.lock().await;
        (session.revision, session.tracks.clone(), session.solved.clone())
    };
    let work: Vec<AnnotationTrack> = tracks
        .iter()
        .filter(|t| !t.segments.is_empty() && solved.get(&t.id).is_none_or(|(segs, _)| *segs != t.segments))
        .cloned()
        .collect();
    let fresh = tokio::task::spawn_blocking(move || -> ApiResult<Vec<(AnnotationTrack, SolveResponse)>> {
        work.into_iter()
            .map(|t| {
                let req = SolveRequest {
                    controls: t.segments.clone(),
                    mode: None,
                    solver: None,
                    resolution: None,
                };
                solve(&flow, &req).map(|r| (t, r))
            })
            .collect()
    })
    .await
    .map_err(ApiError::internal)??;
    for (t, r) in fresh {
        solved.insert(t.id.clone(), (t.segments, r));
    }
    {
        let mut session = video.session.lock().await;
        if session.revision == revision {
            session.solved = solved.clone();
        }
    }
    let res = Resolution::new(video.info.width as u32, video.info.height as u32);
    let mut out = Vec::new();
    for t in tracks.iter().filter(|t| !t.segments.is_empty()) {
        let (_, r) = &solved[&t.id];
        let q = &t.segments[0].points[0];
        out.push(
            tapkit_core::trackstore::Track::new(
                t.tag.clone(),
                tapkit_core::trackstore::Query { t: q.t, x: q.x, y: q.y },
                r.points.clone(),
                r.visible.clone(),
                res,
            )
            .map_err(ApiError::internal)?,
        );
    }
    let ds = Dataset {
        video_id: video.info.video_id.clone(),
        width: res.width,
        height: res.height,
        fps: video.info.fps,
        tracks: out,
    };
    let text = tapkit_core::trackstore::dataset_to_string(&ds).map_err(ApiError::internal)?;
    let mut value: Value = serde_json::from_str(&text).map_err(ApiError::internal)?;
    value["revision"] = revision.into();
    Ok(Json(value))
}

async fn no_ui() -> impl IntoResponse {
    (
        [(header::CONTENT_TYPE, "text/plain; charset=utf-8")],
        "tapkit annotation API: see /api/videos. Start with --ui <dir> to serve the browser client.\n",
    )
}

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/api/videos", get(list_videos))
        .route("/api/videos/{id}/frames/{t}", get(frame))
        .route("/api/videos/{id}/solve", post(solve_handler))
        .route("/api/videos/{id}/tracks", get(get_tracks).put(put_tracks))
        .route("/api/videos/{id}/tracks/solved", get(solved_tracks));
    let app = match &state.0.ui {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(no_ui)),
    };
    app.with_state(state)
}
