//! Flow-guided track assist.
//!
//! Between two annotator control points `p_s` (frame `s`) and `p_t`
//! (frame `t`) the assist picks the integer-grid path minimizing
//!
//! ```text
//! sum_{i=s}^{t-1} |(rho_{i+1} - rho_i) - F_i(rho_i)|^2,  rho_s = p_s, rho_t = p_t
//! ```
//!
//! where `F_i` is the forward flow from frame `i`. Every pixel of frame `i`
//! connects to every pixel of frame `i + 1`, so the search is a layered
//! shortest-path problem solved by dynamic programming. Gaps shorter than
//! [`MIN_FLOW_GAP`] frames, or gaps the annotator marks linear, are
//! interpolated linearly instead.

mod envelope;
mod resample;
mod solver;

pub use envelope::LowerEnvelope;
pub use resample::resample_flow;
pub use solver::{grid_path_cost, Cell, ParentStorage};

use crate::trackstore::{FlowVolume, Point, Query, Resolution, StoreError, Track};
use serde::{Deserialize, Serialize};
use solver::{shortest_grid_path, Kernel};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Control points closer than this many frames are joined linearly.
pub const MIN_FLOW_GAP: usize = 5;
/// Side of the default solver grid for videos larger than it.
pub const DEFAULT_WORKING_SIZE: u32 = 256;

/// The solver grid used when none is requested: 256x256 for videos larger
/// than that in either dimension, the native grid otherwise.
pub fn default_working_resolution(native: Resolution) -> Option<Resolution> {
    (native.width > DEFAULT_WORKING_SIZE || native.height > DEFAULT_WORKING_SIZE)
        .then(|| Resolution::new(DEFAULT_WORKING_SIZE, DEFAULT_WORKING_SIZE))
}

#[derive(Debug, Error)]
pub enum AssistError {
    #[error("frame range {s}..={t} invalid for a video of {num_frames} frames")]
    FrameOutOfRange { s: usize, t: usize, num_frames: usize },
    #[error("invalid control points: {0}")]
    InvalidControls(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Role of a control point inside its segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlKind {
    Enter,
    Move,
    Exit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlPoint {
    pub t: usize,
    pub x: f64,
    pub y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<ControlKind>,
}

impl ControlPoint {
    pub fn new(t: usize, x: f64, y: f64) -> Self {
        ControlPoint {
            t,
            x,
            y,
            kind: None,
        }
    }

    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterpMode {
    #[default]
    Flow,
    Linear,
}

impl FromStr for InterpMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "flow" => Ok(InterpMode::Flow),
            "linear" => Ok(InterpMode::Linear),
            other => Err(format!("unknown interpolation mode '{other}' (expected flow|linear)")),
        }
    }
}

impl fmt::Display for InterpMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InterpMode::Flow => "flow",
            InterpMode::Linear => "linear",
        })
    }
}

/// One visible stretch of a track: ENTER, any number of MOVE points, EXIT.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub points: Vec<ControlPoint>,
    /// Interpolation mode per gap (`points.len() - 1` entries). Missing
    /// entries default to flow.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub modes: Vec<InterpMode>,
}

impl Segment {
    pub fn new(points: Vec<ControlPoint>) -> Self {
        Segment {
            points,
            modes: Vec::new(),
        }
    }

    pub fn gap_mode(&self, gap: usize) -> InterpMode {
        self.modes.get(gap).copied().unwrap_or_default()
    }

    pub fn first_frame(&self) -> usize {
        self.points[0].t
    }

    pub fn last_frame(&self) -> usize {
        self.points[self.points.len() - 1].t
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlPointSet {
    pub segments: Vec<Segment>,
}

impl ControlPointSet {
    pub fn new(segments: Vec<Segment>) -> Self {
        ControlPointSet { segments }
    }

    /// Checks segment structure against a video of `num_frames` frames.
    pub fn validate(&self, num_frames: usize) -> Result<(), AssistError> {
        let bad = |m: String| Err(AssistError::InvalidControls(m));
        if self.segments.is_empty() {
            return bad("no segments".into());
        }
        let mut prev_end: Option<usize> = None;
        for (si, seg) in self.segments.iter().enumerate() {
            if seg.points.is_empty() {
                return bad(format!("segment {si} has no points"));
            }
            if seg.modes.len() > seg.points.len() - 1 {
                return bad(format!("segment {si} has more modes than gaps"));
            }
            for (pi, p) in seg.points.iter().enumerate() {
                if !p.point().is_finite() {
                    return bad(format!("segment {si} point {pi} is not finite"));
                }
                if p.t >= num_frames {
                    return bad(format!(
                        "segment {si} point {pi} at frame {} beyond {num_frames} frames",
                        p.t
                    ));
                }
                let expected = if pi == 0 {
                    ControlKind::Enter
                } else if pi == seg.points.len() - 1 {
                    ControlKind::Exit
                } else {
                    ControlKind::Move
                };
                match p.kind {
                    Some(k) if k != expected && !(seg.points.len() == 1) => {
                        return bad(format!(
                            "segment {si} point {pi} is {k:?}, expected {expected:?}"
                        ))
                    }
                    _ => {}
                }
            }
            if seg.points.windows(2).any(|w| w[1].t <= w[0].t) {
                return bad(format!("segment {si} frames not strictly increasing"));
            }
            if let Some(end) = prev_end {
                if seg.first_frame() <= end {
                    return bad(format!("segment {si} overlaps the previous segment"));
                }
            }
            prev_end = Some(seg.last_frame());
        }
        Ok(())
    }

    /// Fills in ENTER/MOVE/EXIT from each point's position in its segment.
    pub fn with_kinds(mut self) -> Self {
        for seg in &mut self.segments {
            let n = seg.points.len();
            for (i, p) in seg.points.iter_mut().enumerate() {
                p.kind = Some(if i == 0 {
                    ControlKind::Enter
                } else if i == n - 1 {
                    ControlKind::Exit
                } else {
                    ControlKind::Move
                });
            }
        }
        self
    }
}

/// Where a solved position came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Control,
    FlowSolved,
    Linear,
    Occluded,
}

/// Positions for frames `start..start + positions.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolvedPath {
    pub start: usize,
    pub positions: Vec<Point>,
    pub provenance: Vec<Provenance>,
    /// Squared flow discrepancy of the grid path, px^2. Zero for linear spans.
    pub cost: f64,
    /// The integer cells the solver chose, including rounded endpoints.
    pub cells: Vec<Cell>,
}

impl SolvedPath {
    pub fn end(&self) -> usize {
        self.start + self.positions.len() - 1
    }
}

/// Which dynamic-programming kernel to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    /// All-pairs minimum per frame; exact, `O(N^2)` per frame.
    Exact,
    /// Lower-envelope transforms restricted to states under a cost bound;
    /// same optimum as `Exact`.
    #[default]
    Fast,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssistConfig {
    pub solver: SolverKind,
    pub parents: ParentStorage,
    /// Grid the solver searches. `None` uses the flow's own resolution.
    pub working_resolution: Option<Resolution>,
    /// Forces every gap to this mode when set.
    pub mode_override: Option<InterpMode>,
}

impl Default for AssistConfig {
    fn default() -> Self {
        AssistConfig {
            solver: SolverKind::Fast,
            parents: ParentStorage::Full,
            working_resolution: None,
            mode_override: None,
        }
    }
}

/// Follows the flow from `p_s` at frame `s` through frame `t_end`, with
/// bilinear lookups clamped to the image.
pub fn propagate_forward(flow: &FlowVolume, p_s: Point, s: usize, t_end: usize) -> Vec<Point> {
    let mut out = Vec::with_capacity(t_end.saturating_sub(s) + 1);
    let mut p = p_s;
    out.push(p);
    for i in s..t_end.min(flow.num_frames() - 1) {
        p = p + flow.fields[i].bilinear(p);
        out.push(p);
    }
    out
}

pub fn interpolate_linear(p_s: Point, s: usize, p_t: Point, t: usize) -> SolvedPath {
    assert!(s < t, "linear interpolation needs s < t");
    let span = (t - s) as f64;
    let positions: Vec<Point> = (s..=t)
        .map(|i| {
            let a = (i - s) as f64 / span;
            Point::new(p_s.x + a * (p_t.x - p_s.x), p_s.y + a * (p_t.y - p_s.y))
        })
        .collect();
    let mut provenance = vec![Provenance::Linear; positions.len()];
    provenance[0] = Provenance::Control;
    provenance[t - s] = Provenance::Control;
    SolvedPath {
        start: s,
        positions,
        provenance,
        cost: 0.0,
        cells: Vec::new(),
    }
}

fn nearest_cell(flow: &FlowVolume, p: Point) -> Cell {
    let x = p.x.round().clamp(0.0, (flow.width - 1) as f64) as usize;
    let y = p.y.round().clamp(0.0, (flow.height - 1) as f64) as usize;
    (x, y)
}

fn solve_with(
    flow: &FlowVolume,
    p_s: Point,
    s: usize,
    p_t: Point,
    t: usize,
    kernel: Kernel,
    parents: ParentStorage,
) -> Result<SolvedPath, AssistError> {
    if s >= t || t >= flow.num_frames() {
        return Err(AssistError::FrameOutOfRange {
            s,
            t,
            num_frames: flow.num_frames(),
        });
    }
    let start = nearest_cell(flow, p_s);
    let end = nearest_cell(flow, p_t);
    let cells = shortest_grid_path(flow, s, t, start, end, kernel, parents);
    let cost = grid_path_cost(flow, s, &cells);
    let mut positions: Vec<Point> = cells
        .iter()
        .map(|&(x, y)| Point::new(x as f64, y as f64))
        .collect();
    positions[0] = p_s;
    positions[t - s] = p_t;
    let mut provenance = vec![Provenance::FlowSolved; positions.len()];
    provenance[0] = Provenance::Control;
    provenance[t - s] = Provenance::Control;
    Ok(SolvedPath {
        start: s,
        positions,
        provenance,
        cost,
        cells,
    })
}

/// Exact minimum-discrepancy grid path between two control points.
///
/// Endpoint cells are the rounded control points; the returned positions
/// then carry the exact fractional control points at both ends. Ties go to
/// the lexicographically smallest `(y, x)` predecessor.
pub fn solve_segment(
    flow: &FlowVolume,
    p_s: Point,
    s: usize,
    p_t: Point,
    t: usize,
) -> Result<SolvedPath, AssistError> {
    solve_with(flow, p_s, s, p_t, t, Kernel::Exact, ParentStorage::Full)
}

/// Lower-envelope solver with the same optimum as [`solve_segment`].
///
/// A separable surrogate (displaced centers placed on their two bracketing
/// rows) yields a feasible path whose cost bounds the search; an exact
/// per-row envelope pass then runs only over states that can still beat it.
/// Among equal-cost paths the choice may differ from [`solve_segment`].
pub fn solve_segment_fast(
    flow: &FlowVolume,
    p_s: Point,
    s: usize,
    p_t: Point,
    t: usize,
) -> Result<SolvedPath, AssistError> {
    solve_with(flow, p_s, s, p_t, t, Kernel::Bounded, ParentStorage::Full)
}

/// [`solve_segment_fast`] or [`solve_segment`] with explicit parent storage.
pub fn solve_segment_with(
    flow: &FlowVolume,
    p_s: Point,
    s: usize,
    p_t: Point,
    t: usize,
    solver: SolverKind,
    parents: ParentStorage,
) -> Result<SolvedPath, AssistError> {
    let kernel = match solver {
        SolverKind::Exact => Kernel::Exact,
        SolverKind::Fast => Kernel::Bounded,
    };
    solve_with(flow, p_s, s, p_t, t, kernel, parents)
}

/// A solved track plus per-frame provenance and the summed flow cost.
#[derive(Debug, Clone, PartialEq)]
pub struct SolvedTrack {
    pub track: Track,
    pub provenance: Vec<Provenance>,
    pub cost: f64,
}

/// Solves every gap of every segment. Frames outside all segments are
/// occluded and hold the nearest earlier solved position (or the first one,
/// before the first segment).
pub fn solve_track(
    flow: &FlowVolume,
    controls: &ControlPointSet,
    config: &AssistConfig,
) -> Result<SolvedTrack, AssistError> {
    let num_frames = flow.num_frames();
    controls.validate(num_frames)?;

    let native = flow.resolution();
    let working = config.working_resolution.unwrap_or(native);
    let resampled;
    let (grid, sx, sy) = if working == native {
        (flow, 1.0, 1.0)
    } else {
        resampled = resample_flow(flow, working.width as usize, working.height as usize);
        (
            &resampled,
            working.width as f64 / native.width as f64,
            working.height as f64 / native.height as f64,
        )
    };
    let to_grid = |p: Point| Point::new(p.x * sx, p.y * sy);
    let from_grid = |p: Point| Point::new(p.x / sx, p.y / sy);

    let mut points = vec![None; num_frames];
    let mut provenance = vec![Provenance::Occluded; num_frames];
    let mut cost = 0.0;
    for seg in &controls.segments {
        let first = &seg.points[0];
        points[first.t] = Some(first.point());
        provenance[first.t] = Provenance::Control;
        for (g, pair) in seg.points.windows(2).enumerate() {
            let (a, b) = (&pair[0], &pair[1]);
            let mode = config.mode_override.unwrap_or(seg.gap_mode(g));
            let path = if mode == InterpMode::Flow && b.t - a.t >= MIN_FLOW_GAP {
                let p = solve_segment_with(
                    grid,
                    to_grid(a.point()),
                    a.t,
                    to_grid(b.point()),
                    b.t,
                    config.solver,
                    config.parents,
                )?;
                cost += p.cost;
                p
            } else {
                interpolate_linear(a.point(), a.t, b.point(), b.t)
            };
            for (k, (&pos, &prov)) in path.positions.iter().zip(&path.provenance).enumerate() {
                let frame = a.t + k;
                let pos = match prov {
                    Provenance::FlowSolved => from_grid(pos),
                    _ => pos,
                };
                points[frame] = Some(pos);
                provenance[frame] = prov;
            }
            // Control frames carry exact control coordinates.
            points[a.t] = Some(a.point());
            points[b.t] = Some(b.point());
        }
    }

    let visible: Vec<bool> = provenance
        .iter()
        .map(|p| *p != Provenance::Occluded)
        .collect();
    let first_known = points.iter().flatten().next().copied().unwrap_or_default();
    let mut last = first_known;
    let filled: Vec<Point> = points
        .into_iter()
        .map(|p| {
            if let Some(p) = p {
                last = p;
            }
            last
        })
        .collect();
    let q = &controls.segments[0].points[0];
    let track = Track::new(
        String::new(),
        Query {
            t: q.t,
            x: q.x,
            y: q.y,
        },
        filled,
        visible,
        native,
    )?;
    Ok(SolvedTrack {
        track,
        provenance,
        cost,
    })
}
