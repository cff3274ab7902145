//! Baseline trackers built on flow: chaining per-frame flow from the query
//! point, and marking occlusion by cycle consistency.

use crate::trackstore::{FlowVolume, Point, Query, Resolution, StoreError, Track, EVAL_SIZE};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("query ({x}, {y}) at frame {t} lies outside the {width}x{height} image")]
    QueryOutsideImage {
        t: usize,
        x: f64,
        y: f64,
        width: usize,
        height: usize,
    },
    #[error("query frame {t} beyond {num_frames} frames")]
    FrameOutOfRange { t: usize, num_frames: usize },
    #[error("backward flow is {0}, forward flow is {1}")]
    BackwardFlowMismatch(String, String),
    #[error("cycle threshold must be positive, got {0}")]
    InvalidThreshold(f64),
    #[error("no backward correspondence for frame {0}")]
    MissingBackwardCorrespondence(usize),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    /// Mark frames whose chained position leaves the image as occluded.
    pub out_of_frame_occlusion: bool,
    /// A point that left the frame becomes visible again if it re-enters.
    pub reentry_visible: bool,
    /// Cycle-consistency threshold in 256x256 evaluation pixels.
    pub cycle_threshold: f64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            out_of_frame_occlusion: true,
            reentry_visible: true,
            cycle_threshold: 48.0,
        }
    }
}

fn shape(f: &FlowVolume) -> String {
    format!("{}x{}x{}", f.width, f.height, f.num_frames())
}

/// Chains flow from the query point in both directions.
///
/// Forward: `p[t + 1] = p[t] + F_t(p[t])` with bilinear lookup, clamped to
/// the nearest border pixel when `p[t]` is outside the image. Backward uses
/// `backward.fields[t]`, which maps frame `t + 1` to frame `t`. Without
/// backward flow every frame before the query is occluded.
pub fn chain_track(
    forward: &FlowVolume,
    backward: Option<&FlowVolume>,
    query: Query,
    config: &ChainConfig,
) -> Result<Track, ChainError> {
    let n = forward.num_frames();
    let res = forward.resolution();
    if query.t >= n {
        return Err(ChainError::FrameOutOfRange {
            t: query.t,
            num_frames: n,
        });
    }
    if !res.contains(query.point()) {
        return Err(ChainError::QueryOutsideImage {
            t: query.t,
            x: query.x,
            y: query.y,
            width: forward.width,
            height: forward.height,
        });
    }
    if let Some(b) = backward {
        if b.width != forward.width || b.height != forward.height || b.num_frames() != n {
            return Err(ChainError::BackwardFlowMismatch(shape(b), shape(forward)));
        }
    }

    let mut points = vec![query.point(); n];
    let mut visible = vec![false; n];
    visible[query.t] = true;

    let visibility = |p: Point, left: &mut bool| -> bool {
        if !config.out_of_frame_occlusion {
            return true;
        }
        let inside = res.contains(p);
        if !inside {
            *left = true;
        }
        inside && (config.reentry_visible || !*left)
    };

    let mut p = query.point();
    let mut left = false;
    for t in query.t..n - 1 {
        p = p + forward.fields[t].bilinear(p);
        points[t + 1] = p;
        visible[t + 1] = visibility(p, &mut left);
    }
    if let Some(b) = backward {
        let mut p = query.point();
        let mut left = false;
        for t in (0..query.t).rev() {
            p = p + b.fields[t].bilinear(p);
            points[t] = p;
            visible[t] = visibility(p, &mut left);
        }
    }
    Ok(Track::new(String::new(), query, points, visible, res)?)
}

/// Maps a position on some frame back to the query frame.
pub trait ReturnMap {
    fn map_back(&self, frame: usize, p: Point, query_frame: usize) -> Option<Point>;
}

impl<F> ReturnMap for F
where
    F: Fn(usize, Point, usize) -> Option<Point>,
{
    fn map_back(&self, frame: usize, p: Point, query_frame: usize) -> Option<Point> {
        self(frame, p, query_frame)
    }
}

/// Returns positions to the query frame by chaining flow: backward flow
/// for later frames, forward flow for earlier ones.
pub struct FlowReturnMap<'a> {
    pub forward: &'a FlowVolume,
    pub backward: Option<&'a FlowVolume>,
}

impl ReturnMap for FlowReturnMap<'_> {
    fn map_back(&self, frame: usize, p: Point, query_frame: usize) -> Option<Point> {
        let mut p = p;
        if frame > query_frame {
            let b = self.backward?;
            for t in (query_frame..frame).rev() {
                p = p + b.fields[t].bilinear(p);
            }
        } else {
            for t in frame..query_frame {
                p = p + self.forward.fields[t].bilinear(p);
            }
        }
        Some(p)
    }
}

/// Visibility by cycle consistency: a frame is occluded when its position,
/// mapped back to the query frame, lands more than `threshold` evaluation
/// pixels (256x256 space) from the query.
pub fn cycle_consistency_occlusion(
    forward_positions: &[Point],
    matcher: &dyn ReturnMap,
    query: Query,
    resolution: Resolution,
    threshold: f64,
) -> Result<Vec<bool>, ChainError> {
    if resolution.width == 0 || resolution.height == 0 {
        return Err(StoreError::ZeroResolution.into());
    }
    if !(threshold > 0.0) {
        return Err(ChainError::InvalidThreshold(threshold));
    }
    let sx = EVAL_SIZE as f64 / resolution.width as f64;
    let sy = EVAL_SIZE as f64 / resolution.height as f64;
    forward_positions
        .iter()
        .enumerate()
        .map(|(t, &p)| {
            let back = matcher
                .map_back(t, p, query.t)
                .ok_or(ChainError::MissingBackwardCorrespondence(t))?;
            let err = ((back.x - query.x) * sx).hypot((back.y - query.y) * sy);
            Ok(err <= threshold)
        })
        .collect()
}

/// Chains the query and then applies cycle-consistency occlusion on top of
/// the out-of-frame flags.
pub fn chain_with_cycle(
    forward: &FlowVolume,
    backward: &FlowVolume,
    query: Query,
    config: &ChainConfig,
) -> Result<Track, ChainError> {
    let mut track = chain_track(forward, Some(backward), query, config)?;
    let matcher = FlowReturnMap {
        forward,
        backward: Some(backward),
    };
    let cyc = cycle_consistency_occlusion(
        &track.points,
        &matcher,
        query,
        forward.resolution(),
        config.cycle_threshold,
    )?;
    for (v, c) in track.visible.iter_mut().zip(cyc) {
        *v = *v && c;
    }
    Ok(track)
}
