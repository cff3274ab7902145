//! Tracking metrics: occlusion accuracy, position accuracy at pixel
//! thresholds, and Jaccard scores that combine the two.
//!
//! Every metric runs in a 256x256 evaluation space. Tracks are rescaled from
//! their source resolution before any distance is measured.
//!
//! Aggregation order: metrics are computed per query, averaged within each
//! video, then averaged uniformly across videos.

mod queries;

pub use queries::{extract_queries, QueryMode, QuerySet, QuerySpec};

use crate::par;
use crate::trackstore::{rescale_to_eval, Dataset, Point, StoreError, Track, EVAL_SIZE};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

/// Position thresholds in evaluation-space pixels.
pub const THRESHOLDS: [f64; 5] = [1.0, 2.0, 4.0, 8.0, 16.0];

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("empty evaluation set")]
    EmptyEvaluationSet,
    #[error("no prediction for track '{tag}' queried at frame {t}")]
    MissingPrediction { tag: String, t: usize },
    #[error("ground-truth tag '{0}' is not unique")]
    DuplicateTag(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// How an error is compared against a threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdRule {
    /// `error < threshold`
    #[default]
    Strict,
    /// `error <= threshold`
    Inclusive,
}

impl ThresholdRule {
    #[inline]
    pub fn within(self, error: f64, threshold: f64) -> bool {
        match self {
            ThresholdRule::Strict => error < threshold,
            ThresholdRule::Inclusive => error <= threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub thresholds: Vec<f64>,
    pub rule: ThresholdRule,
    /// Frame stride for strided query extraction.
    pub stride: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            thresholds: THRESHOLDS.to_vec(),
            rule: ThresholdRule::Strict,
            stride: 5,
        }
    }
}

/// Borrowed per-frame positions and visibility.
#[derive(Debug, Clone, Copy)]
pub struct TrackView<'a> {
    pub points: &'a [Point],
    pub visible: &'a [bool],
}

impl<'a> From<&'a Track> for TrackView<'a> {
    fn from(t: &'a Track) -> Self {
        TrackView {
            points: &t.points,
            visible: &t.visible,
        }
    }
}

impl<'a> TrackView<'a> {
    pub fn new(points: &'a [Point], visible: &'a [bool]) -> Self {
        TrackView { points, visible }
    }

    /// Restricts the view to frames `from..`.
    pub fn from_frame(self, from: usize) -> Self {
        TrackView {
            points: &self.points[from.min(self.points.len())..],
            visible: &self.visible[from.min(self.visible.len())..],
        }
    }

    fn len(&self) -> usize {
        self.visible.len()
    }
}

fn check_lengths(pred: &TrackView, gt: &TrackView) -> Result<(), MetricsError> {
    if pred.points.len() != pred.visible.len()
        || gt.points.len() != gt.visible.len()
        || pred.len() != gt.len()
    {
        return Err(MetricsError::LengthMismatch(format!(
            "pred {}/{} frames, gt {}/{} frames",
            pred.points.len(),
            pred.visible.len(),
            gt.points.len(),
            gt.visible.len()
        )));
    }
    Ok(())
}

/// Fraction of frames where predicted visibility equals ground truth.
pub fn occlusion_accuracy(pred_visible: &[bool], gt_visible: &[bool]) -> Result<f64, MetricsError> {
    if pred_visible.len() != gt_visible.len() {
        return Err(MetricsError::LengthMismatch(format!(
            "{} predicted flags vs {} ground-truth flags",
            pred_visible.len(),
            gt_visible.len()
        )));
    }
    if gt_visible.is_empty() {
        return Err(MetricsError::EmptyEvaluationSet);
    }
    let agree = pred_visible
        .iter()
        .zip(gt_visible)
        .filter(|(p, g)| p == g)
        .count();
    Ok(agree as f64 / gt_visible.len() as f64)
}

/// Fraction of ground-truth-visible frames whose prediction lies within
/// `threshold` pixels. `None` when the ground truth is never visible.
pub fn position_accuracy(
    pred: TrackView,
    gt: TrackView,
    threshold: f64,
) -> Result<Option<f64>, MetricsError> {
    position_accuracy_with(pred, gt, threshold, ThresholdRule::Strict)
}

pub fn position_accuracy_with(
    pred: TrackView,
    gt: TrackView,
    threshold: f64,
    rule: ThresholdRule,
) -> Result<Option<f64>, MetricsError> {
    check_lengths(&pred, &gt)?;
    let mut visible = 0usize;
    let mut close = 0usize;
    for t in 0..gt.len() {
        if gt.visible[t] {
            visible += 1;
            if rule.within(pred.points[t].distance(gt.points[t]), threshold) {
                close += 1;
            }
        }
    }
    Ok((visible > 0).then(|| close as f64 / visible as f64))
}

/// True/false positive and false negative counts at one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Tallies {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Tallies {
    /// `TP / (TP + FP + FN)`, defined as 1 when all three are zero.
    pub fn jaccard(&self) -> f64 {
        let denom = self.tp + self.fp + self.fn_;
        if denom == 0 {
            1.0
        } else {
            self.tp as f64 / denom as f64
        }
    }
}

impl std::ops::AddAssign for Tallies {
    fn add_assign(&mut self, o: Tallies) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

/// Jaccard score at one threshold. A ground-truth-visible frame predicted
/// visible but too far away counts as both a false positive and a false
/// negative.
pub fn jaccard_at(
    pred: TrackView,
    gt: TrackView,
    threshold: f64,
) -> Result<(f64, Tallies), MetricsError> {
    jaccard_at_with(pred, gt, threshold, ThresholdRule::Strict)
}

pub fn jaccard_at_with(
    pred: TrackView,
    gt: TrackView,
    threshold: f64,
    rule: ThresholdRule,
) -> Result<(f64, Tallies), MetricsError> {
    check_lengths(&pred, &gt)?;
    let mut tally = Tallies::default();
    for t in 0..gt.len() {
        let close = rule.within(pred.points[t].distance(gt.points[t]), threshold);
        match (gt.visible[t], pred.visible[t]) {
            (true, true) if close => tally.tp += 1,
            (true, true) => {
                tally.fp += 1;
                tally.fn_ += 1;
            }
            (true, false) => tally.fn_ += 1,
            (false, true) => tally.fp += 1,
            (false, false) => {}
        }
    }
    Ok((tally.jaccard(), tally))
}

/// Metrics for a single query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics {
    pub tag: String,
    pub query_frame: usize,
    pub occlusion_accuracy: f64,
    /// Per threshold; `None` when no ground-truth-visible frame is evaluated.
    pub position_accuracy: Vec<Option<f64>>,
    pub jaccard: Vec<f64>,
    pub tallies: Vec<Tallies>,
}

/// Evaluates one query over the frames selected by `mode`. Both tracks must
/// already be in evaluation space.
pub fn evaluate_query(
    pred: &Track,
    gt: &Track,
    query_frame: usize,
    mode: QueryMode,
    config: &EvalConfig,
) -> Result<QueryMetrics, MetricsError> {
    let from = match mode {
        QueryMode::Strided => 0,
        QueryMode::First => query_frame,
    };
    let p = TrackView::from(pred).from_frame(from);
    let g = TrackView::from(gt).from_frame(from);
    check_lengths(&TrackView::from(pred), &TrackView::from(gt))?;
    let oa = occlusion_accuracy(p.visible, g.visible)?;
    let mut position = Vec::with_capacity(config.thresholds.len());
    let mut jaccard = Vec::with_capacity(config.thresholds.len());
    let mut tallies = Vec::with_capacity(config.thresholds.len());
    for &thr in &config.thresholds {
        position.push(position_accuracy_with(p, g, thr, config.rule)?);
        let (j, tally) = jaccard_at_with(p, g, thr, config.rule)?;
        jaccard.push(j);
        tallies.push(tally);
    }
    Ok(QueryMetrics {
        tag: gt.tag.clone(),
        query_frame,
        occlusion_accuracy: oa,
        position_accuracy: position,
        jaccard,
        tallies,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMetrics {
    pub threshold: f64,
    /// Fraction of visible points within the threshold (`<delta^x`).
    pub position_accuracy: f64,
    pub jaccard: f64,
    /// Tallies summed over every evaluated query.
    pub counts: Tallies,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub query_mode: QueryMode,
    pub threshold_rule: ThresholdRule,
    pub num_videos: usize,
    pub num_queries: usize,
    pub occlusion_accuracy: f64,
    pub delta_x_avg: f64,
    pub average_jaccard: f64,
    pub thresholds: Vec<ThresholdMetrics>,
    /// Tracks that produced no query (never visible).
    pub tracks_without_queries: Vec<String>,
    pub per_query: Vec<QueryMetrics>,
}

impl MetricsReport {
    pub fn delta_x(&self, threshold: f64) -> Option<f64> {
        self.thresholds
            .iter()
            .find(|t| t.threshold == threshold)
            .map(|t| t.position_accuracy)
    }

    pub fn jaccard(&self, threshold: f64) -> Option<f64> {
        self.thresholds
            .iter()
            .find(|t| t.threshold == threshold)
            .map(|t| t.jaccard)
    }
}

/// Per-video averages, before cross-video averaging.
#[derive(Debug, Clone)]
struct VideoSummary {
    oa: f64,
    position: Vec<Option<f64>>,
    jaccard: Vec<f64>,
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

fn summarize(queries: &[QueryMetrics], nthr: usize) -> Option<VideoSummary> {
    if queries.is_empty() {
        return None;
    }
    Some(VideoSummary {
        oa: mean(queries.iter().map(|q| q.occlusion_accuracy))?,
        position: (0..nthr)
            .map(|k| mean(queries.iter().filter_map(|q| q.position_accuracy[k])))
            .collect(),
        jaccard: (0..nthr)
            .map(|k| mean(queries.iter().map(|q| q.jaccard[k])).unwrap_or(1.0))
            .collect(),
    })
}

/// Finds the prediction for `(tag, query_frame)`: an exact query-frame match
/// first, otherwise the only prediction carrying that tag.
fn find_prediction<'a>(
    by_tag: &HashMap<&str, Vec<&'a Track>>,
    tag: &str,
    t: usize,
) -> Option<&'a Track> {
    let cands = by_tag.get(tag)?;
    cands
        .iter()
        .find(|p| p.query.t == t)
        .or_else(|| (cands.len() == 1).then(|| &cands[0]))
        .copied()
}

/// Per-query metrics for one video.
pub fn evaluate_video_queries(
    gt: &Dataset,
    pred: &Dataset,
    mode: QueryMode,
    config: &EvalConfig,
) -> Result<(Vec<QueryMetrics>, Vec<String>), MetricsError> {
    gt.validate()?;
    pred.validate()?;
    let mut seen = HashMap::new();
    for tr in &gt.tracks {
        if seen.insert(tr.tag.as_str(), ()).is_some() {
            return Err(MetricsError::DuplicateTag(tr.tag.clone()));
        }
    }
    let mut by_tag: HashMap<&str, Vec<&Track>> = HashMap::new();
    for p in &pred.tracks {
        by_tag.entry(p.tag.as_str()).or_default().push(p);
    }
    let qs = extract_queries(gt, mode, config.stride);

    let mut jobs = Vec::with_capacity(qs.queries.len());
    for q in &qs.queries {
        let g = &gt.tracks[q.track];
        let p = find_prediction(&by_tag, &g.tag, q.t).ok_or_else(|| {
            MetricsError::MissingPrediction {
                tag: g.tag.clone(),
                t: q.t,
            }
        })?;
        jobs.push((g, p, q.t));
    }
    let results = par::map_slice(&jobs, |&(g, p, t)| -> Result<QueryMetrics, MetricsError> {
        let g = rescale_to_eval(g, EVAL_SIZE, EVAL_SIZE)?;
        let p = rescale_to_eval(p, EVAL_SIZE, EVAL_SIZE)?;
        evaluate_query(&p, &g, t, mode, config)
    });
    let per_query = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let missing = qs
        .tracks_without_queries
        .iter()
        .map(|&i| gt.tracks[i].tag.clone())
        .collect();
    Ok((per_query, missing))
}

/// Evaluates one video.
pub fn evaluate(
    gt: &Dataset,
    pred: &Dataset,
    mode: QueryMode,
    config: &EvalConfig,
) -> Result<MetricsReport, MetricsError> {
    evaluate_videos(&[(gt, pred)], mode, config)
}

/// Evaluates several videos: per-query metrics are averaged within each
/// video, then videos are averaged uniformly. Videos with no queries are
/// skipped.
pub fn evaluate_videos(
    videos: &[(&Dataset, &Dataset)],
    mode: QueryMode,
    config: &EvalConfig,
) -> Result<MetricsReport, MetricsError> {
    let nthr = config.thresholds.len();
    let mut summaries = Vec::new();
    let mut per_query = Vec::new();
    let mut without = Vec::new();
    for (gt, pred) in videos {
        let (q, missing) = evaluate_video_queries(gt, pred, mode, config)?;
        if let Some(s) = summarize(&q, nthr) {
            summaries.push(s);
        }
        per_query.extend(q);
        without.extend(missing);
    }
    if summaries.is_empty() {
        return Err(MetricsError::EmptyEvaluationSet);
    }

    let mut counts = vec![Tallies::default(); nthr];
    for q in &per_query {
        for (c, t) in counts.iter_mut().zip(&q.tallies) {
            *c += *t;
        }
    }
    let thresholds: Vec<ThresholdMetrics> = (0..nthr)
        .map(|k| ThresholdMetrics {
            threshold: config.thresholds[k],
            position_accuracy: mean(summaries.iter().filter_map(|s| s.position[k])).unwrap_or(0.0),
            jaccard: mean(summaries.iter().map(|s| s.jaccard[k])).unwrap_or(1.0),
            counts: counts[k],
        })
        .collect();
    Ok(MetricsReport {
        query_mode: mode,
        threshold_rule: config.rule,
        num_videos: summaries.len(),
        num_queries: per_query.len(),
        occlusion_accuracy: mean(summaries.iter().map(|s| s.oa)).unwrap_or(0.0),
        delta_x_avg: mean(thresholds.iter().map(|t| t.position_accuracy)).unwrap_or(0.0),
        average_jaccard: mean(thresholds.iter().map(|t| t.jaccard)).unwrap_or(0.0),
        thresholds,
        tracks_without_queries: without,
        per_query,
    })
}
