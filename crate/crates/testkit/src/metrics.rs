//! Metrics tallied frame by frame straight from the definitions.

use tapkit_core::trackstore::{Dataset, Track};

#[derive(Debug, Clone, PartialEq)]
pub struct NaiveReport {
    pub occlusion_accuracy: f64,
    pub delta: Vec<f64>,
    pub jaccard: Vec<f64>,
    pub delta_avg: f64,
    pub average_jaccard: f64,
}

fn eval_xy(track: &Track, t: usize) -> (f64, f64) {
    let p = track.points[t];
    (
        p.x * (256.0 / track.source_resolution.width as f64),
        p.y * (256.0 / track.source_resolution.height as f64),
    )
}

fn average(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// `first` selects first-visible-frame queries; otherwise queries every
/// `stride` frames from 0 where the ground truth is visible.
pub fn evaluate(videos: &[(&Dataset, &Dataset)], first: bool, stride: usize, thresholds: &[f64]) -> Option<NaiveReport> {
    let mut video_oa = Vec::new();
    let mut video_delta: Vec<Vec<f64>> = vec![Vec::new(); thresholds.len()];
    let mut video_jac: Vec<Vec<f64>> = vec![Vec::new(); thresholds.len()];
    for (gt, pred) in videos {
        let mut oa = Vec::new();
        let mut delta: Vec<Vec<f64>> = vec![Vec::new(); thresholds.len()];
        let mut jac: Vec<Vec<f64>> = vec![Vec::new(); thresholds.len()];
        for g in &gt.tracks {
            let n = g.visible.len();
            let mut qs = Vec::new();
            if first {
                if let Some(t) = (0..n).find(|&t| g.visible[t]) {
                    qs.push(t);
                }
            } else {
                let mut t = 0;
                while t < n {
                    if g.visible[t] {
                        qs.push(t);
                    }
                    t += stride;
                }
            }
            for q in qs {
                let same_tag: Vec<&Track> = pred.tracks.iter().filter(|p| p.tag == g.tag).collect();
                let p = match same_tag.iter().find(|p| p.query.t == q) {
                    Some(p) => *p,
                    None if same_tag.len() == 1 => same_tag[0],
                    None => return None,
                };
                let frames: Vec<usize> = if first { (q..n).collect() } else { (0..n).collect() };
                let agree = frames.iter().filter(|&&t| p.visible[t] == g.visible[t]).count();
                oa.push(agree as f64 / frames.len() as f64);
                for (k, &thr) in thresholds.iter().enumerate() {
                    let (mut vis, mut close, mut tp, mut fp, mut fneg) = (0, 0, 0, 0, 0);
                    for &t in &frames {
                        let (gx, gy) = eval_xy(g, t);
                        let (px, py) = eval_xy(p, t);
                        let err = ((gx - px).powi(2) + (gy - py).powi(2)).sqrt();
                        let near = err < thr;
                        if g.visible[t] {
                            vis += 1;
                            if near {
                                close += 1;
                            }
                        }
                        if g.visible[t] && p.visible[t] && near {
                            tp += 1;
                        }
                        if p.visible[t] && (!g.visible[t] || !near) {
                            fp += 1;
                        }
                        if g.visible[t] && (!p.visible[t] || !near) {
                            fneg += 1;
                        }
                    }
                    if vis > 0 {
                        delta[k].push(close as f64 / vis as f64);
                    }
                    let denom = tp + fp + fneg;
                    jac[k].push(if denom == 0 { 1.0 } else { tp as f64 / denom as f64 });
                }
            }
        }
        if let Some(m) = average(&oa) {
            video_oa.push(m);
            for k in 0..thresholds.len() {
                if let Some(d) = average(&delta[k]) {
                    video_delta[k].push(d);
                }
                video_jac[k].push(average(&jac[k]).unwrap());
            }
        }
    }
    let oa = average(&video_oa)?;
    let delta: Vec<f64> = video_delta.iter().map(|v| average(v).unwrap_or(0.0)).collect();
    let jaccard: Vec<f64> = video_jac.iter().map(|v| average(v).unwrap_or(1.0)).collect();
    Some(NaiveReport {
        occlusion_accuracy: oa,
        delta_avg: average(&delta).unwrap_or(0.0),
        average_jaccard: average(&jaccard).unwrap_or(0.0),
        delta,
        jaccard,
    })
}
