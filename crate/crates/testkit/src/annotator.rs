//! A simulated annotator: clicks ground truth exactly, ENTER at the start
//! of every visible run, a MOVE every `every` frames, EXIT at its end.

use tapkit_core::assist::{ControlPoint, Segment};
use tapkit_core::trackstore::Track;

pub fn controls_from_track(track: &Track, every: usize) -> Vec<Segment> {
    let mut segments = Vec::new();
    let n = track.visible.len();
    let mut t = 0;
    while t < n {
        if !track.visible[t] {
            t += 1;
            continue;
        }
        let start = t;
        while t < n && track.visible[t] {
            t += 1;
        }
        let end = t - 1;
        let mut frames: Vec<usize> = (start..=end).step_by(every.max(1)).collect();
        if *frames.last().unwrap() != end {
            frames.push(end);
        }
        let points = frames
            .into_iter()
            .map(|f| ControlPoint::new(f, track.points[f].x, track.points[f].y))
            .collect();
        segments.push(Segment::new(points));
    }
    segments
}
