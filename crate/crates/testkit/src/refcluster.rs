//! Literal transcription of the reference greedy clustering: a full distance
//! matrix recomputed after every merge, merged clusters set to infinity.

use tapkit_core::trackstore::Track;

pub fn track_dist(t1: &Track, t2: &Track) -> f64 {
    let mut xy1 = Vec::new();
    let mut xy2 = Vec::new();
    for k in 0..t1.points.len() {
        if t1.visible[k] && t2.visible[k] {
            xy1.push((t1.points[k].x, t1.points[k].y));
            xy2.push((t2.points[k].x, t2.points[k].y));
        }
    }
    if xy1.len() <= 10 {
        return f64::INFINITY;
    }
    let n = xy1.len() as f64;
    let mut offset = (0.0, 0.0);
    for k in 0..xy1.len() {
        offset.0 += xy1[k].0 - xy2[k].0;
        offset.1 += xy1[k].1 - xy2[k].1;
    }
    offset = (offset.0 / n, offset.1 / n);
    let mut total = 0.0;
    for k in 0..xy1.len() {
        let dx = xy1[k].0 - (xy2[k].0 + offset.0);
        let dy = xy1[k].1 - (xy2[k].1 + offset.1);
        total += (dx * dx + dy * dy).sqrt();
    }
    total / n
}

fn cluster_dist(tracks: &[Track], a: &[usize], b: &[usize]) -> f64 {
    let mut best = f64::INFINITY;
    for &i in a {
        for &j in b {
            best = best.min(track_dist(&tracks[i], &tracks[j]));
        }
    }
    best
}

/// Returns the member lists of the surviving clusters, ordered by their
/// smallest member.
pub fn greedy_cluster(tracks: &[Track], threshold: f64) -> Vec<Vec<usize>> {
    let n = tracks.len();
    let mut clusters: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
    loop {
        let mut best = (f64::INFINITY, 0, 0);
        for i in 0..n {
            for j in 0..n {
                let d = match (&clusters[i], &clusters[j]) {
                    (Some(a), Some(b)) if i < j => cluster_dist(tracks, a, b),
                    _ => f64::INFINITY,
                };
                if d < best.0 {
                    best = (d, i, j);
                }
            }
        }
        if !(best.0 < threshold) {
            break;
        }
        let b = clusters[best.2].take().unwrap();
        clusters[best.1].as_mut().unwrap().extend(b);
    }
    let mut out: Vec<Vec<usize>> = clusters
        .into_iter()
        .flatten()
        .map(|mut c| {
            c.sort();
            c
        })
        .collect();
    out.sort();
    out
}

/// Largest pairwise distance over visible positions, all pairs.
pub fn diameter(track: &Track) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..track.points.len() {
        for j in 0..track.points.len() {
            if track.visible[i] && track.visible[j] {
                let (p, q) = (track.points[i], track.points[j]);
                best = best.max(((p.x - q.x).powi(2) + (p.y - q.y).powi(2)).sqrt());
            }
        }
    }
    best
}
