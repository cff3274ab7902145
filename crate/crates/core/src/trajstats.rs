//! Trajectory statistics and agglomerative clustering of tracks.

use crate::par;
use crate::trackstore::{rescale_to_eval, Dataset, Point, StoreError, Track, EVAL_SIZE};
use serde::{Deserialize, Serialize};

/// Default merge threshold, in 256x256 pixels.
pub const CLUSTER_THRESHOLD: f64 = 2.0;
/// Joint-visible frames needed before two tracks have a distance.
pub const MIN_OVERLAP: usize = 10;

fn visible_points(track: &Track) -> Vec<Point> {
    track
        .points
        .iter()
        .zip(&track.visible)
        .filter(|(_, &v)| v)
        .map(|(&p, _)| p)
        .collect()
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Convex hull by monotone chain, counter-clockwise, no collinear points.
fn convex_hull(mut pts: Vec<Point>) -> Vec<Point> {
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Largest distance between any two visible positions; 0 with fewer than
/// two visible frames.
pub fn diameter(track: &Track) -> f64 {
    let hull = convex_hull(visible_points(track));
    let mut best: f64 = 0.0;
    for i in 0..hull.len() {
        for j in i + 1..hull.len() {
            best = best.max(hull[i].distance(hull[j]));
        }
    }
    best
}

/// Number of maximal runs of consecutive visible frames.
pub fn count_segments(track: &Track) -> usize {
    let mut runs = 0;
    let mut prev = false;
    for &v in &track.visible {
        if v && !prev {
            runs += 1;
        }
        prev = v;
    }
    runs
}

/// Mean distance between two tracks over their joint-visible frames after
/// removing the mean offset between them. `None` with `MIN_OVERLAP` or fewer
/// joint-visible frames.
pub fn track_distance(a: &Track, b: &Track) -> Option<f64> {
    let joint: Vec<(Point, Point)> = a
        .points
        .iter()
        .zip(&b.points)
        .zip(a.visible.iter().zip(&b.visible))
        .filter(|(_, (&va, &vb))| va && vb)
        .map(|((&p, &q), _)| (p, q))
        .collect();
    if joint.len() <= MIN_OVERLAP {
        return None;
    }
    let n = joint.len() as f64;
    let (ox, oy) = joint
        .iter()
        .fold((0.0, 0.0), |(sx, sy), (p, q)| (sx + (p.x - q.x), sy + (p.y - q.y)));
    let (ox, oy) = (ox / n, oy / n);
    let total: f64 = joint
        .iter()
        .map(|(p, q)| (p.x - q.x - ox).hypot(p.y - q.y - oy))
        .sum();
    Some(total / n)
}

/// Pairwise distances `(i, j, d)` for `i < j` with a defined distance.
pub fn pairwise_distances(tracks: &[Track]) -> Vec<(usize, usize, f64)> {
    let n = tracks.len();
    let rows = par::map_range(n, |i| {
        (i + 1..n)
            .filter_map(|j| track_distance(&tracks[i], &tracks[j]).map(|d| (i, j, d)))
            .collect::<Vec<_>>()
    });
    rows.into_iter().flatten().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    /// Cluster label per track; labels are numbered by each cluster's first
    /// track.
    pub labels: Vec<usize>,
    pub num_clusters: usize,
    /// Merges in order: the two tracks whose distance joined two clusters.
    pub merges: Vec<Merge>,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Single-linkage agglomerative clustering: clusters merge, closest pair
/// first, while the smallest inter-cluster distance is below `threshold`.
/// Undefined distances never merge. Equal distances merge in `(i, j)` order.
pub fn cluster(tracks: &[Track], threshold: f64) -> Clustering {
    let n = tracks.len();
    let mut edges: Vec<(usize, usize, f64)> = pairwise_distances(tracks)
        .into_iter()
        .filter(|e| e.2 < threshold)
        .collect();
    edges.sort_by(|x, y| x.2.total_cmp(&y.2).then((x.0, x.1).cmp(&(y.0, y.1))));
    let mut parent: Vec<usize> = (0..n).collect();
    let mut merges = Vec::new();
    for (i, j, d) in edges {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri != rj {
            let (lo, hi) = (ri.min(rj), ri.max(rj));
            parent[hi] = lo;
            merges.push(Merge { a: i, b: j, distance: d });
        }
    }
    let mut labels = vec![usize::MAX; n];
    let mut root_label = vec![usize::MAX; n];
    let mut next = 0;
    for i in 0..n {
        let r = find(&mut parent, i);
        if root_label[r] == usize::MAX {
            root_label[r] = next;
            next += 1;
        }
        labels[i] = root_label[r];
    }
    Clustering {
        labels,
        num_clusters: next,
        merges,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackStats {
    pub tag: String,
    /// In 256x256 pixels.
    pub diameter: f64,
    pub num_segments: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoStats {
    pub video_id: String,
    pub num_tracks: usize,
    pub num_clusters: usize,
    pub tracks: Vec<TrackStats>,
}

/// Tracks rescaled to 256x256 evaluation space.
pub fn eval_space_tracks(dataset: &Dataset) -> Result<Vec<Track>, StoreError> {
    dataset
        .tracks
        .iter()
        .map(|t| rescale_to_eval(t, EVAL_SIZE, EVAL_SIZE))
        .collect()
}

/// Per-track diameter and segment counts plus the cluster count, all in
/// 256x256 space.
pub fn video_stats(dataset: &Dataset, threshold: f64) -> Result<VideoStats, StoreError> {
    let tracks = eval_space_tracks(dataset)?;
    let clusters = cluster(&tracks, threshold);
    Ok(VideoStats {
        video_id: dataset.video_id.clone(),
        num_tracks: tracks.len(),
        num_clusters: clusters.num_clusters,
        tracks: tracks
            .iter()
            .map(|t| TrackStats {
                tag: t.tag.clone(),
                diameter: diameter(t),
                num_segments: count_segments(t),
            })
            .collect(),
    })
}

/// Counts per bin `[k * width, (k + 1) * width)`, from zero up to the bin
/// holding the largest value.
pub fn histogram(values: &[f64], width: f64) -> Vec<(f64, usize)> {
    assert!(width > 0.0, "bin width must be positive");
    let bins = values
        .iter()
        .map(|v| (v / width).floor().max(0.0) as usize)
        .max()
        .map_or(0, |m| m + 1);
    let mut counts = vec![0; bins];
    for v in values {
        counts[(v / width).floor().max(0.0) as usize] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, c)| (k as f64 * width, c))
        .collect()
}
