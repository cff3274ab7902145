use crate::trackstore::Dataset;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// How queries are sampled from ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryMode {
    /// Every `stride` frames starting at frame 0, wherever the point is visible.
    Strided,
    /// Only the first visible frame; earlier frames are not evaluated.
    First,
}

impl FromStr for QueryMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "strided" => Ok(QueryMode::Strided),
            "first" => Ok(QueryMode::First),
            other => Err(format!("unknown query mode '{other}' (expected strided|first)")),
        }
    }
}

impl fmt::Display for QueryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QueryMode::Strided => "strided",
            QueryMode::First => "first",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuerySpec {
    pub track: usize,
    pub t: usize,
    pub mode: QueryMode,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuerySet {
    pub mode: QueryMode,
    pub queries: Vec<QuerySpec>,
    /// Indices of tracks that are never visible.
    pub tracks_without_queries: Vec<usize>,
}

pub fn extract_queries(dataset: &Dataset, mode: QueryMode, stride: usize) -> QuerySet {
    let stride = stride.max(1);
    let mut queries = Vec::new();
    let mut without = Vec::new();
    for (i, tr) in dataset.tracks.iter().enumerate() {
        let before = queries.len();
        match mode {
            QueryMode::Strided => queries.extend(
                (0..tr.visible.len())
                    .step_by(stride)
                    .filter(|&t| tr.visible[t])
                    .map(|t| QuerySpec { track: i, t, mode }),
            ),
            QueryMode::First => {
                if let Some(t) = tr.visible.iter().position(|&v| v) {
                    queries.push(QuerySpec { track: i, t, mode });
                }
            }
        }
        if queries.len() == before {
            without.push(i);
        }
    }
    QuerySet {
        mode,
        queries,
        tracks_without_queries: without,
    }
}
