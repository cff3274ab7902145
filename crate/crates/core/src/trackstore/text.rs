//! Structured-text (JSON) track files.
//!
//! ```json
//! { "video_id": "v", "width": 256, "height": 256, "fps": 25.0,
//!   "tracks": [ { "tag": "a", "query": {"t": 0, "x": 1.0, "y": 2.0},
//!                 "points": [[1.0, 2.0], ...], "visible": [true, ...] } ] }
//! ```
//!
//! Floats are written in shortest round-trip decimal form, so reading a
//! written file recovers every value exactly.

use super::{Dataset, Point, Query, Resolution, StoreError, Track};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub tag: String,
    pub query: Query,
    pub points: Vec<Point>,
    pub visible: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub video_id: String,
    pub width: u32,
    pub height: u32,
    pub fps: f64,
    pub tracks: Vec<TrackRecord>,
}

impl From<&Dataset> for DatasetRecord {
    fn from(d: &Dataset) -> Self {
        DatasetRecord {
            video_id: d.video_id.clone(),
            width: d.width,
            height: d.height,
            fps: d.fps,
            tracks: d
                .tracks
                .iter()
                .map(|t| TrackRecord {
                    tag: t.tag.clone(),
                    query: t.query,
                    points: t.points.clone(),
                    visible: t.visible.clone(),
                })
                .collect(),
        }
    }
}

impl TryFrom<DatasetRecord> for Dataset {
    type Error = StoreError;

    fn try_from(r: DatasetRecord) -> Result<Self, StoreError> {
        let res = Resolution::new(r.width, r.height);
        let ds = Dataset {
            video_id: r.video_id,
            width: r.width,
            height: r.height,
            fps: r.fps,
            tracks: r
                .tracks
                .into_iter()
                .map(|t| Track {
                    tag: t.tag,
                    query: t.query,
                    points: t.points,
                    visible: t.visible,
                    source_resolution: res,
                })
                .collect(),
        };
        ds.validate()?;
        Ok(ds)
    }
}

pub fn dataset_to_string(dataset: &Dataset) -> Result<String, StoreError> {
    dataset.validate()?;
    serde_json::to_string_pretty(&DatasetRecord::from(dataset))
        .map_err(|e| StoreError::SchemaViolation(e.to_string()))
}

pub fn dataset_from_str(text: &str) -> Result<Dataset, StoreError> {
    let rec: DatasetRecord =
        serde_json::from_str(text).map_err(|e| StoreError::SchemaViolation(e.to_string()))?;
    Dataset::try_from(rec)
}

pub fn write_tracks(dataset: &Dataset, path: impl AsRef<Path>) -> Result<(), StoreError> {
    let path = path.as_ref();
    let text = dataset_to_string(dataset)?;
    fs::write(path, text + "\n").map_err(|e| StoreError::io(path, e))
}

pub fn read_tracks(path: impl AsRef<Path>) -> Result<Dataset, StoreError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| StoreError::io(path, e))?;
    dataset_from_str(&text)
}

/// Reads any serde type from a JSON file.
pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T, StoreError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| StoreError::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| StoreError::SchemaViolation(format!("{}: {e}", path.display())))
}

/// Writes any serde type as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<(), StoreError> {
    let path = path.as_ref();
    let text =
        serde_json::to_string_pretty(value).map_err(|e| StoreError::SchemaViolation(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| StoreError::io(path, e))
}
