//! Core data model: tracks, datasets, flow and depth fields, plus their
//! on-disk formats.
//!
//! Coordinates are `(x, y)` in pixels with x to the right and y downward.
//! Pixel `(i, j)` has its center at integer coordinates `(j, i)`, so the
//! image rectangle is `[0, width) x [0, height)`.

mod depth;
mod flo;
mod frames;
mod text;

pub use depth::{decode_depth, encode_depth, read_depth, write_depth, DEPTH_MAGIC};
pub use flo::{
    decode_flo, encode_flo, read_flo, read_flow_dir, write_flo, write_flow_dir, FLO_MAGIC,
};
pub use frames::{read_ppm, write_ppm};
pub use text::{
    dataset_from_str, dataset_to_string, read_json, read_tracks, write_json, write_tracks,
    DatasetRecord, TrackRecord,
};

use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

/// Side length of the square evaluation space used by every metric.
pub const EVAL_SIZE: u32 = 256;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: bad magic value")]
    BadMagic { path: PathBuf },
    #[error("{path}: truncated file (expected {expected} bytes, found {found})")]
    TruncatedFile {
        path: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("{path}: non-finite value at element {index}")]
    NonFiniteValue { path: PathBuf, index: usize },
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("zero source resolution")]
    ZeroResolution,
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl StoreError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        StoreError::Io {
            path: path.into(),
            source,
        }
    }
}

/// A 2D position in pixels. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Point { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

/// The `(t, x, y)` seed identifying the surface point a track follows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub t: usize,
    pub x: f64,
    pub y: f64,
}

impl Query {
    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Resolution {
    pub width: u32,
    pub height: u32,
}

impl Resolution {
    pub const fn new(width: u32, height: u32) -> Self {
        Resolution { width, height }
    }

    pub const fn eval() -> Self {
        Resolution::new(EVAL_SIZE, EVAL_SIZE)
    }

    /// True when `p` lies in `[0, width) x [0, height)`.
    pub fn contains(&self, p: Point) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x < self.width as f64 && p.y < self.height as f64
    }
}

/// Per-frame positions and visibility flags for one physical surface point.
///
/// Positions on occluded frames are carried along but carry no meaning.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub tag: String,
    pub query: Query,
    pub points: Vec<Point>,
    pub visible: Vec<bool>,
    pub source_resolution: Resolution,
}

impl Track {
    pub fn new(
        tag: impl Into<String>,
        query: Query,
        points: Vec<Point>,
        visible: Vec<bool>,
        source_resolution: Resolution,
    ) -> Result<Self, StoreError> {
        let track = Track {
            tag: tag.into(),
            query,
            points,
            visible,
            source_resolution,
        };
        track.validate()?;
        Ok(track)
    }

    pub fn num_frames(&self) -> usize {
        self.points.len()
    }

    pub fn validate(&self) -> Result<(), StoreError> {
        if self.points.len() != self.visible.len() {
            return Err(StoreError::LengthMismatch(format!(
                "track '{}': {} points but {} visibility flags",
                self.tag,
                self.points.len(),
                self.visible.len()
            )));
        }
        if self.query.t >= self.points.len() {
            return Err(StoreError::SchemaViolation(format!(
                "track '{}': query frame {} outside 0..{}",
                self.tag,
                self.query.t,
                self.points.len()
            )));
        }
        if !self.query.point().is_finite() || self.points.iter().any(|p| !p.is_finite()) {
            return Err(StoreError::SchemaViolation(format!(
                "track '{}': non-finite coordinate",
                self.tag
            )));
        }
        Ok(())
    }

    /// Number of visible frames.
    pub fn num_visible(&self) -> usize {
        self.visible.iter().filter(|&&v| v).count()
    }
}

/// Rescales a track's positions (and query) from its source resolution to a
/// `width x height` evaluation space. Visibility is unchanged.
pub fn rescale_to_eval(track: &Track, width: u32, height: u32) -> Result<Track, StoreError> {
    let src = track.source_resolution;
    if src.width == 0 || src.height == 0 || width == 0 || height == 0 {
        return Err(StoreError::ZeroResolution);
    }
    let sx = width as f64 / src.width as f64;
    let sy = height as f64 / src.height as f64;
    let scale = |p: Point| Point::new(p.x * sx, p.y * sy);
    Ok(Track {
        tag: track.tag.clone(),
        query: Query {
            t: track.query.t,
            x: track.query.x * sx,
            y: track.query.y * sy,
        },
        points: track.points.iter().copied().map(scale).collect(),
        visible: track.visible.clone(),
        source_resolution: Resolution::new(width, height),
    })
}

/// A video's worth of tracks.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub video_id: String,
    pub width: u32,
    pub height: u32,
    pub fps: f64,
    pub tracks: Vec<Track>,
}

impl Dataset {
    pub fn resolution(&self) -> Resolution {
        Resolution::new(self.width, self.height)
    }

    /// Common track length, or `None` for an empty dataset.
    pub fn num_frames(&self) -> Option<usize> {
        self.tracks.first().map(Track::num_frames)
    }

    pub fn validate(&self) -> Result<(), StoreError> {
        if self.width == 0 || self.height == 0 {
            return Err(StoreError::ZeroResolution);
        }
        let len = self.num_frames();
        for tr in &self.tracks {
            tr.validate()?;
            if Some(tr.num_frames()) != len {
                return Err(StoreError::LengthMismatch(format!(
                    "track '{}' has {} frames, dataset has {}",
                    tr.tag,
                    tr.num_frames(),
                    len.unwrap_or(0)
                )));
            }
        }
        Ok(())
    }

    /// Checks that every visible position lies inside the image rectangle.
    pub fn check_bounds(&self) -> Result<(), StoreError> {
        let res = self.resolution();
        for tr in &self.tracks {
            for (t, (p, &v)) in tr.points.iter().zip(&tr.visible).enumerate() {
                if v && !res.contains(*p) {
                    return Err(StoreError::SchemaViolation(format!(
                        "track '{}' frame {t}: visible position ({}, {}) outside {}x{}",
                        tr.tag, p.x, p.y, res.width, res.height
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One dense forward flow field between consecutive frames, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    /// Interleaved `(u, v)` per pixel, row-major.
    pub data: Vec<[f32; 2]>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        FlowField {
            width,
            height,
            data: vec![[0.0; 2]; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f32; 2]) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        FlowField {
            width,
            height,
            data,
        }
    }

    /// Flow vector at an integer pixel.
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> [f64; 2] {
        let [u, v] = self.data[y * self.width + x];
        [u as f64, v as f64]
    }

    /// Bilinear flow lookup at a fractional position. Positions outside the
    /// image are clamped to the nearest border pixel first.
    pub fn bilinear(&self, p: Point) -> Point {
        let x = p.x.clamp(0.0, (self.width - 1) as f64);
        let y = p.y.clamp(0.0, (self.height - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let a = self.at(x0, y0);
        let b = self.at(x1, y0);
        let c = self.at(x0, y1);
        let d = self.at(x1, y1);
        let blend = |k: usize| {
            let top = a[k] + (b[k] - a[k]) * fx;
            let bot = c[k] + (d[k] - c[k]) * fx;
            top + (bot - top) * fy
        };
        Point::new(blend(0), blend(1))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|[u, v]| u.is_finite() && v.is_finite())
    }
}

/// Forward flow for a whole video: `fields[t]` maps frame `t` to `t + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowVolume {
    pub width: usize,
    pub height: usize,
    pub fields: Vec<FlowField>,
}

impl FlowVolume {
    pub fn new(fields: Vec<FlowField>) -> Result<Self, StoreError> {
        let first = fields
            .first()
            .ok_or_else(|| StoreError::SchemaViolation("flow volume has no fields".into()))?;
        let (width, height) = (first.width, first.height);
        if width == 0 || height == 0 {
            return Err(StoreError::ZeroResolution);
        }
        for (i, f) in fields.iter().enumerate() {
            if f.width != width || f.height != height {
                return Err(StoreError::LengthMismatch(format!(
                    "flow field {i} is {}x{}, expected {width}x{height}",
                    f.width, f.height
                )));
            }
            if !f.is_finite() {
                return Err(StoreError::SchemaViolation(format!(
                    "flow field {i} has non-finite values"
                )));
            }
        }
        Ok(FlowVolume {
            width,
            height,
            fields,
        })
    }

    /// Zero flow over `num_frames` frames.
    pub fn zeros(width: usize, height: usize, num_frames: usize) -> Self {
        FlowVolume {
            width,
            height,
            fields: (0..num_frames.saturating_sub(1))
                .map(|_| FlowField::zeros(width, height))
                .collect(),
        }
    }

    pub fn num_frames(&self) -> usize {
        self.fields.len() + 1
    }

    pub fn resolution(&self) -> Resolution {
        Resolution::new(self.width as u32, self.height as u32)
    }
}

/// Dense per-pixel camera depth, row-major. Background pixels hold `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f64>,
}

impl DepthMap {
    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        DepthMap {
            width,
            height,
            depth: vec![value; width * height],
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.depth[y * self.width + x]
    }
}
