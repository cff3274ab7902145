//! Control-point files: the track file schema with per-track segments in
//! place of solved positions.
//!
//! ```json
//! { "video_id": "v", "width": 256, "height": 256, "fps": 24.0,
//!   "tracks": [ { "tag": "a",
//!                 "segments": [ { "points": [ {"t": 0, "x": 3.0, "y": 4.0}, ... ],
//!                                 "modes": ["flow", "linear"] } ] } ] }
//! ```

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use tapkit_core::assist::{solve_track, AssistConfig, Segment, ControlPointSet};
use tapkit_core::trackstore::{Dataset, FlowVolume, Resolution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackControls {
    pub tag: String,
    pub segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlsFile {
    pub video_id: String,
    pub width: u32,
    pub height: u32,
    pub fps: f64,
    pub tracks: Vec<TrackControls>,
}

/// Parses `WxH`.
pub fn parse_resolution(s: &str) -> Result<Resolution> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .with_context(|| format!("resolution '{s}' is not WxH"))?;
    let (w, h): (u32, u32) = (w.trim().parse()?, h.trim().parse()?);
    if w == 0 || h == 0 {
        bail!("resolution '{s}' has a zero side");
    }
    Ok(Resolution::new(w, h))
}

/// Solves every track of a control file against one flow volume.
pub fn solve_controls(flow: &FlowVolume, file: &ControlsFile, config: &AssistConfig) -> Result<Dataset> {
    let res = flow.resolution();
    if res != Resolution::new(file.width, file.height) {
        bail!(
            "controls are for {}x{} but the flow is {}x{}",
            file.width,
            file.height,
            res.width,
            res.height
        );
    }
    let mut tracks = Vec::with_capacity(file.tracks.len());
    for tc in &file.tracks {
        let set = ControlPointSet::new(tc.segments.clone());
        let mut solved = solve_track(flow, &set, config).with_context(|| format!("track '{}'", tc.tag))?;
        solved.track.tag = tc.tag.clone();
        tracks.push(solved.track);
    }
    Ok(Dataset {
        video_id: file.video_id.clone(),
        width: file.width,
        height: file.height,
        fps: file.fps,
        tracks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolution_parsing() {
        assert_eq!(parse_resolution("256x128").unwrap(), Resolution::new(256, 128));
        assert!(parse_resolution("256").is_err());
        assert!(parse_resolution("0x4").is_err());
    }
}
