//! Whole-video generation and the on-disk layout.
//!
//! ```text
//! <dir>/video.json            VideoInfo
//! <dir>/scene.json            the RigidScene, loadable again as a scene file
//! <dir>/tracks.json           ground-truth tracks for the sampled queries
//! <dir>/frames/00000.ppm      color
//! <dir>/depth/00000.tapd      depth
//! <dir>/flow/00000.flo        forward flow, frame t to t + 1
//! <dir>/flow_backward/00000.flo  backward flow, frame t + 1 to t
//! ```

use super::render::{render, RenderOutput};
use super::sampling::{sample_queries, QueryBudget};
use super::truth::{gt_flow_volume, gt_track, FlowDirection};
use super::{RigidScene, SceneError};
use crate::par;
use crate::trackstore::{
    read_json, write_depth, write_flow_dir, write_json, write_ppm, write_tracks, Dataset, FlowVolume,
    Query, StoreError,
};
use image::RgbImage;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoInfo {
    pub video_id: String,
    pub width: usize,
    pub height: usize,
    pub fps: f64,
    pub num_frames: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
}

#[derive(Debug, Clone)]
pub struct GeneratedVideo {
    pub scene: RigidScene,
    pub render: RenderOutput,
    pub forward: FlowVolume,
    pub backward: FlowVolume,
    pub dataset: Dataset,
}

/// Renders the scene, computes flow both ways, samples queries on frame 0
/// (seeded from the scene seed) and tracks them.
pub fn simulate(
    scene: &RigidScene,
    video_id: &str,
    budget: QueryBudget,
) -> Result<GeneratedVideo, SceneError> {
    let render = render(scene)?;
    let forward = gt_flow_volume(scene, &render, FlowDirection::Forward);
    let backward = gt_flow_volume(scene, &render, FlowDirection::Backward);
    let ids: Vec<u32> = scene.objects.iter().map(|o| o.id).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(scene.seed ^ 0x5eed_0f_9e71e5);
    let queries = sample_queries(&render.frames[0], &ids, budget, &mut rng);
    let tracks = par::map_slice(&queries, |q| {
        gt_track(
            scene,
            &render,
            Query {
                t: 0,
                x: q.x as f64,
                y: q.y as f64,
            },
        )
    });
    let mut counter = std::collections::HashMap::new();
    let tracks = tracks
        .into_iter()
        .zip(&queries)
        .map(|(tr, q)| {
            let mut tr = tr?;
            let obj = &scene.objects[scene.object_index(q.object).expect("sampled id exists")];
            let k = counter.entry(q.object).or_insert(0usize);
            tr.tag = format!("{}-{:03}", obj.name, k);
            *k += 1;
            Ok(tr)
        })
        .collect::<Result<Vec<_>, SceneError>>()?;
    let dataset = Dataset {
        video_id: video_id.to_string(),
        width: scene.width as u32,
        height: scene.height as u32,
        fps: scene.fps,
        tracks,
    };
    Ok(GeneratedVideo {
        scene: scene.clone(),
        render,
        forward,
        backward,
        dataset,
    })
}

fn mkdir(p: &Path) -> Result<(), StoreError> {
    fs::create_dir_all(p).map_err(|e| StoreError::io(p, e))
}

pub fn write_video(
    video: &GeneratedVideo,
    dir: impl AsRef<Path>,
    preset: Option<&str>,
) -> Result<(), StoreError> {
    let dir = dir.as_ref();
    for sub in ["frames", "depth"] {
        mkdir(&dir.join(sub))?;
    }
    let scene = &video.scene;
    let info = VideoInfo {
        video_id: video.dataset.video_id.clone(),
        width: scene.width,
        height: scene.height,
        fps: scene.fps,
        num_frames: scene.num_frames,
        seed: scene.seed,
        preset: preset.map(str::to_string),
    };
    write_json(&info, dir.join("video.json"))?;
    write_json(scene, dir.join("scene.json"))?;
    write_tracks(&video.dataset, dir.join("tracks.json"))?;
    let written: Vec<Result<(), StoreError>> = par::map_range(video.render.frames.len(), |t| {
        let f = &video.render.frames[t];
        let img = RgbImage::from_raw(scene.width as u32, scene.height as u32, f.color_bytes())
            .expect("frame buffer size");
        write_ppm(&img, dir.join("frames").join(format!("{t:05}.ppm")))?;
        write_depth(&f.depth, dir.join("depth").join(format!("{t:05}.tapd")))
    });
    written.into_iter().collect::<Result<(), _>>()?;
    write_flow_dir(&video.forward, dir.join("flow"))?;
    write_flow_dir(&video.backward, dir.join("flow_backward"))
}

pub fn read_video_info(dir: impl AsRef<Path>) -> Result<VideoInfo, StoreError> {
    read_json(dir.as_ref().join("video.json"))
}
