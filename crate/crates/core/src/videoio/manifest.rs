//! Scene manifest: a JSON file listing the frame, flow, backward-flow and
//! ground-truth tube paths of a sequence. Paths are stored relative to the
//! manifest's directory.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::synth::Scene;
use super::{flo, pgm, tube_io};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SceneManifest {
    pub width: usize,
    pub height: usize,
    pub frame_count: usize,
    pub frames: Vec<String>,
    pub flows: Vec<String>,
    pub backward_flows: Vec<String>,
    #[serde(default)]
    pub gt_tubes: Vec<String>,
    #[serde(default)]
    pub seed: u64,
}

/// Write a scene under `dir` (frames/, flows/, gt/) plus `scene.json`.
/// Returns the manifest path.
pub fn save_scene(dir: impl AsRef<Path>, scene: &Scene) -> Result<std::path::PathBuf> {
    let dir = dir.as_ref();
    for sub in ["frames", "flows", "gt"] {
        fs::create_dir_all(dir.join(sub)).map_err(|e| Error::io(dir, e))?;
    }
    let mut manifest = SceneManifest {
        width: scene.width(),
        height: scene.height(),
        frame_count: scene.frame_count(),
        frames: Vec::new(),
        flows: Vec::new(),
        backward_flows: Vec::new(),
        gt_tubes: Vec::new(),
        seed: scene.seed,
    };
    for (t, frame) in scene.frames.iter().enumerate() {
        let rel = format!("frames/frame_{t:04}.pgm");
        pgm::save_frame(dir.join(&rel), frame)?;
        manifest.frames.push(rel);
    }
    for (t, flow) in scene.flows.iter().enumerate() {
        let rel = format!("flows/flow_{t:04}.flo");
        flo::save_flow(dir.join(&rel), flow)?;
        manifest.flows.push(rel);
    }
    for (t, flow) in scene.backward_flows.iter().enumerate() {
        let rel = format!("flows/back_{t:04}.flo");
        flo::save_flow(dir.join(&rel), flow)?;
        manifest.backward_flows.push(rel);
    }
    for (k, tube) in scene.gt_tubes.iter().enumerate() {
        let rel = format!("gt/tube_{k:03}");
        tube_io::save_tube(dir.join(&rel), tube)?;
        manifest.gt_tubes.push(rel);
    }
    let manifest_path = dir.join("scene.json");
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::format(&manifest_path, e.to_string()))?;
    fs::write(&manifest_path, json).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest_path)
}

pub fn load_scene(manifest_path: impl AsRef<Path>) -> Result<Scene> {
    let manifest_path = manifest_path.as_ref();
    let json = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: SceneManifest =
        serde_json::from_str(&json).map_err(|e| Error::format(manifest_path, e.to_string()))?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));

    if manifest.frames.len() != manifest.frame_count
        || manifest.flows.len() != manifest.frame_count.saturating_sub(1)
        || manifest.backward_flows.len() != manifest.frame_count.saturating_sub(1)
    {
        return Err(Error::format(manifest_path, "frame/flow counts disagree"));
    }

    let mut frames = Vec::with_capacity(manifest.frames.len());
    for rel in &manifest.frames {
        let frame = pgm::load_frame(base.join(rel))?;
        if frame.width != manifest.width || frame.height != manifest.height {
            return Err(Error::format(
                base.join(rel),
                "frame dimensions disagree with manifest",
            ));
        }
        frames.push(frame);
    }
    let load_flows = |paths: &[String]| -> Result<Vec<_>> {
        paths
            .iter()
            .map(|rel| {
                let flow = flo::load_flow(base.join(rel))?;
                if flow.width != manifest.width || flow.height != manifest.height {
                    return Err(Error::format(
                        base.join(rel),
                        "flow dimensions disagree with manifest",
                    ));
                }
                Ok(flow)
            })
            .collect()
    };
    let flows = load_flows(&manifest.flows)?;
    let backward_flows = load_flows(&manifest.backward_flows)?;
    let gt_tubes = manifest
        .gt_tubes
        .iter()
        .map(|rel| tube_io::load_tube(base.join(rel)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Scene {
        frames,
        flows,
        backward_flows,
        gt_tubes,
        seed: manifest.seed,
    })
}
