//! Tube container: a directory holding one mask PGM per in-span frame
//! (`mask_XXXX.pgm`, numbered by absolute frame index) plus `tube.json`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::pgm::{load_mask, save_mask};
use crate::error::{Error, Result};
use crate::tubes::Tube;

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TubeManifest {
    pub first_frame: usize,
    pub last_frame: usize,
    pub width: usize,
    pub height: usize,
    pub score: f64,
}

pub fn save_tube(dir: impl AsRef<Path>, tube: &Tube) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = TubeManifest {
        first_frame: tube.first_frame(),
        last_frame: tube.last_frame(),
        width: tube.width(),
        height: tube.height(),
        score: tube.score,
    };
    let json =
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::format(dir, e.to_string()))?;
    fs::write(dir.join("tube.json"), json).map_err(|e| Error::io(dir, e))?;
    for frame in tube.frames() {
        let mask = tube.mask_at(frame).unwrap();
        save_mask(dir.join(format!("mask_{frame:04}.pgm")), mask)?;
    }
    Ok(())
}

pub fn load_tube(dir: impl AsRef<Path>) -> Result<Tube> {
    let dir = dir.as_ref();
    let manifest_path = dir.join("tube.json");
    let json = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: TubeManifest =
        serde_json::from_str(&json).map_err(|e| Error::format(&manifest_path, e.to_string()))?;
    if manifest.last_frame < manifest.first_frame {
        return Err(Error::format(
            &manifest_path,
            "lastFrame precedes firstFrame",
        ));
    }
    let mut masks = Vec::with_capacity(manifest.last_frame - manifest.first_frame + 1);
    for frame in manifest.first_frame..=manifest.last_frame {
        let path = dir.join(format!("mask_{frame:04}.pgm"));
        let mask = load_mask(&path)?;
        if mask.width() != manifest.width || mask.height() != manifest.height {
            return Err(Error::format(
                &path,
                "mask dimensions disagree with tube manifest",
            ));
        }
        masks.push(mask);
    }
    let mut tube = Tube::new(manifest.first_frame, masks)?;
    tube.score = manifest.score;
    Ok(tube)
}
