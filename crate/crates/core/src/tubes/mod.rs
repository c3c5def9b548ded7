//! Supervoxels and spatio-temporal pixel tubes.
//!
//! A tube is one object hypothesis: a contiguous span of frames, one binary
//! mask per frame, tight per-frame bounding boxes and a score filled in by
//! ranking. Supervoxels are chains of temporally linked superpixels; cluster
//! projection turns a set of trajectories into a tube by thresholding
//! per-supervoxel weights.

mod project;
mod superpixels;
mod supervoxels;

pub use project::{project_cluster, supervoxel_weights};
pub use superpixels::{superpixels, Partition, SuperpixelParams};
pub use supervoxels::{build_supervoxels, save_supervoxels, SupervoxelParams, SupervoxelSet};

use crate::error::{Error, Result};
use crate::videoio::{BoundingBox, MaskFrame};

/// Spatio-temporal binary pixel volume over a contiguous frame span.
#[derive(Debug, Clone, PartialEq)]
pub struct Tube {
    width: usize,
    height: usize,
    first_frame: usize,
    masks: Vec<MaskFrame>,
    boxes: Vec<BoundingBox>,
    pub score: f64,
}

impl Tube {
    /// Build a tube from per-frame masks starting at `first_frame`. Every mask
    /// must be non-empty and share one shape; boxes are derived tight.
    pub fn new(first_frame: usize, masks: Vec<MaskFrame>) -> Result<Self> {
        if masks.is_empty() {
            return Err(Error::InvalidArgument(
                "tube must span at least one frame".into(),
            ));
        }
        let width = masks[0].width();
        let height = masks[0].height();
        let mut boxes = Vec::with_capacity(masks.len());
        for (i, m) in masks.iter().enumerate() {
            if m.width() != width || m.height() != height {
                return Err(Error::InvalidArgument("tube masks differ in shape".into()));
            }
            let bbox = m.tight_bbox().ok_or_else(|| {
                Error::InvalidArgument(format!("empty mask at in-span frame {}", first_frame + i))
            })?;
            boxes.push(bbox);
        }
        Ok(Tube {
            width,
            height,
            first_frame,
            masks,
            boxes,
            score: 0.0,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn first_frame(&self) -> usize {
        self.first_frame
    }

    pub fn last_frame(&self) -> usize {
        self.first_frame + self.masks.len() - 1
    }

    pub fn span_len(&self) -> usize {
        self.masks.len()
    }

    pub fn frames(&self) -> std::ops::RangeInclusive<usize> {
        self.first_frame..=self.last_frame()
    }

    pub fn mask_at(&self, frame: usize) -> Option<&MaskFrame> {
        (frame >= self.first_frame && frame <= self.last_frame())
            .then(|| &self.masks[frame - self.first_frame])
    }

    pub fn box_at(&self, frame: usize) -> Option<BoundingBox> {
        (frame >= self.first_frame && frame <= self.last_frame())
            .then(|| self.boxes[frame - self.first_frame])
    }

    pub fn masks(&self) -> &[MaskFrame] {
        &self.masks
    }

    /// Total number of set voxels.
    pub fn volume(&self) -> usize {
        self.masks.iter().map(|m| m.count()).sum()
    }
}
