//! Synthetic scene generation with exact ground truth.
//!
//! Objects are flat-intensity rectangles or ellipses translating at constant
//! velocity over a (possibly moving) flat background; per-pixel uniform noise
//! adds texture. Flow fields are ground truth by construction: flow at a
//! pixel is the velocity of whatever surface is visible there, with
//! later-listed objects occluding earlier ones. Backward flows (frame t+1 to
//! t) are generated exactly the same way from frame t+1 occupancy.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FlowField, Frame, MaskFrame};
use crate::error::{Error, Result};
use crate::tubes::Tube;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Rect,
    Ellipse,
}

/// One moving object: shape, size, starting center, velocity in pixels per
/// frame, base intensity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub shape: ShapeKind,
    pub size: (f64, f64),
    pub center: (f64, f64),
    pub velocity: (f64, f64),
    pub intensity: f64,
}

impl ObjectSpec {
    fn center_at(&self, t: usize) -> (f64, f64) {
        (
            self.center.0 + t as f64 * self.velocity.0,
            self.center.1 + t as f64 * self.velocity.1,
        )
    }

    fn contains(&self, px: usize, py: usize, t: usize) -> bool {
        let (cx, cy) = self.center_at(t);
        let (hw, hh) = (self.size.0 / 2.0, self.size.1 / 2.0);
        let dx = px as f64 - cx;
        let dy = py as f64 - cy;
        match self.shape {
            ShapeKind::Rect => dx >= -hw && dx < hw && dy >= -hh && dy < hh,
            ShapeKind::Ellipse => (dx / hw).powi(2) + (dy / hh).powi(2) <= 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub frame_count: usize,
    pub seed: u64,
    #[serde(default = "default_noise")]
    pub noise_amp: f64,
    #[serde(default = "default_bg_intensity")]
    pub background_intensity: f64,
    #[serde(default)]
    pub background_velocity: (f64, f64),
    pub objects: Vec<ObjectSpec>,
}

fn default_noise() -> f64 {
    0.1
}

fn default_bg_intensity() -> f64 {
    0.3
}

/// A video sequence with flow fields, backward flow fields and ground-truth
/// tubes. Produced by [`synthesize`] or loaded from a scene manifest.
#[derive(Debug, Clone)]
pub struct Scene {
    pub frames: Vec<Frame>,
    pub flows: Vec<FlowField>,
    pub backward_flows: Vec<FlowField>,
    pub gt_tubes: Vec<Tube>,
    pub seed: u64,
}

impl Scene {
    pub fn width(&self) -> usize {
        self.frames[0].width
    }

    pub fn height(&self) -> usize {
        self.frames[0].height
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }
}

/// Generate a deterministic synthetic scene. Fails if any object does not
/// stay at least one pixel inside the canvas on every frame.
pub fn synthesize(cfg: &SynthConfig) -> Result<Scene> {
    if cfg.frame_count < 2 {
        return Err(Error::InvalidArgument("frame_count must be >= 2".into()));
    }
    if cfg.width < 4 || cfg.height < 4 {
        return Err(Error::InvalidArgument("canvas must be at least 4x4".into()));
    }
    for (i, obj) in cfg.objects.iter().enumerate() {
        if obj.size.0 <= 0.0 || obj.size.1 <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "object {i} has non-positive size"
            )));
        }
        for t in 0..cfg.frame_count {
            let (cx, cy) = obj.center_at(t);
            let (hw, hh) = (obj.size.0 / 2.0, obj.size.1 / 2.0);
            if cx - hw < 1.0
                || cx + hw > (cfg.width - 2) as f64
                || cy - hh < 1.0
                || cy + hh > (cfg.height - 2) as f64
            {
                return Err(Error::InvalidArgument(format!(
                    "object {i} leaves the canvas margin at frame {t}"
                )));
            }
        }
    }

    let (w, h, n_frames) = (cfg.width, cfg.height, cfg.frame_count);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // Per-frame visible masks per object (later objects occlude earlier ones).
    let mut visible: Vec<Vec<MaskFrame>> = vec![Vec::with_capacity(n_frames); cfg.objects.len()];
    let mut full: Vec<Vec<MaskFrame>> = vec![Vec::with_capacity(n_frames); cfg.objects.len()];
    for t in 0..n_frames {
        for (k, obj) in cfg.objects.iter().enumerate() {
            full[k].push(MaskFrame::from_fn(w, h, |x, y| obj.contains(x, y, t)));
        }
        for k in 0..cfg.objects.len() {
            let mut vis = full[k][t].clone();
            for later in full.iter().skip(k + 1) {
                let occluder = &later[t];
                for y in 0..h {
                    for x in 0..w {
                        if occluder.get(x, y) {
                            vis.set(x, y, false);
                        }
                    }
                }
            }
            visible[k].push(vis);
        }
    }

    // Frames: top-most surface intensity plus one noise draw per pixel,
    // snapped to the 8-bit lattice so the PGM round trip is exact.
    let mut frames = Vec::with_capacity(n_frames);
    for t in 0..n_frames {
        let mut data = vec![0.0f32; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut base = cfg.background_intensity;
                for (k, vis) in visible.iter().enumerate() {
                    if vis[t].get(x, y) {
                        base = cfg.objects[k].intensity;
                    }
                }
                let noise = rng.random_range(-cfg.noise_amp..=cfg.noise_amp);
                let value = (base + noise).clamp(0.0, 1.0);
                data[y * w + x] = ((value * 255.0).round() / 255.0) as f32;
            }
        }
        frames.push(Frame::new(w, h, 1, data)?);
    }

    // Flow t -> t+1 from frame-t occupancy; backward flow (on frame t+1,
    // estimating t+1 -> t) from frame-(t+1) occupancy.
    let mut flows = Vec::with_capacity(n_frames - 1);
    let mut backward = Vec::with_capacity(n_frames - 1);
    for t in 0..n_frames - 1 {
        let mut fwd = FlowField::zeros(w, h);
        let mut bwd = FlowField::zeros(w, h);
        for i in 0..w * h {
            fwd.u[i] = cfg.background_velocity.0 as f32;
            fwd.v[i] = cfg.background_velocity.1 as f32;
            bwd.u[i] = -cfg.background_velocity.0 as f32;
            bwd.v[i] = -cfg.background_velocity.1 as f32;
        }
        for (k, obj) in cfg.objects.iter().enumerate() {
            // Exact per-frame displacement (equals velocity for constant motion).
            let du = (obj.center_at(t + 1).0 - obj.center_at(t).0) as f32;
            let dv = (obj.center_at(t + 1).1 - obj.center_at(t).1) as f32;
            for y in 0..h {
                for x in 0..w {
                    if visible[k][t].get(x, y) {
                        fwd.u[y * w + x] = du;
                        fwd.v[y * w + x] = dv;
                    }
                    if visible[k][t + 1].get(x, y) {
                        bwd.u[y * w + x] = -du;
                        bwd.v[y * w + x] = -dv;
                    }
                }
            }
        }
        flows.push(fwd);
        backward.push(bwd);
    }

    let mut gt_tubes = Vec::with_capacity(cfg.objects.len());
    for masks in visible {
        gt_tubes.push(Tube::new(0, masks)?);
    }

    Ok(Scene {
        frames,
        flows,
        backward_flows: backward,
        gt_tubes,
        seed: cfg.seed,
    })
}

/// Canonical desk-scale scenes used by the CLI presets and the test suites.
pub mod presets {
    use super::*;

    /// One 24x16 rectangle moving at (2, 0) for 20 frames on a 128x128 canvas.
    pub fn single_rect(seed: u64) -> SynthConfig {
        SynthConfig {
            width: 128,
            height: 128,
            frame_count: 20,
            seed,
            noise_amp: 0.1,
            background_intensity: 0.3,
            background_velocity: (0.0, 0.0),
            objects: vec![ObjectSpec {
                shape: ShapeKind::Rect,
                size: (24.0, 16.0),
                center: (40.0, 64.0),
                velocity: (2.0, 0.0),
                intensity: 0.75,
            }],
        }
    }

    /// Two rectangles with opposite horizontal velocities, vertically apart.
    pub fn two_objects(seed: u64) -> SynthConfig {
        SynthConfig {
            width: 128,
            height: 128,
            frame_count: 20,
            seed,
            noise_amp: 0.1,
            background_intensity: 0.3,
            background_velocity: (0.0, 0.0),
            objects: vec![
                ObjectSpec {
                    shape: ShapeKind::Rect,
                    size: (24.0, 16.0),
                    center: (40.0, 36.0),
                    velocity: (2.0, 0.0),
                    intensity: 0.75,
                },
                ObjectSpec {
                    shape: ShapeKind::Ellipse,
                    size: (26.0, 18.0),
                    center: (88.0, 92.0),
                    velocity: (-2.0, 0.0),
                    intensity: 0.9,
                },
            ],
        }
    }
}
