//! Frames, flow fields, masks, tubes: in-memory types and file formats.
//!
//! Formats: Middlebury `.flo` for flow, binary PGM (P5) for grayscale frames
//! and masks, PPM (P6) for color frames, a directory-plus-manifest container
//! for tubes, and a JSON scene manifest tying a sequence together.
//! Everything here is immutable after construction and safe to share across
//! threads.

mod flo;
mod manifest;
mod pgm;
pub mod synth;
mod tube_io;

pub use flo::{load_flow, save_flow};
pub use manifest::{load_scene, save_scene, SceneManifest};
pub use pgm::{
    load_frame, load_labels16, load_mask, save_frame, save_gray8, save_labels16, save_mask,
};
pub use synth::{synthesize, ObjectSpec, Scene, ShapeKind, SynthConfig};
pub use tube_io::{load_tube, save_tube, TubeManifest};

use crate::error::{Error, Result};

/// Inclusive axis-aligned bounding box in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BoundingBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl BoundingBox {
    pub fn new(x0: usize, y0: usize, x1: usize, y1: usize) -> Result<Self> {
        if x1 < x0 || y1 < y0 {
            return Err(Error::InvalidArgument(format!(
                "degenerate bounding box ({x0},{y0})-({x1},{y1})"
            )));
        }
        Ok(BoundingBox { x0, y0, x1, y1 })
    }

    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    /// Grow by `amount` on every side, clipped to a `width` x `height` frame.
    pub fn dilated(&self, amount: usize, width: usize, height: usize) -> BoundingBox {
        BoundingBox {
            x0: self.x0.saturating_sub(amount),
            y0: self.y0.saturating_sub(amount),
            x1: (self.x1 + amount).min(width - 1),
            y1: (self.y1 + amount).min(height - 1),
        }
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }
}

impl serde::Serialize for BoundingBox {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [self.x0, self.y0, self.x1, self.y1].serialize(s)
    }
}

impl<'de> serde::Deserialize<'de> for BoundingBox {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [x0, y0, x1, y1] = <[usize; 4]>::deserialize(d)?;
        BoundingBox::new(x0, y0, x1, y1).map_err(serde::de::Error::custom)
    }
}

/// A single image: grayscale (1 channel) or RGB (3 channels), row-major,
/// intensities in [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl Frame {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 || !(channels == 1 || channels == 3) {
            return Err(Error::InvalidArgument(format!(
                "bad frame shape {width}x{height}x{channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidArgument(format!(
                "frame data length {} != {}x{}x{}",
                data.len(),
                width,
                height,
                channels
            )));
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(Error::InvalidArgument(
                "frame intensities must be finite and in [0,1]".into(),
            ));
        }
        Ok(Frame {
            width,
            height,
            channels,
            data,
        })
    }

    /// Per-pixel intensity: the value for grayscale, the channel mean for RGB.
    pub fn intensity(&self, x: usize, y: usize) -> f32 {
        let base = (y * self.width + x) * self.channels;
        if self.channels == 1 {
            self.data[base]
        } else {
            (self.data[base] + self.data[base + 1] + self.data[base + 2]) / 3.0
        }
    }
}

/// Dense per-pixel displacement field (pixels, frame t -> t+1).
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    pub u: Vec<f32>,
    pub v: Vec<f32>,
}

impl FlowField {
    pub fn new(width: usize, height: usize, u: Vec<f32>, v: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 || u.len() != width * height || v.len() != width * height {
            return Err(Error::InvalidArgument(
                "flow field dimensions mismatch".into(),
            ));
        }
        if u.iter().chain(v.iter()).any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(
                "flow components must be finite".into(),
            ));
        }
        Ok(FlowField {
            width,
            height,
            u,
            v,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        FlowField {
            width,
            height,
            u: vec![0.0; width * height],
            v: vec![0.0; width * height],
        }
    }

    pub fn at(&self, x: usize, y: usize) -> (f32, f32) {
        let i = y * self.width + x;
        (self.u[i], self.v[i])
    }

    pub fn magnitude(&self, x: usize, y: usize) -> f64 {
        let (u, v) = self.at(x, y);
        (u as f64).hypot(v as f64)
    }

    /// Bilinearly interpolated flow at a subpixel position. The position must
    /// lie inside [0, width-1] x [0, height-1].
    pub fn sample(&self, x: f64, y: f64) -> (f64, f64) {
        let x0 = (x.floor().max(0.0) as usize).min(self.width.saturating_sub(2));
        let y0 = (y.floor().max(0.0) as usize).min(self.height.saturating_sub(2));
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let idx = |xx: usize, yy: usize| yy * self.width + xx;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let w00 = (1.0 - fx) * (1.0 - fy);
        let w10 = fx * (1.0 - fy);
        let w01 = (1.0 - fx) * fy;
        let w11 = fx * fy;
        let u = w00 * self.u[idx(x0, y0)] as f64
            + w10 * self.u[idx(x1, y0)] as f64
            + w01 * self.u[idx(x0, y1)] as f64
            + w11 * self.u[idx(x1, y1)] as f64;
        let v = w00 * self.v[idx(x0, y0)] as f64
            + w10 * self.v[idx(x1, y0)] as f64
            + w01 * self.v[idx(x0, y1)] as f64
            + w11 * self.v[idx(x1, y1)] as f64;
        (u, v)
    }
}

/// Per-frame binary foreground mask, stored as a packed bitset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskFrame {
    width: usize,
    height: usize,
    words: Vec<u64>,
}

impl MaskFrame {
    pub fn new(width: usize, height: usize) -> Self {
        let nwords = (width * height).div_ceil(64);
        MaskFrame {
            width,
            height,
            words: vec![0; nwords],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = MaskFrame::new(width, height);
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    m.set(x, y, true);
                }
            }
        }
        m
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        let bit = y * self.width + x;
        (self.words[bit / 64] >> (bit % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        let bit = y * self.width + x;
        if value {
            self.words[bit / 64] |= 1 << (bit % 64);
        } else {
            self.words[bit / 64] &= !(1 << (bit % 64));
        }
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    pub fn same_shape(&self, other: &MaskFrame) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn intersection_count(&self, other: &MaskFrame) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn union_count(&self, other: &MaskFrame) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a | b).count_ones() as usize)
            .sum()
    }

    /// 2-D intersection-over-union. Two empty masks have IoU 0.
    pub fn iou(&self, other: &MaskFrame) -> f64 {
        let union = self.union_count(other);
        if union == 0 {
            0.0
        } else {
            self.intersection_count(other) as f64 / union as f64
        }
    }

    /// Tight bounding box of the set pixels, or None when empty.
    pub fn tight_bbox(&self) -> Option<BoundingBox> {
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0usize, 0usize);
        let mut any = false;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    any = true;
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x);
                    y1 = y1.max(y);
                }
            }
        }
        any.then_some(BoundingBox { x0, y0, x1, y1 })
    }
}
