//! Per-frame boundary probability maps.
//!
//! Motion boundaries come from a Scharr 3x3 derivative of the optical-flow
//! magnitude, squashed to [0,1] with s(g) = 1 - exp(-g / sigma). Static image
//! boundaries apply the same operator to pixel intensity. No preprocessing is
//! applied to the magnitude before differentiation. Optional non-maximum
//! suppression thins the map along the gradient direction; the default keeps
//! soft strengths since geodesic distances consume them directly.

use crate::error::Result;
use crate::videoio::{FlowField, Frame};

#[derive(Debug, Clone, Copy)]
pub struct BoundaryParams {
    /// Squashing scale sigma: strength = 1 - exp(-gradient / sigma).
    pub sigma: f64,
    /// Thin the map by non-maximum suppression along the gradient direction.
    pub nms: bool,
}

impl Default for BoundaryParams {
    fn default() -> Self {
        BoundaryParams {
            sigma: 2.0,
            nms: false,
        }
    }
}

/// Per-pixel boundary strength in [0,1], same shape as its source frame.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMap {
    pub width: usize,
    pub height: usize,
    pub strength: Vec<f64>,
}

impl BoundaryMap {
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.strength[y * self.width + x]
    }

    pub fn max_strength(&self) -> f64 {
        self.strength.iter().fold(0.0, |a, b| a.max(*b))
    }

    /// Quantized 8-bit view for PGM export. Lossy: the pipeline itself passes
    /// full-precision maps between stages.
    pub fn to_gray8(&self) -> Vec<u8> {
        self.strength
            .iter()
            .map(|s| (s * 255.0).round() as u8)
            .collect()
    }

    pub fn from_gray8(width: usize, height: usize, data: &[u8]) -> Self {
        BoundaryMap {
            width,
            height,
            strength: data.iter().map(|b| *b as f64 / 255.0).collect(),
        }
    }
}

/// Boundary map of the flow-magnitude field.
pub fn motion_boundaries(flow: &FlowField, params: &BoundaryParams) -> Result<BoundaryMap> {
    let magnitude: Vec<f64> = (0..flow.width * flow.height)
        .map(|i| (flow.u[i] as f64).hypot(flow.v[i] as f64))
        .collect();
    Ok(gradient_map(&magnitude, flow.width, flow.height, params))
}

/// Boundary map of the intensity field (static edges).
pub fn image_boundaries(frame: &Frame, params: &BoundaryParams) -> Result<BoundaryMap> {
    let mut intensity = Vec::with_capacity(frame.width * frame.height);
    for y in 0..frame.height {
        for x in 0..frame.width {
            intensity.push(frame.intensity(x, y) as f64);
        }
    }
    Ok(gradient_map(&intensity, frame.width, frame.height, params))
}

fn gradient_map(field: &[f64], w: usize, h: usize, params: &BoundaryParams) -> BoundaryMap {
    // Scharr 3x3, normalized so a unit ramp yields gradient 1. Borders clamp.
    let clamp = |x: i64, hi: usize| x.clamp(0, hi as i64 - 1) as usize;
    let sample = |x: i64, y: i64| field[clamp(y, h) * w + clamp(x, w)];
    let mut gx = vec![0.0f64; w * h];
    let mut gy = vec![0.0f64; w * h];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let i = y as usize * w + x as usize;
            gx[i] = (3.0 * (sample(x + 1, y - 1) - sample(x - 1, y - 1))
                + 10.0 * (sample(x + 1, y) - sample(x - 1, y))
                + 3.0 * (sample(x + 1, y + 1) - sample(x - 1, y + 1)))
                / 32.0;
            gy[i] = (3.0 * (sample(x - 1, y + 1) - sample(x - 1, y - 1))
                + 10.0 * (sample(x, y + 1) - sample(x, y - 1))
                + 3.0 * (sample(x + 1, y + 1) - sample(x + 1, y - 1)))
                / 32.0;
        }
    }
    let mut strength: Vec<f64> = gx
        .iter()
        .zip(&gy)
        .map(|(a, b)| 1.0 - (-a.hypot(*b) / params.sigma).exp())
        .collect();
    if params.nms {
        strength = non_max_suppress(&strength, &gx, &gy, w, h);
    }
    BoundaryMap {
        width: w,
        height: h,
        strength,
    }
}

/// Keep a pixel only if its strength is not below both neighbors along the
/// (quantized) gradient direction.
fn non_max_suppress(strength: &[f64], gx: &[f64], gy: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let (dx, dy) = quantized_direction(gx[i], gy[i]);
            let probe = |ox: i64, oy: i64| -> f64 {
                let (px, py) = (x as i64 + ox, y as i64 + oy);
                if px < 0 || px >= w as i64 || py < 0 || py >= h as i64 {
                    0.0
                } else {
                    strength[py as usize * w + px as usize]
                }
            };
            if strength[i] >= probe(dx, dy) && strength[i] >= probe(-dx, -dy) {
                out[i] = strength[i];
            }
        }
    }
    out
}

fn quantized_direction(gx: f64, gy: f64) -> (i64, i64) {
    if gx == 0.0 && gy == 0.0 {
        return (1, 0);
    }
    let angle = gy.atan2(gx);
    let sector = ((angle / std::f64::consts::FRAC_PI_4).round() as i64).rem_euclid(8);
    match sector {
        0 | 4 => (1, 0),
        1 | 5 => (1, 1),
        2 | 6 => (0, 1),
        _ => (1, -1),
    }
}
