//! Figure-ground segment proposals from geodesic distances on boundary maps.
//!
//! The geodesic distance from a seed set is a multi-source Dijkstra over the
//! 4-connected pixel grid with edge cost eps + (strength(p) + strength(q))/2.
//! A pixel is foreground when it is strictly closer to the foreground seeds
//! than to the background seeds (ties go to background). Proposal generation
//! places one foreground seed per jittered grid cell against border
//! background seeds, drops empty masks and removes near-duplicates.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::boundaries::BoundaryMap;
use crate::error::{Error, Result};
use crate::videoio::{BoundingBox, MaskFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProposalSource {
    Motion,
    Static,
}

/// A per-frame figure-ground segment with its detection frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub mask: MaskFrame,
    pub frame_index: usize,
    pub source: ProposalSource,
    pub bbox: BoundingBox,
}

impl Proposal {
    pub fn new(mask: MaskFrame, frame_index: usize, source: ProposalSource) -> Result<Self> {
        let bbox = mask
            .tight_bbox()
            .ok_or_else(|| Error::InvalidArgument("proposal mask is empty".into()))?;
        Ok(Proposal {
            mask,
            frame_index,
            source,
            bbox,
        })
    }
}

/// Foreground and background seed pixels; disjoint, in bounds, non-empty.
#[derive(Debug, Clone)]
pub struct SeedSet {
    pub fg: Vec<(usize, usize)>,
    pub bg: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Copy)]
pub struct ProposalParams {
    pub num_seeds: usize,
    pub dedup_threshold: f64,
    /// Strictly positive floor of the per-step edge cost.
    pub eps: f64,
}

impl Default for ProposalParams {
    fn default() -> Self {
        ProposalParams {
            num_seeds: 64,
            dedup_threshold: 0.95,
            eps: 1e-3,
        }
    }
}

#[derive(PartialEq)]
struct HeapItem {
    cost: f64,
    index: u32,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (cost, index)
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Multi-source geodesic distance over the boundary grid; all distances are
/// finite since edge costs are bounded and the grid is connected.
pub fn geodesic_distance(
    boundary: &BoundaryMap,
    seeds: &[(usize, usize)],
    eps: f64,
) -> Result<Vec<f64>> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("seed list is empty".into()));
    }
    if eps <= 0.0 {
        return Err(Error::InvalidArgument("eps must be positive".into()));
    }
    let (w, h) = (boundary.width, boundary.height);
    for &(x, y) in seeds {
        if x >= w || y >= h {
            return Err(Error::InvalidArgument(format!(
                "seed ({x},{y}) out of bounds"
            )));
        }
    }
    let mut dist = vec![f64::INFINITY; w * h];
    let mut heap = BinaryHeap::new();
    for &(x, y) in seeds {
        let i = y * w + x;
        if dist[i] > 0.0 {
            dist[i] = 0.0;
            heap.push(HeapItem {
                cost: 0.0,
                index: i as u32,
            });
        }
    }
    while let Some(HeapItem { cost, index }) = heap.pop() {
        let i = index as usize;
        if cost > dist[i] {
            continue;
        }
        let (x, y) = (i % w, i / w);
        let here = boundary.strength[i];
        let mut relax = |nx: usize, ny: usize, heap: &mut BinaryHeap<HeapItem>| {
            let j = ny * w + nx;
            let step = eps + 0.5 * (here + boundary.strength[j]);
            let next = cost + step;
            if next < dist[j] {
                dist[j] = next;
                heap.push(HeapItem {
                    cost: next,
                    index: j as u32,
                });
            }
        };
        if x > 0 {
            relax(x - 1, y, &mut heap);
        }
        if x + 1 < w {
            relax(x + 1, y, &mut heap);
        }
        if y > 0 {
            relax(x, y - 1, &mut heap);
        }
        if y + 1 < h {
            relax(x, y + 1, &mut heap);
        }
    }
    Ok(dist)
}

/// Foreground mask: pixels strictly closer to the fg seeds than the bg seeds.
pub fn figure_ground(boundary: &BoundaryMap, seeds: &SeedSet, eps: f64) -> Result<MaskFrame> {
    if seeds.fg.is_empty() || seeds.bg.is_empty() {
        return Err(Error::InvalidArgument("seed set needs both classes".into()));
    }
    for f in &seeds.fg {
        if seeds.bg.contains(f) {
            return Err(Error::InvalidArgument(format!(
                "seed {f:?} in both classes"
            )));
        }
    }
    let d_fg = geodesic_distance(boundary, &seeds.fg, eps)?;
    let d_bg = geodesic_distance(boundary, &seeds.bg, eps)?;
    Ok(MaskFrame::from_fn(
        boundary.width,
        boundary.height,
        |x, y| {
            let i = y * boundary.width + x;
            d_fg[i] < d_bg[i]
        },
    ))
}

/// Border pixels in clockwise-ish scan order, subsampled every `step` pixels.
fn border_seeds(w: usize, h: usize, step: usize) -> Vec<(usize, usize)> {
    let mut border = Vec::new();
    for x in 0..w {
        border.push((x, 0));
    }
    for y in 1..h {
        border.push((w - 1, y));
    }
    if h > 1 {
        for x in (0..w - 1).rev() {
            border.push((x, h - 1));
        }
    }
    if w > 1 {
        for y in (1..h - 1).rev() {
            border.push((0, y));
        }
    }
    border.into_iter().step_by(step.max(1)).collect()
}

/// Generate figure-ground proposals: one per jittered grid seed, background
/// seeds fixed on the border, near-duplicates (IoU at or above the threshold)
/// dropped keeping the first. Deterministic for a fixed seed.
pub fn generate_proposals(
    boundary: &BoundaryMap,
    params: &ProposalParams,
    frame_index: usize,
    source: ProposalSource,
    seed: u64,
) -> Result<Vec<Proposal>> {
    if params.num_seeds == 0 {
        return Err(Error::InvalidArgument("num_seeds must be >= 1".into()));
    }
    let (w, h) = (boundary.width, boundary.height);
    let bg = border_seeds(w, h, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let side = (params.num_seeds as f64).sqrt().ceil() as usize;
    let cell_w = w as f64 / side as f64;
    let cell_h = h as f64 / side as f64;

    let mut kept: Vec<Proposal> = Vec::new();
    let mut placed = 0usize;
    'grid: for gy in 0..side {
        for gx in 0..side {
            if placed == params.num_seeds {
                break 'grid;
            }
            placed += 1;
            let cx = (gx as f64 + 0.5) * cell_w;
            let cy = (gy as f64 + 0.5) * cell_h;
            let jx = rng.random_range(-0.5..=0.5) * cell_w;
            let jy = rng.random_range(-0.5..=0.5) * cell_h;
            let sx = ((cx + jx).round().max(0.0) as usize).min(w - 1);
            let sy = ((cy + jy).round().max(0.0) as usize).min(h - 1);
            if bg.contains(&(sx, sy)) {
                continue; // grid seed landed on a border background seed
            }
            let seeds = SeedSet {
                fg: vec![(sx, sy)],
                bg: bg.clone(),
            };
            let mask = figure_ground(boundary, &seeds, params.eps)?;
            if mask.is_empty() {
                continue;
            }
            let duplicate = kept
                .iter()
                .any(|p| p.mask.iou(&mask) >= params.dedup_threshold);
            if duplicate {
                continue;
            }
            kept.push(Proposal::new(mask, frame_index, source)?);
        }
    }
    Ok(kept)
}
