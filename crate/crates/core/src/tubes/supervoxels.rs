//! Supervoxels: superpixel labels smoothed in time.
//!
//! Region r at frame t is warped by the forward flow (nearest-pixel rounding)
//! and linked to the frame t+1 region r' holding the largest share of the
//! warped pixels. A link is accepted only when that share reaches the link
//! threshold and the pair is mutual-best, which makes links functional and
//! injective per frame step: supervoxels never merge or split. Chains of
//! linked regions form supervoxels; unlinked regions start new ones.

use std::collections::HashMap;
use std::path::Path;

use serde::Serialize;

use super::superpixels::Partition;
use crate::error::{Error, Result};
use crate::videoio::{save_labels16, FlowField};

/// A full-video supervoxel labeling: for every frame a dense label image, plus
/// the frame span of each supervoxel. Supervoxels partition every frame.
#[derive(Debug, Clone)]
pub struct SupervoxelSet {
    pub width: usize,
    pub height: usize,
    pub frame_labels: Vec<Vec<u32>>,
    pub count: usize,
    /// Inclusive [first, last] frame span per supervoxel id.
    pub spans: Vec<(usize, usize)>,
}

impl SupervoxelSet {
    pub fn label(&self, frame: usize, x: usize, y: usize) -> u32 {
        self.frame_labels[frame][y * self.width + x]
    }

    pub fn frame_count(&self) -> usize {
        self.frame_labels.len()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SupervoxelParams {
    /// Minimum warped-overlap ratio for a temporal link.
    pub link_threshold: f64,
}

impl Default for SupervoxelParams {
    fn default() -> Self {
        SupervoxelParams {
            link_threshold: 0.5,
        }
    }
}

pub fn build_supervoxels(
    partitions: &[Partition],
    flows: &[FlowField],
    params: &SupervoxelParams,
) -> Result<SupervoxelSet> {
    if partitions.is_empty() {
        return Err(Error::InvalidArgument("no partitions".into()));
    }
    if flows.len() + 1 != partitions.len() {
        return Err(Error::InvalidArgument(format!(
            "{} partitions need {} flows, got {}",
            partitions.len(),
            partitions.len() - 1,
            flows.len()
        )));
    }
    let (w, h) = (partitions[0].width, partitions[0].height);

    let mut frame_labels: Vec<Vec<u32>> = Vec::with_capacity(partitions.len());
    let mut spans: Vec<(usize, usize)> = Vec::new();

    // frame 0: every region starts a supervoxel
    let mut region_to_sv: Vec<u32> = (0..partitions[0].num_regions as u32).collect();
    spans.extend((0..partitions[0].num_regions).map(|_| (0usize, 0usize)));
    frame_labels.push(
        partitions[0]
            .labels
            .iter()
            .map(|r| region_to_sv[*r as usize])
            .collect(),
    );

    for t in 0..flows.len() {
        let cur = &partitions[t];
        let next = &partitions[t + 1];
        let flow = &flows[t];

        // warped-overlap counts: (region at t, region at t+1) -> pixels
        let mut counts: HashMap<(u32, u32), u32> = HashMap::new();
        let mut warp_total = vec![0u32; cur.num_regions];
        for y in 0..h {
            for x in 0..w {
                let r = cur.labels[y * w + x];
                let (u, v) = flow.at(x, y);
                let nx = (x as f32 + u).round() as i64;
                let ny = (y as f32 + v).round() as i64;
                if nx < 0 || nx >= w as i64 || ny < 0 || ny >= h as i64 {
                    continue;
                }
                warp_total[r as usize] += 1;
                let rn = next.labels[ny as usize * w + nx as usize];
                *counts.entry((r, rn)).or_insert(0) += 1;
            }
        }

        // best successor of each current region, best predecessor of each next
        // region, both by overlap count with ties to the smaller region id
        let mut best_succ: Vec<Option<(u32, u32)>> = vec![None; cur.num_regions];
        let mut best_pred: Vec<Option<(u32, u32)>> = vec![None; next.num_regions];
        let mut pairs: Vec<(&(u32, u32), &u32)> = counts.iter().collect();
        pairs.sort_unstable_by_key(|(k, _)| **k);
        for (&(r, rn), &c) in pairs {
            // ascending (r, rn) order makes ties resolve to the smaller id
            let succ = &mut best_succ[r as usize];
            if succ.is_none_or(|(bc, _)| c > bc) {
                *succ = Some((c, rn));
            }
            let pred = &mut best_pred[rn as usize];
            if pred.is_none_or(|(bc, _)| c > bc) {
                *pred = Some((c, r));
            }
        }

        let mut next_region_to_sv = vec![u32::MAX; next.num_regions];
        for r in 0..cur.num_regions {
            let Some((c, rn)) = best_succ[r] else {
                continue;
            };
            if warp_total[r] == 0 {
                continue;
            }
            let ratio = c as f64 / warp_total[r] as f64;
            let mutual = best_pred[rn as usize].map(|(_, br)| br as usize) == Some(r);
            if ratio >= params.link_threshold && mutual {
                let sv = region_to_sv[r];
                next_region_to_sv[rn as usize] = sv;
                spans[sv as usize].1 = t + 1;
            }
        }
        for rn in 0..next.num_regions {
            if next_region_to_sv[rn] == u32::MAX {
                next_region_to_sv[rn] = spans.len() as u32;
                spans.push((t + 1, t + 1));
            }
        }
        frame_labels.push(
            next.labels
                .iter()
                .map(|r| next_region_to_sv[*r as usize])
                .collect(),
        );
        region_to_sv = next_region_to_sv;
    }

    Ok(SupervoxelSet {
        width: w,
        height: h,
        frame_labels,
        count: spans.len(),
        spans,
    })
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ChainIndex {
    count: usize,
    spans: Vec<ChainSpan>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ChainSpan {
    id: usize,
    first_frame: usize,
    last_frame: usize,
}

/// Export per-frame 16-bit label PGMs plus a JSON chain index.
pub fn save_supervoxels(dir: impl AsRef<Path>, svs: &SupervoxelSet) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    if svs.count > u16::MAX as usize {
        return Err(Error::InvalidArgument(format!(
            "{} supervoxels exceed the 16-bit label range",
            svs.count
        )));
    }
    for (t, labels) in svs.frame_labels.iter().enumerate() {
        let labels16: Vec<u16> = labels.iter().map(|l| *l as u16).collect();
        save_labels16(
            dir.join(format!("frame_{t:04}.pgm")),
            svs.width,
            svs.height,
            &labels16,
        )?;
    }
    let index = ChainIndex {
        count: svs.count,
        spans: svs
            .spans
            .iter()
            .enumerate()
            .map(|(id, (a, b))| ChainSpan {
                id,
                first_frame: *a,
                last_frame: *b,
            })
            .collect(),
    };
    let path = dir.join("chains.json");
    let json =
        serde_json::to_string_pretty(&index).map_err(|e| Error::format(&path, e.to_string()))?;
    std::fs::write(&path, json).map_err(|e| Error::io(&path, e))
}
