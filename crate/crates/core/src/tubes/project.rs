//! Projection of trajectory clusters onto supervoxels.
//!
//! Each supervoxel gets a weight: the fraction of the trajectory points it
//! contains that belong to the cluster (zero when it contains no points).
//! Every pixel takes its supervoxel's weight and the tube keeps pixels at or
//! above the threshold. Trailing and leading empty frames are trimmed; if the
//! non-empty frames are not contiguous, the longest (earliest) run is kept so
//! the tube span stays contiguous.

use super::{SupervoxelSet, Tube};
use crate::error::{Error, Result};
use crate::randomwalk::TrajectoryCluster;
use crate::trajectories::TrajectorySet;
use crate::videoio::MaskFrame;

/// Per-supervoxel cluster-point fractions for one cluster.
pub fn supervoxel_weights(
    cluster: &TrajectoryCluster,
    ts: &TrajectorySet,
    svs: &SupervoxelSet,
) -> Vec<f64> {
    let mut total = vec![0u32; svs.count];
    let mut in_cluster = vec![0u32; svs.count];
    let member = {
        let mut m = vec![false; ts.len()];
        for &id in &cluster.member_ids {
            m[id as usize] = true;
        }
        m
    };
    for traj in ts.iter() {
        for (frame, &(x, y)) in traj.frames().zip(traj.points.iter()) {
            let px = (x.round() as usize).min(svs.width - 1);
            let py = (y.round() as usize).min(svs.height - 1);
            let sv = svs.frame_labels[frame][py * svs.width + px] as usize;
            total[sv] += 1;
            if member[traj.id as usize] {
                in_cluster[sv] += 1;
            }
        }
    }
    total
        .iter()
        .zip(&in_cluster)
        .map(|(t, c)| if *t == 0 { 0.0 } else { *c as f64 / *t as f64 })
        .collect()
}

/// Threshold the per-pixel supervoxel weights into a binary tube.
pub fn project_cluster(
    cluster: &TrajectoryCluster,
    ts: &TrajectorySet,
    svs: &SupervoxelSet,
    threshold: f64,
) -> Result<Tube> {
    if cluster.member_ids.is_empty() {
        return Err(Error::InvalidArgument("empty cluster".into()));
    }
    let weights = supervoxel_weights(cluster, ts, svs);
    let (w, h) = (svs.width, svs.height);

    let masks: Vec<MaskFrame> = svs
        .frame_labels
        .iter()
        .map(|labels| {
            MaskFrame::from_fn(w, h, |x, y| {
                weights[labels[y * w + x] as usize] >= threshold
            })
        })
        .collect();

    // longest contiguous run of non-empty frames, earliest on ties
    let mut best: Option<(usize, usize)> = None;
    let mut run_start = None;
    for (t, mask) in masks.iter().enumerate() {
        if !mask.is_empty() {
            run_start.get_or_insert(t);
        }
        let run_end = if mask.is_empty() { t } else { t + 1 };
        if let Some(s) = run_start {
            if mask.is_empty() || t + 1 == masks.len() {
                let len = run_end - s;
                if best.is_none_or(|(bs, be)| len > be - bs) {
                    best = Some((s, run_end));
                }
                run_start = None;
            }
        }
    }
    let Some((start, end)) = best else {
        return Err(Error::EmptyProjection);
    };
    Tube::new(start, masks[start..end].to_vec())
}
