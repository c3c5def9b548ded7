//! Evaluation of tube and proposal pools against ground truth.
//!
//! Tube IoU is voxel intersection over union across the union of spans.
//! `evaluate` reports, per ranked-pool prefix size: average best overlap,
//! area-weighted coverage, and detection rates at 50% and 70% IoU. Multiple
//! proposals may claim the same ground-truth item (best-overlap semantics, no
//! matching). `evaluate_per_frame` computes the anytime-best variants: per
//! ground-truth tube, the best single-frame mask IoU achieved by any
//! per-frame proposal over the tube's lifespan.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mops::Proposal;
use crate::tubes::Tube;

/// Voxel IoU of two tubes over the union of their spans.
pub fn tube_iou(a: &Tube, b: &Tube) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::InvalidArgument("tube dimensions differ".into()));
    }
    let first = a.first_frame().min(b.first_frame());
    let last = a.last_frame().max(b.last_frame());
    let mut inter = 0usize;
    let mut union = 0usize;
    for frame in first..=last {
        match (a.mask_at(frame), b.mask_at(frame)) {
            (Some(ma), Some(mb)) => {
                inter += ma.intersection_count(mb);
                union += ma.union_count(mb);
            }
            (Some(m), None) | (None, Some(m)) => union += m.count(),
            (None, None) => {}
        }
    }
    if union == 0 {
        return Ok(0.0);
    }
    Ok(inter as f64 / union as f64)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "camelCase")]
pub struct GtBest {
    pub gt_index: usize,
    pub best_iou: f64,
    /// Rank (position in the evaluated order) of the best proposal, when any
    /// overlap exists.
    pub best_rank: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "camelCase")]
pub struct CurvePoint {
    pub pool_size: usize,
    pub mean_best_iou: f64,
}

/// Metrics at the full pool plus the proposals-vs-quality curve.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "camelCase")]
pub struct EvalReport {
    pub per_gt: Vec<GtBest>,
    pub average_best_overlap: f64,
    pub coverage: f64,
    pub det50: f64,
    pub det70: f64,
    pub curve: Vec<CurvePoint>,
}

impl EvalReport {
    fn from_best(best: Vec<GtBest>, weights: &[f64], curve: Vec<CurvePoint>) -> EvalReport {
        let n = best.len() as f64;
        let average_best_overlap = best.iter().map(|b| b.best_iou).sum::<f64>() / n;
        let total_weight: f64 = weights.iter().sum();
        let coverage = best
            .iter()
            .zip(weights)
            .map(|(b, w)| b.best_iou * w)
            .sum::<f64>()
            / total_weight;
        let det50 = best.iter().filter(|b| b.best_iou >= 0.5).count() as f64 / n;
        let det70 = best.iter().filter(|b| b.best_iou >= 0.7).count() as f64 / n;
        EvalReport {
            per_gt: best,
            average_best_overlap,
            coverage,
            det50,
            det70,
            curve,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidArgument(format!("report serialization: {e}")))
    }

    /// CSV curve suitable for external plotting.
    pub fn write_curve_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("poolSize,meanBestIoU\n");
        for p in &self.curve {
            out.push_str(&format!("{},{}\n", p.pool_size, p.mean_best_iou));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Evaluate an ordered tube pool against ground-truth tubes at the given
/// prefix sizes. Aggregates are reported over the whole pool; the curve holds
/// the mean best IoU per prefix.
pub fn evaluate(pool: &[&Tube], gt: &[Tube], at_sizes: &[usize]) -> Result<EvalReport> {
    if gt.is_empty() {
        return Err(Error::InvalidArgument("no ground-truth tubes".into()));
    }
    // IoU of every (gt, pool) pair in rank order
    let mut iou = vec![vec![0.0f64; pool.len()]; gt.len()];
    for (g, gt_tube) in gt.iter().enumerate() {
        for (p, tube) in pool.iter().enumerate() {
            iou[g][p] = tube_iou(gt_tube, tube)?;
        }
    }
    let best_at = |size: usize| -> Vec<GtBest> {
        let size = size.min(pool.len());
        (0..gt.len())
            .map(|g| {
                let mut best = GtBest {
                    gt_index: g,
                    best_iou: 0.0,
                    best_rank: None,
                };
                for p in 0..size {
                    if iou[g][p] > best.best_iou {
                        best.best_iou = iou[g][p];
                        best.best_rank = Some(p);
                    }
                }
                best
            })
            .collect()
    };
    let curve = at_sizes
        .iter()
        .map(|&s| {
            let best = best_at(s);
            CurvePoint {
                pool_size: s,
                mean_best_iou: best.iter().map(|b| b.best_iou).sum::<f64>() / gt.len() as f64,
            }
        })
        .collect();
    let weights: Vec<f64> = gt.iter().map(|t| t.volume() as f64).collect();
    Ok(EvalReport::from_best(best_at(pool.len()), &weights, curve))
}

/// Anytime-best evaluation of per-frame proposals: per ground-truth tube, the
/// maximum single-frame mask IoU over its lifespan; the curve uses prefixes
/// of the given (ranked) proposal order. Ground-truth weights are tube
/// volumes.
pub fn evaluate_per_frame(
    proposals: &[Proposal],
    gt: &[Tube],
    at_sizes: &[usize],
) -> Result<EvalReport> {
    if gt.is_empty() {
        return Err(Error::InvalidArgument("no ground-truth tubes".into()));
    }
    let mut iou = vec![vec![0.0f64; proposals.len()]; gt.len()];
    for (g, gt_tube) in gt.iter().enumerate() {
        for (p, proposal) in proposals.iter().enumerate() {
            if let Some(gt_mask) = gt_tube.mask_at(proposal.frame_index) {
                if gt_mask.width() != proposal.mask.width()
                    || gt_mask.height() != proposal.mask.height()
                {
                    return Err(Error::InvalidArgument(
                        "proposal and ground-truth dimensions differ".into(),
                    ));
                }
                iou[g][p] = gt_mask.iou(&proposal.mask);
            }
        }
    }
    let best_at = |size: usize| -> Vec<GtBest> {
        let size = size.min(proposals.len());
        (0..gt.len())
            .map(|g| {
                let mut best = GtBest {
                    gt_index: g,
                    best_iou: 0.0,
                    best_rank: None,
                };
                for p in 0..size {
                    if iou[g][p] > best.best_iou {
                        best.best_iou = iou[g][p];
                        best.best_rank = Some(p);
                    }
                }
                best
            })
            .collect()
    };
    let curve = at_sizes
        .iter()
        .map(|&s| {
            let best = best_at(s);
            CurvePoint {
                pool_size: s,
                mean_best_iou: best.iter().map(|b| b.best_iou).sum::<f64>() / gt.len() as f64,
            }
        })
        .collect();
    let weights: Vec<f64> = gt.iter().map(|t| t.volume() as f64).collect();
    Ok(EvalReport::from_best(
        best_at(proposals.len()),
        &weights,
        curve,
    ))
}

/// Default log-spaced prefix sizes, 1 to 1024.
pub fn default_curve_sizes() -> Vec<usize> {
    (0..=10).map(|e| 1usize << e).collect()
}
