//! Proposal and tube scoring.
//!
//! The built-in scorer is center-surround saliency on flow magnitude: mean
//! magnitude inside the box minus mean magnitude in a surrounding ring (the
//! box dilated by ceil(max side / 2), clipped, minus the box), each mean
//! normalized by the frame's 95th-percentile magnitude (nearest-rank) and
//! clamped to [0,1], giving a score in [-1,1]. When fewer than 5% of the
//! pixels move the 95th percentile is zero; the normalizer then falls back to
//! the maximum magnitude, and a fully static frame scores 0. An external
//! scorer reads precomputed per-box scores from JSON so a trained model can
//! be plugged in without code changes (note: such scores are typically in
//! [0,1] rather than [-1,1]; ranking only needs the order). Tube scores are
//! the sum of per-frame box scores across the lifespan, biasing toward longer
//! tubes; mean aggregation is available for ablation.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mops::Proposal;
use crate::tubes::Tube;
use crate::videoio::{BoundingBox, FlowField};

/// Center-surround saliency of a box on one flow field.
pub fn center_surround(flow: &FlowField, bbox: BoundingBox) -> Result<f64> {
    if bbox.x1 >= flow.width || bbox.y1 >= flow.height {
        return Err(Error::InvalidArgument("box out of bounds".into()));
    }
    let mags: Vec<f64> = (0..flow.width * flow.height)
        .map(|i| (flow.u[i] as f64).hypot(flow.v[i] as f64))
        .collect();
    let p95 = percentile95(&mags);
    Ok(center_surround_on(
        &mags,
        p95,
        flow.width,
        flow.height,
        bbox,
    ))
}

/// Nearest-rank 95th percentile.
fn percentile95(mags: &[f64]) -> f64 {
    let mut sorted = mags.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let rank = ((0.95 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

fn center_surround_on(mags: &[f64], p95: f64, w: usize, h: usize, bbox: BoundingBox) -> f64 {
    let norm = if p95 > 1e-12 {
        p95
    } else {
        // degenerate sparse motion: fall back to the maximum magnitude
        let max = mags.iter().fold(0.0f64, |a, b| a.max(*b));
        if max <= 1e-12 {
            return 0.0;
        }
        max
    };
    let mut inner_sum = 0.0;
    for y in bbox.y0..=bbox.y1 {
        for x in bbox.x0..=bbox.x1 {
            inner_sum += mags[y * w + x];
        }
    }
    let inner_mean = inner_sum / bbox.area() as f64;

    let dilation = bbox.width().max(bbox.height()).div_ceil(2);
    let ring = bbox.dilated(dilation, w, h);
    let mut ring_sum = 0.0;
    let mut ring_count = 0usize;
    for y in ring.y0..=ring.y1 {
        for x in ring.x0..=ring.x1 {
            if !bbox.contains(x, y) {
                ring_sum += mags[y * w + x];
                ring_count += 1;
            }
        }
    }
    let surround_mean = if ring_count == 0 {
        0.0
    } else {
        ring_sum / ring_count as f64
    };
    (inner_mean / norm).min(1.0) - (surround_mean / norm).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    Sum,
    Mean,
}

/// Pluggable per-box scorer: the center-surround baseline over the video's
/// flow fields, or precomputed external scores.
pub enum Scorer<'a> {
    CenterSurround {
        flows: &'a [FlowField],
        cache: std::cell::RefCell<HashMap<usize, (Vec<f64>, f64)>>,
    },
    External(ExternalScores),
}

impl<'a> Scorer<'a> {
    pub fn center_surround(flows: &'a [FlowField]) -> Self {
        Scorer::CenterSurround {
            flows,
            cache: std::cell::RefCell::new(HashMap::new()),
        }
    }

    /// Score a box at a frame. Frames beyond the last flow field reuse the
    /// final flow (videos have one fewer flow than frames).
    pub fn score_box(&self, frame: usize, bbox: BoundingBox) -> Result<f64> {
        match self {
            Scorer::CenterSurround { flows, cache } => {
                if flows.is_empty() {
                    return Err(Error::InvalidArgument("no flow fields to score on".into()));
                }
                let f = frame.min(flows.len() - 1);
                let flow = &flows[f];
                if bbox.x1 >= flow.width || bbox.y1 >= flow.height {
                    return Err(Error::InvalidArgument("box out of bounds".into()));
                }
                let mut cache = cache.borrow_mut();
                let (mags, p95) = cache.entry(f).or_insert_with(|| {
                    let mags: Vec<f64> = (0..flow.width * flow.height)
                        .map(|i| (flow.u[i] as f64).hypot(flow.v[i] as f64))
                        .collect();
                    let p95 = percentile95(&mags);
                    (mags, p95)
                });
                Ok(center_surround_on(
                    mags,
                    *p95,
                    flow.width,
                    flow.height,
                    bbox,
                ))
            }
            Scorer::External(scores) => scores.lookup(frame, bbox),
        }
    }
}

/// Precomputed per-box scores keyed by (frame, box).
pub struct ExternalScores {
    map: HashMap<(usize, BoundingBox), f64>,
}

#[derive(Serialize, Deserialize)]
struct ExternalScoreRecord {
    frame: usize,
    #[serde(rename = "box")]
    bbox: BoundingBox,
    score: f64,
}

impl ExternalScores {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let records: Vec<ExternalScoreRecord> =
            serde_json::from_str(&json).map_err(|e| Error::format(path, e.to_string()))?;
        let mut map = HashMap::with_capacity(records.len());
        for r in records {
            if map.insert((r.frame, r.bbox), r.score).is_some() {
                return Err(Error::format(
                    path,
                    format!(
                        "duplicate score entry for frame {} box {:?}",
                        r.frame, r.bbox
                    ),
                ));
            }
        }
        Ok(ExternalScores { map })
    }

    fn lookup(&self, frame: usize, bbox: BoundingBox) -> Result<f64> {
        self.map.get(&(frame, bbox)).copied().ok_or_else(|| {
            Error::InvalidArgument(format!(
                "external score file does not cover frame {frame} box {bbox:?}"
            ))
        })
    }
}

/// Aggregate a tube's per-frame box scores across its lifespan.
pub fn score_tube(tube: &Tube, scorer: &Scorer, aggregate: Aggregate) -> Result<f64> {
    let mut sum = 0.0;
    for frame in tube.frames() {
        sum += scorer.score_box(frame, tube.box_at(frame).unwrap())?;
    }
    Ok(match aggregate {
        Aggregate::Sum => sum,
        Aggregate::Mean => sum / tube.span_len() as f64,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct DiversifyParams {
    pub enabled: bool,
    /// Suppression strength: the selection score of a candidate is its score
    /// scaled by (1 - gamma * max IoU with the already selected tubes).
    pub gamma: f64,
}

impl Default for DiversifyParams {
    fn default() -> Self {
        DiversifyParams {
            enabled: true,
            gamma: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedItem {
    /// Index into the input pool.
    pub tube_index: usize,
    /// The tube's aggregate score.
    pub score: f64,
    /// The score at selection time (equals `score` without diversification).
    pub selection_score: f64,
}

/// A ranking of the input pool: a permutation with scores attached.
#[derive(Debug, Clone)]
pub struct RankedList {
    pub items: Vec<RankedItem>,
    pub diversified: bool,
}

/// Score and order a tube pool. Plain ranking sorts by score with ties broken
/// by earlier span start, then larger pixel volume, then index. Diversified
/// ranking greedily picks the tube maximizing score * (1 - gamma * maxIoU to
/// the already selected), same tie-breaking.
pub fn rank(
    pool: &mut [Tube],
    scorer: &Scorer,
    aggregate: Aggregate,
    diversify: &DiversifyParams,
) -> Result<RankedList> {
    if pool.is_empty() {
        return Err(Error::InvalidArgument("empty tube pool".into()));
    }
    for tube in pool.iter_mut() {
        tube.score = score_tube(tube, scorer, aggregate)?;
    }
    let volumes: Vec<usize> = pool.iter().map(|t| t.volume()).collect();
    // tie-break key: earlier span start, larger volume, smaller index
    let beats = |a_score: f64, a: usize, b_score: f64, b: usize, pool: &[Tube]| -> bool {
        match a_score.total_cmp(&b_score) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => {
                (pool[a].first_frame(), std::cmp::Reverse(volumes[a]), a)
                    < (pool[b].first_frame(), std::cmp::Reverse(volumes[b]), b)
            }
        }
    };

    if !diversify.enabled || diversify.gamma == 0.0 {
        let mut order: Vec<usize> = (0..pool.len()).collect();
        order.sort_by(|&a, &b| {
            pool[b]
                .score
                .total_cmp(&pool[a].score)
                .then_with(|| pool[a].first_frame().cmp(&pool[b].first_frame()))
                .then_with(|| volumes[b].cmp(&volumes[a]))
                .then_with(|| a.cmp(&b))
        });
        let items = order
            .into_iter()
            .map(|i| RankedItem {
                tube_index: i,
                score: pool[i].score,
                selection_score: pool[i].score,
            })
            .collect();
        return Ok(RankedList {
            items,
            diversified: false,
        });
    }

    let n = pool.len();
    let mut max_iou = vec![0.0f64; n];
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut items = Vec::with_capacity(n);
    while !remaining.is_empty() {
        let mut best_pos = 0usize;
        let mut best_score =
            pool[remaining[0]].score * (1.0 - diversify.gamma * max_iou[remaining[0]]);
        for (pos, &i) in remaining.iter().enumerate().skip(1) {
            let adjusted = pool[i].score * (1.0 - diversify.gamma * max_iou[i]);
            if beats(adjusted, i, best_score, remaining[best_pos], pool) {
                best_score = adjusted;
                best_pos = pos;
            }
        }
        let chosen = remaining.swap_remove(best_pos);
        items.push(RankedItem {
            tube_index: chosen,
            score: pool[chosen].score,
            selection_score: best_score,
        });
        for &i in &remaining {
            let iou = crate::metrics::tube_iou(&pool[i], &pool[chosen])?;
            max_iou[i] = max_iou[i].max(iou);
        }
    }
    Ok(RankedList {
        items,
        diversified: true,
    })
}

/// Keep the `keep_top` best-scoring proposals per frame (box scored at the
/// proposal's own frame); survivors keep their original relative order.
pub fn filter_proposals(
    proposals: &[Proposal],
    scorer: &Scorer,
    keep_top: usize,
) -> Result<Vec<Proposal>> {
    if keep_top == 0 {
        return Err(Error::InvalidArgument("keep_top must be >= 1".into()));
    }
    let mut by_frame: std::collections::BTreeMap<usize, Vec<(usize, f64)>> =
        std::collections::BTreeMap::new();
    for (i, p) in proposals.iter().enumerate() {
        let score = scorer.score_box(p.frame_index, p.bbox)?;
        by_frame.entry(p.frame_index).or_default().push((i, score));
    }
    let mut keep = vec![false; proposals.len()];
    for scored in by_frame.values_mut() {
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for (i, _) in scored.iter().take(keep_top) {
            keep[*i] = true;
        }
    }
    Ok(proposals
        .iter()
        .enumerate()
        .filter(|(i, _)| keep[*i])
        .map(|(_, p)| p.clone())
        .collect())
}
