//! Random-walker label propagation on the trajectory affinity graph.
//!
//! A per-frame proposal marks every trajectory alive at its frame as
//! foreground or background; the remaining trajectories are unlabeled. The
//! relaxed labeling x in [0,1]^n minimizes (1/2) x' L x subject to the marked
//! values, which makes x harmonic on the unlabeled set: L_U x_U = -L_MU' x_M.
//! [`solve_exact`] solves that system with conjugate gradients;
//! [`diffuse`] approximates it by iterating x <- Diag(A1)^-1 A x and
//! re-clamping the marked labels each step, whose fixed point equals the
//! exact solution. Components containing no marked node are assigned
//! background (0) and flagged. [`spectral_clusters`] discretizes the spectral
//! embedding of the same affinities at several cluster counts to build the
//! multiscale trajectory-cluster pool.

mod solver;
mod spectral;

pub use solver::{diffuse, solve_exact};
pub use spectral::{spectral_clusters, SpectralPool};

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mops::Proposal;
use crate::trajectories::TrajectorySet;

/// Soft trajectory labels plus the marked foreground/background id sets.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelAssignment {
    /// Per-trajectory label in [0,1]; 1 on foreground marks, 0 on background.
    pub x: Vec<f64>,
    pub marked_fg: Vec<u32>,
    pub marked_bg: Vec<u32>,
    /// Number of nodes in components with no marked node (assigned 0).
    pub unreachable: usize,
}

impl LabelAssignment {
    /// Initialize x to 1 / 0 / 0.5 for foreground / background / unlabeled.
    pub fn new(n: usize, mut marked_fg: Vec<u32>, mut marked_bg: Vec<u32>) -> Result<Self> {
        marked_fg.sort_unstable();
        marked_fg.dedup();
        marked_bg.sort_unstable();
        marked_bg.dedup();
        if marked_fg.iter().any(|i| *i as usize >= n) || marked_bg.iter().any(|i| *i as usize >= n)
        {
            return Err(Error::InvalidArgument("marked id out of range".into()));
        }
        let mut x = vec![0.5; n];
        for &i in &marked_fg {
            x[i as usize] = 1.0;
        }
        for &i in &marked_bg {
            if x[i as usize] == 1.0 {
                return Err(Error::InvalidArgument(format!(
                    "trajectory {i} marked both foreground and background"
                )));
            }
            x[i as usize] = 0.0;
        }
        Ok(LabelAssignment {
            x,
            marked_fg,
            marked_bg,
            unreachable: 0,
        })
    }

    /// Marked = foreground union background.
    pub fn marked_flags(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &i in self.marked_fg.iter().chain(self.marked_bg.iter()) {
            m[i as usize] = true;
        }
        m
    }

    /// True when one of the marked classes is empty (constant solutions).
    pub fn is_degenerate(&self) -> bool {
        self.marked_fg.is_empty() || self.marked_bg.is_empty()
    }
}

/// A group of trajectories: the thresholded support of a soft labeling or one
/// cell of a spectral discretization.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryCluster {
    pub member_ids: Vec<u32>,
    pub soft_labels: Vec<f64>,
    /// Index of the generating proposal, when the cluster came from one.
    pub source_proposal: Option<usize>,
}

impl TrajectoryCluster {
    /// Members are the trajectories with soft label >= threshold.
    pub fn from_soft_labels(
        soft_labels: Vec<f64>,
        threshold: f64,
        source_proposal: Option<usize>,
    ) -> Option<Self> {
        let member_ids: Vec<u32> = soft_labels
            .iter()
            .enumerate()
            .filter(|(_, v)| **v >= threshold)
            .map(|(i, _)| i as u32)
            .collect();
        if member_ids.is_empty() {
            return None;
        }
        Some(TrajectoryCluster {
            member_ids,
            soft_labels,
            source_proposal,
        })
    }
}

/// Mark trajectories from a proposal: alive at the proposal frame and inside
/// the mask (rounded position) is foreground, alive outside is background.
pub fn mark_from_proposal(proposal: &Proposal, ts: &TrajectorySet) -> Result<LabelAssignment> {
    let frame = proposal.frame_index;
    let mut fg = Vec::new();
    let mut bg = Vec::new();
    for traj in ts.iter() {
        let Some((x, y)) = traj.point_at(frame) else {
            continue;
        };
        let px = (x.round() as usize).min(ts.width - 1);
        let py = (y.round() as usize).min(ts.height - 1);
        if proposal.mask.get(px, py) {
            fg.push(traj.id);
        } else {
            bg.push(traj.id);
        }
    }
    if fg.is_empty() && bg.is_empty() {
        return Err(Error::UnmarkableProposal { frame });
    }
    LabelAssignment::new(ts.len(), fg, bg)
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct SoftLabelRecord {
    proposal_id: usize,
    x: Vec<f64>,
}

/// Append one `{proposalId, x}` JSON line per labeling.
pub fn save_soft_labels(
    path: impl AsRef<Path>,
    labelings: &[(usize, &LabelAssignment)],
) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for (proposal_id, la) in labelings {
        let record = SoftLabelRecord {
            proposal_id: *proposal_id,
            x: la.x.clone(),
        };
        let line =
            serde_json::to_string(&record).map_err(|e| Error::format(path, e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Cluster pool as a JSON list of member-id arrays.
pub fn save_cluster_pool(path: impl AsRef<Path>, clusters: &[TrajectoryCluster]) -> Result<()> {
    let path = path.as_ref();
    let pool: Vec<&Vec<u32>> = clusters.iter().map(|c| &c.member_ids).collect();
    let json = serde_json::to_string(&pool).map_err(|e| Error::format(path, e.to_string()))?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load_cluster_pool(path: impl AsRef<Path>) -> Result<Vec<TrajectoryCluster>> {
    let path = path.as_ref();
    let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let pool: Vec<Vec<u32>> =
        serde_json::from_str(&json).map_err(|e| Error::format(path, e.to_string()))?;
    Ok(pool
        .into_iter()
        .map(|member_ids| TrajectoryCluster {
            member_ids,
            soft_labels: Vec::new(),
            source_proposal: None,
        })
        .collect())
}
