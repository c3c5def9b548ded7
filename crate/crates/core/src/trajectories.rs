//! Dense point trajectories linked through optical flow.
//!
//! Trajectories are seeded on a stride grid in frame 0 and, in later frames,
//! at any grid cell not covered by a live trajectory. A trajectory at p in
//! frame t extends to p' = p + F_t(p) (bilinear flow interpolation) when p'
//! stays in bounds and the forward-backward consistency check passes:
//!
//!   ||F_t(p) + B_t(p')||^2 <= theta_abs + theta_rel (||F_t(p)||^2 + ||B_t(p')||^2)
//!
//! Otherwise it terminates at t. Trajectories shorter than two frames are
//! discarded. Coverage control is exact: when two live trajectories land in
//! the same grid cell the lower id keeps the cell and the other terminates.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::videoio::FlowField;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Trajectory {
    pub id: u32,
    pub start_frame: usize,
    /// One subpixel position per frame of life, length >= 2.
    pub points: Vec<(f64, f64)>,
}

impl Trajectory {
    pub fn last_frame(&self) -> usize {
        self.start_frame + self.points.len() - 1
    }

    pub fn alive_at(&self, frame: usize) -> bool {
        frame >= self.start_frame && frame <= self.last_frame()
    }

    pub fn point_at(&self, frame: usize) -> Option<(f64, f64)> {
        self.alive_at(frame)
            .then(|| self.points[frame - self.start_frame])
    }

    pub fn frames(&self) -> std::ops::Range<usize> {
        self.start_frame..self.start_frame + self.points.len()
    }
}

/// An immutable set of trajectories with dense ids 0..n-1.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet {
    trajectories: Vec<Trajectory>,
    pub frame_count: usize,
    pub width: usize,
    pub height: usize,
}

impl TrajectorySet {
    pub fn new(
        trajectories: Vec<Trajectory>,
        frame_count: usize,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        for (i, t) in trajectories.iter().enumerate() {
            if t.id as usize != i {
                return Err(Error::InvalidArgument(format!(
                    "trajectory ids must be dense, found {} at index {i}",
                    t.id
                )));
            }
            if t.points.len() < 2 {
                return Err(Error::InvalidArgument(
                    "trajectory shorter than 2 frames".into(),
                ));
            }
            if t.last_frame() >= frame_count {
                return Err(Error::InvalidArgument(
                    "trajectory outlives the video".into(),
                ));
            }
        }
        Ok(TrajectorySet {
            trajectories,
            frame_count,
            width,
            height,
        })
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn get(&self, id: u32) -> &Trajectory {
        &self.trajectories[id as usize]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Trajectory> {
        self.trajectories.iter()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TrackParams {
    /// Seeding grid stride in pixels.
    pub stride: usize,
    /// Absolute term of the forward-backward tolerance.
    pub fb_tol_abs: f64,
    /// Relative term of the forward-backward tolerance.
    pub fb_tol_rel: f64,
}

impl Default for TrackParams {
    fn default() -> Self {
        TrackParams {
            stride: 4,
            fb_tol_abs: 0.5,
            fb_tol_rel: 0.01,
        }
    }
}

/// Link forward/backward flow sequences into dense trajectories.
/// `backward_flows[t]` estimates frame t+1 -> t motion.
pub fn link_trajectories(
    forward_flows: &[FlowField],
    backward_flows: &[FlowField],
    params: &TrackParams,
) -> Result<TrajectorySet> {
    if forward_flows.is_empty() {
        return Err(Error::InvalidArgument(
            "need at least one flow field".into(),
        ));
    }
    if forward_flows.len() != backward_flows.len() {
        return Err(Error::InvalidArgument(format!(
            "forward ({}) and backward ({}) flow counts differ",
            forward_flows.len(),
            backward_flows.len()
        )));
    }
    let (w, h) = (forward_flows[0].width, forward_flows[0].height);
    let frame_count = forward_flows.len() + 1;
    let stride = params.stride.max(1);
    let cells_x = w.div_ceil(stride);
    let cells_y = h.div_ceil(stride);
    let cell_of = |x: f64, y: f64| -> usize {
        let cx = ((x as usize) / stride).min(cells_x - 1);
        let cy = ((y as usize) / stride).min(cells_y - 1);
        cy * cells_x + cx
    };

    // live trajectories as (builder index, current position)
    struct Builder {
        start_frame: usize,
        points: Vec<(f64, f64)>,
    }
    let mut builders: Vec<Builder> = Vec::new();
    let mut finished: Vec<usize> = Vec::new();
    let mut live: Vec<usize> = Vec::new();

    let seed_frame =
        |frame: usize, builders: &mut Vec<Builder>, live: &mut Vec<usize>, covered: &[bool]| {
            for cy in 0..cells_y {
                for cx in 0..cells_x {
                    if covered[cy * cells_x + cx] {
                        continue;
                    }
                    let x = (cx * stride).min(w - 1) as f64;
                    let y = (cy * stride).min(h - 1) as f64;
                    builders.push(Builder {
                        start_frame: frame,
                        points: vec![(x, y)],
                    });
                    live.push(builders.len() - 1);
                }
            }
        };

    seed_frame(0, &mut builders, &mut live, &vec![false; cells_x * cells_y]);

    for t in 0..frame_count - 1 {
        let fwd = &forward_flows[t];
        let bwd = &backward_flows[t];
        let mut next_live: Vec<usize> = Vec::with_capacity(live.len());
        let mut cell_owner: Vec<Option<usize>> = vec![None; cells_x * cells_y];

        for &b in &live {
            let (x, y) = *builders[b].points.last().unwrap();
            let (fu, fv) = fwd.sample(x, y);
            let (nx, ny) = (x + fu, y + fv);
            let in_bounds = nx >= 0.0 && nx <= (w - 1) as f64 && ny >= 0.0 && ny <= (h - 1) as f64;
            let mut extended = false;
            if in_bounds {
                let (bu, bv) = bwd.sample(nx, ny);
                let fb = (fu + bu).powi(2) + (fv + bv).powi(2);
                let budget =
                    params.fb_tol_abs + params.fb_tol_rel * (fu * fu + fv * fv + bu * bu + bv * bv);
                if fb <= budget {
                    let cell = cell_of(nx, ny);
                    if cell_owner[cell].is_none() {
                        cell_owner[cell] = Some(b);
                        builders[b].points.push((nx, ny));
                        next_live.push(b);
                        extended = true;
                    }
                }
            }
            if !extended {
                finished.push(b);
            }
        }

        // re-seed uncovered cells of frame t+1
        let covered: Vec<bool> = cell_owner.iter().map(|c| c.is_some()).collect();
        let before = builders.len();
        seed_frame(t + 1, &mut builders, &mut next_live, &covered);
        let _ = before;
        live = next_live;
    }
    finished.extend(live);
    finished.sort_unstable();

    let mut trajectories = Vec::new();
    for b in finished {
        let builder = &builders[b];
        if builder.points.len() >= 2 {
            trajectories.push(Trajectory {
                id: trajectories.len() as u32,
                start_frame: builder.start_frame,
                points: builder.points.clone(),
            });
        }
    }
    TrajectorySet::new(trajectories, frame_count, w, h)
}

/// Serialize as JSON lines: one record per trajectory.
pub fn save_trajectories(path: impl AsRef<Path>, ts: &TrajectorySet) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for t in ts.iter() {
        let line = serde_json::to_string(t).map_err(|e| Error::format(path, e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_trajectories(
    path: impl AsRef<Path>,
    frame_count: usize,
    width: usize,
    height: usize,
) -> Result<TrajectorySet> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut trajectories = Vec::new();
    for line in std::io::BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let t: Trajectory =
            serde_json::from_str(&line).map_err(|e| Error::format(path, e.to_string()))?;
        trajectories.push(t);
    }
    TrajectorySet::new(trajectories, frame_count, width, height)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::videoio::synth::{presets, synthesize};
    use tempfile::tempdir;

    #[test]
    fn exact_synthetic_flow_tracks_the_rectangle() {
        let mut cfg = presets::single_rect(21);
        cfg.frame_count = 8;
        let scene = synthesize(&cfg).unwrap();
        let ts = link_trajectories(&scene.flows, &scene.backward_flows, &TrackParams::default())
            .unwrap();
        assert!(!ts.is_empty());
        let gt = &scene.gt_tubes[0];
        let mask0 = gt.mask_at(0).unwrap();
        let mut object_trajs = 0;
        for t in ts.iter() {
            if t.start_frame != 0 {
                continue;
            }
            let (x0, y0) = t.points[0];
            if mask0.get(x0.round() as usize, y0.round() as usize) {
                object_trajs += 1;
                // full lifespan, moving (2, 0) per frame
                assert_eq!(t.points.len(), 8, "object trajectory terminated early");
                for k in 1..t.points.len() {
                    assert!((t.points[k].0 - t.points[k - 1].0 - 2.0).abs() < 1e-9);
                    assert!((t.points[k].1 - t.points[k - 1].1).abs() < 1e-9);
                }
            }
        }
        assert!(object_trajs >= 12, "{object_trajs}");
    }

    #[test]
    fn non_negated_backward_flow_kills_every_link() {
        let mut flow = FlowField::zeros(16, 16);
        flow.u.iter_mut().for_each(|u| *u = 3.0);
        let flows = vec![flow.clone(), flow.clone()];
        // backward equals forward (not negated): ||(6,0)||^2 = 36 > 0.5 + 0.01*18
        let ts = link_trajectories(&flows, &flows, &TrackParams::default()).unwrap();
        assert_eq!(ts.len(), 0);
    }

    #[test]
    fn mismatched_flow_counts_are_rejected() {
        let flow = FlowField::zeros(8, 8);
        let err = link_trajectories(
            &[flow.clone(), flow.clone()],
            &[flow],
            &TrackParams::default(),
        );
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    /// At least 95% of trajectories stay entirely inside one gt tube or
    /// entirely outside all of them.
    #[test]
    fn two_object_scene_trajectories_are_label_consistent() {
        let mut cfg = presets::two_objects(33);
        cfg.frame_count = 10;
        let scene = synthesize(&cfg).unwrap();
        let ts = link_trajectories(&scene.flows, &scene.backward_flows, &TrackParams::default())
            .unwrap();
        let mut consistent = 0usize;
        for t in ts.iter() {
            let mut labels = std::collections::BTreeSet::new();
            for (frame, &(x, y)) in t.frames().zip(t.points.iter()) {
                let (px, py) = (x.round() as usize, y.round() as usize);
                let mut label = 0usize; // background
                for (k, gt) in scene.gt_tubes.iter().enumerate() {
                    if gt.mask_at(frame).is_some_and(|m| m.get(px, py)) {
                        label = k + 1;
                    }
                }
                labels.insert(label);
            }
            if labels.len() == 1 {
                consistent += 1;
            }
        }
        assert!(
            consistent as f64 >= 0.95 * ts.len() as f64,
            "{consistent}/{}",
            ts.len()
        );
    }

    #[test]
    fn no_two_live_trajectories_share_a_cell() {
        let mut cfg = presets::two_objects(4);
        cfg.frame_count = 8;
        let scene = synthesize(&cfg).unwrap();
        let params = TrackParams::default();
        let ts = link_trajectories(&scene.flows, &scene.backward_flows, &params).unwrap();
        for frame in 0..8 {
            let mut seen = std::collections::HashSet::new();
            for t in ts.iter() {
                if let Some((x, y)) = t.point_at(frame) {
                    let cell = ((x as usize) / params.stride, (y as usize) / params.stride);
                    assert!(
                        seen.insert(cell),
                        "duplicate cell {cell:?} at frame {frame}"
                    );
                }
            }
        }
    }

    #[test]
    fn points_follow_the_flow_by_construction() {
        let mut cfg = presets::single_rect(2);
        cfg.frame_count = 6;
        let scene = synthesize(&cfg).unwrap();
        let ts = link_trajectories(&scene.flows, &scene.backward_flows, &TrackParams::default())
            .unwrap();
        for t in ts.iter() {
            for k in 0..t.points.len() - 1 {
                let (x, y) = t.points[k];
                let (u, v) = scene.flows[t.start_frame + k].sample(x, y);
                assert!((t.points[k + 1].0 - (x + u)).abs() < 1e-9);
                assert!((t.points[k + 1].1 - (y + v)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn jsonl_round_trip_is_exact() {
        let mut cfg = presets::single_rect(77);
        cfg.frame_count = 5;
        let scene = synthesize(&cfg).unwrap();
        let ts = link_trajectories(&scene.flows, &scene.backward_flows, &TrackParams::default())
            .unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("traj.jsonl");
        save_trajectories(&path, &ts).unwrap();
        let back = load_trajectories(&path, 5, 128, 128).unwrap();
        assert_eq!(back, ts);
    }
}
