//! Sparse pairwise trajectory affinities and the graph Laplacian.
//!
//! For every pair of trajectories that overlap in time for at least
//! `min_overlap` frames and come within `radius` pixels of each other, the
//! squared distance is the maximum over common frames of the squared velocity
//! difference, velocities being forward position differences averaged over a
//! `velocity_window`-frame window. The affinity is exp(-lambda * d^2); entries
//! below `weight_floor` are dropped to keep the matrix sparse (a documented
//! deviation from the dense definition). Candidate pairs come from per-frame
//! spatial binning with radius-sized cells.

use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::trajectories::TrajectorySet;

#[derive(Debug, Clone, Copy)]
pub struct AffinityParams {
    /// Spatial gate: minimum distance over common frames must be <= radius.
    pub radius: f64,
    /// Kernel scale in exp(-lambda * d^2).
    pub lambda: f64,
    /// Velocity averaging window in frames.
    pub velocity_window: usize,
    /// Minimum temporal overlap in frames.
    pub min_overlap: usize,
    /// Entries below this weight are dropped.
    pub weight_floor: f64,
}

impl Default for AffinityParams {
    fn default() -> Self {
        AffinityParams {
            radius: 60.0,
            lambda: 0.1,
            velocity_window: 3,
            min_overlap: 3,
            weight_floor: 1e-3,
        }
    }
}

/// Symmetric sparse affinity matrix with weights in (0, 1], no self loops.
/// Entries are stored once with i < j; `degree` holds the row sums of the
/// full symmetric matrix. A CSR adjacency over both directions backs the
/// solver and diffusion kernels.
#[derive(Debug, Clone)]
pub struct SparseAffinity {
    n: usize,
    entries: Vec<(u32, u32, f64)>,
    degree: Vec<f64>,
    csr_offsets: Vec<usize>,
    csr_cols: Vec<u32>,
    csr_weights: Vec<f64>,
}

impl SparseAffinity {
    /// Build from upper-triangle entries (i < j, weight in (0,1]).
    pub fn from_entries(n: usize, mut entries: Vec<(u32, u32, f64)>) -> Result<Self> {
        for &(i, j, w) in &entries {
            if i >= j || j as usize >= n {
                return Err(Error::InvalidArgument(format!("bad entry ({i},{j})")));
            }
            if !(w > 0.0 && w <= 1.0) {
                return Err(Error::InvalidArgument(format!("weight {w} outside (0,1]")));
            }
        }
        entries.sort_unstable_by_key(|(i, j, _)| (*i, *j));
        entries.dedup_by_key(|(i, j, _)| (*i, *j));

        let mut counts = vec![0usize; n];
        for &(i, j, _) in &entries {
            counts[i as usize] += 1;
            counts[j as usize] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut acc = 0usize;
        offsets.push(0);
        for c in &counts {
            acc += c;
            offsets.push(acc);
        }
        let mut cols = vec![0u32; acc];
        let mut weights = vec![0.0f64; acc];
        let mut cursor = offsets[..n].to_vec();
        for &(i, j, w) in &entries {
            cols[cursor[i as usize]] = j;
            weights[cursor[i as usize]] = w;
            cursor[i as usize] += 1;
            cols[cursor[j as usize]] = i;
            weights[cursor[j as usize]] = w;
            cursor[j as usize] += 1;
        }
        // degree as the CSR row sum so matvec and degree agree exactly
        let mut degree = vec![0.0f64; n];
        for i in 0..n {
            let mut d = 0.0;
            for k in offsets[i]..offsets[i + 1] {
                d += weights[k];
            }
            degree[i] = d;
        }
        Ok(SparseAffinity {
            n,
            entries,
            degree,
            csr_offsets: offsets,
            csr_cols: cols,
            csr_weights: weights,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[(u32, u32, f64)] {
        &self.entries
    }

    pub fn degree(&self) -> &[f64] {
        &self.degree
    }

    /// Stored weight between i and j (symmetric), or 0 when absent.
    pub fn weight(&self, i: u32, j: u32) -> f64 {
        let (row, col) = (i.min(j), i.max(j));
        self.neighbors(row)
            .find(|(c, _)| *c == col)
            .map_or(0.0, |(_, w)| w)
    }

    pub fn neighbors(&self, i: u32) -> impl Iterator<Item = (u32, f64)> + '_ {
        let r = self.csr_offsets[i as usize]..self.csr_offsets[i as usize + 1];
        r.map(move |k| (self.csr_cols[k], self.csr_weights[k]))
    }

    /// y = A x over the full symmetric matrix.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.csr_offsets[i]..self.csr_offsets[i + 1] {
                acc += self.csr_weights[k] * x[self.csr_cols[k] as usize];
            }
            y[i] = acc;
        }
    }
}

/// Graph Laplacian L = Diag(A 1) - A, held by reference to the affinity.
pub struct Laplacian<'a> {
    pub affinity: &'a SparseAffinity,
}

impl<'a> Laplacian<'a> {
    pub fn new(affinity: &'a SparseAffinity) -> Self {
        Laplacian { affinity }
    }

    /// The objective (1/2) x' L x = (1/2) sum_{i,j} A_ij (x_i - x_j)^2 with the
    /// sum over unordered pairs, computed via the pairwise form.
    pub fn quadratic_form(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.affinity.n {
            return Err(Error::InvalidArgument(format!(
                "vector length {} != node count {}",
                x.len(),
                self.affinity.n
            )));
        }
        let mut acc = 0.0;
        for &(i, j, w) in &self.affinity.entries {
            let d = x[i as usize] - x[j as usize];
            acc += w * d * d;
        }
        Ok(0.5 * acc)
    }
}

/// Velocity of a trajectory at `frame`: forward position difference averaged
/// over up to `window` frames, truncated at `limit` (exclusive upper frame).
fn windowed_velocity(
    traj: &crate::trajectories::Trajectory,
    frame: usize,
    window: usize,
    limit: usize,
) -> (f64, f64) {
    let end = (frame + window).min(limit).min(traj.last_frame());
    debug_assert!(end > frame);
    let span = (end - frame) as f64;
    let a = traj.points[frame - traj.start_frame];
    let b = traj.points[end - traj.start_frame];
    ((b.0 - a.0) / span, (b.1 - a.1) / span)
}

/// Build the sparse affinity matrix for a trajectory set.
pub fn build_affinity(ts: &TrajectorySet, params: &AffinityParams) -> Result<SparseAffinity> {
    let n = ts.len();
    if n == 0 {
        return SparseAffinity::from_entries(0, Vec::new());
    }
    let window = params.velocity_window.max(1);
    let min_overlap = params.min_overlap.max(2);

    // candidate pairs from per-frame spatial binning
    let cell = params.radius.max(1.0);
    let mut candidates: HashSet<(u32, u32)> = HashSet::new();
    for frame in 0..ts.frame_count {
        let mut bins: std::collections::HashMap<(i64, i64), Vec<u32>> =
            std::collections::HashMap::new();
        for traj in ts.iter() {
            if let Some((x, y)) = traj.point_at(frame) {
                bins.entry(((x / cell).floor() as i64, (y / cell).floor() as i64))
                    .or_default()
                    .push(traj.id);
            }
        }
        for (&(bx, by), ids) in &bins {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let Some(other) = bins.get(&(bx + dx, by + dy)) else {
                        continue;
                    };
                    for &a in ids {
                        for &b in other {
                            if a < b {
                                candidates.insert((a, b));
                            }
                        }
                    }
                }
            }
        }
    }
    let mut candidates: Vec<(u32, u32)> = candidates.into_iter().collect();
    candidates.sort_unstable();

    let mut entries = Vec::new();
    for (i, j) in candidates {
        let a = ts.get(i);
        let b = ts.get(j);
        let start = a.start_frame.max(b.start_frame);
        let end = a.last_frame().min(b.last_frame());
        if end < start || end - start + 1 < min_overlap {
            continue;
        }
        // spatial gate: minimum distance over common frames
        let mut min_d2 = f64::INFINITY;
        for f in start..=end {
            let pa = a.points[f - a.start_frame];
            let pb = b.points[f - b.start_frame];
            min_d2 = min_d2.min((pa.0 - pb.0).powi(2) + (pa.1 - pb.1).powi(2));
        }
        if min_d2 > params.radius * params.radius {
            continue;
        }
        // maximum squared velocity difference over common frames
        let mut max_v2 = 0.0f64;
        for f in start..end {
            let va = windowed_velocity(a, f, window, end);
            let vb = windowed_velocity(b, f, window, end);
            let dv = (va.0 - vb.0).powi(2) + (va.1 - vb.1).powi(2);
            max_v2 = max_v2.max(dv);
        }
        let weight = (-params.lambda * max_v2).exp();
        if weight >= params.weight_floor {
            entries.push((i, j, weight.min(1.0)));
        }
    }
    SparseAffinity::from_entries(n, entries)
}

/// Export as text: header "n m" then one "i j w" triplet per line.
pub fn save_affinity(path: impl AsRef<Path>, aff: &SparseAffinity) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "{} {}", aff.n(), aff.entries().len()).map_err(|e| Error::io(path, e))?;
    for &(i, j, weight) in aff.entries() {
        writeln!(w, "{i} {j} {weight}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_affinity(path: impl AsRef<Path>) -> Result<SparseAffinity> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = std::io::BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format(path, "empty affinity file"))?
        .map_err(|e| Error::io(path, e))?;
    let mut it = header.split_whitespace();
    let n: usize = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::format(path, "bad header"))?;
    let m: usize = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::format(path, "bad header"))?;
    let mut entries = Vec::with_capacity(m);
    for line in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let parse = |t: Option<&str>| t.and_then(|s| s.parse::<f64>().ok());
        let i = it.next().and_then(|s| s.parse::<u32>().ok());
        let j = it.next().and_then(|s| s.parse::<u32>().ok());
        let w = parse(it.next());
        match (i, j, w) {
            (Some(i), Some(j), Some(w)) => entries.push((i, j, w)),
            _ => return Err(Error::format(path, format!("bad triplet line: {line}"))),
        }
    }
    if entries.len() != m {
        return Err(Error::format(path, "entry count disagrees with header"));
    }
    SparseAffinity::from_entries(n, entries)
}
