//! Multiscale spectral clustering of the trajectory affinity graph.
//!
//! For each requested cluster count k, the rows of the bottom-k eigenvectors
//! of the symmetric normalized Laplacian D^-1/2 L D^-1/2 are length-normalized
//! and discretized with seeded k-means (k-means++ init, 100 restarts capped at
//! 10 Lloyd iterations).
//!
//! The zero eigenspace is handled exactly rather than iteratively: its
//! dimension equals the number of connected components, so the first
//! eigenvectors are the component indicators D^1/2 1_С (largest components
//! first, a deterministic basis of the degenerate space). When fewer
//! components than k exist, the remaining columns are the smallest nonzero
//! eigenpairs, computed per component with LOBPCG deflated against the
//! component indicator; block Rayleigh-Ritz over [X, R, P] converges on the
//! crowded low end of these spectra where plain subspace iteration stalls.
//! Zero-degree trajectories carry no affinity evidence at all; they are
//! excluded from the embedding and belong to no spectral cluster.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TrajectoryCluster;
use crate::affinity::SparseAffinity;
use crate::error::{Error, Result};

const SPECTRAL_SEED: u64 = 0x5eed_cafe;
const MAX_EIGENVECTORS: usize = 50;
const EIGEN_TOL: f64 = 1e-8;

/// The multiscale pool: one cluster list per retained k, plus warnings for
/// skipped scales.
#[derive(Debug, Clone)]
pub struct SpectralPool {
    pub scales: Vec<(usize, Vec<TrajectoryCluster>)>,
    pub warnings: Vec<String>,
}

impl SpectralPool {
    /// Union of all scales, the multiscale cluster pool.
    pub fn all_clusters(&self) -> Vec<TrajectoryCluster> {
        self.scales
            .iter()
            .flat_map(|(_, cs)| cs.iter().cloned())
            .collect()
    }
}

pub fn spectral_clusters(aff: &SparseAffinity, k_list: &[usize]) -> Result<SpectralPool> {
    let n = aff.n();
    if let Some(k) = k_list.iter().find(|k| **k < 2) {
        return Err(Error::InvalidArgument(format!("cluster count {k} below 2")));
    }
    if let Some(k) = k_list.iter().find(|k| **k > MAX_EIGENVECTORS) {
        return Err(Error::InvalidArgument(format!(
            "cluster count {k} above the {MAX_EIGENVECTORS}-eigenvector cap"
        )));
    }
    let mut warnings = Vec::new();
    let ks: Vec<usize> = k_list
        .iter()
        .copied()
        .filter(|&k| {
            if k > n {
                warnings.push(format!("skipping k={k}: only {n} trajectories"));
                false
            } else {
                true
            }
        })
        .collect();
    if ks.is_empty() {
        return Ok(SpectralPool {
            scales: Vec::new(),
            warnings,
        });
    }
    let k_max = *ks.iter().max().unwrap();

    // embedded nodes: positive degree only
    let embedded: Vec<u32> = (0..n as u32)
        .filter(|&i| aff.degree()[i as usize] > 0.0)
        .collect();
    if embedded.is_empty() {
        warnings.push("no affinity entries: spectral pool is empty".into());
        return Ok(SpectralPool {
            scales: Vec::new(),
            warnings,
        });
    }

    // bottom-k_max eigenvectors, columns in ascending eigenvalue order
    let eigvecs = bottom_eigenvectors(aff, k_max);

    let mut scales = Vec::with_capacity(ks.len());
    for &k in &ks {
        let cols = k.min(eigvecs.len());
        // rows of the first k columns over embedded nodes, length-normalized
        let m = embedded.len();
        let mut rows = vec![0.0f64; m * cols];
        for (r, &i) in embedded.iter().enumerate() {
            let mut norm = 0.0;
            for c in 0..cols {
                let v = eigvecs[c][i as usize];
                rows[r * cols + c] = v;
                norm += v * v;
            }
            if norm > 0.0 {
                let norm = norm.sqrt();
                for c in 0..cols {
                    rows[r * cols + c] /= norm;
                }
            }
        }
        let labels = kmeans(&rows, m, k, SPECTRAL_SEED);
        let mut clusters: Vec<TrajectoryCluster> = Vec::new();
        for cluster_id in 0..k {
            let member_ids: Vec<u32> = embedded
                .iter()
                .enumerate()
                .filter(|(r, _)| labels[*r] == cluster_id)
                .map(|(_, &i)| i)
                .collect();
            if member_ids.is_empty() {
                continue;
            }
            let mut soft_labels = vec![0.0f64; n];
            for &i in &member_ids {
                soft_labels[i as usize] = 1.0;
            }
            clusters.push(TrajectoryCluster {
                member_ids,
                soft_labels,
                source_proposal: None,
            });
        }
        scales.push((k, clusters));
    }
    Ok(SpectralPool { scales, warnings })
}

/// Connected components of the positive-degree subgraph, largest first (ties
/// by smallest contained id); each component's node list is sorted.
fn positive_components(aff: &SparseAffinity) -> Vec<Vec<u32>> {
    let n = aff.n();
    let mut comp = vec![usize::MAX; n];
    let mut groups: Vec<Vec<u32>> = Vec::new();
    for s in 0..n {
        if comp[s] != usize::MAX || aff.degree()[s] == 0.0 {
            continue;
        }
        let id = groups.len();
        comp[s] = id;
        let mut members = vec![s as u32];
        let mut stack = vec![s as u32];
        while let Some(i) = stack.pop() {
            for (j, _) in aff.neighbors(i) {
                if comp[j as usize] == usize::MAX {
                    comp[j as usize] = id;
                    members.push(j);
                    stack.push(j);
                }
            }
        }
        members.sort_unstable();
        groups.push(members);
    }
    groups.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    groups
}

/// Bottom-k eigenvectors of L_sym as full-length columns (zero on excluded
/// nodes), ascending eigenvalue order.
fn bottom_eigenvectors(aff: &SparseAffinity, k: usize) -> Vec<Vec<f64>> {
    let n = aff.n();
    let degree = aff.degree();
    let comps = positive_components(aff);
    let c = comps.len();

    // exact zero eigenspace: component indicators D^1/2 1_C
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    for members in comps.iter().take(k) {
        let norm: f64 = members
            .iter()
            .map(|&i| degree[i as usize])
            .sum::<f64>()
            .sqrt();
        let mut v = vec![0.0f64; n];
        for &i in members {
            v[i as usize] = degree[i as usize].sqrt() / norm;
        }
        vectors.push(v);
    }
    if c >= k {
        return vectors;
    }

    // smallest nonzero eigenpairs, pooled across components
    let mut extra: Vec<(f64, usize, Vec<f64>)> = Vec::new();
    for (comp_idx, members) in comps.iter().enumerate() {
        let want = (k - c).min(members.len().saturating_sub(1));
        if want == 0 {
            continue;
        }
        for (value, vector) in component_eigenpairs(aff, members, want, comp_idx as u64) {
            extra.push((value, extra.len(), vector));
        }
    }
    extra.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    vectors.extend(extra.into_iter().take(k - c).map(|(_, _, v)| v));
    vectors
}

/// LOBPCG for the `want` smallest nonzero eigenpairs of L_sym restricted to
/// one connected component, deflated against the component indicator.
fn component_eigenpairs(
    aff: &SparseAffinity,
    members: &[u32],
    want: usize,
    comp_idx: u64,
) -> Vec<(f64, Vec<f64>)> {
    let n = aff.n();
    let m = members.len();
    let degree = aff.degree();
    let mut local = std::collections::HashMap::with_capacity(m);
    for (r, &i) in members.iter().enumerate() {
        local.insert(i, r);
    }

    // local L_sym apply: y = x - D^-1/2 A D^-1/2 x over component nodes
    let inv_sqrt: Vec<f64> = members
        .iter()
        .map(|&i| 1.0 / degree[i as usize].sqrt())
        .collect();
    let apply_l = |x: &[f64]| -> Vec<f64> {
        let mut y = vec![0.0f64; m];
        for (r, &i) in members.iter().enumerate() {
            let mut acc = 0.0;
            for (j, w) in aff.neighbors(i) {
                if let Some(&rj) = local.get(&j) {
                    acc += w * inv_sqrt[rj] * x[rj];
                }
            }
            y[r] = x[r] - inv_sqrt[r] * acc;
        }
        y
    };

    // deflation vector: normalized D^1/2 1 over the component
    let mut v0: Vec<f64> = members.iter().map(|&i| degree[i as usize].sqrt()).collect();
    let norm: f64 = v0.iter().map(|a| a * a).sum::<f64>().sqrt();
    v0.iter_mut().for_each(|a| *a /= norm);
    let deflate = |x: &mut [f64]| {
        let d: f64 = v0.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
        for (xi, vi) in x.iter_mut().zip(&v0) {
            *xi -= d * vi;
        }
    };

    let block = (want + (want / 2).max(4))
        .min(m.saturating_sub(1))
        .max(want.min(m));
    if block == 0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SPECTRAL_SEED.wrapping_add(comp_idx));
    let mut x_block: Vec<Vec<f64>> = (0..block)
        .map(|_| {
            let mut v: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            deflate(&mut v);
            v
        })
        .collect();
    orthonormalize(&mut x_block);
    let mut p_block: Vec<Vec<f64>> = Vec::new();
    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };

    let mut theta = vec![0.0f64; block];
    for _iter in 0..500 {
        let ax: Vec<Vec<f64>> = x_block.iter().map(|x| apply_l(x)).collect();
        for j in 0..x_block.len() {
            theta[j] = dot(&x_block[j], &ax[j]);
        }
        let mut residuals: Vec<Vec<f64>> = Vec::with_capacity(x_block.len());
        let mut worst = 0.0f64;
        for j in 0..x_block.len() {
            let mut r: Vec<f64> = (0..m)
                .map(|i| ax[j][i] - theta[j] * x_block[j][i])
                .collect();
            deflate(&mut r);
            if j < want {
                worst = worst.max(dot(&r, &r).sqrt());
            }
            residuals.push(r);
        }
        if worst <= EIGEN_TOL {
            break;
        }

        // trial basis S = [X | R | P]; X stays fixed under MGS
        let bx = x_block.len();
        let mut basis = x_block.clone();
        basis.extend(residuals);
        basis.extend(p_block.iter().cloned());
        orthonormalize_drop(&mut basis, bx);
        let mm = basis.len();
        let a_basis: Vec<Vec<f64>> = basis
            .iter()
            .enumerate()
            .map(|(j, s)| if j < bx { ax[j].clone() } else { apply_l(s) })
            .collect();
        let mut t = vec![vec![0.0f64; mm]; mm];
        for a in 0..mm {
            for b in a..mm {
                let v = dot(&basis[a], &a_basis[b]);
                t[a][b] = v;
                t[b][a] = v;
            }
        }
        let (eigvals, eigvecs) = jacobi_eigh(&t);
        let mut order: Vec<usize> = (0..mm).collect();
        order.sort_by(|a, b| eigvals[*a].total_cmp(&eigvals[*b]));

        let take = block.min(mm);
        let mut new_x: Vec<Vec<f64>> = vec![vec![0.0; m]; take];
        let mut new_p: Vec<Vec<f64>> = vec![vec![0.0; m]; take];
        for (col, &src) in order.iter().take(take).enumerate() {
            for (row, basis_vec) in basis.iter().enumerate() {
                let coeff = eigvecs[row][src];
                if coeff == 0.0 {
                    continue;
                }
                for i in 0..m {
                    new_x[col][i] += coeff * basis_vec[i];
                }
                if row >= bx {
                    for i in 0..m {
                        new_p[col][i] += coeff * basis_vec[i];
                    }
                }
            }
        }
        for v in new_x.iter_mut().chain(new_p.iter_mut()) {
            deflate(v);
        }
        orthonormalize_drop(&mut new_p, 0);
        x_block = new_x;
        orthonormalize(&mut x_block);
        p_block = new_p;
    }

    // final Rayleigh quotients, mapped back to global vectors
    (0..want.min(x_block.len()))
        .map(|j| {
            let ax = apply_l(&x_block[j]);
            let value = dot(&x_block[j], &ax);
            let mut global = vec![0.0f64; n];
            for (r, &i) in members.iter().enumerate() {
                global[i as usize] = x_block[j][r];
            }
            (value, global)
        })
        .collect()
}

/// Modified Gram-Schmidt with a second pass; degenerate vectors are replaced
/// by deterministic unit vectors.
fn orthonormalize(vecs: &mut [Vec<f64>]) {
    let n = vecs.first().map_or(0, |v| v.len());
    let mut fallback = 0usize;
    for idx in 0..vecs.len() {
        for _pass in 0..2 {
            let (done, rest) = vecs.split_at_mut(idx);
            let v = &mut rest[0];
            for u in done.iter() {
                let dot: f64 = u.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                for i in 0..n {
                    v[i] -= dot * u[i];
                }
            }
        }
        let norm: f64 = vecs[idx].iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-12 {
            vecs[idx].iter_mut().for_each(|a| *a /= norm);
        } else {
            // replace with the next canonical basis vector
            let v = &mut vecs[idx];
            v.iter_mut().for_each(|a| *a = 0.0);
            v[fallback % n] = 1.0;
            fallback += 1;
        }
    }
}

/// Modified Gram-Schmidt (two passes) that keeps the first `fixed` columns as
/// given and drops later columns with negligible remaining norm.
fn orthonormalize_drop(vecs: &mut Vec<Vec<f64>>, fixed: usize) {
    let n = vecs.first().map_or(0, |v| v.len());
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vecs.len());
    for (idx, v) in vecs.drain(..).enumerate() {
        let mut v = v;
        if idx >= fixed {
            for _pass in 0..2 {
                for u in &out {
                    let d: f64 = u.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                    for i in 0..n {
                        v[i] -= d * u[i];
                    }
                }
            }
            let norm: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm <= 1e-10 {
                continue;
            }
            v.iter_mut().for_each(|a| *a /= norm);
        }
        out.push(v);
    }
    *vecs = out;
}

/// Cyclic Jacobi eigendecomposition of a small symmetric matrix.
/// Returns (eigenvalues, eigenvector columns s[row][col]).
pub(crate) fn jacobi_eigh(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v = vec![vec![0.0f64; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..60 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m[p][q] * m[p][q];
            }
        }
        if off <= 1e-24 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..n {
                    let (mip, miq) = (m[i][p], m[i][q]);
                    m[i][p] = c * mip - s * miq;
                    m[i][q] = s * mip + c * miq;
                }
                for i in 0..n {
                    let (mpi, mqi) = (m[p][i], m[q][i]);
                    m[p][i] = c * mpi - s * mqi;
                    m[q][i] = s * mpi + c * mqi;
                }
                for i in 0..n {
                    let (vip, viq) = (v[i][p], v[i][q]);
                    v[i][p] = c * vip - s * viq;
                    v[i][q] = s * vip + c * viq;
                }
            }
        }
    }
    let eigvals: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    (eigvals, v)
}

/// Seeded k-means with k-means++ init: 100 restarts of at most 10 Lloyd
/// steps, keeping the lowest within-cluster sum of squares.
fn kmeans(rows: &[f64], n: usize, k: usize, seed: u64) -> Vec<usize> {
    let dim = rows.len().checked_div(n).unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_labels = vec![0usize; n];
    let mut best_sse = f64::INFINITY;
    let point = |i: usize| &rows[i * dim..(i + 1) * dim];
    let dist2 =
        |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum() };

    for _restart in 0..100 {
        // k-means++ seeding
        let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
        centers.push(point(rng.random_range(0..n)).to_vec());
        let mut d2: Vec<f64> = (0..n).map(|i| dist2(point(i), &centers[0])).collect();
        while centers.len() < k {
            let total: f64 = d2.iter().sum();
            let next = if total <= 0.0 {
                rng.random_range(0..n)
            } else {
                let mut target = rng.random_range(0.0..total);
                let mut chosen = n - 1;
                for (i, w) in d2.iter().enumerate() {
                    if target < *w {
                        chosen = i;
                        break;
                    }
                    target -= w;
                }
                chosen
            };
            centers.push(point(next).to_vec());
            for i in 0..n {
                d2[i] = d2[i].min(dist2(point(i), centers.last().unwrap()));
            }
        }

        let mut labels = vec![0usize; n];
        let mut assign_d2 = vec![0.0f64; n];
        for _iter in 0..10 {
            let mut changed = false;
            for i in 0..n {
                let mut best = (f64::INFINITY, 0usize);
                for (c, center) in centers.iter().enumerate() {
                    let d = dist2(point(i), center);
                    if d < best.0 {
                        best = (d, c);
                    }
                }
                assign_d2[i] = best.0;
                if labels[i] != best.1 {
                    labels[i] = best.1;
                    changed = true;
                }
            }
            let mut counts = vec![0usize; k];
            for center in centers.iter_mut() {
                center.iter_mut().for_each(|c| *c = 0.0);
            }
            for i in 0..n {
                counts[labels[i]] += 1;
                for (c, x) in centers[labels[i]].iter_mut().zip(point(i)) {
                    *c += x;
                }
            }
            for c in 0..k {
                if counts[c] > 0 {
                    centers[c].iter_mut().for_each(|v| *v /= counts[c] as f64);
                } else {
                    // re-seed an empty cluster at the worst-fit point
                    let far = (0..n)
                        .max_by(|&a, &b| assign_d2[a].total_cmp(&assign_d2[b]).then(b.cmp(&a)))
                        .unwrap_or(0);
                    centers[c] = point(far).to_vec();
                    assign_d2[far] = 0.0;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }

        let sse: f64 = (0..n).map(|i| dist2(point(i), &centers[labels[i]])).sum();
        if sse < best_sse {
            best_sse = sse;
            best_labels = labels;
        }
    }
    best_labels
}
