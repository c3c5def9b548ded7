//! Exact and iterative solvers for the constrained random-walker labeling.

use super::LabelAssignment;
use crate::affinity::SparseAffinity;
use crate::error::{Error, Result};

/// Solve the harmonic system L_U x_U = -L_MU' x_M with Jacobi-preconditioned
/// conjugate gradients (relative residual 1e-13). Marked values stay fixed.
/// Unlabeled nodes in components without any marked node get x = 0 and are
/// counted in `unreachable`.
pub fn solve_exact(aff: &SparseAffinity, la: &LabelAssignment) -> Result<LabelAssignment> {
    let n = aff.n();
    if la.x.len() != n {
        return Err(Error::InvalidArgument(format!(
            "labeling over {} nodes, affinity over {n}",
            la.x.len()
        )));
    }
    let marked = la.marked_flags(n);
    let reachable = mark_reachable(aff, &marked);

    let mut x = la.x.clone();
    let mut unreachable = 0usize;
    for i in 0..n {
        if !marked[i] && !reachable[i] {
            x[i] = 0.0;
            unreachable += 1;
        }
    }

    // unknowns: unlabeled nodes in components that contain a marked node
    let unknowns: Vec<u32> = (0..n as u32)
        .filter(|&i| !marked[i as usize] && reachable[i as usize])
        .collect();
    if !unknowns.is_empty() {
        let local: std::collections::HashMap<u32, usize> =
            unknowns.iter().enumerate().map(|(k, &i)| (i, k)).collect();
        let m = unknowns.len();
        let degree = aff.degree();

        // right-hand side: sum of A_um x_m over marked neighbors
        let mut b = vec![0.0f64; m];
        for (k, &u) in unknowns.iter().enumerate() {
            let mut acc = 0.0;
            for (v, w) in aff.neighbors(u) {
                if marked[v as usize] {
                    acc += w * x[v as usize];
                }
            }
            b[k] = acc;
        }

        // y = L_U z restricted to the unknown set
        let apply = |z: &[f64], y: &mut [f64]| {
            for (k, &u) in unknowns.iter().enumerate() {
                let mut acc = degree[u as usize] * z[k];
                for (v, w) in aff.neighbors(u) {
                    if let Some(&kv) = local.get(&v) {
                        acc -= w * z[kv];
                    }
                }
                y[k] = acc;
            }
        };

        let z = conjugate_gradient(apply, &b, &unknowns, degree, m);
        for (k, &u) in unknowns.iter().enumerate() {
            x[u as usize] = z[k].clamp(0.0, 1.0);
        }
    }

    Ok(LabelAssignment {
        x,
        marked_fg: la.marked_fg.clone(),
        marked_bg: la.marked_bg.clone(),
        unreachable,
    })
}

fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    unknowns: &[u32],
    degree: &[f64],
    m: usize,
) -> Vec<f64> {
    let precond = |r: &[f64], z: &mut [f64]| {
        for (k, &u) in unknowns.iter().enumerate() {
            z[k] = r[k] / degree[u as usize];
        }
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    // converged when every node's diffusion deviation |r_u| / d_u is tiny,
    // which is the metric the fixed-point property is stated in
    let deviation = |r: &[f64]| -> f64 {
        r.iter()
            .zip(unknowns)
            .map(|(ru, &u)| (ru / degree[u as usize]).abs())
            .fold(0.0f64, f64::max)
    };

    let mut x = vec![0.5f64; m];
    let mut r = vec![0.0f64; m];
    let refresh = |x: &[f64], r: &mut [f64]| {
        apply(x, r);
        for k in 0..m {
            r[k] = b[k] - r[k];
        }
    };
    refresh(&x, &mut r);
    let mut z = vec![0.0f64; m];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0f64; m];

    let max_iters = 50 * m + 100;
    for it in 0..max_iters {
        if deviation(&r) <= 5e-14 {
            break;
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        for k in 0..m {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        // the recursive residual drifts; refresh it periodically
        if it % 25 == 24 {
            refresh(&x, &mut r);
        }
        precond(&r, &mut z);
        let rz_next = dot(&r, &z);
        if rz <= 0.0 {
            break;
        }
        let beta = rz_next / rz;
        rz = rz_next;
        for k in 0..m {
            p[k] = z[k] + beta * p[k];
        }
    }
    x
}

/// Flood from all marked nodes to find the components they touch.
fn mark_reachable(aff: &SparseAffinity, marked: &[bool]) -> Vec<bool> {
    let n = aff.n();
    let mut reachable = vec![false; n];
    let mut stack: Vec<u32> = (0..n as u32).filter(|&i| marked[i as usize]).collect();
    for &s in &stack {
        reachable[s as usize] = true;
    }
    while let Some(i) = stack.pop() {
        for (j, _) in aff.neighbors(i) {
            if !reachable[j as usize] {
                reachable[j as usize] = true;
                stack.push(j);
            }
        }
    }
    reachable
}

/// Label diffusion: `iters` rounds of x <- Diag(A1)^-1 A x followed by
/// re-clamping the marked labels. Zero-degree nodes keep their value.
pub fn diffuse(
    aff: &SparseAffinity,
    la: &LabelAssignment,
    iters: usize,
) -> Result<LabelAssignment> {
    let n = aff.n();
    if la.x.len() != n {
        return Err(Error::InvalidArgument(format!(
            "labeling over {} nodes, affinity over {n}",
            la.x.len()
        )));
    }
    let degree = aff.degree();
    let mut x = la.x.clone();
    let mut next = vec![0.0f64; n];
    for _ in 0..iters {
        aff.matvec(&x, &mut next);
        for i in 0..n {
            if degree[i] > 0.0 {
                next[i] /= degree[i];
            } else {
                next[i] = x[i];
            }
        }
        for &i in &la.marked_fg {
            next[i as usize] = 1.0;
        }
        for &i in &la.marked_bg {
            next[i as usize] = 0.0;
        }
        std::mem::swap(&mut x, &mut next);
    }
    Ok(LabelAssignment {
        x,
        marked_fg: la.marked_fg.clone(),
        marked_bg: la.marked_bg.clone(),
        unreachable: la.unreachable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affinity::Laplacian;

    fn path_graph() -> SparseAffinity {
        SparseAffinity::from_entries(3, vec![(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    #[test]
    fn path_graph_midpoint_is_harmonic() {
        let la = LabelAssignment::new(3, vec![0], vec![2]).unwrap();
        let solved = solve_exact(&path_graph(), &la).unwrap();
        assert!((solved.x[0] - 1.0).abs() < 1e-12);
        assert!((solved.x[1] - 0.5).abs() < 1e-12);
        assert!(solved.x[2].abs() < 1e-12);
    }

    #[test]
    fn disconnected_cliques_take_their_seed_value() {
        // two triangles, no cross edges
        let aff = SparseAffinity::from_entries(
            6,
            vec![
                (0, 1, 1.0),
                (0, 2, 1.0),
                (1, 2, 1.0),
                (3, 4, 1.0),
                (3, 5, 1.0),
                (4, 5, 1.0),
            ],
        )
        .unwrap();
        let la = LabelAssignment::new(6, vec![0], vec![3]).unwrap();
        let solved = solve_exact(&aff, &la).unwrap();
        for i in 0..3 {
            assert!((solved.x[i] - 1.0).abs() < 1e-12);
        }
        for i in 3..6 {
            assert!(solved.x[i].abs() < 1e-12);
        }
        assert_eq!(solved.unreachable, 0);
    }

    #[test]
    fn unreached_component_goes_background_with_flag() {
        let aff = SparseAffinity::from_entries(4, vec![(0, 1, 1.0), (2, 3, 0.5)]).unwrap();
        let la = LabelAssignment::new(4, vec![0], vec![1]).unwrap();
        let solved = solve_exact(&aff, &la).unwrap();
        assert_eq!(solved.x[2], 0.0);
        assert_eq!(solved.x[3], 0.0);
        assert_eq!(solved.unreachable, 2);
    }

    #[test]
    fn diffuse_zero_iters_is_identity() {
        let la = LabelAssignment::new(3, vec![0], vec![2]).unwrap();
        let out = diffuse(&path_graph(), &la, 0).unwrap();
        assert_eq!(out.x, la.x);
    }

    #[test]
    fn diffuse_converges_to_harmonic_midpoint() {
        let la = LabelAssignment::new(3, vec![0], vec![2]).unwrap();
        let out = diffuse(&path_graph(), &la, 50).unwrap();
        assert!((out.x[1] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn exact_solution_is_a_diffusion_fixed_point() {
        let (aff, la) = random_instance(42, 60);
        let solved = solve_exact(&aff, &la).unwrap();
        let stepped = diffuse(&aff, &solved, 1).unwrap();
        for i in 0..aff.n() {
            assert!(
                (stepped.x[i] - solved.x[i]).abs() <= 1e-12,
                "node {i}: {} vs {}",
                stepped.x[i],
                solved.x[i]
            );
        }
    }

    #[test]
    fn label_swap_maps_x_to_one_minus_x() {
        let (aff, la) = random_instance(7, 80);
        let solved = solve_exact(&aff, &la).unwrap();
        let swapped =
            LabelAssignment::new(aff.n(), la.marked_bg.clone(), la.marked_fg.clone()).unwrap();
        let solved_swap = solve_exact(&aff, &swapped).unwrap();
        // only holds on reachable nodes: unreachable components pin to 0 both ways
        let marked = la.marked_flags(aff.n());
        let reachable = super::mark_reachable(&aff, &marked);
        for i in 0..aff.n() {
            if reachable[i] {
                assert!((solved_swap.x[i] - (1.0 - solved.x[i])).abs() < 1e-9);
            }
        }
        let d500 = diffuse(&aff, &la, 500).unwrap();
        let d500_swap = diffuse(&aff, &swapped, 500).unwrap();
        for i in 0..aff.n() {
            if reachable[i] {
                assert!((d500_swap.x[i] - (1.0 - d500.x[i])).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn objective_never_beaten_by_random_feasible_labelings() {
        use rand::{RngExt, SeedableRng};
        let (aff, la) = random_instance(3, 70);
        let solved = solve_exact(&aff, &la).unwrap();
        let lap = Laplacian::new(&aff);
        let best = lap.quadratic_form(&solved.x).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let marked = la.marked_flags(aff.n());
        for _ in 0..200 {
            let probe: Vec<f64> = (0..aff.n())
                .map(|i| {
                    if marked[i] {
                        la.x[i]
                    } else {
                        rng.random_range(0.0..=1.0)
                    }
                })
                .collect();
            assert!(lap.quadratic_form(&probe).unwrap() >= best - 1e-12);
        }
    }

    /// Random connected-ish sparse graph with >= 1 marked node per component.
    pub(crate) fn random_instance(seed: u64, n: usize) -> (SparseAffinity, LabelAssignment) {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut entries = Vec::new();
        for i in 0..n as u32 {
            for _ in 0..3 {
                let j = rng.random_range(0..n as u32);
                if i < j {
                    entries.push((i, j, rng.random_range(0.05..=1.0)));
                } else if j < i {
                    entries.push((j, i, rng.random_range(0.05..=1.0)));
                }
            }
        }
        let aff = SparseAffinity::from_entries(n, entries).unwrap();
        // components via flood fill
        let mut comp = vec![usize::MAX; n];
        let mut ncomp = 0;
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            let mut stack = vec![s as u32];
            comp[s] = ncomp;
            while let Some(i) = stack.pop() {
                for (j, _) in aff.neighbors(i) {
                    if comp[j as usize] == usize::MAX {
                        comp[j as usize] = ncomp;
                        stack.push(j);
                    }
                }
            }
            ncomp += 1;
        }
        let mut fg = Vec::new();
        let mut bg = Vec::new();
        let mut seen = vec![false; ncomp];
        for i in 0..n {
            if !seen[comp[i]] {
                seen[comp[i]] = true;
                if comp[i] % 2 == 0 {
                    fg.push(i as u32);
                } else {
                    bg.push(i as u32);
                }
            } else if rng.random_range(0..5) == 0 {
                if rng.random_range(0..2) == 0 {
                    fg.push(i as u32);
                } else {
                    bg.push(i as u32);
                }
            }
        }
        let la = LabelAssignment::new(n, fg, bg).unwrap();
        (aff, la)
    }
}
