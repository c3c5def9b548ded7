//! Watershed-style superpixels over a boundary map.
//!
//! Pixels are processed in ascending strength order. A pixel with an already
//! labeled 4-neighbor joins that region; an unlabeled-neighborhood pixel
//! seeds a new region when its strength is at most the seeding threshold,
//! otherwise it is held back and absorbed once a region reaches it (ridge
//! pixels get claimed by the nearer basin). Regions smaller than `min_area`
//! are merged into the neighbor with the longest shared boundary.

use crate::boundaries::BoundaryMap;

#[derive(Debug, Clone, Copy)]
pub struct SuperpixelParams {
    /// Strength above which a pixel may not seed a new region.
    pub seed_threshold: f64,
    /// Regions smaller than this are merged away.
    pub min_area: usize,
}

impl Default for SuperpixelParams {
    fn default() -> Self {
        SuperpixelParams {
            seed_threshold: 0.3,
            min_area: 16,
        }
    }
}

/// A dense labeling of one frame into superpixel regions, labels 0..num_regions.
#[derive(Debug, Clone)]
pub struct Partition {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
    pub num_regions: usize,
}

impl Partition {
    pub fn label(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }
}

const UNASSIGNED: u32 = u32::MAX;

pub fn superpixels(boundary: &BoundaryMap, params: &SuperpixelParams) -> Partition {
    let (w, h) = (boundary.width, boundary.height);
    let n = w * h;
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.sort_unstable_by(|a, b| {
        boundary.strength[*a as usize]
            .total_cmp(&boundary.strength[*b as usize])
            .then(a.cmp(b))
    });

    let mut labels = vec![UNASSIGNED; n];
    let mut next_label = 0u32;
    let mut deferred: Vec<u32> = Vec::new();

    // steepest-descent join: the region of the lowest-strength assigned
    // neighbor claims the pixel; ties go to the smaller label
    let neighbor_label = |labels: &[u32], idx: usize| -> u32 {
        let (x, y) = (idx % w, idx / w);
        let mut best: Option<(f64, u32)> = None;
        let mut consider = |j: usize| {
            if labels[j] != UNASSIGNED {
                let key = (boundary.strength[j], labels[j]);
                if best.is_none_or(|(s, l)| key.0 < s || (key.0 == s && key.1 < l)) {
                    best = Some(key);
                }
            }
        };
        if x > 0 {
            consider(idx - 1);
        }
        if x + 1 < w {
            consider(idx + 1);
        }
        if y > 0 {
            consider(idx - w);
        }
        if y + 1 < h {
            consider(idx + w);
        }
        best.map_or(UNASSIGNED, |(_, l)| l)
    };

    for &i in &order {
        let idx = i as usize;
        let nb = neighbor_label(&labels, idx);
        if nb != UNASSIGNED {
            labels[idx] = nb;
        } else if boundary.strength[idx] <= params.seed_threshold {
            labels[idx] = next_label;
            next_label += 1;
        } else {
            deferred.push(i);
        }
    }

    // Absorb held-back ridge pixels in synchronous rounds (assignments read
    // the previous round's labels), so each basin claims one ridge layer per
    // round and the band splits to the nearer side. An entire plateau
    // isolated from every region seeds its first pixel and keeps going.
    while !deferred.is_empty() {
        let mut still = Vec::with_capacity(deferred.len());
        let mut round: Vec<(usize, u32)> = Vec::new();
        for &i in &deferred {
            let idx = i as usize;
            let nb = neighbor_label(&labels, idx);
            if nb != UNASSIGNED {
                round.push((idx, nb));
            } else {
                still.push(i);
            }
        }
        for &(idx, label) in &round {
            labels[idx] = label;
        }
        deferred = still;
        if round.is_empty() {
            if let Some(&first) = deferred.first() {
                labels[first as usize] = next_label;
                next_label += 1;
                deferred.remove(0);
            }
        }
    }

    let mut part = Partition {
        width: w,
        height: h,
        labels,
        num_regions: next_label as usize,
    };
    merge_small_regions(&mut part, params.min_area);
    relabel_dense(&mut part);
    part
}

fn merge_small_regions(part: &mut Partition, min_area: usize) {
    if min_area <= 1 {
        return;
    }
    loop {
        let mut sizes = vec![0usize; part.num_regions];
        for &l in &part.labels {
            sizes[l as usize] += 1;
        }
        // smallest region under the limit; ties by smaller label
        let victim = (0..part.num_regions)
            .filter(|r| sizes[*r] > 0 && sizes[*r] < min_area)
            .min_by_key(|r| (sizes[*r], *r));
        let Some(victim) = victim else { break };

        // shared-boundary lengths of victim with its neighbors
        let mut shared = std::collections::BTreeMap::<u32, usize>::new();
        let (w, h) = (part.width, part.height);
        for y in 0..h {
            for x in 0..w {
                let l = part.labels[y * w + x];
                if l as usize != victim {
                    continue;
                }
                let mut touch = |ox: usize, oy: usize| {
                    let o = part.labels[oy * w + ox];
                    if o as usize != victim {
                        *shared.entry(o).or_insert(0) += 1;
                    }
                };
                if x > 0 {
                    touch(x - 1, y);
                }
                if x + 1 < w {
                    touch(x + 1, y);
                }
                if y > 0 {
                    touch(x, y - 1);
                }
                if y + 1 < h {
                    touch(x, y + 1);
                }
            }
        }
        // neighbor with the longest shared boundary; ties by smaller label
        let Some((&target, _)) = shared.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        else {
            break; // single-region frame smaller than min_area: keep it
        };
        for l in part.labels.iter_mut() {
            if *l as usize == victim {
                *l = target;
            }
        }
    }
}

fn relabel_dense(part: &mut Partition) {
    let mut remap = vec![UNASSIGNED; part.num_regions];
    let mut next = 0u32;
    for l in part.labels.iter_mut() {
        if remap[*l as usize] == UNASSIGNED {
            remap[*l as usize] = next;
            next += 1;
        }
        *l = remap[*l as usize];
    }
    part.num_regions = next as usize;
}
