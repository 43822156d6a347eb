use rayon::prelude::*;
use rustc_hash::FxHashMap;

use super::SogmmConfig;
use crate::error::{Error, Result};
use crate::kdtree::KdTree;

/// Modes found by binned mean shift and the nearest mode of every feature.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeSeeking {
    pub modes: Vec<[f64; 2]>,
    pub assignments: Vec<usize>,
}

impl ModeSeeking {
    pub fn count(&self) -> usize {
        self.modes.len()
    }
}

struct Converged {
    position: [f64; 2],
    support: usize,
    seed_order: usize,
}

fn shift_seed(tree: &KdTree<2>, seed: [f64; 2], cfg: &SogmmConfig) -> ([f64; 2], usize) {
    let bw = cfg.bandwidth;
    let inv_two_bw2 = 1.0 / (2.0 * bw * bw);
    let tol = cfg.shift_tol();
    let mut pos = seed;
    let mut support = 0;
    for _ in 0..cfg.gbms_max_iters {
        let mut sw = 0.0;
        let mut sx = 0.0;
        let mut sy = 0.0;
        let mut count = 0;
        tree.for_each_within(&pos, bw, |i, d2| {
            let w = (-d2 * inv_two_bw2).exp();
            let p = tree.point(i);
            sw += w;
            sx += w * p[0];
            sy += w * p[1];
            count += 1;
        });
        if count == 0 {
            break;
        }
        support = count;
        let next = [sx / sw, sy / sw];
        let shift = ((next[0] - pos[0]).powi(2) + (next[1] - pos[1]).powi(2)).sqrt();
        pos = next;
        if shift < tol {
            break;
        }
    }
    (pos, support)
}

/// Binned mean shift over 2D features.
///
/// Seeds sit at the centers of occupied bandwidth-sized grid cells. Each seed
/// moves to the Gaussian-weighted mean of the features within one bandwidth
/// until it stops moving. Converged seeds closer than half a bandwidth to a
/// better-supported mode are merged into it.
pub fn gbms_mode_count(features: &[[f64; 2]], cfg: &SogmmConfig) -> Result<ModeSeeking> {
    cfg.validate()?;
    if features.is_empty() {
        return Err(Error::Empty("mode-seeking features"));
    }
    if features.iter().any(|f| !f[0].is_finite() || !f[1].is_finite()) {
        return Err(Error::NonFinite("mode-seeking feature"));
    }
    let bw = cfg.bandwidth;

    let mut cells: FxHashMap<(i64, i64), ()> = FxHashMap::default();
    for f in features {
        cells.insert(((f[0] / bw).floor() as i64, (f[1] / bw).floor() as i64), ());
    }
    let mut cells: Vec<(i64, i64)> = cells.into_keys().collect();
    cells.sort_unstable();
    let seeds: Vec<[f64; 2]> = cells
        .iter()
        .map(|&(a, b)| [(a as f64 + 0.5) * bw, (b as f64 + 0.5) * bw])
        .collect();

    let tree = KdTree::new(features.to_vec());
    let mut converged: Vec<Converged> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &s)| {
            let (position, support) = shift_seed(&tree, s, cfg);
            Converged {
                position,
                support,
                seed_order: i,
            }
        })
        .filter(|c| c.support > 0)
        .collect();
    converged.sort_by(|a, b| {
        b.support
            .cmp(&a.support)
            .then(a.seed_order.cmp(&b.seed_order))
    });

    let merge_r2 = (0.5 * bw) * (0.5 * bw);
    let mut modes: Vec<[f64; 2]> = Vec::new();
    for c in &converged {
        let duplicate = modes.iter().any(|m| {
            (m[0] - c.position[0]).powi(2) + (m[1] - c.position[1]).powi(2) < merge_r2
        });
        if !duplicate {
            modes.push(c.position);
        }
    }
    if modes.is_empty() {
        // Every seed cell contains at least one feature, so this only
        // happens for degenerate bandwidths; fall back to the centroid.
        let n = features.len() as f64;
        let cx = features.iter().map(|f| f[0]).sum::<f64>() / n;
        let cy = features.iter().map(|f| f[1]).sum::<f64>() / n;
        modes.push([cx, cy]);
    }

    let mode_tree = KdTree::new(modes.clone());
    let assignments = features
        .par_iter()
        .with_min_len(512)
        .map(|f| mode_tree.nearest(f).map(|n| n.index).unwrap_or(0))
        .collect();
    Ok(ModeSeeking { modes, assignments })
}
