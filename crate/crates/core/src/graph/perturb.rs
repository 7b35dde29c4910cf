use std::collections::HashSet;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Graph;
use crate::error::{Error, Result};

/// Replaces `⌊r·|E|⌋` original edges by the same number of random pairs that
/// were not edges before. The edge count is preserved and the result depends
/// only on `(g, r, seed)`.
pub fn perturb_edges(g: &Graph, r: f64, seed: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::param(format!("random edge rate {r} outside [0, 1]")));
    }
    let edges = g.edges();
    let count = (r * edges.len() as f64).floor() as usize;
    if count == 0 {
        return Ok(g.clone());
    }
    let n = g.num_nodes() as u64;
    let total_pairs = n * n.saturating_sub(1) / 2;
    let free = total_pairs - edges.len() as u64;
    if free < count as u64 {
        return Err(Error::param(format!(
            "cannot add {count} new edges: only {free} non-edges exist"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let removed: HashSet<usize> = index::sample(&mut rng, edges.len(), count).into_iter().collect();
    let original: HashSet<(usize, usize)> = edges.iter().copied().collect();

    let added: Vec<(usize, usize)> = if free <= 4 * count as u64 || total_pairs <= 1 << 20 {
        // Enumerate the complement and sample from it directly.
        let n = g.num_nodes();
        let candidates: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|p| !original.contains(p))
            .collect();
        index::sample(&mut rng, candidates.len(), count)
            .into_iter()
            .map(|k| candidates[k])
            .collect()
    } else {
        let mut seen = HashSet::with_capacity(count);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let u = rng.random_range(0..g.num_nodes());
            let v = rng.random_range(0..g.num_nodes());
            if u == v {
                continue;
            }
            let p = (u.min(v), u.max(v));
            if original.contains(&p) || !seen.insert(p) {
                continue;
            }
            out.push(p);
        }
        out
    };

    let kept = edges
        .iter()
        .enumerate()
        .filter(|(i, _)| !removed.contains(i))
        .map(|(_, &e)| e);
    g.with_edges(kept.chain(added))
}
