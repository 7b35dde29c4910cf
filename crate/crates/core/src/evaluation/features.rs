//! Per-cluster dominant features and DTW comparison of their profiles.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Debug, Clone, PartialEq)]
pub struct DominantFeatures {
    /// `threshold_mult ×` the mean over all entries of `X`.
    pub threshold: f64,
    /// `C × d` within-cluster feature means.
    pub cluster_means: Array2<f64>,
    /// Dominant feature indices per cluster, ascending.
    pub per_cluster: Vec<Vec<usize>>,
}

impl DominantFeatures {
    /// Within-cluster means of each cluster's dominant features, in
    /// descending order.
    pub fn profiles(&self) -> Vec<Vec<f64>> {
        self.per_cluster
            .iter()
            .enumerate()
            .map(|(c, idx)| {
                let mut p: Vec<f64> = idx.iter().map(|&j| self.cluster_means[[c, j]]).collect();
                p.sort_by(|a, b| b.total_cmp(a));
                p
            })
            .collect()
    }
}

pub fn dominant_features(g: &Graph, threshold_mult: f64) -> Result<DominantFeatures> {
    let labels = g
        .labels()
        .ok_or_else(|| Error::Precondition("dominant features need ground-truth labels".into()))?;
    let c = g.num_clusters().unwrap_or(0);
    let x = g.features();
    let d = x.ncols();
    let mut sums = Array2::<f64>::zeros((c, d));
    let mut counts = vec![0usize; c];
    for (i, &l) in labels.iter().enumerate() {
        let mut row = sums.row_mut(l);
        row += &x.row(i);
        counts[l] += 1;
    }
    for (k, &n) in counts.iter().enumerate() {
        if n > 0 {
            sums.row_mut(k).mapv_inplace(|v| v / n as f64);
        }
    }
    let overall = if x.is_empty() { 0.0 } else { x.mean().unwrap_or(0.0) };
    let threshold = threshold_mult * overall;
    let per_cluster = (0..c)
        .map(|k| (0..d).filter(|&j| counts[k] > 0 && sums[[k, j]] > threshold).collect())
        .collect();
    Ok(DominantFeatures {
        threshold,
        cluster_means: sums,
        per_cluster,
    })
}

/// Dynamic time warping with absolute-difference cost, clamped to `cap`.
pub fn dtw_distance(a: &[f64], b: &[f64], cap: f64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::param("DTW needs non-empty sequences"));
    }
    let m = b.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for &x in a {
        cur[0] = f64::INFINITY;
        for j in 1..=m {
            let best = prev[j].min(cur[j - 1]).min(prev[j - 1]);
            cur[j] = (x - b[j - 1]).abs() + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m].min(cap))
}

/// Pairwise DTW between cluster profiles. Pairs involving an empty profile
/// are reported at `cap`.
pub fn profile_dtw_matrix(profiles: &[Vec<f64>], cap: f64) -> Array2<f64> {
    let c = profiles.len();
    let mut out = Array2::zeros((c, c));
    for i in 0..c {
        for j in i + 1..c {
            let v = dtw_distance(&profiles[i], &profiles[j], cap).unwrap_or(cap);
            out[[i, j]] = v;
            out[[j, i]] = v;
        }
    }
    out
}
