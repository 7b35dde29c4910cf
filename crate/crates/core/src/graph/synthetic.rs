use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::Graph;
use crate::error::{Error, Result};

/// Two-block stochastic block model with Gaussian node features.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub nodes_per_cluster: usize,
    pub mu1: Vec<f64>,
    pub mu2: Vec<f64>,
    pub intra_edge_prob: f64,
    pub inter_edge_prob: f64,
    /// Per-coordinate variance σ².
    pub feature_variance: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Non-negative block means: `mu1` is constant on the first half of the
    /// coordinates, `mu2` on the second half, scaled so `‖mu1 − mu2‖ = separation`.
    pub fn block_means(d: usize, separation: f64) -> (Vec<f64>, Vec<f64>) {
        let c = separation / (d as f64).sqrt();
        let half = d / 2;
        let mu1 = (0..d).map(|u| if u < half { c } else { 0.0 }).collect();
        let mu2 = (0..d).map(|u| if u < half { 0.0 } else { c }).collect();
        (mu1, mu2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu1.len() != self.mu2.len() || self.mu1.is_empty() {
            return Err(Error::param("cluster means must have equal, non-zero length"));
        }
        let dot: f64 = self.mu1.iter().zip(&self.mu2).map(|(a, b)| a * b).sum();
        if dot < 0.0 {
            return Err(Error::param(format!("mu1·mu2 = {dot} must be non-negative")));
        }
        for p in [self.intra_edge_prob, self.inter_edge_prob] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::param(format!("edge probability {p} outside [0, 1]")));
            }
        }
        if self.feature_variance.is_nan() || self.feature_variance < 0.0 {
            return Err(Error::param("feature variance must be non-negative"));
        }
        if self.intra_edge_prob <= self.inter_edge_prob {
            log::warn!("synthetic instance is not homophilic (intra <= inter)");
        }
        Ok(())
    }
}

/// Nodes `0..n` form cluster 0 and `n..2n` cluster 1. Features are drawn
/// first (row-major), then one uniform draw per pair `i < j` decides each edge.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Graph> {
    spec.validate()?;
    let n = spec.nodes_per_cluster;
    let total = 2 * n;
    let d = spec.mu1.len();
    let sigma = spec.feature_variance.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let labels: Vec<usize> = (0..total).map(|i| usize::from(i >= n)).collect();
    let mut x = Array2::zeros((total, d));
    for i in 0..total {
        let mu = if labels[i] == 0 { &spec.mu1 } else { &spec.mu2 };
        for u in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            x[[i, u]] = mu[u] + sigma * z;
        }
    }

    let mut edges = Vec::new();
    for i in 0..total {
        for j in i + 1..total {
            let p = if labels[i] == labels[j] {
                spec.intra_edge_prob
            } else {
                spec.inter_edge_prob
            };
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Graph::new(total, edges, x, Some(labels), Some(2))
}
