//! Feature-cross augmentation.
//!
//! The filtered feature columns are split into `m` random, balanced fields.
//! For every node and every field pair `z < j` the cross value is the inner
//! product of the two field sub-vectors (truncated to the shorter field),
//! giving `R ∈ R^{N × m(m−1)/2}`. The augmented view input is
//! `X^aug = X + R W_aug`. Zero-padding the shorter field would give the same
//! inner product, so there is no separate padding mode.
//!
//! [`ClassicAug`] provides the conventional graph augmentations used as
//! drop-in replacements for the cross view in ablations.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{normalize_adjacency, Graph};
use crate::propagation::{appnp_converge, sgc_filter};
use crate::se_gating::scaled_uniform;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldPartition {
    pub m: usize,
    /// Column indices owned by each field.
    pub fields: Vec<Vec<usize>>,
    pub seed: u64,
}

impl FieldPartition {
    pub fn num_pairs(&self) -> usize {
        self.m * (self.m - 1) / 2
    }

    pub fn num_columns(&self) -> usize {
        self.fields.iter().map(Vec::len).sum()
    }
}

/// Splits a seeded random permutation of `0..d` into `m` fields whose sizes
/// differ by at most one (the first `d mod m` fields get the extra column).
pub fn partition_fields(d: usize, m: usize, seed: u64) -> Result<FieldPartition> {
    if m < 2 || m > d {
        return Err(Error::param(format!("field count m = {m} outside [2, {d}]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..d).collect();
    perm.shuffle(&mut rng);
    let base = d / m;
    let extra = d % m;
    let mut fields = Vec::with_capacity(m);
    let mut at = 0;
    for f in 0..m {
        let len = base + usize::from(f < extra);
        fields.push(perm[at..at + len].to_vec());
        at += len;
    }
    Ok(FieldPartition { m, fields, seed })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossFeatures {
    /// `N × m(m−1)/2`, pairs in lexicographic `(z, j)` order.
    pub r: Array2<f64>,
}

/// Per-node field inner products. Rows are independent, so the work is split
/// across nodes; cost is `O(N · d · m)`.
pub fn cross(xbar: &Array2<f64>, fp: &FieldPartition) -> Result<CrossFeatures> {
    if fp.num_columns() != xbar.ncols() {
        return Err(Error::shape(format!(
            "partition covers {} columns but X̄ has {}",
            fp.num_columns(),
            xbar.ncols()
        )));
    }
    let pairs = fp.num_pairs();
    let m = fp.m;
    // Offsets of each field inside the permuted row buffer.
    let mut offsets = Vec::with_capacity(m + 1);
    offsets.push(0);
    for f in &fp.fields {
        offsets.push(offsets.last().unwrap() + f.len());
    }
    let order: Vec<usize> = fp.fields.iter().flatten().copied().collect();

    let mut r = Array2::zeros((xbar.nrows(), pairs));
    let out_buf = r.as_slice_mut().expect("fresh array is contiguous");
    out_buf
        .par_chunks_mut(pairs)
        .enumerate()
        .for_each_init(
            || vec![0.0; order.len()],
            |buf, (i, out)| {
                let x = xbar.row(i);
                for (b, &c) in buf.iter_mut().zip(&order) {
                    *b = x[c];
                }
                let mut p = 0;
                for z in 0..m {
                    let fz = &buf[offsets[z]..offsets[z + 1]];
                    for j in z + 1..m {
                        let fj = &buf[offsets[j]..offsets[j + 1]];
                        out[p] = fz.iter().zip(fj).map(|(a, b)| a * b).sum();
                        p += 1;
                    }
                }
            },
        );
    Ok(CrossFeatures { r })
}

/// Projection from cross features back to the feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub enum AugProjection {
    /// `R W` with `W` of shape `pairs × d`.
    Linear { w: Array2<f64> },
    /// `ReLU(R W₁) W₂`.
    Mlp { w1: Array2<f64>, w2: Array2<f64> },
}

impl AugProjection {
    pub fn init_linear<R: Rng>(pairs: usize, d: usize, rng: &mut R) -> Self {
        AugProjection::Linear {
            w: scaled_uniform(pairs, d, pairs, rng),
        }
    }

    pub fn init_mlp<R: Rng>(pairs: usize, hidden: usize, d: usize, rng: &mut R) -> Self {
        AugProjection::Mlp {
            w1: scaled_uniform(pairs, hidden, pairs, rng),
            w2: scaled_uniform(hidden, d, hidden, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            AugProjection::Linear { w } => w.nrows(),
            AugProjection::Mlp { w1, .. } => w1.nrows(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            AugProjection::Linear { w } => w.ncols(),
            AugProjection::Mlp { w2, .. } => w2.ncols(),
        }
    }

    /// `R W` (or the MLP equivalent) without the residual `X`.
    pub fn project(&self, r: &Array2<f64>) -> Result<Array2<f64>> {
        if r.ncols() != self.input_dim() {
            return Err(Error::shape(format!(
                "cross features have {} columns, projection expects {}",
                r.ncols(),
                self.input_dim()
            )));
        }
        Ok(match self {
            AugProjection::Linear { w } => r.dot(w),
            AugProjection::Mlp { w1, w2 } => r.dot(w1).mapv(|v| v.max(0.0)).dot(w2),
        })
    }
}

/// `X^aug = X + R W_aug`.
pub fn augment(x: &Array2<f64>, r: &CrossFeatures, w: &AugProjection) -> Result<Array2<f64>> {
    if r.r.nrows() != x.nrows() || w.output_dim() != x.ncols() {
        return Err(Error::shape(format!(
            "augment: X is {:?}, R is {:?}, projection maps to {}",
            x.dim(),
            r.r.dim(),
            w.output_dim()
        )));
    }
    Ok(x + &w.project(&r.r)?)
}

/// Conventional graph augmentations for the second view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassicAug {
    EdgeDrop,
    EdgeAdd,
    Diffusion,
    FeatureMask,
}

impl ClassicAug {
    pub const ALL: [ClassicAug; 4] = [
        ClassicAug::EdgeDrop,
        ClassicAug::EdgeAdd,
        ClassicAug::Diffusion,
        ClassicAug::FeatureMask,
    ];

    /// Builds the second-view input. Edge augmentations and feature masking
    /// are followed by the same `k`-hop filter as the first view; diffusion
    /// is personalized PageRank with teleport probability `rate`.
    pub fn view_input(self, g: &Graph, k: usize, rate: f64, seed: u64) -> Result<Array2<f64>> {
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::param(format!("augmentation rate {rate} outside [0, 1]")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let filtered = |g: &Graph, x: &Array2<f64>| -> Result<Array2<f64>> {
            Ok(sgc_filter(&normalize_adjacency(g), x, k)?.xbar)
        };
        match self {
            ClassicAug::EdgeDrop => {
                let edges = g.edges();
                let drop = (rate * edges.len() as f64).floor() as usize;
                let gone: std::collections::HashSet<usize> =
                    index::sample(&mut rng, edges.len(), drop).into_iter().collect();
                let kept = edges
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !gone.contains(i))
                    .map(|(_, &e)| e);
                filtered(&g.with_edges(kept)?, g.features())
            }
            ClassicAug::EdgeAdd => {
                let n = g.num_nodes();
                let add = (rate * g.edges().len() as f64).floor() as usize;
                let existing: std::collections::HashSet<(usize, usize)> =
                    g.edges().iter().copied().collect();
                let free = (n * n.saturating_sub(1) / 2).saturating_sub(existing.len());
                let add = add.min(free);
                let mut new = std::collections::HashSet::new();
                while new.len() < add {
                    let u = rng.random_range(0..n);
                    let v = rng.random_range(0..n);
                    let p = (u.min(v), u.max(v));
                    if u != v && !existing.contains(&p) {
                        new.insert(p);
                    }
                }
                let mut added: Vec<_> = new.into_iter().collect();
                added.sort_unstable();
                filtered(
                    &g.with_edges(g.edges().iter().copied().chain(added))?,
                    g.features(),
                )
            }
            ClassicAug::Diffusion => {
                let eta = if rate > 0.0 { rate } else { 1.0 };
                Ok(appnp_converge(&normalize_adjacency(g), g.features(), eta, 1e-6, 1000)?.xbar)
            }
            ClassicAug::FeatureMask => {
                let d = g.num_features();
                let masked = (rate * d as f64).floor() as usize;
                let mut x = g.features().clone();
                for c in index::sample(&mut rng, d, masked) {
                    x.column_mut(c).fill(0.0);
                }
                filtered(g, &x)
            }
        }
    }
}

impl fmt::Display for ClassicAug {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassicAug::EdgeDrop => "edge_drop",
            ClassicAug::EdgeAdd => "edge_add",
            ClassicAug::Diffusion => "diffusion",
            ClassicAug::FeatureMask => "feature_mask",
        })
    }
}

impl FromStr for ClassicAug {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edge_drop" => Ok(ClassicAug::EdgeDrop),
            "edge_add" => Ok(ClassicAug::EdgeAdd),
            "diffusion" => Ok(ClassicAug::Diffusion),
            "feature_mask" => Ok(ClassicAug::FeatureMask),
            other => Err(Error::param(format!("unknown augmentation {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn balanced_partitions() {
        let p = partition_fields(4, 2, 0).unwrap();
        assert_eq!(p.fields.iter().map(Vec::len).collect::<Vec<_>>(), vec![2, 2]);
        let p = partition_fields(5, 2, 0).unwrap();
        assert_eq!(p.fields.iter().map(Vec::len).collect::<Vec<_>>(), vec![3, 2]);
        let mut all: Vec<usize> = p.fields.concat();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn partition_is_seeded() {
        assert_eq!(partition_fields(30, 7, 42).unwrap(), partition_fields(30, 7, 42).unwrap());
        assert_ne!(partition_fields(30, 7, 42).unwrap(), partition_fields(30, 7, 43).unwrap());
    }

    #[test]
    fn partition_range_checked() {
        assert!(partition_fields(4, 1, 0).is_err());
        assert!(partition_fields(4, 5, 0).is_err());
    }

    #[test]
    fn single_pair_inner_product() {
        let fp = FieldPartition {
            m: 2,
            fields: vec![vec![0, 1], vec![2, 3]],
            seed: 0,
        };
        let r = cross(&array![[1.0, 2.0, 3.0, 4.0], [0.0, 0.0, 0.0, 0.0]], &fp).unwrap();
        assert_eq!(r.r, array![[11.0], [0.0]]);
    }

    #[test]
    fn unequal_fields_truncate() {
        let fp = FieldPartition {
            m: 2,
            fields: vec![vec![0, 1, 4], vec![2, 3]],
            seed: 0,
        };
        let r = cross(&array![[1.0, 2.0, 3.0, 4.0, 100.0]], &fp).unwrap();
        assert_eq!(r.r, array![[11.0]]);
    }

    #[test]
    fn zero_projection_or_cross_is_identity() {
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        let r = CrossFeatures {
            r: array![[1.0], [2.0]],
        };
        let zero = AugProjection::Linear {
            w: Array2::zeros((1, 2)),
        };
        assert_eq!(augment(&x, &r, &zero).unwrap(), x);
        let r0 = CrossFeatures {
            r: Array2::zeros((2, 1)),
        };
        let w = AugProjection::Linear {
            w: array![[5.0, -1.0]],
        };
        assert_eq!(augment(&x, &r0, &w).unwrap(), x);
        assert_eq!(augment(&x, &r, &w).unwrap(), array![[6.0, 1.0], [13.0, 2.0]]);
    }

    #[test]
    fn augment_shape_checked() {
        let x = Array2::zeros((2, 2));
        let r = CrossFeatures {
            r: Array2::zeros((2, 1)),
        };
        let w = AugProjection::Linear {
            w: Array2::zeros((1, 3)),
        };
        assert!(matches!(augment(&x, &r, &w), Err(Error::Shape(_))));
    }

    #[test]
    fn classic_views_have_feature_shape() {
        let x = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, 0.5]];
        let g = Graph::new(4, [(0, 1), (1, 2), (2, 3)], x, None, None).unwrap();
        for aug in ClassicAug::ALL {
            let v = aug.view_input(&g, 2, 0.2, 1).unwrap();
            assert_eq!(v.dim(), (4, 2));
            assert!(v.iter().all(|x| x.is_finite()));
            assert_eq!(aug.to_string().parse::<ClassicAug>().unwrap(), aug);
        }
    }
}
