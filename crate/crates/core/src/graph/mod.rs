//! Attributed graph data model.
//!
//! A [`Graph`] stores undirected edges once as `(i, j)` with `i < j`, a dense
//! node-feature matrix and optional ground-truth labels. [`NormalizedGraph`]
//! holds the symmetric normalized adjacency `D^{-1/2}(Ã + I)D^{-1/2}` where
//! `D` is the degree matrix of `Ã + I`.

mod io;
mod perturb;
mod sparse;
mod stats;
mod synthetic;

pub use io::{
    load_dataset, read_labels, read_matrix_bin, read_matrix_csv, save_dataset, write_matrix_bin,
    MatrixHeader,
};
pub use perturb::perturb_edges;
pub use sparse::CsrMatrix;
pub use stats::{acd, acd_with_hops, ACD_HOPS};
pub use synthetic::{generate_synthetic, SyntheticSpec};

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
    features: Array2<f64>,
    labels: Option<Vec<usize>>,
    num_clusters: Option<usize>,
}

impl Graph {
    /// Validates and canonicalizes the edge list: each pair is stored as
    /// `(min, max)`, reversed and repeated pairs collapse to one entry, and
    /// self-loops are dropped.
    pub fn new(
        num_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        features: Array2<f64>,
        labels: Option<Vec<usize>>,
        num_clusters: Option<usize>,
    ) -> Result<Self> {
        if features.nrows() != num_nodes {
            return Err(Error::shape(format!(
                "feature matrix has {} rows, expected {num_nodes}",
                features.nrows()
            )));
        }
        if let Some((pos, _)) = features.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            let d = features.ncols().max(1);
            return Err(Error::Validation(format!(
                "non-finite feature at node {} column {}",
                pos / d,
                pos % d
            )));
        }
        let mut canon = Vec::new();
        for (u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::Validation(format!(
                    "edge ({u}, {v}) has an endpoint outside [0, {num_nodes})"
                )));
            }
            if u == v {
                log::debug!("dropping self-loop on node {u}");
                continue;
            }
            canon.push((u.min(v), u.max(v)));
        }
        canon.sort_unstable();
        canon.dedup();

        if let Some(labels) = &labels {
            if labels.len() != num_nodes {
                return Err(Error::shape(format!(
                    "{} labels for {num_nodes} nodes",
                    labels.len()
                )));
            }
        }
        let num_clusters = match (&labels, num_clusters) {
            (Some(l), Some(c)) => {
                if let Some(bad) = l.iter().find(|&&y| y >= c) {
                    return Err(Error::Validation(format!(
                        "label {bad} outside [0, {c})"
                    )));
                }
                Some(c)
            }
            (Some(l), None) => Some(l.iter().max().map_or(0, |m| m + 1)),
            (None, c) => c,
        };

        Ok(Self {
            num_nodes,
            edges: canon,
            features,
            labels,
            num_clusters,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_features(&self) -> usize {
        self.features.ncols()
    }

    /// Canonical edge list, sorted, each pair with `i < j`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn num_clusters(&self) -> Option<usize> {
        self.num_clusters
    }

    pub fn with_edges(&self, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        Graph::new(
            self.num_nodes,
            edges,
            self.features.clone(),
            self.labels.clone(),
            self.num_clusters,
        )
    }

    pub fn with_features(&self, features: Array2<f64>) -> Result<Self> {
        Graph::new(
            self.num_nodes,
            self.edges.iter().copied(),
            features,
            self.labels.clone(),
            self.num_clusters,
        )
    }

    /// Plain 0/1 adjacency `Ã` without self-loops, both directions stored.
    pub fn adjacency(&self) -> CsrMatrix {
        let mut trip = Vec::with_capacity(self.edges.len() * 2);
        for &(u, v) in &self.edges {
            trip.push((u, v, 1.0));
            trip.push((v, u, 1.0));
        }
        CsrMatrix::from_triplets(self.num_nodes, self.num_nodes, &trip)
    }

    /// Neighbour lists derived from the edge set.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut nb = vec![Vec::new(); self.num_nodes];
        for &(u, v) in &self.edges {
            nb[u].push(v);
            nb[v].push(u);
        }
        nb
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedGraph {
    pub adj_norm: CsrMatrix,
    /// Degrees of `Ã + I`.
    pub degrees: Array1<f64>,
}

impl NormalizedGraph {
    pub fn num_nodes(&self) -> usize {
        self.adj_norm.n_rows()
    }

    /// Dense `L = I - A`, for small-graph checks.
    pub fn laplacian_dense(&self) -> Array2<f64> {
        Array2::eye(self.num_nodes()) - self.adj_norm.to_dense()
    }

    /// Restriction to the node subset `nodes` (used for minibatches).
    pub fn submatrix(&self, nodes: &[usize]) -> NormalizedGraph {
        NormalizedGraph {
            adj_norm: self.adj_norm.submatrix(nodes),
            degrees: nodes.iter().map(|&i| self.degrees[i]).collect(),
        }
    }
}

pub fn normalize_adjacency(g: &Graph) -> NormalizedGraph {
    let n = g.num_nodes();
    let mut degrees = Array1::<f64>::from_elem(n, 1.0);
    for &(u, v) in g.edges() {
        degrees[u] += 1.0;
        degrees[v] += 1.0;
    }
    let mut trip = Vec::with_capacity(n + 2 * g.edges().len());
    for i in 0..n {
        trip.push((i, i, 1.0 / degrees[i]));
    }
    for &(u, v) in g.edges() {
        let w = 1.0 / (degrees[u] * degrees[v]).sqrt();
        trip.push((u, v, w));
        trip.push((v, u, w));
    }
    NormalizedGraph {
        adj_norm: CsrMatrix::from_triplets(n, n, &trip),
        degrees,
    }
}

/// Random-walk filter `D^{-1} Ã X` on the graph without self-loops. Isolated
/// nodes keep their own features.
pub fn random_walk_filter(g: &Graph, x: &Array2<f64>) -> Array2<f64> {
    let nb = g.neighbors();
    let mut out = Array2::zeros(x.raw_dim());
    for (i, list) in nb.iter().enumerate() {
        let mut row = out.row_mut(i);
        if list.is_empty() {
            row.assign(&x.row(i));
            continue;
        }
        for &j in list {
            row += &x.row(j);
        }
        row /= list.len() as f64;
    }
    out
}
