use ndarray::{Array1, Array2};

use super::{normalize_adjacency, Graph};
use crate::error::{Error, Result};

/// Filter depth used when reporting the aggregation class distance.
pub const ACD_HOPS: usize = 5;

/// Aggregation class distance with the default filter depth.
pub fn acd(g: &Graph) -> Result<f64> {
    acd_with_hops(g, ACD_HOPS)
}

/// Mean pairwise Euclidean distance between per-class means of `A^k X`,
/// i.e. `2 / (C² − C) · Σ_{i<j} ‖X'_i − X'_j‖`.
pub fn acd_with_hops(g: &Graph, k: usize) -> Result<f64> {
    let labels = g
        .labels()
        .ok_or_else(|| Error::Precondition("aggregation class distance needs labels".into()))?;
    let c = g.num_clusters().unwrap_or(0);
    if c < 2 {
        return Err(Error::Precondition(format!(
            "aggregation class distance needs at least 2 classes, got {c}"
        )));
    }
    let a = normalize_adjacency(g).adj_norm;
    let mut xbar = g.features().clone();
    for _ in 0..k {
        xbar = a.matmul(&xbar.view());
    }

    let d = g.num_features();
    let mut sums = Array2::<f64>::zeros((c, d));
    let mut counts = vec![0usize; c];
    for (i, &y) in labels.iter().enumerate() {
        let mut row = sums.row_mut(y);
        row += &xbar.row(i);
        counts[y] += 1;
    }
    if let Some(empty) = counts.iter().position(|&n| n == 0) {
        return Err(Error::Precondition(format!("class {empty} has no nodes")));
    }
    let means: Vec<Array1<f64>> = (0..c)
        .map(|y| sums.row(y).mapv(|v| v / counts[y] as f64))
        .collect();

    let mut total = 0.0;
    for i in 0..c {
        for j in i + 1..c {
            total += (&means[i] - &means[j]).mapv(|v| v * v).sum().sqrt();
        }
    }
    Ok(2.0 * total / (c * c - c) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identical_class_means_give_zero() {
        let g = Graph::new(
            4,
            [],
            array![[1.0, 2.0], [3.0, 4.0], [3.0, 4.0], [1.0, 2.0]],
            Some(vec![0, 0, 1, 1]),
            None,
        )
        .unwrap();
        assert!(acd(&g).unwrap().abs() < 1e-12);
    }

    #[test]
    fn singleton_classes_three_four_five() {
        let g = Graph::new(2, [], array![[0.0, 0.0], [3.0, 4.0]], Some(vec![0, 1]), None).unwrap();
        assert!((acd_with_hops(&g, 1).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn needs_labels() {
        let g = Graph::new(2, [], Array2::zeros((2, 1)), None, None).unwrap();
        assert!(matches!(acd(&g), Err(Error::Precondition(_))));
    }
}
