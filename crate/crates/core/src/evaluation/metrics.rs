//! Clustering accuracy (optimal label matching) and NMI.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Maps arbitrary label values to `0..k` in ascending order.
fn densify(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = BTreeMap::new();
    for &l in labels {
        let next = map.len();
        map.entry(l).or_insert(next);
    }
    // Re-number in sorted key order so the mapping is order independent.
    for (i, v) in map.values_mut().enumerate() {
        *v = i;
    }
    (labels.iter().map(|l| map[l]).collect(), map.len())
}

/// `counts[p][t]` for dense predicted and true labels.
fn contingency(pred: &[usize], truth: &[usize]) -> Result<Vec<Vec<usize>>> {
    if pred.len() != truth.len() {
        return Err(Error::param(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    let (p, kp) = densify(pred);
    let (t, kt) = densify(truth);
    let mut c = vec![vec![0usize; kt]; kp];
    for (&a, &b) in p.iter().zip(&t) {
        c[a][b] += 1;
    }
    Ok(c)
}

/// Minimum-cost perfect matching on a square cost matrix; returns the
/// column assigned to each row.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // Potentials formulation with 1-based sentinel row/column 0.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Fraction of nodes correctly labelled under the best one-to-one mapping
/// from predicted to true clusters.
pub fn clustering_accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let c = contingency(pred, truth)?;
    if pred.is_empty() {
        return Ok(0.0);
    }
    let size = c.len().max(c[0].len());
    let mut cost = vec![vec![0.0; size]; size];
    for (i, row) in c.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            cost[i][j] = -(v as f64);
        }
    }
    let matched: usize = hungarian(&cost)
        .iter()
        .enumerate()
        .filter(|&(i, &j)| i < c.len() && j < c[0].len())
        .map(|(i, &j)| c[i][j])
        .sum();
    Ok(matched as f64 / pred.len() as f64)
}

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Mutual information normalized by the arithmetic mean of the two
/// entropies. Returns 0 when both partitions are a single cluster.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let c = contingency(pred, truth)?;
    if pred.is_empty() {
        return Ok(0.0);
    }
    let n = pred.len() as f64;
    let rows: Vec<usize> = c.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<usize> = (0..c[0].len()).map(|j| c.iter().map(|r| r[j]).sum()).collect();
    let h_p = entropy(rows.iter().copied(), n);
    let h_t = entropy(cols.iter().copied(), n);
    let denom = 0.5 * (h_p + h_t);
    if denom <= 0.0 {
        log::info!("NMI of two single-cluster partitions is defined as 0");
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for (i, row) in c.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v > 0 {
                let pij = v as f64 / n;
                mi += pij * (pij * n * n / (rows[i] as f64 * cols[j] as f64)).ln();
            }
        }
    }
    Ok((mi / denom).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub acc: f64,
    pub nmi: f64,
}

pub fn score(pred: &[usize], truth: &[usize]) -> Result<Metrics> {
    Ok(Metrics {
        acc: clustering_accuracy(pred, truth)?,
        nmi: nmi(pred, truth)?,
    })
}
