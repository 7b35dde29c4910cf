//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use fpgc::graph::{generate_synthetic, Graph, SyntheticSpec};
use fpgc::training::TrainConfig;
use ndarray::Array2;

/// Best accuracy over every injective relabelling of `pred` into `truth`'s
/// label space (padding with unmatched labels when counts differ).
pub fn accuracy_by_permutation(pred: &[usize], truth: &[usize]) -> f64 {
    let kp = pred.iter().max().map_or(0, |m| m + 1);
    let kt = truth.iter().max().map_or(0, |m| m + 1);
    let k = kp.max(kt);
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = 0usize;
    permute(&mut perm, 0, &mut |p| {
        let hits = pred.iter().zip(truth).filter(|(a, b)| p[**a] == **b).count();
        best = best.max(hits);
    });
    best as f64 / pred.len() as f64
}

fn permute(v: &mut Vec<usize>, i: usize, f: &mut dyn FnMut(&[usize])) {
    if i == v.len() {
        f(v);
        return;
    }
    for j in i..v.len() {
        v.swap(i, j);
        permute(v, i + 1, f);
        v.swap(i, j);
    }
}

/// NMI from raw counts: `I = Σ n_ij/N · log(N n_ij / (a_i b_j))`,
/// normalised by `(H_a + H_b) / 2`; 0 when both entropies vanish.
pub fn nmi_from_counts(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0.0f64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1.0;
    }
    let ra: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let cb: Vec<f64> = (0..kb).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let h = |c: &[f64]| -> f64 { c.iter().filter(|&&v| v > 0.0).map(|&v| -(v / n) * (v / n).ln()).sum() };
    let mut mi = 0.0;
    for i in 0..ka {
        for j in 0..kb {
            let nij = table[i][j];
            if nij > 0.0 {
                mi += nij / n * (n * nij / (ra[i] * cb[j])).ln();
            }
        }
    }
    let denom = (h(&ra) + h(&cb)) / 2.0;
    if denom == 0.0 {
        0.0
    } else {
        mi / denom
    }
}

/// Minimum warping-path cost by enumerating every monotone path.
pub fn dtw_by_paths(a: &[f64], b: &[f64]) -> f64 {
    fn walk(a: &[f64], b: &[f64], i: usize, j: usize, acc: f64, best: &mut f64) {
        let acc = acc + (a[i] - b[j]).abs();
        if i + 1 == a.len() && j + 1 == b.len() {
            *best = best.min(acc);
            return;
        }
        if i + 1 < a.len() {
            walk(a, b, i + 1, j, acc, best);
        }
        if j + 1 < b.len() {
            walk(a, b, i, j + 1, acc, best);
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            walk(a, b, i + 1, j + 1, acc, best);
        }
    }
    let mut best = f64::INFINITY;
    walk(a, b, 0, 0, 0.0, &mut best);
    best
}

/// Explicit mixture of `d_out` per-cluster models: model `j` projects with
/// `W` followed by the diagonal selector `e_j e_jᵀ`, weighted by gate `g_ij`.
pub fn mixture_of_models(xbar: &Array2<f64>, gates: &Array2<f64>, w: &Array2<f64>) -> Array2<f64> {
    let (n, d_out) = (xbar.nrows(), w.ncols());
    let mut y = Array2::zeros((n, d_out));
    for i in 0..n {
        for j in 0..d_out {
            let mut wj = Array2::<f64>::zeros((d_out, d_out));
            wj[[j, j]] = 1.0;
            let model_out = xbar.row(i).dot(w).dot(&wj);
            y.row_mut(i).scaled_add(gates[[i, j]], &model_out);
        }
    }
    y
}

/// Two-cluster SBM used by the end-to-end checks: 100 nodes per cluster,
/// edge probabilities 0.1 / 0.01, `‖μ₁ − μ₂‖ = 2`, unit variance, d = 16.
pub fn sbm_instance(seed: u64) -> Graph {
    let (mu1, mu2) = SyntheticSpec::block_means(16, 2.0);
    generate_synthetic(&SyntheticSpec {
        nodes_per_cluster: 100,
        mu1,
        mu2,
        intra_edge_prob: 0.1,
        inter_edge_prob: 0.01,
        feature_variance: 1.0,
        seed,
    })
    .unwrap()
}

/// `{k, m, n, λ} = {3, 4, 8, 1}`, 400 epochs, 64-wide embeddings.
pub fn sbm_config(seed: u64) -> TrainConfig {
    TrainConfig {
        k: 3,
        m: 4,
        n: 8,
        lambda: 1.0,
        lr: 1e-3,
        epochs: 400,
        hidden_dim: 64,
        d_out: 64,
        seed,
        ..TrainConfig::default()
    }
}
