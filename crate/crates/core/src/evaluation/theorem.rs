//! Empirical check of the overlap/posterior-gap relationship on synthetic
//! two-cluster data.
//!
//! Features are filtered with the random-walk operator `D⁻¹ÃX`. For node
//! `i` with `p` same-cluster and `q` other-cluster neighbours the filtered
//! vector is Gaussian with mean `(pμ_c + qμ_other)/(p+q)` and variance
//! `σ²/(p+q)`. The posterior `P(Y_i = c₁ | f_i)` uses only the coordinates in
//! `T_i`, the node's top-`t` filtered features, and equal class priors.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::graph::{generate_synthetic, random_walk_filter, SyntheticSpec};
use crate::se_gating::sigmoid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremTrial {
    pub i: usize,
    pub j: usize,
    pub overlap: f64,
    pub prob_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoremSummary {
    pub trials: Vec<TheoremTrial>,
    pub spearman: f64,
    pub p_value: f64,
}

pub const MIN_TRIALS: usize = 30;

/// Filtered features, personalized sets and per-node posteriors.
#[derive(Debug, Clone)]
pub struct TheoremSetup {
    pub xbar: Array2<f64>,
    pub top_sets: Vec<Vec<usize>>,
    pub posteriors: Array1<f64>,
}

fn top_t(row: ndarray::ArrayView1<'_, f64>, t: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..row.len()).collect();
    idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    idx.truncate(t);
    idx.sort_unstable();
    idx
}

pub fn theorem_setup(spec: &SyntheticSpec, top: usize) -> Result<TheoremSetup> {
    if spec.feature_variance.is_nan() || spec.feature_variance <= 0.0 {
        return Err(Error::param(format!(
            "posterior needs positive feature variance, got {}",
            spec.feature_variance
        )));
    }
    let d = spec.mu1.len();
    if top == 0 || top > d {
        return Err(Error::param(format!("set size {top} outside [1, {d}]")));
    }
    let g = generate_synthetic(spec)?;
    let labels = g.labels().expect("synthetic graphs carry labels").to_vec();
    let xbar = random_walk_filter(&g, g.features());
    let nb = g.neighbors();
    let (mu1, mu2) = (&spec.mu1, &spec.mu2);
    let mut top_sets = Vec::with_capacity(g.num_nodes());
    let mut posteriors = Array1::zeros(g.num_nodes());
    for i in 0..g.num_nodes() {
        let same = nb[i].iter().filter(|&&j| labels[j] == labels[i]).count() as f64;
        let other = nb[i].len() as f64 - same;
        // Isolated nodes keep their own features: one same-cluster "neighbour".
        let (p, q) = if same + other == 0.0 { (1.0, 0.0) } else { (same, other) };
        let var = spec.feature_variance / (p + q);
        let set = top_t(xbar.row(i), top);
        let mut logit = 0.0;
        for &u in &set {
            let m_c1 = (p * mu1[u] + q * mu2[u]) / (p + q);
            let m_c2 = (q * mu1[u] + p * mu2[u]) / (p + q);
            let f = xbar[[i, u]];
            logit += ((f - m_c2).powi(2) - (f - m_c1).powi(2)) / (2.0 * var);
        }
        posteriors[i] = sigmoid(logit);
        top_sets.push(set);
    }
    Ok(TheoremSetup {
        xbar,
        top_sets,
        posteriors,
    })
}

impl TheoremSetup {
    pub fn trial(&self, i: usize, j: usize) -> TheoremTrial {
        let (a, b) = (&self.top_sets[i], &self.top_sets[j]);
        let overlap = a
            .iter()
            .filter(|u| b.binary_search(u).is_ok())
            .map(|&u| self.xbar[[i, u]] * self.xbar[[j, u]])
            .sum();
        TheoremTrial {
            i,
            j,
            overlap,
            prob_gap: (self.posteriors[i] - self.posteriors[j]).abs(),
        }
    }
}

/// Average ranks, ties sharing their mean rank.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut s = 0;
    while s < idx.len() {
        let mut e = s;
        while e + 1 < idx.len() && v[idx[e + 1]] == v[idx[s]] {
            e += 1;
        }
        let avg = (s + e) as f64 / 2.0 + 1.0;
        for &k in &idx[s..=e] {
            r[k] = avg;
        }
        s = e + 1;
    }
    r
}

/// Spearman rank correlation and its two-sided p-value from the
/// t-approximation. Constant inputs give `(0, 1)`.
pub fn spearman(a: &[f64], b: &[f64]) -> (f64, f64) {
    let n = a.len();
    if n < 3 || n != b.len() {
        return (0.0, 1.0);
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let mean = (n as f64 + 1.0) / 2.0;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for k in 0..n {
        let (x, y) = (ra[k] - mean, rb[k] - mean);
        sab += x * y;
        saa += x * x;
        sbb += y * y;
    }
    if saa == 0.0 || sbb == 0.0 {
        return (0.0, 1.0);
    }
    let r = sab / (saa * sbb).sqrt();
    if r.abs() >= 1.0 {
        return (r.signum(), 0.0);
    }
    let df = (n - 2) as f64;
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (r, 2.0 * dist.cdf(-t.abs()))
}

/// Samples `trials` distinct-node pairs and correlates overlap with gap.
pub fn theorem1_experiment(spec: &SyntheticSpec, trials: usize, top: usize, seed: u64) -> Result<TheoremSummary> {
    if trials < MIN_TRIALS {
        return Err(Error::param(format!("need at least {MIN_TRIALS} trials, got {trials}")));
    }
    let setup = theorem_setup(spec, top)?;
    let n = setup.xbar.nrows();
    if n < 2 {
        return Err(Error::param("need at least two nodes"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trials: Vec<TheoremTrial> = (0..trials)
        .map(|_| {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            setup.trial(i, j)
        })
        .collect();
    let overlaps: Vec<f64> = trials.iter().map(|t| t.overlap).collect();
    let gaps: Vec<f64> = trials.iter().map(|t| t.prob_gap).collect();
    let (spearman, p_value) = spearman(&overlaps, &gaps);
    Ok(TheoremSummary {
        trials,
        spearman,
        p_value,
    })
}
