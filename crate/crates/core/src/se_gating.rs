//! Squeeze-and-excitation feature scoring and per-node gating.
//!
//! The squeeze step averages the original features over nodes, the
//! excitation step maps that summary through a bottleneck MLP
//! (`σ(W₂ ReLU(W₁ q))`) to an importance score per feature, and the top `n`
//! features (scaled by their importance) become the node's personalized
//! identifiers `Xⁿ`. The gate `σ(Xⁿ W₃)` then mixes the `d_out` implicit
//! per-cluster models, which collapses to a Hadamard product with the shared
//! projection: `Y = g(Xⁿ) ⊙ X̄ W`.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;

use crate::error::{Error, Result};

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Uniform in `[-1/√fan_in, 1/√fan_in]`.
pub fn scaled_uniform<R: Rng>(rows: usize, cols: usize, fan_in: usize, rng: &mut R) -> Array2<f64> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..=bound))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SEParams {
    /// `d × h`, reduces the feature summary.
    pub w1: Array2<f64>,
    pub b1: Option<Array1<f64>>,
    /// `h × d`, restores the feature dimension.
    pub w2: Array2<f64>,
    pub b2: Option<Array1<f64>>,
}

impl SEParams {
    pub fn init<R: Rng>(d: usize, hidden: usize, bias: bool, rng: &mut R) -> Self {
        Self {
            w1: scaled_uniform(d, hidden, d, rng),
            b1: bias.then(|| Array1::zeros(hidden)),
            w2: scaled_uniform(hidden, d, hidden, rng),
            b2: bias.then(|| Array1::zeros(d)),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn feature_dim(&self) -> usize {
        self.w1.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateParams {
    /// `n × d_out`.
    pub w3: Array2<f64>,
    pub b3: Option<Array1<f64>>,
}

impl GateParams {
    pub fn init<R: Rng>(n: usize, d_out: usize, bias: bool, rng: &mut R) -> Self {
        Self {
            w3: scaled_uniform(n, d_out, n, rng),
            b3: bias.then(|| Array1::zeros(d_out)),
        }
    }
}

/// Shared projection `W` (`d × d_out`) used by both views.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedProjection {
    pub w: Array2<f64>,
}

impl SharedProjection {
    pub fn init<R: Rng>(d: usize, d_out: usize, rng: &mut R) -> Self {
        Self {
            w: scaled_uniform(d, d_out, d, rng),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectedFeatures {
    /// Column indices into `X`, by descending importance.
    pub indices: Vec<usize>,
    /// `N × n` selected (and optionally importance-scaled) columns.
    pub values: Array2<f64>,
    /// Importance `q̃` for every feature.
    pub importance: Array1<f64>,
}

/// Column-wise mean of `X`.
pub fn squeeze(x: &Array2<f64>) -> Result<Array1<f64>> {
    x.mean_axis(Axis(0))
        .ok_or_else(|| Error::Precondition("squeeze needs at least one node".into()))
}

/// Pre-activations of the excitation MLP, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Excitation {
    pub hidden_pre: Array1<f64>,
    pub hidden: Array1<f64>,
    pub importance: Array1<f64>,
}

pub fn excite_traced(q: ArrayView1<'_, f64>, p: &SEParams) -> Result<Excitation> {
    if q.len() != p.w1.nrows() || p.w2.dim() != (p.w1.ncols(), p.w1.nrows()) {
        return Err(Error::shape(format!(
            "excitation: q has length {}, W1 is {:?}, W2 is {:?}",
            q.len(),
            p.w1.dim(),
            p.w2.dim()
        )));
    }
    let mut hidden_pre = q.dot(&p.w1);
    if let Some(b) = &p.b1 {
        hidden_pre += b;
    }
    let hidden = hidden_pre.mapv(|v| v.max(0.0));
    let mut out = hidden.dot(&p.w2);
    if let Some(b) = &p.b2 {
        out += b;
    }
    Ok(Excitation {
        hidden_pre,
        hidden,
        importance: out.mapv(sigmoid),
    })
}

/// `q̃ = σ(W₂ ReLU(W₁ q))`, every entry in `(0, 1)`.
pub fn excite(q: &Array1<f64>, p: &SEParams) -> Result<Array1<f64>> {
    Ok(excite_traced(q.view(), p)?.importance)
}

/// Feature indices by descending importance; ties go to the lower index.
pub fn rank_features(importance: &Array1<f64>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..importance.len()).collect();
    idx.sort_by(|&a, &b| importance[b].total_cmp(&importance[a]).then(a.cmp(&b)));
    idx
}

/// Selects the features at ranks `start..start + len` of the importance
/// ordering. With `scale` the selected columns are multiplied by their
/// importance (`F_top(q̃ X)`), otherwise copied as-is.
pub fn select_ranked(
    x: &Array2<f64>,
    importance: &Array1<f64>,
    start: usize,
    len: usize,
    scale: bool,
) -> Result<SelectedFeatures> {
    let d = x.ncols();
    if importance.len() != d {
        return Err(Error::shape(format!(
            "{} importance scores for {d} features",
            importance.len()
        )));
    }
    if len == 0 || start + len > d {
        return Err(Error::param(format!(
            "cannot select ranks {start}..{} of {d} features",
            start + len
        )));
    }
    let indices: Vec<usize> = rank_features(importance)[start..start + len].to_vec();
    let mut values = x.select(Axis(1), &indices);
    if scale {
        for (mut col, &j) in values.axis_iter_mut(Axis(1)).zip(&indices) {
            col *= importance[j];
        }
    }
    Ok(SelectedFeatures {
        indices,
        values,
        importance: importance.clone(),
    })
}

/// The `n` most important features, importance-scaled.
pub fn select_top_n(x: &Array2<f64>, importance: &Array1<f64>, n: usize) -> Result<SelectedFeatures> {
    if n == 0 || n > x.ncols() {
        return Err(Error::param(format!(
            "n = {n} outside [1, {}]",
            x.ncols()
        )));
    }
    select_ranked(x, importance, 0, n, true)
}

/// Gate pre-activations `Xⁿ W₃ (+ b₃)`.
pub fn gate_logits(xn: &Array2<f64>, gp: &GateParams) -> Result<Array2<f64>> {
    if xn.ncols() != gp.w3.nrows() {
        return Err(Error::shape(format!(
            "gate: {} selected features but W3 has {} rows",
            xn.ncols(),
            gp.w3.nrows()
        )));
    }
    let mut z = xn.dot(&gp.w3);
    if let Some(b) = &gp.b3 {
        z += b;
    }
    Ok(z)
}

/// `g(Xⁿ) = σ(Xⁿ W₃)`, one row of mixing weights per node.
pub fn gate(xn: &SelectedFeatures, gp: &GateParams) -> Result<Array2<f64>> {
    Ok(gate_logits(&xn.values, gp)?.mapv(sigmoid))
}

/// `gates ⊙ (base · W)`.
pub fn compose_view(
    base: &Array2<f64>,
    gates: &Array2<f64>,
    w: &SharedProjection,
) -> Result<Array2<f64>> {
    if base.ncols() != w.w.nrows() {
        return Err(Error::shape(format!(
            "view base has {} columns but W has {} rows",
            base.ncols(),
            w.w.nrows()
        )));
    }
    if gates.dim() != (base.nrows(), w.w.ncols()) {
        return Err(Error::shape(format!(
            "gates are {:?}, expected {:?}",
            gates.dim(),
            (base.nrows(), w.w.ncols())
        )));
    }
    Ok(base.dot(&w.w) * gates)
}
