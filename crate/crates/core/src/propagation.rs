//! Precomputed graph filters for the three base models.
//!
//! * SGC: `X̄ = A^k X`
//! * DAGNN: `X̄ = Σ_t s_t A^t X` with trainable hop weights `s`
//! * APPNP: fixed point of `Z ← (1 − η) A Z + η X`, i.e. `η (I − (1 − η) A)^{-1} X`

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Axis};

use crate::error::{Error, Result};
use crate::graph::NormalizedGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Sgc,
    Dagnn,
    Appnp,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Sgc => "sgc",
            Scheme::Dagnn => "dagnn",
            Scheme::Appnp => "appnp",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgc" => Ok(Scheme::Sgc),
            "dagnn" => Ok(Scheme::Dagnn),
            "appnp" => Ok(Scheme::Appnp),
            other => Err(Error::param(format!("unknown propagation scheme {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PropagatedFeatures {
    pub xbar: Array2<f64>,
    pub scheme: Scheme,
    pub k: usize,
    /// Teleport weight, APPNP only.
    pub eta: Option<f64>,
    /// Hop weights, DAGNN only.
    pub s_weights: Option<Vec<f64>>,
    /// Cached `A^t X` for `t = 0..=k`, DAGNN only.
    pub hops: Option<Vec<Array2<f64>>>,
    /// `‖Z^t − Z^{t−1}‖_∞` per APPNP iteration.
    pub residuals: Vec<f64>,
}

impl PropagatedFeatures {
    fn plain(xbar: Array2<f64>, scheme: Scheme, k: usize) -> Self {
        Self {
            xbar,
            scheme,
            k,
            eta: None,
            s_weights: None,
            hops: None,
            residuals: Vec::new(),
        }
    }
}

fn check_rows(ng: &NormalizedGraph, x: &Array2<f64>) -> Result<()> {
    if ng.num_nodes() != x.nrows() {
        return Err(Error::shape(format!(
            "graph has {} nodes but features have {} rows",
            ng.num_nodes(),
            x.nrows()
        )));
    }
    Ok(())
}

/// `A^k X` by `k` successive sparse products.
pub fn sgc_filter(ng: &NormalizedGraph, x: &Array2<f64>, k: usize) -> Result<PropagatedFeatures> {
    check_rows(ng, x)?;
    let mut z = x.clone();
    for _ in 0..k {
        z = ng.adj_norm.matmul(&z.view());
    }
    Ok(PropagatedFeatures::plain(z, Scheme::Sgc, k))
}

/// `[X, AX, …, A^k X]`.
pub fn hop_features(ng: &NormalizedGraph, x: &Array2<f64>, k: usize) -> Result<Vec<Array2<f64>>> {
    check_rows(ng, x)?;
    let mut hops = Vec::with_capacity(k + 1);
    hops.push(x.clone());
    for t in 0..k {
        let next = ng.adj_norm.matmul(&hops[t].view());
        hops.push(next);
    }
    Ok(hops)
}

/// `Σ_t s_t H_t` over cached hop features.
pub fn combine_hops(hops: &[Array2<f64>], s: &[f64]) -> Result<Array2<f64>> {
    if hops.len() != s.len() || hops.is_empty() {
        return Err(Error::param(format!(
            "{} hop weights for {} hop matrices",
            s.len(),
            hops.len()
        )));
    }
    let mut out = Array2::zeros(hops[0].raw_dim());
    for (h, &w) in hops.iter().zip(s) {
        out.scaled_add(w, h);
    }
    Ok(out)
}

/// DAGNN-style adaptive combination `Σ_{t=0..k} s_t A^t X`.
pub fn dagnn_combine(
    ng: &NormalizedGraph,
    x: &Array2<f64>,
    k: usize,
    s: &[f64],
) -> Result<PropagatedFeatures> {
    if s.len() != k + 1 {
        return Err(Error::param(format!(
            "DAGNN with k = {k} needs {} hop weights, got {}",
            k + 1,
            s.len()
        )));
    }
    let hops = hop_features(ng, x, k)?;
    let xbar = combine_hops(&hops, s)?;
    Ok(PropagatedFeatures {
        xbar,
        scheme: Scheme::Dagnn,
        k,
        eta: None,
        s_weights: Some(s.to_vec()),
        hops: Some(hops),
        residuals: Vec::new(),
    })
}

/// Uniform hop weights `1 / (k + 1)`.
pub fn dagnn_initial_weights(k: usize) -> Vec<f64> {
    vec![1.0 / (k + 1) as f64; k + 1]
}

fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta <= 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("APPNP eta {eta} outside (0, 1]")))
    }
}

fn appnp_loop(
    ng: &NormalizedGraph,
    x: &Array2<f64>,
    eta: f64,
    max_iters: usize,
    tol: Option<f64>,
) -> Result<PropagatedFeatures> {
    check_rows(ng, x)?;
    check_eta(eta)?;
    if max_iters == 0 {
        return Err(Error::param("APPNP needs at least one iteration"));
    }
    let mut z = x.clone();
    let mut residuals = Vec::with_capacity(max_iters);
    for _ in 0..max_iters {
        let mut next = ng.adj_norm.matmul(&z.view());
        next *= 1.0 - eta;
        next.scaled_add(eta, x);
        let res = (&next - &z).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        residuals.push(res);
        z = next;
        if tol.is_some_and(|t| res < t) {
            break;
        }
    }
    Ok(PropagatedFeatures {
        xbar: z,
        scheme: Scheme::Appnp,
        k: residuals.len(),
        eta: Some(eta),
        s_weights: None,
        hops: None,
        residuals,
    })
}

/// Exactly `iters` steps of `Z ← (1 − η) A Z + η X` from `Z⁰ = X`.
pub fn appnp_propagate(
    ng: &NormalizedGraph,
    x: &Array2<f64>,
    eta: f64,
    iters: usize,
) -> Result<PropagatedFeatures> {
    appnp_loop(ng, x, eta, iters, None)
}

/// Iterates until the sup-norm step falls below `tol` or `max_iters` is hit.
pub fn appnp_converge(
    ng: &NormalizedGraph,
    x: &Array2<f64>,
    eta: f64,
    tol: f64,
    max_iters: usize,
) -> Result<PropagatedFeatures> {
    appnp_loop(ng, x, eta, max_iters, Some(tol))
}

/// Row-wise softmax, used when the APPNP output is wrapped in a softmax.
pub fn row_softmax(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let s = row.sum();
        row /= s;
    }
    out
}
