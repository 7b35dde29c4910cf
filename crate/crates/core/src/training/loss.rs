//! Contrastive and reconstruction objectives with their gradients.
//!
//! The contrastive term treats `(Y_i, Y'_i)` as the positive pair; both the
//! cross-view and the intra-view denominators run over every `j`, including
//! `j = i`. The reconstruction term is `‖Y' Yᵀ − A‖_F / N²`, evaluated without
//! materialising the dense `N × N` residual.

use ndarray::{Array1, Array2, Axis};

use crate::graph::NormalizedGraph;

/// The two embedding views produced by one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewPair {
    pub y: Array2<f64>,
    pub y_prime: Array2<f64>,
}

impl ViewPair {
    /// `(Y + Y') / 2`, the matrix handed to k-means.
    pub fn fused(&self) -> Array2<f64> {
        (&self.y + &self.y_prime) * 0.5
    }

    pub fn is_finite(&self) -> bool {
        self.y.iter().chain(self.y_prime.iter()).all(|v| v.is_finite())
    }
}

const NORM_EPS: f64 = 1e-12;

fn row_norms(y: &Array2<f64>) -> Array1<f64> {
    y.map_axis(Axis(1), |r| r.dot(&r).sqrt())
}

fn normalize_rows(y: &Array2<f64>, norms: &Array1<f64>) -> Array2<f64> {
    let mut u = y.clone();
    for (mut row, &n) in u.axis_iter_mut(Axis(0)).zip(norms) {
        row /= n + NORM_EPS;
    }
    u
}

/// Backward through `u = y / (‖y‖ + ε)`.
fn normalize_rows_backward(y: &Array2<f64>, norms: &Array1<f64>, grad_u: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(y.raw_dim());
    for i in 0..y.nrows() {
        let (yr, gr, nrm) = (y.row(i), grad_u.row(i), norms[i]);
        let denom = nrm + NORM_EPS;
        let mut o = out.row_mut(i);
        o.assign(&(&gr / denom));
        if nrm > 0.0 {
            let coef = gr.dot(&yr) / (denom * denom * nrm);
            o.scaled_add(-coef, &yr);
        }
    }
    out
}

/// Numerically stable `log(Σ_j e^{a_j} + Σ_j e^{b_j})`.
fn log_sum_exp2(a: ndarray::ArrayView1<'_, f64>, b: ndarray::ArrayView1<'_, f64>) -> f64 {
    let mx = a.iter().chain(b.iter()).cloned().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = a.iter().chain(b.iter()).map(|v| (v - mx).exp()).sum();
    mx + s.ln()
}

struct Similarities {
    u: Array2<f64>,
    v: Array2<f64>,
    y_norms: Array1<f64>,
    yp_norms: Array1<f64>,
    s_uv: Array2<f64>,
    s_uu: Array2<f64>,
    s_vv: Array2<f64>,
}

fn similarities(views: &ViewPair, temperature: f64) -> Similarities {
    let y_norms = row_norms(&views.y);
    let yp_norms = row_norms(&views.y_prime);
    let u = normalize_rows(&views.y, &y_norms);
    let v = normalize_rows(&views.y_prime, &yp_norms);
    let inv_t = 1.0 / temperature;
    Similarities {
        s_uv: u.dot(&v.t()) * inv_t,
        s_uu: u.dot(&u.t()) * inv_t,
        s_vv: v.dot(&v.t()) * inv_t,
        u,
        v,
        y_norms,
        yp_norms,
    }
}

/// Symmetrised contrastive loss with cosine similarity scaled by
/// `1 / temperature`.
pub fn contrastive_loss_with_temperature(views: &ViewPair, temperature: f64) -> f64 {
    let s = similarities(views, temperature);
    let n = views.y.nrows();
    let s_vu = s.s_uv.t();
    let mut total = 0.0;
    for i in 0..n {
        total += -s.s_uv[[i, i]] + log_sum_exp2(s.s_uv.row(i), s.s_uu.row(i));
        total += -s.s_uv[[i, i]] + log_sum_exp2(s_vu.row(i), s.s_vv.row(i));
    }
    total / (2 * n) as f64
}

pub fn contrastive_loss(views: &ViewPair) -> f64 {
    contrastive_loss_with_temperature(views, 1.0)
}

/// Contrastive loss and its gradients with respect to `Y` and `Y'`.
pub fn contrastive_loss_grad(views: &ViewPair, temperature: f64) -> (f64, Array2<f64>, Array2<f64>) {
    let s = similarities(views, temperature);
    let n = views.y.nrows();
    let c = 1.0 / (2 * n) as f64;

    let mut g_uv = Array2::<f64>::zeros((n, n));
    let mut g_uu = Array2::<f64>::zeros((n, n));
    let mut g_vv = Array2::<f64>::zeros((n, n));
    let mut total = 0.0;
    for i in 0..n {
        // Anchor Y_i: cross-view row i of S_uv, intra-view row i of S_uu.
        let lse1 = log_sum_exp2(s.s_uv.row(i), s.s_uu.row(i));
        total += -s.s_uv[[i, i]] + lse1;
        for j in 0..n {
            g_uv[[i, j]] += c * (s.s_uv[[i, j]] - lse1).exp();
            g_uu[[i, j]] += c * (s.s_uu[[i, j]] - lse1).exp();
        }
        g_uv[[i, i]] -= c;

        // Anchor Y'_i: cross-view column i of S_uv, intra-view row i of S_vv.
        let lse2 = log_sum_exp2(s.s_uv.column(i), s.s_vv.row(i));
        total += -s.s_uv[[i, i]] + lse2;
        for j in 0..n {
            g_uv[[j, i]] += c * (s.s_uv[[j, i]] - lse2).exp();
            g_vv[[i, j]] += c * (s.s_vv[[i, j]] - lse2).exp();
        }
        g_uv[[i, i]] -= c;
    }
    let inv_t = 1.0 / temperature;
    let g_uu_sym = &g_uu + &g_uu.t();
    let g_vv_sym = &g_vv + &g_vv.t();
    let grad_u = (g_uv.dot(&s.v) + g_uu_sym.dot(&s.u)) * inv_t;
    let grad_v = (g_uv.t().dot(&s.u) + g_vv_sym.dot(&s.v)) * inv_t;

    let dy = normalize_rows_backward(&views.y, &s.y_norms, &grad_u);
    let dyp = normalize_rows_backward(&views.y_prime, &s.yp_norms, &grad_v);
    (total * c, dy, dyp)
}

/// `‖Y' Yᵀ − A‖²_F` via `tr(Y'ᵀY' · YᵀY) − 2⟨Y'Yᵀ, A⟩ + ‖A‖²_F`.
fn residual_sq(views: &ViewPair, a: &NormalizedGraph) -> f64 {
    let gram_y = views.y.t().dot(&views.y);
    let gram_yp = views.y_prime.t().dot(&views.y_prime);
    let quad: f64 = (&gram_y * &gram_yp).sum();
    let cross: f64 = a
        .adj_norm
        .iter()
        .map(|(i, j, w)| w * views.y_prime.row(i).dot(&views.y.row(j)))
        .sum();
    (quad - 2.0 * cross + a.adj_norm.frobenius_sq()).max(0.0)
}

pub fn reconstruction_loss(views: &ViewPair, a: &NormalizedGraph) -> f64 {
    let n = views.y.nrows() as f64;
    residual_sq(views, a).sqrt() / (n * n)
}

/// Reconstruction loss and gradients. At an exact reconstruction the norm
/// is not differentiable and the zero subgradient is returned.
pub fn reconstruction_loss_grad(
    views: &ViewPair,
    a: &NormalizedGraph,
) -> (f64, Array2<f64>, Array2<f64>) {
    let n = views.y.nrows() as f64;
    let f = residual_sq(views, a).sqrt();
    let loss = f / (n * n);
    if f == 0.0 {
        return (
            loss,
            Array2::zeros(views.y.raw_dim()),
            Array2::zeros(views.y_prime.raw_dim()),
        );
    }
    let scale = 1.0 / (f * n * n);
    let gram_y = views.y.t().dot(&views.y);
    let gram_yp = views.y_prime.t().dot(&views.y_prime);
    // E Y = Y'(YᵀY) − A Y and Eᵀ Y' = Y(Y'ᵀY') − Aᵀ Y', with A symmetric.
    let d_yp = (views.y_prime.dot(&gram_y) - a.adj_norm.matmul(&views.y.view())) * scale;
    let d_y = (views.y.dot(&gram_yp) - a.adj_norm.matmul(&views.y_prime.view())) * scale;
    (loss, d_y, d_yp)
}

/// `L_re + λ L_con`.
pub fn total_loss(views: &ViewPair, a: &NormalizedGraph, lambda: f64) -> f64 {
    total_loss_with_temperature(views, a, lambda, 1.0)
}

pub fn total_loss_with_temperature(views: &ViewPair, a: &NormalizedGraph, lambda: f64, temperature: f64) -> f64 {
    reconstruction_loss(views, a) + lambda * contrastive_loss_with_temperature(views, temperature)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub reconstruction: f64,
    pub contrastive: f64,
    pub total: f64,
}

/// Losses and the combined gradients `∂L/∂Y`, `∂L/∂Y'`.
pub fn total_loss_grad(
    views: &ViewPair,
    a: &NormalizedGraph,
    lambda: f64,
    temperature: f64,
) -> (LossParts, Array2<f64>, Array2<f64>) {
    let (l_re, mut dy, mut dyp) = reconstruction_loss_grad(views, a);
    let (l_con, cy, cyp) = contrastive_loss_grad(views, temperature);
    dy.scaled_add(lambda, &cy);
    dyp.scaled_add(lambda, &cyp);
    (
        LossParts {
            reconstruction: l_re,
            contrastive: l_con,
            total: l_re + lambda * l_con,
        },
        dy,
        dyp,
    )
}
