//! Central finite-difference check of the analytic gradients.

use super::model::{loss_and_grad, loss_at, ModelInputs};
use super::params::{ModelParams, TrainConfig};
use crate::error::Result;

/// Denominator floor for the relative error, so entries whose true gradient
/// is numerically zero are compared in absolute terms.
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: &'static str,
    /// `max_j |a_j − f_j| / max(|a_j|, |f_j|, floor)`.
    pub max_rel_error: f64,
    pub max_abs_grad: f64,
}

/// Compares every entry of every trainable tensor against
/// `(L(θ + h) − L(θ − h)) / 2h`.
pub fn gradient_check(
    params: &ModelParams,
    inputs: &ModelInputs,
    cfg: &TrainConfig,
    h: f64,
) -> Result<Vec<TensorCheck>> {
    let (_, grads, _) = loss_and_grad(params, inputs, cfg)?;
    let analytic = grads.tensors();
    let mut out = Vec::with_capacity(analytic.len());
    for (ti, (name, _, a)) in analytic.iter().enumerate() {
        let mut worst = 0.0f64;
        let mut largest = 0.0f64;
        for j in 0..a.len() {
            let mut plus = params.clone();
            plus.tensors_mut()[ti].1[j] += h;
            let mut minus = params.clone();
            minus.tensors_mut()[ti].1[j] -= h;
            let fd = (loss_at(&plus, inputs, cfg)? - loss_at(&minus, inputs, cfg)?) / (2.0 * h);
            let denom = a[j].abs().max(fd.abs()).max(GRAD_CHECK_FLOOR);
            worst = worst.max((a[j] - fd).abs() / denom);
            largest = largest.max(a[j].abs());
        }
        out.push(TensorCheck {
            name,
            max_rel_error: worst,
            max_abs_grad: largest,
        });
    }
    Ok(out)
}
