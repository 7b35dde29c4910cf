//! Forward pass of the two-view model and its hand-written reverse pass.

use ndarray::{Array1, Array2, Axis};

use super::loss::{total_loss_grad, LossParts, ViewPair};
use super::params::{ModelParams, TrainConfig};
use crate::error::{Error, Result};
use crate::feature_cross::AugProjection;
use crate::graph::NormalizedGraph;
use crate::propagation::combine_hops;
use crate::se_gating::{excite_traced, gate_logits, select_ranked, sigmoid, Excitation, SelectedFeatures};

/// Input to the first view.
#[derive(Debug, Clone)]
pub enum BaseInput {
    /// A fixed filtered matrix `X̄`.
    Fixed(Array2<f64>),
    /// Hop matrices `A^t X`, combined with trainable weights.
    Hops(Vec<Array2<f64>>),
}

/// Input to the second view.
#[derive(Debug, Clone)]
pub enum SecondInput {
    /// Cross features `R`; the view input is `X + R W_aug`.
    Cross(Array2<f64>),
    /// A precomputed view input (no augmentation or a classic augmentation).
    Fixed(Array2<f64>),
}

/// Everything the model reads besides its parameters.
#[derive(Debug, Clone)]
pub struct ModelInputs {
    /// Original features.
    pub x: Array2<f64>,
    /// Column mean of the full `X`, shared by every minibatch.
    pub q: Array1<f64>,
    pub base: BaseInput,
    pub second: SecondInput,
    pub adj: NormalizedGraph,
}

fn take_rows(a: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    a.select(Axis(0), rows)
}

impl ModelInputs {
    pub fn num_nodes(&self) -> usize {
        self.x.nrows()
    }

    /// Restriction to a node subset, including the `A` block.
    pub fn rows(&self, rows: &[usize]) -> ModelInputs {
        ModelInputs {
            x: take_rows(&self.x, rows),
            q: self.q.clone(),
            base: match &self.base {
                BaseInput::Fixed(b) => BaseInput::Fixed(take_rows(b, rows)),
                BaseInput::Hops(h) => BaseInput::Hops(h.iter().map(|m| take_rows(m, rows)).collect()),
            },
            second: match &self.second {
                SecondInput::Cross(r) => SecondInput::Cross(take_rows(r, rows)),
                SecondInput::Fixed(x) => SecondInput::Fixed(take_rows(x, rows)),
            },
            adj: self.adj.submatrix(rows),
        }
    }
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    pub excitation: Excitation,
    pub selected: SelectedFeatures,
    pub gates: Array2<f64>,
    pub base: Array2<f64>,
    pub proj_base: Array2<f64>,
    pub aug_input: Array2<f64>,
    aug_hidden_pre: Option<Array2<f64>>,
    pub proj_aug: Array2<f64>,
    pub views: ViewPair,
}

pub fn forward(params: &ModelParams, inputs: &ModelInputs, cfg: &TrainConfig) -> Result<Forward> {
    let d = inputs.x.ncols();
    let excitation = excite_traced(inputs.q.view(), &params.se)?;
    let start = cfg.feature_band.start(d, cfg.n);
    let selected = select_ranked(&inputs.x, &excitation.importance, start, cfg.n, cfg.scale_selected)?;
    let gates = if cfg.no_gate {
        Array2::ones((inputs.num_nodes(), params.proj.w.ncols()))
    } else {
        gate_logits(&selected.values, &params.gate)?.mapv(sigmoid)
    };

    let base = match &inputs.base {
        BaseInput::Fixed(b) => b.clone(),
        BaseInput::Hops(h) => {
            let s = params
                .dagnn_s
                .as_ref()
                .ok_or_else(|| Error::param("hop inputs need DAGNN hop weights"))?;
            combine_hops(h, s.as_slice().expect("contiguous"))?
        }
    };
    if base.dim() != inputs.x.dim() {
        return Err(Error::shape(format!(
            "first-view input is {:?}, features are {:?}",
            base.dim(),
            inputs.x.dim()
        )));
    }

    let (aug_input, aug_hidden_pre) = match &inputs.second {
        SecondInput::Fixed(x) => (x.clone(), None),
        SecondInput::Cross(r) => {
            if r.ncols() != params.aug.input_dim() || r.nrows() != inputs.num_nodes() {
                return Err(Error::shape(format!(
                    "cross features are {:?}, projection expects {} columns",
                    r.dim(),
                    params.aug.input_dim()
                )));
            }
            match &params.aug {
                AugProjection::Linear { w } => (&inputs.x + &r.dot(w), None),
                AugProjection::Mlp { w1, w2 } => {
                    let pre = r.dot(w1);
                    let out = &inputs.x + &pre.mapv(|v| v.max(0.0)).dot(w2);
                    (out, Some(pre))
                }
            }
        }
    };
    if aug_input.dim() != inputs.x.dim() {
        return Err(Error::shape(format!(
            "second-view input is {:?}, features are {:?}",
            aug_input.dim(),
            inputs.x.dim()
        )));
    }

    let proj_base = base.dot(&params.proj.w);
    let proj_aug = aug_input.dot(&params.proj.w);
    let views = ViewPair {
        y: &proj_base * &gates,
        y_prime: &proj_aug * &gates,
    };
    Ok(Forward {
        excitation,
        selected,
        gates,
        base,
        proj_base,
        aug_input,
        aug_hidden_pre,
        proj_aug,
        views,
    })
}

/// Gradients of the loss with respect to every parameter, given
/// `∂L/∂Y` and `∂L/∂Y'`. Parameters off the compute path get zeros.
pub fn backward(
    params: &ModelParams,
    inputs: &ModelInputs,
    fwd: &Forward,
    cfg: &TrainConfig,
    d_y: &Array2<f64>,
    d_yp: &Array2<f64>,
) -> Result<ModelParams> {
    let mut grads = params.zeros_like();
    let gates = &fwd.gates;
    let d_pb = d_y * gates;
    let d_pa = d_yp * gates;

    grads.proj.w = fwd.base.t().dot(&d_pb) + fwd.aug_input.t().dot(&d_pa);

    if !cfg.no_gate {
        let d_g = d_y * &fwd.proj_base + d_yp * &fwd.proj_aug;
        let d_z3 = d_g * &gates.mapv(|g| g * (1.0 - g));
        grads.gate.w3 = fwd.selected.values.t().dot(&d_z3);
        if let Some(b) = grads.gate.b3.as_mut() {
            *b = d_z3.sum_axis(Axis(0));
        }
        if cfg.scale_selected {
            let d_xn = d_z3.dot(&params.gate.w3.t());
            let exc = &fwd.excitation;
            let mut d_imp = Array1::<f64>::zeros(exc.importance.len());
            for (k, &j) in fwd.selected.indices.iter().enumerate() {
                d_imp[j] += d_xn.column(k).dot(&inputs.x.column(j));
            }
            let d_z2 = &d_imp * &exc.importance.mapv(|t| t * (1.0 - t));
            grads.se.w2 = outer(&exc.hidden, &d_z2);
            if let Some(b) = grads.se.b2.as_mut() {
                *b = d_z2.clone();
            }
            let d_a1 = params.se.w2.dot(&d_z2);
            let d_z1 = Array1::from_shape_fn(d_a1.len(), |i| {
                if exc.hidden_pre[i] > 0.0 {
                    d_a1[i]
                } else {
                    0.0
                }
            });
            grads.se.w1 = outer(&inputs.q, &d_z1);
            if let Some(b) = grads.se.b1.as_mut() {
                *b = d_z1;
            }
        }
    }

    if let (BaseInput::Hops(hops), Some(ds)) = (&inputs.base, grads.dagnn_s.as_mut()) {
        let d_base = d_pb.dot(&params.proj.w.t());
        for (t, h) in hops.iter().enumerate() {
            ds[t] = (h * &d_base).sum();
        }
    }

    if let SecondInput::Cross(r) = &inputs.second {
        let d_aug = d_pa.dot(&params.proj.w.t());
        match (&mut grads.aug, &params.aug) {
            (AugProjection::Linear { w: gw }, _) => *gw = r.t().dot(&d_aug),
            (AugProjection::Mlp { w1: g1, w2: g2 }, AugProjection::Mlp { w2, .. }) => {
                let pre = fwd.aug_hidden_pre.as_ref().expect("MLP forward keeps its pre-activation");
                *g2 = pre.mapv(|v| v.max(0.0)).t().dot(&d_aug);
                let mut d_h = d_aug.dot(&w2.t());
                d_h.zip_mut_with(pre, |g, &p| {
                    if p <= 0.0 {
                        *g = 0.0
                    }
                });
                *g1 = r.t().dot(&d_h);
            }
            _ => unreachable!("gradient mirrors parameter structure"),
        }
    }

    for (name, _, data) in grads.tensors() {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                epoch: 0,
                what: format!("non-finite gradient for {name}"),
            });
        }
    }
    Ok(grads)
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j])
}

/// Forward, loss and backward in one call.
pub fn loss_and_grad(
    params: &ModelParams,
    inputs: &ModelInputs,
    cfg: &TrainConfig,
) -> Result<(LossParts, ModelParams, ViewPair)> {
    let fwd = forward(params, inputs, cfg)?;
    if !fwd.views.is_finite() {
        return Err(Error::Numeric {
            epoch: 0,
            what: "non-finite values in views".into(),
        });
    }
    let (parts, d_y, d_yp) = total_loss_grad(&fwd.views, &inputs.adj, cfg.lambda, cfg.temperature);
    if !parts.total.is_finite() {
        return Err(Error::Numeric {
            epoch: 0,
            what: format!("non-finite loss {}", parts.total),
        });
    }
    let grads = backward(params, inputs, &fwd, cfg, &d_y, &d_yp)?;
    Ok((parts, grads, fwd.views))
}

/// Total loss at `params`, for finite-difference checks.
pub fn loss_at(params: &ModelParams, inputs: &ModelInputs, cfg: &TrainConfig) -> Result<f64> {
    let fwd = forward(params, inputs, cfg)?;
    Ok(super::loss::total_loss_with_temperature(
        &fwd.views,
        &inputs.adj,
        cfg.lambda,
        cfg.temperature,
    ))
}
