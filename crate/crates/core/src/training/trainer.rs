use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::OptState;
use super::loss::ViewPair;
use super::model::{forward, loss_and_grad, BaseInput, ModelInputs, SecondInput};
use super::params::{derive_seed, ModelParams, TrainConfig, STREAM_BATCH, STREAM_CLASSIC, STREAM_FIELDS};
use crate::error::{Error, Result};
use crate::feature_cross::{cross, partition_fields};
use crate::graph::{normalize_adjacency, Graph, NormalizedGraph};
use crate::propagation::{appnp_converge, dagnn_initial_weights, hop_features, row_softmax, sgc_filter, Scheme};
use crate::se_gating::squeeze;

/// Convergence tolerance for APPNP propagation.
pub const APPNP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    /// 1-based epoch.
    pub epoch: usize,
    pub reconstruction: f64,
    pub contrastive: f64,
    pub total: f64,
}

/// First-view input for the configured scheme.
pub fn propagate(ng: &NormalizedGraph, x: &ndarray::Array2<f64>, cfg: &TrainConfig) -> Result<BaseInput> {
    Ok(match cfg.scheme {
        Scheme::Sgc => BaseInput::Fixed(sgc_filter(ng, x, cfg.k)?.xbar),
        Scheme::Dagnn => BaseInput::Hops(hop_features(ng, x, cfg.k)?),
        Scheme::Appnp => {
            let z = appnp_converge(ng, x, cfg.eta, APPNP_TOL, cfg.appnp_iters)?.xbar;
            BaseInput::Fixed(if cfg.appnp_softmax { row_softmax(&z) } else { z })
        }
    })
}

/// The filtered matrix the cross features are computed from.
pub fn cross_source(base: &BaseInput, k: usize) -> Result<ndarray::Array2<f64>> {
    match base {
        BaseInput::Fixed(b) => Ok(b.clone()),
        BaseInput::Hops(h) => crate::propagation::combine_hops(h, &dagnn_initial_weights(k)),
    }
}

/// Preprocessing: normalization, filtering, field partition and the
/// one-off cross features (or the classic augmentation view).
pub fn prepare_inputs(g: &Graph, cfg: &TrainConfig) -> Result<ModelInputs> {
    cfg.validate(g.num_features())?;
    let ng = normalize_adjacency(g);
    let x = g.features().clone();
    let base = propagate(&ng, &x, cfg)?;
    let second = if let Some(aug) = cfg.classic_aug {
        SecondInput::Fixed(aug.view_input(g, cfg.k, cfg.classic_aug_rate, derive_seed(cfg.seed, STREAM_CLASSIC))?)
    } else if cfg.no_aug {
        SecondInput::Fixed(x.clone())
    } else {
        let fp = partition_fields(g.num_features(), cfg.m, derive_seed(cfg.seed, STREAM_FIELDS))?;
        SecondInput::Cross(cross(&cross_source(&base, cfg.k)?, &fp)?.r)
    };
    Ok(ModelInputs {
        q: squeeze(&x)?,
        x,
        base,
        second,
        adj: ng,
    })
}

/// Owns parameters and optimizer state. A failed step leaves the last good
/// parameters in place.
#[derive(Debug, Clone)]
pub struct Trainer {
    cfg: TrainConfig,
    inputs: ModelInputs,
    params: ModelParams,
    opt: OptState,
    epoch: usize,
    rng: ChaCha8Rng,
    history: Vec<LossRecord>,
}

impl Trainer {
    pub fn new(inputs: ModelInputs, cfg: &TrainConfig) -> Result<Self> {
        let d = inputs.x.ncols();
        cfg.validate(d)?;
        let pairs = match &inputs.second {
            SecondInput::Cross(r) => r.ncols(),
            SecondInput::Fixed(_) => cfg.m * (cfg.m - 1) / 2,
        };
        let params = ModelParams::init(d, pairs, cfg);
        Self::with_params(inputs, cfg, params)
    }

    pub fn with_params(inputs: ModelInputs, cfg: &TrainConfig, params: ModelParams) -> Result<Self> {
        if matches!(inputs.base, BaseInput::Hops(_)) != params.dagnn_s.is_some() {
            return Err(Error::param("hop weights must be present exactly when the scheme is DAGNN"));
        }
        Ok(Self {
            opt: OptState::new(&params),
            rng: ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_BATCH)),
            cfg: cfg.clone(),
            inputs,
            params,
            epoch: 0,
            history: Vec::new(),
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn inputs(&self) -> &ModelInputs {
        &self.inputs
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn history(&self) -> &[LossRecord] {
        &self.history
    }

    /// One epoch: a single full-batch step, or one step per shuffled
    /// minibatch. The recorded losses are the mean over the epoch's batches.
    pub fn step_epoch(&mut self) -> Result<LossRecord> {
        let epoch = self.epoch + 1;
        let n = self.inputs.num_nodes();
        let batches: Vec<Vec<usize>> = match self.cfg.batch_size {
            Some(b) if b < n => {
                let mut order: Vec<usize> = (0..n).collect();
                order.shuffle(&mut self.rng);
                order.chunks(b).map(|c| c.to_vec()).collect()
            }
            _ => Vec::new(),
        };
        let mut sums = (0.0, 0.0, 0.0);
        let count;
        if batches.is_empty() {
            self.step_on(None, epoch, &mut sums)?;
            count = 1;
        } else {
            count = batches.len();
            for b in &batches {
                self.step_on(Some(b), epoch, &mut sums)?;
            }
        }
        let c = count as f64;
        let rec = LossRecord {
            epoch,
            reconstruction: sums.0 / c,
            contrastive: sums.1 / c,
            total: sums.2 / c,
        };
        self.epoch = epoch;
        self.history.push(rec);
        log::debug!("epoch {epoch}: L = {:.6}", rec.total);
        Ok(rec)
    }

    fn step_on(&mut self, rows: Option<&[usize]>, epoch: usize, sums: &mut (f64, f64, f64)) -> Result<()> {
        let sub;
        let inputs = match rows {
            Some(r) => {
                sub = self.inputs.rows(r);
                &sub
            }
            None => &self.inputs,
        };
        let (parts, grads, _) = loss_and_grad(&self.params, inputs, &self.cfg).map_err(|e| e.at_epoch(epoch))?;
        let mut next = self.params.clone();
        self.opt.step(&mut next, &grads, self.cfg.lr);
        if let Some((name, _, _)) = next.tensors().into_iter().find(|t| t.2.iter().any(|v| !v.is_finite())) {
            return Err(Error::Numeric {
                epoch,
                what: format!("update produced non-finite {name}"),
            });
        }
        self.params = next;
        sums.0 += parts.reconstruction;
        sums.1 += parts.contrastive;
        sums.2 += parts.total;
        Ok(())
    }

    /// Runs the remaining configured epochs.
    pub fn run(&mut self) -> Result<()> {
        while self.epoch < self.cfg.epochs {
            self.step_epoch()?;
        }
        Ok(())
    }

    /// Full-graph views at the current parameters.
    pub fn views(&self) -> Result<ViewPair> {
        Ok(forward(&self.params, &self.inputs, &self.cfg)?.views)
    }

    pub fn finish(self) -> Result<TrainOutput> {
        let views = self.views()?;
        Ok(TrainOutput {
            params: self.params,
            views,
            history: self.history,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub params: ModelParams,
    pub views: ViewPair,
    pub history: Vec<LossRecord>,
}

pub fn train(g: &Graph, cfg: &TrainConfig) -> Result<TrainOutput> {
    let mut t = Trainer::new(prepare_inputs(g, cfg)?, cfg)?;
    t.run()?;
    t.finish()
}

pub fn write_loss_csv(history: &[LossRecord], path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "epoch,L_re,L_con,L")?;
    for r in history {
        writeln!(w, "{},{:e},{:e},{:e}", r.epoch, r.reconstruction, r.contrastive, r.total)?;
    }
    w.flush()?;
    Ok(())
}
