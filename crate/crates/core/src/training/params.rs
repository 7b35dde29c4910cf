use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::feature_cross::{AugProjection, ClassicAug};
use crate::propagation::{dagnn_initial_weights, Scheme};
use crate::se_gating::{GateParams, SEParams, SharedProjection};

/// Which importance band feeds the gate. `Top` is the normal model; the
/// tercile variants are used to study low- and mid-importance features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum FeatureBand {
    #[default]
    Top,
    Middle,
    Bottom,
}

impl FeatureBand {
    pub const ALL: [FeatureBand; 3] = [FeatureBand::Top, FeatureBand::Middle, FeatureBand::Bottom];

    /// First rank of the band. Bands other than `Top` split the ranking into
    /// equal thirds and take `n` features from the start of their third.
    pub fn start(self, d: usize, n: usize) -> usize {
        let third = d / 3;
        let start = match self {
            FeatureBand::Top => 0,
            FeatureBand::Middle => third,
            FeatureBand::Bottom => 2 * third,
        };
        start.min(d.saturating_sub(n))
    }
}

impl fmt::Display for FeatureBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureBand::Top => "top",
            FeatureBand::Middle => "middle",
            FeatureBand::Bottom => "bottom",
        })
    }
}

impl FromStr for FeatureBand {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "top" => Ok(FeatureBand::Top),
            "middle" => Ok(FeatureBand::Middle),
            "bottom" => Ok(FeatureBand::Bottom),
            other => Err(Error::Config(format!("unknown feature band '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub scheme: Scheme,
    /// Propagation depth.
    pub k: usize,
    /// Number of feature fields.
    pub m: usize,
    /// Number of selected identifier features.
    pub n: usize,
    pub lambda: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: Option<usize>,
    /// Width of the excitation bottleneck.
    pub hidden_dim: usize,
    pub d_out: usize,
    pub seed: u64,
    /// APPNP teleport weight.
    pub eta: f64,
    /// Iteration cap for APPNP.
    pub appnp_iters: usize,
    pub appnp_softmax: bool,
    /// Multiply selected features by their importance.
    pub scale_selected: bool,
    pub use_bias: bool,
    /// Hidden width of the augmentation MLP; `None` keeps it linear.
    pub aug_hidden: Option<usize>,
    pub temperature: f64,
    pub no_aug: bool,
    pub no_gate: bool,
    pub classic_aug: Option<ClassicAug>,
    pub classic_aug_rate: f64,
    pub feature_band: FeatureBand,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Sgc,
            k: 3,
            m: 60,
            n: 100,
            lambda: 1.0,
            lr: 1e-3,
            epochs: 400,
            batch_size: None,
            hidden_dim: 500,
            d_out: 500,
            seed: 0,
            eta: 0.1,
            appnp_iters: 1000,
            appnp_softmax: false,
            scale_selected: true,
            use_bias: true,
            aug_hidden: None,
            temperature: 1.0,
            no_aug: false,
            no_gate: false,
            classic_aug: None,
            classic_aug_rate: 0.2,
            feature_band: FeatureBand::Top,
        }
    }
}

impl TrainConfig {
    /// Checks the settings against a feature dimension `d`.
    pub fn validate(&self, d: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::param(msg));
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.lr));
        }
        if self.n == 0 || self.n > d {
            return bad(format!("n = {} outside [1, {d}]", self.n));
        }
        if self.m < 2 || self.m > d {
            return bad(format!("m = {} outside [2, {d}]", self.m));
        }
        if self.hidden_dim == 0 || self.d_out == 0 {
            return bad("hidden_dim and d_out must be positive".into());
        }
        if self.batch_size == Some(0) {
            return bad("batch_size must be positive".into());
        }
        if self.temperature.is_nan() || self.temperature <= 0.0 {
            return bad(format!("temperature must be positive, got {}", self.temperature));
        }
        if self.scheme == Scheme::Appnp && !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad(format!("APPNP eta {} outside (0, 1]", self.eta));
        }
        if self.aug_hidden == Some(0) {
            return bad("aug_hidden must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.classic_aug_rate) {
            return bad(format!(
                "classic_aug_rate {} outside [0, 1]",
                self.classic_aug_rate
            ));
        }
        Ok(())
    }

    /// Applies one `key = value` setting. Returns `Ok(false)` for keys that
    /// do not belong to the training configuration.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
        }
        fn flag(key: &str, v: &str) -> Result<bool> {
            match v {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                _ => Err(Error::Config(format!("{key}: expected a boolean, got '{v}'"))),
            }
        }
        fn opt<T: FromStr>(key: &str, v: &str) -> Result<Option<T>> {
            if v == "none" {
                Ok(None)
            } else {
                num(key, v).map(Some)
            }
        }
        match key {
            "scheme" => self.scheme = value.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
            "k" => self.k = num(key, value)?,
            "m" => self.m = num(key, value)?,
            "n" => self.n = num(key, value)?,
            "lambda" => self.lambda = num(key, value)?,
            "lr" => self.lr = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "batch_size" => self.batch_size = opt(key, value)?,
            "hidden_dim" => self.hidden_dim = num(key, value)?,
            "d_out" => self.d_out = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "eta" => self.eta = num(key, value)?,
            "appnp_iters" => self.appnp_iters = num(key, value)?,
            "appnp_softmax" => self.appnp_softmax = flag(key, value)?,
            "scale_selected" => self.scale_selected = flag(key, value)?,
            "use_bias" => self.use_bias = flag(key, value)?,
            "aug_hidden" => self.aug_hidden = opt(key, value)?,
            "temperature" => self.temperature = num(key, value)?,
            "no_aug" => self.no_aug = flag(key, value)?,
            "no_gate" => self.no_gate = flag(key, value)?,
            "classic_aug" => {
                self.classic_aug = if value == "none" {
                    None
                } else {
                    Some(value.parse().map_err(|e: Error| Error::Config(e.to_string()))?)
                }
            }
            "classic_aug_rate" => self.classic_aug_rate = num(key, value)?,
            "feature_band" => self.feature_band = value.parse()?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// The configuration as `key = value` lines accepted by [`TrainConfig::set`].
    pub fn to_kv(&self) -> String {
        fn o<T: fmt::Display>(v: &Option<T>) -> String {
            v.as_ref().map_or_else(|| "none".to_string(), |x| x.to_string())
        }
        let rows: Vec<(&str, String)> = vec![
            ("scheme", self.scheme.to_string()),
            ("k", self.k.to_string()),
            ("m", self.m.to_string()),
            ("n", self.n.to_string()),
            ("lambda", self.lambda.to_string()),
            ("lr", self.lr.to_string()),
            ("epochs", self.epochs.to_string()),
            ("batch_size", o(&self.batch_size)),
            ("hidden_dim", self.hidden_dim.to_string()),
            ("d_out", self.d_out.to_string()),
            ("seed", self.seed.to_string()),
            ("eta", self.eta.to_string()),
            ("appnp_iters", self.appnp_iters.to_string()),
            ("appnp_softmax", self.appnp_softmax.to_string()),
            ("scale_selected", self.scale_selected.to_string()),
            ("use_bias", self.use_bias.to_string()),
            ("aug_hidden", o(&self.aug_hidden)),
            ("temperature", self.temperature.to_string()),
            ("no_aug", self.no_aug.to_string()),
            ("no_gate", self.no_gate.to_string()),
            ("classic_aug", o(&self.classic_aug)),
            ("classic_aug_rate", self.classic_aug_rate.to_string()),
            ("feature_band", self.feature_band.to_string()),
        ];
        rows.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// True when the cross-feature augmentation drives the second view.
    pub fn uses_cross(&self) -> bool {
        !self.no_aug && self.classic_aug.is_none()
    }
}

/// Named RNG streams derived from the master seed.
/// Deterministic sub-seed for a named stream.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub const STREAM_INIT: u64 = 1;
pub const STREAM_FIELDS: u64 = 2;
pub const STREAM_BATCH: u64 = 3;
pub const STREAM_CLASSIC: u64 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub se: SEParams,
    pub gate: GateParams,
    pub proj: SharedProjection,
    pub aug: AugProjection,
    pub dagnn_s: Option<Array1<f64>>,
}

impl ModelParams {
    /// Fresh parameters for feature dimension `d` and `pairs` cross columns.
    pub fn init(d: usize, pairs: usize, cfg: &TrainConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_INIT));
        let se = SEParams::init(d, cfg.hidden_dim, cfg.use_bias, &mut rng);
        let gate = GateParams::init(cfg.n, cfg.d_out, cfg.use_bias, &mut rng);
        let proj = SharedProjection::init(d, cfg.d_out, &mut rng);
        let aug = match cfg.aug_hidden {
            None => AugProjection::init_linear(pairs, d, &mut rng),
            Some(h) => AugProjection::init_mlp(pairs, h, d, &mut rng),
        };
        let dagnn_s = (cfg.scheme == Scheme::Dagnn).then(|| Array1::from(dagnn_initial_weights(cfg.k)));
        Self {
            se,
            gate,
            proj,
            aug,
            dagnn_s,
        }
    }

    /// Same structure, every entry zero. Used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        let z2 = |a: &Array2<f64>| Array2::zeros(a.raw_dim());
        let z1 = |a: &Array1<f64>| Array1::zeros(a.raw_dim());
        Self {
            se: SEParams {
                w1: z2(&self.se.w1),
                b1: self.se.b1.as_ref().map(z1),
                w2: z2(&self.se.w2),
                b2: self.se.b2.as_ref().map(z1),
            },
            gate: GateParams {
                w3: z2(&self.gate.w3),
                b3: self.gate.b3.as_ref().map(z1),
            },
            proj: SharedProjection { w: z2(&self.proj.w) },
            aug: match &self.aug {
                AugProjection::Linear { w } => AugProjection::Linear { w: z2(w) },
                AugProjection::Mlp { w1, w2 } => AugProjection::Mlp {
                    w1: z2(w1),
                    w2: z2(w2),
                },
            },
            dagnn_s: self.dagnn_s.as_ref().map(z1),
        }
    }

    /// Every trainable tensor as `(name, shape, data)` in a fixed order.
    pub fn tensors(&self) -> Vec<(&'static str, Vec<usize>, &[f64])> {
        fn t<'a, D: ndarray::Dimension>(
            name: &'static str,
            a: &'a ndarray::Array<f64, D>,
        ) -> (&'static str, Vec<usize>, &'a [f64]) {
            (name, a.shape().to_vec(), a.as_slice().expect("parameter tensors are contiguous"))
        }
        let mut out = vec![t("se.w1", &self.se.w1)];
        out.extend(self.se.b1.as_ref().map(|b| t("se.b1", b)));
        out.push(t("se.w2", &self.se.w2));
        out.extend(self.se.b2.as_ref().map(|b| t("se.b2", b)));
        out.push(t("gate.w3", &self.gate.w3));
        out.extend(self.gate.b3.as_ref().map(|b| t("gate.b3", b)));
        out.push(t("proj.w", &self.proj.w));
        match &self.aug {
            AugProjection::Linear { w } => out.push(t("aug.w", w)),
            AugProjection::Mlp { w1, w2 } => {
                out.push(t("aug.w1", w1));
                out.push(t("aug.w2", w2));
            }
        }
        out.extend(self.dagnn_s.as_ref().map(|s| t("dagnn.s", s)));
        out
    }

    /// Mutable counterpart of [`ModelParams::tensors`], same order.
    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        fn t<'a, D: ndarray::Dimension>(
            name: &'static str,
            a: &'a mut ndarray::Array<f64, D>,
        ) -> (&'static str, &'a mut [f64]) {
            (name, a.as_slice_mut().expect("parameter tensors are contiguous"))
        }
        let ModelParams {
            se,
            gate,
            proj,
            aug,
            dagnn_s,
        } = self;
        let mut out = vec![t("se.w1", &mut se.w1)];
        out.extend(se.b1.as_mut().map(|b| t("se.b1", b)));
        out.push(t("se.w2", &mut se.w2));
        out.extend(se.b2.as_mut().map(|b| t("se.b2", b)));
        out.push(t("gate.w3", &mut gate.w3));
        out.extend(gate.b3.as_mut().map(|b| t("gate.b3", b)));
        out.push(t("proj.w", &mut proj.w));
        match aug {
            AugProjection::Linear { w } => out.push(t("aug.w", w)),
            AugProjection::Mlp { w1, w2 } => {
                out.push(t("aug.w1", w1));
                out.push(t("aug.w2", w2));
            }
        }
        out.extend(dagnn_s.as_mut().map(|s| t("dagnn.s", s)));
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, _, d)| d.iter().all(|v| v.is_finite()))
    }
}
