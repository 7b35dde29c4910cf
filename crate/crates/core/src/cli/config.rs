//! Flat `key = value` run configuration with per-dataset presets.
//!
//! Lines starting with `#` are comments. Unknown and repeated keys are
//! errors. A `preset` line is applied before every other key regardless of
//! where it appears, so explicit keys always override the preset.

use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::evaluation::DEFAULT_RESTARTS;
use crate::graph::SyntheticSpec;
use crate::training::TrainConfig;

/// Settings for the experiment sweeps and the synthetic generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub seeds: Vec<u64>,
    pub rates: Vec<f64>,
    pub grid_m: Vec<usize>,
    pub grid_n: Vec<usize>,
    pub grid_k: Vec<usize>,
    pub grid_lambda: Vec<f64>,
    pub theory_trials: usize,
    /// Size of the personalized feature sets in the theorem experiment.
    pub theory_set_size: usize,
    pub synth_nodes_per_cluster: usize,
    pub synth_dim: usize,
    /// `‖μ₁ − μ₂‖` of the block means.
    pub synth_separation: f64,
    pub synth_intra: f64,
    pub synth_inter: f64,
    pub synth_variance: f64,
    pub synth_seed: u64,
    /// Dominance threshold as a multiple of the mean feature value.
    pub dominant_mult: f64,
    pub dtw_cap: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            seeds: vec![0, 1, 2, 3, 4],
            rates: vec![0.2, 0.4, 0.6, 0.8],
            grid_m: vec![2, 4, 8],
            grid_n: vec![2, 4, 8],
            grid_k: vec![2, 3, 4, 5],
            grid_lambda: vec![0.001, 0.1, 1.0, 100.0],
            theory_trials: 200,
            theory_set_size: 4,
            synth_nodes_per_cluster: 100,
            synth_dim: 16,
            synth_separation: 2.0,
            synth_intra: 0.1,
            synth_inter: 0.01,
            synth_variance: 1.0,
            synth_seed: 0,
            dominant_mult: 20.0,
            dtw_cap: 5000.0,
        }
    }
}

impl SweepConfig {
    pub fn synthetic_spec(&self) -> SyntheticSpec {
        let (mu1, mu2) = SyntheticSpec::block_means(self.synth_dim, self.synth_separation);
        SyntheticSpec {
            nodes_per_cluster: self.synth_nodes_per_cluster,
            mu1,
            mu2,
            intra_edge_prob: self.synth_intra,
            inter_edge_prob: self.synth_inter,
            feature_variance: self.synth_variance,
            seed: self.synth_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub train: TrainConfig,
    pub kmeans_restarts: usize,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            preset: None,
            train: TrainConfig::default(),
            kmeans_restarts: DEFAULT_RESTARTS,
            sweep: SweepConfig::default(),
        }
    }
}

pub const PRESETS: [&str; 10] = [
    "cora", "citeseer", "pubmed", "uat", "amap", "eat", "bat", "flickr", "twitch", "synthetic",
];

/// Training defaults per dataset. `synthetic` matches the generator defaults.
pub fn preset(name: &str) -> Result<TrainConfig> {
    let (k, m, n, lambda, lr, dim, batch) = match name {
        "cora" => (3, 60, 100, 1.0, 1e-3, 500, None),
        "citeseer" => (4, 50, 50, 0.1, 1e-3, 500, None),
        "pubmed" => (5, 10, 10, 0.001, 1e-3, 500, None),
        "uat" => (5, 20, 10, 100.0, 1e-2, 500, None),
        "amap" => (2, 10, 10, 0.001, 1e-4, 500, None),
        "eat" => (4, 10, 10, 0.001, 1e-2, 500, None),
        "bat" => (5, 20, 20, 1.0, 1e-2, 500, None),
        "flickr" => (4, 10, 100, 1.0, 1e-3, 100, Some(1000)),
        "twitch" => (2, 2, 4, 1.0, 1e-2, 100, Some(1000)),
        "synthetic" => (3, 4, 8, 1.0, 1e-3, 64, None),
        other => {
            return Err(Error::Config(format!(
                "unknown preset '{other}' (known: {})",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(TrainConfig {
        k,
        m,
        n,
        lambda,
        lr,
        hidden_dim: dim,
        d_out: dim,
        batch_size: batch,
        epochs: 400,
        ..TrainConfig::default()
    })
}

fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| Error::Config(format!("{key}: cannot parse '{s}'")))
        })
        .collect()
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
}

impl RunConfig {
    /// Parses configuration text. `preset_override` (from the command line)
    /// replaces any `preset` key in the text.
    pub fn parse(text: &str, preset_override: Option<&str>) -> Result<Self> {
        let mut pairs = Vec::new();
        let mut seen = BTreeSet::new();
        let mut preset_name = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                context: format!("config line {}", lineno + 1),
                message: format!("expected key = value, got '{line}'"),
            })?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if !seen.insert(k.clone()) {
                return Err(Error::Config(format!("key '{k}' given twice")));
            }
            if k == "preset" {
                preset_name = Some(v);
            } else {
                pairs.push((k, v));
            }
        }
        if let Some(p) = preset_override {
            preset_name = Some(p.to_string());
        }

        let mut cfg = RunConfig::default();
        if let Some(p) = &preset_name {
            cfg.train = preset(p)?;
            cfg.preset = Some(p.clone());
        }
        for (k, v) in &pairs {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, preset_override: Option<&str>) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|source| Error::Load {
                path: p.to_path_buf(),
                source,
            })?,
            None => String::new(),
        };
        Self::parse(&text, preset_override)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        if self.train.set(key, v)? {
            return Ok(());
        }
        let s = &mut self.sweep;
        match key {
            "kmeans_restarts" => self.kmeans_restarts = num(key, v)?,
            "seeds" => s.seeds = list(key, v)?,
            "rates" => s.rates = list(key, v)?,
            "grid_m" => s.grid_m = list(key, v)?,
            "grid_n" => s.grid_n = list(key, v)?,
            "grid_k" => s.grid_k = list(key, v)?,
            "grid_lambda" => s.grid_lambda = list(key, v)?,
            "theory_trials" => s.theory_trials = num(key, v)?,
            "theory_set_size" => s.theory_set_size = num(key, v)?,
            "synth_nodes_per_cluster" => s.synth_nodes_per_cluster = num(key, v)?,
            "synth_dim" => s.synth_dim = num(key, v)?,
            "synth_separation" => s.synth_separation = num(key, v)?,
            "synth_intra" => s.synth_intra = num(key, v)?,
            "synth_inter" => s.synth_inter = num(key, v)?,
            "synth_variance" => s.synth_variance = num(key, v)?,
            "synth_seed" => s.synth_seed = num(key, v)?,
            "dominant_mult" => s.dominant_mult = num(key, v)?,
            "dtw_cap" => s.dtw_cap = num(key, v)?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Full configuration echo, one `key = value` per line.
    pub fn to_kv(&self) -> String {
        fn join<T: ToString>(v: &[T]) -> String {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        }
        let s = &self.sweep;
        let mut out = String::new();
        if let Some(p) = &self.preset {
            out.push_str(&format!("preset = {p}\n"));
        }
        out.push_str(&self.train.to_kv());
        for (k, v) in [
            ("kmeans_restarts", self.kmeans_restarts.to_string()),
            ("seeds", join(&s.seeds)),
            ("rates", join(&s.rates)),
            ("grid_m", join(&s.grid_m)),
            ("grid_n", join(&s.grid_n)),
            ("grid_k", join(&s.grid_k)),
            ("grid_lambda", join(&s.grid_lambda)),
            ("theory_trials", s.theory_trials.to_string()),
            ("theory_set_size", s.theory_set_size.to_string()),
            ("synth_nodes_per_cluster", s.synth_nodes_per_cluster.to_string()),
            ("synth_dim", s.synth_dim.to_string()),
            ("synth_separation", s.synth_separation.to_string()),
            ("synth_intra", s.synth_intra.to_string()),
            ("synth_inter", s.synth_inter.to_string()),
            ("synth_variance", s.synth_variance.to_string()),
            ("synth_seed", s.synth_seed.to_string()),
            ("dominant_mult", s.dominant_mult.to_string()),
            ("dtw_cap", s.dtw_cap.to_string()),
        ] {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_then_overrides() {
        let cfg = RunConfig::parse("lr = 0.5\npreset = cora\n", None).unwrap();
        assert_eq!((cfg.train.k, cfg.train.m, cfg.train.n, cfg.train.lambda), (3, 60, 100, 1.0));
        assert_eq!(cfg.train.lr, 0.5);
    }

    #[test]
    fn command_line_preset_wins() {
        let cfg = RunConfig::parse("preset = cora", Some("eat")).unwrap();
        assert_eq!((cfg.train.k, cfg.train.lambda, cfg.train.lr), (4, 0.001, 1e-2));
    }

    #[test]
    fn large_graph_presets_batch() {
        let cfg = preset("flickr").unwrap();
        assert_eq!((cfg.batch_size, cfg.d_out), (Some(1000), 100));
    }

    #[test]
    fn rejects_unknown_and_repeated_keys() {
        assert!(matches!(RunConfig::parse("lamda = 1", None), Err(Error::Config(_))));
        assert!(RunConfig::parse("k = 2\nk = 3", None).is_err());
        assert!(RunConfig::parse("k = -3", None).is_err());
        assert!(RunConfig::parse("just words", None).is_err());
        assert!(RunConfig::parse("preset = nope", None).is_err());
    }

    #[test]
    fn echo_round_trips() {
        let text = "preset = citeseer\nseeds = 3,4\nrates = 0,0.5\nclassic_aug = edge_add\n# note\n";
        let cfg = RunConfig::parse(text, None).unwrap();
        let back = RunConfig::parse(&cfg.to_kv(), None).unwrap();
        assert_eq!(back, cfg);
    }
}
