//! Train-then-cluster runs and the experiment grids built on them. Each
//! sweep fans independent runs out over the thread pool and assembles rows
//! in a fixed order.

use rayon::prelude::*;

use super::kmeans::{kmeans, ClusteringResult};
use super::metrics::{score, Metrics};
use super::report::{fmt_f, SweepTable};
use crate::error::{Error, Result};
use crate::feature_cross::ClassicAug;
use crate::graph::{perturb_edges, Graph};
use crate::propagation::Scheme;
use crate::training::{derive_seed, train, FeatureBand, TrainConfig, TrainOutput};

const STREAM_KMEANS: u64 = 77;
const STREAM_PERTURB: u64 = 78;

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub output: TrainOutput,
    pub clustering: ClusteringResult,
    pub metrics: Option<Metrics>,
}

fn clusters_of(g: &Graph) -> Result<usize> {
    g.num_clusters()
        .ok_or_else(|| Error::Precondition("cluster count unknown: supply labels or n_clusters".into()))
}

/// Trains, runs k-means on `(Y + Y')/2` and scores against labels if any.
pub fn train_and_cluster(g: &Graph, cfg: &TrainConfig, restarts: usize) -> Result<RunOutcome> {
    let c = clusters_of(g)?;
    let output = train(g, cfg)?;
    let clustering = kmeans(&output.views.fused(), c, restarts, derive_seed(cfg.seed, STREAM_KMEANS))?;
    let metrics = g.labels().map(|l| score(&clustering.assignments, l)).transpose()?;
    Ok(RunOutcome {
        output,
        clustering,
        metrics,
    })
}

fn labelled_metrics(g: &Graph, cfg: &TrainConfig, restarts: usize) -> Result<Metrics> {
    train_and_cluster(g, cfg, restarts)?
        .metrics
        .ok_or_else(|| Error::Precondition("metrics need ground-truth labels".into()))
}

/// k-means directly on the raw features, as a sanity reference.
pub fn raw_kmeans_baseline(g: &Graph, restarts: usize, seed: u64) -> Result<Metrics> {
    let labels = g
        .labels()
        .ok_or_else(|| Error::Precondition("metrics need ground-truth labels".into()))?;
    let r = kmeans(g.features(), clusters_of(g)?, restarts, derive_seed(seed, STREAM_KMEANS))?;
    score(&r.assignments, labels)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean_acc: f64,
    pub std_acc: f64,
    pub mean_nmi: f64,
    pub std_nmi: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn summarize(ms: &[Metrics]) -> Summary {
    let (mean_acc, std_acc) = mean_std(&ms.iter().map(|m| m.acc).collect::<Vec<_>>());
    let (mean_nmi, std_nmi) = mean_std(&ms.iter().map(|m| m.nmi).collect::<Vec<_>>());
    Summary {
        mean_acc,
        std_acc,
        mean_nmi,
        std_nmi,
    }
}

fn summary_cells(s: &Summary) -> Vec<String> {
    vec![fmt_f(s.mean_acc), fmt_f(s.std_acc), fmt_f(s.mean_nmi), fmt_f(s.std_nmi)]
}

const SUMMARY_COLS: [&str; 4] = ["mean_acc", "std_acc", "mean_nmi", "std_nmi"];

fn header(keys: &[&'static str]) -> Vec<&'static str> {
    keys.iter().copied().chain(SUMMARY_COLS).collect()
}

/// Runs every `(graph, config)` job in parallel, keeping job order.
fn run_jobs(jobs: Vec<(Graph, TrainConfig)>, restarts: usize) -> Result<Vec<Metrics>> {
    jobs.into_par_iter()
        .map(|(g, cfg)| labelled_metrics(&g, &cfg, restarts))
        .collect()
}

/// One summary per configuration, each run over all `seeds`.
fn seeded_summaries(g: &Graph, cfgs: &[TrainConfig], seeds: &[u64], restarts: usize) -> Result<Vec<Summary>> {
    if seeds.is_empty() {
        return Err(Error::param("sweeps need at least one seed"));
    }
    let jobs = cfgs
        .iter()
        .flat_map(|c| seeds.iter().map(move |&s| (g.clone(), TrainConfig { seed: s, ..c.clone() })))
        .collect();
    let ms = run_jobs(jobs, restarts)?;
    Ok(ms.chunks(seeds.len()).map(summarize).collect())
}

/// Retrains on graphs with a fraction `r` of edges rewired.
pub fn robustness_sweep(
    g: &Graph,
    cfg: &TrainConfig,
    rates: &[f64],
    seeds: &[u64],
    restarts: usize,
) -> Result<SweepTable> {
    if seeds.is_empty() {
        return Err(Error::param("sweeps need at least one seed"));
    }
    let mut jobs = Vec::new();
    for &r in rates {
        for &s in seeds {
            let pg = perturb_edges(g, r, derive_seed(s, STREAM_PERTURB))?;
            jobs.push((pg, TrainConfig { seed: s, ..cfg.clone() }));
        }
    }
    let ms = run_jobs(jobs, restarts)?;
    let mut t = SweepTable::new("robustness", &header(&["r"]));
    for (r, chunk) in rates.iter().zip(ms.chunks(seeds.len())) {
        let mut row = vec![r.to_string()];
        row.extend(summary_cells(&summarize(chunk)));
        t.push(row);
    }
    Ok(t)
}

/// Gate inputs drawn from the top, middle and bottom importance thirds.
pub fn se_interval_study(g: &Graph, cfg: &TrainConfig, seeds: &[u64], restarts: usize) -> Result<SweepTable> {
    let cfgs: Vec<TrainConfig> = FeatureBand::ALL
        .iter()
        .map(|&b| TrainConfig {
            feature_band: b,
            ..cfg.clone()
        })
        .collect();
    let sums = seeded_summaries(g, &cfgs, seeds, restarts)?;
    let mut t = SweepTable::new("se_intervals", &header(&["tercile"]));
    for (b, s) in FeatureBand::ALL.iter().zip(&sums) {
        let mut row = vec![b.to_string()];
        row.extend(summary_cells(s));
        t.push(row);
    }
    Ok(t)
}

/// Field count × selected-feature count grid.
pub fn m_n_sweep(
    g: &Graph,
    cfg: &TrainConfig,
    ms: &[usize],
    ns: &[usize],
    seeds: &[u64],
    restarts: usize,
) -> Result<SweepTable> {
    let points: Vec<(usize, usize)> = ms.iter().flat_map(|&m| ns.iter().map(move |&n| (m, n))).collect();
    let cfgs: Vec<TrainConfig> = points.iter().map(|&(m, n)| TrainConfig { m, n, ..cfg.clone() }).collect();
    let sums = seeded_summaries(g, &cfgs, seeds, restarts)?;
    let mut t = SweepTable::new("params_m_n", &header(&["m", "n"]));
    for ((m, n), s) in points.iter().zip(&sums) {
        let mut row = vec![m.to_string(), n.to_string()];
        row.extend(summary_cells(s));
        t.push(row);
    }
    Ok(t)
}

/// Propagation depth × trade-off weight grid.
pub fn k_lambda_sweep(
    g: &Graph,
    cfg: &TrainConfig,
    ks: &[usize],
    lambdas: &[f64],
    seeds: &[u64],
    restarts: usize,
) -> Result<SweepTable> {
    let points: Vec<(usize, f64)> = ks
        .iter()
        .flat_map(|&k| lambdas.iter().map(move |&l| (k, l)))
        .collect();
    let cfgs: Vec<TrainConfig> = points
        .iter()
        .map(|&(k, lambda)| TrainConfig { k, lambda, ..cfg.clone() })
        .collect();
    let sums = seeded_summaries(g, &cfgs, seeds, restarts)?;
    let mut t = SweepTable::new("params_k_lambda", &header(&["k", "lambda"]));
    for ((k, l), s) in points.iter().zip(&sums) {
        let mut row = vec![k.to_string(), l.to_string()];
        row.extend(summary_cells(s));
        t.push(row);
    }
    Ok(t)
}

pub const ABLATION_ROWS: [&str; 5] = ["full", "no_aug", "best_classic_aug", "no_gate", "dagnn"];

/// Component ablation. The classic-augmentation row reports the best of the
/// four classic augmentations by mean ACC, named in the `detail` column.
pub fn ablation_sweep(g: &Graph, cfg: &TrainConfig, seeds: &[u64], restarts: usize) -> Result<SweepTable> {
    let base = TrainConfig {
        no_aug: false,
        no_gate: false,
        classic_aug: None,
        ..cfg.clone()
    };
    let mut cfgs = vec![base.clone(), TrainConfig { no_aug: true, ..base.clone() }];
    for aug in ClassicAug::ALL {
        cfgs.push(TrainConfig {
            classic_aug: Some(aug),
            ..base.clone()
        });
    }
    cfgs.push(TrainConfig { no_gate: true, ..base.clone() });
    cfgs.push(TrainConfig {
        scheme: Scheme::Dagnn,
        ..base.clone()
    });
    let sums = seeded_summaries(g, &cfgs, seeds, restarts)?;

    let mut best = 2;
    for i in 3..6 {
        if sums[i].mean_acc > sums[best].mean_acc {
            best = i;
        }
    }
    let picks = [
        (0, "sgc".to_string()),
        (1, "x_aug=x".to_string()),
        (best, ClassicAug::ALL[best - 2].to_string()),
        (6, "gate=1".to_string()),
        (7, "dagnn".to_string()),
    ];
    let mut t = SweepTable::new("ablation", &header(&["variant", "detail"]));
    for (name, (i, detail)) in ABLATION_ROWS.iter().zip(picks) {
        let mut row = vec![name.to_string(), detail];
        row.extend(summary_cells(&sums[i]));
        t.push(row);
    }
    Ok(t)
}
