//! Command-line front end: preprocessing caches, training, evaluation and
//! experiment sweeps, each leaving a manifest next to its artifacts.

mod cache;
mod config;
mod manifest;

pub use cache::{cached_matrix, sha256_file, CacheStatus};
pub use config::{preset, RunConfig, SweepConfig, PRESETS};
pub use manifest::RunManifest;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::evaluation::{
    ablation_sweep, dominant_features, fmt_f, k_lambda_sweep, kmeans, m_n_sweep, profile_dtw_matrix,
    robustness_sweep, score, se_interval_study, theorem1_experiment, MetricsReport, SweepTable,
};
use crate::feature_cross::{cross, partition_fields};
use crate::graph::{
    generate_synthetic, load_dataset, normalize_adjacency, read_labels, read_matrix_bin, read_matrix_csv,
    save_dataset, write_matrix_bin, Graph,
};
use crate::propagation::Scheme;
use crate::se_gating::squeeze;
use crate::training::{
    cross_source, derive_seed, propagate, save_checkpoint, write_loss_csv, BaseInput, Checkpoint, ModelInputs,
    SecondInput, TrainConfig, Trainer, STREAM_CLASSIC, STREAM_FIELDS,
};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "FPGC_THREADS";

#[derive(Debug, Parser)]
#[command(name = "fpgc", version, about = "Feature personalized graph clustering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Flat key = value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Hyperparameter preset, overriding any preset in the config file.
    #[arg(long)]
    pub preset: Option<String>,
    /// Master seed, overriding the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "fpgc_out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    Robustness,
    Params,
    Ablation,
    SeIntervals,
    Theory,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build filtered-feature and cross-feature caches.
    Prepare {
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Train and write the checkpoint, embeddings and loss history.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Cluster embeddings with k-means and score them against labels.
    Evaluate {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Number of clusters; defaults to the number of label values.
        #[arg(long)]
        clusters: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Run an experiment sweep.
    Sweep {
        kind: SweepKind,
        /// Dataset directory (not needed for `theory`).
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Write a synthetic two-cluster dataset from the `synth_*` settings.
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Per-cluster dominant features and DTW distances between profiles.
    Analyze {
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(c.config.as_deref(), c.preset.as_deref())?;
    if let Some(s) = c.seed {
        cfg.train.seed = s;
        cfg.sweep.synth_seed = s;
    }
    Ok(cfg)
}

/// Parses arguments and runs the selected command.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Config(e.to_string()))?;
    execute(cli.command)
}

pub fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Prepare { dataset, common } => cmd_prepare(&dataset, &common).map(|_| ()),
        Command::Train { dataset, common } => cmd_train(&dataset, &common),
        Command::Evaluate {
            embeddings,
            labels,
            clusters,
            common,
        } => cmd_evaluate(&embeddings, &labels, clusters, &common).map(|_| ()),
        Command::Sweep { kind, dataset, common } => cmd_sweep(kind, dataset.as_deref(), &common),
        Command::Generate { common } => cmd_generate(&common),
        Command::Analyze { dataset, common } => cmd_analyze(&dataset, &common),
    }
}

fn fmt_eta(eta: f64) -> String {
    format!("{eta}").replace('.', "p")
}

/// Cache file stem for the first-view input.
fn filter_stem(cfg: &TrainConfig) -> String {
    match cfg.scheme {
        Scheme::Sgc => format!("filter_sgc_k{}", cfg.k),
        Scheme::Dagnn => format!("filter_dagnn_k{}", cfg.k),
        Scheme::Appnp => format!(
            "filter_appnp_eta{}_it{}{}",
            fmt_eta(cfg.eta),
            cfg.appnp_iters,
            if cfg.appnp_softmax { "_softmax" } else { "" }
        ),
    }
}

/// Result of the preprocessing stage.
pub struct Prepared {
    pub graph: Graph,
    pub inputs: ModelInputs,
    pub artifacts: Vec<PathBuf>,
    pub all_hits: bool,
}

fn dataset_key(dir: &Path) -> Result<String> {
    let mut m = RunManifest::default();
    m.hash_dataset(dir)?;
    Ok(m.input_hashes
        .iter()
        .filter(|(n, _)| n != "labels.csv")
        .map(|(n, h)| format!("{n}:{h}"))
        .collect::<Vec<_>>()
        .join(";"))
}

/// Loads the dataset and builds (or reuses) the caches in `<out>/cache`.
pub fn prepare(dataset: &Path, cfg: &TrainConfig, out: &Path) -> Result<Prepared> {
    let g = load_dataset(dataset)?;
    cfg.validate(g.num_features())?;
    let ds_key = dataset_key(dataset)?;
    let cache_dir = out.join("cache");
    let ng = normalize_adjacency(&g);
    let x = g.features().clone();
    let mut artifacts = Vec::new();
    let mut all_hits = true;

    let stem = filter_stem(cfg);
    let mut fresh: Option<BaseInput> = None;
    // Propagates at most once, then hands out hop `t` (or the fixed filter).
    let mut propagated = |t: usize| -> Result<Array2<f64>> {
        if fresh.is_none() {
            fresh = Some(propagate(&ng, &x, cfg)?);
        }
        Ok(match fresh.as_ref().expect("just set") {
            BaseInput::Hops(h) => h[t].clone(),
            BaseInput::Fixed(b) => b.clone(),
        })
    };
    let mut load = |name: String, t: usize| -> Result<Array2<f64>> {
        let path = cache_dir.join(format!("{name}.bin"));
        let key = cache::sha256_str(&format!("{ds_key}|{name}"));
        let (m, st) = cached_matrix(&path, &key, || propagated(t))?;
        all_hits &= st == CacheStatus::Hit;
        artifacts.push(path);
        Ok(m)
    };
    let base = match cfg.scheme {
        Scheme::Dagnn => BaseInput::Hops(
            (0..=cfg.k)
                .map(|t| load(format!("{stem}_hop{t}"), t))
                .collect::<Result<_>>()?,
        ),
        _ => BaseInput::Fixed(load(stem.clone(), 0)?),
    };

    let second = if let Some(aug) = cfg.classic_aug {
        SecondInput::Fixed(aug.view_input(&g, cfg.k, cfg.classic_aug_rate, derive_seed(cfg.seed, STREAM_CLASSIC))?)
    } else if cfg.no_aug {
        SecondInput::Fixed(x.clone())
    } else {
        let cstem = format!("cross_{stem}_m{}_seed{}", cfg.m, cfg.seed);
        let path = cache_dir.join(format!("{cstem}.bin"));
        let key = cache::sha256_str(&format!("{ds_key}|{cstem}"));
        let (r, st) = cached_matrix(&path, &key, || {
            let fp = partition_fields(g.num_features(), cfg.m, derive_seed(cfg.seed, STREAM_FIELDS))?;
            Ok(cross(&cross_source(&base, cfg.k)?, &fp)?.r)
        })?;
        all_hits &= st == CacheStatus::Hit;
        artifacts.push(path);
        SecondInput::Cross(r)
    };

    let inputs = ModelInputs {
        q: squeeze(&x)?,
        x,
        base,
        second,
        adj: ng,
    };
    Ok(Prepared {
        graph: g,
        inputs,
        artifacts,
        all_hits,
    })
}

fn cmd_prepare(dataset: &Path, common: &Common) -> Result<Prepared> {
    let start = Instant::now();
    let cfg = load_config(common)?;
    fs::create_dir_all(&common.out)?;
    let prepared = prepare(dataset, &cfg.train, &common.out)?;
    if prepared.all_hits {
        println!("cache hit: all preprocessing caches are up to date");
    } else {
        println!("caches written to {}", common.out.join("cache").display());
    }
    let mut m = RunManifest::new("prepare", cfg.to_kv());
    m.hash_dataset(dataset)?;
    m.artifacts = prepared.artifacts.clone();
    m.wall_secs = start.elapsed().as_secs_f64();
    m.write(&common.out.join("manifest_prepare.txt"))?;
    Ok(prepared)
}

fn cmd_train(dataset: &Path, common: &Common) -> Result<()> {
    let start = Instant::now();
    let cfg = load_config(common)?;
    fs::create_dir_all(&common.out)?;
    let prepared = prepare(dataset, &cfg.train, &common.out)?;
    let mut manifest = RunManifest::new("train", cfg.to_kv());
    manifest.hash_dataset(dataset)?;
    manifest.artifacts = prepared.artifacts.clone();

    let out = &common.out;
    let ckpt_path = out.join("checkpoint.bin");
    let loss_path = out.join("loss.csv");
    let mut trainer = Trainer::new(prepared.inputs, &cfg.train)?;
    let result = trainer.run();

    save_checkpoint(&Checkpoint::from_params(trainer.params(), cfg.train.to_kv()), &ckpt_path)?;
    write_loss_csv(trainer.history(), &loss_path)?;
    manifest.artifacts.extend([ckpt_path, loss_path]);

    if let Err(e) = result {
        manifest.status = format!("partial: {e}; checkpoint holds the last finite parameters");
        manifest.wall_secs = start.elapsed().as_secs_f64();
        manifest.write(&out.join("manifest_train.txt"))?;
        return Err(e);
    }

    let views = trainer.views()?;
    for (name, m) in [
        ("embeddings_y.bin", &views.y),
        ("embeddings_y_prime.bin", &views.y_prime),
        ("embeddings.bin", &views.fused()),
    ] {
        let p = out.join(name);
        write_matrix_bin(&p, m)?;
        manifest.artifacts.push(p);
    }
    if let Some(last) = trainer.history().last() {
        println!(
            "trained {} epochs: L_re = {:.6}, L_con = {:.6}, L = {:.6}",
            last.epoch, last.reconstruction, last.contrastive, last.total
        );
    } else {
        println!("no epochs run; wrote initial parameters");
    }
    manifest.wall_secs = start.elapsed().as_secs_f64();
    println!("wall time {:.2}s", manifest.wall_secs);
    manifest.write(&out.join("manifest_train.txt"))
}

fn read_embeddings(path: &Path) -> Result<Array2<f64>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => read_matrix_csv(path),
        _ => read_matrix_bin(path),
    }
}

fn cmd_evaluate(embeddings: &Path, labels: &Path, clusters: Option<usize>, common: &Common) -> Result<MetricsReport> {
    let start = Instant::now();
    let cfg = load_config(common)?;
    let z = read_embeddings(embeddings)?;
    let truth = read_labels(labels).map_err(|e| match e {
        Error::Io(source) => Error::Load {
            path: labels.to_path_buf(),
            source,
        },
        other => other,
    })?;
    if z.nrows() != truth.len() {
        return Err(Error::shape(format!(
            "{} embedding rows but {} labels",
            z.nrows(),
            truth.len()
        )));
    }
    let c = clusters.unwrap_or_else(|| truth.iter().max().map_or(0, |m| m + 1));
    let seed = derive_seed(cfg.train.seed, 77);
    let result = kmeans(&z, c, cfg.kmeans_restarts, seed)?;
    let metrics = score(&result.assignments, &truth)?;

    fs::create_dir_all(&common.out)?;
    let mut report = MetricsReport::new("evaluation");
    report
        .entry("n_nodes", z.nrows())
        .entry("n_clusters", c)
        .entry("kmeans_restarts", cfg.kmeans_restarts)
        .entry("seed", cfg.train.seed)
        .entry("acc", fmt_f(metrics.acc))
        .entry("nmi", fmt_f(metrics.nmi))
        .entry("inertia", fmt_f(result.inertia));
    let report_path = common.out.join("metrics.txt");
    report.write(&report_path)?;
    let assign_path = common.out.join("assignments.csv");
    fs::write(
        &assign_path,
        result.assignments.iter().map(|a| format!("{a}\n")).collect::<String>(),
    )?;
    println!("ACC = {:.4}  NMI = {:.4}", metrics.acc, metrics.nmi);

    let mut m = RunManifest::new("evaluate", cfg.to_kv());
    m.input_hashes.push(("embeddings".into(), sha256_file(embeddings)?));
    m.input_hashes.push(("labels".into(), sha256_file(labels)?));
    m.artifacts = vec![report_path, assign_path];
    m.wall_secs = start.elapsed().as_secs_f64();
    m.write(&common.out.join("manifest_evaluate.txt"))?;
    Ok(report)
}

fn config_entries(report: &mut MetricsReport, cfg: &RunConfig) {
    for line in cfg.to_kv().lines() {
        if let Some((k, v)) = line.split_once(" = ") {
            report.entry(&format!("config.{k}"), v);
        }
    }
}

fn cmd_sweep(kind: SweepKind, dataset: Option<&Path>, common: &Common) -> Result<()> {
    let start = Instant::now();
    let cfg = load_config(common)?;
    fs::create_dir_all(&common.out)?;
    let name = kind.to_possible_value().expect("no skipped variants").get_name().to_string();
    let mut report = MetricsReport::new(&format!("sweep {name}"));
    config_entries(&mut report, &cfg);
    let mut manifest = RunManifest::new(&format!("sweep {name}"), cfg.to_kv());

    let restarts = cfg.kmeans_restarts;
    let seeds = &cfg.sweep.seeds;
    let need_graph = || -> Result<Graph> {
        let d = dataset.ok_or_else(|| Error::Config(format!("sweep {name} needs --dataset")))?;
        load_dataset(d)
    };
    let mut tables: Vec<SweepTable> = Vec::new();
    match kind {
        SweepKind::Robustness => {
            tables.push(robustness_sweep(&need_graph()?, &cfg.train, &cfg.sweep.rates, seeds, restarts)?);
        }
        SweepKind::Params => {
            let g = need_graph()?;
            tables.push(m_n_sweep(&g, &cfg.train, &cfg.sweep.grid_m, &cfg.sweep.grid_n, seeds, restarts)?);
            tables.push(k_lambda_sweep(
                &g,
                &cfg.train,
                &cfg.sweep.grid_k,
                &cfg.sweep.grid_lambda,
                seeds,
                restarts,
            )?);
        }
        SweepKind::Ablation => tables.push(ablation_sweep(&need_graph()?, &cfg.train, seeds, restarts)?),
        SweepKind::SeIntervals => tables.push(se_interval_study(&need_graph()?, &cfg.train, seeds, restarts)?),
        SweepKind::Theory => {
            let spec = cfg.sweep.synthetic_spec();
            let out = theorem1_experiment(&spec, cfg.sweep.theory_trials, cfg.sweep.theory_set_size, cfg.train.seed)?;
            let mut t = SweepTable::new("theory_trials", &["i", "j", "overlap", "prob_gap"]);
            for tr in &out.trials {
                t.push(vec![tr.i.to_string(), tr.j.to_string(), fmt_f(tr.overlap), fmt_f(tr.prob_gap)]);
            }
            tables.push(t);
            report
                .entry("trials", out.trials.len())
                .entry("spearman", fmt_f(out.spearman))
                .entry("p_value", format!("{:.6e}", out.p_value));
            let summary_path = common.out.join("theory_summary.txt");
            fs::write(
                &summary_path,
                format!(
                    "trials = {}\nspearman = {}\np_value = {:.6e}\n",
                    out.trials.len(),
                    fmt_f(out.spearman),
                    out.p_value
                ),
            )?;
            manifest.artifacts.push(summary_path);
            println!("Spearman = {:.4} (p = {:.3e})", out.spearman, out.p_value);
        }
    }
    if let Some(d) = dataset {
        manifest.hash_dataset(d)?;
    }
    for t in &tables {
        let p = common.out.join(format!("{}.csv", t.name));
        t.write_csv(&p)?;
        manifest.artifacts.push(p);
        if kind != SweepKind::Theory {
            print!("[{}]\n{}", t.name, t.to_csv());
        }
    }
    report.tables = tables;
    let report_path = common.out.join(format!("sweep_{name}.txt"));
    report.write(&report_path)?;
    manifest.artifacts.push(report_path);
    manifest.wall_secs = start.elapsed().as_secs_f64();
    println!("wall time {:.2}s", manifest.wall_secs);
    manifest.write(&common.out.join(format!("manifest_sweep_{name}.txt")))
}

fn cmd_generate(common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    let g = generate_synthetic(&cfg.sweep.synthetic_spec())?;
    save_dataset(&g, &common.out)?;
    println!(
        "wrote {} nodes, {} edges, {} features to {}",
        g.num_nodes(),
        g.edges().len(),
        g.num_features(),
        common.out.display()
    );
    Ok(())
}

fn cmd_analyze(dataset: &Path, common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    let g = load_dataset(dataset)?;
    let df = dominant_features(&g, cfg.sweep.dominant_mult)?;
    let dtw = profile_dtw_matrix(&df.profiles(), cfg.sweep.dtw_cap);
    fs::create_dir_all(&common.out)?;

    let mut feats = SweepTable::new("dominant_features", &["cluster", "count", "features"]);
    for (c, idx) in df.per_cluster.iter().enumerate() {
        let list: Vec<String> = idx.iter().map(|j| j.to_string()).collect();
        feats.push(vec![c.to_string(), idx.len().to_string(), list.join(" ")]);
    }
    let c = dtw.nrows();
    let cols: Vec<String> = std::iter::once("cluster".to_string())
        .chain((0..c).map(|j| j.to_string()))
        .collect();
    let mut dtw_table = SweepTable {
        name: "dtw".into(),
        header: cols,
        rows: Vec::new(),
    };
    for i in 0..c {
        let mut row = vec![i.to_string()];
        row.extend((0..c).map(|j| fmt_f(dtw[[i, j]])));
        dtw_table.push(row);
    }
    let mut report = MetricsReport::new("feature analysis");
    report
        .entry("threshold", fmt_f(df.threshold))
        .entry("dtw_cap", cfg.sweep.dtw_cap);
    feats.write_csv(&common.out.join("dominant_features.csv"))?;
    dtw_table.write_csv(&common.out.join("dtw.csv"))?;
    report.tables = vec![feats, dtw_table];
    report.write(&common.out.join("analysis.txt"))?;
    print!("{}", report.to_text());
    Ok(())
}

/// Sizes the global thread pool from [`THREADS_ENV`] when set.
pub fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}
