//! End-to-end acceptance checks. Each criterion prints one `PASS`/`FAIL`/`SKIP`
//! line; the test fails if any non-skipped criterion fails.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to also see the
//! per-criterion detail that is logged before each verdict.

mod common;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use fpgc::evaluation::{
    clustering_accuracy, dtw_distance, nmi, raw_kmeans_baseline, theorem1_experiment, train_and_cluster,
    DEFAULT_RESTARTS,
};
use fpgc::feature_cross::{cross, partition_fields};
use fpgc::graph::{load_dataset, Graph, SyntheticSpec};
use fpgc::propagation::Scheme;
use fpgc::se_gating::{compose_view, scaled_uniform, SharedProjection};
use fpgc::training::{gradient_check, prepare_inputs, TrainConfig, Trainer};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{accuracy_by_permutation, dtw_by_paths, mixture_of_models, nmi_from_counts, sbm_config, sbm_instance};

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn emit(line: &str) {
    // Written to the raw handle so the line survives the harness' capture.
    let mut out = std::io::stdout().lock();
    writeln!(out, "{line}").unwrap();
    out.flush().unwrap();
}

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Graph {
    let x = Array2::from_shape_fn((n, d), |_| rng.random_range(0.0..1.5));
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(0.4) {
                edges.push((i, j));
            }
        }
    }
    Graph::new(n, edges, x, None, None).unwrap()
}

fn gradient_fidelity() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    let instances = 24;
    for t in 0..instances {
        let n = rng.random_range(3..=10);
        let d = rng.random_range(3..=8);
        let g = random_graph(&mut rng, n, d);
        let (scheme, aug_hidden) = match t % 4 {
            0 => (Scheme::Sgc, None),
            1 => (Scheme::Dagnn, None),
            2 => (Scheme::Appnp, None),
            _ => (Scheme::Sgc, Some(3)),
        };
        let cfg = TrainConfig {
            scheme,
            k: rng.random_range(1..=3),
            m: 2,
            n: 2,
            d_out: 3,
            hidden_dim: 3,
            lambda: rng.random_range(0.1..2.0),
            aug_hidden,
            seed: t,
            ..TrainConfig::default()
        };
        let inputs = prepare_inputs(&g, &cfg).unwrap();
        let mut params = Trainer::new(inputs.clone(), &cfg).unwrap().params().clone();
        for (_, data) in params.tensors_mut() {
            for v in data.iter_mut() {
                *v += rng.random_range(-0.2..0.2);
            }
        }
        for c in gradient_check(&params, &inputs, &cfg, 1e-5).unwrap() {
            if c.max_rel_error > worst {
                worst = c.max_rel_error;
                worst_at = format!("instance {t} ({scheme:?}) tensor {}", c.name);
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        worst <= 1e-4 && elapsed < Duration::from_secs(60),
        format!(
            "{instances} instances, max rel error {worst:.2e} at {worst_at}, {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn formulation_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(1..=12);
        let d = rng.random_range(1..=10);
        let d_out = rng.random_range(1..=6);
        let base = Array2::from_shape_fn((n, d), |_| rng.random_range(-2.0..2.0));
        let gates = Array2::from_shape_fn((n, d_out), |_| rng.random_range(0.0..1.0));
        let w = SharedProjection {
            w: scaled_uniform(d, d_out, d, &mut rng),
        };
        let got = compose_view(&base, &gates, &w).unwrap();
        let want = mixture_of_models(&base, &gates, &w.w);
        worst = got.iter().zip(&want).fold(worst, |m, (a, b)| m.max((a - b).abs()));
    }
    verdict(worst <= 1e-10, format!("50 instances, max abs error {worst:.2e}"))
}

fn metric_oracles() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut bad = Vec::new();
    for case in 0..1000 {
        let n = rng.random_range(1..=6);
        let c = rng.random_range(1..=3);
        let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        let acc = clustering_accuracy(&pred, &truth).unwrap();
        let nmi_v = nmi(&pred, &truth).unwrap();
        if (acc - accuracy_by_permutation(&pred, &truth)).abs() > 1e-12
            || (nmi_v - nmi_from_counts(&pred, &truth)).abs() > 1e-12
        {
            bad.push(format!("metric case {case}"));
        }
    }
    for case in 0..200 {
        let la = rng.random_range(1..=8);
        let lb = rng.random_range(1..=8);
        let a: Vec<f64> = (0..la).map(|_| rng.random_range(-5.0..5.0)).collect();
        let b: Vec<f64> = (0..lb).map(|_| rng.random_range(-5.0..5.0)).collect();
        let got = dtw_distance(&a, &b, 1e12).unwrap();
        if (got - dtw_by_paths(&a, &b)).abs() > 1e-9 {
            bad.push(format!("dtw case {case}"));
        }
    }
    verdict(
        bad.is_empty(),
        format!("1000 ACC/NMI cases, 200 DTW cases, mismatches: {bad:?}"),
    )
}

struct SyntheticRuns {
    raw: Vec<f64>,
    full: Vec<f64>,
    no_gate: Vec<f64>,
    no_aug: Vec<f64>,
    full_time: Duration,
}

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

fn synthetic_runs() -> SyntheticRuns {
    let mut runs = SyntheticRuns {
        raw: vec![],
        full: vec![],
        no_gate: vec![],
        no_aug: vec![],
        full_time: Duration::ZERO,
    };
    let acc = |g: &Graph, cfg: &TrainConfig| train_and_cluster(g, cfg, DEFAULT_RESTARTS).unwrap().metrics.unwrap().acc;
    for seed in SEEDS {
        let g = sbm_instance(seed);
        let cfg = sbm_config(seed);
        runs.raw.push(raw_kmeans_baseline(&g, DEFAULT_RESTARTS, seed).unwrap().acc);
        let t = Instant::now();
        runs.full.push(acc(&g, &cfg));
        runs.full_time += t.elapsed();
        runs.no_gate.push(acc(&g, &TrainConfig { no_gate: true, ..cfg.clone() }));
        runs.no_aug.push(acc(&g, &TrainConfig { no_aug: true, ..cfg }));
    }
    runs
}

fn synthetic_end_to_end(r: &SyntheticRuns) -> Verdict {
    let good = r
        .full
        .iter()
        .zip(&r.raw)
        .filter(|(f, raw)| **f >= **raw && **f >= 0.90)
        .count();
    verdict(
        good >= 4 && r.full_time < Duration::from_secs(120),
        format!(
            "{good}/5 seeds beat raw k-means and 0.90 (full {:?}, raw {:?}), {:.1}s",
            rounded(&r.full),
            rounded(&r.raw),
            r.full_time.as_secs_f64()
        ),
    )
}

fn ablation_ordering(r: &SyntheticRuns) -> Verdict {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (full, no_gate, no_aug) = (mean(&r.full), mean(&r.no_gate), mean(&r.no_aug));
    verdict(
        full >= no_gate && full >= no_aug,
        format!("mean ACC full {full:.4}, no_gate {no_gate:.4}, no_aug {no_aug:.4}"),
    )
}

fn rounded(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 1000.0).round() / 1000.0).collect()
}

fn theorem_trend() -> Verdict {
    let (mu1, mu2) = SyntheticSpec::block_means(16, 2.0);
    let spec = SyntheticSpec {
        nodes_per_cluster: 100,
        mu1,
        mu2,
        intra_edge_prob: 0.1,
        inter_edge_prob: 0.01,
        feature_variance: 1.0,
        seed: 0,
    };
    let s = theorem1_experiment(&spec, 200, 4, 0).unwrap();
    verdict(
        s.spearman < 0.0 && s.p_value < 0.05,
        format!("200 pairs, spearman {:.4}, p {:.3e}", s.spearman, s.p_value),
    )
}

fn cross_scaling() -> Verdict {
    let d = 128;
    let fp = partition_fields(d, 8, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let big = Array2::from_shape_fn((100_000, d), |_| rng.random_range(-1.0..1.0));
    let small = big.slice(ndarray::s![..50_000, ..]).to_owned();
    let median_secs = |x: &Array2<f64>| {
        cross(x, &fp).unwrap();
        let mut t: Vec<f64> = (0..7)
            .map(|_| {
                let s = Instant::now();
                std::hint::black_box(cross(x, &fp).unwrap());
                s.elapsed().as_secs_f64()
            })
            .collect();
        t.sort_by(f64::total_cmp);
        t[t.len() / 2]
    };
    let ts = median_secs(&small);
    let tb = median_secs(&big);
    let ratio = tb / ts;
    verdict(
        (1.5..=2.5).contains(&ratio),
        format!("N=5e4 {:.1}ms, N=1e5 {:.1}ms, ratio {ratio:.3}", ts * 1e3, tb * 1e3),
    )
}

fn cora_reproduction() -> Verdict {
    let Some(dir) = std::env::var_os("FPGC_CORA_DIR") else {
        return Verdict::Skip("FPGC_CORA_DIR not set".into());
    };
    let g = load_dataset(Path::new(&dir)).unwrap();
    let base = fpgc::cli::preset("cora").unwrap();
    let (mut acc, mut nmi_v) = (0.0, 0.0);
    for seed in SEEDS {
        let m = train_and_cluster(&g, &TrainConfig { seed, ..base.clone() }, DEFAULT_RESTARTS)
            .unwrap()
            .metrics
            .unwrap();
        acc += m.acc / 5.0;
        nmi_v += m.nmi / 5.0;
    }
    let (acc, nmi_v) = (acc * 100.0, nmi_v * 100.0);
    verdict(
        (acc - 79.19).abs() <= 3.0 && (nmi_v - 59.55).abs() <= 3.0,
        format!("mean ACC {acc:.2}, NMI {nmi_v:.2}"),
    )
}

fn fpgc(args: &[&str], threads: &str) {
    let out = Command::new(env!("CARGO_BIN_EXE_fpgc"))
        .args(args)
        .env("FPGC_THREADS", threads)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "fpgc {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Every file under `dir` except run manifests, which record wall time.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(p) = stack.pop() {
        for e in std::fs::read_dir(&p).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if !path.file_name().unwrap().to_string_lossy().starts_with("manifest_") {
                out.insert(path.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let cfg = root.join("run.cfg");
    std::fs::write(
        &cfg,
        "preset = synthetic\nepochs = 30\nsynth_nodes_per_cluster = 40\ntheory_trials = 60\nkmeans_restarts = 3\n",
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    let data = root.join("data");
    let data_s = data.to_str().unwrap();
    fpgc(&["generate", "--config", cfg, "--out", data_s], "1");

    let run = |name: &str, threads: &str| {
        let out = root.join(name);
        let o = out.to_str().unwrap();
        fpgc(&["train", "--dataset", data_s, "--config", cfg, "--out", o], threads);
        let emb = out.join("embeddings.bin");
        let labels = data.join("labels.csv");
        fpgc(
            &[
                "evaluate",
                "--embeddings",
                emb.to_str().unwrap(),
                "--labels",
                labels.to_str().unwrap(),
                "--config",
                cfg,
                "--out",
                o,
            ],
            threads,
        );
        fpgc(&["sweep", "theory", "--config", cfg, "--out", o], threads);
        snapshot(&out)
    };
    let a = run("a", "1");
    let b = run("b", "1");
    let c = run("c", "3");
    let differing: Vec<String> = a
        .iter()
        .filter(|(k, v)| b.get(*k) != Some(v) || c.get(*k) != Some(v))
        .map(|(k, _)| k.display().to_string())
        .collect();
    let same_sets = a.keys().eq(b.keys()) && a.keys().eq(c.keys());
    verdict(
        differing.is_empty() && same_sets && a.contains_key(Path::new("embeddings.bin")),
        format!(
            "train/evaluate/sweep theory repeated (1, 1, 3 threads): {} files compared, differing {differing:?}",
            a.len()
        ),
    )
}

#[test]
fn acceptance_criteria() {
    let mut failed = Vec::new();
    let mut report = |id: u32, name: &str, v: Verdict| {
        let (tag, detail) = match v {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                failed.push(id);
                ("FAIL", d)
            }
            Verdict::Skip(d) => ("SKIP", d),
        };
        emit(&format!("{tag} criterion {id} ({name}): {detail}"));
    };

    report(1, "gradient fidelity", gradient_fidelity());
    report(2, "formulation equivalence", formulation_equivalence());
    report(3, "metric oracles", metric_oracles());
    let runs = synthetic_runs();
    report(4, "synthetic end-to-end", synthetic_end_to_end(&runs));
    report(5, "overlap/posterior trend", theorem_trend());
    report(6, "feature-cross scaling", cross_scaling());
    report(7, "ablation ordering", ablation_ordering(&runs));
    report(8, "cora reproduction", cora_reproduction());
    report(9, "determinism", determinism());

    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
