//! Clustering readout, metrics, feature analysis and experiment sweeps.

mod features;
mod kmeans;
mod metrics;
mod report;
mod sweeps;
mod theorem;

pub use features::{dominant_features, dtw_distance, profile_dtw_matrix, DominantFeatures};
pub use kmeans::{kmeans, kmeans_single, ClusteringResult, DEFAULT_RESTARTS, MAX_LLOYD_ITERS};
pub use metrics::{clustering_accuracy, hungarian, nmi, score, Metrics};
pub use report::{fmt_f, MetricsReport, SweepTable};
pub use sweeps::{
    ablation_sweep, k_lambda_sweep, m_n_sweep, raw_kmeans_baseline, robustness_sweep, se_interval_study,
    summarize, train_and_cluster, RunOutcome, Summary, ABLATION_ROWS,
};
pub use theorem::{spearman, theorem1_experiment, theorem_setup, TheoremSetup, TheoremSummary, TheoremTrial, MIN_TRIALS};
