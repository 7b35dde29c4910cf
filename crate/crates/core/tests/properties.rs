//! Property tests over randomly generated small instances.

use fpgc::evaluation::{clustering_accuracy, dtw_distance, kmeans_single, nmi, theorem_setup};
use fpgc::feature_cross::{cross, partition_fields};
use fpgc::graph::{acd_with_hops, normalize_adjacency, perturb_edges, Graph, NormalizedGraph, SyntheticSpec};
use fpgc::propagation::{appnp_propagate, sgc_filter};
use fpgc::se_gating::{compose_view, gate, select_ranked, select_top_n, GateParams, SharedProjection};
use fpgc::training::{contrastive_loss, total_loss, ModelParams, OptState, TrainConfig, ViewPair};
use ndarray::{Array1, Array2, Axis};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Node count, edge list over those nodes and a feature matrix.
fn graph_strategy(max_n: usize, d: usize) -> impl Strategy<Value = Graph> {
    (2..=max_n).prop_flat_map(move |n| {
        let edges = prop::collection::vec((0..n, 0..n), 0..3 * n);
        let feats = prop::collection::vec(-3.0..3.0f64, n * d);
        (Just(n), edges, feats).prop_map(move |(n, e, f)| {
            Graph::new(n, e, Array2::from_shape_vec((n, d), f).unwrap(), None, None).unwrap()
        })
    })
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(-2.0..2.0f64, rows * cols).prop_map(move |v| Array2::from_shape_vec((rows, cols), v).unwrap())
}

fn permutation(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle()
}

/// Graph with node `i` renamed to `perm[i]`.
fn relabel(g: &Graph, perm: &[usize]) -> Graph {
    let n = g.num_nodes();
    let mut x = Array2::zeros(g.features().raw_dim());
    for (i, &p) in perm.iter().enumerate() {
        x.row_mut(p).assign(&g.features().row(i));
    }
    let labels = g.labels().map(|l| {
        let mut out = vec![0; n];
        for i in 0..n {
            out[perm[i]] = l[i];
        }
        out
    });
    let edges = g.edges().iter().map(|&(u, v)| (perm[u], perm[v]));
    Graph::new(n, edges, x, labels, g.num_clusters()).unwrap()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
fn symmetric_eigenvalues(m: &Array2<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    for _ in 0..100 {
        let off: f64 = a.indexed_iter().filter(|((i, j), _)| i != j).map(|(_, v)| v * v).sum();
        if off < 1e-22 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[[p, q]].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[[k, p]], a[[k, q]]);
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[[p, k]], a[[q, k]]);
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[[i, i]]).collect()
}

fn permuted_rows(a: &Array2<f64>, perm: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros(a.raw_dim());
    for (i, &p) in perm.iter().enumerate() {
        out.row_mut(p).assign(&a.row(i));
    }
    out
}

fn max_row_spread(x: &Array2<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..x.nrows() {
        for j in i + 1..x.nrows() {
            worst = worst.max((&x.row(i) - &x.row(j)).mapv(|v| v * v).sum().sqrt());
        }
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalized_adjacency_is_symmetric_with_bounded_spectrum(g in graph_strategy(20, 1)) {
        let ng = normalize_adjacency(&g);
        let a = ng.adj_norm.to_dense();
        prop_assert_eq!(&a, &a.t());
        let l = ng.laplacian_dense();
        let evs = symmetric_eigenvalues(&l);
        prop_assert!((evs.iter().sum::<f64>() - l.diag().sum()).abs() < 1e-9);
        prop_assert!((evs.iter().map(|v| v * v).sum::<f64>() - l.mapv(|v| v * v).sum()).abs() < 1e-9);
        for ev in evs {
            prop_assert!((-1e-8..=2.0 + 1e-8).contains(&ev), "eigenvalue {}", ev);
        }
    }

    #[test]
    fn row_sums_match_three_factor_product(g in graph_strategy(30, 1)) {
        let n = g.num_nodes();
        let mut at = Array2::<f64>::eye(n);
        for &(u, v) in g.edges() {
            at[[u, v]] = 1.0;
            at[[v, u]] = 1.0;
        }
        let d = at.sum_axis(Axis(1));
        let dinv = Array2::from_diag(&d.mapv(|v| 1.0 / v.sqrt()));
        let dense = dinv.dot(&at).dot(&dinv);
        let sums = normalize_adjacency(&g).adj_norm.row_sums();
        for (s, row) in sums.iter().zip(dense.rows()) {
            prop_assert!((s - row.sum()).abs() < 1e-12);
        }
    }

    #[test]
    fn rewiring_keeps_edge_count(g in graph_strategy(20, 1), r in 0.0..=1.0f64, seed in any::<u64>()) {
        let n = g.num_nodes();
        prop_assume!(n * (n - 1) / 2 >= 2 * g.edges().len());
        let a = perturb_edges(&g, r, seed).unwrap();
        let b = perturb_edges(&g, r, seed).unwrap();
        prop_assert_eq!(a.edges().len(), g.edges().len());
        prop_assert_eq!(a.edges(), b.edges());
        let kept = a.edges().iter().filter(|e| g.edges().contains(e)).count();
        let removed = (r * g.edges().len() as f64).floor() as usize;
        prop_assert_eq!(kept, g.edges().len() - removed);
        prop_assert!(a.edges().iter().all(|&(u, v)| u < v));
    }

    #[test]
    fn acd_ignores_node_order(g in graph_strategy(12, 3), perm_seed in any::<u64>()) {
        let n = g.num_nodes();
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let g = Graph::new(n, g.edges().iter().copied(), g.features().clone(), Some(labels), Some(2)).unwrap();
        let mut perm: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut ChaCha8Rng::seed_from_u64(perm_seed));
        let a = acd_with_hops(&g, 2).unwrap();
        let b = acd_with_hops(&relabel(&g, &perm), 2).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn filter_powers_compose(g in graph_strategy(15, 3), a in 0usize..4, b in 0usize..4) {
        let ng = normalize_adjacency(&g);
        let inner = sgc_filter(&ng, g.features(), b).unwrap().xbar;
        let twice = sgc_filter(&ng, &inner, a).unwrap().xbar;
        let once = sgc_filter(&ng, g.features(), a + b).unwrap().xbar;
        for (x, y) in twice.iter().zip(&once) {
            prop_assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn filtering_regular_graphs_shrinks_spread(n in 3usize..12, x in matrix(12, 3)) {
        // On a cycle every row of A is a convex combination of rows.
        let x = x.slice(ndarray::s![..n, ..]).to_owned();
        let g = Graph::new(n, (0..n).map(|i| (i, (i + 1) % n)), x.clone(), None, None).unwrap();
        let ng = normalize_adjacency(&g);
        let mut prev = max_row_spread(&x);
        for k in 1..6 {
            let s = max_row_spread(&sgc_filter(&ng, &x, k).unwrap().xbar);
            prop_assert!(s <= prev + 1e-12);
            prev = s;
        }
    }

    #[test]
    fn appnp_residuals_shrink(g in graph_strategy(15, 2), eta in 0.05..0.9f64) {
        let p = appnp_propagate(&normalize_adjacency(&g), g.features(), eta, 30).unwrap();
        for w in p.residuals[1..].windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12, "{:?}", p.residuals);
        }
    }

    #[test]
    fn gated_view_is_a_mixture_of_models(base in matrix(5, 4), gates in matrix(5, 3), w in matrix(4, 3)) {
        let gates = gates.mapv(|v| v.abs() / 2.0);
        let got = compose_view(&base, &gates, &SharedProjection { w: w.clone() }).unwrap();
        for i in 0..5 {
            for j in 0..3 {
                // Model j keeps only output column j of the shared projection.
                let mut wj = Array2::<f64>::zeros((3, 3));
                wj[[j, j]] = 1.0;
                let model = base.row(i).dot(&w).dot(&wj);
                let mut want = 0.0;
                for u in 0..3 {
                    want += gates[[i, u]] * model[u];
                }
                let only = gates[[i, j]] * base.row(i).dot(&w.column(j));
                prop_assert!((got[[i, j]] - want).abs() <= 1e-10);
                prop_assert!((got[[i, j]] - only).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn gate_rows_depend_only_on_their_node(x in matrix(6, 5), row in 0usize..6, delta in matrix(1, 5), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gp = GateParams::init(2, 3, true, &mut rng);
        let imp = Array1::from_vec(vec![0.9, 0.1, 0.5, 0.7, 0.3]);
        let before = gate(&select_ranked(&x, &imp, 0, 2, true).unwrap(), &gp).unwrap();
        let mut x2 = x.clone();
        x2.row_mut(row).scaled_add(1.0, &delta.row(0));
        let after = gate(&select_ranked(&x2, &imp, 0, 2, true).unwrap(), &gp).unwrap();
        for i in (0..6).filter(|&i| i != row) {
            prop_assert_eq!(before.row(i), after.row(i));
        }
    }

    #[test]
    fn top_n_is_row_equivariant(x in matrix(6, 5), imp in prop::collection::vec(0.0..1.0f64, 5), perm in permutation(6)) {
        let imp = Array1::from_vec(imp);
        let a = select_top_n(&x, &imp, 3).unwrap();
        let b = select_top_n(&permuted_rows(&x, &perm), &imp, 3).unwrap();
        prop_assert_eq!(&a.indices, &b.indices);
        prop_assert_eq!(permuted_rows(&a.values, &perm), b.values);
    }

    #[test]
    fn cross_is_row_equivariant(x in matrix(7, 9), m in 2usize..5, perm in permutation(7)) {
        let fp = partition_fields(9, m, 3).unwrap();
        let a = cross(&x, &fp).unwrap().r;
        let b = cross(&permuted_rows(&x, &perm), &fp).unwrap().r;
        prop_assert_eq!(a.ncols(), m * (m - 1) / 2);
        prop_assert_eq!(permuted_rows(&a, &perm), b);
    }

    #[test]
    fn loss_ignores_node_order(g in graph_strategy(8, 1), y in matrix(8, 3), yp in matrix(8, 3), perm_seed in any::<u64>(), lambda in 0.01..10.0f64) {
        let n = g.num_nodes();
        let y = y.slice(ndarray::s![..n, ..]).to_owned();
        let yp = yp.slice(ndarray::s![..n, ..]).to_owned();
        let mut perm: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut ChaCha8Rng::seed_from_u64(perm_seed));
        let views = ViewPair { y: y.clone(), y_prime: yp.clone() };
        let moved = ViewPair { y: permuted_rows(&y, &perm), y_prime: permuted_rows(&yp, &perm) };
        let a: NormalizedGraph = normalize_adjacency(&g);
        let b = normalize_adjacency(&relabel(&g, &perm));
        let (la, lb) = (total_loss(&views, &a, lambda), total_loss(&moved, &b, lambda));
        prop_assert!((la - lb).abs() <= 1e-9 * la.abs().max(1.0));
    }

    #[test]
    fn matching_views_lower_contrastive_loss(yp in matrix(4, 4)) {
        let y = Array2::<f64>::eye(4) * 2.0;
        let aligned = contrastive_loss(&ViewPair { y: y.clone(), y_prime: y.clone() });
        let random = contrastive_loss(&ViewPair { y: y.clone(), y_prime: yp });
        prop_assert!(aligned > 0.0);
        prop_assert!(aligned < random);
    }

    #[test]
    fn zero_gradient_adam_step_is_a_no_op(seed in any::<u64>(), lr in 1e-5..1.0f64) {
        let cfg = TrainConfig { hidden_dim: 3, d_out: 2, n: 2, seed, ..TrainConfig::default() };
        let p = ModelParams::init(4, 1, &cfg);
        let mut q = p.clone();
        let mut opt = OptState::new(&p);
        for _ in 0..3 {
            opt.step(&mut q, &p.zeros_like(), lr);
        }
        prop_assert_eq!(p, q);
    }

    #[test]
    fn accuracy_ignores_label_names(pred in prop::collection::vec(0usize..4, 1..12), truth_seed in any::<u64>(), perm in permutation(4)) {
        let mut rng = ChaCha8Rng::seed_from_u64(truth_seed);
        let truth: Vec<usize> = pred.iter().map(|_| rand::Rng::random_range(&mut rng, 0..3)).collect();
        let renamed: Vec<usize> = pred.iter().map(|&p| perm[p]).collect();
        let a = clustering_accuracy(&pred, &truth).unwrap();
        prop_assert!((a - clustering_accuracy(&renamed, &truth).unwrap()).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((nmi(&pred, &truth).unwrap() - nmi(&truth, &pred).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn lloyd_inertia_never_rises(z in matrix(20, 2), c in 1usize..5, seed in any::<u64>()) {
        let (_, trace) = kmeans_single(&z, c, seed).unwrap();
        for w in trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9);
        }
    }

    #[test]
    fn dtw_is_symmetric(a in prop::collection::vec(-5.0..5.0f64, 1..10), b in prop::collection::vec(-5.0..5.0f64, 1..10)) {
        prop_assert_eq!(dtw_distance(&a, &b, 1e9).unwrap(), dtw_distance(&b, &a, 1e9).unwrap());
        prop_assert_eq!(dtw_distance(&a, &a, 1e9).unwrap(), 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn swapped_pairs_match(seed in any::<u64>(), i in 0usize..40, j in 0usize..40) {
        let (mu1, mu2) = SyntheticSpec::block_means(8, 2.0);
        let spec = SyntheticSpec {
            nodes_per_cluster: 20,
            mu1,
            mu2,
            intra_edge_prob: 0.2,
            inter_edge_prob: 0.02,
            feature_variance: 1.0,
            seed,
        };
        let setup = theorem_setup(&spec, 3).unwrap();
        let (a, b) = (setup.trial(i, j), setup.trial(j, i));
        prop_assert_eq!((a.overlap, a.prob_gap), (b.overlap, b.prob_gap));
        prop_assert!(a.overlap.is_finite() && (0.0..=1.0).contains(&a.prob_gap));
    }
}
