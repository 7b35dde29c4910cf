//! Lloyd's algorithm with k-means++ seeding and best-of-`restarts`.

use ndarray::{Array2, ArrayView1, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::training::derive_seed;

pub const DEFAULT_RESTARTS: usize = 10;
pub const MAX_LLOYD_ITERS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult {
    pub assignments: Vec<usize>,
    pub centroids: Array2<f64>,
    pub inertia: f64,
    /// Seed of the restart that produced this result.
    pub seed: u64,
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus_init(z: &Array2<f64>, c: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = z.nrows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(z.row(i), z.row(chosen[0]))).collect();
    while chosen.len() < c {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            // Every point coincides with a centre; take any unused index.
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(z.row(i), z.row(next)));
        }
    }
    z.select(Axis(0), &chosen)
}

/// Nearest centroid per row (ties to the lower index) and the inertia.
fn assign(z: &Array2<f64>, centroids: &Array2<f64>) -> (Vec<usize>, f64) {
    let pairs: Vec<(usize, f64)> = (0..z.nrows())
        .into_par_iter()
        .map(|i| {
            let mut best = (0, f64::INFINITY);
            for (c, cent) in centroids.axis_iter(Axis(0)).enumerate() {
                let d = sq_dist(z.row(i), cent);
                if d < best.1 {
                    best = (c, d);
                }
            }
            best
        })
        .collect();
    let inertia = pairs.iter().map(|p| p.1).sum();
    (pairs.into_iter().map(|p| p.0).collect(), inertia)
}

/// One k-means++/Lloyd run. Also returns the inertia after every
/// assignment step.
pub fn kmeans_single(z: &Array2<f64>, c: usize, seed: u64) -> Result<(ClusteringResult, Vec<f64>)> {
    check(z, c)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(z, c, &mut rng);
    let (mut labels, mut inertia) = assign(z, &centroids);
    let mut trace = vec![inertia];
    for _ in 0..MAX_LLOYD_ITERS {
        let mut sums = Array2::<f64>::zeros(centroids.raw_dim());
        let mut counts = vec![0usize; c];
        for (i, &l) in labels.iter().enumerate() {
            let mut row = sums.row_mut(l);
            row += &z.row(i);
            counts[l] += 1;
        }
        for (k, &cnt) in counts.iter().enumerate() {
            if cnt == 0 {
                log::debug!("k-means: cluster {k} is empty, keeping its centroid");
                continue;
            }
            centroids.row_mut(k).assign(&(&sums.row(k) / cnt as f64));
        }
        let (next, next_inertia) = assign(z, &centroids);
        trace.push(next_inertia);
        let changed = next != labels;
        labels = next;
        inertia = next_inertia;
        if !changed {
            break;
        }
    }
    Ok((
        ClusteringResult {
            assignments: labels,
            centroids,
            inertia,
            seed,
        },
        trace,
    ))
}

fn check(z: &Array2<f64>, c: usize) -> Result<()> {
    if c == 0 || c > z.nrows() {
        return Err(Error::param(format!(
            "cannot form {c} clusters from {} points",
            z.nrows()
        )));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("k-means input contains non-finite values".into()));
    }
    Ok(())
}

/// Best-inertia result over `restarts` runs with seeds derived from `seed`.
pub fn kmeans(z: &Array2<f64>, c: usize, restarts: usize, seed: u64) -> Result<ClusteringResult> {
    check(z, c)?;
    let mut best: Option<ClusteringResult> = None;
    for r in 0..restarts.max(1) {
        let (res, _) = kmeans_single(z, c, derive_seed(seed, 1000 + r as u64))?;
        if best.as_ref().is_none_or(|b| res.inertia < b.inertia) {
            best = Some(res);
        }
    }
    Ok(best.expect("at least one restart"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn separates_two_pairs() {
        let z = array![[0.0, 0.0], [0.0, 1.0], [10.0, 10.0], [10.0, 11.0]];
        let r = kmeans(&z, 2, 5, 1).unwrap();
        assert_eq!(r.assignments[0], r.assignments[1]);
        assert_eq!(r.assignments[2], r.assignments[3]);
        assert_ne!(r.assignments[0], r.assignments[2]);
        assert!((r.inertia - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_cluster_per_point() {
        let z = array![[0.0], [1.0], [5.0]];
        let r = kmeans(&z, 3, 1, 0).unwrap();
        assert_eq!(r.inertia, 0.0);
        let mut a = r.assignments.clone();
        a.sort();
        assert_eq!(a, vec![0, 1, 2]);
    }

    #[test]
    fn too_many_clusters() {
        assert!(matches!(kmeans(&array![[0.0]], 2, 1, 0), Err(Error::Parameter(_))));
    }

    fn brute_force_two(z: &Array2<f64>) -> f64 {
        let n = z.nrows();
        let mut best = f64::INFINITY;
        for mask in 1..(1u32 << n) - 1 {
            let mut cost = 0.0;
            for side in [true, false] {
                let idx: Vec<usize> = (0..n).filter(|&i| ((mask >> i) & 1 == 1) == side).collect();
                let sub = z.select(Axis(0), &idx);
                let mean = sub.mean_axis(Axis(0)).unwrap();
                cost += sub.axis_iter(Axis(0)).map(|r| sq_dist(r, mean.view())).sum::<f64>();
            }
            best = best.min(cost);
        }
        best
    }

    #[test]
    fn close_to_exhaustive_optimum() {
        let mut hits = 0;
        let total = 50;
        for s in 0..total {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let z = Array2::from_shape_simple_fn((6, 2), || rng.random_range(-1.0..1.0));
            let r = kmeans(&z, 2, DEFAULT_RESTARTS, s).unwrap();
            if r.inertia <= brute_force_two(&z) + 1e-9 {
                hits += 1;
            }
        }
        assert!(hits * 10 >= total * 9, "{hits}/{total}");
    }

    #[test]
    fn inertia_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z = Array2::from_shape_simple_fn((60, 3), || rng.random_range(-1.0..1.0));
        let (_, trace) = kmeans_single(&z, 4, 9).unwrap();
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let z = Array2::from_shape_simple_fn((40, 2), || rng.random_range(-1.0..1.0));
        assert_eq!(kmeans(&z, 3, 4, 2).unwrap(), kmeans(&z, 3, 4, 2).unwrap());
    }
}
