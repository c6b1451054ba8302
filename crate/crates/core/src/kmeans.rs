//! Lloyd's k-means with k-means++ seeding and multi-restart selection.
//!
//! Every restart draws from its own seeded stream, so results do not depend
//! on whether restarts execute sequentially or on the rayon pool.

use crate::array::Array;
use crate::error::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const MAX_ITERS: usize = 300;

#[derive(Clone, Debug)]
pub struct KMeansResult {
    /// k x d centroid matrix.
    pub centroids: Array,
    pub labels: Vec<usize>,
    /// Sum of squared distances to assigned centroids.
    pub inertia: f64,
}

/// Best-of-`restarts` k-means over the rows of `x` (N x d).
pub fn kmeans(x: &Array, k: usize, seed: u64, restarts: usize) -> Result<KMeansResult> {
    if x.ndim() != 2 {
        return Err(Error::dimension("kmeans", "input must be N x d".into()));
    }
    let n = x.rows();
    if k == 0 || k > n {
        return Err(Error::dimension(
            "kmeans",
            format!("k={k} out of range for {n} samples"),
        ));
    }
    let restarts = restarts.max(1);

    let run_one = |restart: usize| -> KMeansResult {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(restart as u64 + 1);
        lloyd(x, k, &mut rng)
    };

    #[cfg(feature = "parallel")]
    let runs: Vec<KMeansResult> = {
        use rayon::prelude::*;
        (0..restarts).into_par_iter().map(run_one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let runs: Vec<KMeansResult> = (0..restarts).map(run_one).collect();

    // Lowest inertia wins; ties resolved by restart order.
    Ok(runs
        .into_iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| {
            a.inertia
                .partial_cmp(&b.inertia)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(ia.cmp(ib))
        })
        .map(|(_, r)| r)
        .expect("at least one restart"))
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus_seeding(x: &Array, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = x.rows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.gen_range(0..n));
    let mut dist2: Vec<f64> = (0..n)
        .map(|i| squared_distance(x.row(i), x.row(chosen[0])))
        .collect();
    while chosen.len() < k {
        let total: f64 = dist2.iter().sum();
        let next = if total <= 0.0 {
            // All remaining mass is zero (duplicate points); take the first
            // index not already chosen.
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        } else {
            let mut target = rng.gen_range(0.0..total);
            let mut pick = n - 1;
            for (i, &d) in dist2.iter().enumerate() {
                if target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        };
        chosen.push(next);
        for i in 0..n {
            let d = squared_distance(x.row(i), x.row(next));
            if d < dist2[i] {
                dist2[i] = d;
            }
        }
    }
    chosen
}

fn assign(x: &Array, centroids: &Array) -> (Vec<usize>, f64) {
    let n = x.rows();
    let k = centroids.rows();
    let one = |i: usize| -> (usize, f64) {
        let row = x.row(i);
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for c in 0..k {
            let d = squared_distance(row, centroids.row(c));
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        (best, best_d)
    };

    #[cfg(feature = "parallel")]
    let per_point: Vec<(usize, f64)> = {
        use rayon::prelude::*;
        if n * k * x.cols() >= crate::array::PAR_MIN_WORK {
            (0..n).into_par_iter().map(one).collect()
        } else {
            (0..n).map(one).collect()
        }
    };
    #[cfg(not(feature = "parallel"))]
    let per_point: Vec<(usize, f64)> = (0..n).map(one).collect();

    let labels = per_point.iter().map(|&(l, _)| l).collect();
    let inertia = per_point.iter().map(|&(_, d)| d).sum();
    (labels, inertia)
}

fn lloyd(x: &Array, k: usize, rng: &mut ChaCha8Rng) -> KMeansResult {
    let n = x.rows();
    let d = x.cols();
    let seeds = plus_plus_seeding(x, k, rng);
    let mut centroids = Array::zeros(&[k, d]);
    for (c, &i) in seeds.iter().enumerate() {
        for j in 0..d {
            centroids.set(c, j, x.at(i, j));
        }
    }

    let (mut labels, mut inertia) = assign(x, &centroids);
    for _ in 0..MAX_ITERS {
        // Give every empty cluster the point farthest from its centroid.
        let mut counts = vec![0usize; k];
        for &l in &labels {
            counts[l] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| counts[labels[i]] > 1)
                .max_by(|&a, &b| {
                    let da = squared_distance(x.row(a), centroids.row(labels[a]));
                    let db = squared_distance(x.row(b), centroids.row(labels[b]));
                    da.partial_cmp(&db).unwrap().then(b.cmp(&a))
                });
            if let Some(i) = far {
                counts[labels[i]] -= 1;
                labels[i] = c;
                counts[c] = 1;
            }
        }

        // Means update.
        let mut sums = vec![0.0; k * d];
        for (i, &l) in labels.iter().enumerate() {
            for (j, &v) in x.row(i).iter().enumerate() {
                sums[l * d + j] += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            for j in 0..d {
                centroids.set(c, j, sums[c * d + j] / counts[c] as f64);
            }
        }

        let (new_labels, new_inertia) = assign(x, &centroids);
        let stable = new_labels == labels;
        labels = new_labels;
        inertia = new_inertia;
        if stable {
            break;
        }
    }

    KMeansResult {
        centroids,
        labels,
        inertia,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_equals_n_gives_zero_inertia() {
        let x = Array::from_vec(&[4, 2], vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let res = kmeans(&x, 4, 0, 3).unwrap();
        assert!(res.inertia < 1e-12);
        let mut sorted = res.labels.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2, 3]);
    }

    #[test]
    fn two_points_one_cluster_centroid_is_midpoint() {
        let x = Array::from_vec(&[2, 2], vec![0.0, 0.0, 2.0, 4.0]).unwrap();
        let res = kmeans(&x, 1, 7, 1).unwrap();
        assert_eq!(res.centroids.row(0), &[1.0, 2.0]);
        assert_eq!(res.labels, vec![0, 0]);
    }

    #[test]
    fn square_corners_match_exhaustive_partition_search() {
        // 4 points at the corners of a unit square, k=2. Oracle: enumerate all
        // 2-partitions and compute the optimal within-cluster cost directly.
        let pts = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)];
        let flat: Vec<f64> = pts.iter().flat_map(|&(a, b)| [a, b]).collect();
        let x = Array::from_vec(&[4, 2], flat).unwrap();

        let mut best = f64::INFINITY;
        for mask in 1u32..15 {
            let (mut ca, mut cb): (Vec<usize>, Vec<usize>) = (vec![], vec![]);
            for i in 0..4 {
                if mask & (1 << i) != 0 {
                    ca.push(i);
                } else {
                    cb.push(i);
                }
            }
            let cost = |group: &[usize]| -> f64 {
                if group.is_empty() {
                    return 0.0;
                }
                let mx = group.iter().map(|&i| pts[i].0).sum::<f64>() / group.len() as f64;
                let my = group.iter().map(|&i| pts[i].1).sum::<f64>() / group.len() as f64;
                group
                    .iter()
                    .map(|&i| (pts[i].0 - mx).powi(2) + (pts[i].1 - my).powi(2))
                    .sum()
            };
            best = best.min(cost(&ca) + cost(&cb));
        }

        let res = kmeans(&x, 2, 3, 10).unwrap();
        assert!((res.inertia - best).abs() < 1e-12);
        // side/2 squared, twice per cluster, two clusters
        assert!((res.inertia - 1.0).abs() < 1e-12);
    }

    #[test]
    fn k_larger_than_n_is_rejected() {
        let x = Array::zeros(&[3, 2]);
        assert!(kmeans(&x, 4, 0, 1).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let data: Vec<f64> = (0..40).map(|i| ((i * 37) % 23) as f64 * 0.1).collect();
        let x = Array::from_vec(&[20, 2], data).unwrap();
        let a = kmeans(&x, 3, 11, 5).unwrap();
        let b = kmeans(&x, 3, 11, 5).unwrap();
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.inertia, b.inertia);
    }
}
