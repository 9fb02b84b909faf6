//! Lloyd's algorithm with k-means++ seeding.

use super::UserEmbeddingTable;
use crate::error::{Error, Result};
use crate::ids::UserId;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

const MAX_ITERS: usize = 300;

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Sum of squared distances to assigned centroids.
pub fn inertia(points: &[Vec<f64>], centroids: &[Vec<f64>], labels: &[usize]) -> f64 {
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| dist_sq(p, &centroids[l]))
        .sum()
}

fn kmeans_plus_plus(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..points.len())].clone());
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| dist_sq(p, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            // all remaining mass at existing centroids; pick any point
            rng.gen_range(0..points.len())
        } else {
            let x = rng.gen_range(0.0..total);
            let mut acc = 0.0;
            let mut idx = points.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > x {
                    idx = i;
                    break;
                }
            }
            idx
        };
        centroids.push(points[next].clone());
        for (i, p) in points.iter().enumerate() {
            let d = dist_sq(p, centroids.last().expect("just pushed"));
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    centroids
}

fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> Vec<usize> {
    points
        .iter()
        .map(|p| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (j, c) in centroids.iter().enumerate() {
                let d = dist_sq(p, c);
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Cluster user embeddings into K groups; deterministic per seed.
pub fn kmeans_cluster(
    emb: &UserEmbeddingTable,
    k: usize,
    seed: u64,
) -> Result<BTreeMap<UserId, i64>> {
    let users: Vec<&UserId> = emb.iter().map(|(u, _)| u).collect();
    let points: Vec<Vec<f64>> = emb.iter().map(|(_, v)| v.to_vec()).collect();
    if k == 0 || k > points.len() {
        return Err(Error::InvalidInput(format!(
            "K={} invalid for {} users",
            k,
            points.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_plus_plus(&points, k, &mut rng);
    let mut labels = assign(&points, &centroids);
    for _ in 0..MAX_ITERS {
        // update step
        let dim = points[0].len();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(p) {
                *s += x;
            }
        }
        for j in 0..k {
            if counts[j] == 0 {
                // relocate an empty cluster to the point farthest from its centroid
                let far = labels
                    .iter()
                    .enumerate()
                    .max_by(|(a, &la), (b, &lb)| {
                        let da = dist_sq(&points[*a], &centroids[la]);
                        let db = dist_sq(&points[*b], &centroids[lb]);
                        da.partial_cmp(&db).expect("finite")
                    })
                    .map(|(i, _)| i)
                    .expect("non-empty points");
                centroids[j] = points[far].clone();
            } else {
                centroids[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
        let new_labels = assign(&points, &centroids);
        if new_labels == labels {
            break;
        }
        labels = new_labels;
    }
    Ok(users
        .into_iter()
        .zip(labels)
        .map(|(u, l)| (u.clone(), l as i64))
        .collect())
}
