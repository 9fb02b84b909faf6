//! Density-based clustering with Euclidean distance and core/border/noise
//! semantics. Noise points receive label -1.

use super::UserEmbeddingTable;
use crate::error::{Error, Result};
use crate::ids::UserId;
use std::collections::{BTreeMap, VecDeque};

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Cluster user embeddings; label -1 marks noise. A point is core when
/// its eps-neighborhood (itself included) holds at least `min_pts` points.
pub fn dbscan_cluster(
    emb: &UserEmbeddingTable,
    eps: f64,
    min_pts: usize,
) -> Result<BTreeMap<UserId, i64>> {
    if eps <= 0.0 {
        return Err(Error::InvalidInput(format!("eps must be > 0, got {eps}")));
    }
    if min_pts == 0 {
        return Err(Error::InvalidInput("min_pts must be >= 1".into()));
    }
    let users: Vec<&UserId> = emb.iter().map(|(u, _)| u).collect();
    let points: Vec<&[f64]> = emb.iter().map(|(_, v)| v).collect();
    let n = points.len();

    let neighbors = |i: usize| -> Vec<usize> {
        (0..n)
            .filter(|&j| dist(points[i], points[j]) <= eps)
            .collect()
    };

    const UNVISITED: i64 = -2;
    const NOISE: i64 = -1;
    let mut labels = vec![UNVISITED; n];
    let mut cluster = 0i64;
    for i in 0..n {
        if labels[i] != UNVISITED {
            continue;
        }
        let nbrs = neighbors(i);
        if nbrs.len() < min_pts {
            labels[i] = NOISE;
            continue;
        }
        labels[i] = cluster;
        let mut queue: VecDeque<usize> = nbrs.into_iter().collect();
        while let Some(j) = queue.pop_front() {
            if labels[j] == NOISE {
                labels[j] = cluster; // border point adopted by the cluster
            }
            if labels[j] != UNVISITED {
                continue;
            }
            labels[j] = cluster;
            let jn = neighbors(j);
            if jn.len() >= min_pts {
                queue.extend(jn);
            }
        }
        cluster += 1;
    }
    Ok(users
        .into_iter()
        .zip(labels)
        .map(|(u, l)| (u.clone(), l))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn table(points: &[(String, Vec<f64>)]) -> UserEmbeddingTable {
        let mut t = UserEmbeddingTable::new();
        for (u, v) in points {
            t.insert(UserId::new(u.clone()), v.clone()).unwrap();
        }
        t
    }

    fn blob(cx: f64, cy: f64, n: usize, prefix: &str) -> Vec<(String, Vec<f64>)> {
        (0..n)
            .map(|i| {
                let a = i as f64 * 0.7;
                (
                    format!("{prefix}{i}"),
                    vec![cx + 0.05 * a.cos(), cy + 0.05 * a.sin()],
                )
            })
            .collect()
    }

    #[test]
    fn two_blobs_three_outliers() {
        let mut pts = blob(0.0, 0.0, 6, "a");
        pts.extend(blob(10.0, 10.0, 6, "b"));
        pts.push(("o1".into(), vec![50.0, 50.0]));
        pts.push(("o2".into(), vec![-40.0, 30.0]));
        pts.push(("o3".into(), vec![30.0, -60.0]));
        let labels = dbscan_cluster(&table(&pts), 0.5, 3).unwrap();
        let clusters: std::collections::HashSet<i64> =
            labels.values().copied().filter(|&l| l >= 0).collect();
        assert_eq!(clusters.len(), 2);
        let noise = labels.values().filter(|&&l| l == -1).count();
        assert_eq!(noise, 3);
    }

    #[test]
    fn huge_eps_yields_single_cluster() {
        let mut pts = blob(0.0, 0.0, 4, "a");
        pts.extend(blob(100.0, 100.0, 4, "b"));
        let labels = dbscan_cluster(&table(&pts), 1e9, 2).unwrap();
        assert!(labels.values().all(|&l| l == 0));
    }

    /// Reference implementation: pairwise-distance matrix plus BFS
    /// expansion from core points, written independently of the
    /// production traversal.
    fn brute_force_dbscan(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<i64> {
        let n = points.len();
        let mut d = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                d[i][j] = dist(&points[i], &points[j]);
            }
        }
        let core: Vec<bool> = (0..n)
            .map(|i| (0..n).filter(|&j| d[i][j] <= eps).count() >= min_pts)
            .collect();
        let mut labels = vec![-1i64; n];
        let mut next = 0i64;
        for i in 0..n {
            if !core[i] || labels[i] != -1 {
                continue;
            }
            // BFS over core points within eps
            let mut q = vec![i];
            labels[i] = next;
            while let Some(x) = q.pop() {
                for j in 0..n {
                    if d[x][j] <= eps && labels[j] == -1 {
                        labels[j] = next;
                        if core[j] {
                            q.push(j);
                        }
                    }
                }
            }
            next += 1;
        }
        labels
    }

    #[test]
    fn matches_brute_force_reference_on_random_fixture() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<(String, Vec<f64>)> = (0..20)
            .map(|i| {
                let cluster = i % 3;
                let (cx, cy) = [(0.0, 0.0), (4.0, 4.0), (9.0, 0.0)][cluster];
                (
                    format!("u{i:02}"),
                    vec![cx + rng.gen_range(-0.4..0.4), cy + rng.gen_range(-0.4..0.4)],
                )
            })
            .collect();
        let t = table(&pts);
        let ours = dbscan_cluster(&t, 1.0, 3).unwrap();
        let raw: Vec<Vec<f64>> = t.iter().map(|(_, v)| v.to_vec()).collect();
        let reference = brute_force_dbscan(&raw, 1.0, 3);
        // same noise set, and same partition up to label renaming
        let our_vec: Vec<i64> = t.iter().map(|(u, _)| ours[u]).collect();
        for i in 0..our_vec.len() {
            assert_eq!(our_vec[i] == -1, reference[i] == -1, "noise mismatch at {i}");
            for j in 0..our_vec.len() {
                assert_eq!(
                    our_vec[i] == our_vec[j] && our_vec[i] != -1,
                    reference[i] == reference[j] && reference[i] != -1,
                    "partition mismatch at ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn deterministic() {
        let pts = blob(0.0, 0.0, 8, "x");
        let t = table(&pts);
        assert_eq!(
            dbscan_cluster(&t, 0.3, 2).unwrap(),
            dbscan_cluster(&t, 0.3, 2).unwrap()
        );
    }
}
