//! Training-user selection strategies: importance-aware, clustering-based
//! (K-means or DBSCAN), uniform random, and the repetition-penalty
//! composite that merges importance and clustering draws.

mod dbscan;
mod kmeans;

pub use dbscan::dbscan_cluster;
pub use kmeans::{inertia, kmeans_cluster};

use crate::error::{Error, Result};
use crate::ids::UserId;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// Per-user embedding vectors, all of one dimension.
#[derive(Clone, Debug, Default)]
pub struct UserEmbeddingTable {
    vectors: BTreeMap<UserId, Vec<f64>>,
    dim: usize,
}

impl UserEmbeddingTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, user: UserId, v: Vec<f64>) -> Result<()> {
        if !v.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite embedding for user {user}"
            )));
        }
        if self.vectors.is_empty() {
            self.dim = v.len();
        } else if v.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "embedding dimension {} for user {user}, expected {}",
                v.len(),
                self.dim
            )));
        }
        self.vectors.insert(user, v);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, user: &UserId) -> Option<&[f64]> {
        self.vectors.get(user).map(Vec::as_slice)
    }

    /// Users in sorted order; clustering iterates this for determinism.
    pub fn iter(&self) -> impl Iterator<Item = (&UserId, &[f64])> {
        self.vectors.iter().map(|(u, v)| (u, v.as_slice()))
    }

    pub fn l2_normalized(&self) -> Self {
        let mut out = Self::new();
        for (u, v) in self.iter() {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nv = if norm > 0.0 {
                v.iter().map(|x| x / norm).collect()
            } else {
                v.to_vec()
            };
            out.insert(u.clone(), nv).expect("finite");
        }
        out
    }

    /// TSV rows `user_id\tv1,v2,...,vd`.
    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(
            std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?,
        );
        for (u, v) in self.iter() {
            let joined: Vec<String> = v.iter().map(|x| format!("{x:.17e}")).collect();
            writeln!(out, "{u}\t{}", joined.join(","))
                .map_err(|e| Error::io(path.display().to_string(), e))?;
        }
        Ok(())
    }

    pub fn read_tsv(path: &Path) -> Result<Self> {
        let file =
            std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut table = Self::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
            if line.trim().is_empty() {
                continue;
            }
            let (user, rest) = line.split_once('\t').ok_or_else(|| Error::Malformed {
                path: path.display().to_string(),
                line: idx + 1,
                message: "expected user\\tv1,v2,...".into(),
            })?;
            let v: std::result::Result<Vec<f64>, _> =
                rest.split(',').map(|x| x.trim().parse::<f64>()).collect();
            let v = v.map_err(|e| Error::Malformed {
                path: path.display().to_string(),
                line: idx + 1,
                message: format!("bad vector component: {e}"),
            })?;
            table.insert(UserId::new(user), v)?;
        }
        Ok(table)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingStrategy {
    Importance,
    Kmeans,
    Dbscan,
    Random,
    Composite,
}

impl std::str::FromStr for SamplingStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "importance" => Ok(Self::Importance),
            "kmeans" => Ok(Self::Kmeans),
            "dbscan" => Ok(Self::Dbscan),
            "random" => Ok(Self::Random),
            "composite" => Ok(Self::Composite),
            other => Err(Error::InvalidInput(format!("unknown strategy `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingPlan {
    pub strategy: SamplingStrategy,
    pub n_samples: usize,
    /// Repetition penalty base, in (0, 1).
    pub penalty_c: f64,
    pub kmeans_k: usize,
    pub dbscan_eps: f64,
    pub dbscan_min_pts: usize,
    pub seed: u64,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        Self {
            strategy: SamplingStrategy::Composite,
            n_samples: 100,
            penalty_c: 0.9,
            kmeans_k: 10,
            dbscan_eps: 0.5,
            dbscan_min_pts: 5,
            seed: 0,
        }
    }
}

impl SamplingPlan {
    pub fn validate(&self) -> Result<()> {
        if !(self.penalty_c > 0.0 && self.penalty_c < 1.0) {
            return Err(Error::Config(format!(
                "penalty C must lie in (0,1), got {}",
                self.penalty_c
            )));
        }
        if self.n_samples == 0 {
            return Err(Error::Config("n_samples must be >= 1".into()));
        }
        if self.kmeans_k == 0 {
            return Err(Error::Config("kmeans K must be >= 1".into()));
        }
        if self.dbscan_eps <= 0.0 {
            return Err(Error::Config("dbscan eps must be > 0".into()));
        }
        if self.dbscan_min_pts == 0 {
            return Err(Error::Config("dbscan min_pts must be >= 1".into()));
        }
        Ok(())
    }
}

/// Ordered multiset of drawn users.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SampledUserSet {
    pub draws: Vec<UserId>,
}

impl SampledUserSet {
    pub fn multiplicity(&self) -> BTreeMap<UserId, usize> {
        let mut m = BTreeMap::new();
        for u in &self.draws {
            *m.entry(u.clone()).or_insert(0) += 1;
        }
        m
    }

    pub fn merge(mut self, other: SampledUserSet) -> SampledUserSet {
        self.draws.extend(other.draws);
        self
    }

    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(
            std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?,
        );
        for (i, u) in self.draws.iter().enumerate() {
            writeln!(out, "{i}\t{u}").map_err(|e| Error::io(path.display().to_string(), e))?;
        }
        Ok(())
    }

    pub fn read_tsv(path: &Path) -> Result<Self> {
        let file =
            std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut draws = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
            if let Some((_, u)) = line.split_once('\t') {
                draws.push(UserId::new(u));
            }
        }
        Ok(SampledUserSet { draws })
    }
}

/// p(u) = ln(q_u) / sum ln(q_v), smoothed to ln(1 + q) when any user has
/// a single interaction so no user carries zero mass. Users whose weight
/// is still non-positive are excluded and logged.
pub fn importance_probabilities(
    counts: &BTreeMap<UserId, usize>,
) -> Result<BTreeMap<UserId, f64>> {
    if counts.is_empty() {
        return Err(Error::InvalidInput("empty user count map".into()));
    }
    let smooth = counts.values().any(|&q| q <= 1);
    let mut weights: BTreeMap<UserId, f64> = BTreeMap::new();
    for (u, &q) in counts {
        let w = if smooth {
            ((1 + q) as f64).ln()
        } else {
            (q as f64).ln()
        };
        if w > 0.0 {
            weights.insert(u.clone(), w);
        } else {
            log::warn!("user {u} excluded from importance sampling (q={q})");
        }
    }
    let total: f64 = weights.values().sum();
    if total <= 0.0 {
        return Err(Error::InvalidInput(
            "no user has positive importance weight".into(),
        ));
    }
    Ok(weights.into_iter().map(|(u, w)| (u, w / total)).collect())
}

/// Draw `n` users with replacement from an explicit probability map.
pub fn weighted_sample(
    probs: &BTreeMap<UserId, f64>,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> SampledUserSet {
    let users: Vec<&UserId> = probs.keys().collect();
    let mut cumulative = Vec::with_capacity(users.len());
    let mut acc = 0.0;
    for u in &users {
        acc += probs[*u];
        cumulative.push(acc);
    }
    let total = acc;
    let mut draws = Vec::with_capacity(n);
    for _ in 0..n {
        let x = rng.gen_range(0.0..total);
        let idx = cumulative.partition_point(|&c| c <= x).min(users.len() - 1);
        draws.push(users[idx].clone());
    }
    SampledUserSet { draws }
}

/// Cluster-size-proportional draw. Noise users (label -1) carry zero mass.
pub fn cluster_proportional_sample(
    labels: &BTreeMap<UserId, i64>,
    n: usize,
    seed: u64,
) -> Result<SampledUserSet> {
    let probs = cluster_proportional_probabilities(labels)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(weighted_sample(&probs, n, &mut rng))
}

/// The analytic probability map behind [`cluster_proportional_sample`],
/// exposed so draws can be checked against it.
pub fn cluster_proportional_probabilities(
    labels: &BTreeMap<UserId, i64>,
) -> Result<BTreeMap<UserId, f64>> {
    let mut cluster_size: BTreeMap<i64, usize> = BTreeMap::new();
    for &l in labels.values() {
        if l >= 0 {
            *cluster_size.entry(l).or_insert(0) += 1;
        }
    }
    if cluster_size.is_empty() {
        return Err(Error::InvalidInput(
            "all users are noise; nothing to sample".into(),
        ));
    }
    let total: f64 = labels
        .values()
        .filter(|&&l| l >= 0)
        .map(|l| cluster_size[l] as f64)
        .sum();
    Ok(labels
        .iter()
        .map(|(u, &l)| {
            let p = if l >= 0 {
                cluster_size[&l] as f64 / total
            } else {
                0.0
            };
            (u.clone(), p)
        })
        .collect())
}

/// Uniform i.i.d. draws with replacement; the standalone strategy.
pub fn random_sample(users: &[UserId], n: usize, seed: u64) -> Result<SampledUserSet> {
    if users.is_empty() {
        return Err(Error::InvalidInput("empty user set".into()));
    }
    let mut sorted: Vec<&UserId> = users.iter().collect();
    sorted.sort();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws = (0..n)
        .map(|_| sorted[rng.gen_range(0..sorted.len())].clone())
        .collect();
    Ok(SampledUserSet { draws })
}

/// Repetition-penalty resampling over the merged importance + clustering
/// multiset. Final mass(u) = C^{M(u)} * M(u) / |merged|, renormalized.
/// At C -> 1 this degenerates to the merged empirical distribution.
pub fn penalty_resample(merged: &SampledUserSet, plan: &SamplingPlan) -> Result<SampledUserSet> {
    let probs = penalty_probabilities(merged, plan.penalty_c)?;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed.wrapping_add(0x70656e61)); // stage-distinct stream
    Ok(weighted_sample(&probs, plan.n_samples, &mut rng))
}

pub fn penalty_probabilities(
    merged: &SampledUserSet,
    penalty_c: f64,
) -> Result<BTreeMap<UserId, f64>> {
    if merged.draws.is_empty() {
        return Err(Error::InvalidInput("empty merged multiset".into()));
    }
    if !(penalty_c > 0.0 && penalty_c < 1.0) {
        return Err(Error::Config(format!(
            "penalty C must lie in (0,1), got {penalty_c}"
        )));
    }
    let mult = merged.multiplicity();
    let total_draws = merged.draws.len() as f64;
    let mut mass: BTreeMap<UserId, f64> = mult
        .into_iter()
        .map(|(u, m)| {
            let psi = penalty_c.powi(m as i32);
            (u, psi * m as f64 / total_draws)
        })
        .collect();
    let z: f64 = mass.values().sum();
    for v in mass.values_mut() {
        *v /= z;
    }
    Ok(mass)
}

/// The full composite strategy: importance draws plus clustering draws in
/// equal halves, merged, then penalty-resampled down to `n_samples`.
pub fn composite_sample(
    counts: &BTreeMap<UserId, usize>,
    labels: &BTreeMap<UserId, i64>,
    plan: &SamplingPlan,
) -> Result<SampledUserSet> {
    plan.validate()?;
    let half = plan.n_samples.div_ceil(2).max(1);
    let imp = importance_probabilities(counts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let u1 = weighted_sample(&imp, half, &mut rng);
    let u2 = cluster_proportional_sample(labels, half, plan.seed.wrapping_add(1))?;
    penalty_resample(&u1.merge(u2), plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::chi_square_gof_pvalue;

    fn uid(s: &str) -> UserId {
        UserId::new(s)
    }

    #[test]
    fn importance_hand_computed() {
        let counts: BTreeMap<UserId, usize> = [(uid("u1"), 10), (uid("u2"), 100)].into();
        let p = importance_probabilities(&counts).unwrap();
        // ln10 / (ln10 + ln100) = 1/3
        assert!((p[&uid("u1")] - 1.0 / 3.0).abs() < 1e-12);
        assert!((p[&uid("u2")] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn importance_uniform_when_counts_equal() {
        let counts: BTreeMap<UserId, usize> =
            (0..5).map(|i| (uid(&format!("u{i}")), 42)).collect();
        let p = importance_probabilities(&counts).unwrap();
        for v in p.values() {
            assert!((v - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn importance_single_user_and_sum_to_one() {
        let counts: BTreeMap<UserId, usize> = [(uid("solo"), 17)].into();
        let p = importance_probabilities(&counts).unwrap();
        assert!((p[&uid("solo")] - 1.0).abs() < 1e-12);

        let counts: BTreeMap<UserId, usize> =
            (0..50).map(|i| (uid(&format!("u{i}")), 2 + i)).collect();
        let p = importance_probabilities(&counts).unwrap();
        assert!((p.values().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn importance_smooths_singleton_counts() {
        let counts: BTreeMap<UserId, usize> = [(uid("a"), 1), (uid("b"), 3)].into();
        let p = importance_probabilities(&counts).unwrap();
        assert!(p[&uid("a")] > 0.0);
        let expect_a = 2f64.ln() / (2f64.ln() + 4f64.ln());
        assert!((p[&uid("a")] - expect_a).abs() < 1e-12);
    }

    #[test]
    fn importance_permutation_equivariant() {
        let counts: BTreeMap<UserId, usize> = [(uid("x"), 5), (uid("y"), 9)].into();
        let relabeled: BTreeMap<UserId, usize> = [(uid("y"), 5), (uid("x"), 9)].into();
        let p = importance_probabilities(&counts).unwrap();
        let q = importance_probabilities(&relabeled).unwrap();
        assert!((p[&uid("x")] - q[&uid("y")]).abs() < 1e-15);
    }

    #[test]
    fn proportional_sampling_matches_analytic_distribution() {
        // clusters of size 8 and 2
        let mut labels: BTreeMap<UserId, i64> = BTreeMap::new();
        for i in 0..8 {
            labels.insert(uid(&format!("a{i}")), 0);
        }
        for i in 0..2 {
            labels.insert(uid(&format!("b{i}")), 1);
        }
        let probs = cluster_proportional_probabilities(&labels).unwrap();
        assert!((probs.values().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((probs[&uid("a0")] - 8.0 / 68.0).abs() < 1e-12);
        assert!((probs[&uid("b0")] - 2.0 / 68.0).abs() < 1e-12);

        let set = cluster_proportional_sample(&labels, 100_000, 7).unwrap();
        let mult = set.multiplicity();
        let users: Vec<&UserId> = probs.keys().collect();
        let observed: Vec<u64> = users
            .iter()
            .map(|u| *mult.get(*u).unwrap_or(&0) as u64)
            .collect();
        let expected: Vec<f64> = users.iter().map(|u| probs[*u]).collect();
        assert!(chi_square_gof_pvalue(&observed, &expected) > 0.01);
    }

    #[test]
    fn dbscan_noise_gets_zero_mass() {
        let labels: BTreeMap<UserId, i64> =
            [(uid("n1"), -1), (uid("n2"), -1), (uid("ok"), 0)].into();
        let set = cluster_proportional_sample(&labels, 1000, 3).unwrap();
        assert!(set.draws.iter().all(|u| u == &uid("ok")));
    }

    #[test]
    fn all_noise_is_an_error() {
        let labels: BTreeMap<UserId, i64> = [(uid("n1"), -1)].into();
        assert!(cluster_proportional_sample(&labels, 10, 0).is_err());
    }

    #[test]
    fn random_sample_uniform_and_edges() {
        let users: Vec<UserId> = (0..10).map(|i| uid(&format!("u{i}"))).collect();
        let set = random_sample(&users, 100_000, 13).unwrap();
        let mult = set.multiplicity();
        let observed: Vec<u64> = users.iter().map(|u| mult[u] as u64).collect();
        assert!(chi_square_gof_pvalue(&observed, &[0.1; 10]) > 0.01);

        assert!(random_sample(&users, 0, 1).unwrap().draws.is_empty());
        let one = random_sample(&users[..1], 5, 1).unwrap();
        assert!(one.draws.iter().all(|u| u == &users[0]));
        assert!(random_sample(&[], 3, 1).is_err());
    }

    #[test]
    fn penalty_weights_hand_computed() {
        // psi = C^M: M=2 at C=0.9 gives 0.81
        assert!((0.9f64.powi(2) - 0.81).abs() < 1e-12);
        // ratio for M = {1, 3} at C = 0.5 is 0.5 : 0.125 = 4 : 1
        let merged = SampledUserSet {
            draws: vec![uid("a"), uid("b"), uid("b"), uid("b")],
        };
        let p = penalty_probabilities(&merged, 0.5).unwrap();
        // mass a = 0.5 * 1/4, mass b = 0.125 * 3/4
        let ratio = p[&uid("a")] / p[&uid("b")];
        assert!((ratio - (0.5 * 0.25) / (0.125 * 0.75)).abs() < 1e-12);
        assert!((p.values().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn penalty_degenerates_to_merge_distribution_near_one() {
        let merged = SampledUserSet {
            draws: vec![uid("a"), uid("a"), uid("b")],
        };
        let p = penalty_probabilities(&merged, 1.0 - 1e-12).unwrap();
        assert!((p[&uid("a")] - 2.0 / 3.0).abs() < 1e-9);
        assert!((p[&uid("b")] - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn stronger_penalty_reduces_expected_max_multiplicity() {
        // skewed base mass: one heavy user, several light ones
        let mut draws = vec![uid("heavy"); 10];
        for i in 0..5 {
            draws.push(uid(&format!("light{i}")));
        }
        let merged = SampledUserSet { draws };
        let mean_max = |c: f64| -> f64 {
            let mut total = 0usize;
            for seed in 0..1000u64 {
                let plan = SamplingPlan {
                    n_samples: 20,
                    penalty_c: c,
                    seed,
                    ..SamplingPlan::default()
                };
                let out = penalty_resample(&merged, &plan).unwrap();
                total += out.multiplicity().values().copied().max().unwrap_or(0);
            }
            total as f64 / 1000.0
        };
        assert!(mean_max(0.1) < mean_max(0.95));
    }

    #[test]
    fn composite_is_deterministic() {
        let counts: BTreeMap<UserId, usize> =
            (0..10).map(|i| (uid(&format!("u{i}")), 3 + i)).collect();
        let labels: BTreeMap<UserId, i64> = (0..10)
            .map(|i| (uid(&format!("u{i}")), (i % 3) as i64))
            .collect();
        let plan = SamplingPlan {
            n_samples: 12,
            seed: 42,
            ..SamplingPlan::default()
        };
        let a = composite_sample(&counts, &labels, &plan).unwrap();
        let b = composite_sample(&counts, &labels, &plan).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.draws.len(), 12);
    }

    #[test]
    fn embedding_table_roundtrip_and_normalization() {
        let mut t = UserEmbeddingTable::new();
        t.insert(uid("u1"), vec![3.0, 4.0]).unwrap();
        t.insert(uid("u2"), vec![1.0, 0.0]).unwrap();
        assert!(t.insert(uid("u3"), vec![1.0]).is_err());

        let n = t.l2_normalized();
        let v = n.get(&uid("u1")).unwrap();
        assert!((v[0] - 0.6).abs() < 1e-12 && (v[1] - 0.8).abs() < 1e-12);

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("emb.tsv");
        t.write_tsv(&p).unwrap();
        let back = UserEmbeddingTable::read_tsv(&p).unwrap();
        assert_eq!(back.get(&uid("u1")).unwrap(), t.get(&uid("u1")).unwrap());
    }
}
