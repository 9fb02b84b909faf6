//! Per-user candidate ranking lists: training lists mix sampled positives
//! with uniform negatives; inference lists take the model's top-k unseen.

use crate::dataset::{DatasetSplit, RatingScale};
use crate::error::{Error, Result};
use crate::ids::{ItemId, UserId};
use crate::recommender::{top_k_unseen, EmbeddingModel};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use std::collections::{BTreeSet, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Train,
    Infer,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::Train => "train",
            Phase::Infer => "infer",
        })
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Phase::Train),
            "infer" => Ok(Phase::Infer),
            other => Err(Error::InvalidInput(format!("unknown phase `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankingList {
    pub user_id: UserId,
    /// Candidates in presentation order, length n, no duplicates.
    pub items: Vec<ItemId>,
    pub phase: Phase,
    /// Train only: which candidates the user actually liked.
    pub positives: BTreeSet<ItemId>,
    /// Ordering claimed by the initial model (infer) or the neutral
    /// presentation order (train).
    pub hint_order: Vec<ItemId>,
    /// Train only: target permutation for tuning labels — positives by
    /// (rating desc, timestamp desc), then negatives in sampled order.
    pub gold_order: Vec<ItemId>,
}

impl RankingList {
    pub fn validate(&self) -> Result<()> {
        let uniq: HashSet<&ItemId> = self.items.iter().collect();
        if uniq.len() != self.items.len() {
            return Err(Error::InvalidInput(format!(
                "duplicate candidates in list for {}",
                self.user_id
            )));
        }
        if self.hint_order.len() != self.items.len()
            || !self.hint_order.iter().all(|i| uniq.contains(i))
        {
            return Err(Error::InvalidInput(format!(
                "hint order is not a permutation of candidates for {}",
                self.user_id
            )));
        }
        match self.phase {
            Phase::Train => {
                if self.positives.is_empty() {
                    return Err(Error::InvalidInput(format!(
                        "train list for {} has no positives",
                        self.user_id
                    )));
                }
                if self.gold_order.len() != self.items.len() {
                    return Err(Error::InvalidInput(format!(
                        "gold order incomplete for {}",
                        self.user_id
                    )));
                }
            }
            Phase::Infer => {
                if !self.positives.is_empty() || !self.gold_order.is_empty() {
                    return Err(Error::InvalidInput(format!(
                        "infer list for {} carries train-only fields",
                        self.user_id
                    )));
                }
            }
        }
        Ok(())
    }
}

fn user_stream(seed: u64, user: &UserId) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(user.as_str().as_bytes());
    let digest = h.finalize();
    let mix = u64::from_le_bytes(digest[..8].try_into().expect("len 8"));
    ChaCha8Rng::seed_from_u64(seed ^ mix)
}

/// n_pos liked train items plus (n - n_pos) uniform unobserved negatives,
/// shuffled into presentation order. The held-out test item is never a
/// negative candidate.
pub fn build_train_list(
    user: &UserId,
    split: &DatasetSplit,
    catalog_items: &[ItemId],
    scale: RatingScale,
    n: usize,
    n_pos: usize,
    seed: u64,
) -> Result<RankingList> {
    if n_pos == 0 || n_pos > n {
        return Err(Error::InvalidInput(format!(
            "need 0 < n_pos <= n, got n_pos={n_pos} n={n}"
        )));
    }
    let (liked_min, _) = scale.default_thresholds();
    let mut liked: Vec<_> = split
        .train
        .iter()
        .filter(|it| &it.user_id == user && it.rating >= liked_min)
        .cloned()
        .collect();
    if liked.len() < n_pos {
        return Err(Error::InvalidInput(format!(
            "user {user} has {} liked train items, need {n_pos}",
            liked.len()
        )));
    }
    let seen = split.train_items_of(user);
    let test_item = split.per_user_test_item.get(user);
    let mut unobserved: Vec<ItemId> = catalog_items
        .iter()
        .filter(|i| !seen.contains(i) && Some(*i) != test_item)
        .cloned()
        .collect();
    if unobserved.len() < n - n_pos {
        return Err(Error::InvalidInput(format!(
            "user {user} has only {} unobserved items, need {}",
            unobserved.len(),
            n - n_pos
        )));
    }

    let mut rng = user_stream(seed, user);
    liked.sort_by(|a, b| a.item_id.cmp(&b.item_id));
    liked.shuffle(&mut rng);
    let mut chosen_pos: Vec<_> = liked.into_iter().take(n_pos).collect();
    unobserved.sort();
    unobserved.shuffle(&mut rng);
    let negatives: Vec<ItemId> = unobserved.into_iter().take(n - n_pos).collect();

    chosen_pos.sort_by(|a, b| {
        b.rating
            .partial_cmp(&a.rating)
            .expect("finite ratings")
            .then(b.timestamp.cmp(&a.timestamp))
            .then(a.item_id.cmp(&b.item_id))
    });
    let gold_order: Vec<ItemId> = chosen_pos
        .iter()
        .map(|it| it.item_id.clone())
        .chain(negatives.iter().cloned())
        .collect();
    let positives: BTreeSet<ItemId> = chosen_pos.iter().map(|it| it.item_id.clone()).collect();

    let mut items = gold_order.clone();
    items.shuffle(&mut rng);
    let list = RankingList {
        user_id: user.clone(),
        hint_order: items.clone(),
        items,
        phase: Phase::Train,
        positives,
        gold_order,
    };
    list.validate()?;
    Ok(list)
}

/// Model top-n unseen items; hint order is the model order itself.
pub fn build_infer_list(
    user: &UserId,
    model: &EmbeddingModel,
    split: &DatasetSplit,
    n: usize,
) -> Result<RankingList> {
    let seen = split.train_items_of(user);
    let items = top_k_unseen(model, user, n, &seen)?;
    let list = RankingList {
        user_id: user.clone(),
        hint_order: items.clone(),
        items,
        phase: Phase::Infer,
        positives: BTreeSet::new(),
        gold_order: Vec::new(),
    };
    list.validate()?;
    Ok(list)
}

// One record per line: user, phase, items, positive mask, gold order.
pub fn write_lists(path: &Path, lists: &[RankingList]) -> Result<()> {
    let mut out = std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?,
    );
    for l in lists {
        let items: Vec<&str> = l.items.iter().map(|i| i.as_str()).collect();
        let hint: Vec<&str> = l.hint_order.iter().map(|i| i.as_str()).collect();
        let gold: Vec<&str> = l.gold_order.iter().map(|i| i.as_str()).collect();
        let mask: String = l
            .items
            .iter()
            .map(|i| if l.positives.contains(i) { '1' } else { '0' })
            .collect();
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            l.user_id,
            l.phase,
            items.join(","),
            mask,
            hint.join(","),
            gold.join(",")
        )
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok(())
}

pub fn read_lists(path: &Path) -> Result<Vec<RankingList>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut out = Vec::new();
    for (idx, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.is_empty() {
            continue;
        }
        let mal = |m: &str| Error::Malformed {
            path: path.display().to_string(),
            line: idx + 1,
            message: m.to_string(),
        };
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 6 {
            return Err(mal("expected 6 tab-separated fields"));
        }
        let split_ids = |s: &str| -> Vec<ItemId> {
            if s.is_empty() {
                Vec::new()
            } else {
                s.split(',').map(ItemId::from).collect()
            }
        };
        let items = split_ids(parts[2]);
        let mask = parts[3];
        if mask.len() != items.len() {
            return Err(mal("positive mask length mismatch"));
        }
        let positives: BTreeSet<ItemId> = items
            .iter()
            .zip(mask.chars())
            .filter(|(_, c)| *c == '1')
            .map(|(i, _)| i.clone())
            .collect();
        let list = RankingList {
            user_id: UserId::from(parts[0]),
            phase: parts[1].parse()?,
            items,
            positives,
            hint_order: split_ids(parts[4]),
            gold_order: split_ids(parts[5]),
        };
        list.validate().map_err(|e| mal(&e.to_string()))?;
        out.push(list);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synthetic_interactions, temporal_split, Interaction};
    use crate::recommender::{train_mf, TrainConfig};

    fn rich_split() -> (DatasetSplit, Vec<ItemId>) {
        let rows = synthetic_interactions(12, 40, 12, 7);
        let catalog: Vec<ItemId> = {
            let mut v: Vec<ItemId> = rows
                .iter()
                .map(|it| it.item_id.clone())
                .collect::<HashSet<_>>()
                .into_iter()
                .collect();
            v.sort();
            v
        };
        (temporal_split(&rows).unwrap(), catalog)
    }

    fn liked_count(split: &DatasetSplit, user: &UserId) -> usize {
        split
            .train
            .iter()
            .filter(|it| &it.user_id == user && it.rating >= 4.0)
            .count()
    }

    #[test]
    fn train_list_counts_and_composition() {
        let (split, catalog) = rich_split();
        let user = split
            .per_user_test_item
            .keys()
            .find(|u| liked_count(&split, u) >= 3)
            .cloned()
            .unwrap();
        let list =
            build_train_list(&user, &split, &catalog, RatingScale::OneToFive, 10, 3, 5).unwrap();
        assert_eq!(list.items.len(), 10);
        assert_eq!(list.positives.len(), 3);
        let seen = split.train_items_of(&user);
        for item in &list.items {
            if list.positives.contains(item) {
                assert!(seen.contains(item));
            } else {
                assert!(!seen.contains(item), "negative {item} was observed");
            }
        }
        // never the held-out test item
        let test = &split.per_user_test_item[&user];
        assert!(!list.items.contains(test));
        // gold order: positives first
        assert!(list.gold_order[..3].iter().all(|i| list.positives.contains(i)));
    }

    #[test]
    fn train_list_gold_order_rating_then_recency() {
        let mk = |i: &str, r: f64, t: i64| Interaction {
            user_id: UserId::new("u"),
            item_id: ItemId::new(i),
            rating: r,
            timestamp: t,
            simulated_ts: false,
        };
        let split = DatasetSplit {
            train: vec![mk("a", 4.0, 10), mk("b", 5.0, 5), mk("c", 4.0, 20)],
            ..Default::default()
        };
        let catalog: Vec<ItemId> = ["a", "b", "c", "d", "e"].map(ItemId::new).into();
        let list = build_train_list(
            &UserId::new("u"),
            &split,
            &catalog,
            RatingScale::OneToFive,
            5,
            3,
            1,
        )
        .unwrap();
        // b (5.0) first, then c (4.0 newer), then a (4.0 older)
        assert_eq!(
            &list.gold_order[..3],
            &[ItemId::new("b"), ItemId::new("c"), ItemId::new("a")]
        );
    }

    #[test]
    fn train_list_deterministic_per_seed_and_distinct_across_users() {
        let (split, catalog) = rich_split();
        let users: Vec<UserId> = split
            .per_user_test_item
            .keys()
            .filter(|u| liked_count(&split, u) >= 3)
            .cloned()
            .collect();
        let a = build_train_list(&users[0], &split, &catalog, RatingScale::OneToFive, 10, 3, 5)
            .unwrap();
        let b = build_train_list(&users[0], &split, &catalog, RatingScale::OneToFive, 10, 3, 5)
            .unwrap();
        assert_eq!(a, b);
        let c = build_train_list(&users[0], &split, &catalog, RatingScale::OneToFive, 10, 3, 6)
            .unwrap();
        assert_ne!(a.items, c.items);
    }

    #[test]
    fn train_list_insufficient_positives_errors() {
        let (split, catalog) = rich_split();
        let user = split.per_user_test_item.keys().next().unwrap();
        assert!(build_train_list(
            user,
            &split,
            &catalog,
            RatingScale::OneToFive,
            10,
            100,
            5
        )
        .is_err());
    }

    #[test]
    fn train_list_no_negatives_available_errors() {
        let mk = |i: &str| Interaction {
            user_id: UserId::new("u"),
            item_id: ItemId::new(i),
            rating: 5.0,
            timestamp: 1,
            simulated_ts: false,
        };
        let split = DatasetSplit {
            train: vec![mk("a"), mk("b")],
            ..Default::default()
        };
        let catalog: Vec<ItemId> = ["a", "b"].map(ItemId::new).into();
        assert!(build_train_list(
            &UserId::new("u"),
            &split,
            &catalog,
            RatingScale::OneToFive,
            2,
            1,
            0
        )
        .is_err());
    }

    #[test]
    fn infer_list_matches_model_order_and_avoids_seen() {
        let (split, _) = rich_split();
        let cfg = TrainConfig {
            dim: 8,
            epochs: 10,
            ..TrainConfig::default()
        };
        let model = train_mf(&split, &cfg).unwrap();
        let user = model.user_ids[0].clone();
        let list = build_infer_list(&user, &model, &split, 10).unwrap();
        assert_eq!(list.items.len(), 10);
        assert_eq!(list.hint_order, list.items);
        let seen = split.train_items_of(&user);
        assert!(list.items.iter().all(|i| !seen.contains(i)));
        // rebuild gives identical output
        assert_eq!(build_infer_list(&user, &model, &split, 10).unwrap(), list);
        // equals the model's own top-k
        assert_eq!(
            list.items,
            top_k_unseen(&model, &user, 10, &seen).unwrap()
        );
    }

    #[test]
    fn list_file_roundtrip() {
        let (split, catalog) = rich_split();
        let cfg = TrainConfig {
            dim: 8,
            epochs: 5,
            ..TrainConfig::default()
        };
        let model = train_mf(&split, &cfg).unwrap();
        let mut lists = Vec::new();
        for user in split.per_user_test_item.keys() {
            if liked_count(&split, user) >= 3 {
                lists.push(
                    build_train_list(user, &split, &catalog, RatingScale::OneToFive, 10, 3, 2)
                        .unwrap(),
                );
            }
            if model.user_ids.contains(user) {
                lists.push(build_infer_list(user, &model, &split, 10).unwrap());
            }
        }
        assert!(!lists.is_empty());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("lists.tsv");
        write_lists(&p, &lists).unwrap();
        assert_eq!(read_lists(&p).unwrap(), lists);
    }
}
