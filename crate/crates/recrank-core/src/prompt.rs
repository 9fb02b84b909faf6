//! Prompt rendering for the four instruction kinds, history assembly,
//! leakage linting, and tuning-corpus emission.

use crate::dataset::{Catalog, DatasetSplit, Interaction, RatingScale};
use crate::error::{Error, Result};
use crate::ids::{ItemId, UserId};
use crate::ranklist::{Phase, RankingList};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    Listwise,
    Pointwise,
    PointwiseFix,
    Pairwise,
}

impl std::fmt::Display for PromptKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PromptKind::Listwise => "listwise",
            PromptKind::Pointwise => "pointwise",
            PromptKind::PointwiseFix => "pointwise-fix",
            PromptKind::Pairwise => "pairwise",
        })
    }
}

impl FromStr for PromptKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "listwise" => Ok(PromptKind::Listwise),
            "pointwise" => Ok(PromptKind::Pointwise),
            "pointwise-fix" | "pointwise_fix" => Ok(PromptKind::PointwiseFix),
            "pairwise" => Ok(PromptKind::Pairwise),
            other => Err(Error::InvalidInput(format!("unknown prompt kind `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptInstance {
    pub kind: PromptKind,
    pub text: String,
    pub user_id: UserId,
    /// Item ids the prompt refers to: candidates (listwise), target
    /// (pointwise), or the compared pair (pairwise).
    pub payload: Vec<ItemId>,
    /// Hint content as rendered (order, score, or winner title).
    pub hint: Option<String>,
    /// Gold completion; present only for train-phase instances.
    pub expected_answer: Option<String>,
}

#[derive(Clone, Debug, Default)]
pub struct History {
    pub liked: Vec<Interaction>,
    pub disliked: Vec<Interaction>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PromptConfig {
    /// Domain noun substituted into the templates ("movie", "book", ...).
    pub domain: String,
    /// Context budget in tokens under the chars/4 estimate.
    pub context_budget: usize,
    /// Cap on liked and disliked history entries each.
    pub history_max: usize,
}

impl Default for PromptConfig {
    fn default() -> Self {
        Self {
            domain: "movie".into(),
            context_budget: 2048,
            history_max: 20,
        }
    }
}

pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

/// Random per-user history sample: up to max_each liked and disliked
/// interactions, presented chronologically.
pub fn sample_history(
    split: &DatasetSplit,
    user: &UserId,
    scale: RatingScale,
    max_each: usize,
    seed: u64,
) -> History {
    let (liked_min, disliked_max) = scale.default_thresholds();
    let mut liked = Vec::new();
    let mut disliked = Vec::new();
    for it in split.train.iter().filter(|it| &it.user_id == user) {
        if it.rating >= liked_min {
            liked.push(it.clone());
        } else if it.rating <= disliked_max {
            disliked.push(it.clone());
        }
    }
    let mut h = Sha256::new();
    h.update(user.as_str().as_bytes());
    h.update(b"history");
    let mix = u64::from_le_bytes(h.finalize()[..8].try_into().expect("len 8"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ mix);
    let chrono = |v: &mut Vec<Interaction>| {
        v.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then(a.item_id.cmp(&b.item_id)))
    };
    chrono(&mut liked);
    chrono(&mut disliked);
    liked.shuffle(&mut rng);
    disliked.shuffle(&mut rng);
    liked.truncate(max_each);
    disliked.truncate(max_each);
    chrono(&mut liked);
    chrono(&mut disliked);
    History { liked, disliked }
}

fn titles(items: &[ItemId], catalog: &Catalog) -> Result<Vec<String>> {
    items
        .iter()
        .map(|i| catalog.title(i).map(str::to_owned))
        .collect()
}

fn slot(titles: &[String]) -> String {
    if titles.is_empty() {
        "None.".to_string()
    } else {
        format!("{}.", titles.join(", "))
    }
}

fn history_lines(history: &History, catalog: &Catalog, domain: &str) -> Result<String> {
    let liked = titles(
        &history.liked.iter().map(|it| it.item_id.clone()).collect::<Vec<_>>(),
        catalog,
    )?;
    let disliked = titles(
        &history.disliked.iter().map(|it| it.item_id.clone()).collect::<Vec<_>>(),
        catalog,
    )?;
    Ok(format!(
        "User's Liked {domain}s: {}\nUser's Disliked {domain}s: {}",
        slot(&liked),
        slot(&disliked)
    ))
}

/// Drops the chronologically oldest history entry, preferring whichever
/// side currently holds the older head.
fn drop_oldest(history: &mut History) -> bool {
    match (history.liked.first(), history.disliked.first()) {
        (None, None) => false,
        (Some(_), None) => {
            history.liked.remove(0);
            true
        }
        (None, Some(_)) => {
            history.disliked.remove(0);
            true
        }
        (Some(l), Some(d)) => {
            if l.timestamp <= d.timestamp {
                history.liked.remove(0);
            } else {
                history.disliked.remove(0);
            }
            true
        }
    }
}

fn fit_budget<F>(mut history: History, cfg: &PromptConfig, render: F) -> Result<(String, History)>
where
    F: Fn(&History) -> Result<String>,
{
    loop {
        let text = render(&history)?;
        if estimate_tokens(&text) <= cfg.context_budget {
            return Ok((text, history));
        }
        if !drop_oldest(&mut history) {
            return Err(Error::InvalidInput(format!(
                "prompt exceeds context budget of {} tokens even with empty history",
                cfg.context_budget
            )));
        }
    }
}

pub fn build_listwise_prompt(
    list: &RankingList,
    history: &History,
    catalog: &Catalog,
    cfg: &PromptConfig,
) -> Result<PromptInstance> {
    if list.items.is_empty() {
        return Err(Error::InvalidInput("empty candidate list".into()));
    }
    let d = &cfg.domain;
    let cand = titles(&list.items, catalog)?.join(", ");
    let hint = titles(&list.hint_order, catalog)?.join(", ");
    let render = |h: &History| -> Result<String> {
        Ok(format!(
            "You are a {d} recommender system. Your task is to rank a given list of candidate {d}s based on user preferences and return the top five recommendations.\n{}\nQuestion: How would the user rank the candidate item list: {cand}?\nHint: Another recommender model suggests {hint}.",
            history_lines(h, catalog, d)?
        ))
    };
    let (text, _) = fit_budget(history.clone(), cfg, render)?;
    let expected_answer = match list.phase {
        Phase::Infer => None,
        Phase::Train => {
            let top: Vec<String> = titles(&list.gold_order, catalog)?
                .into_iter()
                .take(5)
                .enumerate()
                .map(|(i, t)| format!("{}. {t}", i + 1))
                .collect();
            Some(top.join("\n"))
        }
    };
    Ok(PromptInstance {
        kind: PromptKind::Listwise,
        text,
        user_id: list.user_id.clone(),
        payload: list.items.clone(),
        hint: Some(hint),
        expected_answer,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn build_pointwise_prompt(
    user: &UserId,
    target: &ItemId,
    history: &History,
    catalog: &Catalog,
    cfg: &PromptConfig,
    hint_score: Option<f64>,
    fix: bool,
    gold_rating: Option<f64>,
) -> Result<PromptInstance> {
    let d = &cfg.domain;
    let title = catalog.title(target)?.to_owned();
    let hint = if fix {
        None
    } else {
        let score = hint_score.ok_or_else(|| {
            Error::InvalidInput("pointwise prompt without fix requires a hint score".into())
        })?;
        Some(format!("{score:.1}"))
    };
    let hint_line = hint
        .as_ref()
        .map(|s| format!("\nHint: Another recommender model suggests the answer is {s}."))
        .unwrap_or_default();
    let render = |h: &History| -> Result<String> {
        Ok(format!(
            "You are a {d} recommender system. Your task is to predict the relevance score to a target {d} based on the user's historical {d} ratings.\nThe score should be between 1 and 5.\n{}\nQuestion: Based on the user's historical ratings, predict the relevance score of the target {title} with the user.{hint_line}",
            history_lines(h, catalog, d)?
        ))
    };
    let (text, _) = fit_budget(history.clone(), cfg, render)?;
    Ok(PromptInstance {
        kind: if fix {
            PromptKind::PointwiseFix
        } else {
            PromptKind::Pointwise
        },
        text,
        user_id: user.clone(),
        payload: vec![target.clone()],
        hint,
        expected_answer: gold_rating.map(|r| format!("{r:.1}")),
    })
}

#[allow(clippy::too_many_arguments)]
pub fn build_pairwise_prompt(
    user: &UserId,
    item_a: &ItemId,
    item_b: &ItemId,
    history: &History,
    catalog: &Catalog,
    cfg: &PromptConfig,
    hint_winner: &ItemId,
    gold_prefers_a: Option<bool>,
) -> Result<PromptInstance> {
    if item_a == item_b {
        return Err(Error::InvalidInput(format!(
            "pairwise prompt needs two distinct items, got {item_a} twice"
        )));
    }
    if hint_winner != item_a && hint_winner != item_b {
        return Err(Error::InvalidInput(format!(
            "hint winner {hint_winner} is not one of the compared pair"
        )));
    }
    let d = &cfg.domain;
    let ta = catalog.title(item_a)?.to_owned();
    let tb = catalog.title(item_b)?.to_owned();
    let tw = catalog.title(hint_winner)?.to_owned();
    let render = |h: &History| -> Result<String> {
        Ok(format!(
            "You are a {d} recommender system. Based on a user's likes and dislikes, determine if they would prefer one {d} over another. Respond only with \"Yes.\" or \"No.\".\n{}\nQuestion: Would the user prefer {ta} over {tb}?\nHint: Another recommender model suggests the answer is {tw}.",
            history_lines(h, catalog, d)?
        ))
    };
    let (text, _) = fit_budget(history.clone(), cfg, render)?;
    Ok(PromptInstance {
        kind: PromptKind::Pairwise,
        text,
        user_id: user.clone(),
        payload: vec![item_a.clone(), item_b.clone()],
        hint: Some(tw),
        expected_answer: gold_prefers_a.map(|p| if p { "Yes." } else { "No." }.to_string()),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairSchedule {
    /// Adjacent pairs in hint order: n - 1 comparisons.
    Adjacent,
    /// Every unordered pair: n(n-1)/2 comparisons.
    RoundRobin,
}

pub fn schedule_pairs(list: &RankingList, mode: PairSchedule) -> Vec<(ItemId, ItemId)> {
    let order = &list.hint_order;
    match mode {
        PairSchedule::Adjacent => order
            .windows(2)
            .map(|w| (w[0].clone(), w[1].clone()))
            .collect(),
        PairSchedule::RoundRobin => {
            let mut out = Vec::new();
            for i in 0..order.len() {
                for j in i + 1..order.len() {
                    out.push((order[i].clone(), order[j].clone()));
                }
            }
            out
        }
    }
}

/// Leakage linter: a train-phase pointwise (non-fix) instance is leaky
/// when its hint equals the gold answer.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LintReport {
    /// Indices of pointwise (non-fix) train instances inspected.
    pub inspected: Vec<usize>,
    /// Subset of `inspected` whose hint equals the gold output.
    pub leaky: Vec<usize>,
}

impl LintReport {
    pub fn leak_rate(&self) -> f64 {
        if self.inspected.is_empty() {
            0.0
        } else {
            self.leaky.len() as f64 / self.inspected.len() as f64
        }
    }
}

pub fn lint_leakage(instances: &[PromptInstance]) -> LintReport {
    let mut report = LintReport::default();
    for (i, inst) in instances.iter().enumerate() {
        if inst.kind != PromptKind::Pointwise || inst.expected_answer.is_none() {
            continue;
        }
        report.inspected.push(i);
        if inst.hint == inst.expected_answer {
            report.leaky.push(i);
        }
    }
    report
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TuningExample {
    pub instruction: String,
    pub input: String,
    pub output: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub counts: BTreeMap<String, usize>,
    pub total: usize,
    pub seed: u64,
    pub config_hash: String,
}

/// Select instances per the kind mix, shuffle per seed, and write one
/// JSON record per line plus a manifest.
pub fn emit_tuning_corpus(
    instances: &[PromptInstance],
    mix: &BTreeMap<PromptKind, f64>,
    seed: u64,
    corpus_path: &Path,
    manifest_path: &Path,
) -> Result<CorpusManifest> {
    let mass: f64 = mix.values().sum();
    if (mass - 1.0).abs() > 1e-9 || mix.values().any(|&p| p < 0.0) {
        return Err(Error::InvalidInput(
            "corpus mix proportions must be nonnegative and sum to 1".into(),
        ));
    }
    if let Some(bad) = instances.iter().find(|i| i.expected_answer.is_none()) {
        return Err(Error::InvalidInput(format!(
            "inference-phase instance (user {}) cannot enter a tuning corpus",
            bad.user_id
        )));
    }
    let mut by_kind: BTreeMap<PromptKind, Vec<&PromptInstance>> = BTreeMap::new();
    for inst in instances {
        by_kind.entry(inst.kind).or_default().push(inst);
    }
    let total = instances.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut selected: Vec<&PromptInstance> = Vec::new();
    let mut counts = BTreeMap::new();
    for (kind, prop) in mix {
        let mut pool = by_kind.remove(kind).unwrap_or_default();
        let want = ((prop * total as f64).round() as usize).min(pool.len());
        pool.shuffle(&mut rng);
        counts.insert(kind.to_string(), want);
        selected.extend(pool.into_iter().take(want));
    }
    selected.shuffle(&mut rng);

    let mut out = std::io::BufWriter::new(
        std::fs::File::create(corpus_path)
            .map_err(|e| Error::io(corpus_path.display().to_string(), e))?,
    );
    for inst in &selected {
        let ex = TuningExample {
            instruction: inst.text.clone(),
            input: String::new(),
            output: inst.expected_answer.clone().expect("train instance"),
        };
        let line = serde_json::to_string(&ex)
            .map_err(|e| Error::InvalidInput(format!("corpus serialize: {e}")))?;
        writeln!(out, "{line}").map_err(|e| Error::io(corpus_path.display().to_string(), e))?;
    }
    drop(out);

    let mut hasher = Sha256::new();
    for (k, p) in mix {
        hasher.update(format!("{k}={p};"));
    }
    hasher.update(seed.to_le_bytes());
    let manifest = CorpusManifest {
        total: selected.len(),
        counts,
        seed,
        config_hash: hex::encode(hasher.finalize()),
    };
    let text = toml::to_string_pretty(&manifest)
        .map_err(|e| Error::InvalidInput(format!("manifest serialize: {e}")))?;
    std::fs::write(manifest_path, text)
        .map_err(|e| Error::io(manifest_path.display().to_string(), e))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn fixture_catalog() -> Catalog {
        let mut c = Catalog::new();
        c.insert(ItemId::new("i1"), "The Matrix (1999)");
        c.insert(ItemId::new("i2"), "Heat (1995)");
        c.insert(ItemId::new("i3"), "Up (2009)");
        c.insert(ItemId::new("i4"), "Alien (1979)");
        c.insert(ItemId::new("i5"), "Casablanca (1942)");
        c
    }

    fn inter(i: &str, r: f64, t: i64) -> Interaction {
        Interaction {
            user_id: UserId::new("u1"),
            item_id: ItemId::new(i),
            rating: r,
            timestamp: t,
            simulated_ts: false,
        }
    }

    fn fixture_history() -> History {
        History {
            liked: vec![inter("i1", 5.0, 1), inter("i2", 4.0, 2)],
            disliked: Vec::new(),
        }
    }

    fn fixture_list(phase: Phase) -> RankingList {
        let items = vec![ItemId::new("i4"), ItemId::new("i2"), ItemId::new("i3")];
        let hint = vec![ItemId::new("i2"), ItemId::new("i4"), ItemId::new("i3")];
        match phase {
            Phase::Infer => RankingList {
                user_id: UserId::new("u1"),
                items,
                phase,
                positives: BTreeSet::new(),
                hint_order: hint,
                gold_order: Vec::new(),
            },
            Phase::Train => RankingList {
                user_id: UserId::new("u1"),
                gold_order: items.clone(),
                items: items.clone(),
                phase,
                positives: [ItemId::new("i2")].into(),
                hint_order: hint,
            },
        }
    }

    #[test]
    fn listwise_matches_golden() {
        let p = build_listwise_prompt(
            &fixture_list(Phase::Infer),
            &fixture_history(),
            &fixture_catalog(),
            &PromptConfig::default(),
        )
        .unwrap();
        assert_eq!(p.text, include_str!("../goldens/listwise.golden").trim_end_matches('\n'));
        assert!(p.expected_answer.is_none());
    }

    #[test]
    fn pointwise_matches_golden_and_fix_has_no_hint() {
        let cfg = PromptConfig::default();
        let cat = fixture_catalog();
        let hist = fixture_history();
        let u = UserId::new("u1");
        let t = ItemId::new("i3");
        let with_hint =
            build_pointwise_prompt(&u, &t, &hist, &cat, &cfg, Some(4.0), false, Some(4.0))
                .unwrap();
        assert_eq!(
            with_hint.text,
            include_str!("../goldens/pointwise.golden").trim_end_matches('\n')
        );
        let fixed = build_pointwise_prompt(&u, &t, &hist, &cat, &cfg, None, true, Some(4.0))
            .unwrap();
        assert_eq!(
            fixed.text,
            include_str!("../goldens/pointwise_fix.golden").trim_end_matches('\n')
        );
        assert_eq!(fixed.text.matches("Hint:").count(), 0);
        assert_eq!(fixed.kind, PromptKind::PointwiseFix);
        // no-fix without a score is an error
        assert!(build_pointwise_prompt(&u, &t, &hist, &cat, &cfg, None, false, None).is_err());
    }

    #[test]
    fn pairwise_matches_golden_and_is_antisymmetric() {
        let cfg = PromptConfig::default();
        let cat = fixture_catalog();
        let hist = fixture_history();
        let u = UserId::new("u1");
        let (a, b) = (ItemId::new("i4"), ItemId::new("i3"));
        let p = build_pairwise_prompt(&u, &a, &b, &hist, &cat, &cfg, &a, Some(true)).unwrap();
        assert_eq!(p.text, include_str!("../goldens/pairwise.golden").trim_end_matches('\n'));
        assert_eq!(p.expected_answer.as_deref(), Some("Yes."));
        let q = build_pairwise_prompt(&u, &b, &a, &hist, &cat, &cfg, &a, Some(false)).unwrap();
        assert!(q.text.contains("Would the user prefer Up (2009) over Alien (1979)?"));
        assert_eq!(q.expected_answer.as_deref(), Some("No."));
        // preconditions
        assert!(build_pairwise_prompt(&u, &a, &a, &hist, &cat, &cfg, &a, None).is_err());
        let c = ItemId::new("i5");
        assert!(build_pairwise_prompt(&u, &a, &b, &hist, &cat, &cfg, &c, None).is_err());
    }

    #[test]
    fn empty_history_renders_none_slots() {
        let p = build_listwise_prompt(
            &fixture_list(Phase::Infer),
            &History::default(),
            &fixture_catalog(),
            &PromptConfig::default(),
        )
        .unwrap();
        assert!(p.text.contains("User's Liked movies: None."));
        assert!(p.text.contains("User's Disliked movies: None."));
    }

    #[test]
    fn missing_title_names_the_item() {
        let mut list = fixture_list(Phase::Infer);
        list.items.push(ItemId::new("ghost"));
        list.hint_order.push(ItemId::new("ghost"));
        let err = build_listwise_prompt(
            &list,
            &fixture_history(),
            &fixture_catalog(),
            &PromptConfig::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("ghost"));
    }

    #[test]
    fn over_budget_drops_oldest_history_first() {
        let mut cat = fixture_catalog();
        for k in 0..60 {
            cat.insert(ItemId::new(format!("h{k}")), format!("Filler Title Number {k} (2000)"));
        }
        let hist = History {
            liked: (0..60).map(|k| inter(&format!("h{k}"), 5.0, k)).collect(),
            disliked: Vec::new(),
        };
        let cfg = PromptConfig {
            context_budget: 200,
            ..PromptConfig::default()
        };
        let p =
            build_listwise_prompt(&fixture_list(Phase::Infer), &hist, &cat, &cfg).unwrap();
        assert!(estimate_tokens(&p.text) <= 200);
        // newest entries survive; the oldest are gone
        assert!(!p.text.contains("Filler Title Number 0 (2000)"));
        assert!(p.text.contains("Filler Title Number 59 (2000)"));
        // budget impossible even with empty history
        let tiny = PromptConfig {
            context_budget: 10,
            ..PromptConfig::default()
        };
        assert!(
            build_listwise_prompt(&fixture_list(Phase::Infer), &hist, &cat, &tiny).is_err()
        );
    }

    #[test]
    fn train_listwise_expected_answer_is_numbered_gold_top5() {
        let p = build_listwise_prompt(
            &fixture_list(Phase::Train),
            &fixture_history(),
            &fixture_catalog(),
            &PromptConfig::default(),
        )
        .unwrap();
        assert_eq!(
            p.expected_answer.as_deref(),
            Some("1. Alien (1979)\n2. Heat (1995)\n3. Up (2009)")
        );
    }

    #[test]
    fn linter_flags_exactly_the_leaky_instances() {
        let cfg = PromptConfig::default();
        let cat = fixture_catalog();
        let hist = fixture_history();
        let u = UserId::new("u1");
        let t = ItemId::new("i3");
        let leaky =
            build_pointwise_prompt(&u, &t, &hist, &cat, &cfg, Some(4.0), false, Some(4.0))
                .unwrap();
        let honest =
            build_pointwise_prompt(&u, &t, &hist, &cat, &cfg, Some(3.0), false, Some(4.0))
                .unwrap();
        let fixed =
            build_pointwise_prompt(&u, &t, &hist, &cat, &cfg, None, true, Some(4.0)).unwrap();
        let report = lint_leakage(&[leaky, honest, fixed]);
        assert_eq!(report.inspected, vec![0, 1]);
        assert_eq!(report.leaky, vec![0]);
        assert!((report.leak_rate() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pair_scheduling_modes() {
        let list = fixture_list(Phase::Infer);
        let adj = schedule_pairs(&list, PairSchedule::Adjacent);
        assert_eq!(adj.len(), 2);
        assert_eq!(adj[0], (ItemId::new("i2"), ItemId::new("i4")));
        let rr = schedule_pairs(&list, PairSchedule::RoundRobin);
        assert_eq!(rr.len(), 3);
    }

    #[test]
    fn corpus_counts_and_determinism() {
        let cfg = PromptConfig::default();
        let cat = fixture_catalog();
        let hist = fixture_history();
        let u = UserId::new("u1");
        let mut instances = Vec::new();
        for k in 0..100 {
            let score = 1.0 + (k % 5) as f64;
            instances.push(
                build_pointwise_prompt(
                    &u,
                    &ItemId::new("i3"),
                    &hist,
                    &cat,
                    &cfg,
                    Some(score),
                    false,
                    Some(score),
                )
                .unwrap(),
            );
            instances
                .push(build_listwise_prompt(&fixture_list(Phase::Train), &hist, &cat, &cfg).unwrap());
            instances.push(
                build_pairwise_prompt(
                    &u,
                    &ItemId::new("i4"),
                    &ItemId::new("i3"),
                    &hist,
                    &cat,
                    &cfg,
                    &ItemId::new("i4"),
                    Some(true),
                )
                .unwrap(),
            );
        }
        let mix: BTreeMap<PromptKind, f64> = [
            (PromptKind::Listwise, 1.0 / 3.0),
            (PromptKind::Pointwise, 1.0 / 3.0),
            (PromptKind::Pairwise, 1.0 / 3.0),
        ]
        .into();
        let dir = tempfile::tempdir().unwrap();
        let corpus = dir.path().join("corpus.jsonl");
        let manifest = dir.path().join("manifest.toml");
        let m = emit_tuning_corpus(&instances, &mix, 7, &corpus, &manifest).unwrap();
        assert_eq!(m.total, 300);
        assert_eq!(m.counts["listwise"], 100);
        assert_eq!(m.counts["pointwise"], 100);
        assert_eq!(m.counts["pairwise"], 100);
        let bytes1 = std::fs::read(&corpus).unwrap();
        assert_eq!(
            bytes1.iter().filter(|&&b| b == b'\n').count(),
            300,
            "one record per line"
        );
        emit_tuning_corpus(&instances, &mix, 7, &corpus, &manifest).unwrap();
        assert_eq!(std::fs::read(&corpus).unwrap(), bytes1);

        // inference-phase instance rejected
        let mut bad = instances.clone();
        bad.push(
            build_listwise_prompt(&fixture_list(Phase::Infer), &hist, &cat, &cfg).unwrap(),
        );
        assert!(emit_tuning_corpus(&bad, &mix, 7, &corpus, &manifest).is_err());
    }
}
