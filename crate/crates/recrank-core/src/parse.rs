//! Parsing of raw LLM text into rankings, scores, and verdicts, with a
//! defined fallback policy for unusable output.

use crate::dataset::Catalog;
use crate::error::Result;
use crate::ids::ItemId;
use crate::prompt::PromptKind;
use crate::ranklist::RankingList;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseStatus {
    Ok,
    Partial,
    Failed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Yes,
    No,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParsedResult {
    pub kind: PromptKind,
    /// Listwise: full candidate permutation.
    pub ranking: Vec<ItemId>,
    /// Pointwise: extracted relevance score.
    pub score: Option<f64>,
    /// Pairwise: yes/no verdict.
    pub verdict: Option<Verdict>,
    pub status: ParseStatus,
    pub fallback_applied: bool,
}

fn normalize_title(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect::<String>()
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

fn token_set(s: &str) -> BTreeSet<String> {
    normalize_title(s).split(' ').map(str::to_owned).collect()
}

/// Jaccard similarity of the titles' token sets.
fn token_set_similarity(a: &str, b: &str) -> f64 {
    let (sa, sb) = (token_set(a), token_set(b));
    if sa.is_empty() && sb.is_empty() {
        return 1.0;
    }
    let inter = sa.intersection(&sb).count();
    let union = sa.union(&sb).count();
    inter as f64 / union as f64
}

const FUZZY_THRESHOLD: f64 = 0.9;

/// Splits raw text into candidate title strings: numbered lines first,
/// then line/comma/semicolon delimited fragments.
fn extract_title_fragments(raw: &str) -> Vec<String> {
    let numbered = regex::Regex::new(r"(?m)^\s*\d+[.)]\s*(.+?)\s*$").expect("static regex");
    let hits: Vec<String> = numbered
        .captures_iter(raw)
        .map(|c| c[1].trim().to_string())
        .collect();
    if !hits.is_empty() {
        return hits;
    }
    raw.split(['\n', ',', ';'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_owned)
        .collect()
}

fn resolve_title(fragment: &str, titles: &HashMap<&ItemId, &str>) -> Option<ItemId> {
    // exact
    for (id, t) in titles {
        if *t == fragment {
            return Some((*id).clone());
        }
    }
    // case/punctuation-insensitive
    let norm = normalize_title(fragment);
    for (id, t) in titles {
        if normalize_title(t) == norm {
            return Some((*id).clone());
        }
    }
    // token-set similarity
    let mut best: Option<(f64, &ItemId)> = None;
    for (id, t) in titles {
        let sim = token_set_similarity(fragment, t);
        if sim < FUZZY_THRESHOLD {
            continue;
        }
        let better = match best {
            None => true,
            Some((b, bid)) => sim > b || (sim == b && **id < *bid),
        };
        if better {
            best = Some((sim, *id));
        }
    }
    best.map(|(_, id)| id.clone())
}

/// Recovers an ordered candidate permutation from the raw text. Unmatched
/// or duplicate titles are dropped, missing candidates appended in hint
/// order; any repair downgrades the status to partial.
pub fn parse_listwise(raw: &str, candidates: &RankingList, catalog: &Catalog) -> Result<ParsedResult> {
    let mut titles: HashMap<&ItemId, &str> = HashMap::new();
    for id in &candidates.items {
        titles.insert(id, catalog.title(id)?);
    }
    let fragments = extract_title_fragments(raw);
    let mut resolved: Vec<ItemId> = Vec::new();
    let mut repaired = fragments.is_empty();
    for frag in &fragments {
        match resolve_title(frag, &titles) {
            Some(id) if !resolved.contains(&id) => resolved.push(id),
            _ => repaired = true,
        }
    }
    if resolved.is_empty() {
        return Ok(ParsedResult {
            kind: PromptKind::Listwise,
            ranking: Vec::new(),
            score: None,
            verdict: None,
            status: ParseStatus::Failed,
            fallback_applied: false,
        });
    }
    if resolved.len() < candidates.items.len() {
        repaired = true;
        for id in &candidates.hint_order {
            if !resolved.contains(id) {
                resolved.push(id.clone());
            }
        }
    }
    Ok(ParsedResult {
        kind: PromptKind::Listwise,
        ranking: resolved,
        score: None,
        verdict: None,
        status: if repaired {
            ParseStatus::Partial
        } else {
            ParseStatus::Ok
        },
        fallback_applied: false,
    })
}

/// First numeric literal becomes the score; values outside [1, 5] clamp
/// with partial status.
pub fn parse_pointwise(raw: &str, kind: PromptKind) -> ParsedResult {
    let number = regex::Regex::new(r"-?\d+(?:\.\d+)?").expect("static regex");
    let found = number
        .find(raw)
        .and_then(|m| m.as_str().parse::<f64>().ok());
    match found {
        None => ParsedResult {
            kind,
            ranking: Vec::new(),
            score: None,
            verdict: None,
            status: ParseStatus::Failed,
            fallback_applied: false,
        },
        Some(v) => {
            let clamped = v.clamp(1.0, 5.0);
            ParsedResult {
                kind,
                ranking: Vec::new(),
                score: Some(clamped),
                verdict: None,
                status: if clamped == v {
                    ParseStatus::Ok
                } else {
                    ParseStatus::Partial
                },
                fallback_applied: false,
            }
        }
    }
}

/// Case-insensitive yes/no from the leading token; anything else fails.
pub fn parse_pairwise(raw: &str) -> ParsedResult {
    let lead: String = raw
        .trim_start()
        .chars()
        .take_while(|c| c.is_alphabetic())
        .collect::<String>()
        .to_lowercase();
    let verdict = match lead.as_str() {
        "yes" => Some(Verdict::Yes),
        "no" => Some(Verdict::No),
        _ => None,
    };
    ParsedResult {
        kind: PromptKind::Pairwise,
        ranking: Vec::new(),
        score: None,
        verdict,
        status: if verdict.is_some() {
            ParseStatus::Ok
        } else {
            ParseStatus::Failed
        },
        fallback_applied: false,
    }
}

/// Fallback policy for failed parses: the initial model's hint stands in
/// for the LLM's opinion (hint order, hint score or neutral 3.0 for fix
/// runs, hint winner).
pub fn apply_fallback(
    result: ParsedResult,
    candidates: &RankingList,
    hint_score: Option<f64>,
    hint_winner_is_first: bool,
) -> ParsedResult {
    if result.status != ParseStatus::Failed {
        return result;
    }
    let mut out = result;
    out.fallback_applied = true;
    match out.kind {
        PromptKind::Listwise => out.ranking = candidates.hint_order.clone(),
        PromptKind::Pointwise => out.score = Some(hint_score.unwrap_or(3.0)),
        PromptKind::PointwiseFix => out.score = Some(3.0),
        PromptKind::Pairwise => {
            out.verdict = Some(if hint_winner_is_first {
                Verdict::Yes
            } else {
                Verdict::No
            });
        }
    }
    out
}
