//! Per-item utilities from parsed LLM results and their weighted
//! combination into the final ranking.

use crate::error::{Error, Result};
use crate::ids::{ItemId, UserId};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct UtilityWeights {
    pub alpha_point: f64,
    pub alpha_pair: f64,
    pub alpha_list: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl Default for UtilityWeights {
    fn default() -> Self {
        Self {
            alpha_point: 1.0 / 3.0,
            alpha_pair: 1.0 / 3.0,
            alpha_list: 1.0 / 3.0,
            c1: 0.1,
            c2: 0.1,
            c3: 0.1,
        }
    }
}

impl UtilityWeights {
    pub fn validate(&self) -> Result<()> {
        let sum = self.alpha_point + self.alpha_pair + self.alpha_list;
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "alpha weights must sum to 1, got {sum}"
            )));
        }
        if self.alpha_point < 0.0 || self.alpha_pair < 0.0 || self.alpha_list < 0.0 {
            return Err(Error::Config("alpha weights must be nonnegative".into()));
        }
        if self.c1 <= 0.0 || self.c2 <= 0.0 || self.c3 <= 0.0 {
            return Err(Error::Config("C1, C2, C3 must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairwiseMode {
    /// Literal formula: every item receives the constant C2.
    Constant,
    /// C2 times the item's number of pairwise wins.
    WinCount,
}

impl std::str::FromStr for PairwiseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(PairwiseMode::Constant),
            "win-count" | "win_count" => Ok(PairwiseMode::WinCount),
            other => Err(Error::Config(format!("unknown pairwise mode `{other}`"))),
        }
    }
}

/// U_pointwise = P - m * C1, the LLM score discounted by initial rank.
pub fn utility_pointwise(p: f64, m: usize, c1: f64) -> f64 {
    assert!(m >= 1, "ranks are 1-based");
    p - m as f64 * c1
}

/// Pairwise utility per candidate. `wins` maps each item to its number of
/// verdicts in its favor over the scheduled comparisons.
pub fn utility_pairwise(
    items: &[ItemId],
    wins: &BTreeMap<ItemId, usize>,
    c2: f64,
    mode: PairwiseMode,
) -> BTreeMap<ItemId, f64> {
    items
        .iter()
        .map(|i| {
            let u = match mode {
                PairwiseMode::Constant => c2,
                PairwiseMode::WinCount => c2 * wins.get(i).copied().unwrap_or(0) as f64,
            };
            (i.clone(), u)
        })
        .collect()
}

/// U_listwise = -m' * C3, discounting by the LLM-assigned rank.
pub fn utility_listwise(m_prime: usize, c3: f64) -> f64 {
    assert!(m_prime >= 1, "ranks are 1-based");
    -(m_prime as f64) * c3
}

/// Everything hybrid_combine needs for one candidate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ItemUtilities {
    pub item_id: ItemId,
    /// 1-based initial-model rank.
    pub m: usize,
    /// 1-based LLM listwise rank.
    pub m_prime: usize,
    pub u_point: f64,
    pub u_pair: f64,
    pub u_list: f64,
    pub u_hybrid: f64,
}

/// Weighted combination and final sort: descending hybrid utility, ties by
/// ascending initial rank, then item id.
pub fn hybrid_combine(
    inputs: &[(ItemId, usize, usize, f64, f64, f64)],
    w: &UtilityWeights,
) -> Result<Vec<ItemUtilities>> {
    w.validate()?;
    let mut rows: Vec<ItemUtilities> = inputs
        .iter()
        .map(|(item_id, m, m_prime, u_point, u_pair, u_list)| ItemUtilities {
            item_id: item_id.clone(),
            m: *m,
            m_prime: *m_prime,
            u_point: *u_point,
            u_pair: *u_pair,
            u_list: *u_list,
            u_hybrid: w.alpha_point * u_point + w.alpha_pair * u_pair + w.alpha_list * u_list,
        })
        .collect();
    rows.sort_by(|a, b| {
        b.u_hybrid
            .partial_cmp(&a.u_hybrid)
            .expect("finite utilities")
            .then(a.m.cmp(&b.m))
            .then(a.item_id.cmp(&b.item_id))
    });
    Ok(rows)
}

/// Final rankings file: per user, ordered items with all four utility
/// columns.
pub fn write_rankings(path: &Path, rankings: &BTreeMap<UserId, Vec<ItemUtilities>>) -> Result<()> {
    let mut out = std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?,
    );
    for (user, rows) in rankings {
        for (pos, r) in rows.iter().enumerate() {
            writeln!(
                out,
                "{user}\t{}\t{}\t{}\t{}\t{:.17e}\t{:.17e}\t{:.17e}\t{:.17e}",
                pos + 1,
                r.item_id,
                r.m,
                r.m_prime,
                r.u_point,
                r.u_pair,
                r.u_list,
                r.u_hybrid
            )
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        }
    }
    Ok(())
}

pub fn read_rankings(path: &Path) -> Result<BTreeMap<UserId, Vec<ItemUtilities>>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut out: BTreeMap<UserId, Vec<ItemUtilities>> = BTreeMap::new();
    for (idx, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.is_empty() {
            continue;
        }
        let mal = |m: String| Error::Malformed {
            path: path.display().to_string(),
            line: idx + 1,
            message: m,
        };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 9 {
            return Err(mal("expected 9 tab-separated fields".into()));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| mal(e.to_string()));
        let int = |s: &str| s.parse::<usize>().map_err(|e| mal(e.to_string()));
        let row = ItemUtilities {
            item_id: ItemId::from(f[2]),
            m: int(f[3])?,
            m_prime: int(f[4])?,
            u_point: num(f[5])?,
            u_pair: num(f[6])?,
            u_list: num(f[7])?,
            u_hybrid: num(f[8])?,
        };
        out.entry(UserId::from(f[0])).or_default().push(row);
    }
    Ok(out)
}
