//! Dataset ingestion, filtering, labeling, and temporal splitting.

use crate::error::{Error, Result};
use crate::ids::{ItemId, UserId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

/// One (user, item, rating, timestamp) event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub user_id: UserId,
    pub item_id: ItemId,
    pub rating: f64,
    /// Seconds. Zero means "not yet timestamped" (BookCrossing before simulation).
    pub timestamp: i64,
    pub simulated_ts: bool,
}

/// Item titles, required by prompt rendering.
#[derive(Clone, Debug, Default)]
pub struct Catalog {
    titles: BTreeMap<ItemId, String>,
}

impl Catalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, item: ItemId, title: impl Into<String>) {
        let t = title.into();
        let t = t.trim().to_owned();
        if !t.is_empty() {
            self.titles.insert(item, t);
        }
    }

    pub fn title(&self, item: &ItemId) -> Result<&str> {
        self.titles
            .get(item)
            .map(String::as_str)
            .ok_or_else(|| Error::MissingTitle(item.to_string()))
    }

    pub fn contains(&self, item: &ItemId) -> bool {
        self.titles.contains_key(item)
    }

    pub fn len(&self) -> usize {
        self.titles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.titles.is_empty()
    }

    /// Backfill a placeholder title for every item seen in `interactions`
    /// that has no real title. Raw sources without title files still have
    /// to satisfy the every-item-has-a-title invariant.
    pub fn backfill(&mut self, interactions: &[Interaction]) {
        for it in interactions {
            if !self.titles.contains_key(&it.item_id) {
                self.titles
                    .insert(it.item_id.clone(), format!("Item {}", it.item_id));
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ItemId, &str)> {
        self.titles.iter().map(|(k, v)| (k, v.as_str()))
    }
}

/// Rating scale declared by a dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RatingScale {
    OneToFive,
    OneToTen,
}

impl RatingScale {
    pub fn max(self) -> f64 {
        match self {
            RatingScale::OneToFive => 5.0,
            RatingScale::OneToTen => 10.0,
        }
    }

    /// (liked >=, disliked <=) cutoffs.
    pub fn default_thresholds(self) -> (f64, f64) {
        match self {
            RatingScale::OneToFive => (4.0, 2.0),
            RatingScale::OneToTen => (7.0, 4.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preference {
    Liked,
    Disliked,
    Neutral,
}

/// Supported raw input layouts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetFormat {
    Ml100k,
    Ml1m,
    BookCrossing,
    AmazonMusic,
    GenericTsv,
}

impl DatasetFormat {
    pub fn scale(self) -> RatingScale {
        match self {
            DatasetFormat::BookCrossing => RatingScale::OneToTen,
            _ => RatingScale::OneToFive,
        }
    }

    /// Whether the raw source carries real timestamps.
    pub fn has_timestamps(self) -> bool {
        !matches!(self, DatasetFormat::BookCrossing)
    }

    /// Word substituted into prompt templates ("movie", "book", "music item").
    pub fn domain_word(self) -> &'static str {
        match self {
            DatasetFormat::Ml100k | DatasetFormat::Ml1m => "movie",
            DatasetFormat::BookCrossing => "book",
            DatasetFormat::AmazonMusic => "music item",
            DatasetFormat::GenericTsv => "item",
        }
    }
}

impl FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ml-100k" => Ok(DatasetFormat::Ml100k),
            "ml-1m" => Ok(DatasetFormat::Ml1m),
            "bookcrossing" => Ok(DatasetFormat::BookCrossing),
            "amazon-music" => Ok(DatasetFormat::AmazonMusic),
            "generic-tsv" => Ok(DatasetFormat::GenericTsv),
            other => Err(Error::InvalidInput(format!("unknown dataset format `{other}`"))),
        }
    }
}

impl fmt::Display for DatasetFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DatasetFormat::Ml100k => "ml-100k",
            DatasetFormat::Ml1m => "ml-1m",
            DatasetFormat::BookCrossing => "bookcrossing",
            DatasetFormat::AmazonMusic => "amazon-music",
            DatasetFormat::GenericTsv => "generic-tsv",
        };
        f.write_str(s)
    }
}

/// Temporal train/test partition.
#[derive(Clone, Debug, Default)]
pub struct DatasetSplit {
    pub train: Vec<Interaction>,
    pub test: Vec<Interaction>,
    pub per_user_test_item: BTreeMap<UserId, ItemId>,
}

impl DatasetSplit {
    pub fn train_items_of(&self, user: &UserId) -> HashSet<ItemId> {
        self.train
            .iter()
            .filter(|it| &it.user_id == user)
            .map(|it| it.item_id.clone())
            .collect()
    }

    pub fn users(&self) -> Vec<UserId> {
        let mut set: Vec<UserId> = self
            .train
            .iter()
            .map(|it| it.user_id.clone())
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        set.sort();
        set
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_users: usize,
    pub n_items: usize,
    pub n_interactions: usize,
    pub density: f64,
}

/// Parse a raw dataset file (or directory, for sources that ship a
/// separate title file) into deduplicated interactions plus a catalog.
///
/// Duplicate (user, item) pairs collapse to the latest timestamp. Any
/// malformed row aborts the load (threshold 0); use
/// [`load_raw_with_options`] to tolerate a bounded number.
pub fn load_raw(path: &Path, format: DatasetFormat) -> Result<(Vec<Interaction>, Catalog)> {
    load_raw_with_options(path, format, 0)
}

pub fn load_raw_with_options(
    path: &Path,
    format: DatasetFormat,
    max_bad_rows: usize,
) -> Result<(Vec<Interaction>, Catalog)> {
    let (data_path, title_path) = locate_files(path, format)?;
    let mut bad: Vec<String> = Vec::new();
    let mut interactions = Vec::new();

    let file = std::fs::File::open(&data_path)
        .map_err(|e| Error::io(data_path.display().to_string(), e))?;
    let reader = BufReader::new(file);

    match format {
        DatasetFormat::BookCrossing => {
            parse_bookcrossing(reader, &data_path, &mut interactions, &mut bad)?;
        }
        _ => {
            for (idx, line) in reader.lines().enumerate() {
                let lineno = idx + 1;
                let line =
                    line.map_err(|e| Error::io(data_path.display().to_string(), e))?;
                if line.trim().is_empty() {
                    continue;
                }
                match parse_row(&line, format) {
                    Ok(Some(it)) => interactions.push(it),
                    Ok(None) => {} // header or intentionally skipped row
                    Err(msg) => bad.push(format!("{}:{}: {}", data_path.display(), lineno, msg)),
                }
            }
        }
    }

    if bad.len() > max_bad_rows {
        for diag in &bad {
            log::error!("malformed row: {diag}");
        }
        return Err(Error::TooManyBadRows {
            path: data_path.display().to_string(),
            count: bad.len(),
            threshold: max_bad_rows,
        });
    }
    for diag in &bad {
        log::warn!("skipped malformed row: {diag}");
    }

    let interactions = dedup_keep_latest(interactions);

    let mut catalog = Catalog::new();
    if let Some(tp) = title_path {
        load_titles(&tp, format, &mut catalog)?;
    }
    catalog.backfill(&interactions);
    Ok((interactions, catalog))
}

fn locate_files(
    path: &Path,
    format: DatasetFormat,
) -> Result<(std::path::PathBuf, Option<std::path::PathBuf>)> {
    if path.is_dir() {
        let (data, titles) = match format {
            DatasetFormat::Ml100k => ("u.data", Some("u.item")),
            DatasetFormat::Ml1m => ("ratings.dat", Some("movies.dat")),
            DatasetFormat::BookCrossing => ("BX-Book-Ratings.csv", Some("BX-Books.csv")),
            DatasetFormat::AmazonMusic => ("ratings.csv", None),
            DatasetFormat::GenericTsv => ("interactions.tsv", None),
        };
        let data_path = path.join(data);
        if !data_path.exists() {
            return Err(Error::InvalidInput(format!(
                "expected {} under {}",
                data,
                path.display()
            )));
        }
        let title_path = titles.map(|t| path.join(t)).filter(|p| p.exists());
        Ok((data_path, title_path))
    } else if path.exists() {
        Ok((path.to_path_buf(), None))
    } else {
        Err(Error::InvalidInput(format!("no such path: {}", path.display())))
    }
}

fn parse_row(line: &str, format: DatasetFormat) -> std::result::Result<Option<Interaction>, String> {
    let fields: Vec<&str> = match format {
        DatasetFormat::Ml100k | DatasetFormat::GenericTsv => line.split('\t').collect(),
        DatasetFormat::Ml1m => line.split("::").collect(),
        DatasetFormat::AmazonMusic => line.split(',').collect(),
        DatasetFormat::BookCrossing => unreachable!("csv path"),
    };
    if fields.len() < 4 {
        return Err(format!("expected 4 fields, got {}", fields.len()));
    }
    let rating: f64 = fields[2]
        .trim()
        .parse()
        .map_err(|_| format!("bad rating `{}`", fields[2]))?;
    let timestamp: i64 = fields[3]
        .trim()
        .parse::<f64>()
        .map_err(|_| format!("bad timestamp `{}`", fields[3]))? as i64;
    if timestamp <= 0 {
        return Err(format!("non-positive timestamp `{}`", fields[3]));
    }
    let scale = format.scale();
    if rating < 1.0 || rating > scale.max() {
        return Err(format!("rating {rating} outside 1..={}", scale.max()));
    }
    Ok(Some(Interaction {
        user_id: UserId::new(fields[0].trim()),
        item_id: ItemId::new(fields[1].trim()),
        rating,
        timestamp,
        simulated_ts: false,
    }))
}

fn parse_bookcrossing<R: BufRead>(
    reader: R,
    path: &Path,
    out: &mut Vec<Interaction>,
    bad: &mut Vec<String>,
) -> Result<()> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(b';')
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    for (idx, record) in rdr.records().enumerate() {
        let lineno = idx + 2; // header is line 1
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                bad.push(format!("{}:{}: {}", path.display(), lineno, e));
                continue;
            }
        };
        if record.len() < 3 {
            bad.push(format!("{}:{}: expected 3 fields", path.display(), lineno));
            continue;
        }
        let rating: f64 = match record[2].trim().parse() {
            Ok(r) => r,
            Err(_) => {
                bad.push(format!(
                    "{}:{}: bad rating `{}`",
                    path.display(),
                    lineno,
                    &record[2]
                ));
                continue;
            }
        };
        // Rating 0 marks an implicit interaction; only explicit 1-10 ratings kept.
        if rating < 1.0 {
            continue;
        }
        if rating > 10.0 {
            bad.push(format!("{}:{}: rating {} outside 1..=10", path.display(), lineno, rating));
            continue;
        }
        out.push(Interaction {
            user_id: UserId::new(record[0].trim()),
            item_id: ItemId::new(record[1].trim()),
            rating,
            timestamp: 0,
            simulated_ts: false,
        });
    }
    Ok(())
}

fn load_titles(path: &Path, format: DatasetFormat, catalog: &mut Catalog) -> Result<()> {
    match format {
        DatasetFormat::Ml100k => {
            let file =
                std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
            // u.item is latin-1; replace invalid utf-8 rather than failing.
            let bytes = std::io::Read::bytes(BufReader::new(file))
                .collect::<std::io::Result<Vec<u8>>>()
                .map_err(|e| Error::io(path.display().to_string(), e))?;
            let text = String::from_utf8_lossy(&bytes);
            for line in text.lines() {
                let mut parts = line.splitn(3, '|');
                if let (Some(id), Some(title)) = (parts.next(), parts.next()) {
                    catalog.insert(ItemId::new(id.trim()), title);
                }
            }
        }
        DatasetFormat::Ml1m => {
            let file =
                std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
            let bytes = std::io::Read::bytes(BufReader::new(file))
                .collect::<std::io::Result<Vec<u8>>>()
                .map_err(|e| Error::io(path.display().to_string(), e))?;
            let text = String::from_utf8_lossy(&bytes);
            for line in text.lines() {
                let mut parts = line.splitn(3, "::");
                if let (Some(id), Some(title)) = (parts.next(), parts.next()) {
                    catalog.insert(ItemId::new(id.trim()), title);
                }
            }
        }
        DatasetFormat::BookCrossing => {
            let file =
                std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
            let mut rdr = csv::ReaderBuilder::new()
                .delimiter(b';')
                .has_headers(true)
                .flexible(true)
                .from_reader(BufReader::new(file));
            for record in rdr.records().flatten() {
                if record.len() >= 2 {
                    catalog.insert(ItemId::new(record[0].trim()), &record[1]);
                }
            }
        }
        _ => {}
    }
    Ok(())
}

/// Collapse duplicate (user, item) pairs, keeping the latest timestamp.
/// Later file position wins ties so re-statements of an opinion override.
pub fn dedup_keep_latest(interactions: Vec<Interaction>) -> Vec<Interaction> {
    let mut best: HashMap<(UserId, ItemId), usize> = HashMap::new();
    let mut kept: Vec<Option<Interaction>> = Vec::with_capacity(interactions.len());
    for it in interactions {
        let key = (it.user_id.clone(), it.item_id.clone());
        match best.get(&key) {
            Some(&slot) => {
                let prev = kept[slot].as_ref().expect("slot occupied");
                if it.timestamp >= prev.timestamp {
                    kept[slot] = Some(it);
                }
            }
            None => {
                best.insert(key, kept.len());
                kept.push(Some(it));
            }
        }
    }
    kept.into_iter().flatten().collect()
}

/// Iteratively remove users and items with fewer than `k` interactions
/// until every remaining user and item has at least `k`.
pub fn k_core_filter(interactions: &[Interaction], k: usize) -> Vec<Interaction> {
    assert!(k >= 1, "k-core requires k >= 1");
    if k == 1 {
        return interactions.to_vec();
    }
    let mut user_deg: HashMap<&UserId, usize> = HashMap::new();
    let mut item_deg: HashMap<&ItemId, usize> = HashMap::new();
    for it in interactions {
        *user_deg.entry(&it.user_id).or_insert(0) += 1;
        *item_deg.entry(&it.item_id).or_insert(0) += 1;
    }
    let mut alive: Vec<bool> = vec![true; interactions.len()];
    loop {
        let mut changed = false;
        for (i, it) in interactions.iter().enumerate() {
            if !alive[i] {
                continue;
            }
            if user_deg[&it.user_id] < k || item_deg[&it.item_id] < k {
                alive[i] = false;
                *user_deg.get_mut(&it.user_id).expect("seen") -= 1;
                *item_deg.get_mut(&it.item_id).expect("seen") -= 1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    interactions
        .iter()
        .zip(alive)
        .filter(|(_, a)| *a)
        .map(|(it, _)| it.clone())
        .collect()
}

/// Assign distinct seeded pseudo-random timestamps to interactions that
/// lack real ones. Refuses to overwrite real timestamps unless `force`.
pub fn simulate_timestamps(
    interactions: &[Interaction],
    seed: u64,
    force: bool,
) -> Result<Vec<Interaction>> {
    if !force && interactions.iter().any(|it| it.timestamp > 0) {
        return Err(Error::InvalidInput(
            "input already has real timestamps; pass force to overwrite".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Without replacement from a wide range so the order is total.
    let mut drawn: HashSet<i64> = HashSet::with_capacity(interactions.len());
    let mut stamps: Vec<i64> = Vec::with_capacity(interactions.len());
    while stamps.len() < interactions.len() {
        let t = rng.gen_range(1..=(1i64 << 42));
        if drawn.insert(t) {
            stamps.push(t);
        }
    }
    Ok(interactions
        .iter()
        .zip(stamps)
        .map(|(it, ts)| Interaction {
            timestamp: ts,
            simulated_ts: true,
            ..it.clone()
        })
        .collect())
}

/// Per-user chronological leave-last-out split. Users with a single
/// interaction stay train-only and are excluded from test.
pub fn temporal_split(interactions: &[Interaction]) -> Result<DatasetSplit> {
    if let Some(bad) = interactions.iter().find(|it| it.timestamp <= 0) {
        return Err(Error::InvalidInput(format!(
            "interaction ({}, {}) lacks a timestamp; simulate timestamps first",
            bad.user_id, bad.item_id
        )));
    }
    let mut by_user: BTreeMap<&UserId, Vec<&Interaction>> = BTreeMap::new();
    for it in interactions {
        by_user.entry(&it.user_id).or_default().push(it);
    }
    let mut split = DatasetSplit::default();
    let mut singletons = 0usize;
    for (user, mut rows) in by_user {
        // Ties on timestamp break by item id for determinism.
        rows.sort_by(|a, b| {
            a.timestamp
                .cmp(&b.timestamp)
                .then_with(|| a.item_id.cmp(&b.item_id))
        });
        if rows.len() == 1 {
            singletons += 1;
            split.train.push(rows[0].clone());
            continue;
        }
        let last = rows.pop().expect("len >= 2");
        for r in rows {
            split.train.push(r.clone());
        }
        split
            .per_user_test_item
            .insert(user.clone(), last.item_id.clone());
        split.test.push(last.clone());
    }
    if singletons > 0 {
        log::warn!("{singletons} single-interaction users kept train-only");
    }
    if split.test.is_empty() {
        log::warn!("temporal split produced an empty test set");
    }
    Ok(split)
}

/// Tag each interaction liked/disliked/neutral by rating cutoffs.
pub fn label_preferences(
    interactions: &[Interaction],
    scale: RatingScale,
) -> Result<Vec<Preference>> {
    label_preferences_with(interactions, scale, scale.default_thresholds())
}

pub fn label_preferences_with(
    interactions: &[Interaction],
    scale: RatingScale,
    (liked_min, disliked_max): (f64, f64),
) -> Result<Vec<Preference>> {
    interactions
        .iter()
        .map(|it| {
            if it.rating < 1.0 || it.rating > scale.max() {
                return Err(Error::InvalidInput(format!(
                    "rating {} outside declared scale 1..={}",
                    it.rating,
                    scale.max()
                )));
            }
            Ok(if it.rating >= liked_min {
                Preference::Liked
            } else if it.rating <= disliked_max {
                Preference::Disliked
            } else {
                Preference::Neutral
            })
        })
        .collect()
}

pub fn compute_stats(interactions: &[Interaction]) -> DatasetStats {
    let users: HashSet<&UserId> = interactions.iter().map(|it| &it.user_id).collect();
    let items: HashSet<&ItemId> = interactions.iter().map(|it| &it.item_id).collect();
    let n_users = users.len();
    let n_items = items.len();
    let n_interactions = interactions.len();
    let density = if n_users == 0 || n_items == 0 {
        0.0
    } else {
        n_interactions as f64 / (n_users as f64 * n_items as f64)
    };
    DatasetStats {
        n_users,
        n_items,
        n_interactions,
        density,
    }
}

/// Canonical interaction TSV: user, item, rating, timestamp, simulated flag.
pub fn write_canonical(path: &Path, interactions: &[Interaction]) -> Result<()> {
    let mut out = std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?,
    );
    for it in interactions {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            it.user_id, it.item_id, it.rating, it.timestamp, it.simulated_ts as u8
        )
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok(())
}

pub fn read_canonical(path: &Path) -> Result<Vec<Interaction>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(Error::Malformed {
                path: path.display().to_string(),
                line: idx + 1,
                message: format!("expected 5 fields, got {}", f.len()),
            });
        }
        out.push(Interaction {
            user_id: UserId::new(f[0]),
            item_id: ItemId::new(f[1]),
            rating: f[2].parse().map_err(|_| Error::Malformed {
                path: path.display().to_string(),
                line: idx + 1,
                message: format!("bad rating `{}`", f[2]),
            })?,
            timestamp: f[3].parse().map_err(|_| Error::Malformed {
                path: path.display().to_string(),
                line: idx + 1,
                message: format!("bad timestamp `{}`", f[3]),
            })?,
            simulated_ts: f[4] == "1",
        });
    }
    Ok(out)
}

pub fn write_catalog(path: &Path, catalog: &Catalog) -> Result<()> {
    let mut out = std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?,
    );
    for (item, title) in catalog.iter() {
        writeln!(out, "{item}\t{title}").map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok(())
}

pub fn read_catalog(path: &Path) -> Result<Catalog> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut catalog = Catalog::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if let Some((id, title)) = line.split_once('\t') {
            catalog.insert(ItemId::new(id), title);
        }
    }
    Ok(catalog)
}

/// Stats sidecar in TOML.
pub fn write_stats(path: &Path, stats: &DatasetStats) -> Result<()> {
    let text = toml::to_string(stats).expect("stats serialize");
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Deterministic helper used by tests and the pipeline: shuffle is not
/// involved anywhere in this module, but splitting needs stable ordering,
/// so expose a canonical sort for interaction lists.
pub fn sort_canonical(interactions: &mut [Interaction]) {
    interactions.sort_by(|a, b| {
        a.user_id
            .cmp(&b.user_id)
            .then_with(|| a.timestamp.cmp(&b.timestamp))
            .then_with(|| a.item_id.cmp(&b.item_id))
    });
}

/// Seeded synthetic interaction generator for fixtures and benches.
pub fn synthetic_interactions(
    n_users: usize,
    n_items: usize,
    per_user: usize,
    seed: u64,
) -> Vec<Interaction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for u in 0..n_users {
        let mut items: Vec<usize> = (0..n_items).collect();
        items.shuffle(&mut rng);
        for (t, &i) in items.iter().take(per_user).enumerate() {
            out.push(Interaction {
                user_id: UserId::new(format!("u{u}")),
                item_id: ItemId::new(format!("i{i}")),
                rating: rng.gen_range(1..=5) as f64,
                timestamp: (t as i64 + 1) * 100 + rng.gen_range(0..100),
                simulated_ts: false,
            });
        }
    }
    dedup_keep_latest(out)
}
