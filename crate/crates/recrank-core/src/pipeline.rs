//! Config-driven pipeline runner: every stage's output lives in a
//! content-addressed cache directory keyed by its inputs, so reruns and
//! ablations reuse whatever still matches.

use crate::dataset::{self, Catalog, DatasetFormat, DatasetSplit};
use crate::error::{Error, Result};
use crate::eval::{self, EvalReport, MethodMetrics};
use crate::gateway::{
    self, Backend, BackendConfig, BackendKind, EchoHintBackend, GenerationParams,
    HttpChatBackend, OracleBackend, OracleFixture, ReplayBackend, ScriptedBackend,
};
use crate::ids::{ItemId, UserId};
use crate::parse::{self, ParseStatus, ParsedResult, Verdict};
use crate::prompt::{self, PromptConfig, PromptInstance, PromptKind};
use crate::ranker::{self, ItemUtilities, PairwiseMode, UtilityWeights};
use crate::ranklist::{self, RankingList};
use crate::recommender::{self, EmbeddingModel, ModelTag, TrainConfig};
use crate::sampling::{self, SampledUserSet, SamplingPlan, SamplingStrategy, UserEmbeddingTable};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSection {
    pub format: String,
    pub path: PathBuf,
    /// k-core threshold; 0 or 1 disables filtering.
    pub k_core: usize,
    pub simulate_timestamps: bool,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            format: "generic-tsv".into(),
            path: PathBuf::from("data/raw.tsv"),
            k_core: 10,
            simulate_timestamps: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RecommenderSection {
    pub model: String,
    #[serde(flatten)]
    pub train: TrainConfig,
}

impl Default for RecommenderSection {
    fn default() -> Self {
        Self {
            model: "mf".into(),
            train: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptSection {
    pub kinds: Vec<String>,
    pub pointwise_fix: bool,
    pub n: usize,
    pub n_pos: usize,
    pub history_max: usize,
    pub context_budget: usize,
    pub pair_schedule: String,
}

impl Default for PromptSection {
    fn default() -> Self {
        Self {
            kinds: vec!["listwise".into(), "pointwise".into(), "pairwise".into()],
            pointwise_fix: false,
            n: 10,
            n_pos: 3,
            history_max: 20,
            context_budget: 2048,
            pair_schedule: "adjacent".into(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RankerSection {
    #[serde(flatten)]
    pub weights: UtilityWeights,
    pub pairwise_mode: String,
}

impl Default for RankerSection {
    fn default() -> Self {
        Self {
            weights: UtilityWeights::default(),
            pairwise_mode: "constant".into(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSection {
    pub alpha: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { alpha: 0.05 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub dataset: DatasetSection,
    pub sampling: SamplingPlan,
    pub recommender: RecommenderSection,
    pub prompts: PromptSection,
    pub backend: BackendConfig,
    pub params: GenerationParams,
    pub ranker: RankerSection,
    pub eval: EvalSection,
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn section_toml<T: Serialize>(v: &T) -> String {
    toml::to_string(v).expect("section serialize")
}

pub fn config_hash(cfg: &RunConfig) -> String {
    let mut h = Sha256::new();
    h.update(section_toml(cfg));
    hex::encode(h.finalize())
}

/// Collects every statically checkable violation instead of stopping at
/// the first.
pub fn validate_config(cfg: &RunConfig) -> std::result::Result<(), Vec<String>> {
    let mut bad = Vec::new();
    fn check(bad: &mut Vec<String>, r: Result<()>) {
        if let Err(e) = r {
            bad.push(e.to_string());
        }
    }
    match DatasetFormat::from_str(&cfg.dataset.format) {
        Err(e) => bad.push(e.to_string()),
        Ok(_) => {
            if !cfg.dataset.path.exists() {
                bad.push(format!(
                    "dataset path {} does not exist",
                    cfg.dataset.path.display()
                ));
            }
        }
    }
    check(&mut bad, cfg.sampling.validate());
    check(&mut bad, ModelTag::from_str(&cfg.recommender.model).map(|_| ()));
    check(&mut bad, cfg.recommender.train.validate());
    if cfg.prompts.kinds.is_empty() {
        bad.push("prompts.kinds must not be empty".into());
    }
    for k in &cfg.prompts.kinds {
        check(&mut bad, PromptKind::from_str(k).map(|_| ()));
    }
    if cfg.prompts.n_pos == 0 || cfg.prompts.n_pos > cfg.prompts.n {
        bad.push(format!(
            "need 0 < n_pos <= n, got n_pos={} n={}",
            cfg.prompts.n_pos, cfg.prompts.n
        ));
    }
    if !matches!(cfg.prompts.pair_schedule.as_str(), "adjacent" | "round-robin") {
        bad.push(format!(
            "unknown pair schedule `{}`",
            cfg.prompts.pair_schedule
        ));
    }
    check(&mut bad, cfg.backend.validate());
    check(&mut bad, cfg.params.validate());
    check(&mut bad, cfg.ranker.weights.validate());
    check(&mut bad, PairwiseMode::from_str(&cfg.ranker.pairwise_mode).map(|_| ()));
    if !(cfg.eval.alpha > 0.0 && cfg.eval.alpha < 1.0) {
        bad.push(format!("eval.alpha must be in (0,1), got {}", cfg.eval.alpha));
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(bad)
    }
}

// --- content-addressed stage cache ---------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub key: String,
    pub cached: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub version: String,
    pub stages: Vec<StageRecord>,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub parse_failure_rate: f64,
    pub fallback_rate: f64,
}

fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Hash of a file's bytes, or of a directory's sorted entries and bytes.
pub fn hash_path(path: &Path) -> Result<String> {
    let mut h = Sha256::new();
    hash_path_into(path, &mut h)?;
    Ok(hex::encode(h.finalize()))
}

fn hash_path_into(path: &Path, h: &mut Sha256) -> Result<()> {
    let io_err = |e: std::io::Error| Error::io(path.display().to_string(), e);
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(io_err)?
            .collect::<std::io::Result<Vec<_>>>()
            .map_err(io_err)?
            .into_iter()
            .map(|e| e.path())
            .collect();
        entries.sort();
        for e in entries {
            h.update(e.file_name().unwrap_or_default().as_encoded_bytes());
            hash_path_into(&e, h)?;
        }
    } else {
        h.update(std::fs::read(path).map_err(io_err)?);
    }
    Ok(())
}

struct Stage {
    key: String,
    dir: PathBuf,
    cached: bool,
}

/// Runs `build` into a fresh directory unless a cache entry for the exact
/// (name, inputs, section) key already exists; the directory is moved into
/// place atomically.
fn run_stage(
    cache_root: &Path,
    name: &str,
    inputs: &[&str],
    section: &str,
    build: impl FnOnce(&Path) -> Result<()>,
) -> Result<Stage> {
    let mut h = Sha256::new();
    h.update(name.as_bytes());
    for i in inputs {
        h.update(i.as_bytes());
    }
    h.update(section.as_bytes());
    let key = hex::encode(h.finalize());
    let dir = cache_root.join(format!("{name}-{}", &key[..16]));
    if dir.is_dir() {
        return Ok(Stage {
            key,
            dir,
            cached: true,
        });
    }
    let tmp = cache_root.join(format!(".tmp-{name}-{}-{}", &key[..16], std::process::id()));
    if tmp.exists() {
        std::fs::remove_dir_all(&tmp).map_err(|e| Error::io(tmp.display().to_string(), e))?;
    }
    std::fs::create_dir_all(&tmp).map_err(|e| Error::io(tmp.display().to_string(), e))?;
    build(&tmp).map_err(|e| Error::Stage {
        stage: name.to_string(),
        message: format!("{e} (artifacts: {})", tmp.display()),
    })?;
    std::fs::rename(&tmp, &dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    Ok(Stage {
        key,
        dir,
        cached: false,
    })
}

// --- stage payload helpers -------------------------------------------------

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?,
    );
    for r in rows {
        let line = serde_json::to_string(r)
            .map_err(|e| Error::InvalidInput(format!("serialize: {e}")))?;
        writeln!(out, "{line}").map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok(())
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut out = Vec::new();
    for (idx, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Malformed {
            path: path.display().to_string(),
            line: idx + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ResponseRecord {
    index: usize,
    ok: bool,
    text: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Rates {
    parse_failure_rate: f64,
    fallback_rate: f64,
}

fn load_split(dir: &Path) -> Result<(DatasetSplit, Catalog)> {
    let train = dataset::read_canonical(&dir.join("train.tsv"))?;
    let test = dataset::read_canonical(&dir.join("test.tsv"))?;
    let catalog = dataset::read_catalog(&dir.join("catalog.tsv"))?;
    let per_user_test_item = test
        .iter()
        .map(|it| (it.user_id.clone(), it.item_id.clone()))
        .collect();
    Ok((
        DatasetSplit {
            train,
            test,
            per_user_test_item,
        },
        catalog,
    ))
}

/// Min-max map of the model's raw scores onto the 1..5 rating scale,
/// used as pointwise hint scores.
pub fn hint_scores(model: &EmbeddingModel, user: &UserId, items: &[ItemId]) -> Result<Vec<f64>> {
    let uv = model.user_vector(user)?;
    let raw: Vec<f64> = items
        .iter()
        .map(|i| {
            model
                .item_vector(i)
                .map(|iv| uv.iter().zip(iv).map(|(a, b)| a * b).sum::<f64>())
        })
        .collect::<Result<_>>()?;
    let (lo, hi) = raw
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
            (l.min(v), h.max(v))
        });
    Ok(raw
        .iter()
        .map(|&v| {
            if hi > lo {
                1.0 + 4.0 * (v - lo) / (hi - lo)
            } else {
                3.0
            }
        })
        .collect())
}

fn build_backend(cfg: &RunConfig, split: &DatasetSplit, catalog: &Catalog) -> Result<Box<dyn Backend>> {
    if let Some(replay) = &cfg.backend.replay {
        return Ok(Box::new(ReplayBackend::from_log(Path::new(replay))?));
    }
    Ok(match cfg.backend.kind {
        BackendKind::HttpChat => Box::new(HttpChatBackend::new(cfg.backend.clone())?),
        BackendKind::MockEchoHint => Box::new(EchoHintBackend),
        BackendKind::MockOracle => {
            let fixture = OracleFixture {
                test_item: split.per_user_test_item.clone(),
                ratings: split
                    .train
                    .iter()
                    .map(|it| ((it.user_id.clone(), it.item_id.clone()), it.rating))
                    .collect(),
                catalog: catalog.clone(),
            };
            Box::new(OracleBackend { fixture })
        }
        BackendKind::MockScripted => {
            let path = cfg.backend.script_path.as_deref().ok_or_else(|| {
                Error::Config("mock-scripted backend requires script_path".into())
            })?;
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.to_string(), e))?;
            let responses: BTreeMap<String, String> = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("script {path}: {e}")))?;
            Box::new(ScriptedBackend {
                responses,
                default: None,
            })
        }
    })
}

// --- the pipeline ----------------------------------------------------------

pub fn run_pipeline(cfg: &RunConfig) -> Result<(RunManifest, Vec<EvalReport>, String)> {
    validate_config(cfg).map_err(|v| Error::Config(v.join("; ")))?;
    let started = now_unix();
    let cache_root = cfg.out_dir.join("cache");
    std::fs::create_dir_all(&cache_root)
        .map_err(|e| Error::io(cache_root.display().to_string(), e))?;
    let mut stages: Vec<StageRecord> = Vec::new();
    let mut record = |name: &str, s: &Stage| {
        stages.push(StageRecord {
            name: name.into(),
            key: s.key.clone(),
            cached: s.cached,
        });
    };

    let format = DatasetFormat::from_str(&cfg.dataset.format)?;
    let raw_hash = hash_path(&cfg.dataset.path)?;

    // 1. prepare-data
    let s_data = run_stage(
        &cache_root,
        "data",
        &[&raw_hash],
        &section_toml(&cfg.dataset),
        |dir| {
            let (rows, mut catalog) = dataset::load_raw(&cfg.dataset.path, format)?;
            let rows = dataset::dedup_keep_latest(rows);
            let rows = if cfg.dataset.k_core > 1 {
                dataset::k_core_filter(&rows, cfg.dataset.k_core)
            } else {
                rows
            };
            if rows.is_empty() {
                return Err(Error::InvalidInput("no interactions survive filtering".into()));
            }
            let rows = if cfg.dataset.simulate_timestamps || !format.has_timestamps() {
                dataset::simulate_timestamps(&rows, cfg.seed, cfg.dataset.simulate_timestamps)?
            } else {
                rows
            };
            catalog.backfill(&rows);
            let split = dataset::temporal_split(&rows)?;
            dataset::write_canonical(&dir.join("train.tsv"), &split.train)?;
            dataset::write_canonical(&dir.join("test.tsv"), &split.test)?;
            dataset::write_catalog(&dir.join("catalog.tsv"), &catalog)?;
            dataset::write_stats(&dir.join("stats.toml"), &dataset::compute_stats(&rows))?;
            Ok(())
        },
    )?;
    record("data", &s_data);
    let (split, catalog) = load_split(&s_data.dir)?;

    // 2. train-recommender
    let tag = ModelTag::from_str(&cfg.recommender.model)?;
    let s_model = run_stage(
        &cache_root,
        "model",
        &[&s_data.key],
        &section_toml(&cfg.recommender),
        |dir| {
            let model = recommender::train(&split, &cfg.recommender.train, tag)?;
            recommender::save_model(&model, &dir.join("model.bin"))?;
            recommender::export_user_embeddings(&model).write_tsv(&dir.join("user_embeddings.tsv"))?;
            Ok(())
        },
    )?;
    record("model", &s_model);
    let model = recommender::load_model(&s_model.dir.join("model.bin"))?;

    // 3. sample-users
    let s_sample = run_stage(
        &cache_root,
        "sample",
        &[&s_data.key, &s_model.key],
        &format!("{}seed={}", section_toml(&cfg.sampling), cfg.seed),
        |dir| {
            let embeddings = UserEmbeddingTable::read_tsv(&s_model.dir.join("user_embeddings.tsv"))?;
            let sampled = sample_users(&split, &embeddings, &cfg.sampling)?;
            sampled.write_tsv(&dir.join("sampled.tsv"))?;
            Ok(())
        },
    )?;
    record("sample", &s_sample);
    let sampled = SampledUserSet::read_tsv(&s_sample.dir.join("sampled.tsv"))?;

    // 4. build ranking lists (inference)
    let s_lists = run_stage(
        &cache_root,
        "lists",
        &[&s_model.key, &s_sample.key],
        &format!("n={}", cfg.prompts.n),
        |dir| {
            let mut users: Vec<UserId> = sampled
                .draws
                .iter()
                .cloned()
                .collect::<BTreeSet<_>>()
                .into_iter()
                .filter(|u| {
                    split.per_user_test_item.contains_key(u) && model.user_ids.contains(u)
                })
                .collect();
            users.sort();
            let mut lists = Vec::new();
            for u in &users {
                match ranklist::build_infer_list(u, &model, &split, cfg.prompts.n) {
                    Ok(l) => lists.push(l),
                    Err(e) => log::warn!("skipping {u}: {e}"),
                }
            }
            if lists.is_empty() {
                return Err(Error::InvalidInput("no evaluable users after sampling".into()));
            }
            ranklist::write_lists(&dir.join("lists.tsv"), &lists)?;
            Ok(())
        },
    )?;
    record("lists", &s_lists);
    let lists = ranklist::read_lists(&s_lists.dir.join("lists.tsv"))?;

    // 5. gen-prompts
    let s_prompts = run_stage(
        &cache_root,
        "prompts",
        &[&s_lists.key, &s_data.key],
        &format!("{}seed={}", section_toml(&cfg.prompts), cfg.seed),
        |dir| {
            let instances = build_prompts(cfg, &lists, &split, &catalog, &model)?;
            write_jsonl(&dir.join("prompts.jsonl"), &instances)?;
            Ok(())
        },
    )?;
    record("prompts", &s_prompts);
    let prompts: Vec<PromptInstance> = read_jsonl(&s_prompts.dir.join("prompts.jsonl"))?;

    // 6. complete
    let s_complete = run_stage(
        &cache_root,
        "complete",
        &[&s_prompts.key],
        &format!("{}{}", section_toml(&cfg.backend), section_toml(&cfg.params)),
        |dir| {
            let backend = build_backend(cfg, &split, &catalog)?;
            let (results, transcripts) = gateway::batch_complete(
                &prompts,
                &cfg.params,
                backend.as_ref(),
                cfg.backend.concurrency,
            )?;
            let records: Vec<ResponseRecord> = results
                .iter()
                .enumerate()
                .map(|(index, r)| match r {
                    Ok(text) => ResponseRecord {
                        index,
                        ok: true,
                        text: text.clone(),
                    },
                    Err(e) => ResponseRecord {
                        index,
                        ok: false,
                        text: e.to_string(),
                    },
                })
                .collect();
            write_jsonl(&dir.join("responses.jsonl"), &records)?;
            gateway::append_transcripts(&dir.join("transcripts.jsonl"), &transcripts)?;
            Ok(())
        },
    )?;
    record("complete", &s_complete);
    let responses: Vec<ResponseRecord> = read_jsonl(&s_complete.dir.join("responses.jsonl"))?;

    // 7. parse
    let s_parse = run_stage(
        &cache_root,
        "parse",
        &[&s_complete.key],
        "",
        |dir| {
            let (parsed, rates) = parse_responses(&prompts, &responses, &lists, &catalog)?;
            write_jsonl(&dir.join("parsed.jsonl"), &parsed)?;
            let text = toml::to_string(&rates)
                .map_err(|e| Error::InvalidInput(format!("rates serialize: {e}")))?;
            std::fs::write(dir.join("rates.toml"), text)
                .map_err(|e| Error::io("rates.toml".to_string(), e))?;
            Ok(())
        },
    )?;
    record("parse", &s_parse);
    let parsed: Vec<ParsedResult> = read_jsonl(&s_parse.dir.join("parsed.jsonl"))?;
    let rates: Rates = toml::from_str(
        &std::fs::read_to_string(s_parse.dir.join("rates.toml"))
            .map_err(|e| Error::io("rates.toml".to_string(), e))?,
    )
    .map_err(|e| Error::Config(format!("rates.toml: {e}")))?;

    // 8. rank
    let s_rank = run_stage(
        &cache_root,
        "rank",
        &[&s_parse.key],
        &section_toml(&cfg.ranker),
        |dir| {
            let rankings = rank_all(cfg, &prompts, &parsed, &lists)?;
            ranker::write_rankings(&dir.join("rankings.tsv"), &rankings)?;
            Ok(())
        },
    )?;
    record("rank", &s_rank);
    let rankings = ranker::read_rankings(&s_rank.dir.join("rankings.tsv"))?;

    // 9. evaluate
    let s_eval = run_stage(
        &cache_root,
        "evaluate",
        &[&s_rank.key],
        &section_toml(&cfg.eval),
        |dir| {
            let (reports, table) = evaluate(cfg, &lists, &rankings, &split, &rates)?;
            eval::write_reports(&dir.join("report.json"), &reports)?;
            std::fs::write(dir.join("table.txt"), &table)
                .map_err(|e| Error::io("table.txt".to_string(), e))?;
            Ok(())
        },
    )?;
    record("evaluate", &s_eval);
    let reports = eval::read_reports(&s_eval.dir.join("report.json"))?;
    let table = std::fs::read_to_string(s_eval.dir.join("table.txt"))
        .map_err(|e| Error::io("table.txt".to_string(), e))?;

    let manifest = RunManifest {
        config_hash: config_hash(cfg),
        version: env!("CARGO_PKG_VERSION").to_string(),
        stages,
        started_unix: started,
        finished_unix: now_unix(),
        parse_failure_rate: rates.parse_failure_rate,
        fallback_rate: rates.fallback_rate,
    };
    let manifest_path = cfg
        .out_dir
        .join(format!("run-{}.json", &manifest.config_hash[..16]));
    std::fs::write(
        &manifest_path,
        serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::InvalidInput(format!("manifest serialize: {e}")))?,
    )
    .map_err(|e| Error::io(manifest_path.display().to_string(), e))?;
    let ledger = cfg.out_dir.join("runs.jsonl");
    {
        use std::io::Write;
        let mut f = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&ledger)
            .map_err(|e| Error::io(ledger.display().to_string(), e))?;
        writeln!(
            f,
            "{}",
            serde_json::to_string(&manifest)
                .map_err(|e| Error::InvalidInput(format!("manifest serialize: {e}")))?
        )
        .map_err(|e| Error::io(ledger.display().to_string(), e))?;
    }
    Ok((manifest, reports, table))
}

fn sample_users(
    split: &DatasetSplit,
    embeddings: &UserEmbeddingTable,
    plan: &SamplingPlan,
) -> Result<SampledUserSet> {
    let mut counts: BTreeMap<UserId, usize> = BTreeMap::new();
    for it in &split.train {
        *counts.entry(it.user_id.clone()).or_insert(0) += 1;
    }
    let users: Vec<UserId> = counts.keys().cloned().collect();
    match plan.strategy {
        SamplingStrategy::Importance => {
            let probs = sampling::importance_probabilities(&counts)?;
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(plan.seed);
            Ok(sampling::weighted_sample(&probs, plan.n_samples, &mut rng))
        }
        SamplingStrategy::Kmeans => {
            let labels = sampling::kmeans_cluster(embeddings, plan.kmeans_k, plan.seed)?;
            sampling::cluster_proportional_sample(&labels, plan.n_samples, plan.seed)
        }
        SamplingStrategy::Dbscan => {
            let labels =
                sampling::dbscan_cluster(embeddings, plan.dbscan_eps, plan.dbscan_min_pts)?;
            sampling::cluster_proportional_sample(&labels, plan.n_samples, plan.seed)
        }
        SamplingStrategy::Random => sampling::random_sample(&users, plan.n_samples, plan.seed),
        SamplingStrategy::Composite => {
            let labels = sampling::kmeans_cluster(embeddings, plan.kmeans_k, plan.seed)?;
            sampling::composite_sample(&counts, &labels, plan)
        }
    }
}

fn build_prompts(
    cfg: &RunConfig,
    lists: &[RankingList],
    split: &DatasetSplit,
    catalog: &Catalog,
    model: &EmbeddingModel,
) -> Result<Vec<PromptInstance>> {
    let format = DatasetFormat::from_str(&cfg.dataset.format)?;
    let pcfg = PromptConfig {
        domain: format.domain_word().to_string(),
        context_budget: cfg.prompts.context_budget,
        history_max: cfg.prompts.history_max,
    };
    let kinds: Vec<PromptKind> = cfg
        .prompts
        .kinds
        .iter()
        .map(|k| PromptKind::from_str(k))
        .collect::<Result<_>>()?;
    let schedule = if cfg.prompts.pair_schedule == "round-robin" {
        prompt::PairSchedule::RoundRobin
    } else {
        prompt::PairSchedule::Adjacent
    };
    let mut out = Vec::new();
    for list in lists {
        let history = prompt::sample_history(
            split,
            &list.user_id,
            format.scale(),
            cfg.prompts.history_max,
            cfg.seed,
        );
        for kind in &kinds {
            match kind {
                PromptKind::Listwise => {
                    out.push(prompt::build_listwise_prompt(list, &history, catalog, &pcfg)?);
                }
                PromptKind::Pointwise | PromptKind::PointwiseFix => {
                    let fix = *kind == PromptKind::PointwiseFix || cfg.prompts.pointwise_fix;
                    let scores = hint_scores(model, &list.user_id, &list.items)?;
                    for (item, score) in list.items.iter().zip(scores) {
                        out.push(prompt::build_pointwise_prompt(
                            &list.user_id,
                            item,
                            &history,
                            catalog,
                            &pcfg,
                            if fix { None } else { Some(score) },
                            fix,
                            None,
                        )?);
                    }
                }
                PromptKind::Pairwise => {
                    for (a, b) in prompt::schedule_pairs(list, schedule) {
                        out.push(prompt::build_pairwise_prompt(
                            &list.user_id,
                            &a,
                            &b,
                            &history,
                            catalog,
                            &pcfg,
                            &a,
                            None,
                        )?);
                    }
                }
            }
        }
    }
    Ok(out)
}

fn parse_responses(
    prompts: &[PromptInstance],
    responses: &[ResponseRecord],
    lists: &[RankingList],
    catalog: &Catalog,
) -> Result<(Vec<ParsedResult>, Rates)> {
    if prompts.len() != responses.len() {
        return Err(Error::InvalidInput(format!(
            "{} prompts but {} responses",
            prompts.len(),
            responses.len()
        )));
    }
    let by_user: BTreeMap<&UserId, &RankingList> =
        lists.iter().map(|l| (&l.user_id, l)).collect();
    let mut parsed = Vec::with_capacity(prompts.len());
    let mut failures = 0usize;
    let mut fallbacks = 0usize;
    for (p, r) in prompts.iter().zip(responses) {
        let list = by_user
            .get(&p.user_id)
            .ok_or_else(|| Error::UnknownUser(p.user_id.to_string()))?;
        let raw = if r.ok {
            match p.kind {
                PromptKind::Listwise => parse::parse_listwise(&r.text, list, catalog)?,
                PromptKind::Pointwise | PromptKind::PointwiseFix => {
                    parse::parse_pointwise(&r.text, p.kind)
                }
                PromptKind::Pairwise => parse::parse_pairwise(&r.text),
            }
        } else {
            // completion never arrived; treat as a failed parse
            ParsedResult {
                kind: p.kind,
                ranking: Vec::new(),
                score: None,
                verdict: None,
                status: ParseStatus::Failed,
                fallback_applied: false,
            }
        };
        if raw.status == ParseStatus::Failed {
            failures += 1;
        }
        let hint_score = p.hint.as_deref().and_then(|h| h.parse::<f64>().ok());
        let winner_first = match p.kind {
            PromptKind::Pairwise => {
                let first_title = p.payload.first().and_then(|i| catalog.title(i).ok());
                p.hint.as_deref() == first_title
            }
            _ => true,
        };
        let done = parse::apply_fallback(raw, list, hint_score, winner_first);
        if done.fallback_applied {
            fallbacks += 1;
        }
        parsed.push(done);
    }
    let n = prompts.len().max(1) as f64;
    Ok((
        parsed,
        Rates {
            parse_failure_rate: failures as f64 / n,
            fallback_rate: fallbacks as f64 / n,
        },
    ))
}

fn rank_all(
    cfg: &RunConfig,
    prompts: &[PromptInstance],
    parsed: &[ParsedResult],
    lists: &[RankingList],
) -> Result<BTreeMap<UserId, Vec<ItemUtilities>>> {
    let mode = PairwiseMode::from_str(&cfg.ranker.pairwise_mode)?;
    let w = &cfg.ranker.weights;
    let mut out = BTreeMap::new();
    for list in lists {
        // collect this user's parsed results by kind
        let mut listwise: Option<&ParsedResult> = None;
        let mut point: BTreeMap<&ItemId, f64> = BTreeMap::new();
        let mut wins: BTreeMap<ItemId, usize> = BTreeMap::new();
        for (p, r) in prompts.iter().zip(parsed) {
            if p.user_id != list.user_id {
                continue;
            }
            match p.kind {
                PromptKind::Listwise => listwise = Some(r),
                PromptKind::Pointwise | PromptKind::PointwiseFix => {
                    if let (Some(item), Some(score)) = (p.payload.first(), r.score) {
                        point.insert(item, score);
                    }
                }
                PromptKind::Pairwise => {
                    if let ([a, b], Some(v)) = (&p.payload[..], r.verdict) {
                        let winner = if v == Verdict::Yes { a } else { b };
                        *wins.entry(winner.clone()).or_insert(0) += 1;
                    }
                }
            }
        }
        let llm_order: &[ItemId] = listwise
            .filter(|r| !r.ranking.is_empty())
            .map(|r| r.ranking.as_slice())
            .unwrap_or(&list.hint_order);
        let u_pair = ranker::utility_pairwise(&list.items, &wins, w.c2, mode);
        let mut inputs = Vec::new();
        for item in &list.items {
            let m = list
                .hint_order
                .iter()
                .position(|i| i == item)
                .expect("candidate in hint order")
                + 1;
            let m_prime = llm_order
                .iter()
                .position(|i| i == item)
                .map(|p| p + 1)
                .unwrap_or(list.items.len());
            let p_score = point.get(item).copied().unwrap_or(0.0);
            let u_point = if point.is_empty() {
                0.0
            } else {
                ranker::utility_pointwise(p_score, m, w.c1)
            };
            let u_list = ranker::utility_listwise(m_prime, w.c3);
            inputs.push((
                item.clone(),
                m,
                m_prime,
                u_point,
                u_pair[item],
                u_list,
            ));
        }
        out.insert(list.user_id.clone(), ranker::hybrid_combine(&inputs, w)?);
    }
    Ok(out)
}

fn evaluate(
    cfg: &RunConfig,
    lists: &[RankingList],
    rankings: &BTreeMap<UserId, Vec<ItemUtilities>>,
    split: &DatasetSplit,
    rates: &Rates,
) -> Result<(Vec<EvalReport>, String)> {
    let initial: BTreeMap<UserId, Vec<ItemId>> = lists
        .iter()
        .map(|l| (l.user_id.clone(), l.hint_order.clone()))
        .collect();
    let reranked: BTreeMap<UserId, Vec<ItemId>> = rankings
        .iter()
        .map(|(u, rows)| (u.clone(), rows.iter().map(|r| r.item_id.clone()).collect()))
        .collect();
    let (base, _) = eval::evaluate_method(
        "initial",
        &initial,
        &split.per_user_test_item,
        0.0,
        0.0,
    )?;
    let (rr, _) = eval::evaluate_method(
        "reranked",
        &reranked,
        &split.per_user_test_item,
        rates.parse_failure_rate,
        rates.fallback_rate,
    )?;
    let methods: Vec<MethodMetrics> = vec![base, rr];
    eval::aggregate_report(&methods, "initial", cfg.eval.alpha)
}
