//! Command-line front end for the recrank pipeline. Subcommands mirror the
//! pipeline stages so any step can be run and inspected in isolation;
//! `run` executes the whole cached pipeline from a TOML config.

use clap::{Parser, Subcommand};
use recrank_core::dataset::{self, DatasetFormat, DatasetSplit};
use recrank_core::error::Error;
use recrank_core::eval;
use recrank_core::gateway::{self, BackendConfig, BackendKind, GenerationParams};
use recrank_core::pipeline::{self, RunConfig};
use recrank_core::prompt::{self, PromptConfig, PromptInstance, PromptKind};
use recrank_core::ranklist::{self, Phase};
use recrank_core::recommender::{self, ModelTag, TrainConfig};
use recrank_core::sampling::{self, SamplingPlan, SamplingStrategy, UserEmbeddingTable};
use recrank_core::{ItemId, UserId};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

#[derive(Parser)]
#[command(name = "recrank", version, about = "LLM-reranked top-k recommendation pipeline")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Clean raw interactions into a canonical temporal split.
    PrepareData {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "generic-tsv")]
        format: String,
        #[arg(long, default_value_t = 10)]
        k_core: usize,
        #[arg(long, default_value_t = false)]
        simulate_timestamps: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for train.tsv, test.tsv, catalog.tsv, stats.toml.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train an initial recommender on a prepared split.
    TrainRecommender {
        /// Directory produced by prepare-data.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "mf")]
        model: String,
        #[arg(long, default_value_t = 64)]
        dim: usize,
        #[arg(long, default_value_t = 200)]
        epochs: usize,
        #[arg(long, default_value_t = 3)]
        layers: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for model.bin and user_embeddings.tsv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw training users from a prepared split.
    SampleUsers {
        #[arg(long)]
        data: PathBuf,
        /// user_embeddings.tsv from train-recommender (clustering strategies).
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long, default_value = "composite")]
        strategy: String,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 0.9)]
        penalty_c: f64,
        #[arg(long, default_value_t = 10)]
        kmeans_k: usize,
        #[arg(long, default_value_t = 0.5)]
        dbscan_eps: f64,
        #[arg(long, default_value_t = 5)]
        dbscan_min_pts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render prompts for pre-built ranking lists.
    GenPrompts {
        #[arg(long)]
        kind: String,
        /// Only lists of this phase are used: train or infer.
        #[arg(long, default_value = "infer")]
        phase: String,
        #[arg(long)]
        lists: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// model.bin; required for pointwise hint scores on inference lists.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Send a prompt file to a backend and record responses + transcripts.
    Complete {
        #[arg(long)]
        prompts: PathBuf,
        #[arg(long, default_value = "mock-echo-hint")]
        backend: String,
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long, default_value_t = 8)]
        concurrency: usize,
        /// Replay from a transcript log instead of contacting a backend.
        #[arg(long)]
        replay: Option<PathBuf>,
        /// Prepared data dir; required by the oracle mock.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        transcripts: PathBuf,
    },
    /// Score ranked lists against held-out items.
    Evaluate {
        /// rankings.tsv from the rank stage.
        #[arg(long)]
        rankings: PathBuf,
        /// Canonical test split holding one item per user.
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Execute the full cached pipeline from a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the pipeline once per value of a varied config key.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Dotted key and comma-separated values, e.g. ranker.c1=0.05,0.1,0.2
        #[arg(long)]
        vary: String,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::InvalidInput(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}

fn load_split(dir: &Path) -> recrank_core::Result<(DatasetSplit, dataset::Catalog)> {
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

fn write_jsonl<T: serde::Serialize>(path: &Path, rows: &[T]) -> recrank_core::Result<()> {
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

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> recrank_core::Result<Vec<T>> {
    use std::io::BufRead;
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

fn mkdir(dir: &Path) -> recrank_core::Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))
}

fn dispatch(cmd: Cmd) -> recrank_core::Result<()> {
    match cmd {
        Cmd::PrepareData {
            input,
            format,
            k_core,
            simulate_timestamps,
            seed,
            out,
        } => {
            let format = DatasetFormat::from_str(&format)?;
            let (rows, mut catalog) = dataset::load_raw(&input, format)?;
            let rows = dataset::dedup_keep_latest(rows);
            let rows = if k_core > 1 {
                dataset::k_core_filter(&rows, k_core)
            } else {
                rows
            };
            if rows.is_empty() {
                return Err(Error::InvalidInput(
                    "no interactions survive filtering".into(),
                ));
            }
            let rows = if simulate_timestamps || !format.has_timestamps() {
                dataset::simulate_timestamps(&rows, seed, simulate_timestamps)?
            } else {
                rows
            };
            catalog.backfill(&rows);
            let split = dataset::temporal_split(&rows)?;
            mkdir(&out)?;
            dataset::write_canonical(&out.join("train.tsv"), &split.train)?;
            dataset::write_canonical(&out.join("test.tsv"), &split.test)?;
            dataset::write_catalog(&out.join("catalog.tsv"), &catalog)?;
            let stats = dataset::compute_stats(&rows);
            dataset::write_stats(&out.join("stats.toml"), &stats)?;
            println!(
                "prepared {} interactions ({} users, {} items) -> {}",
                split.train.len() + split.test.len(),
                stats.n_users,
                stats.n_items,
                out.display()
            );
            Ok(())
        }
        Cmd::TrainRecommender {
            data,
            model,
            dim,
            epochs,
            layers,
            seed,
            out,
        } => {
            let (split, _) = load_split(&data)?;
            let tag = ModelTag::from_str(&model)?;
            let cfg = TrainConfig {
                dim,
                epochs,
                layers,
                seed,
                ..TrainConfig::default()
            };
            let trained = recommender::train(&split, &cfg, tag)?;
            mkdir(&out)?;
            recommender::save_model(&trained, &out.join("model.bin"))?;
            recommender::export_user_embeddings(&trained)
                .write_tsv(&out.join("user_embeddings.tsv"))?;
            let last = trained.epoch_losses.last().copied().unwrap_or(f64::NAN);
            println!("trained {model} for {epochs} epochs, final loss {last:.6}");
            Ok(())
        }
        Cmd::SampleUsers {
            data,
            embeddings,
            strategy,
            n,
            penalty_c,
            kmeans_k,
            dbscan_eps,
            dbscan_min_pts,
            seed,
            out,
        } => {
            let (split, _) = load_split(&data)?;
            let plan = SamplingPlan {
                strategy: SamplingStrategy::from_str(&strategy)?,
                n_samples: n,
                penalty_c,
                kmeans_k,
                dbscan_eps,
                dbscan_min_pts,
                seed,
            };
            plan.validate()?;
            let mut counts: BTreeMap<UserId, usize> = BTreeMap::new();
            for it in &split.train {
                *counts.entry(it.user_id.clone()).or_insert(0) += 1;
            }
            let users: Vec<UserId> = counts.keys().cloned().collect();
            let need_embeddings = matches!(
                plan.strategy,
                SamplingStrategy::Kmeans | SamplingStrategy::Dbscan | SamplingStrategy::Composite
            );
            let table = match (&embeddings, need_embeddings) {
                (Some(p), _) => UserEmbeddingTable::read_tsv(p)?,
                (None, true) => {
                    return Err(Error::Config(format!(
                        "strategy {strategy} requires --embeddings"
                    )))
                }
                (None, false) => UserEmbeddingTable::new(),
            };
            let sampled = match plan.strategy {
                SamplingStrategy::Importance => {
                    let probs = sampling::importance_probabilities(&counts)?;
                    let mut rng =
                        <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(plan.seed);
                    sampling::weighted_sample(&probs, plan.n_samples, &mut rng)
                }
                SamplingStrategy::Kmeans => {
                    let labels = sampling::kmeans_cluster(&table, plan.kmeans_k, plan.seed)?;
                    sampling::cluster_proportional_sample(&labels, plan.n_samples, plan.seed)?
                }
                SamplingStrategy::Dbscan => {
                    let labels =
                        sampling::dbscan_cluster(&table, plan.dbscan_eps, plan.dbscan_min_pts)?;
                    sampling::cluster_proportional_sample(&labels, plan.n_samples, plan.seed)?
                }
                SamplingStrategy::Random => sampling::random_sample(&users, plan.n_samples, plan.seed)?,
                SamplingStrategy::Composite => {
                    let labels = sampling::kmeans_cluster(&table, plan.kmeans_k, plan.seed)?;
                    sampling::composite_sample(&counts, &labels, &plan)?
                }
            };
            sampled.write_tsv(&out)?;
            println!(
                "sampled {} draws ({} distinct users) -> {}",
                sampled.draws.len(),
                sampled.multiplicity().len(),
                out.display()
            );
            Ok(())
        }
        Cmd::GenPrompts {
            kind,
            phase,
            lists,
            data,
            model,
            seed,
            out,
        } => {
            let kind = PromptKind::from_str(&kind)?;
            let phase = match phase.as_str() {
                "train" => Phase::Train,
                "infer" => Phase::Infer,
                other => return Err(Error::Config(format!("unknown phase `{other}`"))),
            };
            let (split, catalog) = load_split(&data)?;
            let all_lists = ranklist::read_lists(&lists)?;
            let lists: Vec<_> = all_lists.into_iter().filter(|l| l.phase == phase).collect();
            if lists.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "no {phase:?} lists in input file"
                )));
            }
            let trained = model
                .map(|p| recommender::load_model(&p))
                .transpose()?;
            let pcfg = PromptConfig::default();
            let mut instances = Vec::new();
            for list in &lists {
                let scale = dataset::RatingScale::OneToFive;
                let history =
                    prompt::sample_history(&split, &list.user_id, scale, pcfg.history_max, seed);
                match kind {
                    PromptKind::Listwise => {
                        instances.push(prompt::build_listwise_prompt(
                            list, &history, &catalog, &pcfg,
                        )?);
                    }
                    PromptKind::Pointwise | PromptKind::PointwiseFix => {
                        let fix = kind == PromptKind::PointwiseFix;
                        let ratings: BTreeMap<&ItemId, f64> = split
                            .train
                            .iter()
                            .filter(|it| it.user_id == list.user_id)
                            .map(|it| (&it.item_id, it.rating))
                            .collect();
                        let scores: Option<Vec<f64>> = match &trained {
                            Some(m) => Some(pipeline::hint_scores(m, &list.user_id, &list.items)?),
                            None => None,
                        };
                        for (idx, item) in list.items.iter().enumerate() {
                            let gold = if list.phase == Phase::Train {
                                Some(ratings.get(item).copied().unwrap_or(1.0))
                            } else {
                                None
                            };
                            let hint = if fix {
                                None
                            } else {
                                match &scores {
                                    Some(s) => Some(s[idx]),
                                    // without a model, fall back to the gold
                                    // rating as the hint on train lists
                                    None => gold,
                                }
                            };
                            if hint.is_none() && !fix {
                                return Err(Error::Config(
                                    "pointwise prompts need --model for hint scores".into(),
                                ));
                            }
                            instances.push(prompt::build_pointwise_prompt(
                                &list.user_id,
                                item,
                                &history,
                                &catalog,
                                &pcfg,
                                hint,
                                fix,
                                gold,
                            )?);
                        }
                    }
                    PromptKind::Pairwise => {
                        for (a, b) in prompt::schedule_pairs(list, prompt::PairSchedule::Adjacent) {
                            let gold = if list.phase == Phase::Train {
                                let pos = |i: &ItemId| {
                                    list.gold_order.iter().position(|g| g == i)
                                };
                                match (pos(&a), pos(&b)) {
                                    (Some(x), Some(y)) => Some(x < y),
                                    _ => None,
                                }
                            } else {
                                None
                            };
                            instances.push(prompt::build_pairwise_prompt(
                                &list.user_id,
                                &a,
                                &b,
                                &history,
                                &catalog,
                                &pcfg,
                                &a,
                                gold,
                            )?);
                        }
                    }
                }
            }
            let lint = prompt::lint_leakage(&instances);
            write_jsonl(&out, &instances)?;
            println!(
                "wrote {} prompts -> {} (hint-leak rate {:.3})",
                instances.len(),
                out.display(),
                lint.leak_rate()
            );
            Ok(())
        }
        Cmd::Complete {
            prompts,
            backend,
            endpoint,
            model,
            concurrency,
            replay,
            data,
            out,
            transcripts,
        } => {
            let instances: Vec<PromptInstance> = read_jsonl(&prompts)?;
            let cfg = BackendConfig {
                kind: BackendKind::from_str(&backend)?,
                endpoint,
                model,
                concurrency,
                replay: replay.map(|p| p.display().to_string()),
                ..BackendConfig::default()
            };
            cfg.validate()?;
            let backend: Box<dyn gateway::Backend> = if let Some(r) = &cfg.replay {
                Box::new(gateway::ReplayBackend::from_log(Path::new(r))?)
            } else {
                match cfg.kind {
                    BackendKind::HttpChat => Box::new(gateway::HttpChatBackend::new(cfg.clone())?),
                    BackendKind::MockEchoHint => Box::new(gateway::EchoHintBackend),
                    BackendKind::MockOracle => {
                        let dir = data.ok_or_else(|| {
                            Error::Config("mock-oracle requires --data".into())
                        })?;
                        let (split, catalog) = load_split(&dir)?;
                        Box::new(gateway::OracleBackend {
                            fixture: gateway::OracleFixture {
                                test_item: split.per_user_test_item.clone(),
                                ratings: split
                                    .train
                                    .iter()
                                    .map(|it| {
                                        ((it.user_id.clone(), it.item_id.clone()), it.rating)
                                    })
                                    .collect(),
                                catalog,
                            },
                        })
                    }
                    BackendKind::MockScripted => {
                        return Err(Error::Config(
                            "mock-scripted is only available through run configs".into(),
                        ))
                    }
                }
            };
            let params = GenerationParams::default();
            let (results, records) =
                gateway::batch_complete(&instances, &params, backend.as_ref(), cfg.concurrency)?;
            #[derive(serde::Serialize)]
            struct Row {
                index: usize,
                ok: bool,
                text: String,
            }
            let rows: Vec<Row> = results
                .iter()
                .enumerate()
                .map(|(index, r)| match r {
                    Ok(text) => Row {
                        index,
                        ok: true,
                        text: text.clone(),
                    },
                    Err(e) => Row {
                        index,
                        ok: false,
                        text: e.to_string(),
                    },
                })
                .collect();
            write_jsonl(&out, &rows)?;
            gateway::append_transcripts(&transcripts, &records)?;
            let failed = rows.iter().filter(|r| !r.ok).count();
            println!(
                "completed {}/{} prompts -> {}",
                rows.len() - failed,
                rows.len(),
                out.display()
            );
            Ok(())
        }
        Cmd::Evaluate {
            rankings,
            truth,
            alpha,
            out,
        } => {
            let ranked = recrank_core::ranker::read_rankings(&rankings)?;
            let test = dataset::read_canonical(&truth)?;
            let truth: BTreeMap<UserId, ItemId> = test
                .iter()
                .map(|it| (it.user_id.clone(), it.item_id.clone()))
                .collect();
            let order: BTreeMap<UserId, Vec<ItemId>> = ranked
                .iter()
                .map(|(u, rows)| (u.clone(), rows.iter().map(|r| r.item_id.clone()).collect()))
                .collect();
            let initial: BTreeMap<UserId, Vec<ItemId>> = ranked
                .iter()
                .map(|(u, rows)| {
                    let mut by_m: Vec<_> = rows.iter().collect();
                    by_m.sort_by_key(|r| r.m);
                    (u.clone(), by_m.iter().map(|r| r.item_id.clone()).collect())
                })
                .collect();
            let (base, _) = eval::evaluate_method("initial", &initial, &truth, 0.0, 0.0)?;
            let (rr, _) = eval::evaluate_method("reranked", &order, &truth, 0.0, 0.0)?;
            let (reports, table) = eval::aggregate_report(&[base, rr], "initial", alpha)?;
            eval::write_reports(&out, &reports)?;
            println!("{table}");
            Ok(())
        }
        Cmd::Run { config } => {
            let cfg = pipeline::load_config(&config)?;
            if let Err(errors) = pipeline::validate_config(&cfg) {
                for e in &errors {
                    eprintln!("config: {e}");
                }
                return Err(Error::Config(format!(
                    "{} validation error(s)",
                    errors.len()
                )));
            }
            let (manifest, _, table) = pipeline::run_pipeline(&cfg)?;
            for s in &manifest.stages {
                println!(
                    "stage {:<10} {} {}",
                    s.name,
                    &s.key[..16],
                    if s.cached { "(cached)" } else { "" }
                );
            }
            println!("{table}");
            Ok(())
        }
        Cmd::Sweep { config, vary } => {
            let (key, values) = vary
                .split_once('=')
                .ok_or_else(|| Error::Config("--vary expects key=v1,v2,...".into()))?;
            let text = std::fs::read_to_string(&config)
                .map_err(|e| Error::io(config.display().to_string(), e))?;
            let base: toml::Value = text
                .parse()
                .map_err(|e| Error::Config(format!("{}: {e}", config.display())))?;
            for value in values.split(',') {
                let mut doc = base.clone();
                set_key(&mut doc, key, value)?;
                let cfg: RunConfig = doc
                    .try_into()
                    .map_err(|e| Error::Config(format!("sweep {key}={value}: {e}")))?;
                let (_, reports, _) = pipeline::run_pipeline(&cfg)?;
                for r in &reports {
                    let vals: Vec<String> = eval::METRIC_NAMES
                        .iter()
                        .map(|m| format!("{m}={:.4}", r.values[*m]))
                        .collect();
                    println!("{key}={value} {}: {}", r.label, vals.join(" "));
                }
            }
            Ok(())
        }
    }
}

/// Sets a dotted key inside a TOML document, parsing the value as TOML
/// (so numbers and booleans keep their types) with a string fallback.
fn set_key(doc: &mut toml::Value, key: &str, raw: &str) -> recrank_core::Result<()> {
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        node = node
            .get_mut(part)
            .ok_or_else(|| Error::Config(format!("unknown config table `{part}`")))?;
    }
    let leaf = parts.last().expect("nonempty key");
    let table = node
        .as_table_mut()
        .ok_or_else(|| Error::Config(format!("`{key}` does not address a table entry")))?;
    let parsed: toml::Value = raw
        .parse()
        .unwrap_or_else(|_| toml::Value::String(raw.to_string()));
    table.insert(leaf.to_string(), parsed);
    Ok(())
}
