//! Initial recommenders: MF, LightGCN, and XSimGCL, trained with BPR
//! (plus InfoNCE for XSimGCL) under a deterministic seeded schedule.

pub mod graph;
pub mod loss;
pub mod mat;

use crate::dataset::DatasetSplit;
use crate::error::{Error, Result};
use crate::ids::{ItemId, UserId};
use crate::sampling::UserEmbeddingTable;
use graph::BipartiteGraph;
use mat::{dot, Mat};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelTag {
    Mf,
    Lightgcn,
    Xsimgcl,
}

impl FromStr for ModelTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mf" => Ok(ModelTag::Mf),
            "lightgcn" => Ok(ModelTag::Lightgcn),
            "xsimgcl" => Ok(ModelTag::Xsimgcl),
            other => Err(Error::InvalidInput(format!("unknown model `{other}`"))),
        }
    }
}

impl std::fmt::Display for ModelTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelTag::Mf => "mf",
            ModelTag::Lightgcn => "lightgcn",
            ModelTag::Xsimgcl => "xsimgcl",
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub dim: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub negatives: usize,
    /// Propagation layers for graph models; ignored by MF.
    pub layers: usize,
    /// XSimGCL per-layer noise magnitude.
    pub noise_eps: f64,
    /// XSimGCL contrastive weight.
    pub contrast_lambda: f64,
    /// XSimGCL InfoNCE temperature.
    pub temperature: f64,
    /// Which noisy layer serves as the contrast view.
    pub contrast_layer: usize,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            learning_rate: 1e-3,
            epochs: 200,
            batch_size: 8192,
            negatives: 1,
            layers: 3,
            noise_eps: 0.1,
            contrast_lambda: 0.2,
            temperature: 0.2,
            contrast_layer: 1,
            weight_decay: 1e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.batch_size == 0 || self.negatives == 0 {
            return Err(Error::Config("dim, batch_size, negatives must be positive".into()));
        }
        if self.learning_rate <= 0.0 || self.temperature <= 0.0 {
            return Err(Error::Config("learning_rate and temperature must be positive".into()));
        }
        if self.contrast_lambda < 0.0 || self.noise_eps < 0.0 || self.weight_decay < 0.0 {
            return Err(Error::Config("lambda, eps, weight_decay must be >= 0".into()));
        }
        if self.contrast_layer > self.layers {
            return Err(Error::Config("contrast_layer must be <= layers".into()));
        }
        Ok(())
    }

    pub fn hash(&self) -> [u8; 32] {
        let text = toml::to_string(self).expect("config serialize");
        let mut h = Sha256::new();
        h.update(text.as_bytes());
        h.finalize().into()
    }
}

/// A trained model: dense user/item representations plus index maps.
#[derive(Clone, Debug)]
pub struct EmbeddingModel {
    pub tag: ModelTag,
    pub dim: usize,
    pub layers: usize,
    pub seed: u64,
    pub config_hash: [u8; 32],
    pub user_ids: Vec<UserId>,
    pub item_ids: Vec<ItemId>,
    user_index: HashMap<UserId, usize>,
    item_index: HashMap<ItemId, usize>,
    /// Final (post-propagation, noise-free) representations.
    pub user_final: Mat,
    pub item_final: Mat,
    /// Mean training loss per epoch, in order.
    pub epoch_losses: Vec<f64>,
}

impl EmbeddingModel {
    pub fn user_index_of(&self, user: &UserId) -> Result<usize> {
        self.user_index
            .get(user)
            .copied()
            .ok_or_else(|| Error::UnknownUser(user.to_string()))
    }

    pub fn user_vector(&self, user: &UserId) -> Result<&[f64]> {
        Ok(self.user_final.row(self.user_index_of(user)?))
    }

    pub fn item_vector(&self, item: &ItemId) -> Result<&[f64]> {
        let idx = self
            .item_index
            .get(item)
            .copied()
            .ok_or_else(|| Error::UnknownItem(item.to_string()))?;
        Ok(self.item_final.row(idx))
    }
}

fn build_indices(split: &DatasetSplit) -> (Vec<UserId>, Vec<ItemId>, Vec<(usize, usize)>) {
    let mut users: Vec<UserId> = split
        .train
        .iter()
        .map(|it| it.user_id.clone())
        .collect::<HashSet<_>>()
        .into_iter()
        .collect();
    users.sort();
    let mut items: Vec<ItemId> = split
        .train
        .iter()
        .map(|it| it.item_id.clone())
        .collect::<HashSet<_>>()
        .into_iter()
        .collect();
    items.sort();
    let uidx: HashMap<&UserId, usize> = users.iter().enumerate().map(|(i, u)| (u, i)).collect();
    let iidx: HashMap<&ItemId, usize> = items.iter().enumerate().map(|(i, x)| (x, i)).collect();
    let mut pairs: Vec<(usize, usize)> = split
        .train
        .iter()
        .map(|it| (uidx[&it.user_id], iidx[&it.item_id]))
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    (users, items, pairs)
}

fn init_embeddings(n: usize, dim: usize, rng: &mut ChaCha8Rng) -> Mat {
    let mut m = Mat::zeros(n, dim);
    for v in m.data.iter_mut() {
        *v = rng.gen_range(-0.1..0.1);
    }
    m
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(len: usize, lr: f64) -> Self {
        Adam {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - Self::BETA1.powi(self.t as i32);
        let bc2 = 1.0 - Self::BETA2.powi(self.t as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            let mh = *m / bc1;
            let vh = *v / bc2;
            *p -= self.lr * mh / (vh.sqrt() + Self::EPS);
        }
    }
}

/// Noise-free forward pass: mean of layers 0..=L, plus the per-layer map
/// used by hand-calculation tests.
fn propagate_final(base: &Mat, graph: &BipartiteGraph, layers: usize) -> Mat {
    let mut acc = base.clone();
    let mut x = base.clone();
    for _ in 0..layers {
        x = graph.propagate(&x);
        acc.add_assign(&x);
    }
    acc.scale(1.0 / (layers as f64 + 1.0));
    acc
}

/// Noisy forward pass for XSimGCL; returns (final, contrast-layer view).
/// With eps = 0 no randomness is consumed and the output equals the
/// noise-free pass.
fn propagate_noisy(
    base: &Mat,
    graph: &BipartiteGraph,
    layers: usize,
    eps: f64,
    contrast_layer: usize,
    rng: &mut ChaCha8Rng,
) -> (Mat, Mat) {
    let mut acc = base.clone();
    let mut x = base.clone();
    let mut contrast = base.clone();
    for l in 1..=layers {
        x = graph.propagate(&x);
        if eps > 0.0 {
            for r in 0..x.rows {
                let row = x.row_mut(r);
                let mut noise: Vec<f64> = (0..row.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let norm = noise.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                for (n, _) in noise.iter_mut().zip(0..) {
                    *n *= eps / norm;
                }
                for (xv, nv) in row.iter_mut().zip(&noise) {
                    *xv += nv;
                }
            }
        }
        acc.add_assign(&x);
        if l == contrast_layer {
            contrast = x.clone();
        }
    }
    acc.scale(1.0 / (layers as f64 + 1.0));
    (acc, contrast)
}

/// Backward map for the mean-of-layers forward: sum_l A^l g / (L+1).
fn backward_mean_layers(g: &Mat, graph: &BipartiteGraph, layers: usize) -> Mat {
    let mut acc = g.clone();
    let mut x = g.clone();
    for _ in 0..layers {
        x = graph.propagate(&x);
        acc.add_assign(&x);
    }
    acc.scale(1.0 / (layers as f64 + 1.0));
    acc
}

fn backward_single_layer(g: &Mat, graph: &BipartiteGraph, layer: usize) -> Mat {
    let mut x = g.clone();
    for _ in 0..layer {
        x = graph.propagate(&x);
    }
    x
}

pub fn train_mf(split: &DatasetSplit, cfg: &TrainConfig) -> Result<EmbeddingModel> {
    train(split, cfg, ModelTag::Mf)
}

pub fn train_lightgcn(split: &DatasetSplit, cfg: &TrainConfig) -> Result<EmbeddingModel> {
    train(split, cfg, ModelTag::Lightgcn)
}

pub fn train_xsimgcl(split: &DatasetSplit, cfg: &TrainConfig) -> Result<EmbeddingModel> {
    train(split, cfg, ModelTag::Xsimgcl)
}

pub fn train(split: &DatasetSplit, cfg: &TrainConfig, tag: ModelTag) -> Result<EmbeddingModel> {
    cfg.validate()?;
    if split.train.is_empty() {
        return Err(Error::InvalidInput("empty train split".into()));
    }
    let (users, items, pairs) = build_indices(split);
    let nu = users.len();
    let ni = items.len();
    let dim = cfg.dim;

    let graph = match tag {
        ModelTag::Mf => None,
        _ => Some(BipartiteGraph::new(nu, ni, &pairs)?),
    };

    let mut seen: Vec<HashSet<usize>> = vec![HashSet::new(); nu];
    for &(u, i) in &pairs {
        seen[u].insert(i);
    }

    // Separate streams so optional stages (noise) cannot shift others.
    let mut rng_init = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rng_train = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5bd1e995));
    let mut rng_noise = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x9e3779b9));

    let mut base = init_embeddings(nu + ni, dim, &mut rng_init);
    let mut adam = Adam::new(base.data.len(), cfg.learning_rate);
    let use_contrast = tag == ModelTag::Xsimgcl && cfg.contrast_lambda > 0.0;
    let layers = if tag == ModelTag::Mf { 0 } else { cfg.layers };

    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng_train);
        let mut epoch_loss = 0.0;
        let mut n_terms = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            // forward
            let (final_emb, contrast_emb) = match (&graph, tag) {
                (None, _) => (base.clone(), None),
                (Some(g), ModelTag::Xsimgcl) => {
                    let eps = cfg.noise_eps;
                    let (f, c) =
                        propagate_noisy(&base, g, layers, eps, cfg.contrast_layer, &mut rng_noise);
                    (f, if use_contrast { Some(c) } else { None })
                }
                (Some(g), _) => (propagate_final(&base, g, layers), None),
            };

            let mut grad_final = Mat::zeros(nu + ni, dim);
            let mut batch_loss = 0.0;
            let mut batch_terms = 0usize;
            let mut batch_users: Vec<usize> = Vec::with_capacity(chunk.len());
            let mut batch_items: Vec<usize> = Vec::with_capacity(chunk.len());
            for &pi in chunk {
                let (u, i) = pairs[pi];
                batch_users.push(u);
                batch_items.push(i);
                for _ in 0..cfg.negatives {
                    // rejection-sample an unobserved item
                    let j = loop {
                        let cand = rng_train.gen_range(0..ni);
                        if !seen[u].contains(&cand) {
                            break cand;
                        }
                        if seen[u].len() == ni {
                            return Err(Error::InvalidInput(format!(
                                "user {} has interacted with every item; no negatives",
                                users[u]
                            )));
                        }
                    };
                    let (l, gu, gi, gj) = loss::bpr_loss_and_grad(
                        final_emb.row(u),
                        final_emb.row(nu + i),
                        final_emb.row(nu + j),
                    );
                    batch_loss += l;
                    batch_terms += 1;
                    for c in 0..dim {
                        grad_final.data[u * dim + c] += gu[c];
                        grad_final.data[(nu + i) * dim + c] += gi[c];
                        grad_final.data[(nu + j) * dim + c] += gj[c];
                    }
                }
            }
            let scale = 1.0 / batch_terms as f64;
            grad_final.scale(scale);
            let mut total_loss = batch_loss * scale;

            // contrastive term between final and contrast views
            let mut grad_contrast: Option<Mat> = None;
            if use_contrast {
                let contrast = contrast_emb.as_ref().expect("contrast view present");
                let mut gc = Mat::zeros(nu + ni, dim);
                let mut cl_total = 0.0;
                for (nodes, offset) in [(&batch_users, 0usize), (&batch_items, nu)] {
                    let mut uniq: Vec<usize> = nodes.clone();
                    uniq.sort_unstable();
                    uniq.dedup();
                    if uniq.len() < 2 {
                        continue;
                    }
                    let anchors: Vec<Vec<f64>> = uniq
                        .iter()
                        .map(|&n| final_emb.row(offset + n).to_vec())
                        .collect();
                    let positives: Vec<Vec<f64>> = uniq
                        .iter()
                        .map(|&n| contrast.row(offset + n).to_vec())
                        .collect();
                    let (cl, ga, gb) =
                        loss::infonce_loss_and_grad(&anchors, &positives, cfg.temperature);
                    cl_total += cl;
                    for (k, &n) in uniq.iter().enumerate() {
                        for c in 0..dim {
                            grad_final.data[(offset + n) * dim + c] +=
                                cfg.contrast_lambda * ga[k][c];
                            gc.data[(offset + n) * dim + c] += cfg.contrast_lambda * gb[k][c];
                        }
                    }
                }
                total_loss += cfg.contrast_lambda * cl_total;
                grad_contrast = Some(gc);
            }

            // backward to the base embeddings
            let mut grad_base = match &graph {
                None => grad_final,
                Some(g) => {
                    let mut gb = backward_mean_layers(&grad_final, g, layers);
                    if let Some(gc) = grad_contrast {
                        gb.add_assign(&backward_single_layer(&gc, g, cfg.contrast_layer));
                    }
                    gb
                }
            };
            if cfg.weight_decay > 0.0 {
                for (g, p) in grad_base.data.iter_mut().zip(&base.data) {
                    *g += cfg.weight_decay * p;
                }
            }
            adam.step(&mut base.data, &grad_base.data);

            if !total_loss.is_finite() || !base.is_finite() {
                return Err(Error::Diverged(format!(
                    "non-finite loss or embeddings at epoch {epoch}"
                )));
            }
            epoch_loss += total_loss * batch_terms as f64;
            n_terms += batch_terms;
        }
        epoch_losses.push(epoch_loss / n_terms.max(1) as f64);
    }

    // final noise-free representations
    let final_emb = match &graph {
        None => base.clone(),
        Some(g) => propagate_final(&base, g, layers),
    };
    let mut user_final = Mat::zeros(nu, dim);
    let mut item_final = Mat::zeros(ni, dim);
    user_final.data.copy_from_slice(&final_emb.data[..nu * dim]);
    item_final.data.copy_from_slice(&final_emb.data[nu * dim..]);

    Ok(EmbeddingModel {
        tag,
        dim,
        layers,
        seed: cfg.seed,
        config_hash: cfg.hash(),
        user_index: users.iter().cloned().enumerate().map(|(i, u)| (u, i)).collect(),
        item_index: items.iter().cloned().enumerate().map(|(i, x)| (x, i)).collect(),
        user_ids: users,
        item_ids: items,
        user_final,
        item_final,
        epoch_losses,
    })
}

/// score(u, i) = dot(final user vector, final item vector), for all items.
pub fn predict_scores(model: &EmbeddingModel, user: &UserId) -> Result<Vec<(ItemId, f64)>> {
    let uv = model.user_vector(user)?;
    Ok(model
        .item_ids
        .iter()
        .enumerate()
        .map(|(i, item)| (item.clone(), dot(uv, model.item_final.row(i))))
        .collect())
}

/// Top-k unseen items in descending score order; ties break by ascending
/// item id so runs reproduce byte for byte.
pub fn top_k_unseen(
    model: &EmbeddingModel,
    user: &UserId,
    k: usize,
    seen: &HashSet<ItemId>,
) -> Result<Vec<ItemId>> {
    let mut scored: Vec<(ItemId, f64)> = predict_scores(model, user)?
        .into_iter()
        .filter(|(item, _)| !seen.contains(item))
        .collect();
    if k > scored.len() {
        return Err(Error::InvalidInput(format!(
            "k={} exceeds {} unseen items for user {user}",
            k,
            scored.len()
        )));
    }
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("finite scores")
            .then_with(|| a.0.cmp(&b.0))
    });
    Ok(scored.into_iter().take(k).map(|(item, _)| item).collect())
}

/// L2-normalized final user vectors, ready for clustering.
pub fn export_user_embeddings(model: &EmbeddingModel) -> UserEmbeddingTable {
    let mut table = UserEmbeddingTable::new();
    for (i, u) in model.user_ids.iter().enumerate() {
        table
            .insert(u.clone(), model.user_final.row(i).to_vec())
            .expect("finite trained embeddings");
    }
    table.l2_normalized()
}

// --- model artifact (little-endian binary layout) ---------------------
//
//   magic "RRKM" | version u32 | tag u8 | dim u32 | layers u32 | seed u64
//   | config_hash [32]u8 | n_users u64 | n_items u64
//   | user ids (u32 len + utf8) * n_users | item ids likewise
//   | user matrix f64-LE row-major | item matrix f64-LE row-major

const MAGIC: &[u8; 4] = b"RRKM";
const VERSION: u32 = 1;

pub fn save_model(model: &EmbeddingModel, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?,
    );
    let io_err = |e: std::io::Error| Error::io(path.display().to_string(), e);
    out.write_all(MAGIC).map_err(io_err)?;
    out.write_all(&VERSION.to_le_bytes()).map_err(io_err)?;
    let tag = match model.tag {
        ModelTag::Mf => 0u8,
        ModelTag::Lightgcn => 1,
        ModelTag::Xsimgcl => 2,
    };
    out.write_all(&[tag]).map_err(io_err)?;
    out.write_all(&(model.dim as u32).to_le_bytes()).map_err(io_err)?;
    out.write_all(&(model.layers as u32).to_le_bytes()).map_err(io_err)?;
    out.write_all(&model.seed.to_le_bytes()).map_err(io_err)?;
    out.write_all(&model.config_hash).map_err(io_err)?;
    out.write_all(&(model.user_ids.len() as u64).to_le_bytes()).map_err(io_err)?;
    out.write_all(&(model.item_ids.len() as u64).to_le_bytes()).map_err(io_err)?;
    for id in &model.user_ids {
        let b = id.as_str().as_bytes();
        out.write_all(&(b.len() as u32).to_le_bytes()).map_err(io_err)?;
        out.write_all(b).map_err(io_err)?;
    }
    for id in &model.item_ids {
        let b = id.as_str().as_bytes();
        out.write_all(&(b.len() as u32).to_le_bytes()).map_err(io_err)?;
        out.write_all(b).map_err(io_err)?;
    }
    for v in model.user_final.data.iter().chain(&model.item_final.data) {
        out.write_all(&v.to_le_bytes()).map_err(io_err)?;
    }
    Ok(())
}

pub fn load_model(path: &Path) -> Result<EmbeddingModel> {
    let mut file =
        std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let io_err = |e: std::io::Error| Error::io(path.display().to_string(), e);
    let bad = |m: &str| Error::InvalidInput(format!("{}: {m}", path.display()));

    let mut buf = Vec::new();
    file.read_to_end(&mut buf).map_err(io_err)?;
    let mut pos = 0usize;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
        if *pos + n > buf.len() {
            return Err(bad("truncated model artifact"));
        }
        let s = &buf[*pos..*pos + n];
        *pos += n;
        Ok(s)
    };
    if take(&mut pos, 4)? != MAGIC {
        return Err(bad("bad magic"));
    }
    let version = u32::from_le_bytes(take(&mut pos, 4)?.try_into().expect("len 4"));
    if version != VERSION {
        return Err(bad(&format!("unsupported artifact version {version}")));
    }
    let tag = match take(&mut pos, 1)?[0] {
        0 => ModelTag::Mf,
        1 => ModelTag::Lightgcn,
        2 => ModelTag::Xsimgcl,
        t => return Err(bad(&format!("unknown model tag byte {t}"))),
    };
    let dim = u32::from_le_bytes(take(&mut pos, 4)?.try_into().expect("len 4")) as usize;
    let layers = u32::from_le_bytes(take(&mut pos, 4)?.try_into().expect("len 4")) as usize;
    let seed = u64::from_le_bytes(take(&mut pos, 8)?.try_into().expect("len 8"));
    let config_hash: [u8; 32] = take(&mut pos, 32)?.try_into().expect("len 32");
    let nu = u64::from_le_bytes(take(&mut pos, 8)?.try_into().expect("len 8")) as usize;
    let ni = u64::from_le_bytes(take(&mut pos, 8)?.try_into().expect("len 8")) as usize;

    let read_ids = |pos: &mut usize, n: usize| -> Result<Vec<String>> {
        let mut ids = Vec::with_capacity(n);
        for _ in 0..n {
            let len = u32::from_le_bytes(take(pos, 4)?.try_into().expect("len 4")) as usize;
            let s = std::str::from_utf8(take(pos, len)?)
                .map_err(|_| bad("invalid utf8 in id"))?
                .to_owned();
            ids.push(s);
        }
        Ok(ids)
    };
    let user_ids: Vec<UserId> = read_ids(&mut pos, nu)?.into_iter().map(UserId::new).collect();
    let item_ids: Vec<ItemId> = read_ids(&mut pos, ni)?.into_iter().map(ItemId::new).collect();

    let read_mat = |pos: &mut usize, rows: usize| -> Result<Mat> {
        let mut m = Mat::zeros(rows, dim);
        for v in m.data.iter_mut() {
            *v = f64::from_le_bytes(take(pos, 8)?.try_into().expect("len 8"));
        }
        Ok(m)
    };
    let user_final = read_mat(&mut pos, nu)?;
    let item_final = read_mat(&mut pos, ni)?;

    Ok(EmbeddingModel {
        tag,
        dim,
        layers,
        seed,
        config_hash,
        user_index: user_ids.iter().cloned().enumerate().map(|(i, u)| (u, i)).collect(),
        item_index: item_ids.iter().cloned().enumerate().map(|(i, x)| (x, i)).collect(),
        user_ids,
        item_ids,
        user_final,
        item_final,
        epoch_losses: Vec::new(),
    })
}
