//! Alternating online SGD on `J = S_K + α·S_A`.
//!
//! Each epoch runs a group of per-triple knowledge steps over every
//! language, then a group of per-pair alignment steps over every alignment
//! set. Entity vectors are projected back onto the unit sphere after each
//! update that moves them; relation vectors, translation vectors and
//! matrices are left unconstrained.

use std::fmt;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::alignment::{self, AlignmentGrad};
use crate::embedding::{self, init_model, EmbeddingSpace, MatrixKind, Model, Variant};
use crate::error::{Error, Result};
use crate::kg::{KnowledgeGraph, LanguagePair, MultilingualKb, Triple};
use crate::knowledge::{self, NormOrder};
use crate::linalg;
use crate::seed::{self, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub variant: Variant,
    pub k: usize,
    pub lambda: f64,
    pub alpha: f64,
    pub norm: NormOrder,
    pub epochs: usize,
    pub seed: u64,
    pub shuffle: bool,
    /// Full passes over the triples in each epoch's knowledge group.
    pub knowledge_passes: usize,
    /// Full passes over the alignment sets in each epoch's alignment group.
    /// Zero disables alignment training.
    pub alignment_passes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            variant: Variant::Var4,
            k: 75,
            lambda: 0.01,
            alpha: 5.0,
            norm: NormOrder::L2,
            epochs: 100,
            seed: 0,
            shuffle: true,
            knowledge_passes: 1,
            alignment_passes: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.k == 0 {
            return fail("k must be at least 1".into());
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return fail(format!("learning rate must be positive, got {}", self.lambda));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return fail(format!("alpha must be non-negative, got {}", self.alpha));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochReport {
    pub epoch: usize,
    pub mean_knowledge_score: f64,
    pub mean_alignment_score: f64,
    pub max_entity_norm_drift: f64,
    pub wall_time: Duration,
}

impl fmt::Display for EpochReport {
    /// `epoch<TAB>S_K_mean<TAB>S_A_mean<TAB>wall_ms`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{:.6}\t{:.6}\t{}",
            self.epoch,
            self.mean_knowledge_score,
            self.mean_alignment_score,
            self.wall_time.as_millis()
        )
    }
}

fn axpy_project<R: Rng>(v: &mut [f64], scale: f64, g: &[f64], project: bool, rng: &mut R) {
    if g.iter().all(|&x| x == 0.0) || scale == 0.0 {
        return;
    }
    v.iter_mut().zip(g).for_each(|(a, b)| *a -= scale * b);
    if project && embedding::normalize_in_place(v).is_err() {
        let fresh = linalg::random_unit_vector(rng, v.len());
        v.copy_from_slice(&fresh);
    }
}

/// One SGD step on the TransE score of `triple`. Head and tail are
/// re-projected to the sphere, the relation is not. Zero vectors produced
/// by the step are redrawn from `rng`.
pub fn sgd_step_knowledge<R: Rng>(
    space: &mut EmbeddingSpace,
    triple: Triple,
    lambda: f64,
    norm: NormOrder,
    rng: &mut R,
) {
    let g = knowledge::triple_grad(space, triple, norm);
    if triple.head == triple.tail {
        // d_h = −d_t, so the entity does not move
        axpy_project(space.relation_mut(triple.relation), lambda, &g.d_r, false, rng);
        return;
    }
    axpy_project(space.entity_mut(triple.head), lambda, &g.d_h, true, rng);
    axpy_project(space.relation_mut(triple.relation), lambda, &g.d_r, false, rng);
    axpy_project(space.entity_mut(triple.tail), lambda, &g.d_t, true, rng);
}

fn apply_side<R: Rng>(space: &mut EmbeddingSpace, t: Triple, g: &[Vec<f64>; 3], scale: f64, rng: &mut R) {
    if t.head == t.tail {
        let summed: Vec<f64> = g[0].iter().zip(&g[2]).map(|(a, b)| a + b).collect();
        axpy_project(space.entity_mut(t.head), scale, &summed, true, rng);
    } else {
        axpy_project(space.entity_mut(t.head), scale, &g[0], true, rng);
        axpy_project(space.entity_mut(t.tail), scale, &g[2], true, rng);
    }
    axpy_project(space.relation_mut(t.relation), scale, &g[1], false, rng);
}

/// One SGD step on `α` times the alignment score of an aligned pair given in
/// the canonical order of `pair`.
pub fn sgd_step_alignment<R: Rng>(
    model: &mut Model,
    pair: &LanguagePair,
    aligned: (Triple, Triple),
    lambda: f64,
    alpha: f64,
    norm: NormOrder,
    rng: &mut R,
) -> Result<()> {
    let scale = lambda * alpha;
    if scale == 0.0 {
        return Ok(());
    }
    let AlignmentGrad {
        source,
        target,
        v_e,
        v_r,
        m_e,
        m_r,
    } = alignment::alignment_grad(model, pair, aligned, norm)?;
    apply_side(model.space_mut(pair.first())?, aligned.0, &source, scale, rng);
    apply_side(model.space_mut(pair.second())?, aligned.1, &target, scale, rng);
    if let Some(t) = model.transition_mut(pair) {
        if let (Some(v), Some(g)) = (t.v_e_mut(), &v_e) {
            axpy_project(v, scale, g, false, rng);
        }
        if let (Some(v), Some(g)) = (t.v_r_mut(), &v_r) {
            axpy_project(v, scale, g, false, rng);
        }
        for (kind, g) in [(MatrixKind::Entity, &m_e), (MatrixKind::Relation, &m_r)] {
            if let Some(g) = g {
                if g.iter().any(|&x| x != 0.0) {
                    if let Some(m) = t.matrix_mut(kind) {
                        m.scaled_add(-scale, g);
                    }
                }
            }
        }
    }
    Ok(())
}

fn order<R: Rng>(n: usize, shuffle: bool, rng: &mut R) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    if shuffle {
        idx.shuffle(rng);
    }
    idx
}

fn knowledge_pass(graph: &KnowledgeGraph, space: &mut EmbeddingSpace, cfg: &TrainConfig, epoch: usize, lang_index: usize) {
    let epoch_seed = seed::derive(cfg.seed, Stream::KnowledgeShuffle, epoch as u64);
    let mut shuffle_rng = seed::rng(epoch_seed, Stream::KnowledgeShuffle, lang_index as u64);
    let mut resample_rng = seed::rng(epoch_seed, Stream::Resample, lang_index as u64);
    let triples = graph.triples();
    for _ in 0..cfg.knowledge_passes {
        for i in order(triples.len(), cfg.shuffle, &mut shuffle_rng) {
            sgd_step_knowledge(space, triples[i], cfg.lambda, cfg.norm, &mut resample_rng);
        }
    }
}

fn alignment_pass(kb: &MultilingualKb, model: &mut Model, cfg: &TrainConfig, epoch: usize) -> Result<()> {
    let epoch_seed = seed::derive(cfg.seed, Stream::AlignmentShuffle, epoch as u64);
    for (i, set) in kb.alignments().values().enumerate() {
        if set.is_empty() {
            continue;
        }
        let mut shuffle_rng = seed::rng(epoch_seed, Stream::AlignmentShuffle, i as u64);
        let mut resample_rng = seed::rng(epoch_seed, Stream::Resample, i as u64);
        for _ in 0..cfg.alignment_passes {
            for j in order(set.len(), cfg.shuffle, &mut shuffle_rng) {
                sgd_step_alignment(
                    model,
                    set.pair(),
                    set.pairs()[j],
                    cfg.lambda,
                    cfg.alpha,
                    cfg.norm,
                    &mut resample_rng,
                )?;
            }
        }
    }
    Ok(())
}

/// Mean TransE score over every triple of every language.
pub fn mean_knowledge_score(kb: &MultilingualKb, model: &Model, norm: NormOrder) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for g in kb.graphs().values() {
        let space = model.space(g.language())?;
        sum += g
            .triples()
            .iter()
            .map(|&t| knowledge::triple_score(space, t, norm))
            .sum::<f64>();
        n += g.triples().len();
    }
    Ok(if n == 0 { 0.0 } else { sum / n as f64 })
}

/// Mean alignment score over every aligned pair.
pub fn mean_alignment_score(kb: &MultilingualKb, model: &Model, norm: NormOrder) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for set in kb.alignments().values() {
        for &p in set.pairs() {
            sum += alignment::alignment_score(model, set.pair(), p, norm)?;
        }
        n += set.len();
    }
    Ok(if n == 0 { 0.0 } else { sum / n as f64 })
}

fn check_inputs(kb: &MultilingualKb, cfg: &TrainConfig) -> Result<()> {
    cfg.validate()?;
    let needs_params = !matches!(cfg.variant, Variant::Var1 | Variant::Var2);
    if needs_params && kb.alignments().values().all(|a| a.is_empty()) {
        return Err(Error::Config(format!(
            "{} needs at least one non-empty alignment set",
            cfg.variant
        )));
    }
    Ok(())
}

/// Trains a freshly initialized model, calling `on_epoch` after each epoch.
pub fn train_with<F>(kb: &MultilingualKb, cfg: &TrainConfig, on_epoch: F) -> Result<(Model, Vec<EpochReport>)>
where
    F: FnMut(&EpochReport),
{
    check_inputs(kb, cfg)?;
    let mut model = init_model(kb, cfg.variant, cfg.k, cfg.seed)?;
    let reports = continue_training(kb, &mut model, cfg, on_epoch)?;
    Ok((model, reports))
}

pub fn train(kb: &MultilingualKb, cfg: &TrainConfig) -> Result<(Model, Vec<EpochReport>)> {
    train_with(kb, cfg, |_| {})
}

/// Runs `cfg.epochs` epochs on an existing model. Epoch numbering and
/// shuffling streams start from 1 each call.
pub fn continue_training<F>(
    kb: &MultilingualKb,
    model: &mut Model,
    cfg: &TrainConfig,
    mut on_epoch: F,
) -> Result<Vec<EpochReport>>
where
    F: FnMut(&EpochReport),
{
    check_inputs(kb, cfg)?;
    if model.variant() != cfg.variant || model.dim() != cfg.k {
        return Err(Error::Config("model does not match the training configuration".into()));
    }
    for (g, (lang, s)) in kb.graphs().values().zip(model.spaces()) {
        if g.language() != lang || g.num_entities() != s.num_entities() || g.num_relations() != s.num_relations() {
            return Err(Error::Config(format!("model space {lang} does not match the knowledge base")));
        }
    }
    if kb.graphs().len() != model.spaces().len() {
        return Err(Error::Config("model languages do not match the knowledge base".into()));
    }

    let mut reports = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        let mut work: Vec<(usize, &KnowledgeGraph, &mut EmbeddingSpace)> = kb
            .graphs()
            .values()
            .zip(model.spaces.values_mut())
            .enumerate()
            .map(|(i, (g, s))| (i, g, s))
            .collect();
        work.par_iter_mut()
            .for_each(|(i, g, s)| knowledge_pass(g, s, cfg, epoch, *i));
        if cfg.alignment_passes > 0 && cfg.alpha > 0.0 {
            alignment_pass(kb, model, cfg, epoch)?;
        }
        for t in model.transitions().values() {
            let conds = t.condition_numbers();
            if !conds.is_empty() {
                log::debug!("epoch {epoch} {}: condition numbers {conds:?}", t.pair());
            }
        }
        let report = EpochReport {
            epoch,
            mean_knowledge_score: mean_knowledge_score(kb, model, cfg.norm)?,
            mean_alignment_score: mean_alignment_score(kb, model, cfg.norm)?,
            max_entity_norm_drift: model.max_entity_norm_drift(),
            wall_time: start.elapsed(),
        };
        on_epoch(&report);
        reports.push(report);
    }
    Ok(reports)
}
