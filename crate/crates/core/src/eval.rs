//! Ranking-based evaluation: cross-lingual entity matching, monolingual tail
//! and relation prediction, cross-lingual triple completion, precision-recall
//! data and PCA export.
//!
//! Ranking is exhaustive nearest-neighbour search under the model's norm.
//! Ties are broken by ascending candidate index, and candidate sets are
//! never filtered.

use std::fmt::Write as _;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::alignment::Transit;
use crate::embedding::Model;
use crate::error::{Error, Result};
use crate::kg::{IllSet, LanguageId, Triple};
use crate::knowledge::NormOrder;
use crate::linalg;

fn distance(a: &[f64], b: &[f64], norm: NormOrder) -> f64 {
    match norm {
        NormOrder::L1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        NormOrder::L2 => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
    }
}

fn row(m: ArrayView2<'_, f64>, i: usize) -> &[f64] {
    m.index_axis_move(Axis(0), i).to_slice().expect("standard layout")
}

/// 1-based rank of row `target` among all rows of `candidates` sorted by
/// ascending distance to `query`, ties broken by row index.
pub fn rank_target(query: &[f64], candidates: ArrayView2<'_, f64>, target: usize, norm: NormOrder) -> usize {
    assert!(target < candidates.nrows(), "target row out of range");
    let gold = distance(query, row(candidates, target), norm);
    1 + (0..candidates.nrows())
        .filter(|&i| {
            let d = distance(query, row(candidates, i), norm);
            d < gold || (d == gold && i < target)
        })
        .count()
}

/// The `top_n` rows nearest to `query` as `(row, distance)`, ascending.
pub fn nearest(query: &[f64], candidates: ArrayView2<'_, f64>, top_n: usize, norm: NormOrder) -> Vec<(usize, f64)> {
    let mut scored: Vec<(usize, f64)> = (0..candidates.nrows())
        .map(|i| (i, distance(query, row(candidates, i), norm)))
        .collect();
    scored.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    scored.truncate(top_n);
    scored
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    pub ranks: Vec<usize>,
    pub hits_at_10: f64,
    pub mean_rank: f64,
}

impl RankReport {
    pub fn from_ranks(ranks: Vec<usize>) -> Result<Self> {
        if ranks.is_empty() {
            return Err(Error::Eval("no queries to rank".into()));
        }
        let n = ranks.len() as f64;
        let hits = ranks.iter().filter(|&&r| r <= 10).count() as f64;
        let sum: usize = ranks.iter().sum();
        Ok(RankReport {
            hits_at_10: 100.0 * hits / n,
            mean_rank: sum as f64 / n,
            ranks,
        })
    }

    /// `source<TAB>gold<TAB>rank` per query, then the `HITS@10` and `MEAN`
    /// summary lines. `labels[i]` names query `i`.
    pub fn to_tsv(&self, labels: &[(String, String)]) -> String {
        let mut out = String::new();
        for ((s, g), r) in labels.iter().zip(&self.ranks) {
            writeln!(out, "{s}\t{g}\t{r}").unwrap();
        }
        writeln!(out, "HITS@10\t{:.2}", self.hits_at_10).unwrap();
        writeln!(out, "MEAN\t{:.2}", self.mean_rank).unwrap();
        out
    }
}

/// Ranks each linked target entity among all target-language entities, from
/// the cross-lingual transition point of its source entity.
pub fn entity_matching(model: &Model, ills: &IllSet, norm: NormOrder) -> Result<RankReport> {
    if ills.is_empty() {
        return Err(Error::Eval("inter-lingual link set is empty".into()));
    }
    let transit = Transit::new(model, ills.source(), ills.target())?;
    let src = model.space(ills.source())?;
    let tgt = model.space(ills.target())?;
    let ranks = ills
        .links()
        .par_iter()
        .map(|&(s, t)| rank_target(&transit.entity(src.entity(s)), tgt.entities().view(), t, norm))
        .collect();
    RankReport::from_ranks(ranks)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub predicted: usize,
}

/// Thresholded top-1 matching: a link is predicted when the distance to its
/// nearest target neighbour is below the threshold, and correct when that
/// neighbour is the gold target.
pub fn pr_curve(model: &Model, ills: &IllSet, norm: NormOrder, thresholds: &[f64]) -> Result<Vec<PrPoint>> {
    if thresholds.is_empty() {
        return Err(Error::Eval("no thresholds given".into()));
    }
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Eval("thresholds must be sorted ascending".into()));
    }
    if ills.is_empty() {
        return Err(Error::Eval("inter-lingual link set is empty".into()));
    }
    let transit = Transit::new(model, ills.source(), ills.target())?;
    let src = model.space(ills.source())?;
    let tgt = model.space(ills.target())?;
    let top1: Vec<(f64, bool)> = ills
        .links()
        .par_iter()
        .map(|&(s, t)| {
            let q = transit.entity(src.entity(s));
            let (best, d) = nearest(&q, tgt.entities().view(), 1, norm)[0];
            (d, best == t)
        })
        .collect();
    Ok(pr_points(&top1, thresholds))
}

/// PR points from `(nearest distance, nearest is gold)` per query.
pub fn pr_points(top1: &[(f64, bool)], thresholds: &[f64]) -> Vec<PrPoint> {
    let total = top1.len() as f64;
    thresholds
        .iter()
        .map(|&sigma| {
            let predicted = top1.iter().filter(|(d, _)| *d < sigma).count();
            let correct = top1.iter().filter(|(d, ok)| *d < sigma && *ok).count();
            PrPoint {
                threshold: sigma,
                precision: if predicted == 0 { 1.0 } else { correct as f64 / predicted as f64 },
                recall: correct as f64 / total,
                predicted,
            }
        })
        .collect()
}

pub fn pr_to_tsv(points: &[PrPoint]) -> String {
    let mut out = String::new();
    for p in points {
        writeln!(out, "{}\t{:.6}\t{:.6}", p.threshold, p.precision, p.recall).unwrap();
    }
    out
}

/// Ranks the gold tail of each test triple among all entities of its
/// language, querying from `h + r`.
pub fn tail_prediction(model: &Model, test: &[Triple], language: &LanguageId, norm: NormOrder) -> Result<RankReport> {
    if test.is_empty() {
        return Err(Error::Eval("test set is empty".into()));
    }
    let space = model.space(language)?;
    let ranks = test
        .par_iter()
        .map(|t| {
            let q: Vec<f64> = space
                .entity(t.head)
                .iter()
                .zip(space.relation(t.relation))
                .map(|(h, r)| h + r)
                .collect();
            rank_target(&q, space.entities().view(), t.tail, norm)
        })
        .collect();
    RankReport::from_ranks(ranks)
}

/// Ranks the gold relation of each test triple among all relations of its
/// language, querying from `t − h`.
pub fn relation_prediction(model: &Model, test: &[Triple], language: &LanguageId, norm: NormOrder) -> Result<RankReport> {
    if test.is_empty() {
        return Err(Error::Eval("test set is empty".into()));
    }
    let space = model.space(language)?;
    let ranks = test
        .par_iter()
        .map(|t| {
            let q: Vec<f64> = space
                .entity(t.tail)
                .iter()
                .zip(space.entity(t.head))
                .map(|(t, h)| t - h)
                .collect();
            rank_target(&q, space.relations().view(), t.relation, norm)
        })
        .collect();
    RankReport::from_ranks(ranks)
}

/// A source-language triple with exactly one unknown slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartialTriple {
    pub head: Option<usize>,
    pub relation: Option<usize>,
    pub tail: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Head,
    Relation,
    Tail,
}

impl PartialTriple {
    pub fn missing(&self) -> Result<Slot> {
        match (self.head, self.relation, self.tail) {
            (None, Some(_), Some(_)) => Ok(Slot::Head),
            (Some(_), None, Some(_)) => Ok(Slot::Relation),
            (Some(_), Some(_), None) => Ok(Slot::Tail),
            _ => Err(Error::Eval("a completion query needs exactly one unknown element".into())),
        }
    }
}

/// Completes `query` in the `to` language: known elements are carried over
/// by the transition, and candidates for the missing slot are ranked by the
/// TransE score of the completed target triple.
pub fn complete_triple(
    model: &Model,
    query: PartialTriple,
    from: &LanguageId,
    to: &LanguageId,
    norm: NormOrder,
    top_n: usize,
) -> Result<(Slot, Vec<(usize, f64)>)> {
    let slot = query.missing()?;
    let src = model.space(from)?;
    let tgt = model.space(to)?;
    let transit = if from == to { None } else { Some(Transit::new(model, from, to)?) };
    let entity = |i: usize| match &transit {
        Some(tr) => tr.entity(src.entity(i)),
        None => src.entity(i).to_vec(),
    };
    let relation = |i: usize| match &transit {
        Some(tr) => tr.relation(src.relation(i)),
        None => src.relation(i).to_vec(),
    };
    let check = |i: Option<usize>, n: usize, what: &str| match i {
        Some(i) if i >= n => Err(Error::Eval(format!("{what} index {i} out of range"))),
        _ => Ok(()),
    };
    check(query.head, src.num_entities(), "head")?;
    check(query.tail, src.num_entities(), "tail")?;
    check(query.relation, src.num_relations(), "relation")?;
    let combine = |a: Vec<f64>, b: Vec<f64>, sign: f64| -> Vec<f64> {
        a.iter().zip(&b).map(|(x, y)| x + sign * y).collect()
    };
    // ‖τ(h)+τ(r)−t′‖, ‖h′+τ(r)−τ(t)‖ and ‖τ(h)+r′−τ(t)‖ are distances from
    // the candidate to a fixed query point.
    let ranked = match slot {
        Slot::Tail => {
            let q = combine(entity(query.head.unwrap()), relation(query.relation.unwrap()), 1.0);
            nearest(&q, tgt.entities().view(), top_n, norm)
        }
        Slot::Head => {
            let q = combine(entity(query.tail.unwrap()), relation(query.relation.unwrap()), -1.0);
            nearest(&q, tgt.entities().view(), top_n, norm)
        }
        Slot::Relation => {
            let q = combine(entity(query.tail.unwrap()), entity(query.head.unwrap()), -1.0);
            nearest(&q, tgt.relations().view(), top_n, norm)
        }
    };
    Ok((slot, ranked))
}

/// Projects rows onto the top `out_dim` principal components of the sample
/// covariance. Components are ordered by descending eigenvalue and signed so
/// that their first nonzero coordinate is positive.
pub fn pca_project(vectors: ArrayView2<'_, f64>, out_dim: usize) -> Result<Array2<f64>> {
    let (m, k) = vectors.dim();
    if out_dim == 0 || out_dim > k || m < out_dim {
        return Err(Error::Eval(format!(
            "cannot project {m} vectors of width {k} onto {out_dim} components"
        )));
    }
    let mean = vectors.mean_axis(Axis(0)).ok_or_else(|| Error::Eval("no vectors".into()))?;
    let centered = &vectors - &mean;
    let scale = vectors.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(f64::MIN_POSITIVE);
    if m < 2 || centered.iter().all(|x| x.abs() <= 1e-12 * scale) {
        return Err(Error::Eval("all vectors are identical; no principal direction".into()));
    }
    let cov = centered.t().dot(&centered) / (m as f64 - 1.0);
    let (_, mut vecs) = linalg::symmetric_eigen(cov.view());
    for mut c in vecs.columns_mut() {
        let tol = 1e-12;
        if let Some(first) = c.iter().copied().find(|x| x.abs() > tol) {
            if first < 0.0 {
                c.mapv_inplace(|x| -x);
            }
        }
    }
    let top = vecs.slice(ndarray::s![.., ..out_dim]);
    Ok(centered.dot(&top))
}

pub fn pca_to_tsv(labels: &[String], coords: ArrayView2<'_, f64>) -> String {
    let mut out = String::new();
    for (label, r) in labels.iter().zip(coords.rows()) {
        out.push_str(label);
        for x in r {
            write!(out, "\t{x:.6}").unwrap();
        }
        out.push('\n');
    }
    out
}
