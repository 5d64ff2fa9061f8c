//! Triple-wise alignment verification: corrupted negative cases, the
//! dissimilarity `f_d`, a single-threshold classifier and k-fold
//! cross-validation.

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::alignment::Transit;
use crate::embedding::Model;
use crate::error::{Error, Result};
use crate::kg::{AlignmentSet, KnowledgeGraph, LanguageId, MultilingualKb, Triple};
use crate::linalg;
use crate::seed::{self, Stream};

const MAX_RESAMPLES: usize = 10_000;
const MAX_FOLD_RETRIES: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseKind {
    Positive,
    /// One of the six elements replaced. Slots 0..3 are h, r, t of the
    /// first triple and 3..6 of the second.
    ElementSwap(u8),
    /// The first (0) or second (1) triple replaced by another triple.
    TripleSwap(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabeledCase {
    pub pair: (Triple, Triple),
    pub label: bool,
    pub kind: CaseKind,
}

/// Splits off a random `fraction` of an alignment set as positive test
/// cases; the rest is returned for training.
pub fn hold_out_positives(set: &AlignmentSet, fraction: f64, seed: u64) -> Result<(AlignmentSet, Vec<(Triple, Triple)>)> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Config(format!("hold-out fraction {fraction} outside [0, 1]")));
    }
    let mut idx: Vec<usize> = (0..set.len()).collect();
    idx.shuffle(&mut seed::rng(seed, Stream::Split, 0));
    let n_test = (fraction * set.len() as f64).round() as usize;
    let mut test_idx = idx[..n_test].to_vec();
    let mut train_idx = idx[n_test..].to_vec();
    test_idx.sort_unstable();
    train_idx.sort_unstable();
    let train = AlignmentSet::from_pairs(set.pair().clone(), train_idx.iter().map(|&i| set.pairs()[i]));
    let test = test_idx.iter().map(|&i| set.pairs()[i]).collect();
    Ok((train, test))
}

fn other<R: Rng>(rng: &mut R, n: usize, current: usize) -> usize {
    let x = rng.random_range(0..n - 1);
    if x >= current {
        x + 1
    } else {
        x
    }
}

fn corrupt_element<R: Rng>(
    rng: &mut R,
    (a, b): (Triple, Triple),
    first: &KnowledgeGraph,
    second: &KnowledgeGraph,
) -> ((Triple, Triple), u8) {
    let slot = rng.random_range(0..6u8);
    let (mut a, mut b) = (a, b);
    let (t, g) = if slot < 3 { (&mut a, first) } else { (&mut b, second) };
    match slot % 3 {
        0 => t.head = other(rng, g.num_entities(), t.head),
        1 => t.relation = other(rng, g.num_relations(), t.relation),
        _ => t.tail = other(rng, g.num_entities(), t.tail),
    }
    ((a, b), slot)
}

fn corrupt_triple<R: Rng>(
    rng: &mut R,
    (a, b): (Triple, Triple),
    first: &KnowledgeGraph,
    second: &KnowledgeGraph,
) -> ((Triple, Triple), u8) {
    let side = rng.random_range(0..2u8);
    let pick = |rng: &mut R, g: &KnowledgeGraph, current: Triple| loop {
        let t = g.triples()[rng.random_range(0..g.triples().len())];
        if t != current {
            return t;
        }
    };
    if side == 0 {
        ((pick(rng, first, a), b), 0)
    } else {
        ((a, pick(rng, second, b)), 1)
    }
}

/// Builds labeled cases from positives: every positive, one element-swap
/// negative per positive and `⌈n/2⌉` triple-swap negatives. Corruptions that
/// reproduce a positive pair are redrawn.
pub fn generate_negatives(
    positives: &[(Triple, Triple)],
    kb: &MultilingualKb,
    first: &LanguageId,
    second: &LanguageId,
    seed: u64,
) -> Result<Vec<LabeledCase>> {
    if positives.is_empty() {
        return Err(Error::Eval("no positive cases to corrupt".into()));
    }
    let g1 = kb.graph(first)?;
    let g2 = kb.graph(second)?;
    for g in [g1, g2] {
        if g.num_entities() < 2 || g.num_relations() < 2 || g.triples().len() < 2 {
            return Err(Error::Eval(format!(
                "language {} needs at least two entities, relations and triples to corrupt",
                g.language()
            )));
        }
    }
    let known: HashSet<(Triple, Triple)> = positives.iter().copied().collect();
    let mut rng = seed::rng(seed, Stream::Negatives, 0);
    let mut cases: Vec<LabeledCase> = positives
        .iter()
        .map(|&pair| LabeledCase {
            pair,
            label: true,
            kind: CaseKind::Positive,
        })
        .collect();
    let draw = |rng: &mut _, base, swap: bool| -> Result<LabeledCase> {
        for _ in 0..MAX_RESAMPLES {
            let (pair, which) = if swap {
                corrupt_triple(rng, base, g1, g2)
            } else {
                corrupt_element(rng, base, g1, g2)
            };
            if !known.contains(&pair) {
                let kind = if swap {
                    CaseKind::TripleSwap(which)
                } else {
                    CaseKind::ElementSwap(which)
                };
                return Ok(LabeledCase {
                    pair,
                    label: false,
                    kind,
                });
            }
        }
        Err(Error::Eval("could not draw a corruption distinct from every positive".into()))
    };
    for &p in positives {
        let c = draw(&mut rng, p, false)?;
        cases.push(c);
    }
    for _ in 0..positives.len().div_ceil(2) {
        let base = positives[rng.random_range(0..positives.len())];
        let c = draw(&mut rng, base, true)?;
        cases.push(c);
    }
    Ok(cases)
}

/// `f_d(T, T′) = ‖τ(h)−h′‖₂ + ‖τ(r)−r′‖₂ + ‖τ(t)−t′‖₂` with `T` in `from` and
/// `T′` in `to`.
pub fn dissimilarity(model: &Model, pair: (Triple, Triple), from: &LanguageId, to: &LanguageId) -> Result<f64> {
    let transit = Transit::new(model, from, to)?;
    dissimilarity_with(model, &transit, pair, from, to)
}

fn dissimilarity_with(
    model: &Model,
    transit: &Transit<'_>,
    (a, b): (Triple, Triple),
    from: &LanguageId,
    to: &LanguageId,
) -> Result<f64> {
    let s = model.space(from)?;
    let t = model.space(to)?;
    let residual = |x: Vec<f64>, y: &[f64]| {
        let d: Vec<f64> = x.iter().zip(y).map(|(p, q)| p - q).collect();
        linalg::l2_norm(&d)
    };
    Ok(residual(transit.entity(s.entity(a.head)), t.entity(b.head))
        + residual(transit.relation(s.relation(a.relation)), t.relation(b.relation))
        + residual(transit.entity(s.entity(a.tail)), t.entity(b.tail)))
}

fn accuracy(scores: &[f64], labels: &[bool], sigma: f64) -> f64 {
    let hits = scores
        .iter()
        .zip(labels)
        .filter(|(&s, &l)| (s < sigma) == l)
        .count();
    hits as f64 / scores.len() as f64
}

/// Candidate thresholds: one below the minimum, the midpoints between
/// consecutive distinct scores and one above the maximum, ascending.
pub fn candidate_thresholds(scores: &[f64]) -> Vec<f64> {
    let mut sorted: Vec<f64> = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let (Some(&lo), Some(&hi)) = (sorted.first(), sorted.last()) else {
        return Vec::new();
    };
    let mut out = Vec::with_capacity(sorted.len() + 1);
    out.push(lo - 1.0);
    out.extend(sorted.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0));
    out.push(hi + 1.0);
    out
}

/// Threshold maximizing training accuracy of the rule `score < σ ⇒ positive`
/// and that accuracy. Ties go to the smallest threshold.
pub fn fit_threshold(scores: &[f64], labels: &[bool]) -> Result<(f64, f64)> {
    if scores.len() != labels.len() {
        return Err(Error::Eval("scores and labels differ in length".into()));
    }
    if !labels.contains(&true) || !labels.contains(&false) {
        return Err(Error::Eval("threshold fitting needs both positive and negative cases".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Eval("scores must be finite".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]));
    let candidates = candidate_thresholds(scores);

    // Below the minimum every case is predicted negative.
    let mut correct = labels.iter().filter(|&&l| !l).count() as i64;
    let (mut best, mut best_correct) = (candidates[0], correct);
    let mut i = 0;
    for &sigma in &candidates[1..] {
        while i < order.len() && scores[order[i]] < sigma {
            correct += if labels[order[i]] { 1 } else { -1 };
            i += 1;
        }
        if correct > best_correct {
            best = sigma;
            best_correct = correct;
        }
    }
    Ok((best, best_correct as f64 / scores.len() as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub fold_accuracies: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation of the fold accuracies.
    pub std_dev: f64,
    /// Whether each input case was classified correctly while held out.
    pub held_out_correct: Vec<bool>,
}

impl CvReport {
    /// Held-out accuracy over the cases selected by `keep`.
    pub fn accuracy_where(&self, cases: &[LabeledCase], keep: impl Fn(&LabeledCase) -> bool) -> Option<f64> {
        let (n, ok) = cases
            .iter()
            .zip(&self.held_out_correct)
            .filter(|(c, _)| keep(c))
            .fold((0usize, 0usize), |(n, ok), (_, &c)| (n + 1, ok + c as usize));
        (n > 0).then(|| ok as f64 / n as f64)
    }

    /// `fold<TAB>sigma<TAB>accuracy` per fold, then `MEAN` and `STD`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (i, (s, a)) in self.thresholds.iter().zip(&self.fold_accuracies).enumerate() {
            writeln!(out, "{}\t{s:.6}\t{a:.4}", i + 1).unwrap();
        }
        writeln!(out, "MEAN\t{:.4}", self.mean).unwrap();
        writeln!(out, "STD\t{:.4}", self.std_dev).unwrap();
        out
    }
}

pub fn mean_and_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn fold_ranges(n: usize, folds: usize) -> Vec<std::ops::Range<usize>> {
    let base = n / folds;
    let extra = n % folds;
    let mut start = 0;
    (0..folds)
        .map(|f| {
            let len = base + usize::from(f < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

/// k-fold cross-validation of the threshold classifier on precomputed
/// scores. Cases are shuffled by seed; a shuffle leaving some training split
/// with a single label is redrawn.
pub fn cross_validate_scores(scores: &[f64], labels: &[bool], folds: usize, seed: u64) -> Result<CvReport> {
    if folds < 2 {
        return Err(Error::Eval("cross-validation needs at least two folds".into()));
    }
    if scores.len() != labels.len() {
        return Err(Error::Eval("scores and labels differ in length".into()));
    }
    if scores.len() < folds {
        return Err(Error::Eval(format!("{} cases cannot fill {folds} folds", scores.len())));
    }
    let n = scores.len();
    let ranges = fold_ranges(n, folds);
    for attempt in 0..MAX_FOLD_RETRIES {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut seed::rng(seed, Stream::CrossValidation, attempt));
        let splits_ok = ranges.iter().all(|r| {
            let train = idx[..r.start].iter().chain(&idx[r.end..]);
            let (mut pos, mut neg) = (false, false);
            for &i in train {
                pos |= labels[i];
                neg |= !labels[i];
            }
            pos && neg
        });
        if !splits_ok {
            continue;
        }
        let mut fold_accuracies = Vec::with_capacity(folds);
        let mut thresholds = Vec::with_capacity(folds);
        let mut held_out_correct = vec![false; n];
        for r in &ranges {
            let train: Vec<usize> = idx[..r.start].iter().chain(&idx[r.end..]).copied().collect();
            let ts: Vec<f64> = train.iter().map(|&i| scores[i]).collect();
            let tl: Vec<bool> = train.iter().map(|&i| labels[i]).collect();
            let (sigma, _) = fit_threshold(&ts, &tl)?;
            let test = &idx[r.clone()];
            for &i in test {
                held_out_correct[i] = (scores[i] < sigma) == labels[i];
            }
            let ok = test.iter().filter(|&&i| held_out_correct[i]).count();
            fold_accuracies.push(ok as f64 / test.len() as f64);
            thresholds.push(sigma);
        }
        let (mean, std_dev) = mean_and_std(&fold_accuracies);
        return Ok(CvReport {
            fold_accuracies,
            thresholds,
            mean,
            std_dev,
            held_out_correct,
        });
    }
    Err(Error::Eval(
        "could not find a fold assignment with both labels in every training split".into(),
    ))
}

/// Scores every case with `f_d` from `from` to `to` and cross-validates the
/// threshold classifier.
pub fn cross_validate(
    cases: &[LabeledCase],
    model: &Model,
    from: &LanguageId,
    to: &LanguageId,
    folds: usize,
    seed: u64,
) -> Result<CvReport> {
    let transit = Transit::new(model, from, to)?;
    let scores = cases
        .iter()
        .map(|c| dissimilarity_with(model, &transit, c.pair, from, to))
        .collect::<Result<Vec<f64>>>()?;
    let labels: Vec<bool> = cases.iter().map(|c| c.label).collect();
    cross_validate_scores(&scores, &labels, folds, seed)
}

/// Accuracy of `sigma` on the given scores, exposed for oracle checks.
pub fn threshold_accuracy(scores: &[f64], labels: &[bool], sigma: f64) -> f64 {
    accuracy(scores, labels, sigma)
}
