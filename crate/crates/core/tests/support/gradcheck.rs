//! Central finite-difference oracle for the knowledge and alignment scores.

use mtranse_core::alignment::{grad_vectors, score_vectors, AlignedVectors};
use mtranse_core::knowledge::{transe_grad, transe_score};
use mtranse_core::ndarray::Array2;
use mtranse_core::{LanguageId, LanguagePair, NormOrder, TransitionParams, Variant};
use rand::Rng;
use rand_distr::StandardNormal;

pub const STEP: f64 = 1e-6;

fn gaussian<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Norm-wise relative error `‖a − n‖∞ / max(‖a‖∞, ‖n‖∞)`.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, n)| a - n).collect();
    let scale = inf(analytic).max(inf(numeric));
    if scale == 0.0 {
        inf(&diff)
    } else {
        inf(&diff) / scale
    }
}

fn central_difference(theta: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut x = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            let orig = x[i];
            x[i] = orig + STEP;
            let up = f(&x);
            x[i] = orig - STEP;
            let down = f(&x);
            x[i] = orig;
            (up - down) / (2.0 * STEP)
        })
        .collect()
}

/// Relative gradient error of the TransE score on one random triple.
pub fn transe_error<R: Rng>(rng: &mut R, k: usize, norm: NormOrder) -> f64 {
    let theta = gaussian(rng, 3 * k);
    let split = |x: &[f64]| (x[..k].to_vec(), x[k..2 * k].to_vec(), x[2 * k..].to_vec());
    let (h, r, t) = split(&theta);
    let g = transe_grad(&h, &r, &t, norm);
    let analytic: Vec<f64> = [g.d_h, g.d_r, g.d_t].concat();
    let numeric = central_difference(&theta, |x| {
        let (h, r, t) = split(x);
        transe_score(&h, &r, &t, norm)
    });
    relative_error(&analytic, &numeric)
}

/// Parameter count of an alignment instance: six vectors plus the
/// variant's transition parameters.
fn layout(variant: Variant, k: usize) -> usize {
    let mut n = 6 * k;
    if variant.has_translation_vectors() {
        n += 2 * k;
    }
    if variant.has_entity_matrix() {
        n += k * k;
    }
    if variant.has_relation_matrix() {
        n += k * k;
    }
    n
}

fn params(variant: Variant, k: usize, x: &[f64]) -> Option<TransitionParams> {
    let mut off = 6 * k;
    let mut take = |n: usize| {
        let v = x[off..off + n].to_vec();
        off += n;
        v
    };
    let (v_e, v_r) = if variant.has_translation_vectors() {
        (Some(take(k)), Some(take(k)))
    } else {
        (None, None)
    };
    let mat = |v: Vec<f64>| Array2::from_shape_vec((k, k), v).unwrap();
    let m_e = variant.has_entity_matrix().then(|| mat(take(k * k)));
    let m_r = variant.has_relation_matrix().then(|| mat(take(k * k)));
    if matches!(variant, Variant::Var1 | Variant::Var2) {
        return None;
    }
    let (pair, _) = LanguagePair::canonical(LanguageId::new("a").unwrap(), LanguageId::new("b").unwrap()).unwrap();
    Some(TransitionParams::new(pair, variant, k, v_e, v_r, m_e, m_r).unwrap())
}

fn vectors(k: usize, x: &[f64]) -> AlignedVectors<'_> {
    let s = |i: usize| &x[i * k..(i + 1) * k];
    AlignedVectors {
        source: [s(0), s(1), s(2)],
        target: [s(3), s(4), s(5)],
    }
}

pub fn alignment_score_at(variant: Variant, k: usize, x: &[f64], norm: NormOrder) -> f64 {
    let p = params(variant, k, x);
    score_vectors(variant, p.as_ref(), &vectors(k, x), norm)
}

/// Random alignment instance: Gaussian vectors, matrices scaled by `1/√k`.
pub fn random_alignment_instance<R: Rng>(rng: &mut R, variant: Variant, k: usize) -> Vec<f64> {
    let mut theta = gaussian(rng, layout(variant, k));
    let scale = 1.0 / (k as f64).sqrt();
    let vec_end = 6 * k + if variant.has_translation_vectors() { 2 * k } else { 0 };
    theta[vec_end..].iter_mut().for_each(|x| *x *= scale);
    theta
}

/// Relative gradient error of an alignment score on one random instance.
pub fn alignment_error<R: Rng>(rng: &mut R, variant: Variant, k: usize, norm: NormOrder) -> f64 {
    let theta = random_alignment_instance(rng, variant, k);
    let p = params(variant, k, &theta);
    let g = grad_vectors(variant, p.as_ref(), &vectors(k, &theta), norm);
    let mut analytic: Vec<f64> = g.source.concat();
    analytic.extend(g.target.concat());
    for v in [&g.v_e, &g.v_r].into_iter().flatten() {
        analytic.extend(v);
    }
    for m in [&g.m_e, &g.m_r].into_iter().flatten() {
        analytic.extend(m.iter());
    }
    let numeric = central_difference(&theta, |x| alignment_score_at(variant, k, x, norm));
    relative_error(&analytic, &numeric)
}
