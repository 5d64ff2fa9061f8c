//! Cross-lingual alignment scores, their gradients and the transition
//! functions that carry vectors between language spaces.
//!
//! Every variant's score is a sum of residual norms `‖τ(x) − x′‖` over a
//! subset of the three triple slots:
//!
//! | variant | head        | relation    | tail        |
//! |---------|-------------|-------------|-------------|
//! | Var1    | `h`         |             | `t`         |
//! | Var2    | `h`         | `r`         | `t`         |
//! | Var3    | `h + v_e`   | `r + v_r`   | `t + v_e`   |
//! | Var4    | `M_e h`     |             | `M_e t`     |
//! | Var5    | `M_e h`     | `M_r r`     | `M_e t`     |

use ndarray::Array2;

use crate::embedding::{MatrixKind, Model, TransitionParams, Variant};
use crate::error::{Error, Result};
use crate::kg::{LanguageId, LanguagePair, Triple};
use crate::knowledge::NormOrder;
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Transform {
    Identity,
    AddEntity,
    AddRelation,
    EntityMatrix,
    RelationMatrix,
}

const HEAD: usize = 0;
const REL: usize = 1;
const TAIL: usize = 2;

fn terms(variant: Variant) -> &'static [(usize, Transform)] {
    use Transform::*;
    match variant {
        Variant::Var1 => &[(HEAD, Identity), (TAIL, Identity)],
        Variant::Var2 => &[(HEAD, Identity), (REL, Identity), (TAIL, Identity)],
        Variant::Var3 => &[(HEAD, AddEntity), (REL, AddRelation), (TAIL, AddEntity)],
        Variant::Var4 => &[(HEAD, EntityMatrix), (TAIL, EntityMatrix)],
        Variant::Var5 => &[(HEAD, EntityMatrix), (REL, RelationMatrix), (TAIL, EntityMatrix)],
    }
}

/// Vectors of an aligned triple pair: `(h, r, t)` from the first language
/// of the pair and `(h′, r′, t′)` from the second.
#[derive(Debug, Clone, Copy)]
pub struct AlignedVectors<'a> {
    pub source: [&'a [f64]; 3],
    pub target: [&'a [f64]; 3],
}

impl<'a> AlignedVectors<'a> {
    pub fn gather(model: &'a Model, pair: &LanguagePair, aligned: (Triple, Triple)) -> Result<Self> {
        let s = model.space(pair.first())?;
        let t = model.space(pair.second())?;
        let (a, b) = aligned;
        Ok(AlignedVectors {
            source: [s.entity(a.head), s.relation(a.relation), s.entity(a.tail)],
            target: [t.entity(b.head), t.relation(b.relation), t.entity(b.tail)],
        })
    }
}

/// Gradient of an alignment score with respect to each participating
/// parameter. Slots a variant does not use hold zero vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentGrad {
    pub source: [Vec<f64>; 3],
    pub target: [Vec<f64>; 3],
    pub v_e: Option<Vec<f64>>,
    pub v_r: Option<Vec<f64>>,
    pub m_e: Option<Array2<f64>>,
    pub m_r: Option<Array2<f64>>,
}

fn params_for(variant: Variant, params: Option<&TransitionParams>) -> Option<&TransitionParams> {
    match variant {
        Variant::Var1 | Variant::Var2 => None,
        _ => Some(params.expect("variant needs transition parameters")),
    }
}

fn apply_forward(tr: Transform, params: Option<&TransitionParams>, x: &[f64]) -> Vec<f64> {
    let add = |v: &[f64]| x.iter().zip(v).map(|(a, b)| a + b).collect();
    match tr {
        Transform::Identity => x.to_vec(),
        Transform::AddEntity => add(params.and_then(|p| p.v_e()).expect("v_e")),
        Transform::AddRelation => add(params.and_then(|p| p.v_r()).expect("v_r")),
        Transform::EntityMatrix => linalg::mat_vec(params.and_then(|p| p.m_e()).expect("m_e").view(), x),
        Transform::RelationMatrix => linalg::mat_vec(params.and_then(|p| p.m_r()).expect("m_r").view(), x),
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Alignment score of one pair of vectors under `variant`.
pub fn score_vectors(
    variant: Variant,
    params: Option<&TransitionParams>,
    v: &AlignedVectors<'_>,
    norm: NormOrder,
) -> f64 {
    let params = params_for(variant, params);
    terms(variant)
        .iter()
        .map(|&(slot, tr)| norm.norm(&sub(&apply_forward(tr, params, v.source[slot]), v.target[slot])))
        .sum()
}

pub fn grad_vectors(
    variant: Variant,
    params: Option<&TransitionParams>,
    v: &AlignedVectors<'_>,
    norm: NormOrder,
) -> AlignmentGrad {
    let params = params_for(variant, params);
    let k = v.source[0].len();
    let mut g = AlignmentGrad {
        source: [vec![0.0; k], vec![0.0; k], vec![0.0; k]],
        target: [vec![0.0; k], vec![0.0; k], vec![0.0; k]],
        v_e: variant.has_translation_vectors().then(|| vec![0.0; k]),
        v_r: variant.has_translation_vectors().then(|| vec![0.0; k]),
        m_e: variant.has_entity_matrix().then(|| Array2::zeros((k, k))),
        m_r: variant.has_relation_matrix().then(|| Array2::zeros((k, k))),
    };
    let add_into = |acc: &mut [f64], u: &[f64]| acc.iter_mut().zip(u).for_each(|(a, b)| *a += b);
    let add_outer = |acc: &mut Array2<f64>, u: &[f64], x: &[f64]| {
        for (mut row, &ui) in acc.rows_mut().into_iter().zip(u) {
            if ui != 0.0 {
                row.iter_mut().zip(x).for_each(|(a, &xj)| *a += ui * xj);
            }
        }
    };
    for &(slot, tr) in terms(variant) {
        let x = v.source[slot];
        let u = norm.direction(&sub(&apply_forward(tr, params, x), v.target[slot]));
        g.target[slot].iter_mut().zip(&u).for_each(|(a, b)| *a -= b);
        match tr {
            Transform::Identity => add_into(&mut g.source[slot], &u),
            Transform::AddEntity => {
                add_into(&mut g.source[slot], &u);
                add_into(g.v_e.as_mut().unwrap(), &u);
            }
            Transform::AddRelation => {
                add_into(&mut g.source[slot], &u);
                add_into(g.v_r.as_mut().unwrap(), &u);
            }
            Transform::EntityMatrix => {
                let m = params.and_then(|p| p.m_e()).unwrap();
                add_into(&mut g.source[slot], &linalg::mat_t_vec(m.view(), &u));
                add_outer(g.m_e.as_mut().unwrap(), &u, x);
            }
            Transform::RelationMatrix => {
                let m = params.and_then(|p| p.m_r()).unwrap();
                add_into(&mut g.source[slot], &linalg::mat_t_vec(m.view(), &u));
                add_outer(g.m_r.as_mut().unwrap(), &u, x);
            }
        }
    }
    g
}

fn transition_of<'a>(model: &'a Model, pair: &LanguagePair) -> Result<Option<&'a TransitionParams>> {
    match model.variant() {
        Variant::Var1 | Variant::Var2 => Ok(None),
        _ => model
            .transition(pair)
            .map(Some)
            .ok_or_else(|| Error::UnknownPair(pair.first().to_string(), pair.second().to_string())),
    }
}

/// Alignment score of an aligned triple pair stored in canonical order.
pub fn alignment_score(model: &Model, pair: &LanguagePair, aligned: (Triple, Triple), norm: NormOrder) -> Result<f64> {
    let v = AlignedVectors::gather(model, pair, aligned)?;
    Ok(score_vectors(model.variant(), transition_of(model, pair)?, &v, norm))
}

pub fn alignment_grad(
    model: &Model,
    pair: &LanguagePair,
    aligned: (Triple, Triple),
    norm: NormOrder,
) -> Result<AlignmentGrad> {
    let v = AlignedVectors::gather(model, pair, aligned)?;
    Ok(grad_vectors(model.variant(), transition_of(model, pair)?, &v, norm))
}

/// A cross-lingual transition resolved for one direction.
#[derive(Debug, Clone, Copy)]
pub struct Transit<'a> {
    variant: Variant,
    forward: bool,
    params: Option<&'a TransitionParams>,
    entity_inverse: Option<&'a Array2<f64>>,
    relation_inverse: Option<&'a Array2<f64>>,
}

impl<'a> Transit<'a> {
    /// Resolves τ from `from` to `to`. The model must hold a transition for
    /// the pair; reverse matrix transitions are inverted up front.
    pub fn new(model: &'a Model, from: &LanguageId, to: &LanguageId) -> Result<Self> {
        let (pair, swapped) = LanguagePair::canonical(from.clone(), to.clone())?;
        let params = model
            .transition(&pair)
            .ok_or_else(|| Error::UnknownPair(from.to_string(), to.to_string()))?;
        let forward = !swapped;
        let variant = model.variant();
        let (mut entity_inverse, mut relation_inverse) = (None, None);
        if !forward && variant.has_entity_matrix() {
            entity_inverse = Some(params.inverse(MatrixKind::Entity)?);
            relation_inverse = if variant.has_relation_matrix() {
                Some(params.inverse(MatrixKind::Relation)?)
            } else {
                entity_inverse
            };
        }
        Ok(Transit {
            variant,
            forward,
            params: Some(params),
            entity_inverse,
            relation_inverse,
        })
    }

    pub fn is_forward(&self) -> bool {
        self.forward
    }

    fn shift(&self, x: &[f64], v: Option<&[f64]>) -> Vec<f64> {
        let v = v.expect("translation vector");
        let sign = if self.forward { 1.0 } else { -1.0 };
        x.iter().zip(v).map(|(a, b)| a + sign * b).collect()
    }

    fn linear(&self, x: &[f64], forward: Option<&Array2<f64>>, inverse: Option<&Array2<f64>>) -> Vec<f64> {
        let m = if self.forward { forward } else { inverse };
        linalg::mat_vec(m.expect("transition matrix").view(), x)
    }

    pub fn entity(&self, e: &[f64]) -> Vec<f64> {
        let p = self.params.unwrap();
        match self.variant {
            Variant::Var1 | Variant::Var2 => e.to_vec(),
            Variant::Var3 => self.shift(e, p.v_e()),
            Variant::Var4 | Variant::Var5 => self.linear(e, p.m_e(), self.entity_inverse),
        }
    }

    pub fn relation(&self, r: &[f64]) -> Vec<f64> {
        let p = self.params.unwrap();
        match self.variant {
            Variant::Var1 | Variant::Var2 => r.to_vec(),
            Variant::Var3 => self.shift(r, p.v_r()),
            Variant::Var4 => self.linear(r, p.m_e(), self.relation_inverse),
            Variant::Var5 => self.linear(r, p.m_r(), self.relation_inverse),
        }
    }
}

pub fn transit_entity(model: &Model, from: &LanguageId, to: &LanguageId, e: &[f64]) -> Result<Vec<f64>> {
    Ok(Transit::new(model, from, to)?.entity(e))
}

pub fn transit_relation(model: &Model, from: &LanguageId, to: &LanguageId, r: &[f64]) -> Result<Vec<f64>> {
    Ok(Transit::new(model, from, to)?.relation(r))
}
