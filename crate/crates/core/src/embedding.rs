//! Trainable parameters: one embedding space per language and one set of
//! transition parameters per aligned language pair.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::kg::{LanguageId, LanguagePair, MultilingualKb};
use crate::linalg;
use crate::seed::{self, Stream};

/// Alignment-model variant. Var1/Var2 calibrate axes, Var3 uses translation
/// vectors, Var4/Var5 use linear transformations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    Var1,
    Var2,
    Var3,
    Var4,
    Var5,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Var1,
        Variant::Var2,
        Variant::Var3,
        Variant::Var4,
        Variant::Var5,
    ];

    pub fn has_translation_vectors(self) -> bool {
        self == Variant::Var3
    }

    pub fn has_entity_matrix(self) -> bool {
        matches!(self, Variant::Var4 | Variant::Var5)
    }

    pub fn has_relation_matrix(self) -> bool {
        self == Variant::Var5
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = Variant::ALL.iter().position(|v| v == self).unwrap() + 1;
        write!(f, "var{n}")
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "var1" | "1" => Ok(Variant::Var1),
            "var2" | "2" => Ok(Variant::Var2),
            "var3" | "3" => Ok(Variant::Var3),
            "var4" | "4" => Ok(Variant::Var4),
            "var5" | "5" => Ok(Variant::Var5),
            _ => Err(Error::Config(format!("unknown variant {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSpace {
    pub(crate) language: LanguageId,
    pub(crate) entities: Array2<f64>,
    pub(crate) relations: Array2<f64>,
}

impl EmbeddingSpace {
    pub fn new(language: LanguageId, entities: Array2<f64>, relations: Array2<f64>) -> Result<Self> {
        if entities.ncols() != relations.ncols() {
            return Err(Error::Format(format!(
                "entity width {} differs from relation width {}",
                entities.ncols(),
                relations.ncols()
            )));
        }
        Ok(EmbeddingSpace {
            language,
            entities: entities.as_standard_layout().into_owned(),
            relations: relations.as_standard_layout().into_owned(),
        })
    }

    pub fn language(&self) -> &LanguageId {
        &self.language
    }

    pub fn dim(&self) -> usize {
        self.entities.ncols()
    }

    pub fn num_entities(&self) -> usize {
        self.entities.nrows()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.nrows()
    }

    pub fn entity(&self, i: usize) -> &[f64] {
        self.entities.row(i).to_slice().expect("standard layout")
    }

    pub fn relation(&self, i: usize) -> &[f64] {
        self.relations.row(i).to_slice().expect("standard layout")
    }

    pub fn entity_mut(&mut self, i: usize) -> &mut [f64] {
        self.entities.row_mut(i).into_slice().expect("standard layout")
    }

    pub fn relation_mut(&mut self, i: usize) -> &mut [f64] {
        self.relations.row_mut(i).into_slice().expect("standard layout")
    }

    pub fn entities(&self) -> &Array2<f64> {
        &self.entities
    }

    pub fn relations(&self) -> &Array2<f64> {
        &self.relations
    }

    /// Largest deviation of an entity vector's L2 norm from 1.
    pub fn max_entity_norm_drift(&self) -> f64 {
        (0..self.num_entities())
            .map(|i| (linalg::l2_norm(self.entity(i)) - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Cross-lingual transition parameters of one language pair, stored in the
/// canonical direction `pair.first() -> pair.second()`.
#[derive(Debug)]
pub struct TransitionParams {
    pub(crate) pair: LanguagePair,
    pub(crate) variant: Variant,
    pub(crate) v_e: Option<Vec<f64>>,
    pub(crate) v_r: Option<Vec<f64>>,
    pub(crate) m_e: Option<Array2<f64>>,
    pub(crate) m_r: Option<Array2<f64>>,
    inv_e: OnceLock<Result<Array2<f64>, f64>>,
    inv_r: OnceLock<Result<Array2<f64>, f64>>,
}

impl Clone for TransitionParams {
    fn clone(&self) -> Self {
        TransitionParams {
            pair: self.pair.clone(),
            variant: self.variant,
            v_e: self.v_e.clone(),
            v_r: self.v_r.clone(),
            m_e: self.m_e.clone(),
            m_r: self.m_r.clone(),
            inv_e: OnceLock::new(),
            inv_r: OnceLock::new(),
        }
    }
}

impl PartialEq for TransitionParams {
    fn eq(&self, other: &Self) -> bool {
        self.pair == other.pair
            && self.variant == other.variant
            && self.v_e == other.v_e
            && self.v_r == other.v_r
            && self.m_e == other.m_e
            && self.m_r == other.m_r
    }
}

/// Which matrix of a transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Entity,
    Relation,
}

impl TransitionParams {
    /// Builds parameters, checking that exactly the fields the variant needs
    /// are present and correctly shaped.
    pub fn new(
        pair: LanguagePair,
        variant: Variant,
        k: usize,
        v_e: Option<Vec<f64>>,
        v_r: Option<Vec<f64>>,
        m_e: Option<Array2<f64>>,
        m_r: Option<Array2<f64>>,
    ) -> Result<Self> {
        let check = |present: bool, needed: bool, what: &str| {
            if present != needed {
                Err(Error::Format(format!(
                    "{variant} transition {} {what}",
                    if needed { "requires" } else { "must not have" }
                )))
            } else {
                Ok(())
            }
        };
        check(v_e.is_some(), variant.has_translation_vectors(), "an entity translation vector")?;
        check(v_r.is_some(), variant.has_translation_vectors(), "a relation translation vector")?;
        check(m_e.is_some(), variant.has_entity_matrix(), "an entity matrix")?;
        check(m_r.is_some(), variant.has_relation_matrix(), "a relation matrix")?;
        for v in v_e.iter().chain(&v_r) {
            if v.len() != k {
                return Err(Error::Format(format!("translation vector has length {} not {k}", v.len())));
            }
        }
        for m in m_e.iter().chain(&m_r) {
            if m.dim() != (k, k) {
                return Err(Error::Format(format!("matrix has shape {:?} not ({k}, {k})", m.dim())));
            }
        }
        Ok(TransitionParams {
            pair,
            variant,
            v_e,
            v_r,
            m_e: m_e.map(|m| m.as_standard_layout().into_owned()),
            m_r: m_r.map(|m| m.as_standard_layout().into_owned()),
            inv_e: OnceLock::new(),
            inv_r: OnceLock::new(),
        })
    }

    pub fn pair(&self) -> &LanguagePair {
        &self.pair
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn v_e(&self) -> Option<&[f64]> {
        self.v_e.as_deref()
    }

    pub fn v_r(&self) -> Option<&[f64]> {
        self.v_r.as_deref()
    }

    pub fn m_e(&self) -> Option<&Array2<f64>> {
        self.m_e.as_ref()
    }

    pub fn m_r(&self) -> Option<&Array2<f64>> {
        self.m_r.as_ref()
    }

    pub fn v_e_mut(&mut self) -> Option<&mut Vec<f64>> {
        self.v_e.as_mut()
    }

    pub fn v_r_mut(&mut self) -> Option<&mut Vec<f64>> {
        self.v_r.as_mut()
    }

    /// Mutable access to a matrix; invalidates its cached inverse.
    pub fn matrix_mut(&mut self, kind: MatrixKind) -> Option<&mut Array2<f64>> {
        match kind {
            MatrixKind::Entity => {
                self.inv_e = OnceLock::new();
                self.m_e.as_mut()
            }
            MatrixKind::Relation => {
                self.inv_r = OnceLock::new();
                self.m_r.as_mut()
            }
        }
    }

    /// Inverse of a stored matrix, computed on first use and cached until the
    /// matrix is next written.
    pub fn inverse(&self, kind: MatrixKind) -> Result<&Array2<f64>> {
        let (m, cache) = match kind {
            MatrixKind::Entity => (self.m_e.as_ref(), &self.inv_e),
            MatrixKind::Relation => (self.m_r.as_ref(), &self.inv_r),
        };
        let m = m.ok_or_else(|| Error::Format(format!("{} has no {kind:?} matrix", self.variant)))?;
        let cached = cache.get_or_init(|| match linalg::invert(m.view()) {
            Ok((inv, _)) => Ok(inv),
            Err(Error::SingularMatrix { condition }) => Err(condition),
            Err(_) => Err(f64::INFINITY),
        });
        cached
            .as_ref()
            .map_err(|&condition| Error::SingularMatrix { condition })
    }

    /// 1-norm condition numbers of the stored matrices.
    pub fn condition_numbers(&self) -> Vec<f64> {
        self.m_e
            .iter()
            .chain(&self.m_r)
            .map(|m| linalg::condition_number(m.view()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub(crate) variant: Variant,
    pub(crate) k: usize,
    pub(crate) spaces: BTreeMap<LanguageId, EmbeddingSpace>,
    pub(crate) transitions: BTreeMap<LanguagePair, TransitionParams>,
}

impl Model {
    pub fn new(
        variant: Variant,
        k: usize,
        spaces: BTreeMap<LanguageId, EmbeddingSpace>,
        transitions: BTreeMap<LanguagePair, TransitionParams>,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("dimensionality k must be at least 1".into()));
        }
        for s in spaces.values() {
            if s.dim() != k {
                return Err(Error::Format(format!("space {} has width {} not {k}", s.language, s.dim())));
            }
        }
        for t in transitions.values() {
            if t.variant != variant {
                return Err(Error::Format(format!("transition {} is {} not {variant}", t.pair, t.variant)));
            }
            for lang in [t.pair.first(), t.pair.second()] {
                if !spaces.contains_key(lang) {
                    return Err(Error::UnknownLanguage(lang.to_string()));
                }
            }
        }
        Ok(Model {
            variant,
            k,
            spaces,
            transitions,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn spaces(&self) -> &BTreeMap<LanguageId, EmbeddingSpace> {
        &self.spaces
    }

    pub fn space(&self, lang: &LanguageId) -> Result<&EmbeddingSpace> {
        self.spaces
            .get(lang)
            .ok_or_else(|| Error::UnknownLanguage(lang.to_string()))
    }

    pub fn space_mut(&mut self, lang: &LanguageId) -> Result<&mut EmbeddingSpace> {
        self.spaces
            .get_mut(lang)
            .ok_or_else(|| Error::UnknownLanguage(lang.to_string()))
    }

    pub fn transitions(&self) -> &BTreeMap<LanguagePair, TransitionParams> {
        &self.transitions
    }

    pub fn transition(&self, pair: &LanguagePair) -> Option<&TransitionParams> {
        self.transitions.get(pair)
    }

    pub fn transition_mut(&mut self, pair: &LanguagePair) -> Option<&mut TransitionParams> {
        self.transitions.get_mut(pair)
    }

    pub fn max_entity_norm_drift(&self) -> f64 {
        self.spaces
            .values()
            .map(EmbeddingSpace::max_entity_norm_drift)
            .fold(0.0, f64::max)
    }

    /// Rounds every parameter to the nearest 32-bit float, the precision of
    /// the on-disk format.
    pub fn round_to_f32(&mut self) {
        let round = |x: &mut f64| *x = *x as f32 as f64;
        for s in self.spaces.values_mut() {
            s.entities.iter_mut().for_each(round);
            s.relations.iter_mut().for_each(round);
        }
        for t in self.transitions.values_mut() {
            for v in t.v_e.iter_mut().chain(t.v_r.iter_mut()) {
                v.iter_mut().for_each(round);
            }
            for kind in [MatrixKind::Entity, MatrixKind::Relation] {
                if let Some(m) = t.matrix_mut(kind) {
                    m.iter_mut().for_each(round);
                }
            }
        }
    }
}

/// Returns `v / ‖v‖₂`.
pub fn project_to_sphere(v: &[f64]) -> Result<Vec<f64>> {
    let mut out = v.to_vec();
    normalize_in_place(&mut out)?;
    Ok(out)
}

pub(crate) fn normalize_in_place(v: &mut [f64]) -> Result<()> {
    let n = linalg::l2_norm(v);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::ZeroVector);
    }
    v.iter_mut().for_each(|x| *x /= n);
    Ok(())
}

fn sphere_matrix<R: rand::Rng>(rng: &mut R, rows: usize, k: usize) -> Array2<f64> {
    let mut m = Array2::zeros((rows, k));
    for mut row in m.rows_mut() {
        let v = linalg::random_unit_vector(rng, k);
        row.iter_mut().zip(v).for_each(|(dst, x)| *dst = x);
    }
    m
}

/// Initializes every parameter of a model for `kb`. Entity and relation
/// vectors are uniform on the unit sphere, translation vectors are zero and
/// matrices are random orthogonal. Each language and each pair draws from
/// its own seed-derived stream.
pub fn init_model(kb: &MultilingualKb, variant: Variant, k: usize, seed: u64) -> Result<Model> {
    if k == 0 {
        return Err(Error::Config("dimensionality k must be at least 1".into()));
    }
    if kb.graphs().is_empty() {
        return Err(Error::InvalidKb("knowledge base has no graphs".into()));
    }
    let spaces = kb
        .graphs()
        .values()
        .enumerate()
        .map(|(i, g)| {
            let mut rng = seed::rng(seed, Stream::InitSpace, i as u64);
            let entities = sphere_matrix(&mut rng, g.num_entities(), k);
            let relations = sphere_matrix(&mut rng, g.num_relations(), k);
            (
                g.language().clone(),
                EmbeddingSpace {
                    language: g.language().clone(),
                    entities,
                    relations,
                },
            )
        })
        .collect();
    let mut transitions = BTreeMap::new();
    for (i, set) in kb.alignments().values().enumerate() {
        if set.is_empty() {
            continue;
        }
        let mut rng = seed::rng(seed, Stream::InitTransition, i as u64);
        let zero = || Some(vec![0.0; k]);
        let (v_e, v_r) = if variant.has_translation_vectors() {
            (zero(), zero())
        } else {
            (None, None)
        };
        let m_e = variant
            .has_entity_matrix()
            .then(|| linalg::random_orthogonal(&mut rng, k));
        let m_r = variant
            .has_relation_matrix()
            .then(|| linalg::random_orthogonal(&mut rng, k));
        let t = TransitionParams::new(set.pair().clone(), variant, k, v_e, v_r, m_e, m_r)?;
        transitions.insert(set.pair().clone(), t);
    }
    Model::new(variant, k, spaces, transitions)
}
