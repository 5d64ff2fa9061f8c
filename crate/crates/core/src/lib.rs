//! Multilingual knowledge-graph embeddings.
//!
//! Each language gets its own TransE embedding space; a cross-lingual
//! alignment model (one of five variants) ties the spaces together through
//! aligned triples. The crate covers loading, training, persistence and the
//! ranking and verification evaluations.

pub mod alignment;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod kg;
pub mod knowledge;
pub mod linalg;
pub mod seed;
pub mod store;
pub mod synthetic;
pub mod trainer;
pub mod twa;

#[cfg(test)]
pub(crate) mod test_support;

pub use ndarray;

pub use alignment::{alignment_grad, alignment_score, transit_entity, transit_relation, Transit};
pub use embedding::{init_model, project_to_sphere, EmbeddingSpace, Model, TransitionParams, Variant};
pub use error::{Error, Result};
pub use eval::{PrPoint, RankReport};
pub use kg::{AlignmentSet, IllSet, KnowledgeGraph, LanguageId, LanguagePair, MultilingualKb, Triple};
pub use knowledge::{triple_grad, triple_score, NormOrder, TripleGrad};
pub use seed::Stream;
pub use store::{load_model, save_model};
pub use trainer::{continue_training, train, train_with, EpochReport, TrainConfig};
pub use twa::{CvReport, LabeledCase};
