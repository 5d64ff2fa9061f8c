//! Monolingual TransE: a triple scores `‖h + r − t‖`.

use std::fmt;
use std::str::FromStr;

use crate::embedding::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::kg::Triple;
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormOrder {
    L1,
    L2,
}

impl NormOrder {
    pub fn norm(self, v: &[f64]) -> f64 {
        match self {
            NormOrder::L1 => linalg::l1_norm(v),
            NormOrder::L2 => linalg::l2_norm(v),
        }
    }

    /// (Sub)gradient of `‖d‖` with respect to `d`. Zero at the kink.
    pub fn direction(self, d: &[f64]) -> Vec<f64> {
        match self {
            NormOrder::L1 => d
                .iter()
                .map(|&x| if x > 0.0 { 1.0 } else if x < 0.0 { -1.0 } else { 0.0 })
                .collect(),
            NormOrder::L2 => {
                let n = linalg::l2_norm(d);
                if n == 0.0 {
                    vec![0.0; d.len()]
                } else {
                    d.iter().map(|x| x / n).collect()
                }
            }
        }
    }
}

impl fmt::Display for NormOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormOrder::L1 => "l1",
            NormOrder::L2 => "l2",
        })
    }
}

impl FromStr for NormOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" | "1" => Ok(NormOrder::L1),
            "l2" | "2" => Ok(NormOrder::L2),
            _ => Err(Error::Config(format!("unknown norm {s:?}"))),
        }
    }
}

/// Partial derivatives of a triple score with respect to h, r and t.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleGrad {
    pub d_h: Vec<f64>,
    pub d_r: Vec<f64>,
    pub d_t: Vec<f64>,
}

fn residual(h: &[f64], r: &[f64], t: &[f64]) -> Vec<f64> {
    h.iter().zip(r).zip(t).map(|((h, r), t)| h + r - t).collect()
}

pub fn transe_score(h: &[f64], r: &[f64], t: &[f64], norm: NormOrder) -> f64 {
    norm.norm(&residual(h, r, t))
}

pub fn transe_grad(h: &[f64], r: &[f64], t: &[f64], norm: NormOrder) -> TripleGrad {
    let d_h = norm.direction(&residual(h, r, t));
    let d_t = d_h.iter().map(|x| -x).collect();
    TripleGrad {
        d_r: d_h.clone(),
        d_h,
        d_t,
    }
}

pub fn triple_score(space: &EmbeddingSpace, t: Triple, norm: NormOrder) -> f64 {
    transe_score(space.entity(t.head), space.relation(t.relation), space.entity(t.tail), norm)
}

pub fn triple_grad(space: &EmbeddingSpace, t: Triple, norm: NormOrder) -> TripleGrad {
    transe_grad(space.entity(t.head), space.relation(t.relation), space.entity(t.tail), norm)
}
