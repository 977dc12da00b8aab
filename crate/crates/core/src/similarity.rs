//! Sentence similarity used as the per-step acceptance gate.
//!
//! A sentence is the L2-normalized mean of the victim's (frozen) embedding
//! rows over its non-special positions; similarity is the cosine of two such
//! vectors.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::text::TokenSeq;
use crate::victim::Victim;

#[derive(Clone, Debug, PartialEq)]
pub struct SentenceVector(Vec<f64>);

impl SentenceVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn cosine(&self, other: &SentenceVector) -> f64 {
        let c: f64 = self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum();
        c.clamp(-1.0, 1.0)
    }
}

pub fn encode<V: Victim + ?Sized>(model: &V, x: &TokenSeq) -> Result<SentenceVector> {
    let mut mean = alloc::vec![0.0; model.dim()];
    let mut n = 0usize;
    for &id in x.ids().iter().filter(|id| !id.is_special()) {
        for (m, e) in mean.iter_mut().zip(model.embedding(id)) {
            *m += e;
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::DegenerateInput);
    }
    let norm = libm::sqrt(mean.iter().map(|v| v * v).sum::<f64>());
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::DegenerateInput);
    }
    mean.iter_mut().for_each(|v| *v /= norm);
    Ok(SentenceVector(mean))
}

pub fn sim<V: Victim + ?Sized>(model: &V, a: &TokenSeq, b: &TokenSeq) -> Result<f64> {
    Ok(encode(model, a)?.cosine(&encode(model, b)?))
}
