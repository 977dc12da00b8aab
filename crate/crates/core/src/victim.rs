//! The interface the attack engine, similarity gate and oracles need from a
//! victim model.

use alloc::vec::Vec;

use crate::error::Result;
use crate::nn::Tensor;
use crate::text::{TokenId, TokenSeq};

/// Per-position loss gradients with respect to the input embeddings,
/// `[len × dim]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientView(pub Tensor);

impl GradientView {
    pub fn row(&self, pos: usize) -> &[f64] {
        self.0.row(pos)
    }

    pub fn len(&self) -> usize {
        self.0.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.rows() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub label: usize,
    pub probs: Vec<f64>,
}

/// LM-refined replacement candidates for one position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CandidateSet {
    pub tokens: Vec<TokenId>,
    /// Set when no language model was available and candidates are simply the
    /// first `k` content tokens by id.
    pub uniform_fallback: bool,
}

pub trait Victim {
    fn dim(&self) -> usize;
    fn vocab_size(&self) -> usize;
    fn max_len(&self) -> usize;
    fn embedding(&self, token: TokenId) -> &[f64];
    fn loss(&self, x: &TokenSeq, y: usize) -> f64;
    fn loss_and_grads(&self, x: &TokenSeq, y: usize) -> (f64, GradientView);
    fn predict(&self, x: &TokenSeq) -> Prediction;
    /// Top-`k` content tokens for position `pos` with that position hidden,
    /// excluding the token currently there.
    fn candidates(&self, x: &TokenSeq, pos: usize, k: usize) -> Result<CandidateSet>;

    fn content_ids(&self) -> core::iter::Map<core::ops::Range<usize>, fn(usize) -> TokenId> {
        (crate::text::SPECIAL_TOKENS.len()..self.vocab_size()).map(|i| TokenId(i as u32))
    }
}

/// First-order score `(e(new) − e(old))ᵀ g`.
pub fn first_order_score(new: &[f64], old: &[f64], grad: &[f64]) -> f64 {
    new.iter().zip(old).zip(grad).map(|((a, b), g)| (a - b) * g).sum()
}
