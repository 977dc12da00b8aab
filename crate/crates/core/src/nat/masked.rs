use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::text::{TokenId, TokenSeq};

/// Decoder-side input of the conditional masked LM: the target with some
/// slots replaced by `[MASK]`, plus the gold token of each masked slot in
/// order of appearance.
///
/// Residual (unmasked) tokens may be edited by attacks; masked slots move
/// only as a side effect of residual insertions or deletions, so the k-th
/// `[MASK]` always carries the k-th gold token.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedTarget {
    pub input: TokenSeq,
    pub gold: Vec<TokenId>,
}

impl MaskedTarget {
    /// Masks the positions flagged in `mask`.
    pub fn new(target: &TokenSeq, mask: &[bool]) -> Self {
        assert_eq!(target.len(), mask.len());
        let mut ids = target.ids().to_vec();
        let mut gold = Vec::new();
        for (i, &m) in mask.iter().enumerate() {
            if m {
                gold.push(ids[i]);
                ids[i] = TokenId::MASK;
            }
        }
        Self { input: TokenSeq::new(ids).expect("nonempty"), gold }
    }

    /// Masks a uniform-random number `1..=|y|` of uniform-random positions.
    pub fn sample<R: Rng + ?Sized>(target: &TokenSeq, rng: &mut R) -> Self {
        let n = target.len();
        let count = rng.gen_range(1..=n);
        let mut mask = alloc::vec![false; n];
        for i in sample(rng, n, count) {
            mask[i] = true;
        }
        Self::new(target, &mask)
    }

    /// All slots masked.
    pub fn full(target: &TokenSeq) -> Self {
        Self::new(target, &alloc::vec![true; target.len()])
    }

    /// `(position, gold)` for every masked slot of the current layout.
    pub fn targets(&self) -> Vec<(usize, TokenId)> {
        let positions = self.input.ids().iter().enumerate().filter(|(_, &t)| t == TokenId::MASK).map(|(i, _)| i);
        positions.zip(self.gold.iter().copied()).collect()
    }

    pub fn masked_count(&self) -> usize {
        self.gold.len()
    }

    pub fn residual_count(&self) -> usize {
        self.input.content_len()
    }
}
