use alloc::vec::Vec;

use rand::Rng;

use super::edit::{attackable_positions, insertion_slots, Edit, EditOp};
use crate::error::{Error, Result};
use crate::text::{TokenId, TokenSeq};
use crate::victim::{first_order_score, Victim};

/// Running argmax with the `(pos, token)` lexicographic tie-break.
struct Best {
    best: Option<(f64, usize, TokenId)>,
}

impl Best {
    fn new() -> Self {
        Self { best: None }
    }

    fn offer(&mut self, score: f64, pos: usize, token: TokenId) {
        let better = match self.best {
            None => true,
            Some((s, p, t)) => score > s || (score == s && (pos, token) < (p, t)),
        };
        if better {
            self.best = Some((score, pos, token));
        }
    }
}

/// Best single-token replacement over every attackable position and its
/// LM candidates, scored by `(e(x_j) − e(x_i))·∇_{x_i}L`.
pub fn score_replacement<V: Victim + ?Sized>(model: &V, x: &TokenSeq, y: usize, k: usize) -> Result<EditOp> {
    let positions = attackable_positions(x);
    if positions.is_empty() {
        return Err(Error::NoCandidate);
    }
    let (_, grads) = model.loss_and_grads(x, y);
    let mut best = Best::new();
    for pos in positions {
        let old = model.embedding(x.ids()[pos]);
        let g = grads.row(pos);
        for token in model.candidates(x, pos, k)?.tokens {
            best.offer(first_order_score(model.embedding(token), old, g), pos, token);
        }
    }
    let (score, pos, token) = best.best.ok_or(Error::NoCandidate)?;
    Ok(EditOp { edit: Edit::Replace { pos, token }, score })
}

/// Best insertion: for each slot, a placeholder is inserted, a fresh
/// gradient is taken at it, and LM candidates for that slot are scored by
/// `(e(x_j) − e(placeholder))·∇L`. The chosen token takes the placeholder's
/// place.
pub fn score_insertion<V: Victim + ?Sized>(
    model: &V,
    x: &TokenSeq,
    y: usize,
    k: usize,
    placeholder: TokenId,
) -> Result<EditOp> {
    if x.len() + 1 > model.max_len() {
        return Err(Error::LengthExceeded(model.max_len()));
    }
    let base = model.embedding(placeholder);
    let mut best = Best::new();
    for slot in insertion_slots(x) {
        let probe = x.with_inserted(slot, placeholder);
        let (_, grads) = model.loss_and_grads(&probe, y);
        let g = grads.row(slot);
        for token in model.candidates(&probe, slot, k)?.tokens {
            best.offer(first_order_score(model.embedding(token), base, g), slot, token);
        }
    }
    let (score, pos, token) = best.best.ok_or(Error::NoCandidate)?;
    Ok(EditOp { edit: Edit::Insert { pos, token }, score })
}

/// `α_i = (e(BLK) − e(x_i))·∇_{x_i}L` for every attackable position: the
/// first-order loss change of turning `x_i` into the no-op placeholder, so
/// the largest `α` marks the token whose removal hurts the prediction most.
pub fn deletion_scores<V: Victim + ?Sized>(model: &V, x: &TokenSeq, y: usize) -> Vec<(usize, f64)> {
    let (_, grads) = model.loss_and_grads(x, y);
    let blk = model.embedding(TokenId::BLK);
    attackable_positions(x)
        .into_iter()
        .map(|pos| (pos, first_order_score(blk, model.embedding(x.ids()[pos]), grads.row(pos))))
        .collect()
}

/// Deletes the position with the largest `α`; lower positions win ties.
/// Requires two attackable positions so the result keeps a content token.
pub fn score_deletion<V: Victim + ?Sized>(model: &V, x: &TokenSeq, y: usize) -> Result<EditOp> {
    if x.content_len() < 2 {
        return Err(Error::TooShort);
    }
    let mut best: Option<(usize, f64)> = None;
    for (pos, alpha) in deletion_scores(model, x, y) {
        if best.map_or(true, |(_, a)| alpha > a) {
            best = Some((pos, alpha));
        }
    }
    let (pos, score) = best.ok_or(Error::NoCandidate)?;
    Ok(EditOp { edit: Edit::Delete { pos }, score })
}

/// Insertion scored with `[MASK]` in the placeholder role.
pub fn naive_insert_baseline<V: Victim + ?Sized>(model: &V, x: &TokenSeq, y: usize, k: usize) -> Result<EditOp> {
    score_insertion(model, x, y, k, TokenId::MASK)
}

/// Deletes a uniformly random attackable position. The op carries score 0.
pub fn naive_delete_baseline<R: Rng + ?Sized>(x: &TokenSeq, rng: &mut R) -> Result<EditOp> {
    if x.content_len() < 2 {
        return Err(Error::TooShort);
    }
    let positions = attackable_positions(x);
    let pos = positions[rng.gen_range(0..positions.len())];
    Ok(EditOp { edit: Edit::Delete { pos }, score: 0.0 })
}
