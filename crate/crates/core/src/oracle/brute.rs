use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::text::{TokenId, TokenSeq};
use crate::victim::Victim;

/// Losses closer than this (relative) count as tied and fall back to the
/// `(pos, token)` order.
const TIE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BruteChoice {
    pub pos: usize,
    pub token: TokenId,
    pub loss: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BruteRanking {
    pub best: BruteChoice,
    /// Every evaluated edit, by descending true loss.
    pub ranking: Vec<BruteChoice>,
    pub forward_passes: usize,
}

impl BruteRanking {
    /// 1-based rank of `(pos, token)`.
    pub fn rank_of(&self, pos: usize, token: TokenId) -> Option<usize> {
        self.ranking.iter().position(|c| c.pos == pos && c.token == token).map(|r| r + 1)
    }
}

fn rank(mut all: Vec<BruteChoice>, forward_passes: usize) -> Result<BruteRanking> {
    let mut best: Option<BruteChoice> = None;
    for c in &all {
        let take = match best {
            None => true,
            Some(b) => {
                let tol = TIE_TOL * (1.0 + b.loss.abs());
                c.loss > b.loss + tol || ((c.loss - b.loss).abs() <= tol && (c.pos, c.token) < (b.pos, b.token))
            }
        };
        if take {
            best = Some(*c);
        }
    }
    let best = best.ok_or(Error::NoCandidate)?;
    all.sort_by(|a, b| b.loss.total_cmp(&a.loss).then((a.pos, a.token).cmp(&(b.pos, b.token))));
    // Keep the tolerance-resolved winner first so agreement implies rank 1.
    if let Some(i) = all.iter().position(|c| c.pos == best.pos && c.token == best.token) {
        let c = all.remove(i);
        all.insert(0, c);
    }
    Ok(BruteRanking { best, ranking: all, forward_passes })
}

/// Evaluates the true loss of every `(pos, candidate)` replacement.
pub fn brute_replacement<V: Victim + ?Sized>(
    model: &V,
    x: &TokenSeq,
    y: usize,
    candidate_sets: &[(usize, Vec<TokenId>)],
) -> Result<BruteRanking> {
    let mut all = Vec::new();
    for (pos, tokens) in candidate_sets {
        for &token in tokens {
            all.push(BruteChoice { pos: *pos, token, loss: model.loss(&x.with_replaced(*pos, token), y) });
        }
    }
    let n = all.len();
    rank(all, n)
}

/// Evaluates the true loss of every `(slot, candidate)` insertion; `slot` is
/// the index the new token occupies.
pub fn brute_insertion<V: Victim + ?Sized>(
    model: &V,
    x: &TokenSeq,
    y: usize,
    candidate_sets: &[(usize, Vec<TokenId>)],
) -> Result<BruteRanking> {
    let mut all = Vec::new();
    for (slot, tokens) in candidate_sets {
        for &token in tokens {
            all.push(BruteChoice { pos: *slot, token, loss: model.loss(&x.with_inserted(*slot, token), y) });
        }
    }
    let n = all.len();
    rank(all, n)
}

/// Content positions ordered by the loss increase their deletion causes,
/// largest first, lower position first among equal increases.
pub fn brute_delete_rank<V: Victim + ?Sized>(model: &V, x: &TokenSeq, y: usize) -> Result<Vec<(usize, f64)>> {
    if x.content_len() < 2 {
        return Err(Error::TooShort);
    }
    let base = model.loss(x, y);
    let mut out: Vec<(usize, f64)> = x
        .content_positions()
        .map(|pos| (pos, model.loss(&x.with_removed(pos), y) - base))
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(out)
}
