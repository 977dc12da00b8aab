use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::masked::MaskedTarget;
use super::model::{NatObjective, Seq2SeqModel};
use crate::attack::{apply_edit, Edit, EditOp, OpKind, OpSet};
use crate::error::{Error, Result};
use crate::nn::{softmax, Tape, Tensor};
use crate::rng::seeded;
use crate::text::{TokenId, TokenSeq, SPECIAL_TOKENS};
use crate::victim::first_order_score;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Encoder,
    Decoder,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NatAttackConfig {
    pub steps: usize,
    /// Decoder-side candidates: top-k of the decoder output head.
    pub top_k: usize,
    pub allowed_ops: OpSet,
    pub seed: u64,
}

impl Default for NatAttackConfig {
    fn default() -> Self {
        Self { steps: 3, top_k: 32, allowed_ops: OpSet::ALL, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NatAttackResult {
    pub src: TokenSeq,
    pub target: MaskedTarget,
    pub trace: Vec<(Side, EditOp)>,
    pub loss_before: f64,
    pub loss_after: f64,
}

/// Masked-slot loss `−Σ log P(y_m | y_r, x)`.
pub fn masked_loss(model: &Seq2SeqModel, src: &TokenSeq, target: &MaskedTarget) -> Result<f64> {
    let targets = target.targets();
    model.objective_loss(src, &target.input, &NatObjective::masked_sum(&targets))
}

fn input_grads(model: &Seq2SeqModel, src: &TokenSeq, target: &MaskedTarget) -> Result<(Tensor, Tensor)> {
    let targets = target.targets();
    let mut tape = Tape::new();
    model.forward(src, &target.input, &NatObjective::masked_sum(&targets), &mut tape)?;
    model.backward(&mut tape, None)
}

struct Candidates<'a> {
    model: &'a Seq2SeqModel,
    source_vocab: &'a [TokenId],
    k: usize,
}

impl Candidates<'_> {
    /// Encoder side: the whole source vocabulary. Decoder side: top-k of the
    /// output head with `pos` masked.
    fn at(&self, side: Side, src: &TokenSeq, dec: &TokenSeq, pos: usize) -> Vec<TokenId> {
        let current = match side {
            Side::Encoder => src.ids()[pos],
            Side::Decoder => dec.ids()[pos],
        };
        match side {
            Side::Encoder => self.source_vocab.iter().copied().filter(|&t| t != current).collect(),
            Side::Decoder => {
                let query = dec.with_replaced(pos, TokenId::MASK);
                let probs = softmax(self.model.token_logits(src, &query).row(pos));
                let mut ids: Vec<TokenId> = (SPECIAL_TOKENS.len()..probs.len())
                    .map(|i| TokenId(i as u32))
                    .filter(|&t| t != current)
                    .collect();
                ids.sort_by(|a, b| probs[b.index()].total_cmp(&probs[a.index()]).then(a.cmp(b)));
                ids.truncate(self.k);
                ids
            }
        }
    }
}

fn offer(best: &mut Option<(f64, usize, TokenId)>, score: f64, pos: usize, token: TokenId) {
    let better = match *best {
        None => true,
        Some((s, p, t)) => score > s || (score == s && (pos, token) < (p, t)),
    };
    if better {
        *best = Some((score, pos, token));
    }
}

fn side_seq<'a>(side: Side, src: &'a TokenSeq, target: &'a MaskedTarget) -> &'a TokenSeq {
    match side {
        Side::Encoder => src,
        Side::Decoder => &target.input,
    }
}

fn best_edit(
    cands: &Candidates<'_>,
    side: Side,
    kind: OpKind,
    src: &TokenSeq,
    target: &MaskedTarget,
) -> Result<EditOp> {
    let model = cands.model;
    let seq = side_seq(side, src, target);
    let pick = |g: &(Tensor, Tensor)| -> Tensor {
        match side {
            Side::Encoder => g.0.clone(),
            Side::Decoder => g.1.clone(),
        }
    };
    match kind {
        OpKind::Replace => {
            let g = pick(&input_grads(model, src, target)?);
            let mut best = None;
            for pos in seq.content_positions() {
                let old = model.embedding(seq.ids()[pos]);
                for token in cands.at(side, src, &target.input, pos) {
                    offer(&mut best, first_order_score(model.embedding(token), old, g.row(pos)), pos, token);
                }
            }
            let (score, pos, token) = best.ok_or(Error::NoCandidate)?;
            Ok(EditOp { edit: Edit::Replace { pos, token }, score })
        }
        OpKind::Insert => {
            let blk = model.embedding(TokenId::BLK);
            let mut best = None;
            for slot in 0..=seq.len() {
                let probe = seq.with_inserted(slot, TokenId::BLK);
                let (psrc, ptarget) = match side {
                    Side::Encoder => (probe, target.clone()),
                    Side::Decoder => (src.clone(), MaskedTarget { input: probe, gold: target.gold.clone() }),
                };
                let g = pick(&input_grads(model, &psrc, &ptarget)?);
                for token in cands.at(side, &psrc, &ptarget.input, slot) {
                    offer(&mut best, first_order_score(model.embedding(token), blk, g.row(slot)), slot, token);
                }
            }
            let (score, pos, token) = best.ok_or(Error::NoCandidate)?;
            Ok(EditOp { edit: Edit::Insert { pos, token }, score })
        }
        OpKind::Delete => {
            let g = pick(&input_grads(model, src, target)?);
            let blk = model.embedding(TokenId::BLK);
            let mut best: Option<(usize, f64)> = None;
            for pos in seq.content_positions() {
                let a = first_order_score(blk, model.embedding(seq.ids()[pos]), g.row(pos));
                if best.map_or(true, |(_, b)| a > b) {
                    best = Some((pos, a));
                }
            }
            let (pos, score) = best.ok_or(Error::TooShort)?;
            Ok(EditOp { edit: Edit::Delete { pos }, score })
        }
    }
}

fn feasible(model: &Seq2SeqModel, seq: &TokenSeq, kind: OpKind) -> bool {
    match kind {
        OpKind::Insert => seq.len() < model.config.max_len,
        OpKind::Delete => seq.content_len() >= 2,
        OpKind::Replace => seq.content_len() >= 1,
    }
}

/// Fixed-step joint attack on the encoder input and the residual decoder
/// tokens, scored with the masked-slot loss. Each step picks a side
/// uniformly (encoder only when no residual token exists), then a feasible
/// allowed op kind uniformly. `source_vocab` is the encoder-side candidate
/// set.
pub fn nat_attack(
    model: &Seq2SeqModel,
    src: &TokenSeq,
    target: &MaskedTarget,
    cfg: &NatAttackConfig,
    source_vocab: &[TokenId],
) -> Result<NatAttackResult> {
    let loss_before = masked_loss(model, src, target)?;
    let mut rng = seeded(cfg.seed);
    let cands = Candidates { model, source_vocab, k: cfg.top_k };
    let (mut src, mut target) = (src.clone(), target.clone());
    let mut trace = Vec::with_capacity(cfg.steps);
    for _ in 0..cfg.steps {
        let sides: Vec<Side> = [Side::Encoder, Side::Decoder]
            .into_iter()
            .filter(|&s| s == Side::Encoder || target.residual_count() > 0)
            .collect();
        let side = sides[rng.gen_range(0..sides.len())];
        let seq = side_seq(side, &src, &target);
        let kinds: Vec<OpKind> = cfg.allowed_ops.kinds().into_iter().filter(|&k| feasible(model, seq, k)).collect();
        if kinds.is_empty() {
            break;
        }
        let kind = kinds[rng.gen_range(0..kinds.len())];
        let op = best_edit(&cands, side, kind, &src, &target)?;
        match side {
            Side::Encoder => src = apply_edit(&src, &op.edit)?,
            Side::Decoder => target.input = apply_edit(&target.input, &op.edit)?,
        }
        trace.push((side, op));
    }
    let loss_after = masked_loss(model, &src, &target)?;
    Ok(NatAttackResult { src, target, trace, loss_before, loss_after })
}
