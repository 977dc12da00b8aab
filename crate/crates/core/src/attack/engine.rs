use alloc::vec::Vec;

use rand::Rng;

use super::config::{AttackConfig, AttackMode, DeletionRule, InsertionRule};
use super::edit::{apply_edit, EditOp, OpKind};
use super::ops::{naive_delete_baseline, naive_insert_baseline, score_deletion, score_insertion, score_replacement};
use crate::error::{Error, Result};
use crate::rng::seeded;
use crate::similarity::{encode, SentenceVector};
use crate::text::{LabeledExample, TokenId, TokenSeq};
use crate::victim::Victim;

#[derive(Clone, Debug, PartialEq)]
pub struct AttackResult {
    pub original: LabeledExample,
    pub adversarial: TokenSeq,
    /// Accepted edits in application order.
    pub trace: Vec<EditOp>,
    pub success: bool,
    pub steps_used: usize,
    /// Gate rejections over the whole run.
    pub skipped: usize,
    /// Accepted edits divided by the original content length.
    pub perturb_ratio: f64,
    /// Similarity of the final sequence to the original.
    pub similarity: f64,
    pub final_prediction: usize,
}

fn feasible<V: Victim + ?Sized>(model: &V, x: &TokenSeq, kind: OpKind) -> bool {
    match kind {
        OpKind::Insert => x.len() < model.max_len(),
        OpKind::Delete => x.content_len() >= 2,
        OpKind::Replace => x.content_len() >= 1,
    }
}

/// Runs the gated multi-step attack on one correctly classified example.
///
/// Each step samples a feasible allowed op kind uniformly, computes that
/// kind's best edit on the current sequence and accepts it only if the edited
/// sequence stays within `θ` of the original. Rejections do not consume the
/// budget; `max_consecutive_skips` of them in a row end the run.
pub fn attack<V: Victim + ?Sized>(model: &V, example: &LabeledExample, cfg: &AttackConfig) -> Result<AttackResult> {
    cfg.validate()?;
    let x0 = &example.x;
    let y = example.y;
    if model.predict(x0).label != y {
        return Err(Error::NotCorrectlyClassified);
    }
    let content_len = x0.content_len();
    let budget = cfg.budget(content_len);
    let kinds = cfg.allowed_ops.kinds();
    let anchor: Option<SentenceVector> = encode(model, x0).ok();
    let mut rng = seeded(cfg.seed);

    let mut current = x0.clone();
    let mut trace = Vec::new();
    let mut prediction = y;
    let mut skipped = 0;
    let mut consecutive = 0;
    // Best edit per kind for the current sequence; cleared on every accept.
    let mut cache: [Option<EditOp>; 3] = [None; 3];

    while trace.len() < budget && consecutive < cfg.max_consecutive_skips {
        let options: Vec<OpKind> = kinds.iter().copied().filter(|&k| feasible(model, &current, k)).collect();
        if options.is_empty() {
            break;
        }
        let kind = options[rng.gen_range(0..options.len())];
        let slot = kind as usize;
        let op = match (kind, cache[slot]) {
            (OpKind::Delete, _) if cfg.deletion == DeletionRule::NaiveRandom => naive_delete_baseline(&current, &mut rng),
            (_, Some(op)) => Ok(op),
            (OpKind::Replace, None) => score_replacement(model, &current, y, cfg.top_k),
            (OpKind::Insert, None) => match cfg.insertion {
                InsertionRule::Blank => score_insertion(model, &current, y, cfg.top_k, TokenId::BLK),
                InsertionRule::NaiveMask => naive_insert_baseline(model, &current, y, cfg.top_k),
            },
            (OpKind::Delete, None) => score_deletion(model, &current, y),
        };
        let Ok(op) = op else {
            skipped += 1;
            consecutive += 1;
            continue;
        };
        if !(kind == OpKind::Delete && cfg.deletion == DeletionRule::NaiveRandom) {
            cache[slot] = Some(op);
        }
        let candidate = apply_edit(&current, &op.edit)?;
        let similarity = match (&anchor, encode(model, &candidate)) {
            (Some(a), Ok(v)) => a.cosine(&v),
            _ => f64::NEG_INFINITY,
        };
        if similarity < cfg.sim_threshold {
            skipped += 1;
            consecutive += 1;
            continue;
        }
        consecutive = 0;
        cache = [None; 3];
        current = candidate;
        trace.push(op);
        prediction = model.predict(&current).label;
        if cfg.mode == AttackMode::UntilSuccess && prediction != y {
            break;
        }
    }

    let similarity = match (&anchor, encode(model, &current)) {
        (Some(a), Ok(v)) => a.cosine(&v),
        _ => 0.0,
    };
    let steps_used = trace.len();
    Ok(AttackResult {
        original: example.clone(),
        adversarial: current,
        success: prediction != y,
        steps_used,
        skipped,
        perturb_ratio: if content_len == 0 { 0.0 } else { steps_used as f64 / content_len as f64 },
        similarity,
        final_prediction: prediction,
        trace,
    })
}
