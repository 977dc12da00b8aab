use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::attack::{nat_attack, NatAttackConfig};
use super::bleu::bleu;
use super::decode::mask_predict_decode;
use super::masked::MaskedTarget;
use super::model::Seq2SeqModel;
use super::train::{nat_continue_training, NatInstance, NatTrainConfig, NatTrainStats};
use crate::attack::OpSet;
use crate::error::Result;
use crate::rng::{derive_seed, seeded};
use crate::text::{BitextPair, TokenId};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NatAdvConfig {
    /// Attack steps per training pair are drawn from `1..=⌈fraction·|src|⌉`.
    pub max_step_fraction: f64,
    pub top_k: usize,
    pub allowed_ops: OpSet,
    pub seed: u64,
}

impl Default for NatAdvConfig {
    fn default() -> Self {
        Self { max_step_fraction: 0.15, top_k: 32, allowed_ops: OpSet::ALL, seed: 0 }
    }
}

/// Attacks pair `index` of a training set under a freshly sampled mask; the
/// gold supervision is left unchanged. Seeds derive from `(cfg.seed, index)`.
pub fn nat_adv_instance(
    model: &Seq2SeqModel,
    pair: &BitextPair,
    index: usize,
    cfg: &NatAdvConfig,
    source_vocab: &[TokenId],
) -> Result<NatInstance> {
    let mut rng = seeded(derive_seed(cfg.seed, index as u64));
    let target = MaskedTarget::sample(&pair.tgt, &mut rng);
    let max_steps = libm::ceil(cfg.max_step_fraction * pair.src.len() as f64).max(1.0) as usize;
    let steps = rng.gen_range(1..=max_steps);
    let acfg = NatAttackConfig { steps, top_k: cfg.top_k, allowed_ops: cfg.allowed_ops, seed: rng.gen() };
    let r = nat_attack(model, &pair.src, &target, &acfg, source_vocab)?;
    Ok(NatInstance::Fixed { src: r.src, target: r.target, tgt_len: pair.tgt.len() })
}

/// Attacks every training pair once; see [`nat_adv_instance`].
pub fn generate_nat_adv_set(
    model: &Seq2SeqModel,
    data: &[BitextPair],
    cfg: &NatAdvConfig,
    source_vocab: &[TokenId],
) -> Result<Vec<NatInstance>> {
    data.iter().enumerate().map(|(i, pair)| nat_adv_instance(model, pair, i, cfg, source_vocab)).collect()
}

/// Continues training a copy of `model` on the original pairs (fresh masks)
/// concatenated with the attacked instances.
pub fn nat_adv_finetune(
    model: &Seq2SeqModel,
    data: &[BitextPair],
    attacked: &[NatInstance],
    cfg: &NatTrainConfig,
) -> Result<(Seq2SeqModel, NatTrainStats)> {
    let mut all: Vec<NatInstance> = data.iter().cloned().map(NatInstance::Fresh).collect();
    all.extend_from_slice(attacked);
    let mut out = model.clone();
    let stats = nat_continue_training(&mut out, &all, cfg)?;
    Ok((out, stats))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BleuReport {
    pub clean_bleu: f64,
    pub attacked_bleu: f64,
    /// Relative drop `(clean − attacked)/clean` in percent.
    pub drop_pct: f64,
}

/// Clean and attacked decodes of test pair `index`. The attack scores
/// against a fully masked reference, so only the encoder side is edited.
pub fn decode_pair_under_attack(
    model: &Seq2SeqModel,
    pair: &BitextPair,
    index: usize,
    attack: &NatAttackConfig,
    iterations: usize,
    source_vocab: &[TokenId],
) -> Result<(Vec<TokenId>, Vec<TokenId>)> {
    let clean = mask_predict_decode(model, &pair.src, iterations).ids().to_vec();
    let cfg = NatAttackConfig { seed: derive_seed(attack.seed, index as u64), ..attack.clone() };
    let r = nat_attack(model, &pair.src, &MaskedTarget::full(&pair.tgt), &cfg, source_vocab)?;
    let attacked = mask_predict_decode(model, &r.src, iterations).ids().to_vec();
    Ok((clean, attacked))
}

/// Scores clean and attacked decodes, aligned with `test`.
pub fn bleu_report(test: &[BitextPair], decodes: &[(Vec<TokenId>, Vec<TokenId>)]) -> Result<BleuReport> {
    let refs: Vec<Vec<TokenId>> = test.iter().map(|p| p.tgt.ids().to_vec()).collect();
    let (clean, attacked): (Vec<_>, Vec<_>) = decodes.iter().cloned().unzip();
    let clean_bleu = bleu(&clean, &refs)?;
    let attacked_bleu = bleu(&attacked, &refs)?;
    let drop_pct = if clean_bleu > 0.0 { 100.0 * (clean_bleu - attacked_bleu) / clean_bleu } else { 0.0 };
    Ok(BleuReport { clean_bleu, attacked_bleu, drop_pct })
}

/// Clean BLEU and BLEU after a fixed-step encoder-side attack.
pub fn bleu_under_attack(
    model: &Seq2SeqModel,
    test: &[BitextPair],
    attack: &NatAttackConfig,
    iterations: usize,
    source_vocab: &[TokenId],
) -> Result<BleuReport> {
    let decodes = test
        .iter()
        .enumerate()
        .map(|(i, p)| decode_pair_under_attack(model, p, i, attack, iterations, source_vocab))
        .collect::<Result<Vec<_>>>()?;
    bleu_report(test, &decodes)
}

/// BLEU of mask-predict decodes against the references.
pub fn corpus_bleu(model: &Seq2SeqModel, test: &[BitextPair], iterations: usize) -> Result<f64> {
    let hyps: Vec<Vec<TokenId>> = test.iter().map(|p| mask_predict_decode(model, &p.src, iterations).ids().to_vec()).collect();
    let refs: Vec<Vec<TokenId>> = test.iter().map(|p| p.tgt.ids().to_vec()).collect();
    bleu(&hyps, &refs)
}
