use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::masked::MaskedTarget;
use super::model::{NatConfig, NatObjective, Seq2SeqModel};
use crate::classifier::blk_augment;
use crate::error::{Error, Result};
use crate::nn::{Adam, AdamConfig, Tape};
use crate::rng::{derive_seed, seeded, Rng};
use crate::text::{BitextPair, TokenSeq};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NatTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub length_loss_weight: f64,
    /// Probability of one `[BLK]` in the source and, independently, in the
    /// decoder input of a training example.
    pub blk_insertion_prob: f64,
    pub grad_clip: Option<f64>,
    pub seed: u64,
}

impl Default for NatTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 16,
            lr: 2e-3,
            length_loss_weight: 1.0,
            blk_insertion_prob: 0.5,
            grad_clip: Some(5.0),
            seed: 0,
        }
    }
}

impl NatTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || !(self.lr > 0.0) || !(0.0..=1.0).contains(&self.blk_insertion_prob) {
            return Err(Error::Config("invalid translator training configuration".into()));
        }
        Ok(())
    }
}

/// A training instance whose masked decoder input is either drawn afresh
/// each epoch or fixed (attacked instances keep their attacked layout).
#[derive(Clone, Debug, PartialEq)]
pub enum NatInstance {
    Fresh(BitextPair),
    Fixed { src: TokenSeq, target: MaskedTarget, tgt_len: usize },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NatTrainStats {
    pub epoch_losses: Vec<f64>,
    /// Length-loss terms skipped because the offset was outside the head's range.
    pub skipped_length: usize,
}

pub fn nat_train(dataset: &[BitextPair], arch: NatConfig, cfg: &NatTrainConfig) -> Result<(Seq2SeqModel, NatTrainStats)> {
    if dataset.is_empty() {
        return Err(Error::Config("bitext is empty".into()));
    }
    let mut model = Seq2SeqModel::new(arch, cfg.seed)?;
    let instances: Vec<NatInstance> = dataset.iter().cloned().map(NatInstance::Fresh).collect();
    let stats = nat_continue_training(&mut model, &instances, cfg)?;
    Ok((model, stats))
}

/// Attacked instances carry no length target: their source was edited, so
/// the gold offset no longer describes it.
fn prepare(inst: &NatInstance, cfg: &NatTrainConfig, rng: &mut Rng) -> (TokenSeq, MaskedTarget, Option<usize>) {
    match inst {
        NatInstance::Fresh(pair) => {
            let target = MaskedTarget::sample(&pair.tgt, rng);
            let src = blk_augment(&pair.src, cfg.blk_insertion_prob, rng);
            let input = blk_augment(&target.input, cfg.blk_insertion_prob, rng);
            (src, MaskedTarget { input, gold: target.gold }, Some(pair.tgt.len()))
        }
        NatInstance::Fixed { src, target, .. } => (src.clone(), target.clone(), None),
    }
}

/// Trains on mean masked-token cross-entropy plus the length loss.
pub fn nat_continue_training(model: &mut Seq2SeqModel, data: &[NatInstance], cfg: &NatTrainConfig) -> Result<NatTrainStats> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Config("bitext is empty".into()));
    }
    let mut rng = seeded(derive_seed(cfg.seed, 2));
    let mut adam = Adam::new(model.params(), AdamConfig { lr: cfg.lr, ..AdamConfig::default() });
    let mut grads = model.zero_grads();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut stats = NatTrainStats::default();
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut batch_loss = 0.0;
            for &i in batch {
                let (src, target, tgt_len) = prepare(&data[i], cfg, &mut rng);
                let src_len = src.ids().iter().filter(|t| **t != crate::text::TokenId::BLK).count();
                let length_class = tgt_len.and_then(|t| model.config.offset_class(src_len, t));
                if tgt_len.is_some() && length_class.is_none() {
                    stats.skipped_length += 1;
                }
                let targets = target.targets();
                let obj = NatObjective {
                    targets: &targets,
                    token_weight: 1.0 / targets.len().max(1) as f64,
                    length_class,
                    length_weight: cfg.length_loss_weight,
                };
                let mut tape = Tape::new();
                batch_loss += model.forward(&src, &target.input, &obj, &mut tape)?;
                model.backward(&mut tape, Some(&mut grads))?;
            }
            if !batch_loss.is_finite() || !grads.all_finite() {
                return Err(Error::Divergence { epoch, step });
            }
            grads.scale(1.0 / batch.len() as f64);
            if let Some(clip) = cfg.grad_clip {
                let norm = libm::sqrt(grads.tensors().iter().flat_map(|t| t.data()).map(|g| g * g).sum::<f64>());
                if norm > clip {
                    grads.scale(clip / norm);
                }
            }
            adam.step(model.params_mut(), &mut grads);
            epoch_loss += batch_loss;
            step += 1;
        }
        stats.epoch_losses.push(epoch_loss / data.len() as f64);
    }
    Ok(stats)
}

/// Fraction of masked slots predicted correctly, one random mask per pair.
pub fn masked_token_accuracy(model: &Seq2SeqModel, data: &[BitextPair], seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let (mut hit, mut total) = (0usize, 0usize);
    for pair in data {
        let target = MaskedTarget::sample(&pair.tgt, &mut rng);
        let logits = model.token_logits(&pair.src, &target.input);
        for (pos, gold) in target.targets() {
            total += 1;
            hit += usize::from(super::decode::argmax_content(logits.row(pos)).0 == gold);
        }
    }
    if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    }
}
