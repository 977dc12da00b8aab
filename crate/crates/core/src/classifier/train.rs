use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::model::{ClassifierConfig, ClassifierModel, Objective};
use crate::error::{Error, Result};
use crate::nn::{Adam, AdamConfig, Tape};
use crate::rng::{derive_seed, seeded};
use crate::text::{LabeledExample, TokenId, TokenSeq};
use crate::victim::Victim;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Probability ρ of inserting one `[BLK]` into a training input.
    pub blk_insertion_prob: f64,
    /// Weight μ of the masked-LM objective; 0 disables it.
    pub mlm_loss_weight: f64,
    pub mask_rate: f64,
    /// Global gradient-norm clip applied per batch; `None` disables clipping.
    pub grad_clip: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 16,
            lr: 1e-3,
            blk_insertion_prob: 0.5,
            mlm_loss_weight: 0.5,
            mask_rate: 0.15,
            grad_clip: Some(5.0),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.blk_insertion_prob) {
            return Err(Error::Config(format!("blk_insertion_prob {} outside [0, 1]", self.blk_insertion_prob)));
        }
        if !(self.mlm_loss_weight >= 0.0) {
            return Err(Error::Config("mlm_loss_weight must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.mask_rate) {
            return Err(Error::Config("mask_rate outside [0, 1]".into()));
        }
        if self.batch_size == 0 || !(self.lr > 0.0) {
            return Err(Error::Config("batch_size and lr must be positive".into()));
        }
        Ok(())
    }
}

/// With probability `rho`, inserts one `[BLK]` at a uniform slot after the
/// leading `[CLS]` (or anywhere when there is none).
pub fn blk_augment<R: Rng + ?Sized>(x: &TokenSeq, rho: f64, rng: &mut R) -> TokenSeq {
    if rho <= 0.0 || !rng.gen_bool(rho.min(1.0)) {
        return x.clone();
    }
    let first = usize::from(x.ids()[0] == TokenId::CLS);
    let slot = rng.gen_range(first..=x.len());
    x.with_inserted(slot, TokenId::BLK)
}

/// Replaces a `mask_rate` fraction of content positions with `[MASK]`
/// (at least one when any exist). Returns the masked copy and the targets.
pub fn mlm_mask<R: Rng + ?Sized>(x: &TokenSeq, mask_rate: f64, rng: &mut R) -> (TokenSeq, Vec<(usize, TokenId)>) {
    let positions: Vec<usize> = x.content_positions().collect();
    let mut chosen: Vec<usize> = positions.iter().copied().filter(|_| rng.gen_bool(mask_rate)).collect();
    if chosen.is_empty() && !positions.is_empty() {
        chosen.push(positions[rng.gen_range(0..positions.len())]);
    }
    let mut ids = x.ids().to_vec();
    let targets = chosen
        .iter()
        .map(|&p| {
            let t = ids[p];
            ids[p] = TokenId::MASK;
            (p, t)
        })
        .collect();
    (TokenSeq::new(ids).expect("nonempty"), targets)
}

pub fn accuracy<V: Victim + ?Sized>(model: &V, data: &[LabeledExample]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let correct = data.iter().filter(|e| model.predict(&e.x).label == e.y).count();
    correct as f64 / data.len() as f64
}

/// Mean per-example training loss of each epoch.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub epoch_losses: Vec<f64>,
}

/// Trains a fresh classifier on `dataset`.
pub fn finetune(dataset: &[LabeledExample], arch: ClassifierConfig, cfg: &TrainConfig) -> Result<ClassifierModel> {
    Ok(finetune_with_stats(dataset, arch, cfg)?.0)
}

pub fn finetune_with_stats(
    dataset: &[LabeledExample],
    arch: ClassifierConfig,
    cfg: &TrainConfig,
) -> Result<(ClassifierModel, TrainStats)> {
    if dataset.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    let mut model = ClassifierModel::new(arch, cfg.seed)?;
    let stats = continue_training(&mut model, dataset, cfg)?;
    Ok((model, stats))
}

/// Runs `cfg.epochs` epochs of the joint objective on an existing model and
/// records its clean accuracy on `dataset`.
pub fn continue_training(model: &mut ClassifierModel, dataset: &[LabeledExample], cfg: &TrainConfig) -> Result<TrainStats> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    let mut rng = seeded(derive_seed(cfg.seed, 1));
    let mut adam = Adam::new(model.params(), AdamConfig { lr: cfg.lr, ..AdamConfig::default() });
    let mut grads = model.zero_grads();
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let use_mlm = cfg.mlm_loss_weight > 0.0;
    let mut step = 0;
    let mut stats = TrainStats::default();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut batch_loss = 0.0;
            for &i in batch {
                let ex = &dataset[i];
                let x = blk_augment(&ex.x, cfg.blk_insertion_prob, &mut rng);
                let mut tape = Tape::new();
                batch_loss += model.forward(&x, &Objective::classify(ex.y), &mut tape)?.loss;
                model.backward(&mut tape, Some(&mut grads))?;
                if use_mlm {
                    let (masked, targets) = mlm_mask(&ex.x, cfg.mask_rate, &mut rng);
                    if !targets.is_empty() {
                        let obj = Objective { label: None, mlm_targets: &targets, mlm_weight: cfg.mlm_loss_weight };
                        let mut tape = Tape::new();
                        batch_loss += model.forward(&masked, &obj, &mut tape)?.loss;
                        model.backward(&mut tape, Some(&mut grads))?;
                    }
                }
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
        stats.epoch_losses.push(epoch_loss / dataset.len() as f64);
    }
    model.mlm_trained |= use_mlm;
    model.clean_accuracy = Some(accuracy(model, dataset));
    Ok(stats)
}
