//! Adversarial data augmentation and continued fine-tuning of the classifier.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::attack::{attack_example, AttackConfig, AttackMode, Outcome};
use crate::classifier::{accuracy, continue_training, ClassifierModel, TrainConfig};
use crate::error::{Error, Result};
use crate::text::LabeledExample;
use crate::victim::Victim;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentedExample {
    pub example: LabeledExample,
    /// Index of the source training example for adversarial members.
    pub provenance: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AugmentedDataset {
    pub examples: Vec<AugmentedExample>,
    /// Correctly classified training examples that were attacked.
    pub attackable: usize,
    pub successes: usize,
}

impl AugmentedDataset {
    pub fn from_original(trainset: &[LabeledExample]) -> Self {
        let examples = trainset.iter().map(|e| AugmentedExample { example: e.clone(), provenance: None }).collect();
        Self { examples, attackable: 0, successes: 0 }
    }

    /// Appends the adversarial sequence of each successful attack with the
    /// source label.
    pub fn extend_with(&mut self, outcomes: &[Outcome]) {
        for (i, outcome) in outcomes.iter().enumerate() {
            let Outcome::Attacked(r) = outcome else { continue };
            self.attackable += 1;
            if r.success {
                self.successes += 1;
                self.examples.push(AugmentedExample {
                    example: LabeledExample { x: r.adversarial.clone(), y: r.original.y },
                    provenance: Some(i),
                });
            }
        }
    }

    pub fn ratio(&self) -> f64 {
        if self.attackable == 0 {
            0.0
        } else {
            self.successes as f64 / self.attackable as f64
        }
    }

    pub fn adversarial_count(&self) -> usize {
        self.examples.iter().filter(|e| e.provenance.is_some()).count()
    }

    pub fn labeled(&self) -> Vec<LabeledExample> {
        self.examples.iter().map(|e| e.example.clone()).collect()
    }
}

/// Attacks every training example (until-success) and keeps the successful
/// adversarial sequences, labeled with their source labels.
pub fn generate_adv_trainset<V: Victim + ?Sized>(
    model: &V,
    trainset: &[LabeledExample],
    cfg: &AttackConfig,
) -> Result<AugmentedDataset> {
    if cfg.mode != AttackMode::UntilSuccess {
        return Err(Error::Config("augmentation requires until_success attacks".into()));
    }
    cfg.validate()?;
    let outcomes = trainset
        .iter()
        .enumerate()
        .map(|(i, ex)| attack_example(model, ex, i, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut out = AugmentedDataset::from_original(trainset);
    out.extend_with(&outcomes);
    Ok(out)
}

/// Continued-training schedule relative to the original fine-tuning run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdvTrainConfig {
    pub epoch_fraction: f64,
    pub lr_scale: f64,
}

impl Default for AdvTrainConfig {
    fn default() -> Self {
        Self { epoch_fraction: 0.25, lr_scale: 0.1 }
    }
}

impl AdvTrainConfig {
    pub fn schedule(&self, base: &TrainConfig) -> TrainConfig {
        let epochs = libm::ceil(base.epochs as f64 * self.epoch_fraction).max(1.0) as usize;
        TrainConfig { epochs, lr: base.lr * self.lr_scale, ..base.clone() }
    }
}

/// Continues training a copy of `model` on the augmented set.
pub fn adv_finetune(
    model: &ClassifierModel,
    augmented: &AugmentedDataset,
    base: &TrainConfig,
    adv: &AdvTrainConfig,
) -> Result<ClassifierModel> {
    if augmented.examples.is_empty() {
        return Err(Error::Config("augmented dataset is empty".into()));
    }
    let mut out = model.clone();
    continue_training(&mut out, &augmented.labeled(), &adv.schedule(base))?;
    Ok(out)
}

/// Clean and attacked accuracy of one model on a test set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub clean_accuracy: f64,
    /// Fraction of the whole test set still correct after attack.
    pub robust_accuracy: f64,
    pub att_acc: Option<f64>,
}

pub fn robustness<V: Victim + ?Sized>(model: &V, test: &[LabeledExample], cfg: &AttackConfig) -> Result<RobustnessReport> {
    let eval = crate::attack::evaluate_attack(model, test, cfg)?;
    let still = eval.metrics.attacked - eval.metrics.successes;
    Ok(RobustnessReport {
        clean_accuracy: accuracy(model, test),
        robust_accuracy: still as f64 / test.len().max(1) as f64,
        att_acc: eval.metrics.att_acc,
    })
}
