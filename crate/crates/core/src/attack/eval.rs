use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::config::AttackConfig;
use super::engine::{attack, AttackResult};
use crate::error::Result;
use crate::rng::derive_seed;
use crate::text::LabeledExample;
use crate::victim::Victim;

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    /// The victim already misclassifies the clean input; it is not attacked.
    Misclassified,
    Attacked(AttackResult),
}

/// Dataset-level attack metrics. Rates are fractions in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackMetrics {
    pub total: usize,
    pub attacked: usize,
    pub successes: usize,
    pub ori_acc: f64,
    /// Fraction of the attacked pool still classified correctly; `None` when
    /// the pool is empty.
    pub att_acc: Option<f64>,
    /// Mean accepted edits per original content token over the attacked pool.
    pub perturb: Option<f64>,
    /// Mean similarity over successful attacks.
    pub mean_sim: Option<f64>,
    pub empty_pool: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub metrics: AttackMetrics,
    pub outcomes: Vec<Outcome>,
}

/// Attacks example `index` of a dataset with its own derived seed, so results
/// do not depend on evaluation order.
pub fn attack_example<V: Victim + ?Sized>(
    model: &V,
    example: &LabeledExample,
    index: usize,
    cfg: &AttackConfig,
) -> Result<Outcome> {
    if model.predict(&example.x).label != example.y {
        return Ok(Outcome::Misclassified);
    }
    let cfg = AttackConfig { seed: derive_seed(cfg.seed, index as u64), ..cfg.clone() };
    Ok(Outcome::Attacked(attack(model, example, &cfg)?))
}

pub fn summarize(outcomes: &[Outcome]) -> AttackMetrics {
    let results: Vec<&AttackResult> = outcomes
        .iter()
        .filter_map(|o| match o {
            Outcome::Attacked(r) => Some(r),
            Outcome::Misclassified => None,
        })
        .collect();
    let total = outcomes.len();
    let attacked = results.len();
    let successes = results.iter().filter(|r| r.success).count();
    let mean = |xs: &mut dyn Iterator<Item = f64>| {
        let (s, n) = xs.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        (n > 0).then(|| s / n as f64)
    };
    AttackMetrics {
        total,
        attacked,
        successes,
        ori_acc: if total == 0 { 0.0 } else { attacked as f64 / total as f64 },
        att_acc: (attacked > 0).then(|| (attacked - successes) as f64 / attacked as f64),
        perturb: mean(&mut results.iter().map(|r| r.perturb_ratio)),
        mean_sim: mean(&mut results.iter().filter(|r| r.success).map(|r| r.similarity)),
        empty_pool: attacked == 0,
    }
}

/// Attacks every correctly classified example of `dataset`.
pub fn evaluate_attack<V: Victim + ?Sized>(model: &V, dataset: &[LabeledExample], cfg: &AttackConfig) -> Result<Evaluation> {
    cfg.validate()?;
    let outcomes = dataset
        .iter()
        .enumerate()
        .map(|(i, ex)| attack_example(model, ex, i, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(Evaluation { metrics: summarize(&outcomes), outcomes })
}
