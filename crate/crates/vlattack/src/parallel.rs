//! Fan-out of per-example work over a rayon pool. Results are collected in
//! input order and every example derives its own seed from its index, so the
//! output does not depend on the worker count.

use rayon::prelude::*;
use vlattack_core::advtrain::{AugmentedDataset, RobustnessReport};
use vlattack_core::attack::{attack_example, summarize, AttackConfig, AttackMode, Evaluation};
use vlattack_core::classifier::accuracy;
use vlattack_core::nat::{bleu_report, decode_pair_under_attack, nat_adv_instance, BleuReport, NatAdvConfig, NatAttackConfig, NatInstance, Seq2SeqModel};
use vlattack_core::text::{BitextPair, LabeledExample, TokenId};
use vlattack_core::victim::Victim;
use vlattack_core::{Error, Result};

pub const WORKERS_ENV: &str = "VLATTACK_WORKERS";

/// `VLATTACK_WORKERS` when set to a positive integer, else `requested`, else
/// the available parallelism.
pub fn worker_count(requested: Option<usize>) -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .or(requested.filter(|&n| n > 0))
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn run<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build().expect("thread pool").install(f)
}

pub fn evaluate_attack<V: Victim + Sync>(model: &V, data: &[LabeledExample], cfg: &AttackConfig, workers: usize) -> Result<Evaluation> {
    cfg.validate()?;
    let outcomes = run(workers, || {
        data.par_iter().enumerate().map(|(i, ex)| attack_example(model, ex, i, cfg)).collect::<Result<Vec<_>>>()
    })?;
    Ok(Evaluation { metrics: summarize(&outcomes), outcomes })
}

pub fn generate_adv_trainset<V: Victim + Sync>(
    model: &V,
    trainset: &[LabeledExample],
    cfg: &AttackConfig,
    workers: usize,
) -> Result<AugmentedDataset> {
    if cfg.mode != AttackMode::UntilSuccess {
        return Err(Error::Config("augmentation requires until_success attacks".into()));
    }
    let eval = evaluate_attack(model, trainset, cfg, workers)?;
    let mut out = AugmentedDataset::from_original(trainset);
    out.extend_with(&eval.outcomes);
    Ok(out)
}

pub fn robustness<V: Victim + Sync>(model: &V, test: &[LabeledExample], cfg: &AttackConfig, workers: usize) -> Result<RobustnessReport> {
    let eval = evaluate_attack(model, test, cfg, workers)?;
    let still = eval.metrics.attacked - eval.metrics.successes;
    Ok(RobustnessReport {
        clean_accuracy: accuracy(model, test),
        robust_accuracy: still as f64 / test.len().max(1) as f64,
        att_acc: eval.metrics.att_acc,
    })
}

pub fn nat_adv_set(
    model: &Seq2SeqModel,
    data: &[BitextPair],
    cfg: &NatAdvConfig,
    source_vocab: &[TokenId],
    workers: usize,
) -> Result<Vec<NatInstance>> {
    run(workers, || data.par_iter().enumerate().map(|(i, p)| nat_adv_instance(model, p, i, cfg, source_vocab)).collect())
}

pub fn bleu_under_attack(
    model: &Seq2SeqModel,
    test: &[BitextPair],
    attack: &NatAttackConfig,
    iterations: usize,
    source_vocab: &[TokenId],
    workers: usize,
) -> Result<BleuReport> {
    let decodes = run(workers, || {
        test.par_iter()
            .enumerate()
            .map(|(i, p)| decode_pair_under_attack(model, p, i, attack, iterations, source_vocab))
            .collect::<Result<Vec<_>>>()
    })?;
    bleu_report(test, &decodes)
}
