//! The CLI commands. Each one resolves its config, creates (or resumes) a run
//! directory, does its work with a worker pool and writes every artifact from
//! the calling thread.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use vlattack_core::advtrain::{adv_finetune, AdvTrainConfig, RobustnessReport};
use vlattack_core::attack::{AttackConfig, DeletionRule, InsertionRule, OpSet};
use vlattack_core::classifier::{accuracy, finetune_with_stats, ClassifierConfig, TrainConfig};
use vlattack_core::nat::{
    corpus_bleu, masked_token_accuracy, nat_adv_finetune, nat_train, NatAdvConfig, NatAttackConfig, NatConfig,
    NatTrainConfig,
};
use vlattack_core::text::{BitextGrammar, ClassificationGrammar, TokenId, Vocab};

use crate::checkpoint::{self, Meta};
use crate::config::{self, Snapshot};
use crate::data;
use crate::parallel;
use crate::report::{self, Augmentation, AttackRow, BleuRow, Metrics, MetricsFile, RobustnessRow};

/// Flags shared by every run-producing command.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub config: PathBuf,
    pub set: Vec<String>,
    pub runs_dir: PathBuf,
    pub resume: Option<PathBuf>,
    pub workers: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierArch {
    pub dim: usize,
    pub heads: usize,
    pub ffn_dim: usize,
    pub layers: usize,
    pub max_len: usize,
}

impl Default for ClassifierArch {
    fn default() -> Self {
        let c = ClassifierConfig::new(0);
        Self { dim: c.dim, heads: c.heads, ffn_dim: c.ffn_dim, layers: c.layers, max_len: c.max_len }
    }
}

impl ClassifierArch {
    fn build(&self, vocab_size: usize) -> ClassifierConfig {
        ClassifierConfig {
            dim: self.dim,
            heads: self.heads,
            ffn_dim: self.ffn_dim,
            layers: self.layers,
            max_len: self.max_len,
            ..ClassifierConfig::new(vocab_size)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NatArch {
    pub dim: usize,
    pub heads: usize,
    pub ffn_dim: usize,
    pub enc_layers: usize,
    pub dec_layers: usize,
    pub max_len: usize,
    pub max_offset: usize,
}

impl Default for NatArch {
    fn default() -> Self {
        let c = NatConfig::new(0);
        Self {
            dim: c.dim,
            heads: c.heads,
            ffn_dim: c.ffn_dim,
            enc_layers: c.enc_layers,
            dec_layers: c.dec_layers,
            max_len: c.max_len,
            max_offset: c.max_offset,
        }
    }
}

impl NatArch {
    fn build(&self, vocab_size: usize) -> NatConfig {
        NatConfig {
            vocab_size,
            dim: self.dim,
            heads: self.heads,
            ffn_dim: self.ffn_dim,
            enc_layers: self.enc_layers,
            dec_layers: self.dec_layers,
            max_len: self.max_len,
            max_offset: self.max_offset,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainRun {
    pub vocab: PathBuf,
    pub train_data: PathBuf,
    #[serde(default)]
    pub test_data: Option<PathBuf>,
    #[serde(default)]
    pub arch: ClassifierArch,
    #[serde(default)]
    pub train: TrainConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackRun {
    pub vocab: PathBuf,
    pub model: PathBuf,
    pub data: PathBuf,
    #[serde(default)]
    pub attack: AttackConfig,
    /// Also report replacement-only, naive-`[MASK]` insertion and random
    /// deletion rows under the same budget.
    #[serde(default)]
    pub baselines: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdvTrainRun {
    pub vocab: PathBuf,
    pub model: PathBuf,
    pub train_data: PathBuf,
    pub test_data: PathBuf,
    #[serde(default)]
    pub attack: AttackConfig,
    /// Schedule of the original fine-tuning run the continued training is
    /// scaled from.
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub adv: AdvTrainConfig,
}

fn default_iterations() -> usize {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NatTrainRun {
    pub vocab: PathBuf,
    pub train_data: PathBuf,
    #[serde(default)]
    pub test_data: Option<PathBuf>,
    #[serde(default)]
    pub arch: NatArch,
    #[serde(default)]
    pub train: NatTrainConfig,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NatFinetune {
    #[serde(default)]
    pub adv: NatAdvConfig,
    #[serde(default)]
    pub train: NatTrainConfig,
    /// Also fine-tune with replacement-only augmentation for comparison.
    #[serde(default)]
    pub replacement_baseline: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NatAttackRun {
    pub vocab: PathBuf,
    pub model: PathBuf,
    /// Its source side defines the encoder-side candidate set; it is also
    /// the fine-tuning set.
    pub train_data: PathBuf,
    pub test_data: PathBuf,
    #[serde(default)]
    pub attack: NatAttackConfig,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default)]
    pub finetune: Option<NatFinetune>,
}

const PATH_KEYS: &[&str] = &["vocab", "model", "data", "train_data", "test_data"];

struct Run<T> {
    config: T,
    hash: String,
    dir: PathBuf,
    workers: usize,
}

impl<T> Run<T> {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}

fn start<T: Serialize + DeserializeOwned>(command: &str, opts: &RunOptions) -> Result<Run<T>> {
    let mut value = config::load(&opts.config, &opts.set)?;
    let base = opts.config.parent().map(Path::to_path_buf).unwrap_or_default();
    config::resolve_paths(&mut value, PATH_KEYS, &base);
    let config: T = serde_json::from_value(value).map_err(config::ConfigError::Schema)?;
    let hash = config::config_hash(&config);
    let dir = match &opts.resume {
        Some(dir) => {
            config::check_resume(dir, &hash)?;
            dir.clone()
        }
        None => config::create_run_dir(&opts.runs_dir, &hash)?,
    };
    let snapshot = Snapshot { command: command.to_string(), config_hash: hash.clone(), config: serde_json::to_value(&config)? };
    data::write_json(&dir.join("config.json"), &snapshot)?;
    Ok(Run { config, hash, dir, workers: parallel::worker_count(opts.workers) })
}

fn finish(dir: &Path, command: &str, hash: &str, metrics: Metrics) -> Result<()> {
    let file = MetricsFile { command: command.to_string(), config_hash: hash.to_string(), metrics };
    data::write_json(&dir.join("metrics.json"), &file)?;
    write_report(dir, &file)
}

fn write_report(dir: &Path, file: &MetricsFile) -> Result<()> {
    let (text, csv) = report::render(file);
    std::fs::write(dir.join("report.txt"), &text).with_context(|| format!("writing report in {}", dir.display()))?;
    std::fs::write(dir.join("report.csv"), csv).with_context(|| format!("writing report in {}", dir.display()))?;
    print!("{text}");
    Ok(())
}

fn meta<'a>(vocab_hash: &'a str, seed: u64, config_hash: &'a str) -> Meta<'a> {
    Meta { vocab_hash, seed, config_hash }
}

pub fn cmd_train(opts: &RunOptions) -> Result<PathBuf> {
    let run: Run<TrainRun> = start("train", opts)?;
    let c = &run.config;
    let vocab = data::read_vocab(&c.vocab)?;
    let train = data::read_classification(&c.train_data, &vocab)?;
    let test = c.test_data.as_deref().map(|p| data::read_classification(p, &vocab)).transpose()?;
    let (model, stats) = finetune_with_stats(&train, c.arch.build(vocab.len()), &c.train)?;
    checkpoint::save_classifier(&run.path("model.vlat"), &model, &meta(&data::vocab_hash(&vocab), c.train.seed, &run.hash))?;
    let metrics = Metrics::Train {
        train_accuracy: accuracy(&model, &train),
        test_accuracy: test.map(|t| accuracy(&model, &t)),
        epoch_losses: stats.epoch_losses,
    };
    finish(&run.dir, "train", &run.hash, metrics)?;
    Ok(run.dir)
}

fn baseline_configs(cfg: &AttackConfig) -> Vec<(&'static str, AttackConfig)> {
    vec![
        ("replacement-only", AttackConfig { allowed_ops: OpSet::REPLACE_ONLY, ..cfg.clone() }),
        ("naive-mask-insert", AttackConfig { insertion: InsertionRule::NaiveMask, ..cfg.clone() }),
        ("naive-random-delete", AttackConfig { deletion: DeletionRule::NaiveRandom, ..cfg.clone() }),
    ]
}

pub fn cmd_attack(opts: &RunOptions) -> Result<PathBuf> {
    let run: Run<AttackRun> = start("attack", opts)?;
    let c = &run.config;
    let vocab = data::read_vocab(&c.vocab)?;
    let (_, model) = checkpoint::load_classifier(&c.model, Some(&data::vocab_hash(&vocab)))?;
    let test = data::read_classification(&c.data, &vocab)?;
    let eval = parallel::evaluate_attack(&model, &test, &c.attack, run.workers)?;
    data::write_jsonl(&run.path("attacks.jsonl"), &report::attack_records(&eval.outcomes, &test, &vocab, &run.hash))?;
    let mut rows = vec![AttackRow { model: "vl-attack".into(), metrics: eval.metrics }];
    if c.baselines {
        for (name, cfg) in baseline_configs(&c.attack) {
            let e = parallel::evaluate_attack(&model, &test, &cfg, run.workers)?;
            rows.push(AttackRow { model: name.into(), metrics: e.metrics });
        }
    }
    finish(&run.dir, "attack", &run.hash, Metrics::Attack { rows })?;
    Ok(run.dir)
}

pub fn cmd_advtrain(opts: &RunOptions) -> Result<PathBuf> {
    let run: Run<AdvTrainRun> = start("advtrain", opts)?;
    let c = &run.config;
    let vocab = data::read_vocab(&c.vocab)?;
    let vh = data::vocab_hash(&vocab);
    let (_, model) = checkpoint::load_classifier(&c.model, Some(&vh))?;
    let train = data::read_classification(&c.train_data, &vocab)?;
    let test = data::read_classification(&c.test_data, &vocab)?;
    let aug = parallel::generate_adv_trainset(&model, &train, &c.attack, run.workers)?;
    data::write_jsonl(&run.path("augmented.jsonl"), &report::augmented_records(&aug, &vocab, &run.hash))?;
    let before = parallel::robustness(&model, &test, &c.attack, run.workers)?;
    let tuned = adv_finetune(&model, &aug, &c.train, &c.adv)?;
    checkpoint::save_classifier(&run.path("model.vlat"), &tuned, &meta(&vh, c.train.seed, &run.hash))?;
    let eval = parallel::evaluate_attack(&tuned, &test, &c.attack, run.workers)?;
    data::write_jsonl(&run.path("attacks.jsonl"), &report::attack_records(&eval.outcomes, &test, &vocab, &run.hash))?;
    let after = RobustnessReport {
        clean_accuracy: accuracy(&tuned, &test),
        robust_accuracy: (eval.metrics.attacked - eval.metrics.successes) as f64 / test.len().max(1) as f64,
        att_acc: eval.metrics.att_acc,
    };
    let metrics = Metrics::AdvTrain {
        augmentation: Augmentation { attackable: aug.attackable, successes: aug.successes, ratio: aug.ratio() },
        rows: vec![
            RobustnessRow { model: "original".into(), report: before },
            RobustnessRow { model: "adv-finetuned".into(), report: after },
        ],
    };
    finish(&run.dir, "advtrain", &run.hash, metrics)?;
    Ok(run.dir)
}

pub fn cmd_nat_train(opts: &RunOptions) -> Result<PathBuf> {
    let run: Run<NatTrainRun> = start("nat-train", opts)?;
    let c = &run.config;
    if c.iterations == 0 {
        bail!(config::ConfigError::Schema(serde::de::Error::custom("iterations must be at least 1")));
    }
    let vocab = data::read_vocab(&c.vocab)?;
    let train = data::read_bitext(&c.train_data, &vocab)?;
    let test = c.test_data.as_deref().map(|p| data::read_bitext(p, &vocab)).transpose()?;
    let (model, stats) = nat_train(&train, c.arch.build(vocab.len()), &c.train)?;
    checkpoint::save_translator(&run.path("model.vlat"), &model, &meta(&data::vocab_hash(&vocab), c.train.seed, &run.hash))?;
    let (masked_accuracy, clean_bleu) = match &test {
        Some(t) => (Some(masked_token_accuracy(&model, t, c.train.seed)), Some(corpus_bleu(&model, t, c.iterations)?)),
        None => (None, None),
    };
    finish(&run.dir, "nat-train", &run.hash, Metrics::NatTrain { masked_accuracy, clean_bleu, epoch_losses: stats.epoch_losses })?;
    Ok(run.dir)
}

/// Distinct ids on the source side of a bitext, ascending.
pub fn source_vocab(pairs: &[vlattack_core::text::BitextPair]) -> Vec<TokenId> {
    let mut ids: Vec<TokenId> = pairs.iter().flat_map(|p| p.src.ids().iter().copied()).filter(|t| !t.is_special()).collect();
    ids.sort_unstable();
    ids.dedup();
    ids
}

pub fn cmd_nat_attack(opts: &RunOptions) -> Result<PathBuf> {
    let run: Run<NatAttackRun> = start("nat-attack", opts)?;
    let c = &run.config;
    if c.iterations == 0 {
        bail!(config::ConfigError::Schema(serde::de::Error::custom("iterations must be at least 1")));
    }
    let vocab = data::read_vocab(&c.vocab)?;
    let vh = data::vocab_hash(&vocab);
    let (header, model) = checkpoint::load_translator(&c.model, Some(&vh))?;
    let train = data::read_bitext(&c.train_data, &vocab)?;
    let test = data::read_bitext(&c.test_data, &vocab)?;
    let sv = source_vocab(&train);
    let evaluate = |m: &vlattack_core::nat::Seq2SeqModel| parallel::bleu_under_attack(m, &test, &c.attack, c.iterations, &sv, run.workers);
    let mut rows = vec![BleuRow { model: "baseline".into(), report: evaluate(&model)? }];
    if let Some(ft) = &c.finetune {
        let mut variants = vec![("vl-attack", ft.adv.allowed_ops, "model.vlat")];
        if ft.replacement_baseline {
            variants.push(("replacement-only", OpSet::REPLACE_ONLY, "model-replacement.vlat"));
        }
        for (name, ops, file) in variants {
            let adv_cfg = NatAdvConfig { allowed_ops: ops, ..ft.adv.clone() };
            let attacked = parallel::nat_adv_set(&model, &train, &adv_cfg, &sv, run.workers)?;
            let (tuned, _) = nat_adv_finetune(&model, &train, &attacked, &ft.train)?;
            checkpoint::save_translator(&run.path(file), &tuned, &meta(&vh, header.seed, &run.hash))?;
            rows.push(BleuRow { model: format!("+{name}"), report: evaluate(&tuned)? });
        }
    }
    finish(&run.dir, "nat-attack", &run.hash, Metrics::NatAttack { rows })?;
    Ok(run.dir)
}

/// Re-renders `report.txt` and `report.csv` from a run's `metrics.json`.
pub fn cmd_report(dir: &Path) -> Result<String> {
    let path = dir.join("metrics.json");
    if !path.is_file() {
        bail!(config::ConfigError::NotARun(dir.to_path_buf()));
    }
    let file: MetricsFile = data::read_json(&path)?;
    write_report(dir, &file)?;
    Ok(report::render(&file).0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SynthKind {
    Classification,
    Bitext,
}

/// Writes a synthetic dataset and the vocabulary covering it.
pub fn cmd_synth(kind: SynthKind, seed: u64, n: usize, noise: f64, out: &Path, vocab_out: &Path) -> Result<()> {
    if n == 0 {
        bail!(config::ConfigError::Schema(serde::de::Error::custom("n must be at least 1")));
    }
    match kind {
        SynthKind::Classification => {
            let g = ClassificationGrammar::default();
            let vocab: Vocab = g.vocab();
            data::write_classification(out, &g.generate(seed, n, noise), &vocab)?;
            data::write_vocab(vocab_out, &vocab)?;
        }
        SynthKind::Bitext => {
            let g = BitextGrammar::default();
            let vocab = g.vocab();
            data::write_bitext(out, &g.generate(seed, n), &vocab)?;
            data::write_vocab(vocab_out, &vocab)?;
        }
    }
    Ok(())
}

/// Process exit code for a failed command: 3 for numeric failures
/// (non-finite values or divergence), 2 for everything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    use vlattack_core::Error as E;
    let numeric = |e: &E| matches!(e, E::Numeric(_) | E::Divergence { .. });
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            if numeric(e) {
                return 3;
            }
        }
        if let Some(crate::error::FormatError::Core(e)) = cause.downcast_ref::<crate::error::FormatError>() {
            if numeric(e) {
                return 3;
            }
        }
    }
    2
}
