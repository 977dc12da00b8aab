//! Attack traces, augmented datasets, metrics files and summary tables.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use vlattack_core::advtrain::{AugmentedDataset, RobustnessReport};
use vlattack_core::attack::{AttackMetrics, OpKind, Outcome};
use vlattack_core::nat::BleuReport;
use vlattack_core::text::{detokenize, Vocab};

/// One accepted edit; deletions carry no token.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub op: OpKind,
    pub pos: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub token: Option<String>,
    pub score: f64,
}

/// One line of `attacks.jsonl`. Examples the victim already misclassifies
/// have `attacked == false` and no result fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackRecord {
    pub config_hash: String,
    pub index: usize,
    pub text: String,
    pub label: usize,
    pub attacked: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub adversarial: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub success: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub steps_used: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub skipped: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub perturb_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub similarity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub final_prediction: Option<usize>,
    #[serde(default)]
    pub trace: Vec<TraceRecord>,
}

pub fn attack_records(
    outcomes: &[Outcome],
    data: &[vlattack_core::text::LabeledExample],
    vocab: &Vocab,
    config_hash: &str,
) -> Vec<AttackRecord> {
    outcomes
        .iter()
        .zip(data)
        .enumerate()
        .map(|(index, (o, ex))| {
            let base = AttackRecord {
                config_hash: config_hash.to_string(),
                index,
                text: detokenize(&ex.x, vocab),
                label: ex.y,
                attacked: false,
                adversarial: None,
                success: None,
                steps_used: None,
                skipped: None,
                perturb_ratio: None,
                similarity: None,
                final_prediction: None,
                trace: Vec::new(),
            };
            match o {
                Outcome::Misclassified => base,
                Outcome::Attacked(r) => AttackRecord {
                    attacked: true,
                    adversarial: Some(detokenize(&r.adversarial, vocab)),
                    success: Some(r.success),
                    steps_used: Some(r.steps_used),
                    skipped: Some(r.skipped),
                    perturb_ratio: Some(r.perturb_ratio),
                    similarity: Some(r.similarity),
                    final_prediction: Some(r.final_prediction),
                    trace: r
                        .trace
                        .iter()
                        .map(|op| TraceRecord {
                            op: op.edit.kind(),
                            pos: op.edit.pos(),
                            token: op.edit.token().map(|t| vocab.token(t).unwrap_or("[UNK]").to_string()),
                            score: op.score,
                        })
                        .collect(),
                    ..base
                },
            }
        })
        .collect()
}

/// One line of an augmented training set. `provenance` is the 1-based line
/// of the source example in the training file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentedRecord {
    pub text: String,
    pub label: usize,
    pub provenance: Option<usize>,
    pub config_hash: String,
}

pub fn augmented_records(aug: &AugmentedDataset, vocab: &Vocab, config_hash: &str) -> Vec<AugmentedRecord> {
    aug.examples
        .iter()
        .map(|e| AugmentedRecord {
            text: detokenize(&e.example.x, vocab),
            label: e.example.y,
            provenance: e.provenance.map(|i| i + 1),
            config_hash: config_hash.to_string(),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackRow {
    pub model: String,
    pub metrics: AttackMetrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub model: String,
    pub report: RobustnessReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BleuRow {
    pub model: String,
    pub report: BleuReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Augmentation {
    pub attackable: usize,
    pub successes: usize,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Metrics {
    Train { train_accuracy: f64, test_accuracy: Option<f64>, epoch_losses: Vec<f64> },
    Attack { rows: Vec<AttackRow> },
    AdvTrain { augmentation: Augmentation, rows: Vec<RobustnessRow> },
    NatTrain { masked_accuracy: Option<f64>, clean_bleu: Option<f64>, epoch_losses: Vec<f64> },
    NatAttack { rows: Vec<BleuRow> },
}

/// Contents of `metrics.json`. Holds no timings, so reruns are byte-identical.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub command: String,
    pub config_hash: String,
    pub metrics: Metrics,
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{:.1}", 100.0 * v))
}

fn num(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"))
}

struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn text(&self) -> String {
        let mut widths: Vec<usize> = self.header.iter().map(|h| h.len()).collect();
        for r in &self.rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.len());
            }
        }
        let line = |cells: Vec<&str>| {
            let parts: Vec<String> = cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            parts.join("  ").trim_end().to_string()
        };
        let mut out = line(self.header.clone()) + "\n";
        out += &"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1));
        out.push('\n');
        for r in &self.rows {
            out += &line(r.iter().map(String::as_str).collect());
            out.push('\n');
        }
        out
    }

    fn csv(&self, config_hash: &str) -> String {
        let mut out = self.header.join(",") + ",config_hash\n";
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|c| if c.contains(',') { format!("\"{c}\"") } else { c.clone() }).collect();
            let _ = writeln!(out, "{},{config_hash}", cells.join(","));
        }
        out
    }
}

fn table(m: &Metrics) -> (Table, Vec<String>) {
    match m {
        Metrics::Train { train_accuracy, test_accuracy, epoch_losses } => (
            Table {
                header: vec!["Model", "Train Acc", "Test Acc", "Final Loss"],
                rows: vec![vec![
                    "classifier".into(),
                    pct(Some(*train_accuracy)),
                    pct(*test_accuracy),
                    num(epoch_losses.last().copied()),
                ]],
            },
            vec![],
        ),
        Metrics::Attack { rows } => (
            Table {
                header: vec!["Model", "Ori Acc", "Att Acc", "Perturb%", "Sim"],
                rows: rows
                    .iter()
                    .map(|r| {
                        let m = &r.metrics;
                        vec![r.model.clone(), pct(Some(m.ori_acc)), pct(m.att_acc), pct(m.perturb), num(m.mean_sim)]
                    })
                    .collect(),
            },
            rows.iter().filter(|r| r.metrics.empty_pool).map(|r| format!("{}: attacked pool is empty", r.model)).collect(),
        ),
        Metrics::AdvTrain { augmentation, rows } => (
            Table {
                header: vec!["Model", "Clean Acc", "Att Acc", "Robust Acc"],
                rows: rows
                    .iter()
                    .map(|r| {
                        let m = &r.report;
                        vec![r.model.clone(), pct(Some(m.clean_accuracy)), pct(m.att_acc), pct(Some(m.robust_accuracy))]
                    })
                    .collect(),
            },
            vec![format!(
                "augmentation: {} adversarial of {} attacked ({:.1}%)",
                augmentation.successes,
                augmentation.attackable,
                100.0 * augmentation.ratio
            )],
        ),
        Metrics::NatTrain { masked_accuracy, clean_bleu, epoch_losses } => (
            Table {
                header: vec!["Model", "Masked Acc", "BLEU", "Final Loss"],
                rows: vec![vec!["translator".into(), pct(*masked_accuracy), num(*clean_bleu), num(epoch_losses.last().copied())]],
            },
            vec![],
        ),
        Metrics::NatAttack { rows } => (
            Table {
                header: vec!["Model", "Clean BLEU", "Attacked BLEU", "Drop%"],
                rows: rows
                    .iter()
                    .map(|r| {
                        let b = &r.report;
                        vec![r.model.clone(), num(Some(b.clean_bleu)), num(Some(b.attacked_bleu)), num(Some(b.drop_pct))]
                    })
                    .collect(),
            },
            vec![],
        ),
    }
}

/// Plain-text and CSV renderings of a metrics file.
pub fn render(m: &MetricsFile) -> (String, String) {
    let (t, notes) = table(&m.metrics);
    let mut text = format!("{} (config {})\n\n", m.command, m.config_hash);
    text += &t.text();
    for n in notes {
        text += &format!("\n{n}\n");
    }
    (text, t.csv(&m.config_hash))
}
