//! Gradient-guided replacement, insertion and deletion, composed into a
//! similarity-gated multi-step attack.

mod config;
mod edit;
mod engine;
mod eval;
mod ops;

pub use config::{AttackConfig, AttackMode, DeletionRule, InsertionRule, OpSet};
pub use edit::{apply_edit, attackable_positions, insertion_slots, Edit, EditOp, OpKind};
pub use engine::{attack, AttackResult};
pub use eval::{attack_example, evaluate_attack, summarize, AttackMetrics, Evaluation, Outcome};
pub use ops::{deletion_scores, naive_delete_baseline, naive_insert_baseline, score_deletion, score_insertion, score_replacement};
