use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::edit::OpKind;
use crate::error::{Error, Result};

/// Non-empty set of allowed operation kinds, serialized as a list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<OpKind>", into = "Vec<OpKind>")]
pub struct OpSet {
    insert: bool,
    delete: bool,
    replace: bool,
}

impl OpSet {
    pub const ALL: OpSet = OpSet { insert: true, delete: true, replace: true };
    pub const REPLACE_ONLY: OpSet = OpSet { insert: false, delete: false, replace: true };

    pub fn new(kinds: &[OpKind]) -> Result<Self> {
        let mut s = OpSet { insert: false, delete: false, replace: false };
        for k in kinds {
            match k {
                OpKind::Insert => s.insert = true,
                OpKind::Delete => s.delete = true,
                OpKind::Replace => s.replace = true,
            }
        }
        if s.is_empty() {
            return Err(Error::Config("allowed_ops must be nonempty".into()));
        }
        Ok(s)
    }

    pub fn contains(&self, k: OpKind) -> bool {
        match k {
            OpKind::Insert => self.insert,
            OpKind::Delete => self.delete,
            OpKind::Replace => self.replace,
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.insert || self.delete || self.replace)
    }

    /// Members in canonical order.
    pub fn kinds(&self) -> Vec<OpKind> {
        OpKind::ALL.iter().copied().filter(|k| self.contains(*k)).collect()
    }
}

impl TryFrom<Vec<OpKind>> for OpSet {
    type Error = Error;
    fn try_from(v: Vec<OpKind>) -> Result<Self> {
        OpSet::new(&v)
    }
}

impl From<OpSet> for Vec<OpKind> {
    fn from(s: OpSet) -> Self {
        s.kinds()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackMode {
    /// Stop at the first misclassification or after `⌊λ·|x|⌋` accepted edits.
    UntilSuccess,
    /// Apply exactly this many accepted edits with no success check.
    FixedSteps(usize),
}

/// Placeholder used to score insertions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InsertionRule {
    Blank,
    /// Ablation: `[MASK]` stands in for `[BLK]`.
    NaiveMask,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeletionRule {
    Blank,
    /// Ablation: delete a uniformly random attackable position.
    NaiveRandom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackConfig {
    /// λ: budget fraction of the original content length.
    pub budget_fraction: f64,
    /// θ: minimum similarity to the original for an edit to be accepted.
    pub sim_threshold: f64,
    pub top_k: usize,
    pub allowed_ops: OpSet,
    pub max_consecutive_skips: usize,
    pub seed: u64,
    pub mode: AttackMode,
    pub insertion: InsertionRule,
    pub deletion: DeletionRule,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            budget_fraction: 0.3,
            sim_threshold: 0.5,
            top_k: 32,
            allowed_ops: OpSet::ALL,
            max_consecutive_skips: 10,
            seed: 0,
            mode: AttackMode::UntilSuccess,
            insertion: InsertionRule::Blank,
            deletion: DeletionRule::Blank,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.budget_fraction > 0.0 && self.budget_fraction <= 1.0) {
            return Err(Error::Config(format!("budget_fraction {} outside (0, 1]", self.budget_fraction)));
        }
        if !(-1.0..=1.0).contains(&self.sim_threshold) {
            return Err(Error::Config(format!("sim_threshold {} outside [-1, 1]", self.sim_threshold)));
        }
        if self.top_k == 0 {
            return Err(Error::Config("top_k must be at least 1".into()));
        }
        if self.allowed_ops.is_empty() {
            return Err(Error::Config("allowed_ops must be nonempty".into()));
        }
        Ok(())
    }

    /// `⌊λ·n⌋` for a sequence with `n` content tokens.
    pub fn budget(&self, content_len: usize) -> usize {
        match self.mode {
            AttackMode::UntilSuccess => libm::floor(self.budget_fraction * content_len as f64 + 1e-9) as usize,
            AttackMode::FixedSteps(s) => s,
        }
    }
}
