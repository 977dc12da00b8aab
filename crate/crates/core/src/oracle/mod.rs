//! Reference implementations that select edits by evaluating the true loss.
//!
//! Nothing here takes a gradient or calls into the attack engine; the only
//! shared pieces are the victim interface, token sequences and the similarity
//! definition.

mod brute;
mod search;
mod stats;

pub use brute::{brute_delete_rank, brute_insertion, brute_replacement, BruteChoice, BruteRanking};
pub use search::{exhaustive_edit_search, OracleEdit, SearchOutcome, SearchSpec};
pub use stats::{ranks, spearman};

use alloc::string::String;

use serde::{Deserialize, Serialize};

/// One oracle-versus-engine comparison, persisted for test artifacts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub case: String,
    pub oracle_answer: String,
    pub engine_answer: String,
    pub agreement: bool,
    /// 1-based rank of the engine answer in the oracle ordering, if present.
    pub rank: Option<usize>,
}

impl OracleReport {
    pub fn new(case: String, oracle_answer: String, engine_answer: String, rank: Option<usize>) -> Self {
        let agreement = oracle_answer == engine_answer;
        debug_assert!(!agreement || rank == Some(1));
        Self { case, oracle_answer, engine_answer, agreement, rank }
    }
}
