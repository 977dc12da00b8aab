use alloc::collections::{BTreeSet, VecDeque};
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::similarity::sim;
use crate::text::{LabeledExample, TokenId, TokenSeq, SPECIAL_TOKENS};
use crate::victim::Victim;

const MAX_CONTENT_VOCAB: usize = 8;
const MAX_CONTENT_LEN: usize = 6;
const MAX_DEPTH: usize = 3;

/// Edits the search may use and the similarity gate it must respect.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchSpec {
    pub sim_threshold: f64,
    pub insert: bool,
    pub delete: bool,
    pub replace: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleEdit {
    Insert(usize, TokenId),
    Delete(usize),
    Replace(usize, TokenId),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome {
    pub reachable: bool,
    /// Shortest successful edit sequence, empty when none exists.
    pub witness: Vec<OracleEdit>,
    /// Sequences after each witness edit.
    pub path: Vec<TokenSeq>,
    pub nodes_expanded: usize,
}

struct Node {
    seq: TokenSeq,
    parent: Option<usize>,
    edit: Option<OracleEdit>,
    depth: usize,
}

fn neighbours<V: Victim + ?Sized>(model: &V, x: &TokenSeq, spec: &SearchSpec) -> Vec<(OracleEdit, TokenSeq)> {
    let tokens: Vec<TokenId> = (SPECIAL_TOKENS.len()..model.vocab_size()).map(|i| TokenId(i as u32)).collect();
    let content: Vec<usize> = (0..x.len()).filter(|&i| !x.ids()[i].is_special()).collect();
    let mut out = Vec::new();
    if spec.replace {
        for &p in &content {
            for &t in tokens.iter().filter(|&&t| t != x.ids()[p]) {
                out.push((OracleEdit::Replace(p, t), x.with_replaced(p, t)));
            }
        }
    }
    if spec.delete && content.len() >= 2 {
        for &p in &content {
            out.push((OracleEdit::Delete(p), x.with_removed(p)));
        }
    }
    if spec.insert && x.len() < model.max_len() {
        let first = usize::from(x.ids()[0] == TokenId::CLS);
        for p in first..=x.len() {
            for &t in &tokens {
                out.push((OracleEdit::Insert(p, t), x.with_inserted(p, t)));
            }
        }
    }
    out
}

/// Breadth-first search over all gated edit sequences of length at most
/// `max_depth`, returning a shortest sequence that flips the prediction.
pub fn exhaustive_edit_search<V: Victim + ?Sized>(
    model: &V,
    example: &LabeledExample,
    spec: &SearchSpec,
    max_depth: usize,
) -> Result<SearchOutcome> {
    let content_vocab = model.vocab_size().saturating_sub(SPECIAL_TOKENS.len());
    if content_vocab > MAX_CONTENT_VOCAB || example.x.content_len() > MAX_CONTENT_LEN || max_depth > MAX_DEPTH {
        return Err(Error::OracleTooExpensive(format!(
            "vocab {content_vocab}, length {}, depth {max_depth}",
            example.x.content_len()
        )));
    }
    let y = example.y;
    let mut nodes = alloc::vec![Node { seq: example.x.clone(), parent: None, edit: None, depth: 0 }];
    let mut found = (model.predict(&example.x).label != y).then_some(0);
    let mut visited = BTreeSet::new();
    visited.insert(example.x.ids().to_vec());
    let mut queue = VecDeque::from([0usize]);
    let mut expanded = 0;
    while found.is_none() {
        let Some(i) = queue.pop_front() else { break };
        if nodes[i].depth >= max_depth {
            continue;
        }
        expanded += 1;
        for (edit, next) in neighbours(model, &nodes[i].seq, spec) {
            if !visited.insert(next.ids().to_vec()) {
                continue;
            }
            match sim(model, &example.x, &next) {
                Ok(s) if s >= spec.sim_threshold => {}
                _ => continue,
            }
            let success = model.predict(&next).label != y;
            nodes.push(Node { seq: next, parent: Some(i), edit: Some(edit), depth: nodes[i].depth + 1 });
            let id = nodes.len() - 1;
            if success {
                found = Some(id);
                break;
            }
            queue.push_back(id);
        }
    }
    let mut witness = Vec::new();
    let mut path = Vec::new();
    if let Some(mut i) = found {
        while let Some(p) = nodes[i].parent {
            witness.push(nodes[i].edit.expect("non-root nodes carry an edit"));
            path.push(nodes[i].seq.clone());
            i = p;
        }
        witness.reverse();
        path.reverse();
    }
    Ok(SearchOutcome { reachable: found.is_some(), witness, path, nodes_expanded: expanded })
}
