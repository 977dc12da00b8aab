use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{TokenId, TokenSeq};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Insert,
    Delete,
    Replace,
}

impl OpKind {
    pub const ALL: [OpKind; 3] = [OpKind::Insert, OpKind::Delete, OpKind::Replace];

    pub fn name(self) -> &'static str {
        match self {
            OpKind::Insert => "insert",
            OpKind::Delete => "delete",
            OpKind::Replace => "replace",
        }
    }
}

/// One atomic edit. `Insert { pos }` places the token so that it ends up at
/// index `pos` of the edited sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Edit {
    Insert { pos: usize, token: TokenId },
    Delete { pos: usize },
    Replace { pos: usize, token: TokenId },
}

impl Edit {
    pub fn kind(&self) -> OpKind {
        match self {
            Edit::Insert { .. } => OpKind::Insert,
            Edit::Delete { .. } => OpKind::Delete,
            Edit::Replace { .. } => OpKind::Replace,
        }
    }

    pub fn pos(&self) -> usize {
        match *self {
            Edit::Insert { pos, .. } | Edit::Delete { pos } | Edit::Replace { pos, .. } => pos,
        }
    }

    pub fn token(&self) -> Option<TokenId> {
        match *self {
            Edit::Insert { token, .. } | Edit::Replace { token, .. } => Some(token),
            Edit::Delete { .. } => None,
        }
    }
}

/// An edit together with the first-order score that selected it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EditOp {
    pub edit: Edit,
    pub score: f64,
}

/// Positions holding non-special tokens. `[CLS]`, `[PAD]` and placeholders are
/// never edited in place.
pub fn attackable_positions(x: &TokenSeq) -> Vec<usize> {
    x.content_positions().collect()
}

/// Legal insertion indices: everything after a leading `[CLS]`.
pub fn insertion_slots(x: &TokenSeq) -> core::ops::RangeInclusive<usize> {
    let first = usize::from(x.ids()[0] == TokenId::CLS);
    first..=x.len()
}

/// Applies `edit`, rejecting anything that would touch a special position or
/// introduce a special token.
pub fn apply_edit(x: &TokenSeq, edit: &Edit) -> Result<TokenSeq> {
    if let Some(t) = edit.token() {
        if t.is_special() {
            return Err(Error::IllegalPosition(edit.pos()));
        }
    }
    match *edit {
        Edit::Insert { pos, token } => {
            if !insertion_slots(x).contains(&pos) {
                return Err(Error::IllegalPosition(pos));
            }
            Ok(x.with_inserted(pos, token))
        }
        Edit::Delete { pos } => {
            match x.get(pos) {
                Some(t) if !t.is_special() => {}
                _ => return Err(Error::IllegalPosition(pos)),
            }
            if x.content_len() < 2 {
                return Err(Error::TooShort);
            }
            Ok(x.with_removed(pos))
        }
        Edit::Replace { pos, token } => match x.get(pos) {
            Some(t) if !t.is_special() => Ok(x.with_replaced(pos, token)),
            _ => Err(Error::IllegalPosition(pos)),
        },
    }
}
