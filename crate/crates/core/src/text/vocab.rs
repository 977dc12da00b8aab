use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on vocabulary size, specials included.
pub const MAX_VOCAB: usize = 512;

/// Special tokens in id order. They always occupy ids 0..=4.
pub const SPECIAL_TOKENS: [&str; 5] = ["[PAD]", "[CLS]", "[MASK]", "[BLK]", "[UNK]"];

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenId(pub u32);

impl TokenId {
    pub const PAD: TokenId = TokenId(0);
    pub const CLS: TokenId = TokenId(1);
    pub const MASK: TokenId = TokenId(2);
    pub const BLK: TokenId = TokenId(3);
    pub const UNK: TokenId = TokenId(4);

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn is_special(self) -> bool {
        self.0 < SPECIAL_TOKENS.len() as u32
    }
}

/// Bijective token/id mapping with the five special tokens at fixed ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    id_to_token: Vec<String>,
    token_to_id: BTreeMap<String, TokenId>,
}

impl Vocab {
    /// Builds a vocabulary from content words; specials are prepended.
    pub fn new<I, S>(words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut tokens: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
        tokens.extend(words.into_iter().map(|w| w.as_ref().to_string()));
        Self::from_tokens(tokens)
    }

    /// Builds a vocabulary from the full id-ordered token list, as stored in a
    /// vocabulary file.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < SPECIAL_TOKENS.len() {
            return Err(Error::InvalidVocab("missing special tokens".into()));
        }
        for (i, special) in SPECIAL_TOKENS.iter().enumerate() {
            if tokens[i] != *special {
                return Err(Error::InvalidVocab(format!(
                    "id {i} must be {special}, found {}",
                    tokens[i]
                )));
            }
        }
        if tokens.len() > MAX_VOCAB {
            return Err(Error::InvalidVocab(format!(
                "{} tokens exceeds the cap of {MAX_VOCAB}",
                tokens.len()
            )));
        }
        let mut token_to_id = BTreeMap::new();
        for (i, tok) in tokens.iter().enumerate() {
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(Error::InvalidVocab(format!("malformed token {tok:?}")));
            }
            if i >= SPECIAL_TOKENS.len() && SPECIAL_TOKENS.contains(&tok.as_str()) {
                return Err(Error::InvalidVocab(format!("special token {tok} repeated")));
            }
            if token_to_id.insert(tok.clone(), TokenId(i as u32)).is_some() {
                return Err(Error::InvalidVocab(format!("duplicate token {tok}")));
            }
        }
        Ok(Self { id_to_token: tokens, token_to_id })
    }

    /// Collects every distinct normalized word of a corpus in sorted order.
    pub fn build<'a, I>(texts: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut words: Vec<String> = texts
            .into_iter()
            .flat_map(|t| t.split_whitespace().map(str::to_lowercase))
            .filter(|w| !SPECIAL_TOKENS.contains(&w.as_str()))
            .collect();
        words.sort();
        words.dedup();
        Self::new(words)
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.id_to_token.get(id.index()).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    pub fn contains(&self, id: TokenId) -> bool {
        id.index() < self.len()
    }

    /// Ids of all non-special tokens in increasing order.
    pub fn content_ids(&self) -> impl Iterator<Item = TokenId> + '_ {
        (SPECIAL_TOKENS.len()..self.len()).map(|i| TokenId(i as u32))
    }

    pub fn render(&self, seq: &TokenSeq) -> String {
        seq.ids()
            .iter()
            .map(|&id| self.token(id).unwrap_or("[?]"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// A non-empty token id sequence.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<TokenId>", into = "Vec<TokenId>")]
pub struct TokenSeq {
    ids: Vec<TokenId>,
}

impl TokenSeq {
    pub fn new(ids: Vec<TokenId>) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::EmptyText);
        }
        Ok(Self { ids })
    }

    /// Checks every id against a vocabulary.
    pub fn validate(&self, vocab: &Vocab) -> Result<()> {
        match self.ids.iter().find(|id| !vocab.contains(**id)) {
            Some(id) => Err(Error::UnknownId(id.0)),
            None => Ok(()),
        }
    }

    pub fn ids(&self) -> &[TokenId] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, pos: usize) -> Option<TokenId> {
        self.ids.get(pos).copied()
    }

    /// Number of non-special tokens.
    pub fn content_len(&self) -> usize {
        self.ids.iter().filter(|id| !id.is_special()).count()
    }

    /// Positions holding non-special tokens.
    pub fn content_positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.ids
            .iter()
            .enumerate()
            .filter(|(_, id)| !id.is_special())
            .map(|(i, _)| i)
    }

    pub fn with_inserted(&self, pos: usize, token: TokenId) -> TokenSeq {
        let mut ids = self.ids.clone();
        ids.insert(pos, token);
        TokenSeq { ids }
    }

    pub fn with_replaced(&self, pos: usize, token: TokenId) -> TokenSeq {
        let mut ids = self.ids.clone();
        ids[pos] = token;
        TokenSeq { ids }
    }

    /// Panics when removing the last token.
    pub fn with_removed(&self, pos: usize) -> TokenSeq {
        assert!(self.ids.len() > 1, "cannot empty a TokenSeq");
        let mut ids = self.ids.clone();
        ids.remove(pos);
        TokenSeq { ids }
    }

    /// Appends `count` PAD tokens.
    pub fn padded(&self, count: usize) -> TokenSeq {
        let mut ids = self.ids.clone();
        ids.extend(core::iter::repeat(TokenId::PAD).take(count));
        TokenSeq { ids }
    }
}

impl TryFrom<Vec<TokenId>> for TokenSeq {
    type Error = Error;
    fn try_from(ids: Vec<TokenId>) -> Result<Self> {
        TokenSeq::new(ids)
    }
}

impl From<TokenSeq> for Vec<TokenId> {
    fn from(seq: TokenSeq) -> Self {
        seq.ids
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub x: TokenSeq,
    pub y: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitextPair {
    pub src: TokenSeq,
    pub tgt: TokenSeq,
}

/// Lowercases and collapses whitespace.
pub fn normalize(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Classifier tokenization: `[CLS]` followed by one id per whitespace word.
pub fn tokenize(text: &str, vocab: &Vocab) -> Result<TokenSeq> {
    let mut ids = Vec::with_capacity(16);
    ids.push(TokenId::CLS);
    ids.extend(words(text, vocab)?);
    TokenSeq::new(ids)
}

/// Tokenization without `[CLS]`, used for translation sequences.
pub fn tokenize_plain(text: &str, vocab: &Vocab) -> Result<TokenSeq> {
    TokenSeq::new(words(text, vocab)?.collect())
}

fn words<'a>(text: &'a str, vocab: &'a Vocab) -> Result<impl Iterator<Item = TokenId> + 'a> {
    if text.trim().is_empty() {
        return Err(Error::EmptyText);
    }
    Ok(text
        .split_whitespace()
        .map(move |w| vocab.id(&w.to_lowercase()).unwrap_or(TokenId::UNK)))
}

/// Joins tokens with single spaces, dropping `[CLS]` and `[PAD]`.
pub fn detokenize(seq: &TokenSeq, vocab: &Vocab) -> String {
    seq.ids()
        .iter()
        .filter(|&&id| id != TokenId::CLS && id != TokenId::PAD)
        .map(|&id| vocab.token(id).unwrap_or(SPECIAL_TOKENS[4]))
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Vocab {
        Vocab::new(["the", "movie", "was", "great"]).unwrap()
    }

    #[test]
    fn tokenize_known_words() {
        let v = small();
        let seq = tokenize("The movie was great", &v).unwrap();
        let expect: Vec<TokenId> = ["the", "movie", "was", "great"]
            .iter()
            .map(|w| v.id(w).unwrap())
            .collect();
        assert_eq!(seq.ids()[0], TokenId::CLS);
        assert_eq!(&seq.ids()[1..], &expect[..]);
    }

    #[test]
    fn tokenize_unknown_word_maps_to_unk() {
        let v = small();
        let seq = tokenize("the zzqx was great", &v).unwrap();
        assert_eq!(seq.ids()[2], TokenId::UNK);
        assert_eq!(seq.len(), 5);
    }

    #[test]
    fn empty_text_is_rejected() {
        assert_eq!(tokenize("   ", &small()), Err(Error::EmptyText));
        assert_eq!(TokenSeq::new(Vec::new()), Err(Error::EmptyText));
    }

    #[test]
    fn specials_fixed_and_round_trip() {
        let v = small();
        for (i, s) in SPECIAL_TOKENS.iter().enumerate() {
            assert_eq!(v.id(s), Some(TokenId(i as u32)));
        }
        for (i, tok) in v.tokens().iter().enumerate() {
            assert_eq!(v.id(tok), Some(TokenId(i as u32)));
        }
    }

    #[test]
    fn malformed_vocab_files_rejected() {
        let bad_order: Vec<String> = ["[CLS]", "[PAD]", "[MASK]", "[BLK]", "[UNK]"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert!(Vocab::from_tokens(bad_order).is_err());
        assert!(Vocab::new(["a", "a"]).is_err());
        assert!(Vocab::new(["[BLK]"]).is_err());
        let too_many = (0..MAX_VOCAB).map(|i| format!("w{i}"));
        assert!(Vocab::new(too_many).is_err());
    }

    #[test]
    fn validate_catches_out_of_range_ids() {
        let v = small();
        let seq = TokenSeq::new(alloc::vec![TokenId::CLS, TokenId(99)]).unwrap();
        assert_eq!(seq.validate(&v), Err(Error::UnknownId(99)));
    }
}
