//! Tokens, vocabularies, tokenization, corpora and edit distance.

mod levenshtein;
mod synth;
mod vocab;

pub use levenshtein::word_levenshtein;
pub use synth::{
    synth_bitext, synth_classification, BitextGrammar, ClassificationGrammar, Polarity,
};
pub use vocab::{
    detokenize, normalize, tokenize, tokenize_plain, BitextPair, LabeledExample, TokenId,
    TokenSeq, Vocab, MAX_VOCAB, SPECIAL_TOKENS,
};
