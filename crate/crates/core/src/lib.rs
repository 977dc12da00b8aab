//! Variable-length gradient-guided adversarial attacks on text models.
//!
//! The crate is `no_std` with `alloc`. It contains everything that is pure
//! computation: the tokenizer and synthetic corpora, a small dense
//! reverse-mode kernel, the two victim models (a transformer classifier with a
//! tied masked-LM head and a mask-predict translator), the three atomic edit
//! operations with the similarity-gated attack loop, brute-force oracles, and
//! the adversarial-training procedures. File formats, checkpoints and the CLI
//! live in the `vlattack` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod advtrain;
pub mod attack;
pub mod classifier;
pub mod error;
pub mod linear;
pub mod nat;
pub mod nn;
pub mod oracle;
pub mod rng;
pub mod similarity;
pub mod text;
pub mod victim;

pub use error::{Error, Result};
pub use text::{TokenId, TokenSeq, Vocab};
