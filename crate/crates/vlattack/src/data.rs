//! Datasets and vocabularies as JSON-lines and JSON files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use vlattack_core::text::{detokenize, tokenize, tokenize_plain, BitextPair, LabeledExample, Vocab};

use crate::error::{FormatError, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationRecord {
    pub text: String,
    pub label: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitextRecord {
    pub src: String,
    pub tgt: String,
}

/// Reads one JSON value per non-blank line. Errors carry 1-based line numbers.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| FormatError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| FormatError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|source| FormatError::Json {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| FormatError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).map_err(|source| FormatError::Json { path: path.to_path_buf(), line: 0, source })?;
        writeln!(w, "{line}").map_err(|e| FormatError::io(path, e))?;
    }
    w.flush().map_err(|e| FormatError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|source| FormatError::Json { path: path.to_path_buf(), line: 0, source })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| FormatError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| FormatError::Json { path: path.to_path_buf(), line: 0, source })
}

/// Classification examples; every text gets a leading `[CLS]`.
pub fn read_classification(path: &Path, vocab: &Vocab) -> Result<Vec<LabeledExample>> {
    let records: Vec<ClassificationRecord> = read_jsonl(path)?;
    records
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let x = tokenize(&r.text, vocab).map_err(|source| FormatError::Record { path: path.to_path_buf(), line: i + 1, source })?;
            Ok(LabeledExample { x, y: r.label })
        })
        .collect()
}

pub fn classification_records(data: &[LabeledExample], vocab: &Vocab) -> Vec<ClassificationRecord> {
    data.iter().map(|e| ClassificationRecord { text: detokenize(&e.x, vocab), label: e.y }).collect()
}

pub fn write_classification(path: &Path, data: &[LabeledExample], vocab: &Vocab) -> Result<()> {
    write_jsonl(path, &classification_records(data, vocab))
}

pub fn read_bitext(path: &Path, vocab: &Vocab) -> Result<Vec<BitextPair>> {
    let records: Vec<BitextRecord> = read_jsonl(path)?;
    records
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let wrap = |source| FormatError::Record { path: path.to_path_buf(), line: i + 1, source };
            Ok(BitextPair { src: tokenize_plain(&r.src, vocab).map_err(wrap)?, tgt: tokenize_plain(&r.tgt, vocab).map_err(wrap)? })
        })
        .collect()
}

pub fn write_bitext(path: &Path, data: &[BitextPair], vocab: &Vocab) -> Result<()> {
    let records: Vec<BitextRecord> =
        data.iter().map(|p| BitextRecord { src: detokenize(&p.src, vocab), tgt: detokenize(&p.tgt, vocab) }).collect();
    write_jsonl(path, &records)
}

/// Vocabulary file: a JSON array of tokens where index is id.
pub fn read_vocab(path: &Path) -> Result<Vocab> {
    let tokens: Vec<String> = read_json(path)?;
    Vocab::from_tokens(tokens).map_err(|e| FormatError::invalid(path, e.to_string()))
}

pub fn write_vocab(path: &Path, vocab: &Vocab) -> Result<()> {
    let text = serde_json::to_string(vocab.tokens()).expect("strings serialize");
    std::fs::write(path, text + "\n").map_err(|e| FormatError::io(path, e))
}

/// Hex SHA-256 of the id-ordered token list.
pub fn vocab_hash(vocab: &Vocab) -> String {
    let mut h = Sha256::new();
    for t in vocab.tokens() {
        h.update(t.as_bytes());
        h.update([0u8]);
    }
    hex::encode(h.finalize())
}
