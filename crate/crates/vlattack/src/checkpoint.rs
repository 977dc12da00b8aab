//! Binary checkpoints: `VLAT`, a little-endian `u32` version, a `u64` header
//! length, the JSON header, then every parameter as little-endian `f64` in
//! header order.

use std::path::Path;

use serde::{Deserialize, Serialize};
use vlattack_core::classifier::{ClassifierConfig, ClassifierModel};
use vlattack_core::nat::{NatConfig, Seq2SeqModel};
use vlattack_core::nn::{ParamStore, Tensor};

use crate::error::{FormatError, Result};

pub const MAGIC: &[u8; 4] = b"VLAT";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    Classifier { config: ClassifierConfig, mlm_trained: bool, clean_accuracy: Option<f64> },
    Translator { config: NatConfig },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub architecture: Architecture,
    pub vocab_hash: String,
    pub seed: u64,
    pub config_hash: String,
    pub params: Vec<ParamEntry>,
}

pub enum Model {
    Classifier(ClassifierModel),
    Translator(Seq2SeqModel),
}

fn entries(ps: &ParamStore) -> Vec<ParamEntry> {
    ps.params().iter().map(|p| ParamEntry { name: p.name.clone(), shape: p.value.shape().to_vec() }).collect()
}

fn encode(header: &Header, ps: &ParamStore) -> Vec<u8> {
    let json = serde_json::to_vec(header).expect("header serializes");
    let mut out = Vec::with_capacity(16 + json.len() + 8 * ps.num_scalars());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for p in ps.params() {
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub struct Meta<'a> {
    pub vocab_hash: &'a str,
    pub seed: u64,
    pub config_hash: &'a str,
}

fn header(architecture: Architecture, ps: &ParamStore, meta: &Meta<'_>) -> Header {
    Header {
        architecture,
        vocab_hash: meta.vocab_hash.to_string(),
        seed: meta.seed,
        config_hash: meta.config_hash.to_string(),
        params: entries(ps),
    }
}

pub fn save_classifier(path: &Path, model: &ClassifierModel, meta: &Meta<'_>) -> Result<()> {
    let arch = Architecture::Classifier {
        config: model.config.clone(),
        mlm_trained: model.mlm_trained,
        clean_accuracy: model.clean_accuracy,
    };
    let bytes = encode(&header(arch, model.params(), meta), model.params());
    std::fs::write(path, bytes).map_err(|e| FormatError::io(path, e))
}

pub fn save_translator(path: &Path, model: &Seq2SeqModel, meta: &Meta<'_>) -> Result<()> {
    let arch = Architecture::Translator { config: model.config.clone() };
    let bytes = encode(&header(arch, model.params(), meta), model.params());
    std::fs::write(path, bytes).map_err(|e| FormatError::io(path, e))
}

fn take<'a>(path: &Path, bytes: &mut &'a [u8], n: usize) -> Result<&'a [u8]> {
    if bytes.len() < n {
        return Err(FormatError::invalid(path, "truncated checkpoint"));
    }
    let (head, rest) = bytes.split_at(n);
    *bytes = rest;
    Ok(head)
}

/// Reads the header without touching the parameter blobs.
pub fn read_header(path: &Path) -> Result<Header> {
    let bytes = std::fs::read(path).map_err(|e| FormatError::io(path, e))?;
    Ok(parse(path, &bytes)?.0)
}

fn parse<'a>(path: &Path, bytes: &'a [u8]) -> Result<(Header, &'a [u8])> {
    let mut rest = bytes;
    if take(path, &mut rest, 4)? != MAGIC {
        return Err(FormatError::BadMagic { path: path.to_path_buf() });
    }
    let version = u32::from_le_bytes(take(path, &mut rest, 4)?.try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(FormatError::Version { path: path.to_path_buf(), version });
    }
    let len = u64::from_le_bytes(take(path, &mut rest, 8)?.try_into().expect("8 bytes"));
    let len = usize::try_from(len).map_err(|_| FormatError::invalid(path, "header length overflows"))?;
    let json = take(path, &mut rest, len)?;
    let header: Header =
        serde_json::from_slice(json).map_err(|source| FormatError::Json { path: path.to_path_buf(), line: 0, source })?;
    Ok((header, rest))
}

/// Overwrites `ps` with the blobs, requiring names and shapes to match.
fn fill(path: &Path, header: &Header, ps: &mut ParamStore, mut blobs: &[u8]) -> Result<()> {
    if header.params != entries(ps) {
        return Err(FormatError::invalid(path, "parameter layout does not match the architecture"));
    }
    for p in ps.params_mut() {
        let n = p.value.len();
        let raw = take(path, &mut blobs, 8 * n)?;
        let data: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        p.value = Tensor::from_vec(p.value.shape(), data)?;
    }
    if !blobs.is_empty() {
        return Err(FormatError::invalid(path, "trailing bytes after parameters"));
    }
    Ok(())
}

/// Loads either model kind. `expected_vocab` rejects a checkpoint trained
/// against a different vocabulary.
pub fn load(path: &Path, expected_vocab: Option<&str>) -> Result<(Header, Model)> {
    let bytes = std::fs::read(path).map_err(|e| FormatError::io(path, e))?;
    let (header, blobs) = parse(path, &bytes)?;
    if let Some(v) = expected_vocab {
        if v != header.vocab_hash {
            return Err(FormatError::invalid(path, "checkpoint was trained with a different vocabulary"));
        }
    }
    let model = match &header.architecture {
        Architecture::Classifier { config, mlm_trained, clean_accuracy } => {
            let mut m = ClassifierModel::new(config.clone(), header.seed)?;
            fill(path, &header, m.params_mut(), blobs)?;
            m.mlm_trained = *mlm_trained;
            m.clean_accuracy = *clean_accuracy;
            Model::Classifier(m)
        }
        Architecture::Translator { config } => {
            let mut m = Seq2SeqModel::new(config.clone(), header.seed)?;
            fill(path, &header, m.params_mut(), blobs)?;
            Model::Translator(m)
        }
    };
    Ok((header, model))
}

pub fn load_classifier(path: &Path, expected_vocab: Option<&str>) -> Result<(Header, ClassifierModel)> {
    match load(path, expected_vocab)? {
        (h, Model::Classifier(m)) => Ok((h, m)),
        _ => Err(FormatError::invalid(path, "expected a classifier checkpoint")),
    }
}

pub fn load_translator(path: &Path, expected_vocab: Option<&str>) -> Result<(Header, Seq2SeqModel)> {
    match load(path, expected_vocab)? {
        (h, Model::Translator(m)) => Ok((h, m)),
        _ => Err(FormatError::invalid(path, "expected a translator checkpoint")),
    }
}
