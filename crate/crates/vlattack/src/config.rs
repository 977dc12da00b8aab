//! Run configuration files, `--set` overrides, config hashing and run
//! directories.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config {path} is not valid JSON: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("config must be a JSON object")]
    NotObject,
    #[error("override {0:?} is not of the form key=value")]
    Override(String),
    #[error("invalid config: {0}")]
    Schema(serde_json::Error),
    #[error("run directory {dir} was created with config {found}, current config is {expected}; refusing to resume")]
    HashMismatch { dir: PathBuf, found: String, expected: String },
    #[error("{0} is not a run directory (no config.json)")]
    NotARun(PathBuf),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Reads a JSON object and applies `key=value` overrides to its top-level
/// keys. Values parse as JSON when possible, otherwise as strings.
pub fn load(path: &Path, overrides: &[String]) -> Result<Value, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
    let mut value: Value = serde_json::from_str(&text).map_err(|source| ConfigError::Parse { path: path.to_path_buf(), source })?;
    apply_overrides(&mut value, overrides)?;
    Ok(value)
}

pub fn apply_overrides(value: &mut Value, overrides: &[String]) -> Result<(), ConfigError> {
    let obj = value.as_object_mut().ok_or(ConfigError::NotObject)?;
    for o in overrides {
        let (k, v) = o.split_once('=').filter(|(k, _)| !k.is_empty()).ok_or_else(|| ConfigError::Override(o.clone()))?;
        let parsed = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
        obj.insert(k.to_string(), parsed);
    }
    Ok(())
}

/// Rewrites relative path-valued keys against `base`.
pub fn resolve_paths(value: &mut Value, keys: &[&str], base: &Path) {
    if let Some(obj) = value.as_object_mut() {
        for k in keys {
            if let Some(Value::String(s)) = obj.get_mut(*k) {
                let p = Path::new(s.as_str());
                if p.is_relative() {
                    *s = base.join(p).to_string_lossy().into_owned();
                }
            }
        }
    }
}

/// Hex SHA-256 of the compact JSON encoding. Object keys serialize sorted,
/// so the hash does not depend on key order in the file.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let value = serde_json::to_value(config).expect("config serializes");
    hex::encode(Sha256::digest(serde_json::to_vec(&value).expect("value serializes")))
}

/// The `config.json` snapshot stored in every run directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub command: String,
    pub config_hash: String,
    pub config: Value,
}

/// `YYYYMMDDTHHMMSS` in UTC.
pub fn timestamp(unix_secs: u64) -> String {
    let days = (unix_secs / 86_400) as i64;
    let secs = unix_secs % 86_400;
    // Civil-from-days over 400-year eras.
    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = doy - (153 * mp + 2) / 5 + 1;
    let m = if mp < 10 { mp + 3 } else { mp - 9 };
    let y = yoe + era * 400 + i64::from(m <= 2);
    format!("{y:04}{m:02}{d:02}T{:02}{:02}{:02}", secs / 3600, secs / 60 % 60, secs % 60)
}

/// Creates `root/<timestamp>-<hash12>`, adding a numeric suffix if taken.
pub fn create_run_dir(root: &Path, hash: &str) -> Result<PathBuf, ConfigError> {
    let now = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_secs());
    std::fs::create_dir_all(root).map_err(|source| ConfigError::Io { path: root.to_path_buf(), source })?;
    let stem = format!("{}-{}", timestamp(now), &hash[..12]);
    for i in 0.. {
        let name = if i == 0 { stem.clone() } else { format!("{stem}-{i}") };
        let dir = root.join(name);
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(source) => return Err(ConfigError::Io { path: dir, source }),
        }
    }
    unreachable!("suffix search is unbounded")
}

/// Accepts an existing run directory only if its snapshot hash matches.
pub fn check_resume(dir: &Path, hash: &str) -> Result<(), ConfigError> {
    let path = dir.join("config.json");
    let text = std::fs::read_to_string(&path).map_err(|_| ConfigError::NotARun(dir.to_path_buf()))?;
    let snap: Snapshot = serde_json::from_str(&text).map_err(|source| ConfigError::Parse { path, source })?;
    if snap.config_hash != hash {
        return Err(ConfigError::HashMismatch { dir: dir.to_path_buf(), found: snap.config_hash, expected: hash.to_string() });
    }
    Ok(())
}
