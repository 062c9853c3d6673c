//! Config merging and hashing, atomic output writes and the result cache.

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// Version of the JSON report layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Reads the `[section]` table of a TOML config file.
pub fn load_section(path: &Path, section: &str) -> Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let doc: toml::Table = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    match doc.get(section) {
        Some(table) => Ok(serde_json::to_value(table)?),
        None => Ok(Value::Object(Default::default())),
    }
}

/// Overlays the fields set on the command line onto the file's section.
pub fn merge<T: Serialize + DeserializeOwned>(file: Option<Value>, cli: &T) -> Result<T> {
    let mut base = match file {
        Some(Value::Object(map)) => map,
        _ => Default::default(),
    };
    if let Value::Object(flags) = serde_json::to_value(cli)? {
        for (k, v) in flags {
            if !v.is_null() {
                base.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(base)).context("config fields do not match the command")
}

/// SHA-256 of the config's canonical JSON (object keys sorted).
pub fn config_hash<T: Serialize>(command: &str, config: &T) -> Result<String> {
    let canonical = serde_json::to_string(&serde_json::json!({ "command": command, "config": config }))?;
    Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
}

/// Writes through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
    }
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    std::fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Report envelope: schema version, command, resolved config and its hash.
#[derive(Serialize)]
pub struct Envelope<'a, C: Serialize, R: Serialize> {
    pub schema_version: u32,
    pub command: &'a str,
    pub config_hash: &'a str,
    pub config: &'a C,
    pub result: &'a R,
}

pub fn cache_dir() -> PathBuf {
    std::env::var_os("DISPFLOW_CACHE").map(PathBuf::from).unwrap_or_else(|| PathBuf::from(".dispflow-cache"))
}

/// Returns the cached result for `hash`, or computes and stores it. A cache
/// entry that fails to parse is recomputed and overwritten.
pub fn cached<R: Serialize + DeserializeOwned>(hash: &str, compute: impl FnOnce() -> Result<R>) -> Result<R> {
    let path = cache_dir().join(format!("{hash}.json"));
    if let Ok(text) = std::fs::read_to_string(&path) {
        if let Ok(hit) = serde_json::from_str(&text) {
            return Ok(hit);
        }
        eprintln!("warning: discarding unreadable cache entry {}", path.display());
    }
    let value = compute()?;
    write_atomic(&path, &serde_json::to_string(&value)?)?;
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Serialize, Deserialize, PartialEq, Default)]
    struct Cfg {
        a: Option<u32>,
        b: Option<String>,
    }

    #[test]
    fn flags_override_file() {
        let file = serde_json::json!({ "a": 1, "b": "file" });
        let cli = Cfg { a: None, b: Some("flag".into()) };
        assert_eq!(merge(Some(file), &cli).unwrap(), Cfg { a: Some(1), b: Some("flag".into()) });
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let x = Cfg { a: Some(1), b: None };
        let y = Cfg { a: Some(2), b: None };
        assert_eq!(config_hash("t", &x).unwrap(), config_hash("t", &x).unwrap());
        assert_ne!(config_hash("t", &x).unwrap(), config_hash("t", &y).unwrap());
        assert_ne!(config_hash("t", &x).unwrap(), config_hash("u", &x).unwrap());
    }
}
