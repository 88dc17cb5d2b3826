//! Versioned binary container shared by every artifact the pipeline writes.
//!
//! Layout:
//!
//! ```text
//! RODRECON\n                     magic
//! {"format_version":1, ...}\n    one-line JSON header
//! f64 little-endian payload      arrays concatenated in header order
//! ```
//!
//! The header names the artifact kind, carries free-form metadata and lists
//! each array's name and length. JSON objects are key-sorted, so the same
//! artifact always serializes to the same bytes.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use std::path::Path;

const MAGIC: &[u8] = b"RODRECON\n";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ArrayEntry {
    name: String,
    len: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    kind: String,
    meta: Map<String, Value>,
    arrays: Vec<ArrayEntry>,
}

/// A named bundle of metadata and `f64` arrays.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub kind: String,
    pub meta: Map<String, Value>,
    pub arrays: Vec<(String, Vec<f64>)>,
}

fn version_error(found: impl Into<String>) -> Error {
    Error::FormatVersionMismatch {
        expected: format!("rodrecon artifact v{FORMAT_VERSION}"),
        found: found.into(),
    }
}

impl Artifact {
    pub fn new(kind: &str) -> Self {
        Artifact {
            kind: kind.to_string(),
            meta: Map::new(),
            arrays: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl Into<Value>) {
        self.meta.insert(key.to_string(), value.into());
    }

    pub fn push(&mut self, name: impl Into<String>, data: Vec<f64>) {
        self.arrays.push((name.into(), data));
    }

    fn missing(&self, what: &str) -> Error {
        Error::ShapeMismatch(format!("{} artifact lacks `{what}`", self.kind))
    }

    pub fn array(&self, name: &str) -> Result<&[f64]> {
        self.arrays
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, d)| d.as_slice())
            .ok_or_else(|| self.missing(name))
    }

    pub fn get(&self, key: &str) -> Result<&Value> {
        self.meta.get(key).ok_or_else(|| self.missing(key))
    }

    pub fn get_str(&self, key: &str) -> Result<&str> {
        self.get(key)?.as_str().ok_or_else(|| self.missing(key))
    }

    pub fn get_u64(&self, key: &str) -> Result<u64> {
        self.get(key)?.as_u64().ok_or_else(|| self.missing(key))
    }

    pub fn get_f64(&self, key: &str) -> Result<f64> {
        self.get(key)?.as_f64().ok_or_else(|| self.missing(key))
    }

    pub fn get_bool(&self, key: &str) -> Result<bool> {
        self.get(key)?.as_bool().ok_or_else(|| self.missing(key))
    }

    pub fn get_usizes(&self, key: &str) -> Result<Vec<usize>> {
        self.get(key)?
            .as_array()
            .and_then(|a| a.iter().map(|v| v.as_u64().map(|x| x as usize)).collect())
            .ok_or_else(|| self.missing(key))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            format_version: FORMAT_VERSION,
            kind: self.kind.clone(),
            meta: self.meta.clone(),
            arrays: self
                .arrays
                .iter()
                .map(|(name, d)| ArrayEntry {
                    name: name.clone(),
                    len: d.len(),
                })
                .collect(),
        };
        let mut out = MAGIC.to_vec();
        out.extend(serde_json::to_vec(&header).expect("header serializes"));
        out.push(b'\n');
        for (_, d) in &self.arrays {
            for v in d {
                out.extend(v.to_le_bytes());
            }
        }
        out
    }

    /// Parses bytes written by [`Artifact::to_bytes`], requiring `kind`.
    pub fn from_bytes(bytes: &[u8], kind: &str) -> Result<Self> {
        let rest = bytes
            .strip_prefix(MAGIC)
            .ok_or_else(|| version_error("missing magic bytes"))?;
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| version_error("truncated header"))?;
        let header: Header = serde_json::from_slice(&rest[..end])
            .map_err(|e| version_error(format!("unreadable header ({e})")))?;
        if header.format_version != FORMAT_VERSION {
            return Err(version_error(format!("v{}", header.format_version)));
        }
        if header.kind != kind {
            return Err(Error::InvalidInput(format!(
                "expected a {kind} artifact, found {}",
                header.kind
            )));
        }
        let mut payload = &rest[end + 1..];
        let expected: usize = header.arrays.iter().map(|a| a.len * 8).sum();
        if payload.len() != expected {
            return Err(version_error(format!(
                "payload of {} bytes, header declares {expected}",
                payload.len()
            )));
        }
        let mut arrays = Vec::with_capacity(header.arrays.len());
        for a in header.arrays {
            let (chunk, tail) = payload.split_at(a.len * 8);
            payload = tail;
            let data = chunk
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            arrays.push((a.name, data));
        }
        Ok(Artifact {
            kind: header.kind,
            meta: header.meta,
            arrays,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path, kind: &str) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, kind)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hex SHA-256 of a file's bytes.
pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}
