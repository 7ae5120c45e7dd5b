//! Small deterministic CSV layer.
//!
//! Every file starts with a `#`-prefixed metadata comment (seed, config
//! hash, tool version) followed by a header row. Fields never need quoting
//! here: identifiers are validated to be comma-free and numbers render via
//! the shortest round-trip formatting, so byte-identical reruns come for
//! free. Readers skip comment lines.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Metadata stamped into the comment line of every emitted CSV.
#[derive(Debug, Clone)]
pub struct CsvMeta {
    pub seed: u64,
    pub config_hash: u64,
    pub tool_version: &'static str,
}

impl CsvMeta {
    pub fn comment_line(&self) -> String {
        format!(
            "# seed={} config_hash={:016x} version={}",
            self.seed, self.config_hash, self.tool_version
        )
    }
}

/// In-memory CSV builder with stable formatting.
#[derive(Debug)]
pub struct CsvWriter {
    buf: String,
    columns: usize,
}

impl CsvWriter {
    pub fn new(meta: &CsvMeta, header: &[&str]) -> Self {
        let mut buf = String::new();
        let _ = writeln!(buf, "{}", meta.comment_line());
        let _ = writeln!(buf, "{}", header.join(","));
        CsvWriter {
            buf,
            columns: header.len(),
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        debug_assert_eq!(fields.len(), self.columns, "column count mismatch");
        debug_assert!(fields.iter().all(|f| !f.contains(',') && !f.contains('\n')));
        let _ = writeln!(self.buf, "{}", fields.join(","));
    }

    pub fn finish(self) -> String {
        self.buf
    }

    /// Write atomically: temp file in the same directory, then rename.
    pub fn write_to(self, path: &Path) -> Result<()> {
        write_atomic(path, &self.buf)
    }
}

/// Atomic file write (temp + rename) so partially written outputs never land.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Shortest round-trip rendering of a float (`inf` for infeasible sentinels).
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Parse a CSV file into records, skipping `#` comments and the header.
/// Returns (header, rows).
pub fn read_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = fs::read_to_string(path)?;
    parse_rows(&text)
}

/// Parse CSV text, skipping `#` comments; first non-comment line is the header.
pub fn parse_rows(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for line in text.lines() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split(',').map(|s| s.to_string()).collect();
        match &header {
            None => header = Some(fields),
            Some(h) => {
                if fields.len() != h.len() {
                    return Err(Error::Contract(format!(
                        "csv row has {} fields, header has {}",
                        fields.len(),
                        h.len()
                    )));
                }
                rows.push(fields);
            }
        }
    }
    let header = header.ok_or_else(|| Error::Contract("csv has no header row".into()))?;
    Ok((header, rows))
}

pub fn parse_f64(field: &str, context: &str) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|_| Error::Contract(format!("{context}: cannot parse {field:?} as a number")))
}

pub fn parse_u64(field: &str, context: &str) -> Result<u64> {
    field
        .parse::<u64>()
        .map_err(|_| Error::Contract(format!("{context}: cannot parse {field:?} as an integer")))
}

/// FNV-1a hash of a canonical string; used to stamp configs into outputs.
pub fn fnv1a_hash(text: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in text.as_bytes() {
        hash ^= *byte as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
