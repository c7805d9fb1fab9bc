//! File output: CSV tables, JSON documents and run manifests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{IslmError, Result};
use crate::model::ModelConfig;
use crate::slowfast::Trajectory;

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Comma-separated table with a header row and `\n` line endings.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| IslmError::Usage("empty CSV".into()))?
            .split(',')
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (k, l) in lines.enumerate() {
            let row: Vec<String> = l.split(',').map(str::to_string).collect();
            if row.len() != header.len() {
                return Err(IslmError::Usage(format!("CSV row {} has {} fields, expected {}", k + 2, row.len(), header.len())));
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    /// Column `name` parsed as numbers.
    pub fn column_f64(&self, name: &str) -> Result<Vec<f64>> {
        let i = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IslmError::Usage(format!("no column {name}")))?;
        self.rows
            .iter()
            .map(|r| r[i].parse::<f64>().map_err(|e| IslmError::Usage(format!("column {name}: {e}"))))
            .collect()
    }
}

/// Columns `t,y,r,jump`.
pub fn trajectory_table(tr: &Trajectory) -> Table {
    let mut t = Table::new(&["t", "y", "r", "jump"]);
    for (k, s) in tr.samples.iter().enumerate() {
        t.push(vec![fmt_f64(s.t), fmt_f64(s.y), fmt_f64(s.r), u8::from(tr.is_jump(k)).to_string()]);
    }
    t
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| IslmError::Usage(e.to_string()))?;
    s.push('\n');
    write_text(path, &s)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of the resolved configuration in its canonical JSON form.
pub fn config_hash(cfg: &ModelConfig) -> String {
    sha256_hex(cfg.to_json_pretty().as_bytes())
}

/// Reads and parses a configuration file.
pub fn load_config(path: &Path) -> Result<ModelConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| IslmError::Usage(format!("cannot read {}: {e}", path.display())))?;
    ModelConfig::from_json(&text)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config_path: Option<PathBuf>,
    pub config_sha256: Option<String>,
    pub outputs: Vec<PathBuf>,
    pub wall_clock_seconds: f64,
    pub version: String,
    pub status: String,
    pub error_kind: Option<String>,
    pub message: Option<String>,
    pub exit_code: i32,
}

pub const MANIFEST_NAME: &str = "manifest.json";
