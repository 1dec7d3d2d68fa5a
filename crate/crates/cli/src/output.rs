//! Output directory handling: hash-stamped CSV and JSON files plus a
//! provenance record listing every file with its digest.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct CsvWriter {
    inner: BufWriter<File>,
}

impl CsvWriter {
    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        writeln!(self.inner, "{}", fields.join(","))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

/// Records checks as they are evaluated.
#[derive(Debug, Default)]
pub struct Checks(pub Vec<CheckResult>);

impl Checks {
    /// Passes when `value <= limit`.
    pub fn at_most(&mut self, name: impl Into<String>, value: f64, limit: f64) {
        self.0.push(CheckResult {
            name: name.into(),
            value,
            limit,
            pass: value <= limit,
        });
    }

    /// Passes when `value >= limit`.
    pub fn at_least(&mut self, name: impl Into<String>, value: f64, limit: f64) {
        self.0.push(CheckResult {
            name: name.into(),
            value,
            limit,
            pass: value >= limit,
        });
    }

    pub fn all_pass(&self) -> bool {
        self.0.iter().all(|c| c.pass)
    }
}

pub struct OutputDir {
    dir: PathBuf,
    hash: String,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path, config: &RunConfig) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut out = OutputDir {
            dir: dir.to_path_buf(),
            hash: config.hash(),
            files: Vec::new(),
        };
        let text = format!("# config_hash: {}\n{}", out.hash, config.to_canonical());
        out.write_text("config.txt", &text)?;
        Ok(out)
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.path(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    /// Opens a CSV file with the hash comment and the header already written.
    pub fn csv(&mut self, name: &str, header: &[&str]) -> Result<CsvWriter> {
        let path = self.path(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut inner = BufWriter::new(file);
        writeln!(inner, "# config_hash: {}", self.hash)?;
        writeln!(inner, "{}", header.join(","))?;
        Ok(CsvWriter { inner })
    }

    /// Writes `value` as a JSON object with a leading `config_hash` field.
    pub fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut map = Map::new();
        map.insert("config_hash".into(), Value::String(self.hash.clone()));
        match serde_json::to_value(value)? {
            Value::Object(body) => map.extend(body),
            other => {
                map.insert("data".into(), other);
            }
        }
        let text = serde_json::to_string_pretty(&Value::Object(map))? + "\n";
        self.write_text(name, &text)
    }

    /// Writes `provenance.json` last, with digests of every file written before it.
    pub fn finish(mut self, command: &str, config: &RunConfig, run: Value, checks: &Checks) -> Result<()> {
        let mut digests = Map::new();
        for name in &self.files {
            let bytes = fs::read(self.dir.join(name))?;
            digests.insert(name.clone(), Value::String(hex::encode(Sha256::digest(&bytes))));
        }
        let echo: Map<String, Value> = config
            .entries()
            .into_iter()
            .map(|(k, v)| (k.to_string(), Value::String(v)))
            .collect();
        let record = json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "config": echo,
            "run": run,
            "checks": checks.0,
            "all_checks_pass": checks.all_pass(),
            "files": digests,
        });
        self.json("provenance.json", &record)
    }
}
