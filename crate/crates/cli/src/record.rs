//! Experiment records, atomic file output and CSV emission.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const RECORD_SCHEMA_VERSION: &str = "1.0";

/// Numeric table emitted as one CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub header: Vec<String>,
    /// Missing values (NaN) are `null` in JSON.
    #[serde(with = "nan_as_null")]
    pub rows: Vec<Vec<f64>>,
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(rows: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
        let opt: Vec<Vec<Option<f64>>> =
            rows.iter().map(|r| r.iter().map(|x| x.is_finite().then_some(*x)).collect()).collect();
        opt.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
        let opt = Vec::<Vec<Option<f64>>>::deserialize(d)?;
        Ok(opt.into_iter().map(|r| r.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect()).collect())
    }
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        self.rows.push(row);
    }

    /// RFC-4180 text with shortest round-trip float formatting.
    pub fn to_csv(&self) -> CliResult<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        let ctx = |e: csv::Error| CliError::IncompleteRecord(e.to_string());
        w.write_record(&self.header).map_err(ctx)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|x| format!("{x}"))).map_err(ctx)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::IncompleteRecord(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("ascii"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub schema_version: String,
    pub command: String,
    pub config: RunConfig,
    /// SHA-256 over the config snapshot and any input files.
    pub input_hash: String,
    pub metrics: BTreeMap<String, f64>,
    pub tables: BTreeMap<String, Table>,
    /// File names relative to the run directory.
    pub artifacts: Vec<String>,
    pub started_at: String,
    pub finished_at: String,
    pub wall_time_s: f64,
}

impl ExperimentRecord {
    pub fn to_json(&self) -> CliResult<String> {
        serde_json::to_string_pretty(self).map_err(|e| CliError::IncompleteRecord(e.to_string()))
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        #[derive(Deserialize)]
        struct Head {
            schema_version: String,
        }
        let head: Head = serde_json::from_str(text).map_err(|e| CliError::parse("record", e))?;
        metavqt::circuit::check_schema_major(&head.schema_version, RECORD_SCHEMA_VERSION)
            .map_err(|e| CliError::parse("record", e))?;
        serde_json::from_str(text).map_err(|e| CliError::parse("record", e))
    }
}

/// Hex SHA-256 of the config (minus the output directory) and input bytes.
pub fn input_hash(config: &RunConfig, inputs: &[&[u8]]) -> String {
    let mut snapshot = config.clone();
    snapshot.settings.output.dir = None;
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(&snapshot).expect("config serializes"));
    for bytes in inputs {
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(bytes);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes to a sibling temp file, syncs, then renames over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> CliResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(CliError::io(path, e));
    }
    Ok(())
}

/// One CSV per table, in name order. Returns the written paths.
pub fn emit_plotdata(record: &ExperimentRecord, dir: &Path) -> CliResult<Vec<PathBuf>> {
    if record.metrics.is_empty() {
        return Err(CliError::IncompleteRecord("no metrics".into()));
    }
    if record.tables.is_empty() {
        return Err(CliError::IncompleteRecord("no tables".into()));
    }
    for (name, t) in &record.tables {
        if t.rows.is_empty() {
            return Err(CliError::IncompleteRecord(format!("table '{name}' has no rows")));
        }
        if let Some(bad) = t.rows.iter().position(|r| r.len() != t.header.len()) {
            return Err(CliError::IncompleteRecord(format!(
                "table '{name}' row {bad} has {} cells for {} columns",
                t.rows[bad].len(),
                t.header.len()
            )));
        }
    }
    let mut written = Vec::new();
    for (name, t) in &record.tables {
        let path = dir.join(format!("{name}.csv"));
        write_atomic(&path, t.to_csv()?.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}
