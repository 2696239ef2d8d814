//! Result records and their JSON/CSV persistence.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use weakmean::orbitstats::{Schedule, StatRecord};
use weakmean::rational::{approx, parts, Rational};
use weakmean::systems::SystemDescriptor;

use crate::config::{ExperimentConfig, Format, Task};
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Provenance {
    pub system: SystemDescriptor,
    pub seed: u64,
    pub schedule: Option<Schedule>,
    /// Per-coordinate truncation bound of the system's space.
    #[serde(with = "parts")]
    pub truncation_bound: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ResultRecord {
    pub schema_version: u32,
    pub tool_version: String,
    /// SHA-256 of the canonical config JSON.
    pub config_hash: String,
    /// SHA-256 of the serialized payload.
    pub payload_hash: String,
    /// Wall-clock time of the run. Not covered by either hash.
    pub timestamp: String,
    pub task: Task,
    pub payload: Value,
    pub provenance: Provenance,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl ResultRecord {
    pub fn new(config: &ExperimentConfig, payload: Value, schedule: Option<Schedule>) -> Result<Self, CliError> {
        let payload_hash = sha256_hex(&serde_json::to_vec(&payload)?);
        Ok(ResultRecord {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: sha256_hex(config.canonical_json()?.as_bytes()),
            payload_hash,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            task: config.task,
            payload,
            provenance: Provenance {
                system: config.system.clone(),
                seed: config.seed,
                schedule,
                truncation_bound: config.system.space().truncation_bound(),
            },
        })
    }

    /// The serialized payload: the byte-determinism contract applies here.
    pub fn payload_bytes(&self) -> Result<Vec<u8>, CliError> {
        Ok(serde_json::to_vec(&self.payload)?)
    }
}

/// One CSV line. Column order is fixed: pairId, statKind, n, num, den, approx.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CsvRow {
    pub pair_id: String,
    pub stat_kind: String,
    pub n: usize,
    pub num: String,
    pub den: String,
    pub approx: String,
}

impl CsvRow {
    pub fn new(pair_id: &str, stat_kind: &str, n: usize, value: &Rational) -> Self {
        CsvRow {
            pair_id: pair_id.to_string(),
            stat_kind: stat_kind.to_string(),
            n,
            num: value.numer().to_string(),
            den: value.denom().to_string(),
            approx: approx(value),
        }
    }
}

impl From<&StatRecord> for CsvRow {
    fn from(r: &StatRecord) -> Self {
        CsvRow::new(&r.pair_id, &r.stat_kind, r.n, &r.value)
    }
}

pub fn write_csv(rows: &[CsvRow], mut out: impl std::io::Write) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(&mut out);
    if rows.is_empty() {
        w.write_record(["pairId", "statKind", "n", "num", "den", "approx"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `result.json` and/or `table.csv` into `dir`.
pub fn persist(record: &ResultRecord, rows: &[CsvRow], dir: &Path, format: Format) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    if matches!(format, Format::Json | Format::Both) {
        let mut text = serde_json::to_string_pretty(record)?;
        text.push('\n');
        fs::write(dir.join("result.json"), text)?;
    }
    if matches!(format, Format::Csv | Format::Both) {
        write_csv(rows, fs::File::create(dir.join("table.csv"))?)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use weakmean::rational::ratio;

    #[test]
    fn csv_columns_are_fixed() {
        let mut buf = vec![];
        write_csv(&[CsvRow::new("p0", "weakMean", 16, &ratio(1, 4))], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "pairId,statKind,n,num,den,approx\np0,weakMean,16,1,4,0.25\n");
    }
}
