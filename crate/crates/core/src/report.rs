//! Result files: CSV tables with fixed columns and a JSON run manifest.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::calibration::ProbeRatios;
use crate::error::{Error, Result};
use crate::mc::BiasNote;
use crate::process::Sided;

/// Bumped on any change to the CSV columns or the manifest layout.
pub const SCHEMA_VERSION: u32 = 1;

pub const VERIFY_COLUMNS: [&str; 19] = [
    "process", "alpha", "beta", "hurst", "epsilon", "x", "q", "w", "mode", "n_paths", "refine_m", "k",
    "p_hat", "ci_lo", "ci_hi", "p_limit", "gap", "bias_note", "seed",
];

pub const PROBE_COLUMNS: [&str; 10] = [
    "process", "epsilon", "x", "r", "ratio31", "ratio32", "ratio33", "target31", "target32", "target33",
];

/// One `(ε, x)` row of a verification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyRow {
    pub process: String,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub hurst: Option<f64>,
    pub epsilon: f64,
    pub x: f64,
    pub q: f64,
    pub w: f64,
    pub mode: Sided,
    pub n_paths: u64,
    pub refine_m: usize,
    pub k: u64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub p_limit: Option<f64>,
    pub gap: Option<f64>,
    pub bias_note: BiasNote,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub process: String,
    pub epsilon: f64,
    pub x: f64,
    pub r: f64,
    pub ratio31: f64,
    pub ratio32: f64,
    pub ratio33: f64,
    pub target31: f64,
    pub target32: f64,
    pub target33: f64,
}

impl ProbeRow {
    pub fn new(process: &str, p: &ProbeRatios) -> Self {
        Self {
            process: process.to_string(),
            epsilon: p.epsilon,
            x: p.x,
            r: p.r,
            ratio31: p.ratio31,
            ratio32: p.ratio32,
            ratio33: p.ratio33,
            target31: p.target31,
            target32: p.target32,
            target33: p.target33,
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Config(format!("{}: {e}", path.display()))
}

/// CSV text with the given header, even when `rows` is empty.
pub fn to_csv<T: Serialize>(columns: &[&str], rows: &[T]) -> Result<String> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let fail = |e: csv::Error| Error::Config(format!("CSV encoding failed: {e}"));
    wtr.write_record(columns).map_err(fail)?;
    for row in rows {
        wtr.serialize(row).map_err(fail)?;
    }
    let bytes = wtr.into_inner().map_err(|e| Error::Config(format!("CSV encoding failed: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Config(format!("CSV encoding failed: {e}")))
}

pub fn write_csv<T: Serialize>(path: &Path, columns: &[&str], rows: &[T]) -> Result<()> {
    let text = to_csv(columns, rows)?;
    let mut f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| io_err(path, e))
}

/// Read rows back, checking the header against `columns`.
pub fn read_csv<T: DeserializeOwned>(path: &Path, columns: &[&str]) -> Result<Vec<T>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let header = rdr.headers().map_err(|e| io_err(path, e))?;
    if !header.iter().eq(columns.iter().copied()) {
        return Err(io_err(path, format!("unexpected header {header:?}")));
    }
    rdr.deserialize().map(|r| r.map_err(|e| io_err(path, e))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSource {
    Flag,
    Entropy,
}

/// A result file written by a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub file: String,
    pub kind: String,
    pub rows: usize,
}

/// Describes one run: the resolved configuration, the seed and the result
/// files it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub toolkit_version: String,
    pub command: String,
    pub master_seed: u64,
    pub seed_source: SeedSource,
    pub config: serde_json::Value,
    pub results: Vec<ResultRecord>,
}

impl RunManifest {
    pub fn new(command: &str, master_seed: u64, seed_source: SeedSource, config: serde_json::Value) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            master_seed,
            seed_source,
            config,
            results: Vec::new(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| io_err(path, e))?;
        fs::write(path, text + "\n").map_err(|e| io_err(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let m: Self = serde_json::from_str(&text).map_err(|e| io_err(path, e))?;
        if m.schema_version != SCHEMA_VERSION {
            return Err(io_err(path, format!("schema version {} is not {SCHEMA_VERSION}", m.schema_version)));
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(p_hat: f64, hurst: Option<f64>) -> VerifyRow {
        VerifyRow {
            process: "lfsm".into(),
            alpha: Some(1.5),
            beta: Some(-1.0),
            hurst,
            epsilon: 0.1,
            x: -1.0,
            q: 0.012_529_915_189_744_942,
            w: 1.158_118_618_408_67e-2,
            mode: Sided::One,
            n_paths: 1000,
            refine_m: 16,
            k: 1,
            p_hat,
            ci_lo: 0.0,
            ci_hi: 1.0,
            p_limit: None,
            gap: None,
            bias_note: BiasNote::GridUnderstated,
            seed: u64::MAX,
        }
    }

    #[test]
    fn header_is_exact() {
        let text = to_csv(&VERIFY_COLUMNS, &[row(0.5, Some(0.8))]).unwrap();
        let first = text.lines().next().unwrap();
        assert_eq!(
            first,
            "process,alpha,beta,hurst,epsilon,x,q,w,mode,n_paths,refine_m,k,p_hat,ci_lo,ci_hi,p_limit,gap,bias_note,seed"
        );
        assert!(text.contains(",one,"));
        assert!(text.contains(",grid-understated,"));
        assert_eq!(to_csv::<ProbeRow>(&PROBE_COLUMNS, &[]).unwrap().lines().count(), 1);
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        let mut m = RunManifest::new("verify", 7, SeedSource::Flag, serde_json::json!({"epsilon": [0.1, 0.05]}));
        m.results.push(ResultRecord {
            file: "verify.csv".into(),
            kind: "verify".into(),
            rows: 2,
        });
        m.write(&path).unwrap();
        assert_eq!(RunManifest::read(&path).unwrap(), m);
    }

    proptest! {
        #[test]
        fn verify_rows_round_trip(p in 0.0f64..1.0, h in proptest::option::of(0.67f64..1.0), scale in -300i32..300) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("rows.csv");
            let mut r = row(p, h);
            r.q = p * 10f64.powi(scale);
            let rows = vec![r.clone(), row(1.0 - p, None)];
            write_csv(&path, &VERIFY_COLUMNS, &rows).unwrap();
            let back: Vec<VerifyRow> = read_csv(&path, &VERIFY_COLUMNS).unwrap();
            prop_assert_eq!(back, rows);
        }
    }
}
