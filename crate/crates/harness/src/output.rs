//! Writes result tables, plot series and a metadata record into an output
//! directory. Nothing written depends on the clock or the thread count, so
//! identical configurations produce identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Seeds};
use crate::error::{HarnessError, Result};
use crate::table::ExperimentOutput;

pub const METADATA_FILE: &str = "metadata.json";

const RESULT_HEADER: &[&str] = &[
    "instance", "method", "param", "mean", "min", "max", "stddev", "count", "optimum", "ratio",
    "shots", "evals",
];
const RUN_HEADER: &[&str] = &["instance", "method", "param", "run", "value"];
const SUMMARY_HEADER: &[&str] = &[
    "method",
    "param",
    "instances",
    "mean_value",
    "mean_ratio",
    "stderr_ratio",
    "min_ratio",
    "max_ratio",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub experiment: String,
    pub config_sha256: String,
    pub seeds: Seeds,
    pub config: serde_json::Value,
    pub checks: BTreeMap<String, Option<f64>>,
    /// SHA-256 of every other file written.
    pub files: BTreeMap<String, String>,
}

fn write_csv<T: Serialize>(path: &Path, header: &[String], rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| HarnessError::Output(e.to_string()))?;
    fs::write(path, &bytes).map_err(|e| HarnessError::io(path, e))?;
    Ok(bytes)
}

fn strings(h: &[&str]) -> Vec<String> {
    h.iter().map(|s| s.to_string()).collect()
}

/// Fails if `dir` already holds results of a different configuration.
pub fn check_existing(dir: &Path, config_hash: &str) -> Result<()> {
    let path = dir.join(METADATA_FILE);
    if !path.exists() {
        return Ok(());
    }
    let text = fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
    let meta: Metadata = serde_json::from_str(&text)
        .map_err(|e| HarnessError::Output(format!("unreadable {}: {e}", path.display())))?;
    if meta.config_sha256 != config_hash {
        return Err(HarnessError::Config(format!(
            "{} holds results for configuration {}, not {config_hash}; choose another output directory",
            dir.display(),
            meta.config_sha256
        )));
    }
    Ok(())
}

/// Writes `results.csv`, `runs.csv`, `summary.csv`, one CSV per plot and
/// `metadata.json`. Returns the paths written.
pub fn emit_outputs(
    cfg: &ExperimentConfig,
    output: &ExperimentOutput,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    let hash = cfg.hash();
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    check_existing(dir, &hash)?;

    let mut files = BTreeMap::new();
    let mut written = Vec::new();
    let mut record = |name: &str, bytes: Vec<u8>| {
        files.insert(name.to_string(), hex::encode(Sha256::digest(&bytes)));
        written.push(dir.join(name));
    };
    let t = &output.table;
    record(
        "results.csv",
        write_csv(&dir.join("results.csv"), &strings(RESULT_HEADER), &t.rows)?,
    );
    record(
        "runs.csv",
        write_csv(&dir.join("runs.csv"), &strings(RUN_HEADER), &t.runs)?,
    );
    record(
        "summary.csv",
        write_csv(
            &dir.join("summary.csv"),
            &strings(SUMMARY_HEADER),
            &t.summary(),
        )?,
    );
    for plot in &output.plots {
        let name = format!("{}.csv", plot.name);
        record(
            &name,
            write_csv(&dir.join(&name), &plot.header, &plot.rows)?,
        );
    }
    for (name, text) in &output.texts {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
        record(name, text.clone().into_bytes());
    }

    let meta = Metadata {
        tool: "nnha".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        experiment: cfg.experiment.name().into(),
        config_sha256: hash,
        seeds: cfg.seeds,
        config: serde_json::from_str(&cfg.canonical_json()).expect("canonical config is JSON"),
        checks: output
            .checks
            .iter()
            .map(|(k, v)| (k.clone(), v.is_finite().then_some(*v)))
            .collect(),
        files,
    };
    let path = dir.join(METADATA_FILE);
    let mut text =
        serde_json::to_string_pretty(&meta).map_err(|e| HarnessError::Output(e.to_string()))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{Method, PlotData, ResultRow, ResultTable, RunRecord, SummaryRow};

    fn cfg() -> ExperimentConfig {
        ExperimentConfig::parse(
            r#"
            experiment = "kcut"
            [seeds]
            master = 5
            [graphs]
            kind = "kings"
            rows = 3
            cols = 3
            dropout = 0.0
            count = 1
            "#,
        )
        .unwrap()
    }

    fn header_of<T: Serialize>(value: &T) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.serialize(value).unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        text.lines().next().unwrap().to_string()
    }

    #[test]
    fn headers_match_field_order() {
        let row = ResultRow::from_values("g", Method::Hybrid, "", &[1.0], None, 0, 0);
        assert_eq!(header_of(&row), RESULT_HEADER.join(","));
        let run = RunRecord {
            instance: "g".into(),
            method: Method::Hybrid,
            param: "".into(),
            run: 0,
            value: 1.0,
        };
        assert_eq!(header_of(&run), RUN_HEADER.join(","));
        let s = SummaryRow {
            method: Method::Hybrid,
            param: "".into(),
            instances: 1,
            mean_value: 1.0,
            mean_ratio: None,
            stderr_ratio: None,
            min_ratio: None,
            max_ratio: None,
        };
        assert_eq!(header_of(&s), SUMMARY_HEADER.join(","));
    }

    #[test]
    fn empty_table_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        emit_outputs(&cfg(), &ExperimentOutput::default(), dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join("results.csv")).unwrap();
        assert_eq!(text, RESULT_HEADER.join(",") + "\n");
    }

    #[test]
    fn rewrite_is_byte_identical_and_foreign_config_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = ExperimentOutput::default();
        let mut table = ResultTable::default();
        table.push("g0", Method::Hybrid, "", &[3.0, 4.0], Some(5.0), 2, 0);
        out.table = table;
        let mut plot = PlotData::new("histogram", &["value", "count"]);
        plot.push(vec!["3".into(), "1".into()]);
        out.plots.push(plot);
        out.checks.insert("violations".into(), 0.0);
        let c = cfg();
        emit_outputs(&c, &out, dir.path()).unwrap();
        let first = fs::read(dir.path().join(METADATA_FILE)).unwrap();
        let results = fs::read(dir.path().join("results.csv")).unwrap();
        emit_outputs(&c, &out, dir.path()).unwrap();
        assert_eq!(first, fs::read(dir.path().join(METADATA_FILE)).unwrap());
        assert_eq!(results, fs::read(dir.path().join("results.csv")).unwrap());

        let mut other = c.clone();
        other.seeds.master = 6;
        assert!(matches!(
            emit_outputs(&other, &out, dir.path()),
            Err(HarnessError::Config(_))
        ));
    }

    #[test]
    fn unwritable_directory_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let e =
            emit_outputs(&cfg(), &ExperimentOutput::default(), &blocker.join("sub")).unwrap_err();
        assert!(matches!(e, HarnessError::Io { .. }));
    }
}
