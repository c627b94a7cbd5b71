//! CSV and JSON writers for traces, summaries and aggregates.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rlsa_core::TraceRecord;
use serde::Serialize;

use crate::error::{HarnessError, HarnessResult};

pub const TRACE_FILE: &str = "trace.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const DESCRIPTOR_FILE: &str = "descriptor.json";
pub const CONFIG_FILE: &str = "config.json";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const RATE_REPORT_FILE: &str = "rate_report.json";

pub fn ensure_dir(dir: &Path) -> HarnessResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

/// Streaming trace writer; the header is written on creation.
pub struct TraceWriter {
    inner: csv::Writer<BufWriter<File>>,
    path: std::path::PathBuf,
}

impl TraceWriter {
    pub fn create(path: &Path) -> HarnessResult<Self> {
        let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
        let mut inner = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(BufWriter::new(file));
        inner
            .write_record(rlsa_core::metrics::TRACE_COLUMNS)
            .map_err(|e| csv_io(path, e))?;
        Ok(Self {
            inner,
            path: path.to_path_buf(),
        })
    }

    pub fn write(&mut self, record: &TraceRecord) -> HarnessResult<()> {
        self.inner.serialize(record).map_err(|e| csv_io(&self.path, e))
    }

    pub fn finish(mut self) -> HarnessResult<()> {
        self.inner.flush().map_err(|e| HarnessError::io(&self.path, e))
    }
}

fn csv_io(path: &Path, e: csv::Error) -> HarnessError {
    HarnessError::io(path, std::io::Error::other(e.to_string()))
}

pub fn write_trace(path: &Path, records: &[TraceRecord]) -> HarnessResult<()> {
    let mut w = TraceWriter::create(path)?;
    for r in records {
        w.write(r)?;
    }
    w.finish()
}

pub fn read_trace(path: &Path) -> HarnessResult<Vec<TraceRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_io(path, e))?;
    reader
        .deserialize()
        .map(|r| r.map_err(|e| csv_io(path, e)))
        .collect()
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> HarnessResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> HarnessResult<()> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| HarnessError::io(path, std::io::Error::other(e)))?;
    w.write_all(b"\n").map_err(|e| HarnessError::io(path, e))?;
    w.flush().map_err(|e| HarnessError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rlsa_core::GapMethod;

    fn record(k: u64, gap: Option<f64>) -> TraceRecord {
        TraceRecord {
            k,
            rho_k: 0.5,
            gamma_k: 0.25,
            t_k: 1.0,
            infeas_xbar: 1e-3,
            gap_xbar: gap,
            gap_method: gap.map(|_| GapMethod::ExactConcaveOracle),
            lambda_norm: 2.0,
            wall_ms: 0.0,
            xbar_feasible: false,
        }
    }

    #[test]
    fn trace_layout_and_round_trip() {
        let dir = std::env::temp_dir().join(format!("rlsa-output-{}", std::process::id()));
        ensure_dir(&dir).unwrap();
        let path = dir.join(TRACE_FILE);
        let rows = vec![record(0, Some(0.125)), record(1, None)];
        write_trace(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "k,rho_k,gamma_k,t_k,infeas_xbar,gap_xbar,gap_method,lambda_norm,wall_ms"
        );
        assert_eq!(lines.next().unwrap(), "0,0.5,0.25,1.0,0.001,0.125,exact-concave-oracle,2.0,0.0");
        assert_eq!(lines.next().unwrap(), "1,0.5,0.25,1.0,0.001,,,2.0,0.0");
        assert_eq!(read_trace(&path).unwrap(), rows);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
