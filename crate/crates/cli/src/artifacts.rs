//! Per-suite output files.
//!
//! `<suite>.csv` holds the suite table, `<suite>.ndjson` the bound reports,
//! `<suite>.records.ndjson` raw result records and `<suite>.metadata.json` the
//! resolved config plus a timestamp. Only the metadata file varies between
//! identical runs.

use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use kato_core::report::{csv_row, overall, write_ndjson, BoundReport, Verdict, REPORT_CSV_HEADER};
use serde::Serialize;
use serde_json::Value;

pub struct Artifacts {
    pub suite: &'static str,
    header: String,
    rows: Vec<String>,
    pub reports: Vec<BoundReport>,
    records: Vec<String>,
}

impl Artifacts {
    /// Suite whose table is the report CSV.
    pub fn reports_table(suite: &'static str) -> Self {
        Self::with_table(suite, "")
    }

    pub fn with_table(suite: &'static str, header: &str) -> Self {
        Self {
            suite,
            header: header.to_string(),
            rows: Vec::new(),
            reports: Vec::new(),
            records: Vec::new(),
        }
    }

    pub fn row(&mut self, row: String) {
        self.rows.push(row);
    }

    pub fn report(&mut self, r: BoundReport) {
        self.reports.push(r);
    }

    pub fn extend(&mut self, rs: impl IntoIterator<Item = BoundReport>) {
        self.reports.extend(rs);
    }

    pub fn record<T: Serialize>(&mut self, value: &T) {
        self.records.push(serde_json::to_string(value).expect("record is serializable"));
    }

    pub fn verdict(&self) -> Verdict {
        overall(&self.reports)
    }

    pub fn write(&self, dir: &Path, metadata: Value) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        let mut csv = Vec::new();
        if self.header.is_empty() {
            writeln!(csv, "{REPORT_CSV_HEADER}")?;
            for r in &self.reports {
                writeln!(csv, "{}", csv_row(r))?;
            }
        } else {
            writeln!(csv, "{}", self.header)?;
            for r in &self.rows {
                writeln!(csv, "{r}")?;
            }
        }
        fs::write(dir.join(format!("{}.csv", self.suite)), csv)?;

        let mut nd = Vec::new();
        write_ndjson(&self.reports, &mut nd)?;
        fs::write(dir.join(format!("{}.ndjson", self.suite)), nd)?;

        let mut rec = String::new();
        for r in &self.records {
            rec.push_str(r);
            rec.push('\n');
        }
        fs::write(dir.join(format!("{}.records.ndjson", self.suite)), rec)?;

        let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let meta = serde_json::json!({
            "suite": self.suite,
            "timestamp": stamp,
            "version": env!("CARGO_PKG_VERSION"),
            "config": metadata,
        });
        fs::write(
            dir.join(format!("{}.metadata.json", self.suite)),
            serde_json::to_string_pretty(&meta).expect("metadata is serializable"),
        )
    }
}
