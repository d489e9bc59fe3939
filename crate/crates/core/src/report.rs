//! Result persistence: per-user CSV, JSON summaries, sweep tables, and the
//! read-back paths used to verify them.
//!
//! Every output file embeds the hash of the config (or sweep spec) that
//! produced it: CSVs carry a `# config_hash=<hex>` comment line above the
//! header, JSON files carry the hash as a field. Numbers are written in
//! shortest round-trip form, so re-reading a file recovers the exact
//! values and identical runs produce identical bytes. Wall-clock timings
//! are deliberately kept out of these files (they would break
//! byte-reproducibility) and go to a separate `timing.log`.

use crate::error::{Error, Result};
use crate::experiment::{RateReport, SweepTable, UeRecord};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};

/// File format of an emitted report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Per-user CSV column schema, fixed by contract.
pub const USER_CSV_HEADER: &str = "ue_id,rate_bps_hz,se_bps_hz,outage";

/// One layout's line in the JSON summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutSummary {
    pub layout: usize,
    pub sum_se_bps_hz: f64,
    pub outage_fraction: f64,
    pub srs_fallback_edges: usize,
}

/// Aggregate view of a run, as stored in `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub n_layouts: usize,
    pub n_users: usize,
    pub mean_sum_se_bps_hz: f64,
    pub stderr_sum_se_bps_hz: f64,
    pub outage_fraction: f64,
    pub layouts: Vec<LayoutSummary>,
}

/// Project a report onto its JSON summary form.
pub fn summary_of(report: &RateReport) -> RunSummary {
    RunSummary {
        config_hash: report.config_hash.clone(),
        n_layouts: report.layouts.len(),
        n_users: report.users().count(),
        mean_sum_se_bps_hz: report.mean_sum_se_bps_hz,
        stderr_sum_se_bps_hz: report.stderr_sum_se_bps_hz,
        outage_fraction: report.outage_fraction,
        layouts: report
            .layouts
            .iter()
            .map(|l| LayoutSummary {
                layout: l.layout,
                sum_se_bps_hz: l.sum_se_bps_hz,
                outage_fraction: l.outage_fraction,
                srs_fallback_edges: l.srs_fallback_edges,
            })
            .collect(),
    }
}

fn create(path: &Path) -> Result<std::fs::File> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::File::create(path).map_err(|e| Error::io(path, e))
}

/// Write the per-user table: a config-hash comment line, the fixed header,
/// one row per user in layout-then-user order.
pub fn write_user_csv(report: &RateReport, path: &Path) -> Result<()> {
    let mut file = create(path)?;
    writeln!(file, "# config_hash={}", report.config_hash).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let as_csv = |e: csv::Error| Error::Serde(format!("{}: {e}", path.display()));
    w.write_record(USER_CSV_HEADER.split(',')).map_err(as_csv)?;
    for u in report.users() {
        w.write_record([
            u.ue_id.to_string(),
            format!("{}", u.rate_bps_hz),
            format!("{}", u.se_bps_hz),
            (u.outage as u8).to_string(),
        ])
        .map_err(as_csv)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Write the JSON summary (pretty-printed, trailing newline).
pub fn write_run_summary(report: &RateReport, path: &Path) -> Result<()> {
    let mut file = create(path)?;
    let text = serde_json::to_string_pretty(&summary_of(report))
        .map_err(|e| Error::Serde(e.to_string()))?;
    writeln!(file, "{text}").map_err(|e| Error::io(path, e))
}

/// Read a per-user CSV back: the embedded config hash and the records.
pub fn read_user_csv(path: &Path) -> Result<(String, Vec<UeRecord>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |what: &str| Error::Serde(format!("{}: {what}", path.display()));
    let (first, rest) = text
        .split_once('\n')
        .ok_or_else(|| bad("missing hash comment line"))?;
    let hash = first
        .strip_prefix("# config_hash=")
        .ok_or_else(|| bad("first line is not a config-hash comment"))?
        .to_string();
    let mut rdr = csv::Reader::from_reader(rest.as_bytes());
    {
        let headers = rdr
            .headers()
            .map_err(|e| bad(&format!("unreadable header: {e}")))?;
        let expect: Vec<&str> = USER_CSV_HEADER.split(',').collect();
        if headers.iter().collect::<Vec<_>>() != expect {
            return Err(bad(&format!("unexpected header {headers:?}")));
        }
    }
    let mut users = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| bad(&format!("unreadable row: {e}")))?;
        let field = |i: usize| -> Result<&str> {
            record
                .get(i)
                .ok_or_else(|| bad(&format!("row {record:?} is short")))
        };
        users.push(UeRecord {
            ue_id: field(0)?
                .parse()
                .map_err(|e| bad(&format!("bad ue_id: {e}")))?,
            rate_bps_hz: field(1)?
                .parse()
                .map_err(|e| bad(&format!("bad rate: {e}")))?,
            se_bps_hz: field(2)?
                .parse()
                .map_err(|e| bad(&format!("bad se: {e}")))?,
            outage: match field(3)? {
                "0" => false,
                "1" => true,
                other => return Err(bad(&format!("bad outage flag {other:?}"))),
            },
        });
    }
    Ok((hash, users))
}

/// Read a JSON summary back.
pub fn read_run_summary(path: &Path) -> Result<RunSummary> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Serde(format!("{}: {e}", path.display())))
}

fn optional<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

/// Write the sweep table as CSV: spec-hash comment, then one row per
/// combination with the swept parameters as leading columns.
pub fn write_sweep_csv(table: &SweepTable, path: &Path) -> Result<()> {
    let mut file = create(path)?;
    writeln!(file, "# spec_hash={}", table.spec_hash).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let as_csv = |e: csv::Error| Error::Serde(format!("{}: {e}", path.display()));
    let mut header: Vec<String> = vec!["index".into()];
    header.extend(table.params.iter().cloned());
    header.extend(
        [
            "sum_se_bps_hz",
            "stderr_sum_se_bps_hz",
            "outage_fraction",
            "config_hash",
            "best_in_group",
            "error",
        ]
        .map(String::from),
    );
    w.write_record(&header).map_err(as_csv)?;
    for row in &table.rows {
        let mut record: Vec<String> = vec![row.index.to_string()];
        for p in &table.params {
            let value = row
                .settings
                .iter()
                .find(|(name, _)| name == p)
                .map(|(_, v)| v.clone())
                .unwrap_or_default();
            record.push(value);
        }
        record.push(optional(&row.sum_se_bps_hz));
        record.push(optional(&row.stderr_sum_se_bps_hz));
        record.push(optional(&row.outage_fraction));
        record.push(optional(&row.config_hash));
        record.push((row.best_in_group as u8).to_string());
        record.push(row.error.clone().unwrap_or_default());
        w.write_record(&record).map_err(as_csv)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Write the sweep table as JSON (timings excluded by construction).
pub fn write_sweep_json(table: &SweepTable, path: &Path) -> Result<()> {
    let mut file = create(path)?;
    let text =
        serde_json::to_string_pretty(table).map_err(|e| Error::Serde(e.to_string()))?;
    writeln!(file, "{text}").map_err(|e| Error::io(path, e))
}

/// Read a sweep table back from JSON.
pub fn read_sweep_json(path: &Path) -> Result<SweepTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Serde(format!("{}: {e}", path.display())))
}

/// Write per-row wall-clock timings. This file is *not* byte-reproducible,
/// which is why runtimes live here and nowhere else.
pub fn write_sweep_timing(table: &SweepTable, path: &Path) -> Result<()> {
    let mut file = create(path)?;
    let io = |e: std::io::Error| Error::io(path, e);
    let mut total = 0.0;
    for row in &table.rows {
        let secs = row.runtime.as_secs_f64();
        total += secs;
        writeln!(file, "row {}: {:.3} s", row.index, secs).map_err(io)?;
    }
    writeln!(file, "total: {total:.3} s").map_err(io)
}

/// Emit a run report in the requested format; returns the written paths.
pub fn emit_run(
    report: &RateReport,
    format: OutputFormat,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let path = match format {
        OutputFormat::Csv => {
            let p = out_dir.join("users.csv");
            write_user_csv(report, &p)?;
            p
        }
        OutputFormat::Json => {
            let p = out_dir.join("summary.json");
            write_run_summary(report, &p)?;
            p
        }
    };
    Ok(vec![path])
}

/// Emit a sweep table in the requested format plus its timing sidecar;
/// returns the written paths.
pub fn emit_sweep(
    table: &SweepTable,
    format: OutputFormat,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let main = match format {
        OutputFormat::Csv => {
            let p = out_dir.join("sweep.csv");
            write_sweep_csv(table, &p)?;
            p
        }
        OutputFormat::Json => {
            let p = out_dir.join("sweep.json");
            write_sweep_json(table, &p)?;
            p
        }
    };
    let timing = out_dir.join("timing.log");
    write_sweep_timing(table, &timing)?;
    Ok(vec![main, timing])
}
