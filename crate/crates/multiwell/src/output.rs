//! JSON records and CSV tables on disk.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::HarnessError;
use crate::sweep::SweepRecord;

pub const SWEEP_HEADER: [&str; 8] = [
    "l_X",
    "cluster",
    "index",
    "lambda_direct",
    "lambda_pred",
    "deviation",
    "recon_l2_err",
    "coupling_norm",
];

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |e| HarnessError::Io(path.display().to_string(), e)
}

fn csv_err(e: csv::Error) -> HarnessError {
    HarnessError::Output(e.to_string())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io(dir))?;
    }
    let text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::Output(e.to_string()))?;
    let mut f = fs::File::create(path).map_err(io(path))?;
    f.write_all(text.as_bytes()).map_err(io(path))?;
    f.write_all(b"\n").map_err(io(path))
}

fn cell(x: Option<f64>) -> String {
    x.filter(|v| v.is_finite()).map(|v| format!("{v:e}")).unwrap_or_default()
}

/// One line per matched eigenvalue; an invalid row keeps its `l_X` (when
/// known) and leaves every other cell empty.
pub fn sweep_table<W: Write>(rec: &SweepRecord, out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER).map_err(csv_err)?;
    for row in &rec.rows {
        let l = cell(row.l_x);
        match row.record.as_ref().filter(|_| row.valid) {
            Some(run) => {
                for m in &run.matches {
                    w.write_record([
                        l.clone(),
                        m.cluster.to_string(),
                        m.index.to_string(),
                        cell(Some(m.lambda_direct)),
                        cell(m.lambda_pred),
                        cell(m.deviation),
                        cell(m.recon_l2_err),
                        cell(run.coupling_norm(m.cluster)),
                    ])
                    .map_err(csv_err)?;
                }
            }
            None => {
                let mut cells = vec![String::new(); SWEEP_HEADER.len()];
                cells[0] = l;
                w.write_record(&cells).map_err(csv_err)?;
            }
        }
    }
    w.flush().map_err(|e| HarnessError::Output(e.to_string()))
}

/// `log(deviation)` against `l_X` for external plotting.
pub fn plot_table<W: Write>(rec: &SweepRecord, out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["l_X", "cluster", "index", "log_deviation"]).map_err(csv_err)?;
    for (row, run) in rec.valid_rows() {
        let Some(l) = row.l_x else { continue };
        for m in &run.matches {
            if let Some(d) = m.deviation.filter(|&d| d > 0.0) {
                w.write_record([cell(Some(l)), m.cluster.to_string(), m.index.to_string(), cell(Some(d.ln()))])
                    .map_err(csv_err)?;
            }
        }
    }
    w.flush().map_err(|e| HarnessError::Output(e.to_string()))
}

/// `sweep.json`, `sweep.csv` and `sweep_plot.csv` under `dir`.
pub fn write_sweep(dir: &Path, rec: &SweepRecord) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    let json = dir.join("sweep.json");
    write_json(&json, rec)?;
    let table = dir.join("sweep.csv");
    sweep_table(rec, fs::File::create(&table).map_err(io(&table))?)?;
    let plot = dir.join("sweep_plot.csv");
    plot_table(rec, fs::File::create(&plot).map_err(io(&plot))?)?;
    Ok(vec![json, table, plot])
}
