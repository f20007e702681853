//! Separation sweeps: the same scenario with every center scaled.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::run::{run_scenario, RunRecord};
use crate::scenario::Scenario;

pub const SWEEP_SCHEMA: &str = "multiwell.sweep/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scale: f64,
    pub l_x: Option<f64>,
    pub valid: bool,
    pub error: Option<String>,
    pub record: Option<RunRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterTrend {
    pub cluster: usize,
    pub kappa: f64,
    /// Rows with `l_X κ* ≥ onset` used for the checks below.
    pub asymptotic_rows: usize,
    pub monotone: bool,
    pub count_stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub schema: String,
    pub scenario: Scenario,
    /// Sorted by `l_X`; rows without a separation come first.
    pub rows: Vec<SweepRow>,
    pub noise_floor: f64,
    pub noise_floor_source: String,
    pub onset: f64,
    pub trends: Vec<ClusterTrend>,
    pub warnings: Vec<String>,
}

impl SweepRecord {
    pub fn valid_rows(&self) -> impl Iterator<Item = (&SweepRow, &RunRecord)> {
        self.rows
            .iter()
            .filter(|r| r.valid)
            .filter_map(|r| r.record.as_ref().map(|rec| (r, rec)))
    }
}

fn run_row(s: &Scenario, scale: f64) -> SweepRow {
    let scaled = s.scaled(scale);
    match run_scenario(&scaled) {
        Ok(rec) => {
            let error = if !rec.count_mismatches.is_empty() {
                Some(format!("cluster count mismatch in clusters {:?}", rec.count_mismatches))
            } else {
                None
            };
            SweepRow {
                scale,
                l_x: rec.l_x,
                valid: error.is_none(),
                error,
                record: Some(rec),
            }
        }
        Err(e) => {
            warn!("scale {scale}: {e}");
            SweepRow {
                scale,
                l_x: None,
                valid: false,
                error: Some(e.to_string()),
                record: None,
            }
        }
    }
}

/// Largest deviation per cluster of one row.
fn max_deviation(rec: &RunRecord, cluster: usize) -> Option<f64> {
    rec.matches
        .iter()
        .filter(|m| m.cluster == cluster)
        .filter_map(|m| m.deviation)
        .reduce(f64::max)
}

/// Runs every scale on up to `workers` threads; rows come back ordered by
/// `l_X` whatever the completion order.
pub fn sweep_separation(s: &Scenario, scales: &[f64], workers: usize) -> Result<SweepRecord, HarnessError> {
    s.validate()?;
    if scales.len() < 4 {
        return Err(HarnessError::Scenario(format!("a sweep needs at least 4 scales, got {}", scales.len())));
    }
    if scales.windows(2).any(|w| w[1] <= w[0]) || scales.iter().any(|&x| !(x > 0.0)) {
        return Err(HarnessError::Scenario("sweep scales must be positive and increasing".into()));
    }
    let next = AtomicUsize::new(0);
    let rows = Mutex::new(Vec::with_capacity(scales.len()));
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, scales.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&scale) = scales.get(i) else { break };
                info!("sweep row {i}: scale {scale}");
                let row = run_row(s, scale);
                rows.lock().expect("sweep rows").push((i, row));
            });
        }
    });
    let mut rows = rows.into_inner().expect("sweep rows");
    rows.sort_by_key(|(i, _)| *i);
    let mut rows: Vec<SweepRow> = rows.into_iter().map(|(_, r)| r).collect();
    rows.sort_by(|a, b| {
        let key = |r: &SweepRow| r.l_x.unwrap_or(f64::NEG_INFINITY);
        key(a).total_cmp(&key(b)).then(a.scale.total_cmp(&b.scale))
    });

    let mut warnings = Vec::new();
    let (noise_floor, noise_floor_source) = noise_floor(s, &rows)?;
    let trends = trends(s, &rows);
    for t in &trends {
        if !t.monotone {
            warnings.push(format!("cluster {}: deviations increase after the onset", t.cluster));
        }
        if !t.count_stable {
            warnings.push(format!("cluster {}: eigenvalue count changes after the onset", t.cluster));
        }
    }
    Ok(SweepRecord {
        schema: SWEEP_SCHEMA.into(),
        scenario: s.clone(),
        rows,
        noise_floor,
        noise_floor_source,
        onset: s.sweep.onset,
        trends,
        warnings,
    })
}

/// The eigen residual tolerance, raised to the change of the deviations of
/// the widest valid row under one halving of `h`.
fn noise_floor(s: &Scenario, rows: &[SweepRow]) -> Result<(f64, String), HarnessError> {
    if let Some(f) = s.sweep.noise_floor {
        return Ok((f, "configured".into()));
    }
    let Some((row, rec)) = rows
        .iter()
        .rev()
        .filter(|r| r.valid)
        .find_map(|r| r.record.as_ref().map(|rec| (r, rec)))
    else {
        return Ok((f64::INFINITY, "no valid row".into()));
    };
    let tol = rec.provenance.eigen_residual_tol;
    let mut fine = s.scaled(row.scale);
    fine.grid.h *= 0.5;
    // keep the same physical boxes
    fine.grid.single_well_half_width = Some(rec.provenance.single_well_grid.half_width);
    let fine = match run_scenario(&fine) {
        Ok(f) => f,
        Err(e) => {
            warn!("noise floor refinement failed: {e}");
            return Ok((f64::INFINITY, format!("refinement at h/2 failed: {e}")));
        }
    };
    let mut change: f64 = 0.0;
    for m in &rec.matches {
        let other = fine.matches.iter().find(|f| f.cluster == m.cluster && f.index == m.index);
        match (m.deviation, other.and_then(|f| f.deviation)) {
            (Some(a), Some(b)) => change = change.max((a - b).abs()),
            _ => return Ok((f64::INFINITY, "refined row does not match the coarse row".into())),
        }
    }
    Ok((
        tol.max(change),
        format!("deviation change under h -> h/2 at scale {}", row.scale),
    ))
}

fn trends(s: &Scenario, rows: &[SweepRow]) -> Vec<ClusterTrend> {
    let Some(first) = rows.iter().find_map(|r| r.record.as_ref().filter(|_| r.valid)) else {
        return Vec::new();
    };
    first
        .clusters
        .iter()
        .enumerate()
        .map(|(c, cl)| {
            let asymptotic: Vec<&RunRecord> = rows
                .iter()
                .filter(|r| r.valid && r.l_x.is_some_and(|l| l * cl.kappa >= s.sweep.onset))
                .filter_map(|r| r.record.as_ref())
                .collect();
            let devs: Vec<f64> = asymptotic.iter().filter_map(|r| max_deviation(r, c)).collect();
            let counts: Vec<usize> = asymptotic
                .iter()
                .map(|r| r.matches.iter().filter(|m| m.cluster == c).count())
                .collect();
            ClusterTrend {
                cluster: c,
                kappa: cl.kappa,
                asymptotic_rows: asymptotic.len(),
                monotone: devs.windows(2).all(|w| w[1] <= w[0]),
                count_stable: counts.windows(2).all(|w| w[0] == w[1]),
            }
        })
        .collect()
}
