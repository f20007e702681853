//! Decay-rate fits over the columns of a sweep.

use std::str::FromStr;

use multiwell_core::rates::{fit_rate, RateFit};
use multiwell_core::Error as CoreError;
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::sweep::SweepRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Column {
    Deviation,
    SecondOrderDeviation,
    CouplingNorm,
    ReconL2Err,
}

impl Column {
    /// Eigenvalue columns are compared against the noise floor.
    pub fn is_eigenvalue(self) -> bool {
        matches!(self, Column::Deviation | Column::SecondOrderDeviation)
    }
}

impl FromStr for Column {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "deviation" => Column::Deviation,
            "second_order_deviation" => Column::SecondOrderDeviation,
            "coupling_norm" => Column::CouplingNorm,
            "recon_l2_err" => Column::ReconL2Err,
            _ => return Err(HarnessError::Scenario(format!("unknown column {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub column: Column,
    pub cluster: usize,
    pub alpha: f64,
    pub beta: f64,
    pub constant: f64,
    pub alpha_half_width: f64,
    pub beta_half_width: f64,
    pub residual: f64,
    pub l: Vec<f64>,
    pub values: Vec<f64>,
    /// Separations left out for sitting within 10× the noise floor.
    pub dropped: Vec<f64>,
}

/// `(l_X, value)` per valid row, the value being the largest over the
/// cluster's members.
pub fn column_values(rec: &SweepRecord, cluster: usize, column: Column) -> Vec<(f64, f64)> {
    rec.valid_rows()
        .filter_map(|(row, run)| {
            let l = row.l_x?;
            let v = match column {
                Column::CouplingNorm => run.coupling_norm(cluster)?,
                _ => run
                    .matches
                    .iter()
                    .filter(|m| m.cluster == cluster)
                    .filter_map(|m| match column {
                        Column::Deviation => m.deviation,
                        Column::SecondOrderDeviation => m.deviation_second_order,
                        _ => m.recon_l2_err,
                    })
                    .reduce(f64::max)?,
            };
            Some((l, v))
        })
        .collect()
}

pub fn fit_decay_rate(rec: &SweepRecord, cluster: usize, column: Column) -> Result<FitRecord, HarnessError> {
    let rows = column_values(rec, cluster, column);
    let threshold = if column.is_eigenvalue() { 10.0 * rec.noise_floor } else { 0.0 };
    let (kept, dropped): (Vec<_>, Vec<_>) = rows.into_iter().partition(|&(_, v)| v > threshold);
    if kept.len() < 4 {
        return Err(CoreError::FitRefused(format!(
            "{} rows above {threshold:e} (10x the noise floor), need at least 4",
            kept.len()
        ))
        .into());
    }
    let l: Vec<f64> = kept.iter().map(|r| r.0).collect();
    let values: Vec<f64> = kept.iter().map(|r| r.1).collect();
    let RateFit {
        alpha,
        beta,
        constant,
        alpha_half_width,
        beta_half_width,
        residual,
        ..
    } = fit_rate(&l, &values)?;
    Ok(FitRecord {
        column,
        cluster,
        alpha,
        beta,
        constant,
        alpha_half_width,
        beta_half_width,
        residual,
        l,
        values,
        dropped: dropped.into_iter().map(|r| r.0).collect(),
    })
}
