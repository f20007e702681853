//! One scenario end to end: hypotheses, limiting spectra, clustering,
//! predictions, the direct multi-well solve and the matching between them.

use log::{info, warn};
use multiwell_core::asympt::{
    coupling_matrix, leading_predictions, min_separation, reconstruct_eigenfunctions, second_order_shift, CouplingMatrix,
    Prediction,
};
use multiwell_core::grid::{assemble_hamiltonian, lowest_eigenpairs, EigenReport, Grid};
use multiwell_core::perturb::{estimate_form_bound, Perturbation};
use multiwell_core::singlewell::{self, solve_limiting, LimitingSpectrum};
use multiwell_core::Point;
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::scenario::{Scenario, WellSpec};

pub const RUN_SCHEMA: &str = "multiwell.run/1";

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRecord {
    pub dimension: usize,
    pub half_width: f64,
    pub h: f64,
    pub nodes: usize,
}

impl From<&Grid> for GridRecord {
    fn from(g: &Grid) -> Self {
        Self {
            dimension: g.dim(),
            half_width: g.half_width(),
            h: g.h(),
            nodes: g.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub code_version: String,
    pub seed: u64,
    pub single_well_grid: GridRecord,
    pub multi_well_grid: Option<GridRecord>,
    pub eigen_residual_tol: f64,
    pub tol_essential: f64,
    pub cluster_tol: f64,
    pub resolvent_tol: f64,
    pub extension: String,
    pub truncation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisRecord {
    pub well: usize,
    pub kind: String,
    pub symmetry_defect: f64,
    pub c0_estimate: f64,
    pub c1_estimate: f64,
    pub passes: bool,
    /// Point interactions are outside the form-bound hypotheses.
    pub bypassed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub index: usize,
    pub lambda: f64,
    pub residual: f64,
    pub tail_coefficient: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderRecord {
    pub well: usize,
    pub shift: f64,
    pub per_well: Vec<f64>,
    pub prediction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRecord {
    pub lambda_star: f64,
    pub kappa: f64,
    pub multiplicities: Vec<usize>,
    pub total: usize,
    pub spread: f64,
    /// Row-major `p × p`.
    pub coupling: Vec<f64>,
    pub coupling_norm: f64,
    pub coupling_symmetry_defect: f64,
    pub extension_weight: f64,
    pub extended_samples: usize,
    /// Ordered by modulus.
    pub tau: Vec<f64>,
    pub predictions: Vec<f64>,
    pub kappa_vectors: Vec<Vec<f64>>,
    pub kappa_gram_defect: f64,
    pub error_band: f64,
    pub second_order: Option<SecondOrderRecord>,
    pub second_order_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectRecord {
    pub lambdas: Vec<f64>,
    pub residuals: Vec<f64>,
    pub path: String,
    pub negative_count: Option<usize>,
    pub incomplete: bool,
    pub residual_tol: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub cluster: usize,
    /// Position inside the cluster, ascending.
    pub index: usize,
    pub lambda_direct: f64,
    pub lambda_pred: Option<f64>,
    pub deviation: Option<f64>,
    pub lambda_second_order: Option<f64>,
    pub deviation_second_order: Option<f64>,
    pub recon_l2_err: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema: String,
    pub scenario: Scenario,
    pub provenance: Provenance,
    pub l_x: Option<f64>,
    pub hypotheses: Vec<HypothesisRecord>,
    pub hypotheses_failed: Vec<usize>,
    pub limiting: Vec<Vec<LevelRecord>>,
    pub clusters: Vec<ClusterRecord>,
    pub direct: Option<DirectRecord>,
    pub matches: Vec<MatchRecord>,
    /// Direct eigenvalues not attributed to any cluster.
    pub unmatched: Vec<f64>,
    /// Clusters whose matched count differs from `p`.
    pub count_mismatches: Vec<usize>,
    pub warnings: Vec<String>,
}

impl RunRecord {
    pub fn coupling_norm(&self, cluster: usize) -> Option<f64> {
        self.clusters.get(cluster).map(|c| c.coupling_norm)
    }
}

/// Form-bound and symmetry certificates for every well on its own grid.
pub fn validate_hypotheses(s: &Scenario) -> Result<Vec<HypothesisRecord>, HarnessError> {
    let grid = single_grid(s)?;
    let mut out = Vec::new();
    for (i, w) in s.wells.iter().enumerate() {
        let p = w.perturbation(s.dimension)?;
        let rep = estimate_form_bound(&p, &grid, s.solver.hypothesis_trials.max(16), s.seed)?;
        if !rep.passes {
            warn!("well {i}: form bound estimate c0 = {} is not below 1", rep.c0_estimate);
        }
        out.push(HypothesisRecord {
            well: i,
            kind: p.kind_name().into(),
            symmetry_defect: rep.symmetry_defect,
            c0_estimate: rep.c0_estimate,
            c1_estimate: rep.c1_estimate,
            passes: rep.passes && rep.symmetry_defect <= 1e-10,
            bypassed: rep.bypassed,
        });
    }
    Ok(out)
}

pub fn single_grid(s: &Scenario) -> Result<Grid, HarnessError> {
    Ok(Grid::with_budget(
        s.dimension,
        s.single_well_half_width(),
        s.grid.h,
        s.grid.memory_budget_bytes,
    )?)
}

pub fn multi_grid(s: &Scenario) -> Result<Grid, HarnessError> {
    Ok(Grid::with_budget(
        s.dimension,
        s.multi_well_half_width(),
        s.grid.h,
        s.grid.memory_budget_bytes,
    )?)
}

/// Single-well spectra on a shared grid, clustered into `σ*`.
#[derive(Debug, Clone)]
pub struct Limiting {
    pub grid: Grid,
    pub spectrum: LimitingSpectrum,
    pub warnings: Vec<String>,
}

impl Limiting {
    pub fn records(&self) -> Vec<Vec<LevelRecord>> {
        self.spectrum
            .per_well
            .iter()
            .map(|pairs| {
                pairs
                    .iter()
                    .enumerate()
                    .map(|(index, p)| LevelRecord {
                        index,
                        lambda: p.lambda,
                        residual: p.residual,
                        tail_coefficient: p.tail_coefficient,
                    })
                    .collect()
            })
            .collect()
    }
}

pub fn solve_limiting_spectra(s: &Scenario) -> Result<Limiting, HarnessError> {
    let grid = single_grid(s)?;
    let opts = s.eigen_options();
    let mut solved: Vec<(&WellSpec, Vec<multiwell_core::EigenPair>)> = Vec::new();
    let mut per_well = Vec::with_capacity(s.wells.len());
    let mut warnings = Vec::new();
    for (i, w) in s.wells.iter().enumerate() {
        let same = solved
            .iter()
            .find(|(o, _)| o.operator == w.operator && o.support_radius == w.support_radius);
        let pairs = match same {
            Some((_, pairs)) => pairs.clone(),
            None => {
                let p = w.perturbation(s.dimension)?;
                let pairs = solve_limiting(&p, &grid, s.solver.levels, &opts)?;
                info!("well {i}: {} bound states", pairs.len());
                for m in singlewell::margin_warnings(&p, &grid, &pairs) {
                    warnings.push(format!("well {i}: {m}"));
                }
                solved.push((w, pairs.clone()));
                pairs
            }
        };
        per_well.push(pairs);
    }
    let spectrum = LimitingSpectrum::new(per_well, s.solver.cluster_tol)?;
    Ok(Limiting {
        grid,
        spectrum,
        warnings,
    })
}

/// Coupling matrix and predictions of one cluster.
#[derive(Debug, Clone)]
pub struct ClusterPrediction {
    pub coupling: CouplingMatrix,
    pub prediction: Prediction,
    pub record: ClusterRecord,
}

pub fn predict(s: &Scenario, lim: &Limiting) -> Result<Vec<ClusterPrediction>, HarnessError> {
    let wells = s.wells()?;
    let copts = s.coupling_options();
    let mut out = Vec::new();
    for (c, cluster) in lim.spectrum.clusters.iter().enumerate() {
        let a = coupling_matrix(&lim.spectrum, c, &wells, &lim.grid, &copts)?;
        let pred = leading_predictions(&a);
        let (second_order, second_order_error) = if s.solver.second_order {
            match second_order_for(s, lim, c, &wells) {
                Ok(v) => (v, None),
                Err(e) => {
                    warn!("cluster {c}: second-order shift unavailable: {e}");
                    (None, Some(e.to_string()))
                }
            }
        } else {
            (None, None)
        };
        let record = ClusterRecord {
            lambda_star: cluster.lambda_star,
            kappa: (-cluster.lambda_star).sqrt(),
            multiplicities: cluster.multiplicities.clone(),
            total: cluster.total,
            spread: cluster.spread,
            coupling: a.entries.clone(),
            coupling_norm: a.norm(),
            coupling_symmetry_defect: a.symmetry_defect,
            extension_weight: a.extension_weight(),
            extended_samples: a.extended_samples,
            tau: pred.tau.clone(),
            predictions: pred.lambdas.clone(),
            kappa_vectors: pred.kappa_vectors.clone(),
            kappa_gram_defect: pred.kappa_gram_defect,
            error_band: pred.error_band,
            second_order,
            second_order_error,
        };
        out.push(ClusterPrediction {
            coupling: a,
            prediction: pred,
            record,
        });
    }
    Ok(out)
}

/// Second-order shift of a level owned by exactly one well with a single
/// state; `None` for any other pattern.
fn second_order_for(
    s: &Scenario,
    lim: &Limiting,
    c: usize,
    wells: &[(Perturbation, Point)],
) -> Result<Option<SecondOrderRecord>, HarnessError> {
    let cluster = &lim.spectrum.clusters[c];
    if wells.len() < 2 || cluster.total != 1 {
        return Ok(None);
    }
    let owner = cluster.multiplicities.iter().position(|&p| p == 1).expect("p = 1");
    let mut ordered = vec![wells[owner].clone()];
    ordered.extend(wells.iter().enumerate().filter(|(i, _)| *i != owner).map(|(_, w)| w.clone()));
    let psi = lim.spectrum.member(c, owner, 0);
    let shift = second_order_shift(
        cluster.lambda_star,
        &ordered,
        psi,
        &lim.grid,
        &s.coupling_options(),
        &s.resolvent_options(),
    )?;
    // back to scenario order
    let mut per_well = vec![0.0; wells.len()];
    let others: Vec<usize> = (0..wells.len()).filter(|&i| i != owner).collect();
    for (k, &i) in others.iter().enumerate() {
        per_well[i] = shift.per_well[k + 1];
    }
    Ok(Some(SecondOrderRecord {
        well: owner,
        shift: shift.total,
        per_well,
        prediction: cluster.lambda_star + shift.total,
    }))
}

/// Direct solve of the full multi-well operator.
#[derive(Debug, Clone)]
pub struct Direct {
    pub grid: Grid,
    pub report: EigenReport,
    pub warnings: Vec<String>,
}

impl Direct {
    pub fn record(&self) -> DirectRecord {
        DirectRecord {
            lambdas: self.report.pairs.iter().map(|p| p.lambda).collect(),
            residuals: self.report.pairs.iter().map(|p| p.residual).collect(),
            path: format!("{:?}", self.report.path),
            negative_count: self.report.negative_count,
            incomplete: self.report.incomplete,
            residual_tol: self.report.residual_tol,
            warnings: self.warnings.clone(),
        }
    }
}

pub fn direct_solve(s: &Scenario, k: usize, kappa_min: Option<f64>) -> Result<Direct, HarnessError> {
    let grid = multi_grid(s)?;
    let op = assemble_hamiltonian(&grid, &s.wells()?)?;
    let mut warnings: Vec<String> = op.warnings().to_vec();
    if let Some(kappa) = kappa_min {
        warnings.extend(op.margin_warnings(kappa));
    }
    let report = lowest_eigenpairs(&op, k.max(1), &s.eigen_options())?;
    if report.incomplete {
        warnings.push(format!(
            "asked for {} eigenpairs, found {} below the essential threshold",
            report.requested,
            report.pairs.len()
        ));
    }
    Ok(Direct { grid, report, warnings })
}

/// Attribute each direct eigenvalue to the nearest `λ*` within half the gap
/// to the neighbouring clusters and to 0.
fn assign(lambdas: &[f64], stars: &[f64]) -> (Vec<Vec<usize>>, Vec<usize>) {
    let radius: Vec<f64> = (0..stars.len())
        .map(|c| {
            let gap = stars
                .iter()
                .enumerate()
                .filter(|&(o, _)| o != c)
                .map(|(_, s)| (s - stars[c]).abs())
                .fold(f64::INFINITY, f64::min);
            // the essential spectrum at 0 bounds the radius as well
            0.5 * gap.min(stars[c].abs())
        })
        .collect();
    let mut members = vec![Vec::new(); stars.len()];
    let mut unmatched = Vec::new();
    for (i, &l) in lambdas.iter().enumerate() {
        let nearest = (0..stars.len()).min_by(|&a, &b| (stars[a] - l).abs().total_cmp(&(stars[b] - l).abs()));
        match nearest {
            Some(c) if (stars[c] - l).abs() <= radius[c] => members[c].push(i),
            _ => unmatched.push(i),
        }
    }
    (members, unmatched)
}

fn ascending(pred: &Prediction) -> Prediction {
    let mut order: Vec<usize> = (0..pred.lambdas.len()).collect();
    order.sort_by(|&a, &b| pred.lambdas[a].total_cmp(&pred.lambdas[b]));
    Prediction {
        tau: order.iter().map(|&i| pred.tau[i]).collect(),
        lambdas: order.iter().map(|&i| pred.lambdas[i]).collect(),
        kappa_vectors: order.iter().map(|&i| pred.kappa_vectors[i].clone()).collect(),
        ..pred.clone()
    }
}

pub fn run_scenario(s: &Scenario) -> Result<RunRecord, HarnessError> {
    s.validate()?;
    let hypotheses = validate_hypotheses(s)?;
    let hypotheses_failed: Vec<usize> = hypotheses.iter().filter(|h| !h.passes && !h.bypassed).map(|h| h.well).collect();
    let mut warnings = Vec::new();
    if !hypotheses_failed.is_empty() {
        warnings.push(format!("hypothesis validation failed for wells {hypotheses_failed:?}"));
    }
    let lim = solve_limiting_spectra(s)?;
    warnings.extend(lim.warnings.iter().cloned());
    let predictions = predict(s, &lim)?;
    let kappa_min = lim
        .spectrum
        .clusters
        .iter()
        .map(|c| (-c.lambda_star).sqrt())
        .fold(f64::INFINITY, f64::min);
    let total: usize = lim.spectrum.clusters.iter().map(|c| c.total).sum();
    let direct = direct_solve(s, total + 2, finite(kappa_min))?;
    warnings.extend(direct.warnings.iter().cloned());

    let stars: Vec<f64> = lim.spectrum.clusters.iter().map(|c| c.lambda_star).collect();
    let lambdas: Vec<f64> = direct.report.pairs.iter().map(|p| p.lambda).collect();
    let (members, unmatched) = assign(&lambdas, &stars);
    let wells = s.wells()?;
    let copts = s.coupling_options();
    let mut matches = Vec::new();
    let mut count_mismatches = Vec::new();
    for (c, idx) in members.iter().enumerate() {
        let cp = &predictions[c];
        if idx.len() != cp.coupling.p {
            count_mismatches.push(c);
            warnings.push(format!(
                "cluster {c}: {} direct eigenvalues for p = {}",
                idx.len(),
                cp.coupling.p
            ));
        }
        let pred = ascending(&cp.prediction);
        let recon = reconstruct_eigenfunctions(&pred, &lim.spectrum, c, &wells, &lim.grid, &direct.grid, &copts);
        if let Err(e) = &recon {
            warnings.push(format!("cluster {c}: reconstruction failed: {e}"));
        }
        for (index, &i) in idx.iter().enumerate() {
            let lambda_direct = lambdas[i];
            let lambda_pred = pred.lambdas.get(index).copied();
            let second = cp.record.second_order.as_ref().map(|so| so.prediction);
            let recon_l2_err = match (&recon, lambda_pred) {
                (Ok(r), Some(_)) => {
                    let phi = &r.functions[index];
                    let psi = &direct.report.pairs[i].psi;
                    let diff = |sign: f64| {
                        let d: Vec<f64> = phi.iter().zip(psi).map(|(a, b)| a - sign * b).collect();
                        direct.grid.norm(&d)
                    };
                    Some(diff(1.0).min(diff(-1.0)))
                }
                _ => None,
            };
            matches.push(MatchRecord {
                cluster: c,
                index,
                lambda_direct,
                lambda_pred,
                deviation: lambda_pred.map(|p| (lambda_direct - p).abs()),
                lambda_second_order: second,
                deviation_second_order: second.map(|p| (lambda_direct - p).abs()),
                recon_l2_err,
            });
        }
    }
    let unmatched: Vec<f64> = unmatched.into_iter().map(|i| lambdas[i]).collect();

    let eopts = s.eigen_options();
    let provenance = Provenance {
        code_version: env!("CARGO_PKG_VERSION").into(),
        seed: s.seed,
        single_well_grid: (&lim.grid).into(),
        multi_well_grid: Some((&direct.grid).into()),
        eigen_residual_tol: eopts.residual_tol(s.dimension),
        tol_essential: eopts.tol_essential,
        cluster_tol: s.solver.cluster_tol,
        resolvent_tol: s.solver.resolvent_tol,
        extension: format!("{:?}", copts.extension),
        truncation: format!(
            "Dirichlet box [-L, L]^{} with L = max|X_i| + R + {}; bound states decay like exp(-kappa |x|), so a margin of 5/kappa_min = {:.3} keeps truncation below the separation effects",
            s.dimension,
            s.grid.margin,
            5.0 / kappa_min
        ),
    };
    Ok(RunRecord {
        schema: RUN_SCHEMA.into(),
        scenario: s.clone(),
        provenance,
        l_x: finite(min_separation(&wells)),
        hypotheses,
        hypotheses_failed,
        limiting: lim.records(),
        clusters: predictions.into_iter().map(|p| p.record).collect(),
        direct: Some(direct.record()),
        matches,
        unmatched,
        count_mismatches,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assignment_uses_half_gaps() {
        let (m, u) = assign(&[-1.01, -0.99, -0.3, -0.02], &[-1.0, -0.25]);
        assert_eq!(m, vec![vec![0, 1], vec![2]]);
        assert_eq!(u, vec![3]);
        let (m, u) = assign(&[-1.2, -0.4], &[-1.0]);
        assert_eq!(m, vec![vec![0]]);
        assert_eq!(u, vec![1]);
    }
}
