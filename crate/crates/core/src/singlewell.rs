//! Single-well spectra, tail coefficients and the clustering of the union of
//! all single-well levels into shared levels `λ*` with multiplicity patterns.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{assemble_hamiltonian, lowest_eigenpairs, EigenOptions, EigenPair, Grid, Point};
use crate::linalg::{least_squares, symmetric_eigen};
use crate::math;
use crate::perturb::Perturbation;

/// Eigenpairs of `-Δ + 𝓛` with `𝓛` centered at the origin, ascending.
///
/// Inside a degenerate level the basis is fixed by diagonalizing the second
/// moment `x² + 2y² + 3z²`; phases make the largest-amplitude node positive.
/// Tail coefficients are filled in when the default window fits the box.
pub fn solve_limiting(p: &Perturbation, grid: &Grid, k: usize, opts: &EigenOptions) -> Result<Vec<EigenPair>> {
    let h = assemble_hamiltonian(grid, &[(p.clone(), [0.0; 3])])?;
    let report = lowest_eigenpairs(&h, k, opts)?;
    let mut pairs = report.pairs;
    let degenerate = 10.0 * report.residual_tol;
    let mut i = 0;
    while i < pairs.len() {
        let mut j = i + 1;
        while j < pairs.len() && pairs[j].lambda - pairs[j - 1].lambda <= degenerate {
            j += 1;
        }
        if j - i > 1 {
            fix_degenerate_basis(&h, &mut pairs[i..j]);
        }
        i = j;
    }
    for pair in pairs.iter_mut() {
        let kappa = math::sqrt(-pair.lambda);
        let window = default_tail_window(grid, p.support_radius(), kappa);
        if let Some(w) = window {
            if let Ok(fit) = fit_tail_coefficient(pair, grid, w) {
                pair.tail_coefficient = Some(fit.coefficient);
            }
        }
    }
    Ok(pairs)
}

fn fix_degenerate_basis(h: &crate::grid::DiscreteOperator, block: &mut [EigenPair]) {
    let grid = h.grid();
    let m = block.len();
    let probe: Vec<f64> = grid.sample(|x| x[0] * x[0] + 2.0 * x[1] * x[1] + 3.0 * x[2] * x[2]);
    let mut t = vec![0.0; m * m];
    for a in 0..m {
        for b in 0..m {
            t[a * m + b] = block[a]
                .psi
                .iter()
                .zip(&block[b].psi)
                .zip(&probe)
                .map(|((u, v), q)| u * v * q)
                .sum::<f64>()
                * grid.cell_volume();
        }
    }
    let e = symmetric_eigen(&t, m);
    let n = grid.len();
    let mut rotated: Vec<Vec<f64>> = Vec::with_capacity(m);
    for c in &e.vectors {
        let mut v = vec![0.0; n];
        for (a, ca) in c.iter().enumerate() {
            for (vi, pi) in v.iter_mut().zip(&block[a].psi) {
                *vi += ca * pi;
            }
        }
        rotated.push(v);
    }
    let mut hv = vec![0.0; n];
    for (slot, mut v) in block.iter_mut().zip(rotated) {
        fix_phase(&mut v);
        h.apply(&v, &mut hv);
        let lambda = grid.inner(&v, &hv) / grid.inner(&v, &v);
        for (r, x) in hv.iter_mut().zip(&v) {
            *r -= lambda * x;
        }
        slot.residual = grid.norm(&hv) / grid.norm(&v);
        slot.lambda = lambda;
        slot.psi = v;
    }
}

pub(crate) fn fix_phase(v: &mut [f64]) {
    let mut imax = 0;
    for (i, x) in v.iter().enumerate() {
        if math::abs(*x) > math::abs(v[imax]) + 1e-12 * math::abs(v[imax]) {
            imax = i;
        }
    }
    if v[imax] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// `[R + 1/κ, L - 2/κ]` when it is non-empty, shrunk to at most `8/κ` wide so
/// the samples stay well above round-off.
pub fn default_tail_window(grid: &Grid, support_radius: f64, kappa: f64) -> Option<(f64, f64)> {
    let r1 = support_radius + 1.0 / kappa + 2.0 * grid.h();
    let r2 = (grid.half_width() - 2.0 / kappa).min(r1 + 8.0 / kappa);
    (r2 > r1 + 4.0 * grid.h()).then_some((r1, r2))
}

/// Tail law `ψ ≈ C r^{-(n-1)/2} e^{-κr}` fitted on a radial window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailFit {
    /// `C` with both the power and the rate frozen.
    pub coefficient: f64,
    /// Fitted power minus `-(n-1)/2`, rate frozen at `κ`.
    pub power_deviation: f64,
    /// Exponential rate with power and rate both free.
    pub free_rate: f64,
    /// RMS misfit of `log|ψ|` in the frozen fit.
    pub residual: f64,
    /// Direction used for sampling (unit vector), or `None` for the
    /// angular average.
    pub direction: Option<Point>,
}

/// Fit the tail of a single-well eigenfunction centered at the origin.
///
/// In one dimension both half-lines are averaged. In higher dimensions the
/// modulus is averaged over 16 directions unless the angular variation is
/// large (a nodal state), in which case the ray through the largest-amplitude
/// node is used.
pub fn fit_tail_coefficient(pair: &EigenPair, grid: &Grid, window: (f64, f64)) -> Result<TailFit> {
    let (r1, r2) = window;
    if !(r1 > 0.0 && r2 > r1) {
        return Err(Error::TailWindow(format!("empty window [{r1}, {r2}]")));
    }
    if !(pair.lambda < 0.0) {
        return Err(Error::NonNegativeSpectralParameter(pair.lambda));
    }
    let kappa = math::sqrt(-pair.lambda);
    if r2 >= grid.half_width() - 2.0 / kappa {
        return Err(Error::TailWindow(format!(
            "window end {r2} is within 2/kappa of the boundary {}",
            grid.half_width()
        )));
    }
    let dim = grid.dim();
    let samples = 33usize;
    let radii: Vec<f64> = (0..samples)
        .map(|i| r1 + (r2 - r1) * i as f64 / (samples - 1) as f64)
        .collect();
    let directions = sampling_directions(dim);
    let at = |d: &Point, r: f64| -> f64 {
        let p = [d[0] * r, d[1] * r, d[2] * r];
        math::abs(grid.interpolate(&pair.psi, &p).unwrap_or(0.0))
    };
    let mut values: Vec<f64> = radii
        .iter()
        .map(|&r| directions.iter().map(|d| at(d, r)).sum::<f64>() / directions.len() as f64)
        .collect();
    let mut direction = None;
    if dim > 1 {
        let mid = radii[samples / 2];
        let amps: Vec<f64> = directions.iter().map(|d| at(d, mid)).collect();
        let hi = amps.iter().cloned().fold(0.0, f64::max);
        let lo = amps.iter().cloned().fold(f64::INFINITY, f64::min);
        if lo < 0.5 * hi {
            let d = max_amplitude_direction(pair, grid);
            values = radii.iter().map(|&r| at(&d, r)).collect();
            direction = Some(d);
        }
    }
    let peak = values.iter().cloned().fold(0.0, f64::max);
    if values.iter().any(|&v| !(v > 1e-12 * peak) || v < 1e-250) {
        return Err(Error::TailWindow("window contains near-zero samples".into()));
    }
    let power = -(dim as f64 - 1.0) / 2.0;
    let logs: Vec<f64> = values.iter().map(|&v| math::ln(v)).collect();
    // frozen power and rate: log C = mean(log ψ + κr - power log r)
    let shifted: Vec<f64> = radii
        .iter()
        .zip(&logs)
        .map(|(&r, &lv)| lv + kappa * r - power * math::ln(r))
        .collect();
    let log_c = shifted.iter().sum::<f64>() / samples as f64;
    let residual = math::sqrt(shifted.iter().map(|s| (s - log_c) * (s - log_c)).sum::<f64>() / samples as f64);
    // frozen rate, free power
    let design: Vec<f64> = radii.iter().flat_map(|&r| [1.0, math::ln(r)]).collect();
    let y: Vec<f64> = radii.iter().zip(&logs).map(|(&r, &lv)| lv + kappa * r).collect();
    let fit = least_squares(&design, samples, 2, &y)?;
    // everything free
    let design3: Vec<f64> = radii.iter().flat_map(|&r| [1.0, math::ln(r), -r]).collect();
    let fit3 = least_squares(&design3, samples, 3, &logs)?;
    Ok(TailFit {
        coefficient: math::exp(log_c),
        power_deviation: fit.coefficients[1] - power,
        free_rate: fit3.coefficients[2],
        residual,
        direction,
    })
}

fn sampling_directions(dim: usize) -> Vec<Point> {
    match dim {
        1 => vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]],
        2 => (0..16)
            .map(|k| {
                let t = (k as f64 + 0.5) * core::f64::consts::PI / 8.0;
                [math::cos(t), math::sin(t), 0.0]
            })
            .collect(),
        _ => {
            // golden-spiral points on the sphere
            let golden = core::f64::consts::PI * (3.0 - math::sqrt(5.0));
            (0..16)
                .map(|k| {
                    let z = 1.0 - (2.0 * k as f64 + 1.0) / 16.0;
                    let r = math::sqrt(1.0 - z * z);
                    let t = golden * k as f64;
                    [r * math::cos(t), r * math::sin(t), z]
                })
                .collect()
        }
    }
}

fn max_amplitude_direction(pair: &EigenPair, grid: &Grid) -> Point {
    let mut best = 0;
    for (i, v) in pair.psi.iter().enumerate() {
        if math::abs(*v) > math::abs(pair.psi[best]) {
            best = i;
        }
    }
    let p = grid.point(best);
    let r = math::hypot3(&p);
    if r == 0.0 {
        let mut d = [0.0; 3];
        d[0] = 1.0;
        d
    } else {
        [p[0] / r, p[1] / r, p[2] / r]
    }
}

/// One shared level `λ*` and how many states each well contributes.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// Mean of the member eigenvalues (the `pᵢ`-weighted mean of the
    /// per-well means).
    pub lambda_star: f64,
    /// `(p₁, …, p_m)`.
    pub multiplicities: Vec<usize>,
    /// `p = Σ pᵢ`.
    pub total: usize,
    /// `α_j = p₁ + … + p_{j-1}`.
    pub offsets: Vec<usize>,
    /// Indices into each well's eigenpair list.
    pub members: Vec<Vec<usize>>,
    /// Largest pairwise gap inside the cluster.
    pub spread: f64,
}

impl Cluster {
    /// `(well, state)` for block index `i = α_k + q`.
    pub fn block_of(&self, i: usize) -> (usize, usize) {
        for (k, &a) in self.offsets.iter().enumerate().rev() {
            if i >= a && self.multiplicities[k] > i - a {
                return (k, i - a);
            }
        }
        panic!("block index {i} out of range for p = {}", self.total)
    }
}

/// Greedy clustering of per-well eigenvalue lists.
///
/// Levels are merged while they stay within `cluster_tol` of the lowest
/// member; two resulting clusters closer than `3·cluster_tol` are refused.
pub fn cluster_multiplicities(spectra: &[Vec<f64>], cluster_tol: f64) -> Result<Vec<Cluster>> {
    if !(cluster_tol > 0.0) {
        return Err(Error::InvalidGrid("cluster_tol must be positive".into()));
    }
    let m = spectra.len();
    let mut all: Vec<(f64, usize, usize)> = spectra
        .iter()
        .enumerate()
        .flat_map(|(w, l)| l.iter().enumerate().map(move |(q, &v)| (v, w, q)))
        .collect();
    if let Some(bad) = all.iter().find(|e| !(e.0 < 0.0)) {
        return Err(Error::NonNegativeSpectralParameter(bad.0));
    }
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut groups: Vec<Vec<(f64, usize, usize)>> = Vec::new();
    for e in all {
        match groups.last_mut() {
            Some(g) if e.0 - g[0].0 <= cluster_tol => g.push(e),
            _ => groups.push(vec![e]),
        }
    }
    for w in groups.windows(2) {
        let lo = w[0].last().unwrap().0;
        let hi = w[1][0].0;
        if hi - lo < 3.0 * cluster_tol {
            return Err(Error::AmbiguousCluster(lo, hi));
        }
    }
    Ok(groups
        .into_iter()
        .map(|g| {
            let mut multiplicities = vec![0usize; m];
            let mut members = vec![Vec::new(); m];
            for &(_, w, q) in &g {
                multiplicities[w] += 1;
                members[w].push(q);
            }
            let mut offsets = Vec::with_capacity(m);
            let mut acc = 0;
            for &p in &multiplicities {
                offsets.push(acc);
                acc += p;
            }
            Cluster {
                lambda_star: g.iter().map(|e| e.0).sum::<f64>() / g.len() as f64,
                total: acc,
                multiplicities,
                offsets,
                spread: g.last().unwrap().0 - g[0].0,
                members,
            }
        })
        .collect())
}

/// Per-well eigenpairs together with their clustering.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitingSpectrum {
    pub per_well: Vec<Vec<EigenPair>>,
    pub clusters: Vec<Cluster>,
    pub cluster_tol: f64,
}

impl LimitingSpectrum {
    pub fn new(per_well: Vec<Vec<EigenPair>>, cluster_tol: f64) -> Result<Self> {
        let values: Vec<Vec<f64>> = per_well.iter().map(|l| l.iter().map(|p| p.lambda).collect()).collect();
        let clusters = cluster_multiplicities(&values, cluster_tol)?;
        Ok(Self {
            per_well,
            clusters,
            cluster_tol,
        })
    }

    pub fn wells(&self) -> usize {
        self.per_well.len()
    }

    /// The cluster whose `λ*` is closest to `lambda`.
    pub fn nearest_cluster(&self, lambda: f64) -> Option<usize> {
        (0..self.clusters.len()).min_by(|&a, &b| {
            math::abs(self.clusters[a].lambda_star - lambda).total_cmp(&math::abs(self.clusters[b].lambda_star - lambda))
        })
    }

    /// Eigenpair of well `k`, state `q` of cluster `c`.
    pub fn member(&self, c: usize, k: usize, q: usize) -> &EigenPair {
        &self.per_well[k][self.clusters[c].members[k][q]]
    }
}

/// Margin checks for a single-well solve: the support edge must stay
/// `5/κ` away from the boundary for every returned level.
pub fn margin_warnings(p: &Perturbation, grid: &Grid, pairs: &[EigenPair]) -> Vec<String> {
    pairs
        .iter()
        .filter_map(|e| {
            let need = 5.0 / math::sqrt(-e.lambda);
            let margin = grid.half_width() - p.support_radius();
            (margin < need).then(|| format!("level {}: margin {margin:.3} below 5/kappa = {need:.3}", e.lambda))
        })
        .collect()
}
