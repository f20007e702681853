//! Leading-order asymptotics of multi-well spectra: the cross-well coupling
//! matrix, its eigenvalues as level shifts, the resolvent-mediated
//! second-order shift of a level owned by one well, and eigenfunction
//! reconstruction from shifted single-well states.
//!
//! Single-well eigenfunctions live on a single-well grid centered at the
//! origin. Evaluating `ψ(· + X_k - X_r)` far from the well needs values beyond
//! the trusted part of that grid; see [`Extension`].

pub mod delta1d;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::greens::green_kernel;
use crate::grid::{assemble_hamiltonian, resolvent_solve, EigenPair, Grid, Point, ResolventOptions};
use crate::linalg::{symmetric_eigen, CsrMatrix};
use crate::math;
use crate::perturb::Perturbation;
use crate::singlewell::LimitingSpectrum;

/// How a single-well function is evaluated outside its trusted box
/// `|x|_∞ ≤ L - 5/κ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Extension {
    /// Continue along the ray from the trusted-box edge with the tail law
    /// `r^{-(n-1)/2} e^{-κr}`.
    #[default]
    TailLaw,
    /// `w(y) = Σ_z Gₙ(|y - z|, λ) g(z) hⁿ` with `g` the source of the
    /// function: `-𝓛ψ` for an eigenfunction, `f - 𝓛u` for a resolvent
    /// solution. Exact in every direction up to discretization error.
    GreenRepresentation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingOptions {
    pub extension: Extension,
    /// The trusted box is `|x|_∞ ≤ L - margin_factor/κ`.
    pub margin_factor: f64,
}

impl Default for CouplingOptions {
    fn default() -> Self {
        Self {
            extension: Extension::TailLaw,
            margin_factor: 5.0,
        }
    }
}

/// A grid function of a single-well problem, evaluable at any point.
struct Sampler<'a> {
    grid: &'a Grid,
    values: &'a [f64],
    kappa: f64,
    lambda: f64,
    trust: f64,
    mode: Extension,
    sources: Vec<(Point, f64)>,
}

impl<'a> Sampler<'a> {
    /// `source` is the grid function `g` with `(-Δ - λ) w = g`; only needed
    /// for the Green extension.
    fn new(grid: &'a Grid, values: &'a [f64], lambda: f64, source: Option<Vec<f64>>, opts: &CouplingOptions) -> Result<Self> {
        if !(lambda < 0.0) {
            return Err(Error::NonNegativeSpectralParameter(lambda));
        }
        let kappa = math::sqrt(-lambda);
        let trust = grid.half_width() - opts.margin_factor / kappa;
        let mut sources = Vec::new();
        if opts.extension == Extension::GreenRepresentation {
            let g = source.ok_or_else(|| Error::Shape("Green extension needs a source".into()))?;
            let w = grid.cell_volume();
            for (i, v) in g.iter().enumerate() {
                if *v != 0.0 {
                    sources.push((grid.point(i), v * w));
                }
            }
        }
        if trust <= 0.0 && opts.extension == Extension::TailLaw {
            return Err(Error::TailWindow(format!(
                "single-well box half-width {} leaves no trusted region at margin {}/kappa",
                grid.half_width(),
                opts.margin_factor
            )));
        }
        Ok(Self {
            grid,
            values,
            kappa,
            lambda,
            trust,
            mode: opts.extension,
            sources,
        })
    }

    fn trusted(&self, y: &Point) -> bool {
        (0..self.grid.dim()).all(|a| math::abs(y[a]) <= self.trust)
    }

    /// Value at `y` and whether the extension was used.
    fn sample(&self, y: &Point) -> (f64, bool) {
        if self.trusted(y) {
            return (self.grid.interpolate(self.values, y).unwrap_or(0.0), false);
        }
        match self.mode {
            Extension::GreenRepresentation => {
                let n = self.grid.dim();
                let mut s = 0.0;
                for (z, g) in &self.sources {
                    let t = math::hypot3(&[y[0] - z[0], y[1] - z[1], y[2] - z[2]]);
                    s += g * green_kernel(n, t, self.lambda).unwrap_or(0.0);
                }
                (s, true)
            }
            Extension::TailLaw => {
                let n = self.grid.dim();
                let r = math::hypot3(y);
                let linf = (0..n).map(|a| math::abs(y[a])).fold(0.0, f64::max);
                let r0 = r * self.trust / linf;
                let y0 = [y[0] * r0 / r, y[1] * r0 / r, y[2] * r0 / r];
                let v0 = self.grid.interpolate(self.values, &y0).unwrap_or(0.0);
                let power = (n as f64 - 1.0) / 2.0;
                (v0 * math::powf(r0 / r, power) * math::exp(-self.kappa * (r - r0)), true)
            }
        }
    }
}

/// Nodes where the perturbation matrix has a nonzero row or column.
fn support_nodes(m: &CsrMatrix) -> Vec<usize> {
    let mut mark = vec![false; m.dim()];
    for i in 0..m.dim() {
        for (j, _) in m.row(i) {
            mark[i] = true;
            mark[j] = true;
        }
    }
    (0..m.dim()).filter(|&i| mark[i]).collect()
}

fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// `𝓛ψ` scaled by `-1`: the source of an eigenfunction.
fn eigen_source(m: &CsrMatrix, psi: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; psi.len()];
    m.apply(psi, &mut g);
    g.iter_mut().for_each(|v| *v = -*v);
    g
}

/// `(𝓛_k [w(· + shift)], φ)` over `Ω_k`, split into the part carried by
/// trusted samples and the part carried by extended ones.
fn pairing(grid: &Grid, lk: &CsrMatrix, nodes: &[usize], w: &Sampler<'_>, shift: &Point, phi: &[f64]) -> (f64, f64, usize) {
    let n = grid.len();
    let mut f_in = vec![0.0; n];
    let mut f_ext = vec![0.0; n];
    let mut extended = 0;
    for &i in nodes {
        let x = grid.point(i);
        let y = [x[0] + shift[0], x[1] + shift[1], x[2] + shift[2]];
        let (v, ext) = w.sample(&y);
        if ext {
            f_ext[i] = v;
            extended += 1;
        } else {
            f_in[i] = v;
        }
    }
    let mut g = vec![0.0; n];
    let mut dot = |f: &[f64]| -> f64 {
        lk.apply(f, &mut g);
        nodes.iter().map(|&i| g[i] * phi[i]).sum::<f64>() * grid.cell_volume()
    };
    let a = dot(&f_in);
    let b = dot(&f_ext);
    (a + b, b, extended)
}

/// The `p × p` real symmetric coupling matrix at one shared level.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    pub lambda_star: f64,
    pub p: usize,
    /// Row-major, symmetrized.
    pub entries: Vec<f64>,
    /// Row-major, before symmetrization.
    pub raw: Vec<f64>,
    /// `max |raw_ij - raw_ji|`.
    pub symmetry_defect: f64,
    /// Row-major share of each raw entry carried by extended samples.
    pub extension_contribution: Vec<f64>,
    pub extended_samples: usize,
    /// Block index `i` ↦ `(well, state)`.
    pub blocks: Vec<(usize, usize)>,
    pub multiplicities: Vec<usize>,
    pub dim: usize,
    /// `l_X`, the smallest center distance.
    pub min_separation: f64,
}

impl CouplingMatrix {
    /// A coupling matrix given directly by its entries (symmetrized).
    pub fn from_entries(lambda_star: f64, entries: &[f64], p: usize, dim: usize, min_separation: f64) -> Result<Self> {
        if entries.len() != p * p {
            return Err(Error::Shape(format!("{} entries for p = {p}", entries.len())));
        }
        let mut sym = vec![0.0; p * p];
        let mut defect = 0.0f64;
        for i in 0..p {
            for j in 0..p {
                sym[i * p + j] = 0.5 * (entries[i * p + j] + entries[j * p + i]);
                defect = defect.max(math::abs(entries[i * p + j] - entries[j * p + i]));
            }
        }
        Ok(Self {
            lambda_star,
            p,
            entries: sym,
            raw: entries.to_vec(),
            symmetry_defect: defect,
            extension_contribution: vec![0.0; p * p],
            extended_samples: 0,
            blocks: (0..p).map(|i| (i, 0)).collect(),
            multiplicities: vec![1; p],
            dim,
            min_separation,
        })
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.p + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.p).map(|i| self.entry(i, i)).sum()
    }

    /// Spectral norm.
    pub fn norm(&self) -> f64 {
        if self.p == 0 {
            return 0.0;
        }
        symmetric_eigen(&self.entries, self.p)
            .values
            .iter()
            .map(|v| math::abs(*v))
            .fold(0.0, f64::max)
    }

    /// Largest extension share relative to the largest entry.
    pub fn extension_weight(&self) -> f64 {
        let top = self.raw.iter().map(|v| math::abs(*v)).fold(0.0, f64::max);
        if top == 0.0 {
            return 0.0;
        }
        self.extension_contribution.iter().map(|v| math::abs(*v)).fold(0.0, f64::max) / top
    }
}

/// Smallest distance between two centers; `+∞` for a single well.
pub fn min_separation(wells: &[(Perturbation, Point)]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..wells.len() {
        for j in i + 1..wells.len() {
            best = best.min(math::hypot3(&sub(&wells[i].1, &wells[j].1)));
        }
    }
    best
}

/// Coupling matrix of cluster `cluster`: entry `(α_k + q, α_r + s)` is
/// `(𝓛_k [ψ_{r,s}(· + X_k - X_r)], ψ_{k,q})` over `Ω_k` for `k ≠ r` and zero
/// inside diagonal blocks. All single-well functions live on `grid`.
pub fn coupling_matrix(
    spec: &LimitingSpectrum,
    cluster: usize,
    wells: &[(Perturbation, Point)],
    grid: &Grid,
    opts: &CouplingOptions,
) -> Result<CouplingMatrix> {
    let c = spec
        .clusters
        .get(cluster)
        .ok_or_else(|| Error::Shape(format!("no cluster {cluster}")))?;
    if wells.len() != spec.wells() {
        return Err(Error::Shape(format!("{} wells, spectrum has {}", wells.len(), spec.wells())));
    }
    for i in 0..wells.len() {
        for j in i + 1..wells.len() {
            if math::hypot3(&sub(&wells[i].1, &wells[j].1)) < wells[i].0.support_radius() + wells[j].0.support_radius() {
                return Err(Error::OverlappingSupports(i, j));
            }
        }
    }
    let p = c.total;
    let blocks: Vec<(usize, usize)> = (0..p).map(|i| c.block_of(i)).collect();
    let mats: Vec<CsrMatrix> = wells
        .iter()
        .map(|(pert, _)| pert.matrix_at_origin(grid))
        .collect::<Result<_>>()?;
    let nodes: Vec<Vec<usize>> = mats.iter().map(support_nodes).collect();
    let mut raw = vec![0.0; p * p];
    let mut ext = vec![0.0; p * p];
    let mut extended = 0;
    for j in 0..p {
        let (r, s) = blocks[j];
        let pr = spec.member(cluster, r, s);
        let source = (opts.extension == Extension::GreenRepresentation).then(|| eigen_source(&mats[r], &pr.psi));
        let sampler = Sampler::new(grid, &pr.psi, pr.lambda, source, opts)?;
        for i in 0..p {
            let (k, q) = blocks[i];
            if k == r {
                continue;
            }
            let pk = spec.member(cluster, k, q);
            let shift = sub(&wells[k].1, &wells[r].1);
            let (v, e, count) = pairing(grid, &mats[k], &nodes[k], &sampler, &shift, &pk.psi);
            raw[i * p + j] = v;
            ext[i * p + j] = e;
            extended += count;
        }
    }
    let mut m = CouplingMatrix::from_entries(c.lambda_star, &raw, p, grid.dim(), min_separation(wells))?;
    m.extension_contribution = ext;
    m.extended_samples = extended;
    m.blocks = blocks;
    m.multiplicities = c.multiplicities.clone();
    Ok(m)
}

/// Leading predictions `λ* + τᵢ` at one level.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub lambda_star: f64,
    /// Ordered by modulus; ties by signed value.
    pub tau: Vec<f64>,
    pub lambdas: Vec<f64>,
    /// Orthonormal eigenvectors of the coupling matrix, matching `tau`.
    pub kappa_vectors: Vec<Vec<f64>>,
    /// `l_X^{2-n} e^{-2 l_X κ*}` with unit constant: a scale, not a bound.
    pub error_band: f64,
    /// `max |KᵀK - E|` of the κ-vectors.
    pub kappa_gram_defect: f64,
}

pub fn leading_predictions(a: &CouplingMatrix) -> Prediction {
    let p = a.p;
    let e = symmetric_eigen(&a.entries, p);
    let scale = e.values.iter().map(|v| math::abs(*v)).fold(0.0, f64::max);
    let tie = 1e-9 * scale;
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| math::abs(e.values[x]).total_cmp(&math::abs(e.values[y])));
    let mut i = 0;
    while i < p {
        let mut j = i + 1;
        while j < p && math::abs(e.values[order[j]]) - math::abs(e.values[order[j - 1]]) <= tie {
            j += 1;
        }
        order[i..j].sort_by(|&x, &y| e.values[x].total_cmp(&e.values[y]));
        i = j;
    }
    let tau: Vec<f64> = order.iter().map(|&k| e.values[k]).collect();
    let kappa_vectors: Vec<Vec<f64>> = order.iter().map(|&k| e.vectors[k].clone()).collect();
    let mut gram_defect = 0.0f64;
    for x in 0..p {
        for y in 0..p {
            let g: f64 = (0..p).map(|t| kappa_vectors[x][t] * kappa_vectors[y][t]).sum();
            gram_defect = gram_defect.max(math::abs(g - if x == y { 1.0 } else { 0.0 }));
        }
    }
    let kappa = math::sqrt(-a.lambda_star);
    let l = a.min_separation;
    let error_band = if l.is_finite() {
        math::powf(l, 2.0 - a.dim as f64) * math::exp(-2.0 * l * kappa)
    } else {
        0.0
    };
    Prediction {
        lambda_star: a.lambda_star,
        lambdas: tau.iter().map(|t| a.lambda_star + t).collect(),
        tau,
        kappa_vectors,
        error_band,
        kappa_gram_defect: gram_defect,
    }
}

/// `(λ* - |A₁₂|, λ* + |A₁₂|)` for a level shared by exactly two wells with
/// one state each.
pub fn two_well_splitting(a: &CouplingMatrix) -> Result<(f64, f64)> {
    let ones = a.multiplicities.iter().filter(|&&m| m == 1).count();
    let others = a.multiplicities.iter().filter(|&&m| m > 1).count();
    if a.p != 2 || ones != 2 || others != 0 {
        return Err(Error::PatternMismatch(format!(
            "two-well splitting needs the pattern (1, 1), got {:?}",
            a.multiplicities
        )));
    }
    let c = math::abs(a.entry(0, 1));
    Ok((a.lambda_star - c, a.lambda_star + c))
}

/// Second-order shift of a simple level of well 0 that no other well shares.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderShift {
    pub total: f64,
    /// Contribution of each well; entry 0 is zero.
    pub per_well: Vec<f64>,
    pub extended_samples: usize,
}

/// `-Σ_{j≥1} (𝓛₀ [u_j(· + X₀ - X_j)], ψ₀)` over `Ω₀`, where
/// `u_j = (𝓗_j - λ*)⁻¹ 𝓛_j [ψ₀(· + X_j - X₀)]` is solved on `grid`.
pub fn second_order_shift(
    lambda_star: f64,
    wells: &[(Perturbation, Point)],
    psi: &EigenPair,
    grid: &Grid,
    coupling: &CouplingOptions,
    resolvent: &ResolventOptions,
) -> Result<SecondOrderShift> {
    if wells.is_empty() {
        return Err(Error::PatternMismatch("no wells".into()));
    }
    let m = wells.len();
    let mut per_well = vec![0.0; m];
    if m == 1 {
        return Ok(SecondOrderShift {
            total: 0.0,
            per_well,
            extended_samples: 0,
        });
    }
    let mats: Vec<CsrMatrix> = wells
        .iter()
        .map(|(p, _)| p.matrix_at_origin(grid))
        .collect::<Result<_>>()?;
    let nodes: Vec<Vec<usize>> = mats.iter().map(support_nodes).collect();
    let source = (coupling.extension == Extension::GreenRepresentation).then(|| eigen_source(&mats[0], &psi.psi));
    let psi_sampler = Sampler::new(grid, &psi.psi, psi.lambda, source, coupling)?;
    let mut extended = 0;
    for j in 1..m {
        // f_j = 𝓛_j [ψ₀(· + X_j - X₀)] on well j's grid
        let shift = sub(&wells[j].1, &wells[0].1);
        let mut shifted = vec![0.0; grid.len()];
        for &i in &nodes[j] {
            let x = grid.point(i);
            let (v, ext) = psi_sampler.sample(&[x[0] + shift[0], x[1] + shift[1], x[2] + shift[2]]);
            shifted[i] = v;
            extended += ext as usize;
        }
        let mut f = vec![0.0; grid.len()];
        mats[j].apply(&shifted, &mut f);
        let hj = assemble_hamiltonian(grid, &[(wells[j].0.clone(), [0.0; 3])])?;
        let u = resolvent_solve(&hj, lambda_star, &f, resolvent)?;
        let source = (coupling.extension == Extension::GreenRepresentation).then(|| {
            let mut lu = vec![0.0; u.len()];
            mats[j].apply(&u, &mut lu);
            f.iter().zip(&lu).map(|(a, b)| a - b).collect::<Vec<f64>>()
        });
        let u_sampler = Sampler::new(grid, &u, lambda_star, source, coupling)?;
        let back = sub(&wells[0].1, &wells[j].1);
        let (v, _, count) = pairing(grid, &mats[0], &nodes[0], &u_sampler, &back, &psi.psi);
        extended += count;
        per_well[j] = -v;
    }
    Ok(SecondOrderShift {
        total: per_well.iter().sum(),
        per_well,
        extended_samples: extended,
    })
}

/// Multi-well eigenfunctions assembled from shifted single-well states.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    /// Grid functions on the target grid, one per prediction index.
    pub functions: Vec<Vec<f64>>,
    /// Row-major `p × p` Gram matrix of `functions`.
    pub gram: Vec<f64>,
    /// Row-major `p × p` Gram matrix of the κ-vectors.
    pub kappa_gram: Vec<f64>,
    /// Largest off-diagonal `|gram_ij|`.
    pub max_off_diagonal: f64,
}

/// `ψᵢ = Σ_j Σ_q κ⁽ⁱ⁾_{α_j+q} ψ_{j,q}(· - X_j)` on `target`.
pub fn reconstruct_eigenfunctions(
    pred: &Prediction,
    spec: &LimitingSpectrum,
    cluster: usize,
    wells: &[(Perturbation, Point)],
    grid: &Grid,
    target: &Grid,
    opts: &CouplingOptions,
) -> Result<Reconstruction> {
    let c = &spec.clusters[cluster];
    let p = c.total;
    if pred.kappa_vectors.len() != p {
        return Err(Error::Shape("prediction does not match the cluster".into()));
    }
    if target.dim() != grid.dim() {
        return Err(Error::Shape("target grid dimension".into()));
    }
    let mats: Vec<Option<CsrMatrix>> = if opts.extension == Extension::GreenRepresentation {
        wells.iter().map(|(w, _)| w.matrix_at_origin(grid).map(Some)).collect::<Result<_>>()?
    } else {
        wells.iter().map(|_| None).collect()
    };
    // shifted single-well states on the target grid, in block order
    let mut shifted: Vec<Vec<f64>> = Vec::with_capacity(p);
    for i in 0..p {
        let (k, q) = c.block_of(i);
        let e = spec.member(cluster, k, q);
        let source = mats[k].as_ref().map(|m| eigen_source(m, &e.psi));
        let s = Sampler::new(grid, &e.psi, e.lambda, source, opts)?;
        let xk = wells[k].1;
        shifted.push(target.sample(|x| s.sample(&sub(x, &xk)).0));
    }
    let functions: Vec<Vec<f64>> = pred
        .kappa_vectors
        .iter()
        .map(|kv| {
            let mut f = vec![0.0; target.len()];
            for (coef, g) in kv.iter().zip(&shifted) {
                for (fi, gi) in f.iter_mut().zip(g) {
                    *fi += coef * gi;
                }
            }
            f
        })
        .collect();
    let mut gram = vec![0.0; p * p];
    let mut kappa_gram = vec![0.0; p * p];
    let mut off = 0.0f64;
    for a in 0..p {
        for b in 0..p {
            gram[a * p + b] = target.inner(&functions[a], &functions[b]);
            kappa_gram[a * p + b] = (0..p).map(|t| pred.kappa_vectors[a][t] * pred.kappa_vectors[b][t]).sum();
            if a != b {
                off = off.max(math::abs(gram[a * p + b]));
            }
        }
    }
    Ok(Reconstruction {
        functions,
        gram,
        kappa_gram,
        max_off_diagonal: off,
    })
}
