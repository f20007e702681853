use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::DiscreteOperator;
use crate::error::{Error, Result};
use crate::linalg::{axpy, conjugate_gradient, dot, norm, scale, symmetric_eigen, BandLdlt, CsrMatrix};
use crate::math;

/// A negative eigenvalue with its grid-normalized eigenfunction.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub lambda: f64,
    /// `Σ ψ² hⁿ = 1`; the phase makes the largest-amplitude node positive.
    pub psi: Vec<f64>,
    /// `‖Hψ - λψ‖` in the grid norm.
    pub residual: f64,
    /// Fitted `C` of the tail law, once extracted.
    pub tail_coefficient: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverPath {
    /// Sturm-count bisection on banded `LDLᵀ`, then inverse iteration.
    InertiaBisection,
    /// Shift-invert block Lanczos with banded `LDLᵀ` inner solves.
    ShiftInvertBanded,
    /// Shift-invert block Lanczos with preconditioned CG inner solves.
    ShiftInvertCg,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    /// Residual tolerance; defaults to 1e-9 in 1D and 1e-7 otherwise.
    pub tol: Option<f64>,
    /// Eigenvalues above `-tol_essential` are treated as continuum.
    pub tol_essential: f64,
    /// Largest banded factor allowed, in bytes.
    pub band_budget: u64,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tol: None,
            tol_essential: 1e-6,
            band_budget: 1 << 30,
            max_restarts: 40,
            seed: 0x00C0_FFEE,
        }
    }
}

impl EigenOptions {
    pub fn residual_tol(&self, dim: usize) -> f64 {
        self.tol.unwrap_or(if dim == 1 { 1e-9 } else { 1e-7 })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenReport {
    pub pairs: Vec<EigenPair>,
    pub requested: usize,
    /// Exact number of eigenvalues below `-tol_essential`, when inertia is
    /// available.
    pub negative_count: Option<usize>,
    /// Fewer than `requested` negative eigenvalues exist.
    pub incomplete: bool,
    pub path: SolverPath,
    pub shift: f64,
    /// Residual actually enforced: the requested tolerance, raised to a
    /// small multiple of `ε‖H‖` when rounding makes it unreachable.
    pub residual_tol: f64,
    pub iterations: usize,
}

/// Bisection pays one factorization per step, so it is reserved for cheap
/// factorizations.
const BISECTION_WORK: f64 = 5e6;
const BANDED_WORK: f64 = 3e11;

pub(crate) fn banded_feasible(a: &CsrMatrix, budget: u64) -> bool {
    let (n, bw) = (a.dim(), a.bandwidth());
    BandLdlt::storage_bytes(n, bw) <= budget && n as f64 * math::powi(bw as f64 + 1.0, 2) <= BANDED_WORK
}

fn infinity_norm(a: &CsrMatrix) -> f64 {
    (0..a.dim())
        .map(|i| a.row(i).map(|(_, v)| math::abs(v)).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Up to `k` lowest eigenpairs with eigenvalue below `-tol_essential`.
pub fn lowest_eigenpairs(h: &DiscreteOperator, k: usize, opts: &EigenOptions) -> Result<EigenReport> {
    if k == 0 {
        return Err(Error::Shape("k must be at least 1".into()));
    }
    let a = h.matrix();
    let n = a.dim();
    let dim = h.grid().dim();
    let floor = 64.0 * f64::EPSILON * infinity_norm(a);
    let tol = opts.residual_tol(dim).max(floor);
    let bw = a.bandwidth();
    let work = n as f64 * math::powi(bw as f64 + 1.0, 2);
    let band_ok = BandLdlt::storage_bytes(n, bw) <= opts.band_budget;
    let mut report = if band_ok && work <= BISECTION_WORK {
        bisection(a, k, opts, tol)?
    } else {
        let mut inner = if band_ok && work <= BANDED_WORK {
            Inner::Band(None)
        } else {
            Inner::Cg(a.diagonal())
        };
        shift_invert(a, k, opts, tol, dim, &mut inner)?
    };
    finish(h, &mut report.pairs, tol);
    report.incomplete = report.pairs.len() < k;
    Ok(report)
}

fn count_below(a: &CsrMatrix, x: f64) -> Result<usize> {
    Ok(BandLdlt::factor(a, x)?.negative_count())
}

fn bisection(a: &CsrMatrix, k: usize, opts: &EigenOptions, tol: f64) -> Result<EigenReport> {
    let n = a.dim();
    let top = -opts.tol_essential;
    let n_neg = count_below(a, top)?;
    let k_eff = k.min(n_neg);
    let mut lo0 = a.gershgorin_lower() - 1.0;
    while count_below(a, lo0)? > 0 {
        lo0 = 2.0 * lo0 - 1.0;
    }
    let mut lambdas = Vec::with_capacity(k_eff);
    let mut iterations = 0;
    let mut start = lo0;
    for j in 0..k_eff {
        let (mut lo, mut hi) = (start, top);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 2.0 * f64::EPSILON * math::abs(lo).max(math::abs(hi)) {
                break;
            }
            iterations += 1;
            if count_below(a, mid)? > j {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lambdas.push(0.5 * (lo + hi));
        start = lo;
    }
    // inverse iteration per cluster of numerically coincident values
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut pairs: Vec<EigenPair> = Vec::with_capacity(k_eff);
    let mut found: Vec<Vec<f64>> = Vec::new();
    let mut j = 0;
    while j < k_eff {
        let mut end = j + 1;
        while end < k_eff && lambdas[end] - lambdas[end - 1] <= 1e-9 * math::abs(lambdas[end]).max(1.0) {
            end += 1;
        }
        let c = end - j;
        let shift = lambdas[j..end].iter().sum::<f64>() / c as f64;
        let f = BandLdlt::factor(a, shift)?;
        let mut block: Vec<Vec<f64>> = (0..c).map(|_| random_vector(&mut rng, n)).collect();
        let mut best = f64::INFINITY;
        let mut ritz = Vec::new();
        for _ in 0..30 {
            iterations += 1;
            for v in block.iter_mut() {
                f.solve(v);
            }
            orthonormalize_block(&mut block, &found);
            ritz = rayleigh_ritz(a, &block);
            best = ritz.iter().map(|r| r.2).fold(0.0, f64::max);
            if best <= tol {
                break;
            }
            block = ritz.iter().map(|r| r.1.clone()).collect();
        }
        if best > tol {
            return Err(Error::NonConvergence {
                what: format!("inverse iteration near {shift}"),
                residual: best,
            });
        }
        for (lambda, psi, residual) in ritz {
            found.push(psi.clone());
            pairs.push(EigenPair {
                lambda,
                psi,
                residual,
                tail_coefficient: None,
            });
        }
        j = end;
    }
    Ok(EigenReport {
        pairs,
        requested: k,
        negative_count: Some(n_neg),
        incomplete: false,
        path: SolverPath::InertiaBisection,
        shift: lo0,
        residual_tol: tol,
        iterations,
    })
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>() - 0.5).collect()
}

/// Classical Gram-Schmidt twice against `basis`, then normalize. Returns the
/// norm before normalization relative to the input norm.
fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) -> f64 {
    let before = norm(v);
    if before == 0.0 {
        return 0.0;
    }
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, v);
            axpy(-c, q, v);
        }
    }
    let after = norm(v);
    if after > 0.0 {
        scale(1.0 / after, v);
    }
    after / before
}

fn orthonormalize_block(block: &mut Vec<Vec<f64>>, against: &[Vec<f64>]) {
    let mut done: Vec<Vec<f64>> = Vec::with_capacity(block.len());
    for mut v in block.drain(..) {
        orthogonalize(&mut v, against);
        orthogonalize(&mut v, &done);
        done.push(v);
    }
    *block = done;
}

/// Ritz triples `(θ, y, ‖Hy - θy‖)` of an orthonormal block, ascending.
fn rayleigh_ritz(a: &CsrMatrix, block: &[Vec<f64>]) -> Vec<(f64, Vec<f64>, f64)> {
    let m = block.len();
    let n = a.dim();
    let hb: Vec<Vec<f64>> = block
        .iter()
        .map(|v| {
            let mut out = vec![0.0; n];
            a.apply(v, &mut out);
            out
        })
        .collect();
    let mut t = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            t[i * m + j] = dot(&block[i], &hb[j]);
        }
    }
    let e = symmetric_eigen(&t, m);
    (0..m)
        .map(|k| {
            let c = &e.vectors[k];
            let mut y = vec![0.0; n];
            let mut hy = vec![0.0; n];
            for i in 0..m {
                axpy(c[i], &block[i], &mut y);
                axpy(c[i], &hb[i], &mut hy);
            }
            let ny = norm(&y);
            axpy(-e.values[k], &y, &mut hy);
            (e.values[k], y, norm(&hy) / ny)
        })
        .collect()
}

enum Inner {
    Band(Option<BandLdlt>),
    Cg(Vec<f64>),
}

impl Inner {
    fn prepare(&mut self, a: &CsrMatrix, sigma: f64) -> Result<()> {
        if let Inner::Band(slot) = self {
            let f = BandLdlt::factor(a, sigma)?;
            if f.negative_count() > 0 {
                *slot = None;
                return Err(Error::Indefinite(sigma));
            }
            *slot = Some(f);
        }
        Ok(())
    }

    fn solve(&self, a: &CsrMatrix, sigma: f64, x: &mut [f64]) -> Result<()> {
        match self {
            Inner::Band(f) => {
                f.as_ref().expect("factor prepared").solve(x);
                Ok(())
            }
            Inner::Cg(diag) => {
                let d: Vec<f64> = diag.iter().map(|v| v - sigma).collect();
                let b = x.to_vec();
                x.iter_mut().for_each(|v| *v = 0.0);
                let apply = |u: &[f64], y: &mut [f64]| {
                    a.apply(u, y);
                    axpy(-sigma, u, y);
                };
                conjugate_gradient(apply, &d, &b, x, 1e-12, 20 * a.dim().max(500), sigma)?;
                Ok(())
            }
        }
    }

    fn path(&self) -> SolverPath {
        match self {
            Inner::Band(_) => SolverPath::ShiftInvertBanded,
            Inner::Cg(_) => SolverPath::ShiftInvertCg,
        }
    }
}

/// Lowest Ritz value of a plain Lanczos run on `a` (an upper bound on the
/// bottom of the spectrum).
fn rayleigh_probe(a: &CsrMatrix, steps: usize, rng: &mut ChaCha8Rng) -> f64 {
    let n = a.dim();
    let m = steps.min(n);
    let mut q = random_vector(rng, n);
    let nq = norm(&q);
    scale(1.0 / nq, &mut q);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut alpha = Vec::with_capacity(m);
    let mut beta: Vec<f64> = Vec::with_capacity(m);
    let mut w = vec![0.0; n];
    for _ in 0..m {
        a.apply(&q, &mut w);
        alpha.push(dot(&q, &w));
        basis.push(q.clone());
        let mut next = w.clone();
        let rel = orthogonalize(&mut next, &basis);
        let b = rel * norm(&w);
        if !(b > 1e-12 * math::abs(alpha[alpha.len() - 1]).max(1.0)) {
            break;
        }
        beta.push(b);
        q = next;
    }
    let k = alpha.len();
    let mut t = vec![0.0; k * k];
    for i in 0..k {
        t[i * k + i] = alpha[i];
        if i + 1 < k {
            t[i * k + i + 1] = beta[i];
            t[(i + 1) * k + i] = beta[i];
        }
    }
    symmetric_eigen(&t, k).values[0]
}

struct Krylov {
    q: Vec<Vec<f64>>,
    hq: Vec<Vec<f64>>,
    t: Vec<Vec<f64>>,
}

impl Krylov {
    fn push(&mut self, a: &CsrMatrix, v: Vec<f64>) {
        let mut hv = vec![0.0; v.len()];
        a.apply(&v, &mut hv);
        let p = self.q.len();
        let mut col = Vec::with_capacity(p + 1);
        for i in 0..p {
            let s = 0.5 * (dot(&self.q[i], &hv) + dot(&v, &self.hq[i]));
            self.t[i].push(s);
            col.push(s);
        }
        col.push(dot(&v, &hv));
        self.t.push(col);
        self.q.push(v);
        self.hq.push(hv);
    }

    fn ritz(&self) -> crate::linalg::SymmetricEigen {
        let m = self.q.len();
        let mut flat = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                flat[i * m + j] = self.t[i][j];
            }
        }
        symmetric_eigen(&flat, m)
    }

    fn combine(&self, c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.q[0].len();
        let mut y = vec![0.0; n];
        let mut hy = vec![0.0; n];
        for (i, ci) in c.iter().enumerate() {
            axpy(*ci, &self.q[i], &mut y);
            axpy(*ci, &self.hq[i], &mut hy);
        }
        (y, hy)
    }
}

fn shift_invert(
    a: &CsrMatrix,
    k: usize,
    opts: &EigenOptions,
    tol: f64,
    dim: usize,
    inner: &mut Inner,
) -> Result<EigenReport> {
    let n = a.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let theta = rayleigh_probe(a, 80, &mut rng);
    let gersh = a.gershgorin_lower();
    let mut sigma = if theta < 0.0 { 1.25 * theta } else { -1.0 };
    let g_floor = gersh - 1e-3 * math::abs(gersh) - 1e-3;
    if sigma < g_floor {
        sigma = g_floor;
    }
    let mut iterations = 0;
    for _attempt in 0..12 {
        match inner.prepare(a, sigma) {
            Ok(()) => {}
            Err(Error::Indefinite(_)) => {
                sigma = 1.5 * sigma - 0.5;
                continue;
            }
            Err(e) => return Err(e),
        }
        match lanczos_run(a, k, opts, tol, dim, inner, sigma, &mut rng, &mut iterations) {
            Ok(pairs) => {
                // a Ritz value below the shift means the shift was not below
                // the spectrum; move it and start again
                if let Some(low) = pairs.first().map(|p| p.lambda).filter(|&l| l < sigma) {
                    sigma = 1.25 * low - 1e-3;
                    continue;
                }
                return Ok(EigenReport {
                    pairs,
                    requested: k,
                    negative_count: None,
                    incomplete: false,
                    path: inner.path(),
                    shift: sigma,
                    residual_tol: tol,
                    iterations,
                });
            }
            Err(Error::Indefinite(_)) => {
                sigma = 1.5 * sigma - 0.5;
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::NonConvergence {
        what: format!("no shift below the spectrum found (last {sigma}), n = {n}"),
        residual: f64::NAN,
    })
}

#[allow(clippy::too_many_arguments)]
fn lanczos_run(
    a: &CsrMatrix,
    k: usize,
    opts: &EigenOptions,
    tol: f64,
    dim: usize,
    inner: &Inner,
    sigma: f64,
    rng: &mut ChaCha8Rng,
    iterations: &mut usize,
) -> Result<Vec<EigenPair>> {
    let n = a.dim();
    let b = dim.max(2).min(n);
    let max_basis = (6 * k + 40).max(60).min(n);
    let min_basis = (2 * k + 2 * b + 10).min(n);
    let keep = (k + 2 * b + 4).min(max_basis.saturating_sub(b));
    let top = -opts.tol_essential;
    let mut kr = Krylov {
        q: Vec::new(),
        hq: Vec::new(),
        t: Vec::new(),
    };
    let mut frontier: Vec<Vec<f64>> = Vec::new();
    for _ in 0..b {
        let mut v = random_vector(rng, n);
        orthogonalize(&mut v, &kr.q);
        kr.push(a, v.clone());
        frontier.push(v);
    }
    let mut restarts = 0;
    let mut last_wanted = usize::MAX;
    let mut best = f64::INFINITY;
    loop {
        // expand
        let mut fresh = Vec::with_capacity(frontier.len());
        for f in &frontier {
            let mut w = f.clone();
            inner.solve(a, sigma, &mut w)?;
            *iterations += 1;
            fresh.push(w);
        }
        frontier.clear();
        for mut w in fresh {
            if orthogonalize(&mut w, &kr.q) > 1e-10 {
                kr.push(a, w.clone());
                frontier.push(w);
            }
        }
        let exhausted = frontier.is_empty() || kr.q.len() >= n;
        if kr.q.len() < min_basis && !exhausted {
            continue;
        }
        let e = kr.ritz();
        let wanted: Vec<usize> = (0..e.values.len()).filter(|&i| e.values[i] < top).take(k).collect();
        let mut worst = 0.0f64;
        let mut res = Vec::with_capacity(wanted.len());
        for &i in &wanted {
            let (y, mut hy) = kr.combine(&e.vectors[i]);
            axpy(-e.values[i], &y, &mut hy);
            let r = norm(&hy) / norm(&y);
            worst = worst.max(r);
            res.push((i, r, y));
        }
        best = best.min(worst);
        let stable = wanted.len() == last_wanted;
        last_wanted = wanted.len();
        if worst <= tol && (stable || exhausted) {
            return Ok(res
                .into_iter()
                .map(|(i, r, y)| EigenPair {
                    lambda: e.values[i],
                    psi: y,
                    residual: r,
                    tail_coefficient: None,
                })
                .collect());
        }
        if exhausted && frontier.is_empty() {
            // invariant subspace without convergence: inject a new direction
            let mut v = random_vector(rng, n);
            if orthogonalize(&mut v, &kr.q) > 1e-10 && kr.q.len() < n {
                kr.push(a, v.clone());
                frontier.push(v);
                continue;
            }
            break;
        }
        if kr.q.len() + b > max_basis {
            restarts += 1;
            if restarts > opts.max_restarts {
                break;
            }
            let m = e.values.len();
            let kept: Vec<usize> = (0..m.min(keep)).collect();
            let mut next = Krylov {
                q: Vec::new(),
                hq: Vec::new(),
                t: Vec::new(),
            };
            for &i in &kept {
                let (y, hy) = kr.combine(&e.vectors[i]);
                for (j, row) in next.t.iter_mut().enumerate() {
                    let s = 0.5 * (dot(&next.q[j], &hy) + dot(&y, &next.hq[j]));
                    row.push(s);
                }
                let mut col: Vec<f64> = next.t.iter().map(|row| row[row.len() - 1]).collect();
                col.push(dot(&y, &hy));
                next.t.push(col);
                next.q.push(y);
                next.hq.push(hy);
            }
            // continue from the least converged wanted vectors
            let mut order: Vec<(usize, f64)> = res.iter().map(|(i, r, _)| (*i, *r)).collect();
            order.sort_by(|x, y| y.1.total_cmp(&x.1));
            frontier = order
                .iter()
                .filter(|(i, _)| *i < next.q.len())
                .take(b)
                .map(|(i, _)| next.q[*i].clone())
                .collect();
            let mut fill = 0;
            while frontier.len() < b && fill < next.q.len() {
                if !order.iter().any(|(i, _)| *i == fill) {
                    frontier.push(next.q[fill].clone());
                }
                fill += 1;
            }
            kr = next;
        }
    }
    Err(Error::NonConvergence {
        what: format!("shift-invert Lanczos at shift {sigma}"),
        residual: best,
    })
}

/// Normalize, fix phases and order: ascending, near-ties even before odd.
fn finish(h: &DiscreteOperator, pairs: &mut [EigenPair], tol: f64) {
    let grid = h.grid();
    for p in pairs.iter_mut() {
        let nrm = grid.norm(&p.psi);
        scale(1.0 / nrm, &mut p.psi);
        let mut imax = 0;
        for (i, v) in p.psi.iter().enumerate() {
            if math::abs(*v) > math::abs(p.psi[imax]) + 1e-12 * math::abs(p.psi[imax]) {
                imax = i;
            }
        }
        if p.psi[imax] < 0.0 {
            scale(-1.0, &mut p.psi);
        }
        // residual was relative to ‖ψ‖, which is the grid norm after scaling
    }
    pairs.sort_by(|x, y| x.lambda.total_cmp(&y.lambda));
    let mut i = 0;
    while i < pairs.len() {
        let mut j = i + 1;
        while j < pairs.len() && pairs[j].lambda - pairs[j - 1].lambda <= tol {
            j += 1;
        }
        if j - i > 1 {
            let mut scored: Vec<(f64, EigenPair)> =
                pairs[i..j].iter().map(|p| (parity_score(grid, &p.psi), p.clone())).collect();
            scored.sort_by(|x, y| y.0.total_cmp(&x.0));
            for (slot, (_, p)) in pairs[i..j].iter_mut().zip(scored) {
                *slot = p;
            }
        }
        i = j;
    }
}

/// `⟨ψ, Pψ⟩ / ⟨ψ, ψ⟩` with `P` the reflection through the box center.
pub fn parity_score(grid: &super::Grid, psi: &[f64]) -> f64 {
    let m = grid.nodes_per_axis();
    let mut s = 0.0;
    for (idx, v) in psi.iter().enumerate() {
        let mut mi = grid.multi_index(idx);
        for c in mi.iter_mut().take(grid.dim()) {
            *c = m - 1 - *c;
        }
        s += v * psi[grid.linear_index(&mi)];
    }
    s / dot(psi, psi)
}
