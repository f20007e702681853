use alloc::vec;
use alloc::vec::Vec;

use super::eigen::banded_feasible;
use super::{lowest_eigenpairs, DiscreteOperator, EigenOptions};
use crate::error::{Error, Result};
use crate::linalg::{axpy, conjugate_gradient, dot, norm, BandLdlt};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolventOptions {
    /// Relative residual `‖(H - λ)u - f‖ / ‖f‖`.
    pub tol: f64,
    /// Refuse when `λ` is within `gap_factor · tol` of the spectrum.
    pub gap_factor: f64,
    pub band_budget: u64,
    /// Eigenpairs computed for the spectrum gate on the iterative path.
    pub spectrum_probe: usize,
}

impl Default for ResolventOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            gap_factor: 10.0,
            band_budget: 1 << 30,
            spectrum_probe: 16,
        }
    }
}

/// Solve `(H - λ)u = f` for `λ < 0` away from the spectrum of `H`.
///
/// On the banded path the spectrum gate is exact (inertia counts on both
/// sides of `λ`); otherwise it uses computed eigenvalues, which are also
/// deflated so that CG only sees the positive part of `H - λ`.
pub fn resolvent_solve(h: &DiscreteOperator, lambda: f64, f: &[f64], opts: &ResolventOptions) -> Result<Vec<f64>> {
    let a = h.matrix();
    let n = a.dim();
    if f.len() != n {
        return Err(Error::Shape("right-hand side length".into()));
    }
    let gap = opts.gap_factor * opts.tol;
    if lambda >= -gap {
        if lambda >= 0.0 {
            return Err(Error::NonNegativeSpectralParameter(lambda));
        }
        return Err(Error::NearSpectrum {
            lambda,
            distance: -lambda,
        });
    }
    let fnorm = norm(f);
    if fnorm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let residual = |u: &[f64], r: &mut [f64]| {
        a.apply(u, r);
        for i in 0..n {
            r[i] = f[i] - (r[i] - lambda * u[i]);
        }
    };
    if banded_feasible(a, opts.band_budget) {
        let below = BandLdlt::factor(a, lambda - gap)?.negative_count();
        let above = BandLdlt::factor(a, lambda + gap)?.negative_count();
        if below != above {
            return Err(Error::NearSpectrum { lambda, distance: gap });
        }
        let fac = BandLdlt::factor(a, lambda)?;
        let mut u = f.to_vec();
        fac.solve(&mut u);
        let mut r = vec![0.0; n];
        let mut rel = f64::INFINITY;
        for _ in 0..8 {
            residual(&u, &mut r);
            rel = norm(&r) / fnorm;
            if rel <= opts.tol {
                return Ok(u);
            }
            fac.solve(&mut r);
            axpy(1.0, &r, &mut u);
        }
        return Err(Error::NonConvergence {
            what: "resolvent refinement".into(),
            residual: rel,
        });
    }
    let eig = lowest_eigenpairs(
        h,
        opts.spectrum_probe,
        &EigenOptions {
            band_budget: opts.band_budget,
            ..EigenOptions::default()
        },
    )?;
    let mut deflate: Vec<(f64, Vec<f64>)> = Vec::new();
    for p in &eig.pairs {
        let d = math::abs(p.lambda - lambda);
        if d <= gap {
            return Err(Error::NearSpectrum { lambda, distance: d });
        }
        if p.lambda < lambda {
            let mut q = p.psi.clone();
            let nq = norm(&q);
            q.iter_mut().for_each(|v| *v /= nq);
            deflate.push((p.lambda, q));
        }
    }
    if !eig.incomplete && eig.pairs.last().is_some_and(|p| p.lambda < lambda) {
        return Err(Error::NonConvergence {
            what: "spectrum probe did not reach lambda; raise spectrum_probe".into(),
            residual: f64::NAN,
        });
    }
    // u = Σ_below (q, f)/(μ - λ) q + v with v ⟂ q solving P(H - λ)P v = P f
    let project = |x: &mut [f64]| {
        for (_, q) in &deflate {
            let c = dot(q, x);
            axpy(-c, q, x);
        }
    };
    let mut pf = f.to_vec();
    project(&mut pf);
    let diag: Vec<f64> = a.diagonal().iter().map(|d| d - lambda).collect();
    let apply = |x: &[f64], y: &mut [f64]| {
        let mut px = x.to_vec();
        project(&mut px);
        a.apply(&px, y);
        axpy(-lambda, &px, y);
        project(y);
    };
    let mut v = vec![0.0; n];
    conjugate_gradient(apply, &diag, &pf, &mut v, 0.1 * opts.tol, 50 * n.max(200), lambda)?;
    project(&mut v);
    for (mu, q) in &deflate {
        axpy(dot(q, f) / (mu - lambda), q, &mut v);
    }
    let mut r = vec![0.0; n];
    residual(&v, &mut r);
    let rel = norm(&r) / fnorm;
    if rel > opts.tol {
        return Err(Error::NonConvergence {
            what: "deflated CG resolvent".into(),
            residual: rel,
        });
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greens::green_kernel;
    use crate::grid::{assemble_hamiltonian, Grid};
    use crate::perturb::Perturbation;

    #[test]
    fn free_resolvent_reproduces_green_kernel() {
        let g = Grid::new(1, 20.0, 0.01).unwrap();
        let h = assemble_hamiltonian(&g, &[]).unwrap();
        let mut f = vec![0.0; g.len()];
        f[g.center_index()] = 1.0 / g.h();
        let u = resolvent_solve(&h, -1.0, &f, &ResolventOptions::default()).unwrap();
        for (i, v) in u.iter().enumerate() {
            let x = g.point(i)[0].abs();
            if x > 0.0 && x < 8.0 {
                let exact = green_kernel(1, x, -1.0).unwrap();
                assert!((v - exact).abs() < 1e-4, "x={x}: {v} vs {exact}");
            }
        }
        let zero = resolvent_solve(&h, -1.0, &vec![0.0; g.len()], &ResolventOptions::default()).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn refuses_at_an_eigenvalue() {
        let g = Grid::new(1, 20.0, 0.01).unwrap();
        let p = Perturbation::delta(-2.0, 0.5).unwrap();
        let h = assemble_hamiltonian(&g, &[(p, [0.0; 3])]).unwrap();
        let lam = lowest_eigenpairs(&h, 1, &EigenOptions::default()).unwrap().pairs[0].lambda;
        let f = vec![1.0; g.len()];
        assert!(matches!(
            resolvent_solve(&h, lam, &f, &ResolventOptions::default()),
            Err(Error::NearSpectrum { .. })
        ));
        // the iterative path deflates the bound state below lambda
        let opts = ResolventOptions {
            band_budget: 0,
            ..ResolventOptions::default()
        };
        let u = resolvent_solve(&h, -0.5, &f, &opts).unwrap();
        let v = resolvent_solve(&h, -0.5, &f, &ResolventOptions::default()).unwrap();
        let d: f64 = u.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(d < 1e-6 * v.iter().map(|x| x.abs()).fold(0.0, f64::max), "{d}");
    }
}
