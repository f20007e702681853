use std::sync::OnceLock;

use proptest::prelude::*;

use multiwell_core::asympt::{coupling_matrix, leading_predictions, CouplingMatrix, CouplingOptions};
use multiwell_core::greens::green_kernel;
use multiwell_core::grid::{EigenOptions, EigenPair, Grid};
use multiwell_core::perturb::catalog::catalog;
use multiwell_core::perturb::{apply_perturbation, Field, Perturbation};
use multiwell_core::rates::fit_rate;
use multiwell_core::singlewell::{solve_limiting, LimitingSpectrum};

fn catalog_1d() -> Vec<(Perturbation, Grid)> {
    catalog()
        .into_iter()
        .filter(|e| e.dim == 1)
        .map(|e| (e.perturbation, Grid::new(1, e.grid.0, 0.05).unwrap()))
        .collect()
}

proptest! {
    #[test]
    fn perturbations_are_linear(a in -3.0f64..3.0, f1 in 0.1f64..3.0, f2 in 0.1f64..3.0, which in 0usize..5) {
        let members = catalog_1d();
        let (p, g) = &members[which % members.len()];
        let u = g.sample(|x| (f1 * x[0]).sin() + 0.3);
        let v = g.sample(|x| (-f2 * x[0] * x[0]).exp());
        let w: Vec<f64> = u.iter().zip(&v).map(|(u, v)| a * u + v).collect();
        let lu = apply_perturbation(p, &u, g).unwrap();
        let lv = apply_perturbation(p, &v, g).unwrap();
        let lw = apply_perturbation(p, &w, g).unwrap();
        let scale = lu.iter().chain(&lv).fold(1.0f64, |m, x| m.max(x.abs()));
        for i in 0..w.len() {
            prop_assert!((lw[i] - (a * lu[i] + lv[i])).abs() <= 1e-12 * scale);
        }
        // nothing leaks outside the support
        for (i, val) in lw.iter().enumerate() {
            if g.point(i)[0].abs() >= p.support_radius() {
                prop_assert_eq!(*val, 0.0);
            }
        }
    }

    #[test]
    fn green_kernels_positive_and_decreasing(n in 1usize..=3, lambda in -20.0f64..-0.01, t in 0.01f64..30.0, dt in 0.001f64..5.0) {
        let a = green_kernel(n, t, lambda).unwrap();
        let b = green_kernel(n, t + dt, lambda).unwrap();
        prop_assert!(a > 0.0);
        prop_assert!(b >= 0.0 && b < a);
    }

    #[test]
    fn rate_fit_recovers_synthetic_laws(alpha in -2.0f64..2.0, beta in 0.2f64..4.0, c in -3.0f64..3.0, start in 2.0f64..6.0, step in 0.5f64..2.0) {
        let l: Vec<f64> = (0..6).map(|i| start + step * i as f64).collect();
        let err: Vec<f64> = l.iter().map(|&l| (c + alpha * l.ln() - beta * l).exp()).collect();
        let fit = fit_rate(&l, &err).unwrap();
        prop_assert!((fit.alpha - alpha).abs() < 1e-7, "{:?}", fit);
        prop_assert!((fit.beta - beta).abs() < 1e-8, "{:?}", fit);
        prop_assert!(fit.residual < 1e-9);
    }

    #[test]
    fn coupling_spectrum_is_traceless(entries in prop::collection::vec(-1.0f64..1.0, 16), lambda in -5.0f64..-0.1) {
        // four single-state wells
        let mut a = entries.clone();
        for i in 0..4 {
            a[i * 4 + i] = 0.0;
        }
        let m = CouplingMatrix::from_entries(lambda, &a, 4, 2, 10.0).unwrap();
        prop_assert_eq!(m.trace(), 0.0);
        for i in 0..4 {
            for j in 0..4 {
                prop_assert_eq!(m.entry(i, j), m.entry(j, i));
            }
        }
        let p = leading_predictions(&m);
        prop_assert!(p.tau.iter().sum::<f64>().abs() < 1e-12);
        prop_assert!(p.kappa_gram_defect < 1e-12);
        for w in p.tau.windows(2) {
            prop_assert!(w[0].abs() <= w[1].abs() + 1e-15);
        }
    }
}

/// Degenerate first excited level of a radial 2D well.
fn excited_pair() -> &'static (Perturbation, Grid, Vec<EigenPair>) {
    static CELL: OnceLock<(Perturbation, Grid, Vec<EigenPair>)> = OnceLock::new();
    CELL.get_or_init(|| {
        let v = Perturbation::potential(Field::expr("-8*exp(-r*r)").unwrap(), 3.0).unwrap();
        let g = Grid::new(2, 14.0, 0.2).unwrap();
        let pairs = solve_limiting(&v, &g, 3, &EigenOptions::default()).unwrap();
        assert!((pairs[1].lambda - pairs[2].lambda).abs() < 1e-8);
        (v, g, pairs[1..3].to_vec())
    })
}

fn rotate(pairs: &[EigenPair], theta: f64) -> Vec<EigenPair> {
    let (s, c) = theta.sin_cos();
    let mix = |a: f64, b: f64| -> Vec<f64> {
        pairs[0].psi.iter().zip(&pairs[1].psi).map(|(x, y)| a * x + b * y).collect()
    };
    let mut out = pairs.to_vec();
    out[0].psi = mix(c, s);
    out[1].psi = mix(-s, c);
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn coupling_spectrum_ignores_degenerate_basis(theta1 in 0.0f64..6.3, theta2 in 0.0f64..6.3) {
        let (v, g, level) = excited_pair();
        let wells = [(v.clone(), [0.0; 3]), (v.clone(), [6.5, 1.0, 0.0])];
        let tau = |a: f64, b: f64| {
            let spec = LimitingSpectrum::new(vec![rotate(level, a), rotate(level, b)], 1e-6).unwrap();
            let m = coupling_matrix(&spec, 0, &wells, g, &CouplingOptions::default()).unwrap();
            let mut t = leading_predictions(&m).tau;
            t.sort_by(f64::total_cmp);
            (t, m.norm())
        };
        let (base, norm) = tau(0.0, 0.0);
        let (mixed, _) = tau(theta1, theta2);
        prop_assert_eq!(base.len(), 4);
        for (a, b) in base.iter().zip(&mixed) {
            prop_assert!((a - b).abs() <= 1e-10 * norm.max(1.0), "{:?} vs {:?}", base, mixed);
        }
    }
}
