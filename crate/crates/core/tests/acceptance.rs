//! Acceptance suite. Every criterion prints one `PASS`/`FAIL` line and then
//! asserts it. Reference values come from oracles written here, independent
//! of the library code paths they check.

use std::io::Write;
use std::time::{Duration, Instant};

use multiwell_core::asympt::{
    self, coupling_matrix, delta1d, leading_predictions, reconstruct_eigenfunctions, CouplingOptions, Extension,
};
use multiwell_core::grid::{assemble_hamiltonian, lowest_eigenpairs, EigenOptions, Grid};
use multiwell_core::greens::{bessel_k0, green_farfield, green_kernel};
use multiwell_core::perturb::catalog::{catalog, negative_control};
use multiwell_core::perturb::{estimate_form_bound, Field, Perturbation};
use multiwell_core::rates::fit_rate;
use multiwell_core::singlewell::{solve_limiting, LimitingSpectrum};
use multiwell_core::Point;

fn report(id: &str, ok: bool, elapsed: Duration, limit: Duration, detail: &str) {
    let ok = ok && elapsed < limit;
    // straight to the handle so the line survives the test harness capture
    let _ = writeln!(
        std::io::stdout().lock(),
        "criterion {id}: {} ({detail}; {:.2?} of {:?})",
        if ok { "PASS" } else { "FAIL" },
        elapsed,
        limit
    );
    assert!(ok, "criterion {id} failed: {detail}");
}

/// Largest root of a function that is negative at `lo` and positive at `hi`.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    assert!(f(lo) < 0.0 && f(hi) > 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Two δ wells of strength `-a` at distance `l`: the even and odd levels are
/// `-κ²` with `2κ/a = 1 ± e^{-κl}`.
fn delta_pair_levels(a: f64, l: f64) -> (f64, f64) {
    let even = bisect(|k| 2.0 * k / a - 1.0 - (-k * l).exp(), 1e-9, a);
    let odd = bisect(|k| 2.0 * k / a - 1.0 + (-k * l).exp(), 1e-9, a);
    (-even * even, -odd * odd)
}

fn x(v: f64) -> Point {
    [v, 0.0, 0.0]
}

#[test]
fn criterion_1_two_delta_leading_remainder() {
    let t = Instant::now();
    let ls = [4.0, 5.0, 6.0, 7.0, 8.0];
    let mut devs = Vec::new();
    for &l in &ls {
        let (e1, e2) = delta_pair_levels(2.0, l);
        let pred = leading_predictions(&delta1d::coupling_matrix(-2.0, &[0.0, l]).unwrap());
        let expect = (-1.0 - 2.0 * (-l).exp(), -1.0 + 2.0 * (-l).exp());
        assert!((pred.lambdas[0] - expect.0).abs() < 1e-14 && (pred.lambdas[1] - expect.1).abs() < 1e-14);
        devs.push((e1 - pred.lambdas[0]).abs().max((e2 - pred.lambdas[1]).abs()));
    }
    let fit = fit_rate(&ls, &devs).unwrap();
    report(
        "1",
        (1.8..=2.2).contains(&fit.beta),
        t.elapsed(),
        Duration::from_secs(10),
        &format!("beta = {:.4} in [1.8, 2.2], alpha = {:.3}", fit.beta, fit.alpha),
    );
}

#[test]
fn criterion_2_grid_matches_delta_oracle() {
    let t = Instant::now();
    let p = Perturbation::delta(-2.0, 0.5).unwrap();
    let mut worst = 0.0f64;
    let mut worst_ratio = f64::INFINITY;
    let mut best_ratio = 0.0f64;
    for l in [4.0, 5.0, 6.0, 7.0, 8.0] {
        let (e1, e2) = delta_pair_levels(2.0, l);
        let mut errs = Vec::new();
        for h in [0.005, 0.0025] {
            let g = Grid::new(1, l / 2.0 + 15.0, h).unwrap();
            let op = assemble_hamiltonian(&g, &[(p.clone(), x(-l / 2.0)), (p.clone(), x(l / 2.0))]).unwrap();
            let rep = lowest_eigenpairs(&op, 4, &EigenOptions::default()).unwrap();
            assert_eq!(rep.pairs.len(), 2, "l = {l}, h = {h}");
            errs.push([(rep.pairs[0].lambda - e1).abs(), (rep.pairs[1].lambda - e2).abs()]);
        }
        worst = worst.max(errs[0][0]).max(errs[0][1]);
        for i in 0..2 {
            let r = errs[0][i] / errs[1][i];
            worst_ratio = worst_ratio.min(r);
            best_ratio = best_ratio.max(r);
        }
    }
    report(
        "2",
        worst <= 5e-5 && worst_ratio >= 3.5 && best_ratio <= 4.5,
        t.elapsed(),
        Duration::from_secs(60),
        &format!("max error {worst:.3e} <= 5e-5 at h = 0.005, halving ratio in [{worst_ratio:.3}, {best_ratio:.3}]"),
    );
}

/// δ pair with strengths `-a` at 0 and `-b` at `l`: the level near `-a²/4`
/// solves `(2κ - a)(2κ - b) = ab e^{-2κl}`.
fn asymmetric_pair_level(a: f64, b: f64, l: f64) -> f64 {
    let k = bisect(
        |k| (2.0 * k - a) * (2.0 * k - b) - a * b * (-2.0 * k * l).exp(),
        0.5 * a,
        0.5 * a + 1.0,
    );
    -k * k
}

struct SecondOrderRun {
    ls: Vec<f64>,
    deviations: Vec<f64>,
    leading: Vec<f64>,
    grid_rel: Vec<f64>,
}

fn second_order_run() -> SecondOrderRun {
    let p1 = Perturbation::delta(-2.0, 0.5).unwrap();
    let p2 = Perturbation::delta(-1.0, 0.5).unwrap();
    let g = Grid::new(1, 20.0, 0.005).unwrap();
    let psi = solve_limiting(&p1, &g, 1, &EigenOptions::default()).unwrap().remove(0);
    let ls = vec![3.0, 4.0, 5.0, 6.0];
    let mut run = SecondOrderRun {
        ls: ls.clone(),
        deviations: vec![],
        leading: vec![],
        grid_rel: vec![],
    };
    for &l in &ls {
        let exact = asymmetric_pair_level(2.0, 1.0, l);
        let shift = delta1d::second_order_shift(-2.0, -1.0, l).unwrap();
        let wells = [(p1.clone(), x(0.0)), (p2.clone(), x(l))];
        let on_grid = asympt::second_order_shift(
            psi.lambda,
            &wells,
            &psi,
            &g,
            &CouplingOptions {
                extension: Extension::GreenRepresentation,
                ..Default::default()
            },
            &Default::default(),
        )
        .unwrap();
        run.deviations.push((exact - (-1.0 + shift)).abs());
        run.leading.push((exact + 1.0).abs());
        run.grid_rel.push((on_grid.total / shift - 1.0).abs());
    }
    run
}

#[test]
fn criterion_3_second_order_beats_leading() {
    let t = Instant::now();
    let run = second_order_run();
    let gain = run
        .leading
        .iter()
        .zip(&run.deviations)
        .map(|(a, b)| a / b)
        .fold(f64::INFINITY, f64::min);
    let grid = run.grid_rel.iter().cloned().fold(0.0, f64::max);
    report(
        "3a",
        gain >= 10.0 && grid <= 0.01,
        t.elapsed(),
        Duration::from_secs(60),
        &format!("min improvement over lambda* = {gain:.3e} >= 10, grid shift within {grid:.2e} of closed form"),
    );
}

#[test]
fn criterion_3_second_order_remainder_rate() {
    let t = Instant::now();
    let run = second_order_run();
    let fit = fit_rate(&run.ls, &run.deviations).unwrap();
    report(
        "3b",
        (2.6..=3.4).contains(&fit.beta),
        t.elapsed(),
        Duration::from_secs(60),
        &format!("beta = {:.4} in [2.6, 3.4], alpha = {:.3}", fit.beta, fit.alpha),
    );
}

#[test]
fn criterion_4_three_delta_cluster() {
    let t = Instant::now();
    let l = 6.0f64;
    let p = Perturbation::delta(-2.0, 0.5).unwrap();
    let g = Grid::new(1, l + 15.0, 0.005).unwrap();
    let wells: Vec<_> = [-l, 0.0, l].iter().map(|&c| (p.clone(), x(c))).collect();
    let op = assemble_hamiltonian(&g, &wells).unwrap();
    let rep = lowest_eigenpairs(&op, 6, &EigenOptions::default()).unwrap();
    let near: Vec<f64> = rep.pairs.iter().map(|e| e.lambda).filter(|&v| (v + 1.0).abs() < 0.5).collect();

    let a = delta1d::coupling_matrix(-2.0, &[0.0, l, 2.0 * l]).unwrap();
    let nn = -2.0 * (-l).exp();
    let corner = -2.0 * (-2.0 * l).exp();
    assert!((a.entry(0, 1) - nn).abs() < 1e-15 && (a.entry(1, 2) - nn).abs() < 1e-15);
    assert!((a.entry(0, 2) - corner).abs() < 1e-17);
    let mut pred = leading_predictions(&a).lambdas;
    pred.sort_by(f64::total_cmp);
    let bound = 20.0 * (-2.0 * l).exp();
    let dev = if near.len() == pred.len() {
        near.iter().zip(&pred).map(|(d, q)| (d - q).abs()).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    report(
        "4",
        near.len() == 3 && rep.pairs.len() == 3 && dev <= bound,
        t.elapsed(),
        Duration::from_secs(120),
        &format!("cluster size {} (p = 3), max deviation {dev:.3e} <= {bound:.3e}", near.len()),
    );
}

#[test]
fn criterion_5_two_dimensional_coupling_rate() {
    let t = Instant::now();
    let v = Perturbation::potential(Field::expr("-8*exp(-r*r)").unwrap(), 4.0).unwrap();
    let g = Grid::new(2, 8.0, 0.1).unwrap();
    let ground = solve_limiting(&v, &g, 1, &EigenOptions::default()).unwrap().remove(0);
    let kappa = (-ground.lambda).sqrt();
    let spec = LimitingSpectrum::new(vec![vec![ground.clone()], vec![ground]], 1e-6).unwrap();
    let opts = CouplingOptions {
        extension: Extension::GreenRepresentation,
        ..Default::default()
    };
    let ls = [9.0, 11.0, 13.0, 15.0];
    let mut norms = Vec::new();
    for &l in &ls {
        let wells = [(v.clone(), x(0.0)), (v.clone(), x(l))];
        norms.push(coupling_matrix(&spec, 0, &wells, &g, &opts).unwrap().norm());
    }
    let fit = fit_rate(&ls, &norms).unwrap();
    let rel = fit.beta / kappa - 1.0;
    report(
        "5",
        rel.abs() <= 0.05 && (fit.alpha + 0.5).abs() <= 0.3,
        t.elapsed(),
        Duration::from_secs(600),
        &format!(
            "kappa* = {kappa:.6}, beta = {:.6} ({:+.2e} relative), alpha = {:.3}",
            fit.beta, rel, fit.alpha
        ),
    );
}

#[test]
fn criterion_6_invariants() {
    let t = Instant::now();
    let mut failures: Vec<String> = Vec::new();

    // reciprocity of the coupling for a non-symmetric well
    let v = Perturbation::potential(Field::expr("-3*exp(-2*(x-0.4)^2)*(1+0.5*tanh(x))").unwrap(), 2.5).unwrap();
    let green = CouplingOptions {
        extension: Extension::GreenRepresentation,
        ..Default::default()
    };
    for h in [0.04, 0.02, 0.01] {
        let g = Grid::new(1, 18.0, h).unwrap();
        let pairs = solve_limiting(&v, &g, 1, &EigenOptions::default()).unwrap();
        let spec = LimitingSpectrum::new(vec![pairs.clone(), pairs], 1e-6).unwrap();
        let a = coupling_matrix(&spec, 0, &[(v.clone(), x(0.0)), (v.clone(), x(7.0))], &g, &green).unwrap();
        if a.symmetry_defect > h * h * a.norm() {
            failures.push(format!("h = {h}: reciprocity defect {:e} above h^2 |A|", a.symmetry_defect));
        }
    }

    // three δ wells: trace, κ-vector Gram, count stability
    let p = Perturbation::delta(-2.0, 0.5).unwrap();
    let g = Grid::new(1, 16.0, 0.01).unwrap();
    let single = solve_limiting(&p, &g, 1, &EigenOptions::default()).unwrap();
    let spec = LimitingSpectrum::new(vec![single.clone(); 3], 1e-6).unwrap();
    for l in [4.0, 6.0, 8.0] {
        let wells: Vec<_> = [-l, 0.0, l].iter().map(|&c| (p.clone(), x(c))).collect();
        let a = coupling_matrix(&spec, 0, &wells, &g, &green).unwrap();
        let pred = leading_predictions(&a);
        if a.trace() != 0.0 || pred.tau.iter().sum::<f64>().abs() > 1e-12 {
            failures.push(format!("l = {l}: trace {:e}", pred.tau.iter().sum::<f64>()));
        }
        if pred.kappa_gram_defect > 1e-12 {
            failures.push(format!("l = {l}: kappa Gram defect {:e}", pred.kappa_gram_defect));
        }
        let box_grid = Grid::new(1, l + 15.0, 0.01).unwrap();
        let op = assemble_hamiltonian(&box_grid, &wells).unwrap();
        let rep = lowest_eigenpairs(&op, 6, &EigenOptions::default()).unwrap();
        if rep.pairs.len() != 3 || rep.pairs.iter().any(|e| e.lambda >= 0.0) {
            failures.push(format!("l = {l}: {} negative eigenvalues", rep.pairs.len()));
        }
    }

    // reconstruction Gram off-diagonals on an unevenly spaced chain
    let mut ls = Vec::new();
    let mut offs = Vec::new();
    for l in [6.0, 7.0, 8.0, 9.0, 10.0] {
        let wells: Vec<_> = [0.0, l, 2.0 * l + 1.5].iter().map(|&c| (p.clone(), x(c))).collect();
        let a = coupling_matrix(&spec, 0, &wells, &g, &green).unwrap();
        let pred = leading_predictions(&a);
        let target = Grid::new(1, 2.0 * l + 18.0, 0.01).unwrap();
        let rec = reconstruct_eigenfunctions(&pred, &spec, 0, &wells, &g, &target, &green).unwrap();
        ls.push(l);
        offs.push(rec.max_off_diagonal);
    }
    let kappa = (-single[0].lambda).sqrt();
    let fit = fit_rate(&ls, &offs).unwrap();
    if (fit.beta / kappa - 1.0).abs() > 0.05 {
        failures.push(format!("reconstruction Gram decays at {:.4}, kappa* = {kappa:.4}", fit.beta));
    }

    // hypothesis validator
    for e in catalog() {
        let g = Grid::new(e.dim, e.grid.0, e.grid.1).unwrap();
        let rep = estimate_form_bound(&e.perturbation, &g, 20, 5).unwrap();
        if !rep.passes {
            failures.push(format!("catalog member {} rejected: {rep:?}", e.name));
        }
    }
    let g = Grid::new(1, 4.0, 0.02).unwrap();
    if estimate_form_bound(&negative_control(1.5), &g, 20, 5).unwrap().passes {
        failures.push("c0 = 1.5 control accepted".into());
    }

    report(
        "6",
        failures.is_empty(),
        t.elapsed(),
        Duration::from_secs(60),
        &if failures.is_empty() {
            format!("all invariants hold, Gram off-diagonal rate {:.4} vs kappa* {kappa:.4}", fit.beta)
        } else {
            failures.join("; ")
        },
    );
}

/// `∫_a^b f` by composite Simpson on `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Eighth-order central first derivative.
fn d1(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    const C: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
    let mut s = 0.0;
    for (k, c) in C.iter().enumerate() {
        let k = (k + 1) as f64;
        s += c * (f(x + k * h) - f(x - k * h));
    }
    s / h
}

/// Eighth-order central second derivative.
fn d2(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    const C: [f64; 5] = [-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0];
    let mut s = C[0] * f(x);
    for (k, c) in C.iter().enumerate().skip(1) {
        s += c * (f(x + k as f64 * h) + f(x - k as f64 * h));
    }
    s / (h * h)
}

#[test]
fn criterion_7_green_kernels() {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for lambda in [-0.25f64, -1.0, -3.0] {
        let k = (-lambda).sqrt();
        // n = 1: homogeneous equation away from 0, unit flux jump at 0
        let g1 = |s: f64| green_kernel(1, s.abs(), lambda).unwrap();
        for s in [0.5, 1.0, 2.5] {
            let s = s / k;
            worst = worst.max((d2(g1, s, 0.02 / k) / (k * k * g1(s)) - 1.0).abs());
        }
        let mass = 2.0 * simpson(|s| if s == 0.0 { 1.0 / (2.0 * k) } else { g1(s) }, 0.0, 60.0 / k, 6000);
        worst = worst.max((k * k * mass - 1.0).abs());

        // n = 3: Laplacian by axis-wise differences away from 0, unit flux
        let g3 = |p: [f64; 3]| green_kernel(3, (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt(), lambda).unwrap();
        for p in [[0.9, 0.4, -0.3], [1.5, 1.1, 0.7]] {
            let p = [p[0] / k, p[1] / k, p[2] / k];
            let mut lap = 0.0;
            for a in 0..3 {
                lap += d2(
                    |v| {
                        let mut q = p;
                        q[a] = v;
                        g3(q)
                    },
                    p[a],
                    0.02 / k,
                );
            }
            worst = worst.max((lap / (k * k * g3(p)) - 1.0).abs());
        }
        let flux = |r: f64| -4.0 * std::f64::consts::PI * r * r * d1(|s| green_kernel(3, s, lambda).unwrap(), r, 0.01 * r);
        // flux through |x| = r equals 1 - κ² ∫_{|x|<r} G
        for r in [0.3 / k, 1.0 / k] {
            let inside = simpson(
                |s| 4.0 * std::f64::consts::PI * s * s * if s == 0.0 { 0.0 } else { green_kernel(3, s, lambda).unwrap() },
                0.0,
                r,
                4000,
            );
            worst = worst.max((flux(r) / (1.0 - k * k * inside) - 1.0).abs());
        }

        // n = 2: K0 integral representation
        for s in [0.05, 0.7, 2.0, 6.5, 15.0] {
            let z = k * s;
            let k0 = simpson(|u| (-z * u.cosh()).exp(), 0.0, (1.0 + 40.0 / z).acosh(), 8000);
            let g2 = green_kernel(2, s, lambda).unwrap();
            worst = worst.max((g2 / (k0 / (2.0 * std::f64::consts::PI)) - 1.0).abs());
            worst = worst.max((bessel_k0(z) / k0 - 1.0).abs());
        }
    }
    // far field
    let mut far_ok = true;
    for n in 1..=3 {
        let mut prev = f64::INFINITY;
        for s in [5.0, 20.0, 80.0, 320.0] {
            let d = (green_kernel(n, s, -1.0).unwrap() / green_farfield(n, s, -1.0).unwrap() - 1.0).abs();
            far_ok &= d <= prev.max(1e-14);
            prev = d;
        }
        far_ok &= prev < 1e-3;
    }
    report(
        "7",
        worst <= 1e-10 && far_ok,
        t.elapsed(),
        Duration::from_secs(5),
        &format!("max relative residual {worst:.2e} <= 1e-10, far-field ratio -> 1: {far_ok}"),
    );
}
