//! Shipped example perturbations, one per operator family and dimension.
//! Every entry is expected to pass the symmetry and form-bound checks on its
//! suggested grid.

use alloc::vec;
use alloc::vec::Vec;

use super::{Field, Kernel, Perturbation};
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub dim: usize,
    pub perturbation: Perturbation,
    /// Half-width and spacing of a grid that resolves the support.
    pub grid: (f64, f64),
}

fn expr(s: &str) -> Field {
    Field::expr(s).expect("catalog expressions parse")
}

fn entry(name: &'static str, dim: usize, p: Result<Perturbation>, grid: (f64, f64)) -> CatalogEntry {
    CatalogEntry {
        name,
        dim,
        perturbation: p.expect("catalog entries are valid"),
        grid,
    }
}

pub fn catalog() -> Vec<CatalogEntry> {
    vec![
        entry("delta_a2", 1, Perturbation::delta(-2.0, 0.5), (4.0, 0.02)),
        entry(
            "square_well_1d",
            1,
            Perturbation::potential(Field::Const(-5.0), 1.0),
            (4.0, 0.02),
        ),
        entry(
            "gaussian_1d",
            1,
            Perturbation::potential(expr("-3*exp(-2*x*x)"), 3.0),
            (6.0, 0.02),
        ),
        entry(
            "soft_divergence_1d",
            1,
            Perturbation::divergence_form(
                1,
                vec![expr("-0.4*exp(-x*x)")],
                vec![expr("0.5*tanh(x)*exp(-x*x)")],
                expr("-2*exp(-x*x)"),
                2.5,
            ),
            (5.0, 0.02),
        ),
        entry(
            "rank_one_kernel_1d",
            1,
            Perturbation::integral_kernel(
                Kernel::expr("-1.5*exp(-x*x-xp*xp)").expect("catalog expressions parse"),
                2.5,
                1,
            ),
            (5.0, 0.02),
        ),
        entry(
            "gaussian_2d",
            2,
            Perturbation::potential(expr("-8*exp(-r*r)"), 4.0),
            (6.0, 0.1),
        ),
        entry(
            "anisotropic_divergence_2d",
            2,
            Perturbation::divergence_form(
                2,
                vec![
                    expr("-0.3*exp(-r*r)"),
                    expr("0.1*exp(-r*r)"),
                    expr("0.1*exp(-r*r)"),
                    expr("-0.2*exp(-r*r)"),
                ],
                vec![Field::Const(0.0), Field::Const(0.0)],
                expr("-4*exp(-r*r)"),
                3.0,
            ),
            (4.0, 0.1),
        ),
        entry(
            "gaussian_3d",
            3,
            Perturbation::potential(expr("-10*exp(-r*r)"), 3.0),
            (4.0, 0.2),
        ),
    ]
}

/// `div G∇` with `G = -g·I` on the unit-radius support: violates `c₀ < 1`
/// once `g ≥ 1`.
pub fn negative_control(g: f64) -> Perturbation {
    Perturbation::divergence_form(1, vec![Field::Const(-g)], vec![Field::Const(0.0)], Field::Const(0.0), 1.5)
        .expect("constant coefficients are valid")
}
