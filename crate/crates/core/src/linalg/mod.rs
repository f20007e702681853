//! Small linear-algebra kernels: sparse and banded storage, conjugate
//! gradients, dense symmetric eigenproblems and least squares.

mod band;
mod cg;
mod csr;
mod dense;

pub use band::BandLdlt;
pub use cg::{conjugate_gradient, CgReport};
pub use csr::{CsrBuilder, CsrMatrix};
pub use dense::{least_squares, symmetric_eigen, LeastSquares, SymmetricEigen};

/// Euclidean inner product.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    crate::math::sqrt(dot(a, a))
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn scale(alpha: f64, x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v *= alpha);
}
