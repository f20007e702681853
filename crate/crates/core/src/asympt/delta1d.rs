//! Closed forms for attractive point interactions `Σ bᵢ δ(x - xᵢ)` on the
//! line. A single `b δ` with `b < 0` binds at `λ = -b²/4` with
//! `ψ(x) = √κ e^{-κ|x|}`, `κ = -b/2`.

use alloc::vec;
use alloc::vec::Vec;

use super::CouplingMatrix;
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use crate::math;

fn check_attractive(b: f64) -> Result<f64> {
    if b < 0.0 && b.is_finite() {
        Ok(-b / 2.0)
    } else {
        Err(Error::InvalidPerturbation("point interaction must be attractive (b < 0)".into()))
    }
}

/// `(λ, κ)` of the bound state of `b δ`.
pub fn single_level(b: f64) -> Result<(f64, f64)> {
    let k = check_attractive(b)?;
    Ok((-k * k, k))
}

/// `√κ e^{-κ|x|}`.
pub fn eigenfunction(b: f64, x: f64) -> Result<f64> {
    let k = check_attractive(b)?;
    Ok(math::sqrt(k) * math::exp(-k * math::abs(x)))
}

/// Coupling matrix of identical wells `b δ` at `positions`:
/// `A_kr = b ψ(x_k - x_r) ψ(0) = b κ e^{-κ|x_k - x_r|}` for `k ≠ r`.
pub fn coupling_matrix(b: f64, positions: &[f64]) -> Result<CouplingMatrix> {
    let (lambda, k) = single_level(b)?;
    let p = positions.len();
    let mut a = vec![0.0; p * p];
    let mut lx = f64::INFINITY;
    for i in 0..p {
        for j in 0..p {
            if i != j {
                let d = math::abs(positions[i] - positions[j]);
                a[i * p + j] = b * k * math::exp(-k * d);
                lx = lx.min(d);
            }
        }
    }
    CouplingMatrix::from_entries(lambda, &a, p, 1, lx)
}

/// Number of eigenvalues below `-κ²`: eigenvalues of the Birman-Schwinger
/// matrix `√|bᵢ||bⱼ| e^{-κ|xᵢ-xⱼ|}/(2κ)` above one.
fn count_below(strengths: &[f64], positions: &[f64], kappa: f64) -> usize {
    let m = strengths.len();
    let mut k = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            k[i * m + j] = math::sqrt(strengths[i].abs() * strengths[j].abs())
                * math::exp(-kappa * math::abs(positions[i] - positions[j]))
                / (2.0 * kappa);
        }
    }
    symmetric_eigen(&k, m).values.iter().filter(|&&v| v > 1.0).count()
}

/// All bound states of `Σ bᵢ δ(x - xᵢ)`, ascending, by bisection on the
/// Birman-Schwinger count.
pub fn bound_states(strengths: &[f64], positions: &[f64]) -> Result<Vec<f64>> {
    if strengths.len() != positions.len() || strengths.is_empty() {
        return Err(Error::Shape("one position per strength".into()));
    }
    for &b in strengths {
        check_attractive(b)?;
    }
    let top: f64 = strengths.iter().map(|b| b.abs()).sum::<f64>() / 2.0 + 1.0;
    let bottom = 1e-12;
    let total = count_below(strengths, positions, bottom);
    let mut out = Vec::with_capacity(total);
    for j in 0..total {
        // smallest κ with count(κ) ≤ j is κ_j
        let (mut lo, mut hi) = (bottom, top);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if count_below(strengths, positions, mid) > j {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let k = 0.5 * (lo + hi);
        out.push(-k * k);
    }
    Ok(out)
}

/// Second-order shift of the level of `b₁ δ(x)` caused by `b₂ δ(x - l)`
/// when `b₂` does not share that level:
/// `-b₁ b₂ e^{-2κl} / (2κ + b₂)`, `κ = -b₁/2`.
pub fn second_order_shift(b1: f64, b2: f64, l: f64) -> Result<f64> {
    let k = check_attractive(b1)?;
    if math::abs(2.0 * k + b2) < 1e-14 {
        return Err(Error::NearSpectrum {
            lambda: -k * k,
            distance: 0.0,
        });
    }
    Ok(-b1 * b2 * math::exp(-2.0 * k * l) / (2.0 * k + b2))
}
