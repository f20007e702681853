use alloc::vec;
use alloc::vec::Vec;

use super::CsrMatrix;
use crate::error::{Error, Result};
use crate::math;

/// `LDLᵀ` factorization of a symmetric banded matrix `A - σI`, without
/// pivoting.
///
/// The number of negative pivots equals the number of eigenvalues of `A`
/// below `σ` (Sylvester's law of inertia), which makes the factorization
/// double as a spectrum-slicing counter.
#[derive(Debug, Clone)]
pub struct BandLdlt {
    n: usize,
    bw: usize,
    /// Row `i` holds `L[i, i - bw .. i]`, oldest column first.
    lower: Vec<f64>,
    d: Vec<f64>,
    shift: f64,
}

impl BandLdlt {
    /// Bytes needed to factor a matrix of this size and bandwidth.
    pub fn storage_bytes(n: usize, bw: usize) -> u64 {
        (n as u64) * (bw as u64 + 1) * 8
    }

    pub fn factor(a: &CsrMatrix, shift: f64) -> Result<Self> {
        let n = a.dim();
        let bw = a.bandwidth();
        let mut lower = vec![0.0; n * bw];
        let mut d = vec![0.0; n];
        let pivot_floor = 1e-300;
        let mut work = vec![0.0; bw];
        for i in 0..n {
            // scatter the lower part of row i
            let row = &mut lower[i * bw..(i + 1) * bw];
            let mut diag = -shift;
            for (c, v) in a.row(i) {
                if c < i {
                    row[bw - (i - c)] = v;
                } else if c == i {
                    diag += v;
                }
            }
            let first = i.saturating_sub(bw);
            for j in first..i {
                // L_ij = (a_ij - Σ_k L_ik d_k L_jk) / d_j, k in [max(first, j-bw), j)
                let tj = bw - (i - j);
                let kstart = first.max(j.saturating_sub(bw));
                let mut s = lower[i * bw + tj];
                for k in kstart..j {
                    let lik_dk = work[bw - (i - k)];
                    let ljk = lower[j * bw + (bw - (j - k))];
                    s -= lik_dk * ljk;
                }
                let lij = s / d[j];
                lower[i * bw + tj] = lij;
                work[tj] = lij * d[j];
            }
            for j in first..i {
                let tj = bw - (i - j);
                diag -= lower[i * bw + tj] * work[tj];
            }
            if !diag.is_finite() {
                return Err(Error::NonConvergence {
                    what: "banded LDLT factorization".into(),
                    residual: f64::NAN,
                });
            }
            if math::abs(diag) < pivot_floor {
                diag = pivot_floor;
            }
            d[i] = diag;
            work.iter_mut().for_each(|w| *w = 0.0);
        }
        Ok(Self {
            n,
            bw,
            lower,
            d,
            shift,
        })
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Number of eigenvalues of `A` strictly below the shift.
    pub fn negative_count(&self) -> usize {
        self.d.iter().filter(|&&v| v < 0.0).count()
    }

    /// Solve `(A - σI) x = b` in place.
    pub fn solve(&self, x: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let first = i.saturating_sub(bw);
            let mut s = x[i];
            for j in first..i {
                s -= self.lower[i * bw + bw - (i - j)] * x[j];
            }
            x[i] = s;
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let xi = x[i];
            let first = i.saturating_sub(bw);
            for j in first..i {
                x[j] -= self.lower[i * bw + bw - (i - j)] * xi;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CsrBuilder;

    fn laplacian(n: usize) -> CsrMatrix {
        let mut b = CsrBuilder::new(n);
        for i in 0..n {
            b.push(i, i, 2.0);
            if i + 1 < n {
                b.push(i, i + 1, -1.0);
                b.push(i + 1, i, -1.0);
            }
        }
        b.build()
    }

    #[test]
    fn inertia_counts_eigenvalues() {
        // eigenvalues 2 - 2cos(kπ/(n+1))
        let n = 20;
        let a = laplacian(n);
        for s in [0.1, 0.5, 1.1, 2.5, 3.9] {
            let exact = (1..=n)
                .filter(|&k| 2.0 - 2.0 * libm::cos(k as f64 * core::f64::consts::PI / (n as f64 + 1.0)) < s)
                .count();
            assert_eq!(BandLdlt::factor(&a, s).unwrap().negative_count(), exact);
        }
    }

    #[test]
    fn solves_wide_band_system() {
        let n = 30;
        let mut b = CsrBuilder::new(n);
        for i in 0..n {
            b.push(i, i, 10.0);
            for k in 1..=4 {
                if i + k < n {
                    let v = 1.0 / (k as f64 + i as f64 * 0.1);
                    b.push(i, i + k, v);
                    b.push(i + k, i, v);
                }
            }
        }
        let a = b.build();
        let xs: Vec<f64> = (0..n).map(|i| libm::sin(i as f64)).collect();
        let mut rhs = vec![0.0; n];
        a.apply(&xs, &mut rhs);
        for v in rhs.iter_mut().zip(&xs) {
            *v.0 -= 0.5 * v.1;
        }
        let f = BandLdlt::factor(&a, 0.5).unwrap();
        f.solve(&mut rhs);
        for (u, v) in rhs.iter().zip(&xs) {
            assert!((u - v).abs() < 1e-12);
        }
    }
}
