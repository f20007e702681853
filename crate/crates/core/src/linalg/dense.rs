use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Eigen-decomposition of a real symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `k` (stored as `vectors[k]`) is the unit eigenvector for
    /// `values[k]`.
    pub vectors: Vec<Vec<f64>>,
}

/// Cyclic Jacobi rotations; `a` is row-major `n × n` and only its symmetric
/// part is used. Accurate to a few ulps of `‖A‖` for the small matrices
/// (coupling matrices, Ritz projections) it is used on.
pub fn symmetric_eigen(a: &[f64], n: usize) -> SymmetricEigen {
    assert_eq!(a.len(), n * n);
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = 0.5 * (a[i * n + j] + a[j * n + i]);
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale: f64 = m.iter().map(|x| x * x).sum::<f64>();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum();
        if off <= 1e-30 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + math::sqrt(1.0 + theta * theta))
                } else {
                    -1.0 / (-theta + math::sqrt(1.0 + theta * theta))
                };
                let c = 1.0 / math::sqrt(1.0 + t * t);
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i * n + i].total_cmp(&m[j * n + j]));
    let values = order.iter().map(|&i| m[i * n + i]).collect();
    let vectors = order
        .iter()
        .map(|&k| (0..n).map(|i| v[i * n + k]).collect())
        .collect();
    SymmetricEigen { values, vectors }
}

/// Ordinary least-squares solution with its covariance factor.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    pub coefficients: Vec<f64>,
    /// Sum of squared residuals.
    pub rss: f64,
    /// `(AᵀA)⁻¹`, row-major.
    pub normal_inverse: Vec<f64>,
}

/// Householder QR least squares for a row-major `rows × cols` design matrix.
pub fn least_squares(a: &[f64], rows: usize, cols: usize, b: &[f64]) -> Result<LeastSquares> {
    if rows < cols || a.len() != rows * cols || b.len() != rows {
        return Err(Error::Shape("least squares needs rows >= cols".into()));
    }
    let mut r = a.to_vec();
    let mut y = b.to_vec();
    for k in 0..cols {
        let alpha_sq: f64 = (k..rows).map(|i| r[i * cols + k] * r[i * cols + k]).sum();
        let mut alpha = math::sqrt(alpha_sq);
        if alpha == 0.0 {
            return Err(Error::Shape("rank-deficient design matrix".into()));
        }
        if r[k * cols + k] > 0.0 {
            alpha = -alpha;
        }
        let mut v: Vec<f64> = (k..rows).map(|i| r[i * cols + k]).collect();
        v[0] -= alpha;
        let vnorm_sq: f64 = v.iter().map(|x| x * x).sum();
        for j in k..cols {
            let s: f64 = (k..rows).map(|i| v[i - k] * r[i * cols + j]).sum::<f64>() * 2.0 / vnorm_sq;
            for i in k..rows {
                r[i * cols + j] -= s * v[i - k];
            }
        }
        let s: f64 = (k..rows).map(|i| v[i - k] * y[i]).sum::<f64>() * 2.0 / vnorm_sq;
        for i in k..rows {
            y[i] -= s * v[i - k];
        }
    }
    let mut x = vec![0.0; cols];
    for k in (0..cols).rev() {
        let mut s = y[k];
        for j in k + 1..cols {
            s -= r[k * cols + j] * x[j];
        }
        x[k] = s / r[k * cols + k];
    }
    let rss: f64 = y[cols..].iter().map(|v| v * v).sum();
    // (AᵀA)⁻¹ = R⁻¹ R⁻ᵀ
    let mut rinv = vec![0.0; cols * cols];
    for c in 0..cols {
        for k in (0..cols).rev() {
            let mut s = if k == c { 1.0 } else { 0.0 };
            for j in k + 1..cols {
                s -= r[k * cols + j] * rinv[j * cols + c];
            }
            rinv[k * cols + c] = s / r[k * cols + k];
        }
    }
    let mut normal_inverse = vec![0.0; cols * cols];
    for i in 0..cols {
        for j in 0..cols {
            normal_inverse[i * cols + j] = (0..cols).map(|k| rinv[i * cols + k] * rinv[j * cols + k]).sum();
        }
    }
    Ok(LeastSquares {
        coefficients: x,
        rss,
        normal_inverse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_on_known_matrix() {
        // [[2, 1], [1, 2]] → 1, 3
        let e = symmetric_eigen(&[2.0, 1.0, 1.0, 2.0], 2);
        assert!((e.values[0] - 1.0).abs() < 1e-15);
        assert!((e.values[1] - 3.0).abs() < 1e-15);
        let v = &e.vectors[0];
        assert!((v[0] + v[1]).abs() < 1e-15);
    }

    #[test]
    fn jacobi_reconstructs_random_matrix() {
        let n = 7;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = libm::sin(1.0 + (i * 7 + j * 3) as f64);
                a[i * n + j] = v;
                a[j * n + i] = v;
            }
        }
        let e = symmetric_eigen(&a, n);
        for i in 0..n {
            for j in 0..n {
                let rec: f64 = (0..n).map(|k| e.values[k] * e.vectors[k][i] * e.vectors[k][j]).sum();
                assert!((rec - a[i * n + j]).abs() < 1e-13);
                let g: f64 = (0..n).map(|k| e.vectors[i][k] * e.vectors[j][k]).sum();
                assert!((g - if i == j { 1.0 } else { 0.0 }).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn least_squares_exact_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let a: Vec<f64> = xs.iter().flat_map(|&x| [1.0, x]).collect();
        let b: Vec<f64> = xs.iter().map(|x| 3.0 - 2.0 * x).collect();
        let ls = least_squares(&a, 4, 2, &b).unwrap();
        assert!((ls.coefficients[0] - 3.0).abs() < 1e-12);
        assert!((ls.coefficients[1] + 2.0).abs() < 1e-12);
        assert!(ls.rss < 1e-20);
        // (AᵀA)⁻¹ for x = 1..4: AᵀA = [[4, 10], [10, 30]]
        assert!((ls.normal_inverse[0] - 1.5).abs() < 1e-12);
        assert!((ls.normal_inverse[3] - 0.2).abs() < 1e-12);
    }
}
