//! Decay-law fits `log err = c + α log l - β l`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::math;

/// Result of a decay-law regression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub alpha: f64,
    pub beta: f64,
    pub constant: f64,
    /// 95% confidence half-widths from the regression.
    pub alpha_half_width: f64,
    pub beta_half_width: f64,
    /// Sum of squared residuals in `log err`.
    pub residual: f64,
    pub rows: usize,
}

/// Two-sided 97.5% Student-t quantiles for 1..=30 degrees of freedom.
const T975: [f64; 30] = [
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160, 2.145, 2.131,
    2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
];

fn t_quantile(dof: usize) -> f64 {
    if dof == 0 {
        f64::INFINITY
    } else if dof <= 30 {
        T975[dof - 1]
    } else {
        1.96
    }
}

/// Fit `α`, `β` from at least four `(l, err)` rows with `l > 0`, `err > 0`.
pub fn fit_rate(l: &[f64], err: &[f64]) -> Result<RateFit> {
    if l.len() != err.len() {
        return Err(Error::Shape("rate fit columns differ in length".into()));
    }
    let rows = l.len();
    if rows < 4 {
        return Err(Error::FitRefused(alloc::format!("{rows} rows, need at least 4")));
    }
    if l.iter().any(|&x| !(x > 0.0)) || err.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
        return Err(Error::FitRefused("separations and deviations must be positive".into()));
    }
    let design: Vec<f64> = l.iter().flat_map(|&x| [1.0, math::ln(x), -x]).collect();
    let y: Vec<f64> = err.iter().map(|&e| math::ln(e)).collect();
    let ls = least_squares(&design, rows, 3, &y)?;
    let dof = rows - 3;
    let s2 = if dof > 0 { ls.rss / dof as f64 } else { 0.0 };
    let t = t_quantile(dof);
    let hw = |j: usize| t * math::sqrt(s2 * ls.normal_inverse[j * 3 + j]);
    Ok(RateFit {
        constant: ls.coefficients[0],
        alpha: ls.coefficients[1],
        beta: ls.coefficients[2],
        alpha_half_width: hw(1),
        beta_half_width: hw(2),
        residual: ls.rss,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_power_exponential() {
        let l = [3.0, 4.0, 5.0, 6.0, 7.0];
        let e: Vec<f64> = l.iter().map(|&x| libm::exp(-2.0 * x) / x).collect();
        let f = fit_rate(&l, &e).unwrap();
        assert!((f.alpha + 1.0).abs() < 1e-8);
        assert!((f.beta - 2.0).abs() < 1e-8);
        assert!(f.residual < 1e-20);
    }

    #[test]
    fn refuses_short_or_nonpositive_input() {
        assert!(matches!(fit_rate(&[1.0, 2.0, 3.0], &[1.0, 0.5, 0.2]), Err(Error::FitRefused(_))));
        assert!(matches!(
            fit_rate(&[1.0, 2.0, 3.0, 4.0], &[1.0, 0.0, 0.2, 0.1]),
            Err(Error::FitRefused(_))
        ));
    }
}
