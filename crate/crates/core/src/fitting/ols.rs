//! Least squares with an intercept, via Householder QR.

use nalgebra::{DMatrix, DVector};

use super::FitError;

/// Relative size below which a diagonal entry of `R` signals rank loss.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub intercept: f64,
    /// One per design column, intercept excluded.
    pub coeffs: Vec<f64>,
    pub s_coeffs: Vec<f64>,
    pub residuals: Vec<f64>,
    pub r2: f64,
    /// `n - p`, with `p` counting the intercept.
    pub df: usize,
    pub sigma2: f64,
}

impl OlsFit {
    pub fn z(&self, j: usize) -> f64 {
        self.coeffs[j] / self.s_coeffs[j]
    }

    pub fn z_values(&self) -> Vec<f64> {
        (0..self.coeffs.len()).map(|j| self.z(j)).collect()
    }
}

/// Regresses `y` on an intercept and the columns of `x`. Standard errors use
/// the unbiased residual variance `RSS / (n - p)`.
pub fn least_squares(y: &[f64], x: &[&[f64]]) -> Result<OlsFit, FitError> {
    let n = y.len();
    let p = x.len() + 1;
    if n <= p {
        return Err(FitError::TooFewRows { rows: n, columns: p });
    }
    let ybar = y.iter().sum::<f64>() / n as f64;
    let means: Vec<f64> = x.iter().map(|c| c.iter().sum::<f64>() / n as f64).collect();
    // centring keeps the intercept column well conditioned
    let mut design = DMatrix::zeros(n, p);
    for r in 0..n {
        design[(r, 0)] = 1.0;
    }
    for (j, col) in x.iter().enumerate() {
        if col.len() != n {
            return Err(FitError::TooFewRows { rows: col.len().min(n), columns: p });
        }
        for (r, v) in col.iter().enumerate() {
            design[(r, j + 1)] = v - means[j];
        }
    }
    let yv = DVector::from_iterator(n, y.iter().map(|v| v - ybar));
    let qr = design.clone().qr();
    let r_mat = qr.r();
    let scale = (0..p).map(|j| r_mat[(j, j)].abs()).fold(0.0, f64::max);
    if (0..p).any(|j| r_mat[(j, j)].abs() <= RANK_TOL * scale) {
        return Err(FitError::RankDeficient);
    }
    let qty = qr.q().transpose() * &yv;
    let beta = r_mat
        .solve_upper_triangular(&qty)
        .ok_or(FitError::RankDeficient)?;
    let fitted = &design * &beta;
    let residuals: Vec<f64> = yv.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let tss: f64 = yv.iter().map(|v| v * v).sum();
    let df = n - p;
    let sigma2 = rss / df as f64;
    let r_inv = r_mat
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or(FitError::RankDeficient)?;
    // diag((R'R)^-1) = squared row norms of R^-1
    let s_coeffs: Vec<f64> = (1..p).map(|j| (sigma2 * r_inv.row(j).norm_squared()).sqrt()).collect();
    let coeffs: Vec<f64> = beta.iter().skip(1).copied().collect();
    let intercept = ybar + beta[0] - coeffs.iter().zip(&means).map(|(b, m)| b * m).sum::<f64>();
    let r2 = if tss > 0.0 { 1.0 - rss / tss } else { 0.0 };
    Ok(OlsFit { intercept, coeffs, s_coeffs, residuals, r2, df, sigma2 })
}
