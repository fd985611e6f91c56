use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ridge damping added to the diagonal of the normal equations.
pub const RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub coef: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.coef.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }
}

/// Least squares with intercept via damped normal equations.
///
/// The system is solved on centered columns rescaled to unit norm, with the
/// damping mapped into that basis (`RIDGE / norm²`), which is algebraically
/// the raw-space problem but well conditioned for features spanning many
/// orders of magnitude. Columns with no spread get a zero coefficient.
pub fn fit_linear(x: &[Vec<f64>], y: &[f64]) -> Result<LinearModel> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if y.iter().any(|v| !v.is_finite()) || x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("linear regression input"));
    }
    let n = x.len() as f64;
    let d = x[0].len();
    let y_mean = y.iter().sum::<f64>() / n;
    let mean: Vec<f64> = (0..d)
        .map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n)
        .collect();
    let norm: Vec<f64> = (0..d)
        .map(|j| {
            x.iter()
                .map(|r| (r[j] - mean[j]).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let active: Vec<usize> = (0..d)
        .filter(|&j| norm[j] > 1e-12 * (1.0 + mean[j].abs()))
        .collect();
    let k = active.len();

    let z = |r: &[f64], a: usize| (r[active[a]] - mean[active[a]]) / norm[active[a]];
    let mut gram = vec![0.0; k * k];
    let mut rhs = vec![0.0; k];
    for (r, &t) in x.iter().zip(y) {
        let zr: Vec<f64> = (0..k).map(|a| z(r, a)).collect();
        for a in 0..k {
            rhs[a] += zr[a] * (t - y_mean);
            for b in 0..=a {
                gram[a * k + b] += zr[a] * zr[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            gram[b * k + a] = gram[a * k + b];
        }
        gram[a * k + a] += (RIDGE / norm[active[a]].powi(2)).max(1e-13);
    }
    let beta = solve_spd(&mut gram, &rhs, k)?;

    let mut coef = vec![0.0; d];
    for (a, &j) in active.iter().enumerate() {
        coef[j] = beta[a] / norm[j];
    }
    let intercept = y_mean - coef.iter().zip(&mean).map(|(c, m)| c * m).sum::<f64>();
    Ok(LinearModel { coef, intercept })
}

/// Cholesky solve; adds jitter if the matrix is numerically indefinite.
fn solve_spd(a: &mut [f64], b: &[f64], k: usize) -> Result<Vec<f64>> {
    let original = a.to_vec();
    let mut jitter = 0.0;
    for _ in 0..8 {
        a.copy_from_slice(&original);
        for i in 0..k {
            a[i * k + i] += jitter;
        }
        if cholesky_in_place(a, k) {
            let mut v = b.to_vec();
            for i in 0..k {
                let s: f64 = (0..i).map(|j| a[i * k + j] * v[j]).sum();
                v[i] = (v[i] - s) / a[i * k + i];
            }
            for i in (0..k).rev() {
                let s: f64 = (i + 1..k).map(|j| a[j * k + i] * v[j]).sum();
                v[i] = (v[i] - s) / a[i * k + i];
            }
            return Ok(v);
        }
        jitter = if jitter == 0.0 { 1e-10 } else { jitter * 100.0 };
    }
    Err(Error::NonFinite("normal equations"))
}

fn cholesky_in_place(a: &mut [f64], k: usize) -> bool {
    for j in 0..k {
        let s: f64 = (0..j).map(|p| a[j * k + p] * a[j * k + p]).sum();
        let diag = a[j * k + j] - s;
        if diag.is_nan() || diag <= 0.0 {
            return false;
        }
        let l = diag.sqrt();
        a[j * k + j] = l;
        for i in j + 1..k {
            let s: f64 = (0..j).map(|p| a[i * k + p] * a[j * k + p]).sum();
            a[i * k + j] = (a[i * k + j] - s) / l;
        }
    }
    true
}
