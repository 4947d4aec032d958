//! Multiple linear regression by least squares.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::series::Pollutant;

/// A fitted linear calibration: `y_hat = beta_0 + beta^T x`, with the
/// feature order fixed at fit time and enforced at prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationModel {
    pub feature_names: Vec<String>,
    /// Intercept first, then one coefficient per feature.
    pub beta: Vec<f64>,
    pub target: Pollutant,
    /// Rows the model was fitted on.
    pub fitted_on: usize,
}

/// Goodness of fit on a given evaluation set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitMetrics {
    pub r2: f64,
    /// In ug/m3, same units as the reference values.
    pub rmse: f64,
    pub n: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need more than P + 1 = {needed} rows, got {got}")]
    NotEnoughRows { needed: usize, got: usize },
    #[error("design matrix is rank deficient; offending columns: {columns:?}")]
    RankDeficient { columns: Vec<String> },
    #[error("design matrix contains non-finite values")]
    NonFinite,
    #[error("x has {x_len} values which is not a multiple of {p} features")]
    ShapeMismatch { x_len: usize, p: usize },
    #[error("x has {rows} rows but y has {y_len}")]
    RowMismatch { rows: usize, y_len: usize },
}

/// Fit `y` against `[1 | X]` by least squares.
///
/// `x` is row-major `n x p` with `p = feature_names.len()`. The solve is a
/// Householder QR of the augmented design; exactly collinear columns are
/// reported by name.
pub fn fit_mlr(
    feature_names: &[String],
    x: &[f64],
    y: &[f64],
    target: Pollutant,
) -> Result<CalibrationModel, FitError> {
    let p = feature_names.len();
    if p > 0 && x.len() % p != 0 {
        return Err(FitError::ShapeMismatch { x_len: x.len(), p });
    }
    let n = if p == 0 { y.len() } else { x.len() / p };
    if n != y.len() {
        return Err(FitError::RowMismatch { rows: n, y_len: y.len() });
    }
    if n <= p + 1 {
        return Err(FitError::NotEnoughRows { needed: p + 2, got: n });
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(FitError::NonFinite);
    }

    // Augmented design [1 | X], column-major for the QR sweep.
    let cols = p + 1;
    let mut a = vec![0.0f64; n * cols];
    for i in 0..n {
        a[i] = 1.0;
        for j in 0..p {
            a[(j + 1) * n + i] = x[i * p + j];
        }
    }
    let mut rhs = y.to_vec();

    let beta = qr_solve(&mut a, &mut rhs, n, cols).map_err(|bad| FitError::RankDeficient {
        columns: bad
            .into_iter()
            .map(|j| {
                if j == 0 {
                    String::from("(intercept)")
                } else {
                    feature_names[j - 1].clone()
                }
            })
            .collect(),
    })?;

    Ok(CalibrationModel {
        feature_names: feature_names.to_vec(),
        beta,
        target,
        fitted_on: n,
    })
}

/// Householder QR least-squares solve of the column-major `n x cols`
/// matrix `a`. Returns the coefficient vector, or the indices of columns
/// found (numerically) collinear.
fn qr_solve(a: &mut [f64], rhs: &mut [f64], n: usize, cols: usize) -> Result<Vec<f64>, Vec<usize>> {
    let mut diag = vec![0.0f64; cols];
    let mut scale = 0.0f64;
    for &v in a.iter() {
        scale = scale.max(libm::fabs(v));
    }
    let tol = scale * (n as f64) * f64::EPSILON * 16.0;

    for k in 0..cols {
        // Householder vector for column k, rows k..n.
        let col = &a[k * n..(k + 1) * n];
        let mut norm = 0.0;
        for &v in &col[k..] {
            norm += v * v;
        }
        let norm = libm::sqrt(norm);
        let head = a[k * n + k];
        let alpha = if head >= 0.0 { -norm } else { norm };
        diag[k] = alpha;
        if norm <= tol {
            // Column k is in the span of the previous ones.
            return Err(vec![k]);
        }
        a[k * n + k] = head - alpha;
        let mut vnorm2 = 0.0;
        for i in k..n {
            vnorm2 += a[k * n + i] * a[k * n + i];
        }
        if vnorm2 == 0.0 {
            return Err(vec![k]);
        }
        // Apply the reflector to the remaining columns and the rhs.
        for j in (k + 1)..cols {
            let mut dot = 0.0;
            for i in k..n {
                dot += a[k * n + i] * a[j * n + i];
            }
            let f = 2.0 * dot / vnorm2;
            for i in k..n {
                a[j * n + i] -= f * a[k * n + i];
            }
        }
        let mut dot = 0.0;
        for i in k..n {
            dot += a[k * n + i] * rhs[i];
        }
        let f = 2.0 * dot / vnorm2;
        for i in k..n {
            rhs[i] -= f * a[k * n + i];
        }
    }

    // Back substitution on R (diagonal in `diag`, strict upper in `a`).
    let mut beta = vec![0.0f64; cols];
    for k in (0..cols).rev() {
        let mut sum = rhs[k];
        for j in (k + 1)..cols {
            sum -= a[j * n + k] * beta[j];
        }
        beta[k] = sum / diag[k];
    }
    Ok(beta)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictError {
    #[error("feature mismatch: model expects {expected:?}, got {got:?}")]
    FeatureMismatch { expected: Vec<String>, got: Vec<String> },
    #[error("x has {x_len} values which is not a multiple of {p} features")]
    ShapeMismatch { x_len: usize, p: usize },
}

/// Predict `y_hat = [1 | X] beta`. Column names and order must match the
/// model exactly; callers reorder by name before calling.
pub fn predict(
    model: &CalibrationModel,
    feature_names: &[String],
    x: &[f64],
) -> Result<Vec<f64>, PredictError> {
    if feature_names != model.feature_names.as_slice() {
        return Err(PredictError::FeatureMismatch {
            expected: model.feature_names.clone(),
            got: feature_names.to_vec(),
        });
    }
    let p = model.feature_names.len();
    if p > 0 && x.len() % p != 0 {
        return Err(PredictError::ShapeMismatch { x_len: x.len(), p });
    }
    let n = if p == 0 { 0 } else { x.len() / p };
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut v = model.beta[0];
        for j in 0..p {
            v += model.beta[j + 1] * x[i * p + j];
        }
        out.push(v);
    }
    Ok(out)
}
