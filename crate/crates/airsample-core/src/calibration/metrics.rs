//! Coefficient of determination and root-mean-square error.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("y has {y_len} values but y_hat has {y_hat_len}")]
    LengthMismatch { y_len: usize, y_hat_len: usize },
    #[error("metrics need at least one observation")]
    Empty,
    #[error("R^2 is undefined for a zero-variance target")]
    ZeroVariance,
}

/// `R^2 = 1 - SS_res / SS_tot`, with `SS_tot` about the mean of `y`.
pub fn r2(y: &[f64], y_hat: &[f64]) -> Result<f64, MetricsError> {
    check(y, y_hat)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    if ss_tot == 0.0 {
        return Err(MetricsError::ZeroVariance);
    }
    let ss_res: f64 = y
        .iter()
        .zip(y_hat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Root-mean-square residual, in the units of `y`.
pub fn rmse(y: &[f64], y_hat: &[f64]) -> Result<f64, MetricsError> {
    check(y, y_hat)?;
    let ms: f64 = y
        .iter()
        .zip(y_hat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / y.len() as f64;
    Ok(libm::sqrt(ms))
}

fn check(y: &[f64], y_hat: &[f64]) -> Result<(), MetricsError> {
    if y.len() != y_hat.len() {
        return Err(MetricsError::LengthMismatch {
            y_len: y.len(),
            y_hat_len: y_hat.len(),
        });
    }
    if y.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn perfect_prediction() {
        let y = vec![1.0, 2.0, 3.0];
        assert_eq!(r2(&y, &y).unwrap(), 1.0);
        assert_eq!(rmse(&y, &y).unwrap(), 0.0);
    }

    #[test]
    fn mean_prediction_scores_zero() {
        let y = vec![1.0, 2.0, 3.0];
        let y_hat = vec![2.0, 2.0, 2.0];
        assert_eq!(r2(&y, &y_hat).unwrap(), 0.0);
    }

    #[test]
    fn zero_variance_target_is_an_error() {
        let y = vec![5.0, 5.0];
        assert_eq!(r2(&y, &y).unwrap_err(), MetricsError::ZeroVariance);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            r2(&[1.0], &[1.0, 2.0]),
            Err(MetricsError::LengthMismatch { .. })
        ));
    }
}
