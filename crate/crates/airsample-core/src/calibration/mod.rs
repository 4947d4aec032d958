//! Least-squares sensor calibration and model assessment.
//!
//! The calibration problem is a supervised fit over aligned pairs
//! `{x_i, y_i}`: hourly sensor-derived feature vectors against reference
//! concentrations. The model is multiple linear regression with an
//! intercept, solved by Householder QR. On top of the fit sit the
//! goodness-of-fit metrics (R^2, RMSE), k-fold cross-validation with a
//! normal-approximation confidence interval, greedy forward feature
//! selection and Pearson correlation maps.

mod corr;
mod cv;
mod metrics;
mod mlr;
mod select;

pub use corr::{correlation_matrix, CorrelationMatrix};
pub use cv::{kfold_cv, CvError, CvSummary};
pub use metrics::{r2, rmse, MetricsError};
pub use mlr::{fit_mlr, predict, CalibrationModel, FitError, FitMetrics, PredictError};
pub use select::{forward_select, SelectError, SelectionStep};
