//! k-fold cross-validation of the linear calibration.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::metrics::{r2, MetricsError};
use super::mlr::{fit_mlr, predict, FitError, PredictError};
use crate::series::{AggregatedDataset, DatasetError, Pollutant};

/// Cross-validation outcome: per-fold R^2 scores, their mean and a 95%
/// normal-approximation confidence interval `mean +- 1.96 * SE`.
#[derive(Debug, Clone, PartialEq)]
pub struct CvSummary {
    pub k: usize,
    pub per_fold_r2: Vec<f64>,
    pub mean_r2: f64,
    pub ci95: (f64, f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CvError {
    #[error("k must be at least 2, got {0}")]
    KTooSmall(usize),
    #[error("{usable} usable rows are not enough for {k} folds (need >= 2k)")]
    InsufficientRows { usable: usize, k: usize },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Deterministic fold assignment: usable rows shuffled by `seed` and cut
/// into `k` contiguous chunks whose sizes differ by at most one.
pub(crate) fn make_folds(usable: &[usize], k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = usable.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n = order.len();
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut at = 0;
    for i in 0..k {
        let size = base + usize::from(i < extra);
        folds.push(order[at..at + size].to_vec());
        at += size;
    }
    folds
}

/// 10-fold CV (or any `k >= 2`): each fold is scored by a model fitted to
/// the remaining folds. Identical `(dataset, k, features, seed)` inputs
/// give identical folds and summary.
pub fn kfold_cv(
    dataset: &AggregatedDataset,
    k: usize,
    features: &[String],
    target: Pollutant,
    seed: u64,
) -> Result<CvSummary, CvError> {
    if k < 2 {
        return Err(CvError::KTooSmall(k));
    }
    let usable = dataset.usable_indices();
    if usable.len() < 2 * k {
        return Err(CvError::InsufficientRows {
            usable: usable.len(),
            k,
        });
    }
    let folds = make_folds(&usable, k, seed);
    cv_over_folds(dataset, &folds, features, target)
}

/// Score `features` over a fixed fold assignment. Used by forward
/// selection so that every candidate within a step sees the same folds.
pub(crate) fn cv_over_folds(
    dataset: &AggregatedDataset,
    folds: &[Vec<usize>],
    features: &[String],
    target: Pollutant,
) -> Result<CvSummary, CvError> {
    let k = folds.len();
    let mut per_fold = Vec::with_capacity(k);
    for i in 0..k {
        let mut train_rows = Vec::new();
        for (j, fold) in folds.iter().enumerate() {
            if j != i {
                train_rows.extend_from_slice(fold);
            }
        }
        let (x_train, y_train) = dataset.design(features, &train_rows)?;
        let model = fit_mlr(features, &x_train, &y_train, target)?;
        let (x_test, y_test) = dataset.design(features, &folds[i])?;
        let y_hat = predict(&model, features, &x_test)?;
        per_fold.push(r2(&y_test, &y_hat)?);
    }
    let mean = per_fold.iter().sum::<f64>() / k as f64;
    let sd = if k > 1 {
        let ss: f64 = per_fold.iter().map(|v| (v - mean) * (v - mean)).sum();
        libm::sqrt(ss / (k as f64 - 1.0))
    } else {
        0.0
    };
    let half = 1.96 * sd / libm::sqrt(k as f64);
    Ok(CvSummary {
        k,
        per_fold_r2: per_fold,
        mean_r2: mean,
        ci95: (mean - half, mean + half),
    })
}
