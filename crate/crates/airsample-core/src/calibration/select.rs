//! Greedy forward feature selection, a wrapper method around the CV'd fit.

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use super::cv::{cv_over_folds, make_folds, CvError, CvSummary};
use crate::series::{AggregatedDataset, Pollutant};

/// One addition made by forward selection: the chosen feature and the CV
/// summary of the model including it (plus everything chosen before).
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionStep {
    pub feature: String,
    pub cv: CvSummary,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectError {
    #[error("candidate list is empty")]
    NoCandidates,
    #[error("candidate '{0}' also appears in always_in")]
    OverlappingCandidate(String),
    #[error(transparent)]
    Cv(#[from] CvError),
}

/// Add, one at a time, the candidate that maximizes mean CV R^2 on top of
/// `always_in` and the features chosen so far, until the candidates are
/// exhausted. The full trajectory is reported; selection never stops
/// early, so flat or negative steps are visible in the result.
///
/// All candidates within a step (and across steps) are scored on the same
/// fold assignment derived from `seed`, making the comparison paired.
/// Ties are broken by the lexicographically smallest feature name.
pub fn forward_select(
    dataset: &AggregatedDataset,
    always_in: &[String],
    candidates: &[String],
    k: usize,
    target: Pollutant,
    seed: u64,
) -> Result<Vec<SelectionStep>, SelectError> {
    if candidates.is_empty() {
        return Err(SelectError::NoCandidates);
    }
    for c in candidates {
        if always_in.contains(c) {
            return Err(SelectError::OverlappingCandidate(c.clone()));
        }
    }
    if k < 2 {
        return Err(SelectError::Cv(CvError::KTooSmall(k)));
    }
    let usable = dataset.usable_indices();
    if usable.len() < 2 * k {
        return Err(SelectError::Cv(CvError::InsufficientRows {
            usable: usable.len(),
            k,
        }));
    }
    let folds = make_folds(&usable, k, seed);

    let mut remaining: Vec<String> = candidates.to_vec();
    remaining.sort();
    let mut chosen: Vec<String> = always_in.to_vec();
    let mut trajectory = Vec::with_capacity(remaining.len());

    while !remaining.is_empty() {
        let mut best: Option<(usize, CvSummary)> = None;
        for (i, candidate) in remaining.iter().enumerate() {
            let mut features = chosen.clone();
            features.push(candidate.clone());
            let cv = cv_over_folds(dataset, &folds, &features, target)?;
            let better = match &best {
                None => true,
                // Strict improvement only: with `remaining` sorted, the
                // lexicographically smallest name wins ties.
                Some((_, b)) => cv.mean_r2 > b.mean_r2,
            };
            if better {
                best = Some((i, cv));
            }
        }
        let (idx, cv) = best.expect("remaining is nonempty");
        let feature = remaining.remove(idx);
        chosen.push(feature.clone());
        trajectory.push(SelectionStep { feature, cv });
    }
    Ok(trajectory)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::DataRow;
    use alloc::string::ToString;
    use alloc::vec;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn strings(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    /// y depends on x1; x2 is pure noise.
    fn signal_plus_noise_dataset(n: usize, seed: u64) -> AggregatedDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..n)
            .map(|i| {
                let x1 = libm::sin(i as f64 * 0.37) * 10.0;
                let x2: f64 = rng.random_range(-10.0..10.0);
                let noise: f64 = rng.random_range(-0.5..0.5);
                DataRow {
                    timestamp: i as i64 * 3600,
                    features: vec![Some(x1), Some(x2)],
                    target: Some(3.0 * x1 + 1.0 + noise),
                }
            })
            .collect();
        AggregatedDataset::new(strings(&["x1", "x2"]), rows)
    }

    #[test]
    fn informative_feature_selected_first() {
        let ds = signal_plus_noise_dataset(200, 5);
        let steps =
            forward_select(&ds, &[], &strings(&["x2", "x1"]), 5, Pollutant::O3, 11).unwrap();
        assert_eq!(steps.len(), 2);
        assert_eq!(steps[0].feature, "x1");
        assert!(steps[0].cv.mean_r2 > 0.99);
    }

    #[test]
    fn single_candidate_is_selected() {
        let ds = signal_plus_noise_dataset(100, 6);
        let steps = forward_select(&ds, &strings(&["x2"]), &strings(&["x1"]), 4, Pollutant::O3, 1)
            .unwrap();
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].feature, "x1");
    }

    #[test]
    fn overlap_is_an_error() {
        let ds = signal_plus_noise_dataset(100, 7);
        assert!(matches!(
            forward_select(&ds, &strings(&["x1"]), &strings(&["x1"]), 4, Pollutant::O3, 1),
            Err(SelectError::OverlappingCandidate(_))
        ));
    }

    #[test]
    fn empty_candidates_is_an_error() {
        let ds = signal_plus_noise_dataset(100, 8);
        assert!(matches!(
            forward_select(&ds, &[], &[], 4, Pollutant::O3, 1),
            Err(SelectError::NoCandidates)
        ));
    }
}
