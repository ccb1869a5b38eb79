//! Accuracy, Top@K on long-tail subsets and micro-averaged precision-recall.
//!
//! Ties are always broken towards the lower genre id.

use std::cmp::Ordering;

use crate::dataset::{BagSet, BayesOracle, DatasetError, FeatureStore, Split};
use crate::model::{MattModel, ModelError};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("nothing to evaluate")]
    EmptyEval,
    #[error("K = {k} outside 1..={n_genres}")]
    InvalidK { k: usize, n_genres: usize },
    #[error("{predictions} predictions but {golds} gold labels")]
    LengthMismatch { predictions: usize, golds: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Genre ids ranked by descending probability, ascending id on ties.
pub fn ranking(probabilities: &[f64]) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..probabilities.len()).collect();
    ids.sort_by(|&a, &b| {
        probabilities[b]
            .partial_cmp(&probabilities[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    ids
}

fn check_lengths(predictions: &[Vec<f64>], golds: &[usize]) -> Result<(), EvalError> {
    if predictions.len() != golds.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            golds: golds.len(),
        });
    }
    if predictions.is_empty() {
        return Err(EvalError::EmptyEval);
    }
    Ok(())
}

pub fn accuracy(predictions: &[Vec<f64>], golds: &[usize]) -> Result<f64, EvalError> {
    check_lengths(predictions, golds)?;
    let correct = predictions
        .iter()
        .zip(golds)
        .filter(|(p, &g)| argmax(p) == g)
        .count();
    Ok(correct as f64 / golds.len() as f64)
}

/// Fraction of units whose gold genre is among the `k` best-ranked genres.
pub fn top_k_accuracy(predictions: &[Vec<f64>], golds: &[usize], k: usize) -> Result<f64, EvalError> {
    check_lengths(predictions, golds)?;
    let n_genres = predictions[0].len();
    if k == 0 || k > n_genres {
        return Err(EvalError::InvalidK { k, n_genres });
    }
    let hits = predictions
        .iter()
        .zip(golds)
        .filter(|(p, &g)| ranking(p)[..k].contains(&g))
        .count();
    Ok(hits as f64 / golds.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    /// Ordered by descending threshold (ascending recall).
    pub points: Vec<PrPoint>,
    pub average_precision: f64,
}

/// Micro-averaged one-vs-rest precision-recall over all (unit, genre) pairs.
///
/// A pair is predicted positive when its probability is at least the
/// threshold; thresholds are the distinct scores.
pub fn pr_curve(predictions: &[Vec<f64>], golds: &[usize]) -> Result<PrCurve, EvalError> {
    check_lengths(predictions, golds)?;
    let mut pairs: Vec<(f64, bool)> = predictions
        .iter()
        .zip(golds)
        .flat_map(|(p, &g)| p.iter().enumerate().map(move |(j, &s)| (s, j == g)))
        .collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal));
    let positives = pairs.iter().filter(|p| p.1).count() as f64;
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    let mut i = 0;
    while i < pairs.len() {
        let threshold = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == threshold {
            if pairs[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let precision = tp as f64 / (tp + fp) as f64;
        let recall = if positives > 0.0 { tp as f64 / positives } else { 0.0 };
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        points.push(PrPoint {
            threshold,
            precision,
            recall,
        });
    }
    Ok(PrCurve {
        points,
        average_precision: ap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalMode {
    /// One prediction per bag.
    #[default]
    Bag,
    /// One prediction per segment, scored as a singleton bag.
    Segment,
}

impl std::str::FromStr for EvalMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bag" => Ok(Self::Bag),
            "segment" => Ok(Self::Segment),
            other => Err(format!("unknown evaluation mode `{other}` (expected bag or segment)")),
        }
    }
}

impl std::fmt::Display for EvalMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Bag => "bag",
            Self::Segment => "segment",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopKEntry {
    /// Genres with fewer than this many training segments.
    pub max_train_count: usize,
    pub k: usize,
    /// Number of evaluation units in the subset.
    pub units: usize,
    /// `None` when the subset is empty.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mode: EvalMode,
    pub units: usize,
    pub overall_accuracy: f64,
    pub top_k: Vec<TopKEntry>,
    pub pr: PrCurve,
}

impl EvalReport {
    pub fn top_k(&self, max_train_count: usize, k: usize) -> Option<f64> {
        self.top_k
            .iter()
            .find(|e| e.max_train_count == max_train_count && e.k == k)
            .and_then(|e| e.accuracy)
    }
}

pub const DEFAULT_SUBSETS: [usize; 2] = [100, 200];
pub const DEFAULT_KS: [usize; 3] = [2, 3, 5];

/// Builds a report from already-computed probability vectors.
pub fn report_from_predictions(
    mode: EvalMode,
    predictions: &[Vec<f64>],
    golds: &[usize],
    train_counts: &[usize],
    subsets: &[usize],
    ks: &[usize],
) -> Result<EvalReport, EvalError> {
    let overall_accuracy = accuracy(predictions, golds)?;
    let n_genres = predictions[0].len();
    let mut top_k = Vec::with_capacity(subsets.len() * ks.len());
    for &limit in subsets {
        let (sub_preds, sub_golds): (Vec<Vec<f64>>, Vec<usize>) = predictions
            .iter()
            .zip(golds)
            .filter(|(_, &g)| train_counts[g] < limit)
            .map(|(p, &g)| (p.clone(), g))
            .unzip();
        for &k in ks {
            if k == 0 || k > n_genres {
                return Err(EvalError::InvalidK { k, n_genres });
            }
            let accuracy = if sub_golds.is_empty() {
                None
            } else {
                Some(top_k_accuracy(&sub_preds, &sub_golds, k)?)
            };
            top_k.push(TopKEntry {
                max_train_count: limit,
                k,
                units: sub_golds.len(),
                accuracy,
            });
        }
    }
    Ok(EvalReport {
        mode,
        units: golds.len(),
        overall_accuracy,
        top_k,
        pr: pr_curve(predictions, golds)?,
    })
}

/// Predictions and gold labels for the test split of `bags`.
pub fn predict(
    model: &MattModel,
    bags: &BagSet,
    features: &FeatureStore,
    mode: EvalMode,
) -> Result<(Vec<Vec<f64>>, Vec<usize>), EvalError> {
    let mut predictions = Vec::new();
    let mut golds = Vec::new();
    for bag in bags.split(Split::Test) {
        let members = features.bag_vectors(bag)?;
        match mode {
            EvalMode::Bag => {
                predictions.push(model.forward_bag(&members)?.probabilities);
                golds.push(bag.genre_id);
            }
            EvalMode::Segment => {
                for x in &members {
                    predictions.push(model.predict_segment(x)?.probabilities);
                    golds.push(bag.genre_id);
                }
            }
        }
    }
    Ok((predictions, golds))
}

/// Evaluates on the test split. In segment mode every segment inherits its
/// bag's label.
pub fn evaluate(
    model: &MattModel,
    bags: &BagSet,
    features: &FeatureStore,
    mode: EvalMode,
    subsets: &[usize],
    ks: &[usize],
) -> Result<EvalReport, EvalError> {
    let (predictions, golds) = predict(model, bags, features, mode)?;
    report_from_predictions(mode, &predictions, &golds, &bags.vocabulary.train_counts, subsets, ks)
}

/// Same report for the Bayes oracle of a synthetic dataset.
pub fn evaluate_oracle(
    oracle: &BayesOracle,
    bags: &BagSet,
    features: &FeatureStore,
    mode: EvalMode,
    subsets: &[usize],
    ks: &[usize],
) -> Result<EvalReport, EvalError> {
    let mut predictions = Vec::new();
    let mut golds = Vec::new();
    for bag in bags.split(Split::Test) {
        let members = features.bag_vectors(bag)?;
        match mode {
            EvalMode::Bag => {
                predictions.push(oracle.posterior(&members));
                golds.push(bag.genre_id);
            }
            EvalMode::Segment => {
                for x in &members {
                    predictions.push(oracle.posterior(&[x]));
                    golds.push(bag.genre_id);
                }
            }
        }
    }
    report_from_predictions(mode, &predictions, &golds, &bags.vocabulary.train_counts, subsets, ks)
}
