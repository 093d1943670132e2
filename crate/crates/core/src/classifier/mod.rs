//! Feature standardization and the two linear classifiers.
//!
//! Ridge regression is used for ordinary training set sizes and minibatch
//! logistic regression for large ones (more than [`LOGISTIC_THRESHOLD`]
//! training examples). Both operate on standardized features.

mod logistic;
mod ridge;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::{HydraError, Result};

pub use logistic::{
    fit_logistic, loss_and_gradient, LogisticModel, LogisticProtocol, PlateauSchedule,
    ScheduleEvent, ScheduleStep, TrainingLog,
};
pub use ridge::{default_alphas, fit_ridge, ridge_loo_errors, RidgeModel};

/// Training sets larger than this use logistic regression under `Auto`.
pub const LOGISTIC_THRESHOLD: usize = 10_000;

/// Floor applied to per-feature standard deviations.
pub const STDEV_FLOOR: f64 = 1e-8;

/// Per-feature mean and population standard deviation of the training features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerStats {
    pub mean: Vec<f64>,
    pub stdev: Vec<f64>,
}

impl ScalerStats {
    pub fn fit(features: ArrayView2<'_, f64>) -> Result<Self> {
        let n = features.nrows();
        if n < 2 {
            return Err(HydraError::InsufficientData(format!(
                "need at least 2 training examples to scale features, got {n}"
            )));
        }
        check_finite(features)?;
        let mean = features.mean_axis(Axis(0)).expect("n >= 2").to_vec();
        let stdev = features
            .axis_iter(Axis(1))
            .zip(&mean)
            .map(|(col, m)| {
                let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64;
                var.sqrt().max(STDEV_FLOOR)
            })
            .collect();
        Ok(Self { mean, stdev })
    }

    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, features: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if features.ncols() != self.n_features() {
            return Err(HydraError::BankMismatch(format!(
                "model expects {} features, got {}",
                self.n_features(),
                features.ncols()
            )));
        }
        let mut out = features.to_owned();
        for mut row in out.axis_iter_mut(Axis(0)) {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.stdev) {
                *v = (*v - m) / s;
            }
        }
        Ok(out)
    }
}

pub(crate) fn check_finite(features: ArrayView2<'_, f64>) -> Result<()> {
    if features.iter().any(|v| !v.is_finite()) {
        return Err(HydraError::NonFiniteInput("feature matrix".into()));
    }
    Ok(())
}

/// Index of the largest value, lowest index on ties.
pub(crate) fn argmax(row: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (i, v) in row.into_iter().enumerate() {
        if v > best_value || i == 0 {
            best = i;
            best_value = v;
        }
    }
    best
}

/// Which classifier to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierChoice {
    #[default]
    Auto,
    Ridge,
    Logistic,
}

impl ClassifierChoice {
    /// Resolve `Auto` by training set size.
    pub fn resolve(self, n_train: usize) -> ClassifierChoice {
        match self {
            ClassifierChoice::Auto if n_train > LOGISTIC_THRESHOLD => ClassifierChoice::Logistic,
            ClassifierChoice::Auto => ClassifierChoice::Ridge,
            other => other,
        }
    }
}

impl fmt::Display for ClassifierChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassifierChoice::Auto => "auto",
            ClassifierChoice::Ridge => "ridge",
            ClassifierChoice::Logistic => "logistic",
        })
    }
}

impl FromStr for ClassifierChoice {
    type Err = HydraError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(ClassifierChoice::Auto),
            "ridge" => Ok(ClassifierChoice::Ridge),
            "logistic" => Ok(ClassifierChoice::Logistic),
            other => Err(HydraError::InvalidConfig(format!("unknown classifier {other:?}"))),
        }
    }
}

/// A trained classifier of either kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Classifier {
    Ridge(RidgeModel),
    Logistic(LogisticModel),
}

impl Classifier {
    pub fn n_features(&self) -> usize {
        match self {
            Classifier::Ridge(m) => m.scaler.n_features(),
            Classifier::Logistic(m) => m.scaler.n_features(),
        }
    }

    pub fn n_classes(&self) -> usize {
        match self {
            Classifier::Ridge(m) => m.intercepts.len(),
            Classifier::Logistic(m) => m.intercepts.len(),
        }
    }

    /// Ridge decision values, or logistic class probabilities.
    pub fn predict_scores(&self, features: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        match self {
            Classifier::Ridge(m) => m.decision_function(features),
            Classifier::Logistic(m) => m.predict_proba(features),
        }
    }

    pub fn predict(&self, features: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        Ok(labels_from_scores(&self.predict_scores(features)?))
    }
}

pub fn labels_from_scores(scores: &Array2<f64>) -> Vec<usize> {
    scores
        .axis_iter(Axis(0))
        .map(|row| argmax(row.iter().copied()))
        .collect()
}

/// Affine scores `x W^T + b` for a `C x F` weight matrix.
pub(crate) fn linear_scores(x: &Array2<f64>, weights: &Array2<f64>, intercepts: &[f64]) -> Array2<f64> {
    let mut scores = x.dot(&weights.t());
    for mut row in scores.axis_iter_mut(Axis(0)) {
        for (s, b) in row.iter_mut().zip(intercepts) {
            *s += b;
        }
    }
    scores
}

pub fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    assert_eq!(predicted.len(), truth.len());
    if truth.is_empty() {
        return 0.0;
    }
    let correct = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    correct as f64 / truth.len() as f64
}
