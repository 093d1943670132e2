//! One-vs-rest ridge regression classifier with leave-one-out alpha selection.
//!
//! Targets are `+1` for the example's class and `-1` otherwise. The intercept
//! is unpenalized. Because the standardized training features have zero column
//! means, the hat matrix of the model with intercept splits as
//! `H = X (X'X + aI)^-1 X' + 11'/n`, and one eigendecomposition of the smaller
//! Gram matrix gives the exact leave-one-out residuals
//! `(y_i - yhat_i) / (1 - H_ii)` for every alpha.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{check_finite, linear_scores, ScalerStats};
use crate::{HydraError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    /// `C x F`, in standardized feature space.
    pub weights: Array2<f64>,
    pub intercepts: Vec<f64>,
    pub alpha: f64,
    /// Mean squared leave-one-out error for each candidate alpha.
    pub loo_errors: Vec<(f64, f64)>,
    pub scaler: ScalerStats,
}

impl RidgeModel {
    pub fn decision_function(&self, features: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let x = self.scaler.apply(features)?;
        Ok(linear_scores(&x, &self.weights, &self.intercepts))
    }
}

/// Ten log-spaced values from `1e-3` to `1e3`.
pub fn default_alphas() -> Vec<f64> {
    (0..10).map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / 9.0)).collect()
}

pub(crate) fn to_dmatrix(x: ArrayView2<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[[i, j]])
}

/// `+1 / -1` one-vs-rest targets, `n x C`.
pub(crate) fn ovr_targets(labels: &[usize], n_classes: usize) -> DMatrix<f64> {
    DMatrix::from_fn(labels.len(), n_classes, |i, c| if labels[i] == c { 1.0 } else { -1.0 })
}

/// Eigen-representation of the penalized part of the hat matrix:
/// `X (X'X + aI)^-1 X' = U diag(l / (l + a)) U'`.
struct Spectrum {
    /// `n x r`, orthonormal columns.
    u: DMatrix<f64>,
    /// `r` non-negative eigenvalues of `XX'`.
    eigenvalues: DVector<f64>,
    /// Full eigendecomposition of `X'X` when the feature side was smaller.
    features: Option<(DMatrix<f64>, DVector<f64>)>,
}

impl Spectrum {
    fn new(x: &DMatrix<f64>) -> Self {
        let (n, f) = x.shape();
        if n <= f {
            let eig = SymmetricEigen::new(x * x.transpose());
            return Self {
                u: eig.eigenvectors,
                eigenvalues: eig.eigenvalues.map(|l| l.max(0.0)),
                features: None,
            };
        }
        let eig = SymmetricEigen::new(x.transpose() * x);
        let values = eig.eigenvalues.map(|l| l.max(0.0));
        let top = values.max();
        // Left singular vectors for the non-null directions only.
        let keep: Vec<usize> = (0..f).filter(|&j| values[j] > top * 1e-12).collect();
        let xv = x * &eig.eigenvectors;
        let u = DMatrix::from_fn(n, keep.len(), |i, c| xv[(i, keep[c])] / values[keep[c]].sqrt());
        Self {
            u,
            eigenvalues: DVector::from_iterator(keep.len(), keep.iter().map(|&j| values[j])),
            features: Some((eig.eigenvectors, values)),
        }
    }

    /// Mean squared LOO error over all examples and targets.
    fn loo_error(&self, centered: &DMatrix<f64>, projected: &DMatrix<f64>, alpha: f64) -> f64 {
        let n = centered.nrows();
        let shrink = self.eigenvalues.map(|l| l / (l + alpha));
        let fitted = &self.u * scale_rows(projected, &shrink);
        let mut total = 0.0;
        for i in 0..n {
            let mut h = 1.0 / n as f64;
            for j in 0..self.u.ncols() {
                h += self.u[(i, j)].powi(2) * shrink[j];
            }
            for c in 0..centered.ncols() {
                let r = (centered[(i, c)] - fitted[(i, c)]) / (1.0 - h);
                total += r * r;
            }
        }
        total / (n * centered.ncols()) as f64
    }

    /// `(X'X + aI)^-1 X' Y`, `F x C`.
    fn solve(&self, x: &DMatrix<f64>, centered: &DMatrix<f64>, alpha: f64) -> DMatrix<f64> {
        match &self.features {
            Some((v, values)) => {
                let inv = values.map(|l| 1.0 / (l + alpha));
                v * scale_rows(&(v.transpose() * (x.transpose() * centered)), &inv)
            }
            // X'(XX' + aI)^-1 Y; the null space of XX' is annihilated by X'.
            None => {
                let inv = self.eigenvalues.map(|l| 1.0 / (l + alpha));
                x.transpose() * (&self.u * scale_rows(&(self.u.transpose() * centered), &inv))
            }
        }
    }
}

/// `diag(d) * m`.
fn scale_rows(m: &DMatrix<f64>, d: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * d[i])
}

fn centered_targets(labels: &[usize], n_classes: usize) -> (DMatrix<f64>, Vec<f64>) {
    let y = ovr_targets(labels, n_classes);
    let means: Vec<f64> = (0..n_classes).map(|c| y.column(c).mean()).collect();
    let centered = DMatrix::from_fn(y.nrows(), n_classes, |i, c| y[(i, c)] - means[c]);
    (centered, means)
}

/// Closed-form mean squared leave-one-out error of each alpha on already
/// standardized features.
pub fn ridge_loo_errors(scaled: ArrayView2<'_, f64>, labels: &[usize], n_classes: usize, alphas: &[f64]) -> Vec<f64> {
    let x = to_dmatrix(scaled);
    let (centered, _) = centered_targets(labels, n_classes);
    let spectrum = Spectrum::new(&x);
    let projected = spectrum.u.transpose() * &centered;
    alphas
        .iter()
        .map(|&a| spectrum.loo_error(&centered, &projected, a))
        .collect()
}

/// Standardize, select alpha by exact LOOCV, refit on the full training set.
pub fn fit_ridge(
    features: ArrayView2<'_, f64>,
    labels: &[usize],
    n_classes: usize,
    alphas: &[f64],
) -> Result<RidgeModel> {
    check_finite(features)?;
    if labels.len() != features.nrows() {
        return Err(HydraError::LengthMismatch {
            expected: features.nrows(),
            found: labels.len(),
            line: None,
        });
    }
    if alphas.is_empty() || alphas.iter().any(|a| a.is_nan() || *a <= 0.0) {
        return Err(HydraError::InvalidConfig("alphas must be positive and non-empty".into()));
    }
    let scaler = ScalerStats::fit(features)?;
    let scaled = scaler.apply(features)?;
    let x = to_dmatrix(scaled.view());
    let (centered, target_means) = centered_targets(labels, n_classes);
    let spectrum = Spectrum::new(&x);
    let projected = spectrum.u.transpose() * &centered;

    let loo_errors: Vec<(f64, f64)> = alphas
        .iter()
        .map(|&a| (a, spectrum.loo_error(&centered, &projected, a)))
        .collect();
    let (alpha, _) = loo_errors
        .iter()
        .copied()
        .fold((alphas[0], f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });

    let w = spectrum.solve(&x, &centered, alpha);
    let column_means: Vec<f64> = (0..x.ncols()).map(|j| x.column(j).mean()).collect();
    let weights = Array2::from_shape_fn((n_classes, x.ncols()), |(c, j)| w[(j, c)]);
    let intercepts = (0..n_classes)
        .map(|c| target_means[c] - (0..x.ncols()).map(|j| column_means[j] * w[(j, c)]).sum::<f64>())
        .collect();
    Ok(RidgeModel {
        weights,
        intercepts,
        alpha,
        loo_errors,
        scaler,
    })
}
