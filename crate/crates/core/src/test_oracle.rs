//! Naive reference transform used to check the fast path.
//!
//! Everything here is written with explicit index loops and shares no
//! convolution or counting code with [`crate::transform`]. It is slow and
//! meant for small inputs only.

#![allow(clippy::needless_range_loop)]

use ndarray::{Array2, ArrayView2};

use crate::kernel_bank::{CountMode, HydraConfig, KernelBank};
use crate::transform::{Channel, FeatureLayout, FeatureMatrix};
use crate::{HydraError, Result};

/// Response of one kernel at time `t`, treating out-of-range samples as zero.
fn response_at(source: &[f64], weights: &[f64], dilation: usize, t: usize) -> f64 {
    let mut total = 0.0;
    for j in 0..weights.len() {
        let offset = (j as isize - 4) * dilation as isize;
        let idx = t as isize + offset;
        if idx >= 0 && idx < source.len() as isize {
            total += weights[j] * source[idx as usize];
        }
    }
    total
}

/// Features of one group as `[channel][kernel]`, channels in canonical order.
fn oracle_group(responses: &[Vec<f64>], config: &HydraConfig) -> Vec<Vec<f64>> {
    let k = responses.len();
    let len = responses[0].len();
    let mut max_soft = vec![0.0; k];
    let mut max_hard = vec![0.0; k];
    let mut min_soft = vec![0.0; k];
    let mut min_hard = vec![0.0; k];
    for t in 0..len {
        let mut best = 0;
        let mut worst = 0;
        for kernel in 0..k {
            if responses[kernel][t] > responses[best][t] {
                best = kernel;
            }
            if responses[kernel][t] < responses[worst][t] {
                worst = kernel;
            }
        }
        let top = responses[best][t];
        let bottom = responses[worst][t];
        if !config.clip || top > 0.0 {
            max_soft[best] += top;
            max_hard[best] += 1.0;
        }
        if !config.clip || bottom < 0.0 {
            min_soft[worst] += bottom;
            min_hard[worst] += 1.0;
        }
    }
    let mut out = Vec::new();
    if matches!(config.count_max, CountMode::Soft | CountMode::Both) {
        out.push(max_soft);
    }
    if matches!(config.count_max, CountMode::Hard | CountMode::Both) {
        out.push(max_hard);
    }
    if matches!(config.count_min, CountMode::Soft | CountMode::Both) {
        out.push(min_soft);
    }
    if matches!(config.count_min, CountMode::Hard | CountMode::Both) {
        out.push(min_hard);
    }
    out
}

/// Reference transform with the same contract as [`crate::transform::transform`].
pub fn oracle_transform(
    series: ArrayView2<'_, f64>,
    bank: &KernelBank,
    config: &HydraConfig,
) -> Result<FeatureMatrix> {
    config.validate()?;
    bank.check_compatible(config)?;
    if series.ncols() != bank.input_len {
        return Err(HydraError::BankMismatch(format!(
            "series length {} vs bank length {}",
            series.ncols(),
            bank.input_len
        )));
    }
    let len = series.ncols();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for i in 0..series.nrows() {
        let original: Vec<f64> = (0..len).map(|t| series[[i, t]]).collect();
        let mut difference = Vec::new();
        for t in 0..len - 1 {
            difference.push(original[t + 1] - original[t]);
        }
        let mut row = Vec::new();
        for (d, &dilation) in bank.dilations.iter().enumerate() {
            for group in 0..bank.g {
                let source = if group >= bank.diff_group_cutoff {
                    &difference
                } else {
                    &original
                };
                let mut responses = Vec::new();
                for kernel in 0..bank.k {
                    let base = ((d * bank.g + group) * bank.k + kernel) * 9;
                    let weights = &bank.weights[base..base + 9];
                    let resp: Vec<f64> = (0..source.len())
                        .map(|t| response_at(source, weights, dilation, t))
                        .collect();
                    responses.push(resp);
                }
                for channel in oracle_group(&responses, config) {
                    row.extend(channel);
                }
            }
        }
        rows.push(row);
    }
    let width = rows.first().map_or(0, Vec::len);
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(FeatureMatrix {
        values: Array2::from_shape_vec((series.nrows(), width), flat)
            .expect("rows have equal width"),
        layout: FeatureLayout {
            dilations: bank.dilations.clone(),
            g: bank.g,
            k: bank.k,
            channels: Channel::enabled(config.count_max, config.count_min),
        },
    })
}

/// Largest `|a - b| / max(|a|, |b|, 1)` over two equally shaped matrices.
pub fn max_relative_deviation(a: &FeatureMatrix, b: &FeatureMatrix) -> f64 {
    assert_eq!(a.values.dim(), b.values.dim(), "feature shapes differ");
    a.values
        .iter()
        .zip(b.values.iter())
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0))
        .fold(0.0, f64::max)
}
