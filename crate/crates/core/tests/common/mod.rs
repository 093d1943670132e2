#![allow(dead_code)]

use std::path::PathBuf;

use hydra_core::data_io::TimeSeriesDataset;
use hydra_core::kernel_bank::KERNEL_LEN;
use hydra_core::{CountMode, HydraConfig};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Random walk plus white noise, so neighbouring samples are correlated.
pub fn random_series(rng: &mut ChaCha20Rng, n: usize, len: usize) -> Array2<f64> {
    let mut out = Array2::zeros((n, len));
    for i in 0..n {
        let mut level = 0.0;
        for t in 0..len {
            level += rng.sample::<f64, _>(StandardNormal);
            out[[i, t]] = level + 0.5 * rng.sample::<f64, _>(StandardNormal);
        }
    }
    out
}

pub const COUNT_MODES: [CountMode; 4] = [CountMode::Hard, CountMode::Soft, CountMode::Both, CountMode::Off];

/// A configuration drawn from the sensitivity lattice: `(k, g)` pairs,
/// counting modes, clipping and the difference.
pub fn random_config(rng: &mut ChaCha20Rng) -> HydraConfig {
    const KG: [(usize, usize); 9] = [(1, 1), (1, 4), (2, 2), (2, 8), (4, 4), (8, 2), (8, 4), (16, 1), (3, 6)];
    let (k, g) = KG[rng.random_range(0..KG.len())];
    let (count_max, count_min) = loop {
        let pair = (COUNT_MODES[rng.random_range(0..4)], COUNT_MODES[rng.random_range(0..4)]);
        if pair != (CountMode::Off, CountMode::Off) {
            break pair;
        }
    };
    HydraConfig {
        k,
        g,
        seed: rng.random(),
        count_max,
        count_min,
        clip: rng.random_bool(0.5),
        use_diff: g % 2 == 0 && rng.random_bool(0.5),
        batch_size: rng.random_range(1..8),
    }
}

/// Zero-padded dilated correlation written directly from the definition.
pub fn naive_response(x: &[f64], w: &[f64], dilation: usize) -> Vec<f64> {
    assert_eq!(w.len(), KERNEL_LEN);
    let pad = 4 * dilation;
    let mut padded = vec![0.0; pad];
    padded.extend_from_slice(x);
    padded.extend(std::iter::repeat_n(0.0, pad));
    (0..x.len())
        .map(|t| (0..KERNEL_LEN).map(|j| w[j] * padded[t + j * dilation]).sum())
        .collect()
}

/// Two classes: a noisy sine, and the same sine with a transient square
/// pulse at a random position.
pub fn sine_pulse(n_per_class: usize, len: usize, seed: u64) -> TimeSeriesDataset {
    let mut rng = rng(seed);
    let n = 2 * n_per_class;
    let mut series = Array2::zeros((n, len));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % 2;
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        let start = rng.random_range(0..len - 15);
        for t in 0..len {
            let mut v = (std::f64::consts::TAU * t as f64 / 25.0 + phase).sin();
            v += 0.2 * rng.sample::<f64, _>(StandardNormal);
            if class == 1 && (start..start + 12).contains(&t) {
                v += 1.5;
            }
            series[[i, t]] = v;
        }
        labels.push(class);
    }
    TimeSeriesDataset::new("SinePulse", series, labels, vec!["sine".into(), "pulse".into()]).unwrap()
}

pub fn ucr_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/ucr")
}

pub const UCR_DATASETS: [&str; 6] = [
    "ArrowHead",
    "GunPoint",
    "ItalyPowerDemand",
    "OSULeaf",
    "PickupGestureWiimoteZ",
    "UnitTest",
];
