//! Hyperparameters and the random kernel bank.
//!
//! Kernels have length 9, weights drawn from N(0, 1) and are normalized by
//! subtracting the mean and dividing by the sum of absolute values. Dilations
//! are the powers of two for which the dilated kernel still fits inside the
//! input series, and every convolution is zero-padded by `4 * dilation` on
//! each side so that output length equals input length. There are no biases.
//!
//! Weights come from a ChaCha20 stream seeded with [`HydraConfig::seed`],
//! converted to normals with the ziggurat sampler of `rand_distr`, in
//! dilation, group, kernel, tap order.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{HydraError, Result};

/// Number of taps in every kernel.
pub const KERNEL_LEN: usize = 9;

/// Half-width of a kernel in taps; padding is `HALF_SPAN * dilation`.
const HALF_SPAN: usize = KERNEL_LEN / 2;

/// How a channel (maximum or minimum response) is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountMode {
    Hard,
    Soft,
    Both,
    Off,
}

impl CountMode {
    pub fn soft(self) -> bool {
        matches!(self, CountMode::Soft | CountMode::Both)
    }

    pub fn hard(self) -> bool {
        matches!(self, CountMode::Hard | CountMode::Both)
    }

    /// Features produced per kernel by this mode.
    pub fn channels(self) -> usize {
        self.soft() as usize + self.hard() as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CountMode::Hard => "hard",
            CountMode::Soft => "soft",
            CountMode::Both => "both",
            CountMode::Off => "off",
        }
    }
}

impl fmt::Display for CountMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CountMode {
    type Err = HydraError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hard" => Ok(CountMode::Hard),
            "soft" => Ok(CountMode::Soft),
            "both" => Ok(CountMode::Both),
            "off" => Ok(CountMode::Off),
            other => Err(HydraError::InvalidConfig(format!(
                "unknown count mode {other:?} (expected hard, soft, both or off)"
            ))),
        }
    }
}

/// All hyperparameters of the transform.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct HydraConfig {
    /// Kernels per group.
    pub k: usize,
    /// Groups per dilation.
    pub g: usize,
    pub seed: u64,
    pub count_max: CountMode,
    pub count_min: CountMode,
    /// Only count a maximum when positive (minimum when negative).
    pub clip: bool,
    /// Run the upper half of the groups on the first-order difference.
    pub use_diff: bool,
    /// Series per transform batch.
    pub batch_size: usize,
}

impl Default for HydraConfig {
    fn default() -> Self {
        Self {
            k: 8,
            g: 64,
            seed: 0,
            count_max: CountMode::Soft,
            count_min: CountMode::Hard,
            clip: false,
            use_diff: true,
            batch_size: 256,
        }
    }
}

impl HydraConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.g == 0 {
            return Err(HydraError::InvalidConfig(format!(
                "k and g must be at least 1 (k={}, g={})",
                self.k, self.g
            )));
        }
        if self.use_diff && !self.g.is_multiple_of(2) {
            return Err(HydraError::InvalidConfig(format!(
                "g must be even when the first-order difference is used (g={})",
                self.g
            )));
        }
        if self.count_max == CountMode::Off && self.count_min == CountMode::Off {
            return Err(HydraError::InvalidConfig(
                "count_max and count_min cannot both be off".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(HydraError::InvalidConfig("batch_size must be at least 1".into()));
        }
        if self.k == 1 && self.count_max != CountMode::Off && self.count_min != CountMode::Off {
            log::warn!("with k = 1 the maximum and minimum channels count the same kernel");
        }
        Ok(())
    }

    /// Counting channels per kernel (1 to 4).
    pub fn channels(&self) -> usize {
        self.count_max.channels() + self.count_min.channels()
    }

    /// Index of the first group that operates on the difference.
    pub fn diff_group_cutoff(&self) -> usize {
        if self.use_diff {
            self.g / 2
        } else {
            self.g
        }
    }

    /// Short descriptor used to key experiment results, e.g.
    /// `k8_g64_max-soft_min-hard_diff_noclip`.
    pub fn descriptor(&self) -> String {
        format!(
            "k{}_g{}_max-{}_min-{}_{}_{}",
            self.k,
            self.g,
            self.count_max,
            self.count_min,
            if self.use_diff { "diff" } else { "nodiff" },
            if self.clip { "clip" } else { "noclip" },
        )
    }
}

/// Dilations `2^e` with `(9 - 1) * 2^e + 1 <= input_len`.
pub fn compute_dilations(input_len: usize) -> Result<Vec<usize>> {
    if input_len < KERNEL_LEN {
        return Err(HydraError::SeriesTooShort {
            length: input_len,
            minimum: KERNEL_LEN,
        });
    }
    let span = |d: usize| (KERNEL_LEN - 1) * d + 1;
    Ok(std::iter::successors(Some(1usize), |d| d.checked_mul(2))
        .take_while(|&d| span(d) <= input_len)
        .collect())
}

/// Center and scale so that the weights sum to 0 and their absolute values sum to 1.
pub fn normalize_weights(w: &[f64; KERNEL_LEN]) -> Result<[f64; KERNEL_LEN]> {
    let mean = w.iter().sum::<f64>() / KERNEL_LEN as f64;
    let centered = w.map(|v| v - mean);
    let abs_sum: f64 = centered.iter().map(|v| v.abs()).sum();
    if !abs_sum.is_finite() || abs_sum <= 0.0 {
        return Err(HydraError::DegenerateKernel);
    }
    Ok(centered.map(|v| v / abs_sum))
}

/// Normalized weights for every dilation, group and kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelBank {
    pub seed: u64,
    pub k: usize,
    pub g: usize,
    /// Series length the dilations were computed for.
    pub input_len: usize,
    pub dilations: Vec<usize>,
    pub paddings: Vec<usize>,
    /// Groups at or above this index act on the first-order difference.
    pub diff_group_cutoff: usize,
    /// Flat `d x g x k x 9` tensor, row-major.
    pub weights: Vec<f64>,
}

impl KernelBank {
    /// Draw a fresh bank for series of length `input_len`.
    pub fn generate(config: &HydraConfig, input_len: usize) -> Result<Self> {
        config.validate()?;
        let dilations = compute_dilations(input_len)?;
        let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
        let n_kernels = dilations.len() * config.g * config.k;
        let mut weights = Vec::with_capacity(n_kernels * KERNEL_LEN);
        for _ in 0..n_kernels {
            let kernel = loop {
                let raw: [f64; KERNEL_LEN] = std::array::from_fn(|_| rng.sample(StandardNormal));
                match normalize_weights(&raw) {
                    Ok(w) => break w,
                    Err(_) => continue,
                }
            };
            weights.extend_from_slice(&kernel);
        }
        Ok(Self {
            seed: config.seed,
            k: config.k,
            g: config.g,
            input_len,
            paddings: dilations.iter().map(|d| HALF_SPAN * d).collect(),
            dilations,
            diff_group_cutoff: config.diff_group_cutoff(),
            weights,
        })
    }

    pub fn n_dilations(&self) -> usize {
        self.dilations.len()
    }

    /// Kernels per dilation (`k * g`).
    pub fn kernels_per_dilation(&self) -> usize {
        self.k * self.g
    }

    pub fn n_kernels(&self) -> usize {
        self.n_dilations() * self.kernels_per_dilation()
    }

    /// The `k * 9` weights of one group, kernel-major.
    pub fn group(&self, dilation_index: usize, group: usize) -> &[f64] {
        let stride = self.k * KERNEL_LEN;
        let start = (dilation_index * self.g + group) * stride;
        &self.weights[start..start + stride]
    }

    pub fn kernel(&self, dilation_index: usize, group: usize, kernel: usize) -> &[f64] {
        &self.group(dilation_index, group)[kernel * KERNEL_LEN..(kernel + 1) * KERNEL_LEN]
    }

    /// Same bank with every weight negated.
    pub fn negated(&self) -> Self {
        Self {
            weights: self.weights.iter().map(|w| -w).collect(),
            ..self.clone()
        }
    }

    /// Check the bank was built for `config` and that its shape is coherent.
    pub fn check_compatible(&self, config: &HydraConfig) -> Result<()> {
        if self.k != config.k || self.g != config.g {
            return Err(HydraError::BankMismatch(format!(
                "bank has k={}, g={} but config has k={}, g={}",
                self.k, self.g, config.k, config.g
            )));
        }
        if self.diff_group_cutoff != config.diff_group_cutoff() {
            return Err(HydraError::BankMismatch(
                "bank and config disagree on the first-order difference".into(),
            ));
        }
        self.check_shape()
    }

    pub(crate) fn check_shape(&self) -> Result<()> {
        let expected = compute_dilations(self.input_len)?;
        if self.dilations != expected
            || self.paddings.len() != self.dilations.len()
            || self.weights.len() != self.n_kernels() * KERNEL_LEN
            || self.diff_group_cutoff > self.g
        {
            return Err(HydraError::BankMismatch("kernel bank has inconsistent shape".into()));
        }
        Ok(())
    }
}
