//! The competing-kernel transform.
//!
//! For every series, dilation and group, each of the group's `k` kernels is
//! convolved with the (zero-padded) series. At every timepoint the kernel with
//! the largest response wins the maximum channel and the kernel with the
//! smallest response wins the minimum channel. A win adds 1 to the kernel's
//! hard count and/or the winning response to its soft count. Groups at or
//! above the bank's `diff_group_cutoff` see the first-order difference.
//!
//! Features are laid out dilation-major, then group, then channel
//! (`maxsoft`, `maxhard`, `minsoft`, `minhard`, skipping disabled ones), then
//! kernel.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::container::Manifest;
use crate::data_io::TimeSeriesDataset;
use crate::kernel_bank::{CountMode, HydraConfig, KernelBank, KERNEL_LEN};
use crate::{HydraError, Result};

/// One counting channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    MaxSoft,
    MaxHard,
    MinSoft,
    MinHard,
}

impl Channel {
    pub fn name(self) -> &'static str {
        match self {
            Channel::MaxSoft => "maxsoft",
            Channel::MaxHard => "maxhard",
            Channel::MinSoft => "minsoft",
            Channel::MinHard => "minhard",
        }
    }

    pub fn is_hard(self) -> bool {
        matches!(self, Channel::MaxHard | Channel::MinHard)
    }

    pub fn is_max(self) -> bool {
        matches!(self, Channel::MaxSoft | Channel::MaxHard)
    }

    /// Enabled channels in canonical order.
    pub fn enabled(count_max: CountMode, count_min: CountMode) -> Vec<Channel> {
        let mut out = Vec::with_capacity(4);
        if count_max.soft() {
            out.push(Channel::MaxSoft);
        }
        if count_max.hard() {
            out.push(Channel::MaxHard);
        }
        if count_min.soft() {
            out.push(Channel::MinSoft);
        }
        if count_min.hard() {
            out.push(Channel::MinHard);
        }
        out
    }
}

/// Describes what each feature column means.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub dilations: Vec<usize>,
    pub g: usize,
    pub k: usize,
    pub channels: Vec<Channel>,
}

impl FeatureLayout {
    pub fn new(bank: &KernelBank, config: &HydraConfig) -> Self {
        Self {
            dilations: bank.dilations.clone(),
            g: bank.g,
            k: bank.k,
            channels: Channel::enabled(config.count_max, config.count_min),
        }
    }

    pub fn n_features(&self) -> usize {
        self.dilations.len() * self.g * self.channels.len() * self.k
    }

    /// Width of one (dilation, group) block.
    pub fn group_width(&self) -> usize {
        self.channels.len() * self.k
    }

    pub fn index(&self, dilation_index: usize, group: usize, channel: usize, kernel: usize) -> usize {
        ((dilation_index * self.g + group) * self.channels.len() + channel) * self.k + kernel
    }

    pub fn channel_index(&self, channel: Channel) -> Option<usize> {
        self.channels.iter().position(|&c| c == channel)
    }

    /// Names of the form `d{dilation}_g{group}_{channel}_{kernel}`.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.n_features());
        for &d in &self.dilations {
            for g in 0..self.g {
                for c in &self.channels {
                    for k in 0..self.k {
                        names.push(format!("d{d}_g{g}_{}_{k}", c.name()));
                    }
                }
            }
        }
        names
    }
}

/// `n x F` transform output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub values: Array2<f64>,
    pub layout: FeatureLayout,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }

    /// All values of one channel, shaped `n x (d * g * k)` in layout order.
    pub fn channel(&self, channel: Channel) -> Option<Array2<f64>> {
        let c = self.layout.channel_index(channel)?;
        let blocks = self.layout.dilations.len() * self.layout.g;
        let k = self.layout.k;
        let width = self.layout.group_width();
        Some(Array2::from_shape_fn((self.n_rows(), blocks * k), |(i, j)| {
            let (block, kernel) = (j / k, j % k);
            self.values[[i, block * width + c * k + kernel]]
        }))
    }

    pub fn to_csv(&self, manifest: Option<&Manifest>) -> String {
        let mut out = String::new();
        if let Some(m) = manifest {
            out.push_str(&m.header_lines());
        }
        out.push_str(&self.layout.feature_names().join(","));
        out.push('\n');
        for row in self.values.axis_iter(Axis(0)) {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                write!(out, "{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path, manifest: Option<&Manifest>) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        file.write_all(self.to_csv(manifest).as_bytes())?;
        file.flush()?;
        Ok(())
    }
}

/// `y[t] = x[t + 1] - x[t]`.
pub fn first_difference(x: &[f64]) -> Result<Vec<f64>> {
    if x.len() < 2 {
        return Err(HydraError::SeriesTooShort {
            length: x.len(),
            minimum: 2,
        });
    }
    Ok(x.windows(2).map(|w| w[1] - w[0]).collect())
}

fn pad_into(x: &[f64], pad: usize, buf: &mut Vec<f64>) {
    buf.clear();
    buf.resize(pad, 0.0);
    buf.extend_from_slice(x);
    buf.resize(x.len() + 2 * pad, 0.0);
}

/// Cross-correlate a padded series with one kernel; `out.len()` is the
/// output length and `padded.len() == out.len() + 8 * dilation`.
#[inline]
fn correlate_padded(padded: &[f64], weights: &[f64], dilation: usize, out: &mut [f64]) {
    let len = out.len();
    out.fill(0.0);
    for (j, &w) in weights.iter().enumerate() {
        let window = &padded[j * dilation..j * dilation + len];
        for (o, &v) in out.iter_mut().zip(window) {
            *o += w * v;
        }
    }
}

/// Dilated cross-correlation with `4 * dilation` zeros on each side; the
/// output has the same length as `x`.
pub fn convolve_dilated(x: &[f64], weights: &[f64; KERNEL_LEN], dilation: usize) -> Vec<f64> {
    assert!(dilation >= 1, "dilation must be positive");
    let mut padded = Vec::new();
    pad_into(x, (KERNEL_LEN / 2) * dilation, &mut padded);
    let mut out = vec![0.0; x.len()];
    correlate_padded(&padded, weights, dilation, &mut out);
    out
}

/// Counting options extracted from a [`HydraConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Counting {
    pub count_max: CountMode,
    pub count_min: CountMode,
    pub clip: bool,
}

impl From<&HydraConfig> for Counting {
    fn from(c: &HydraConfig) -> Self {
        Self {
            count_max: c.count_max,
            count_min: c.count_min,
            clip: c.clip,
        }
    }
}

impl Counting {
    fn channels(&self) -> usize {
        self.count_max.channels() + self.count_min.channels()
    }
}

/// Count one group's responses (`k` rows of `len` values, row-major).
///
/// Returns `channels * k` values in canonical channel order. Ties go to the
/// lowest kernel index.
pub fn count_group(responses: &[f64], k: usize, counting: Counting) -> Vec<f64> {
    assert!(k >= 1 && responses.len().is_multiple_of(k), "responses must be k rows");
    let mut out = vec![0.0; counting.channels() * k];
    count_group_into(responses, k, responses.len() / k, counting, &mut out);
    out
}

fn count_group_into(responses: &[f64], k: usize, len: usize, counting: Counting, out: &mut [f64]) {
    let mut slot = 0;
    let mut next_slot = |enabled: bool| {
        enabled.then(|| {
            let s = slot;
            slot += k;
            s
        })
    };
    let max_soft = next_slot(counting.count_max.soft());
    let max_hard = next_slot(counting.count_max.hard());
    let min_soft = next_slot(counting.count_min.soft());
    let min_hard = next_slot(counting.count_min.hard());
    let want_max = counting.count_max != CountMode::Off;
    let want_min = counting.count_min != CountMode::Off;

    for t in 0..len {
        let mut hi = responses[t];
        let mut hi_at = 0;
        let mut lo = hi;
        let mut lo_at = 0;
        for kernel in 1..k {
            let v = responses[kernel * len + t];
            if v > hi {
                hi = v;
                hi_at = kernel;
            }
            if v < lo {
                lo = v;
                lo_at = kernel;
            }
        }
        if want_max && (!counting.clip || hi > 0.0) {
            if let Some(s) = max_soft {
                out[s + hi_at] += hi;
            }
            if let Some(s) = max_hard {
                out[s + hi_at] += 1.0;
            }
        }
        if want_min && (!counting.clip || lo < 0.0) {
            if let Some(s) = min_soft {
                out[s + lo_at] += lo;
            }
            if let Some(s) = min_hard {
                out[s + lo_at] += 1.0;
            }
        }
    }
}

#[derive(Default)]
struct Scratch {
    padded: Vec<f64>,
    padded_diff: Vec<f64>,
    responses: Vec<f64>,
}

fn transform_series(
    x: &[f64],
    bank: &KernelBank,
    counting: Counting,
    layout: &FeatureLayout,
    scratch: &mut Scratch,
    out: &mut [f64],
) {
    let len = x.len();
    let diff = if bank.diff_group_cutoff < bank.g {
        first_difference(x).expect("series length checked against bank")
    } else {
        Vec::new()
    };
    let width = layout.group_width();
    for (di, (&dilation, &pad)) in bank.dilations.iter().zip(&bank.paddings).enumerate() {
        pad_into(x, pad, &mut scratch.padded);
        if !diff.is_empty() {
            pad_into(&diff, pad, &mut scratch.padded_diff);
        }
        for group in 0..bank.g {
            let (source, out_len) = if group < bank.diff_group_cutoff {
                (&scratch.padded, len)
            } else {
                (&scratch.padded_diff, len - 1)
            };
            scratch.responses.resize(bank.k * out_len, 0.0);
            let weights = bank.group(di, group);
            for (kernel, resp) in scratch.responses.chunks_exact_mut(out_len).enumerate() {
                let w = &weights[kernel * KERNEL_LEN..(kernel + 1) * KERNEL_LEN];
                correlate_padded(source, w, dilation, resp);
            }
            let start = layout.index(di, group, 0, 0);
            count_group_into(
                &scratch.responses,
                bank.k,
                out_len,
                counting,
                &mut out[start..start + width],
            );
        }
    }
}

/// Transform `n x L` series. Rows are processed in batches of
/// `config.batch_size`, in parallel within a batch on the current rayon
/// pool; the result does not depend on either.
pub fn transform(series: ArrayView2<'_, f64>, bank: &KernelBank, config: &HydraConfig) -> Result<FeatureMatrix> {
    config.validate()?;
    bank.check_compatible(config)?;
    if series.ncols() != bank.input_len {
        return Err(HydraError::BankMismatch(format!(
            "series length {} but the kernel bank was generated for length {}",
            series.ncols(),
            bank.input_len
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(HydraError::NonFiniteInput("transform input".into()));
    }
    let layout = FeatureLayout::new(bank, config);
    let counting = Counting::from(config);
    let n_features = layout.n_features();
    let mut values = Array2::<f64>::zeros((series.nrows(), n_features));

    let rows: Vec<Vec<f64>> = series
        .axis_iter(Axis(0))
        .map(|r| r.to_vec())
        .collect();
    for (batch_in, mut batch_out) in rows
        .chunks(config.batch_size)
        .zip(values.axis_chunks_iter_mut(Axis(0), config.batch_size))
    {
        let computed: Vec<Vec<f64>> = batch_in
            .par_iter()
            .map_init(Scratch::default, |scratch, x| {
                let mut out = vec![0.0; n_features];
                transform_series(x, bank, counting, &layout, scratch, &mut out);
                out
            })
            .collect();
        for (mut dst, src) in batch_out.axis_iter_mut(Axis(0)).zip(computed) {
            dst.assign(&ndarray::ArrayView1::from(&src));
        }
    }
    Ok(FeatureMatrix { values, layout })
}

pub fn transform_dataset(data: &TimeSeriesDataset, bank: &KernelBank, config: &HydraConfig) -> Result<FeatureMatrix> {
    transform(data.series.view(), bank, config)
}
