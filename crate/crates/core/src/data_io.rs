//! Dataset loading, validation and stratified resampling.
//!
//! Two on-disk formats are understood:
//!
//! - `.ts`: metadata lines start with `@`, comments with `#` (or `%`), and
//!   each data line is `v1,v2,...,vL:label`.
//! - TSV: one series per row, `label\tv1\t...\tvL`.
//!
//! A label of `?` marks an unlabeled series. Missing values are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::kernel_bank::KERNEL_LEN;
use crate::{HydraError, Result};

/// Marker for an unlabeled series.
pub const UNLABELED: &str = "?";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Ts,
    Tsv,
}

impl Format {
    /// Guess the format from the file extension (`.ts` or `.tsv`/`.txt`).
    pub fn from_path(path: &Path) -> Option<Format> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "ts" => Some(Format::Ts),
            "tsv" | "txt" => Some(Format::Tsv),
            _ => None,
        }
    }
}

/// Parsed rows before label validation. Labels are optional so that
/// unlabeled prediction inputs go through the same parser.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub name: String,
    pub series: Array2<f64>,
    pub labels: Vec<Option<String>>,
}

impl RawDataset {
    pub fn is_labeled(&self) -> bool {
        self.labels.iter().all(Option::is_some)
    }

    pub fn series_len(&self) -> usize {
        self.series.ncols()
    }
}

/// Fixed-length labeled series with dense class indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesDataset {
    pub name: String,
    pub series: Array2<f64>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
}

impl TimeSeriesDataset {
    /// Build a dataset, checking every invariant: `L >= 9`, finite values,
    /// labels in `[0, C)` with `C >= 2`.
    pub fn new(
        name: impl Into<String>,
        series: Array2<f64>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if class_names.len() < 2 {
            return Err(HydraError::DegenerateLabels(class_names.len()));
        }
        if labels.len() != series.nrows() {
            return Err(HydraError::LengthMismatch {
                expected: series.nrows(),
                found: labels.len(),
                line: None,
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(HydraError::UnknownLabel(bad.to_string()));
        }
        if series.ncols() < KERNEL_LEN {
            return Err(HydraError::SeriesTooShort {
                length: series.ncols(),
                minimum: KERNEL_LEN,
            });
        }
        if let Some(row) = series
            .axis_iter(Axis(0))
            .position(|r| r.iter().any(|v| !v.is_finite()))
        {
            return Err(HydraError::NonFiniteInput(format!("series {row}")));
        }
        Ok(Self {
            name: name.into(),
            series,
            labels,
            class_names,
        })
    }

    /// Map string labels onto `class_names`. Unlabeled rows and labels
    /// outside the class list are errors.
    pub fn from_raw(raw: RawDataset, class_names: &[String]) -> Result<Self> {
        let index: BTreeMap<&str, usize> = class_names
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();
        let labels = raw
            .labels
            .iter()
            .enumerate()
            .map(|(row, l)| match l {
                Some(l) => index
                    .get(l.as_str())
                    .copied()
                    .ok_or_else(|| HydraError::UnknownLabel(l.clone())),
                None => Err(HydraError::Parse {
                    line: row + 1,
                    message: "series has no label".into(),
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(raw.name, raw.series, labels, class_names.to_vec())
    }

    pub fn n_series(&self) -> usize {
        self.series.nrows()
    }

    pub fn series_len(&self) -> usize {
        self.series.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Subset of rows, keeping the class list.
    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            name: self.name.clone(),
            series: self.series.select(Axis(0), rows),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            class_names: self.class_names.clone(),
        }
    }

    /// Copy with each series z-normalized independently.
    pub fn z_normalized(&self) -> Self {
        let mut out = self.clone();
        z_normalize_rows(&mut out.series);
        out
    }
}

/// Per-series z-normalization. Constant series are only centered.
pub fn z_normalize_rows(series: &mut Array2<f64>) {
    for mut row in series.axis_iter_mut(Axis(0)) {
        let n = row.len() as f64;
        let mean = row.sum() / n;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        let scale = if std > 1e-8 { std } else { 1.0 };
        row.mapv_inplace(|v| (v - mean) / scale);
    }
}

/// Sorted list of distinct labels. Labels sort numerically when every label
/// parses as a number, lexicographically otherwise.
pub fn class_names_for<'a>(labels: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    let mut names: Vec<String> = labels
        .into_iter()
        .filter(|l| *l != UNLABELED)
        .map(str::to_owned)
        .collect();
    names.sort();
    names.dedup();
    let numeric: Option<Vec<f64>> = names.iter().map(|n| n.parse::<f64>().ok()).collect();
    if let Some(values) = numeric {
        let mut paired: Vec<(f64, String)> = values.into_iter().zip(names).collect();
        paired.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        names = paired.into_iter().map(|(_, n)| n).collect();
    }
    names
}

fn parse_value(token: &str, line: usize) -> Result<f64> {
    let token = token.trim();
    let v: f64 = token.parse().map_err(|_| HydraError::Parse {
        line,
        message: format!("cannot parse value {token:?}"),
    })?;
    if !v.is_finite() {
        return Err(HydraError::NonFiniteInput(format!(
            "value {token:?} on line {line}"
        )));
    }
    Ok(v)
}

fn parse_label(token: &str) -> Option<String> {
    let token = token.trim();
    (token != UNLABELED).then(|| token.to_owned())
}

fn assemble(
    name: &str,
    rows: Vec<(usize, Vec<f64>, Option<String>)>,
) -> Result<RawDataset> {
    let Some(first) = rows.first() else {
        return Err(HydraError::Parse {
            line: 0,
            message: "no data rows".into(),
        });
    };
    let len = first.1.len();
    let mut flat = Vec::with_capacity(rows.len() * len);
    let mut labels = Vec::with_capacity(rows.len());
    for (line, values, label) in &rows {
        if values.len() != len {
            return Err(HydraError::LengthMismatch {
                expected: len,
                found: values.len(),
                line: Some(*line),
            });
        }
        flat.extend_from_slice(values);
        labels.push(label.clone());
    }
    let series = Array2::from_shape_vec((rows.len(), len), flat)
        .expect("row lengths checked above");
    Ok(RawDataset {
        name: name.to_owned(),
        series,
        labels,
    })
}

fn is_comment(line: &str) -> bool {
    line.starts_with('#') || line.starts_with('%')
}

/// Parse the contents of a `.ts` file.
pub fn parse_ts(text: &str, name: &str) -> Result<RawDataset> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() || is_comment(line) || line.starts_with('@') {
            continue;
        }
        let (values, label) = match line.rsplit_once(':') {
            Some((values, label)) => (values, parse_label(label)),
            None => (line, None),
        };
        if values.contains(':') {
            return Err(HydraError::Parse {
                line: lineno,
                message: "multivariate series are not supported".into(),
            });
        }
        let values = values
            .split(',')
            .map(|t| parse_value(t, lineno))
            .collect::<Result<Vec<_>>>()?;
        rows.push((lineno, values, label));
    }
    assemble(name, rows)
}

/// Parse the contents of a TSV file (`label\tv1\t...\tvL`).
pub fn parse_tsv(text: &str, name: &str) -> Result<RawDataset> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.trim_end_matches(['\r', '\n']).split('\t');
        let label = parse_label(fields.next().unwrap_or_default());
        let values = fields
            .map(|t| parse_value(t, lineno))
            .collect::<Result<Vec<_>>>()?;
        rows.push((lineno, values, label));
    }
    assemble(name, rows)
}

fn dataset_name(path: &Path) -> String {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset");
    stem.trim_end_matches("_TRAIN")
        .trim_end_matches("_TEST")
        .to_owned()
}

fn resolve_format(path: &Path, format: Option<Format>) -> Result<Format> {
    format.or_else(|| Format::from_path(path)).ok_or_else(|| {
        HydraError::InvalidConfig(format!("cannot infer dataset format of {path:?}"))
    })
}

/// Read a file into a [`RawDataset`] without validating labels.
pub fn read_raw(path: &Path, format: Option<Format>) -> Result<RawDataset> {
    let format = resolve_format(path, format)?;
    let text = fs::read_to_string(path)?;
    let name = dataset_name(path);
    match format {
        Format::Ts => parse_ts(&text, &name),
        Format::Tsv => parse_tsv(&text, &name),
    }
}

fn raw_class_names(raws: &[&RawDataset]) -> Vec<String> {
    class_names_for(
        raws.iter()
            .flat_map(|r| r.labels.iter().flatten().map(String::as_str)),
    )
}

/// Load and validate a single labeled dataset.
pub fn load_dataset(path: &Path, format: Option<Format>) -> Result<TimeSeriesDataset> {
    let raw = read_raw(path, format)?;
    let classes = raw_class_names(&[&raw]);
    TimeSeriesDataset::from_raw(raw, &classes)
}

/// Load a train/test pair sharing one class mapping built from both files.
pub fn load_split(
    train_path: &Path,
    test_path: &Path,
    format: Option<Format>,
) -> Result<(TimeSeriesDataset, TimeSeriesDataset)> {
    let train = read_raw(train_path, format)?;
    let test = read_raw(test_path, format)?;
    if train.series_len() != test.series_len() {
        return Err(HydraError::LengthMismatch {
            expected: train.series_len(),
            found: test.series_len(),
            line: None,
        });
    }
    let classes = raw_class_names(&[&train, &test]);
    Ok((
        TimeSeriesDataset::from_raw(train, &classes)?,
        TimeSeriesDataset::from_raw(test, &classes)?,
    ))
}

fn write_row(out: &mut String, row: ArrayView1<'_, f64>, sep: char) {
    for (j, v) in row.iter().enumerate() {
        if j > 0 {
            out.push(sep);
        }
        // `{}` prints the shortest representation that round-trips.
        write!(out, "{v}").unwrap();
    }
}

/// Render a dataset in the given format.
pub fn render_dataset(ds: &TimeSeriesDataset, format: Format) -> String {
    let mut out = String::new();
    match format {
        Format::Ts => {
            writeln!(out, "@problemName {}", ds.name).unwrap();
            out.push_str("@timeStamps false\n@missing false\n@univariate true\n");
            writeln!(out, "@equalLength true\n@seriesLength {}", ds.series_len()).unwrap();
            writeln!(out, "@classLabel true {}", ds.class_names.join(" ")).unwrap();
            out.push_str("@data\n");
            for (row, &label) in ds.series.axis_iter(Axis(0)).zip(&ds.labels) {
                write_row(&mut out, row, ',');
                writeln!(out, ":{}", ds.class_names[label]).unwrap();
            }
        }
        Format::Tsv => {
            for (row, &label) in ds.series.axis_iter(Axis(0)).zip(&ds.labels) {
                out.push_str(&ds.class_names[label]);
                out.push('\t');
                write_row(&mut out, row, '\t');
                out.push('\n');
            }
        }
    }
    out
}

pub fn write_dataset(ds: &TimeSeriesDataset, path: &Path, format: Format) -> Result<()> {
    fs::write(path, render_dataset(ds, format))?;
    Ok(())
}

/// Identifies one stratified reshuffle of a train/test split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResamplePlan {
    pub seed: u64,
    pub resample_id: u64,
}

/// Pool train and test, then redraw a split of the original sizes whose
/// per-class train counts match the original train split.
///
/// `resample_id == 0` returns the original split unchanged. Otherwise each
/// class's pooled rows are shuffled with a ChaCha20 stream keyed by
/// `(seed, resample_id)` and the first `train_count[c]` go to train. Rows
/// keep their pooled order within each output split.
pub fn stratified_resample(
    train: &TimeSeriesDataset,
    test: &TimeSeriesDataset,
    plan: ResamplePlan,
) -> Result<(TimeSeriesDataset, TimeSeriesDataset)> {
    if train.series_len() != test.series_len() {
        return Err(HydraError::LengthMismatch {
            expected: train.series_len(),
            found: test.series_len(),
            line: None,
        });
    }
    if train.class_names != test.class_names {
        return Err(HydraError::BankMismatch(
            "train and test use different class lists".into(),
        ));
    }
    if plan.resample_id == 0 {
        return Ok((train.clone(), test.clone()));
    }

    let pooled = TimeSeriesDataset {
        name: train.name.clone(),
        series: ndarray::concatenate(Axis(0), &[train.series.view(), test.series.view()])
            .expect("equal series lengths"),
        labels: train.labels.iter().chain(&test.labels).copied().collect(),
        class_names: train.class_names.clone(),
    };

    let mut rng = ChaCha20Rng::seed_from_u64(plan.seed);
    rng.set_stream(plan.resample_id);

    let train_counts = train.class_counts();
    let mut in_train = vec![false; pooled.n_series()];
    for (class, &wanted) in train_counts.iter().enumerate() {
        let mut members: Vec<usize> = pooled
            .labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == class).then_some(i))
            .collect();
        members.shuffle(&mut rng);
        for &i in &members[..wanted] {
            in_train[i] = true;
        }
    }
    let (train_rows, test_rows): (Vec<usize>, Vec<usize>) =
        (0..pooled.n_series()).partition(|&i| in_train[i]);
    Ok((pooled.select(&train_rows), pooled.select(&test_rows)))
}
