//! Resampled accuracy experiments, sensitivity grids and mean-rank tables.
//!
//! Results are keyed by `(dataset, resample, variant)` and persisted to an
//! append-only CSV so that interrupted sweeps can resume. When a run
//! finishes, the file is rewritten in key order, so the final contents do not
//! depend on execution order or on how often the run was interrupted.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::accuracy;
use crate::container::Manifest;
use crate::data_io::{load_split, stratified_resample, Format, ResamplePlan, TimeSeriesDataset};
use crate::kernel_bank::CountMode;
use crate::pipeline::{FitOptions, HydraModel};
use crate::{HydraError, Result};

pub const RESULTS_SCHEMA_VERSION: u32 = 1;
pub const RESULTS_HEADER: &str = "dataset,resample,variant,accuracy,transform_s,train_s,test_s";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub dataset: String,
    pub resample_id: u64,
    pub variant: String,
    pub accuracy: f64,
    pub transform_seconds: f64,
    pub train_seconds: f64,
    pub test_seconds: f64,
}

pub type ResultKey = (String, u64, String);

impl ExperimentResult {
    pub fn key(&self) -> ResultKey {
        (self.dataset.clone(), self.resample_id, self.variant.clone())
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.dataset,
            self.resample_id,
            self.variant,
            self.accuracy,
            self.transform_seconds,
            self.train_seconds,
            self.test_seconds
        )
    }

    pub fn from_csv_row(line: &str, lineno: usize) -> Result<Self> {
        let fields: Vec<&str> = line.split(',').collect();
        let bad = |message: String| HydraError::Parse { line: lineno, message };
        if fields.len() != 7 {
            return Err(bad(format!("expected 7 fields, found {}", fields.len())));
        }
        let num = |i: usize| -> Result<f64> {
            fields[i]
                .parse()
                .map_err(|_| bad(format!("bad number {:?}", fields[i])))
        };
        Ok(Self {
            dataset: fields[0].to_owned(),
            resample_id: fields[1]
                .parse()
                .map_err(|_| bad(format!("bad resample id {:?}", fields[1])))?,
            variant: fields[2].to_owned(),
            accuracy: num(3)?,
            transform_seconds: num(4)?,
            train_seconds: num(5)?,
            test_seconds: num(6)?,
        })
    }
}

/// A named train/test pair on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSpec {
    pub name: String,
    pub train: PathBuf,
    pub test: PathBuf,
}

impl DatasetSpec {
    /// `{root}/{name}/{name}_TRAIN.ts` (or `.tsv`) and the matching test file.
    pub fn under_root(root: &Path, name: &str) -> Self {
        let dir = root.join(name);
        let pick = |split: &str| {
            let ts = dir.join(format!("{name}_{split}.ts"));
            if ts.exists() {
                ts
            } else {
                dir.join(format!("{name}_{split}.tsv"))
            }
        };
        Self {
            name: name.to_owned(),
            train: pick("TRAIN"),
            test: pick("TEST"),
        }
    }

    pub fn load(&self) -> Result<(TimeSeriesDataset, TimeSeriesDataset)> {
        let (mut train, mut test) = load_split(&self.train, &self.test, None::<Format>)?;
        train.name = self.name.clone();
        test.name = self.name.clone();
        Ok((train, test))
    }
}

/// Parse a dataset list. Each non-empty, non-`#` line is either a bare
/// dataset name resolved under `root`, or `name<TAB>train<TAB>test`.
pub fn read_dataset_list(path: &Path, root: &Path) -> Result<Vec<DatasetSpec>> {
    let text = fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        match fields.as_slice() {
            [name] => out.push(DatasetSpec::under_root(root, name)),
            [name, train, test] => out.push(DatasetSpec {
                name: (*name).to_owned(),
                train: base.join(train),
                test: base.join(test),
            }),
            _ => {
                return Err(HydraError::Parse {
                    line: i + 1,
                    message: "expected a dataset name or name<TAB>train<TAB>test".into(),
                })
            }
        }
    }
    Ok(out)
}

/// Append-only results file with resumption by key.
pub struct ResultsLog {
    path: PathBuf,
    manifest: Option<Manifest>,
    existing: BTreeMap<ResultKey, ExperimentResult>,
    file: Mutex<File>,
}

impl ResultsLog {
    /// Open (or create) a results file, loading any rows already present.
    pub fn open(path: &Path, manifest: Option<Manifest>) -> Result<Self> {
        let mut existing = BTreeMap::new();
        if path.exists() {
            let text = fs::read_to_string(path)?;
            for row in parse_results(&text)? {
                existing.insert(row.key(), row);
            }
        }
        let fresh = !path.exists() || fs::metadata(path)?.len() == 0;
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        if fresh {
            file.write_all(results_preamble(manifest.as_ref()).as_bytes())?;
            file.flush()?;
        }
        Ok(Self {
            path: path.to_owned(),
            manifest,
            existing,
            file: Mutex::new(file),
        })
    }

    pub fn contains(&self, key: &ResultKey) -> bool {
        self.existing.contains_key(key)
    }

    pub fn get(&self, key: &ResultKey) -> Option<&ExperimentResult> {
        self.existing.get(key)
    }

    pub fn append(&self, result: &ExperimentResult) -> Result<()> {
        let mut file = self.file.lock().expect("results log poisoned");
        writeln!(file, "{}", result.to_csv_row())?;
        file.flush()?;
        Ok(())
    }

    /// Rewrite the file with every row in key order.
    pub fn finalize(self) -> Result<Vec<ExperimentResult>> {
        drop(self.file);
        let text = fs::read_to_string(&self.path)?;
        let mut rows: BTreeMap<ResultKey, ExperimentResult> = BTreeMap::new();
        for row in parse_results(&text)? {
            rows.insert(row.key(), row);
        }
        let rows: Vec<ExperimentResult> = rows.into_values().collect();
        fs::write(&self.path, render_results(&rows, self.manifest.as_ref()))?;
        Ok(rows)
    }
}

fn results_preamble(manifest: Option<&Manifest>) -> String {
    let mut out = format!("# schema_version={RESULTS_SCHEMA_VERSION}\n");
    if let Some(m) = manifest {
        out.push_str(&m.header_lines());
    }
    out.push_str(RESULTS_HEADER);
    out.push('\n');
    out
}

pub fn render_results(rows: &[ExperimentResult], manifest: Option<&Manifest>) -> String {
    let mut out = results_preamble(manifest);
    for r in rows {
        out.push_str(&r.to_csv_row());
        out.push('\n');
    }
    out
}

pub fn parse_results(text: &str) -> Result<Vec<ExperimentResult>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if let Some(version) = line.strip_prefix("# schema_version=") {
            if version.trim() != RESULTS_SCHEMA_VERSION.to_string() {
                return Err(HydraError::Parse {
                    line: i + 1,
                    message: format!("unsupported results schema version {version}"),
                });
            }
            continue;
        }
        if line.starts_with('#') || line.trim().is_empty() || line == RESULTS_HEADER {
            continue;
        }
        rows.push(ExperimentResult::from_csv_row(line, i + 1)?);
    }
    Ok(rows)
}

/// A named configuration under test.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub name: String,
    pub options: FitOptions,
}

impl Variant {
    pub fn new(options: FitOptions) -> Self {
        Self {
            name: options.config.descriptor(),
            options,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub dataset: String,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutcome {
    pub results: Vec<ExperimentResult>,
    pub failures: Vec<Failure>,
}

/// How each `(dataset, index, variant)` job derives its split and seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    /// Index `r` is a stratified resample; kernels use `seed + r`.
    Resamples { seed: u64 },
    /// Index `r` is a repeated run on the original split; kernels use `seed + r`.
    Runs,
}

/// Fit on train, score on test, with timings.
pub fn evaluate(
    train: &TimeSeriesDataset,
    test: &TimeSeriesDataset,
    options: &FitOptions,
) -> Result<(f64, f64, f64, f64)> {
    let (model, report) = HydraModel::fit(train, options)?;
    let start = Instant::now();
    let features = model.features(test.series.view())?;
    let test_transform = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let predicted = model.classifier.predict(features.values.view())?;
    let test_seconds = start.elapsed().as_secs_f64();
    Ok((
        accuracy(&predicted, &test.labels),
        report.transform_seconds + test_transform,
        report.train_seconds,
        test_seconds,
    ))
}

/// Run every `(dataset, index, variant)` job for `index in 0..repeats`.
///
/// Jobs already present in `log` are skipped and their stored rows returned.
/// A dataset that fails to load or fit is reported in `failures` and the
/// remaining datasets still run. Jobs run in parallel on the current rayon
/// pool; each job is deterministic, so the outcome is order-independent.
pub fn run_jobs(
    datasets: &[DatasetSpec],
    variants: &[Variant],
    repeats: u64,
    protocol: Protocol,
    log: Option<&ResultsLog>,
) -> Result<ExperimentOutcome> {
    let mut outcome = ExperimentOutcome::default();
    let mut loaded = Vec::new();
    for spec in datasets {
        match spec.load() {
            Ok(pair) => loaded.push((spec.name.clone(), pair)),
            Err(e) => {
                log::warn!("skipping dataset {}: {e}", spec.name);
                outcome.failures.push(Failure {
                    dataset: spec.name.clone(),
                    message: e.to_string(),
                });
            }
        }
    }

    let jobs: Vec<(usize, u64, usize)> = (0..loaded.len())
        .flat_map(|d| (0..repeats).flat_map(move |r| (0..variants.len()).map(move |v| (d, r, v))))
        .collect();

    let computed: Vec<std::result::Result<ExperimentResult, Failure>> = jobs
        .par_iter()
        .map(|&(d, r, v)| {
            let (name, (train, test)) = &loaded[d];
            let variant = &variants[v];
            let key = (name.clone(), r, variant.name.clone());
            if let Some(existing) = log.and_then(|l| l.get(&key)) {
                return Ok(existing.clone());
            }
            let fail = |e: HydraError| Failure {
                dataset: name.clone(),
                message: format!("{} #{r}: {e}", variant.name),
            };
            let split = match protocol {
                Protocol::Resamples { seed } => {
                    stratified_resample(train, test, ResamplePlan { seed, resample_id: r }).map_err(fail)?
                }
                Protocol::Runs => (train.clone(), test.clone()),
            };
            let mut options = variant.options.clone();
            options.config.seed = options.config.seed.wrapping_add(r);
            let (acc, transform_s, train_s, test_s) = evaluate(&split.0, &split.1, &options).map_err(fail)?;
            let result = ExperimentResult {
                dataset: name.clone(),
                resample_id: r,
                variant: variant.name.clone(),
                accuracy: acc,
                transform_seconds: transform_s,
                train_seconds: train_s,
                test_seconds: test_s,
            };
            if let Some(l) = log {
                l.append(&result).map_err(fail)?;
            }
            Ok(result)
        })
        .collect();

    for item in computed {
        match item {
            Ok(r) => outcome.results.push(r),
            Err(f) => {
                log::warn!("{}: {}", f.dataset, f.message);
                outcome.failures.push(f);
            }
        }
    }
    outcome.results.sort_by_key(ExperimentResult::key);
    Ok(outcome)
}

/// One result per `(dataset, resample)`, resample 0 being the original split.
pub fn run_experiment(
    datasets: &[DatasetSpec],
    options: &FitOptions,
    resamples: u64,
    seed: u64,
    log: Option<&ResultsLog>,
) -> Result<ExperimentOutcome> {
    if resamples == 0 {
        return Err(HydraError::InvalidConfig("resamples must be at least 1".into()));
    }
    run_jobs(datasets, &[Variant::new(options.clone())], resamples, Protocol::Resamples { seed }, log)
}

/// Axes of a full-factorial sensitivity sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityAxes {
    /// `(k, g)` pairs.
    pub kg: Vec<(usize, usize)>,
    /// `(count_max, count_min)` pairs.
    pub counting: Vec<(CountMode, CountMode)>,
    pub clip: Vec<bool>,
    pub use_diff: Vec<bool>,
}

impl Default for SensitivityAxes {
    fn default() -> Self {
        Self {
            kg: vec![(8, 64)],
            counting: vec![(CountMode::Soft, CountMode::Hard)],
            clip: vec![false],
            use_diff: vec![true],
        }
    }
}

/// `(k, budget / k)` for every `k` dividing `budget`.
pub fn kg_lattice(ks: &[usize], budgets: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for &budget in budgets {
        for &k in ks {
            if k > 0 && budget % k == 0 && budget / k >= 1 {
                out.push((k, budget / k));
            }
        }
    }
    out
}

impl SensitivityAxes {
    /// Every combination of the axes applied to `base`. A single group cannot
    /// be split between the series and its difference, so odd `g` runs
    /// without the difference.
    pub fn variants(&self, base: &FitOptions) -> Vec<Variant> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for &(k, g) in &self.kg {
            for &(count_max, count_min) in &self.counting {
                for &clip in &self.clip {
                    for &use_diff in &self.use_diff {
                        let mut options = base.clone();
                        options.config.k = k;
                        options.config.g = g;
                        options.config.count_max = count_max;
                        options.config.count_min = count_min;
                        options.config.clip = clip;
                        options.config.use_diff = use_diff && g % 2 == 0;
                        let variant = Variant::new(options);
                        if seen.insert(variant.name.clone()) {
                            out.push(variant);
                        }
                    }
                }
            }
        }
        out
    }
}

/// Mean accuracy of one variant on one dataset over runs.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMean {
    pub dataset: String,
    pub variant: String,
    pub mean_accuracy: f64,
    pub runs: usize,
}

pub fn cell_means(results: &[ExperimentResult]) -> Vec<CellMean> {
    let mut cells: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for r in results {
        cells
            .entry((r.dataset.clone(), r.variant.clone()))
            .or_default()
            .push(r.accuracy);
    }
    cells
        .into_iter()
        .map(|((dataset, variant), accs)| CellMean {
            dataset,
            variant,
            mean_accuracy: accs.iter().sum::<f64>() / accs.len() as f64,
            runs: accs.len(),
        })
        .collect()
}

/// Run a sensitivity sweep: `runs` seeds per cell on the original splits.
pub fn sensitivity_grid(
    datasets: &[DatasetSpec],
    axes: &SensitivityAxes,
    base: &FitOptions,
    runs: u64,
    log: Option<&ResultsLog>,
) -> Result<(ExperimentOutcome, Vec<CellMean>)> {
    if runs == 0 {
        return Err(HydraError::InvalidConfig("runs must be at least 1".into()));
    }
    let variants = axes.variants(base);
    let outcome = run_jobs(datasets, &variants, runs, Protocol::Runs, log)?;
    let means = cell_means(&outcome.results);
    Ok((outcome, means))
}

/// Mean ranks of variants across datasets (rank 1 = most accurate).
#[derive(Debug, Clone, PartialEq)]
pub struct RankTable {
    pub variants: Vec<String>,
    pub datasets: Vec<String>,
    /// `ranks[d][v]`, average ranks on ties.
    pub ranks: Vec<Vec<f64>>,
    pub mean_rank: Vec<f64>,
}

impl RankTable {
    pub fn mean_rank_of(&self, variant: &str) -> Option<f64> {
        let i = self.variants.iter().position(|v| v == variant)?;
        Some(self.mean_rank[i])
    }

    pub fn to_csv(&self, manifest: Option<&Manifest>) -> String {
        let mut out = String::new();
        if let Some(m) = manifest {
            out.push_str(&m.header_lines());
        }
        out.push_str("variant,mean_rank,n_datasets\n");
        for (v, r) in self.variants.iter().zip(&self.mean_rank) {
            writeln!(out, "{v},{r},{}", self.datasets.len()).unwrap();
        }
        out
    }
}

/// Average ranks, highest value ranked 1, ties sharing the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Rank `(dataset, variant, accuracy)` triples. Datasets missing a result for
/// any variant are dropped with a warning.
pub fn mean_rank(accuracies: &[(String, String, f64)]) -> Result<RankTable> {
    let variants: Vec<String> = accuracies
        .iter()
        .map(|(_, v, _)| v.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut by_dataset: BTreeMap<&str, HashMap<&str, f64>> = BTreeMap::new();
    for (d, v, a) in accuracies {
        by_dataset.entry(d).or_default().insert(v, *a);
    }
    let mut datasets = Vec::new();
    let mut ranks = Vec::new();
    for (d, accs) in &by_dataset {
        if accs.len() != variants.len() {
            log::warn!("dataset {d} lacks results for some variants; excluded from ranking");
            continue;
        }
        let values: Vec<f64> = variants.iter().map(|v| accs[v.as_str()]).collect();
        datasets.push((*d).to_owned());
        ranks.push(average_ranks(&values));
    }
    if datasets.is_empty() {
        return Err(HydraError::NoCommonDatasets);
    }
    let mean_rank = (0..variants.len())
        .map(|v| ranks.iter().map(|r| r[v]).sum::<f64>() / datasets.len() as f64)
        .collect();
    Ok(RankTable {
        variants,
        datasets,
        ranks,
        mean_rank,
    })
}

/// Rank table from per-cell mean accuracies.
pub fn rank_cells(cells: &[CellMean]) -> Result<RankTable> {
    let triples: Vec<(String, String, f64)> = cells
        .iter()
        .map(|c| (c.dataset.clone(), c.variant.clone(), c.mean_accuracy))
        .collect();
    mean_rank(&triples)
}
