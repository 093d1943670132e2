use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use hydra_core::bench_harness::{
    cell_means, rank_cells, read_dataset_list, run_experiment, sensitivity_grid, CellMean, DatasetSpec,
    ExperimentOutcome, ResultsLog, SensitivityAxes, kg_lattice,
};
use hydra_core::classifier::accuracy;
use hydra_core::container::{Container, Manifest, BANK_FORMAT};
use hydra_core::data_io::{load_dataset, read_raw, z_normalize_rows, TimeSeriesDataset};
use hydra_core::pipeline::{FitOptions, HydraModel};
use hydra_core::transform::transform;
use hydra_core::{CountMode, HydraError, KernelBank, Result};

use crate::{BenchmarkArgs, Command, ConfigArgs, FitArgs, PredictArgs, SensitivityArgs, SuiteArgs, TransformArgs};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Fit(args) => fit(args),
        Command::Predict(args) => predict(args),
        Command::Transform(args) => transform_cmd(args),
        Command::Benchmark(args) => benchmark(args),
        Command::Sensitivity(args) => sensitivity(args),
    }
}

impl ConfigArgs {
    /// Options from the config file (or defaults), then command-line overrides.
    pub fn resolve(&self) -> Result<FitOptions> {
        let mut options = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)?;
                serde_json::from_str::<FitOptions>(&text)
                    .map_err(|e| HydraError::InvalidConfig(format!("{}: {e}", path.display())))?
            }
            None => FitOptions::default(),
        };
        let c = &mut options.config;
        if let Some(k) = self.k {
            c.k = k;
        }
        if let Some(g) = self.g {
            c.g = g;
        }
        if let Some(seed) = self.seed {
            c.seed = seed;
        }
        if let Some(mode) = self.count_max {
            c.count_max = mode;
        }
        if let Some(mode) = self.count_min {
            c.count_min = mode;
        }
        if let Some(b) = self.batch_size {
            c.batch_size = b;
        }
        c.clip |= self.clip;
        c.use_diff &= !self.no_diff;
        if let Some(choice) = self.classifier {
            options.classifier = choice;
        }
        options.normalize_input |= self.normalize_input;
        options.config.validate()?;
        Ok(options)
    }
}

fn fit_manifest(command: &str, options: &FitOptions) -> Manifest {
    Manifest::new(command, Some(options.config.clone()))
        .with("classifier", options.classifier)
        .with("normalize_input", options.normalize_input)
}

fn fit(args: FitArgs) -> Result<()> {
    let options = args.config.resolve()?;
    let train = load_dataset(&args.train, None)?;
    let (model, report) = HydraModel::fit(&train, &options)?;
    let manifest = fit_manifest("fit", &options).with("train", args.train.display());
    model.save(&args.model, Some(manifest))?;
    println!("train accuracy: {}", report.train_accuracy);
    println!("transform seconds: {:.3}", report.transform_seconds);
    println!("train seconds: {:.3}", report.train_seconds);
    Ok(())
}

fn predict(args: PredictArgs) -> Result<()> {
    let model = HydraModel::load(&args.model)?;
    let raw = read_raw(&args.data, None)?;
    let truth = if raw.is_labeled() {
        Some(TimeSeriesDataset::from_raw(raw.clone(), &model.class_names)?.labels)
    } else {
        None
    };
    let scores = model.predict_scores(raw.series.view())?;
    let predicted = hydra_core::classifier::labels_from_scores(&scores);

    let manifest = Manifest::new("predict", Some(model.config.clone()))
        .with("model", args.model.display())
        .with("data", args.data.display());
    let mut out = manifest.header_lines();
    out.push_str("index,predicted_label");
    for c in 0..scores.ncols() {
        write!(out, ",score_{c}").unwrap();
    }
    out.push('\n');
    for (i, row) in scores.rows().into_iter().enumerate() {
        write!(out, "{i},{}", model.class_names[predicted[i]]).unwrap();
        for s in row {
            write!(out, ",{s}").unwrap();
        }
        out.push('\n');
    }
    fs::write(&args.out, out)?;
    if let Some(truth) = truth {
        println!("accuracy: {}", accuracy(&predicted, &truth));
    }
    Ok(())
}

fn transform_cmd(args: TransformArgs) -> Result<()> {
    let options = args.config.resolve()?;
    let mut config = options.config;
    let raw = read_raw(&args.data, None)?;
    let bank = match &args.bank {
        Some(path) => {
            let bank = Container::<KernelBank>::read(path, BANK_FORMAT)?.payload;
            config.k = bank.k;
            config.g = bank.g;
            config.seed = bank.seed;
            bank
        }
        None => KernelBank::generate(&config, raw.series_len())?,
    };
    let mut series = raw.series;
    if options.normalize_input {
        z_normalize_rows(&mut series);
    }
    let features = transform(series.view(), &bank, &config)?;
    let mut manifest = Manifest::new("transform", Some(config.clone()))
        .with("data", args.data.display())
        .with("normalize_input", options.normalize_input);
    if let Some(path) = &args.bank {
        manifest = manifest.with("bank", path.display());
    }
    features.write_csv(&args.out, Some(&manifest))?;
    if let Some(path) = &args.save_bank {
        Container::new(BANK_FORMAT, Some(manifest), bank).write(path)?;
    }
    println!("wrote {} x {} features", features.n_rows(), features.n_features());
    Ok(())
}

fn load_suite(suite: &SuiteArgs) -> Result<Vec<DatasetSpec>> {
    let root = match &suite.root {
        Some(r) => r.clone(),
        None => suite.datasets.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(".")),
    };
    let specs = read_dataset_list(&suite.datasets, &root)?;
    if specs.is_empty() {
        return Err(HydraError::InvalidConfig("the dataset list is empty".into()));
    }
    Ok(specs)
}

/// Open the results file, refusing to mix rows produced with other settings.
fn open_log(path: &Path, manifest: &Manifest) -> Result<ResultsLog> {
    if path.exists() {
        let text = fs::read_to_string(path)?;
        if let Some(previous) = Manifest::from_header(&text) {
            if &previous != manifest {
                return Err(HydraError::InvalidConfig(format!(
                    "{} was written with different settings; use another results file",
                    path.display()
                )));
            }
        }
    }
    ResultsLog::open(path, Some(manifest.clone()))
}

fn report(outcome: &ExperimentOutcome, cells: &[CellMean], suite: &SuiteArgs, manifest: &Manifest) -> Result<()> {
    for f in &outcome.failures {
        eprintln!("failed: {}: {}", f.dataset, f.message);
    }
    if outcome.results.is_empty() {
        return Err(HydraError::NoCommonDatasets);
    }
    for c in cells {
        println!("{}\t{}\t{:.4}\t({} runs)", c.dataset, c.variant, c.mean_accuracy, c.runs);
    }
    let table = rank_cells(cells)?;
    if let Some(path) = &suite.ranks {
        fs::write(path, table.to_csv(Some(manifest)))?;
    }
    for (v, r) in table.variants.iter().zip(&table.mean_rank) {
        println!("mean rank {v}: {r:.3}");
    }
    Ok(())
}

fn benchmark(args: BenchmarkArgs) -> Result<()> {
    let options = args.config.resolve()?;
    let specs = load_suite(&args.suite)?;
    let manifest = fit_manifest("benchmark", &options)
        .with("resamples", args.resamples)
        .with("resample_seed", args.resample_seed);
    let log = open_log(&args.suite.results, &manifest)?;
    let outcome = run_experiment(&specs, &options, args.resamples, args.resample_seed, Some(&log))?;
    log.finalize()?;
    report(&outcome, &cell_means(&outcome.results), &args.suite, &manifest)
}

fn sensitivity(args: SensitivityArgs) -> Result<()> {
    let base = args.config.resolve()?;
    let specs = load_suite(&args.suite)?;
    let axes = SensitivityAxes {
        kg: if args.kg.is_empty() {
            kg_lattice(&[1, 2, 4, 8, 16], &[16, 64, 256, 512])
        } else {
            args.kg.clone()
        },
        counting: if args.counting.is_empty() {
            vec![(base.config.count_max, base.config.count_min)]
        } else {
            args.counting.clone()
        },
        clip: if args.clip_values.is_empty() { vec![base.config.clip] } else { args.clip_values.clone() },
        use_diff: if args.diff_values.is_empty() { vec![base.config.use_diff] } else { args.diff_values.clone() },
    };
    let kg: Vec<String> = axes.kg.iter().map(|(k, g)| format!("{k}x{g}")).collect();
    let counting: Vec<String> = axes.counting.iter().map(|(a, b)| format!("{a}:{b}")).collect();
    let manifest = fit_manifest("sensitivity", &base)
        .with("runs", args.runs)
        .with("kg", kg.join(" "))
        .with("counting", counting.join(" "))
        .with("clip_values", format!("{:?}", axes.clip))
        .with("diff_values", format!("{:?}", axes.use_diff));
    let log = open_log(&args.suite.results, &manifest)?;
    let (outcome, cells) = sensitivity_grid(&specs, &axes, &base, args.runs, Some(&log))?;
    log.finalize()?;
    report(&outcome, &cells, &args.suite, &manifest)
}

pub fn parse_kg(s: &str) -> std::result::Result<(usize, usize), String> {
    let (k, g) = s.split_once('x').ok_or_else(|| format!("expected KxG, got {s:?}"))?;
    let k = k.trim().parse().map_err(|_| format!("bad k in {s:?}"))?;
    let g = g.trim().parse().map_err(|_| format!("bad g in {s:?}"))?;
    Ok((k, g))
}

pub fn parse_counting(s: &str) -> std::result::Result<(CountMode, CountMode), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected MAX:MIN, got {s:?}"))?;
    let a = a.trim().parse().map_err(|e: HydraError| e.to_string())?;
    let b = b.trim().parse().map_err(|e: HydraError| e.to_string())?;
    Ok((a, b))
}
