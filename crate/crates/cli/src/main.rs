mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hydra_core::classifier::ClassifierChoice;
use hydra_core::CountMode;

/// Time series classification with competing convolutional kernels.
#[derive(Parser, Debug)]
#[command(name = "hydra", version, about)]
struct Cli {
    /// Worker threads for the transform and experiment jobs.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a model on a labeled dataset and save it.
    Fit(FitArgs),
    /// Predict labels for a dataset with a saved model.
    Predict(PredictArgs),
    /// Write the raw transform features of a dataset.
    Transform(TransformArgs),
    /// Evaluate one configuration over resampled train/test splits.
    Benchmark(BenchmarkArgs),
    /// Sweep configuration axes over repeated runs and rank the variants.
    Sensitivity(SensitivityArgs),
}

/// Transform and classifier settings. Flags override values from `--config`.
#[derive(Args, Debug, Clone, Default)]
pub struct ConfigArgs {
    /// JSON file of fit options (`config`, `classifier`, `normalize_input`, `alphas`, `logistic`).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Kernels per group [default: 8].
    #[arg(long)]
    pub k: Option<usize>,
    /// Groups per dilation [default: 64].
    #[arg(long)]
    pub g: Option<usize>,
    /// Kernel seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Counting of the maximum response: hard, soft, both or off [default: soft].
    #[arg(long)]
    pub count_max: Option<CountMode>,
    /// Counting of the minimum response: hard, soft, both or off [default: hard].
    #[arg(long)]
    pub count_min: Option<CountMode>,
    /// Count the maximum only when positive and the minimum only when negative [default: off].
    #[arg(long)]
    pub clip: bool,
    /// Do not give half of the groups the first-order difference [default: use it].
    #[arg(long)]
    pub no_diff: bool,
    /// Classifier: auto (ridge up to 10000 examples, logistic above), ridge or logistic [default: auto].
    #[arg(long)]
    pub classifier: Option<ClassifierChoice>,
    /// Z-normalize every input series before the transform [default: off].
    #[arg(long)]
    pub normalize_input: bool,
    /// Series transformed per batch [default: 256].
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Training data (`.ts` or `.tsv`).
    #[arg(long)]
    pub train: PathBuf,
    /// Where to write the model.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Data to classify; labels of `?` mean unlabeled.
    #[arg(long)]
    pub data: PathBuf,
    /// Predictions CSV: `index,predicted_label,score_0..`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TransformArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Features CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Use a saved kernel bank instead of generating one from the seed.
    #[arg(long)]
    pub bank: Option<PathBuf>,
    /// Also write the kernel bank used.
    #[arg(long)]
    pub save_bank: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Args, Debug)]
pub struct SuiteArgs {
    /// Dataset list: one name per line, or `name<TAB>train<TAB>test`.
    #[arg(long)]
    pub datasets: PathBuf,
    /// Directory holding `<name>/<name>_TRAIN.ts` and `_TEST.ts` [default: the list's directory].
    #[arg(long)]
    pub root: Option<PathBuf>,
    /// Results CSV; rows already present are kept and not recomputed.
    #[arg(long)]
    pub results: PathBuf,
    /// Rank table CSV: `variant,mean_rank,n_datasets`.
    #[arg(long)]
    pub ranks: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub suite: SuiteArgs,
    /// Number of splits; split 0 is the original one.
    #[arg(long, default_value_t = 30)]
    pub resamples: u64,
    /// Seed of the stratified resampling.
    #[arg(long, default_value_t = 0)]
    pub resample_seed: u64,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Args, Debug)]
pub struct SensitivityArgs {
    #[command(flatten)]
    pub suite: SuiteArgs,
    /// Runs (kernel seeds) per cell, all on the original split.
    #[arg(long, default_value_t = 10)]
    pub runs: u64,
    /// `k x g` pairs such as `8x64,512x1` [default: k in 1,2,4,8,16 with k*g in 16,64,256,512].
    #[arg(long, value_delimiter = ',', value_parser = commands::parse_kg)]
    pub kg: Vec<(usize, usize)>,
    /// `max:min` counting pairs such as `soft:hard,hard:hard` [default: from the base config].
    #[arg(long, value_delimiter = ',', value_parser = commands::parse_counting)]
    pub counting: Vec<(CountMode, CountMode)>,
    /// Clipping values to sweep, e.g. `false,true` [default: from the base config].
    #[arg(long, value_delimiter = ',')]
    pub clip_values: Vec<bool>,
    /// First-order difference values to sweep, e.g. `true,false` [default: from the base config].
    #[arg(long, value_delimiter = ',')]
    pub diff_values: Vec<bool>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.threads.max(1)).build();
    let result = match pool {
        Ok(pool) => pool.install(|| commands::run(cli.command)),
        Err(e) => Err(hydra_core::HydraError::InvalidConfig(format!("thread pool: {e}"))),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 3 } else { 2 })
        }
    }
}
