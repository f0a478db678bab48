//! `fairlab` command-line interface.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error. Diagnostics go to
//! stderr. Configs are read from JSON files; explicit flags override them.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::datagen::{self, SplitSpec, SpuriousSpec};
use crate::error::{Error, Result};
use crate::model::RandomFeatureModel;
use crate::sweep::{self, DataSource, SweepConfig};
use crate::threshold::{self, ScoredSet};
use crate::trainer::{self, TrainConfig};

use super::{chart, load_results, pareto_chart, results_chart, trace_chart};

#[derive(Debug, Parser)]
#[command(name = "fairlab", version, about = "Fairness-aware training on random-feature models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic spurious-correlation dataset.
    GenData(GenDataArgs),
    /// Train one model and write its trace.
    Train(TrainArgs),
    /// Run a width x lambda x regularizer x seed grid.
    Sweep(SweepArgs),
    /// Choose per-group thresholds under an FNR-gap bound.
    Threshold(ThresholdArgs),
    /// Render a results, trace or Pareto CSV to SVG.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct GenDataArgs {
    /// SpuriousSpec JSON; defaults to the standard fixture.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_total: Option<usize>,
    /// Full dataset CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write train.csv, val.csv and test.csv into this directory.
    #[arg(long)]
    split_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// TrainConfig JSON; defaults to the desk-scale schedule.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training CSV; without it the standard synthetic fixture is used.
    #[arg(long, requires = "val")]
    train: Option<PathBuf>,
    #[arg(long)]
    val: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long, default_value_t = 256)]
    width: usize,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Seed of the random projection.
    #[arg(long, default_value_t = 0)]
    model_seed: u64,
    #[arg(long)]
    trace_out: PathBuf,
    #[arg(long)]
    model_out: Option<PathBuf>,
    /// Writes val_scores.csv (and test_scores.csv when a test split exists).
    #[arg(long)]
    scores_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    /// Comma-separated widths.
    #[arg(long, value_delimiter = ',')]
    widths: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    /// Number of replicate seeds (0..n).
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    master_seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Per-run long-format CSV.
    #[arg(long)]
    runs_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ThresholdArgs {
    /// Validation scores CSV with header `score,y,a`.
    #[arg(long)]
    scores: PathBuf,
    /// Test scores CSV; thresholds chosen on `--scores` are applied to it.
    #[arg(long)]
    test: Option<PathBuf>,
    /// FNR-gap bound; repeat for a Pareto table.
    #[arg(long, required = true)]
    thr: Vec<f64>,
    #[arg(long, default_value_t = threshold::DEFAULT_GRID_RESOLUTION)]
    grid: usize,
    /// Pareto CSV output (requires `--test`).
    #[arg(long, requires = "test")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long, group = "input")]
    results: Option<PathBuf>,
    #[arg(long, group = "input")]
    trace: Option<PathBuf>,
    #[arg(long, group = "input")]
    pareto: Option<PathBuf>,
    /// Metric plotted from a results CSV.
    #[arg(long, default_value = "test_err")]
    metric: String,
    #[arg(long)]
    title: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

/// Runs the CLI on `argv` (including the program name) and returns the exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                _ => {
                    eprint!("{e}");
                    1
                }
            };
        }
    };
    let outcome = match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Threshold(a) => run_threshold(a),
        Command::Report(a) => report(a),
    };
    match outcome {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}

enum CliError {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::UnknownPreset(name) => CliError::Usage(format!("--preset: unknown preset {name:?}")),
            other => CliError::Runtime(other),
        }
    }
}

type CliResult = std::result::Result<(), CliError>;

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn gen_data(a: GenDataArgs) -> CliResult {
    if a.out.is_none() && a.split_dir.is_none() {
        return Err(CliError::Usage("gen-data needs --out or --split-dir".into()));
    }
    let mut spec: SpuriousSpec = match &a.spec {
        Some(p) => read_json(p)?,
        None => SpuriousSpec::default(),
    };
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    if let Some(n) = a.n_total {
        spec.n_total = n;
    }
    let data = datagen::generate_spurious(&spec)?;
    if let Some(out) = &a.out {
        datagen::save_csv(&data, out)?;
    }
    if let Some(dir) = &a.split_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let split = SplitSpec {
            seed: spec.seed,
            ..SplitSpec::default()
        };
        let (tr, va, te) = datagen::split(&data, &split)?;
        datagen::save_csv(&tr, dir.join("train.csv"))?;
        datagen::save_csv(&va, dir.join("val.csv"))?;
        datagen::save_csv(&te, dir.join("test.csv"))?;
    }
    eprintln!("generated {} rows, group counts [y][a] = {:?}", data.len(), data.group_counts());
    Ok(())
}

fn train(a: TrainArgs) -> CliResult {
    let mut cfg: TrainConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => sweep::desk_train_config(),
    };
    if let Some(l) = a.lambda {
        cfg.lambda = l;
    }
    if let Some(s) = a.steps {
        cfg.total_steps = s;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let splits = match (&a.train, &a.val) {
        (Some(tr), Some(va)) => {
            let train = datagen::load_csv(tr)?;
            let val = datagen::load_csv(va)?;
            let test = a.test.as_ref().map(datagen::load_csv).transpose()?;
            (train, val, test)
        }
        _ => {
            let s = DataSource::default().load()?;
            (s.train, s.val, Some(s.test))
        }
    };
    let (train_set, val_set, test_set) = splits;
    let model = RandomFeatureModel::new(a.width, train_set.dim(), a.model_seed)?;
    let trained = trainer::train(model, &train_set, &val_set, &cfg)?;
    trained.trace.save_csv(&a.trace_out)?;
    if let Some(p) = &a.model_out {
        trained.model.save(p)?;
    }
    if let Some(dir) = &a.scores_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |data: &datagen::GroupedDataset, name: &str| -> Result<()> {
            let scores = trained.scores(data)?;
            ScoredSet::new(scores.to_vec(), data.labels().to_vec(), data.attrs().to_vec())?.save_csv(dir.join(name))
        };
        write(&val_set, "val_scores.csv")?;
        if let Some(t) = &test_set {
            write(t, "test_scores.csv")?;
        }
    }
    if let Some(last) = trained.trace.points.last() {
        eprintln!(
            "step {}: train L_P {:.6}, train err {:.4}, val err {:.4}",
            last.step, last.train_lp, last.train_err, last.val_err
        );
    }
    Ok(())
}

fn run_sweep(a: SweepArgs) -> CliResult {
    let mut cfg: SweepConfig = match (&a.config, &a.preset) {
        (Some(p), None) => SweepConfig::from_json_file(p)?,
        (None, Some(name)) => sweep::preset(name)?,
        _ => return Err(CliError::Usage("sweep needs exactly one of --config or --preset".into())),
    };
    if let Some(w) = a.widths {
        cfg.widths = w;
    }
    if let Some(l) = a.lambdas {
        cfg.lambdas = l;
    }
    if let Some(n) = a.seeds {
        cfg.seeds = (0..n).collect();
    }
    if let Some(s) = a.steps {
        cfg.base.total_steps = s;
        cfg.base.lr_decay_every = (s / 3).max(1);
    }
    if let Some(m) = a.master_seed {
        cfg.master_seed = m;
    }
    let result = sweep::run_sweep(&cfg)?;
    result.save_csv(&a.out)?;
    if let Some(p) = &a.runs_out {
        let mut w = create(p)?;
        result
            .write_runs_csv(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(p, e))?;
    }
    for cell in &result.cells {
        for f in &cell.failures {
            eprintln!(
                "run failed (width={} lambda={} {}): {f}",
                cell.width,
                cell.lambda,
                cell.regularizer.label()
            );
        }
    }
    eprintln!("{} cells, {} runs", result.cells.len(), result.runs.len());
    Ok(())
}

fn run_threshold(a: ThresholdArgs) -> CliResult {
    if let Some(bad) = a.thr.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(CliError::Usage(format!("--thr: {bad} is outside [0, 1]")));
    }
    let val = ScoredSet::load_csv(&a.scores)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match &a.test {
        None => {
            for &thr in &a.thr {
                let sel = threshold::threshold_correct(&val, thr, a.grid)?;
                let line = serde_json::to_string(&sel).map_err(Error::from)?;
                writeln!(out, "{line}").map_err(|e| Error::io("<stdout>", e))?;
            }
        }
        Some(test_path) => {
            let test = ScoredSet::load_csv(test_path)?;
            let front = threshold::pareto_front(&val, &test, &a.thr, a.grid)?;
            for r in &front {
                let line = serde_json::to_string(r).map_err(Error::from)?;
                writeln!(out, "{line}").map_err(|e| Error::io("<stdout>", e))?;
            }
            if let Some(p) = &a.out {
                let mut w = create(p)?;
                threshold::write_pareto_csv(&front, &mut w)
                    .and_then(|_| w.flush())
                    .map_err(|e| Error::io(p, e))?;
            }
        }
    }
    Ok(())
}

fn report(a: ReportArgs) -> CliResult {
    let mut spec = match (&a.results, &a.trace, &a.pareto) {
        (Some(p), None, None) => results_chart(&load_results(p)?, &a.metric)?,
        (None, Some(p), None) => trace_chart(p)?,
        (None, None, Some(p)) => pareto_chart(p)?,
        _ => return Err(CliError::Usage("report needs one of --results, --trace or --pareto".into())),
    };
    if let Some(t) = a.title {
        spec.title = t;
    }
    chart::write_chart(&spec, Some(&a.out))?;
    Ok(())
}
