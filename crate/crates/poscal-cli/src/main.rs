//! `poscal` binary: train MLE / L1 / PosCal classifiers on a dataset file or
//! synthetic data, post-calibrate with temperature scaling, and write metric
//! and calibration reports.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use poscal::loss::DistanceKind;
use poscal::model::Architecture;
use poscal::train::{TrainConfig, TrainMode};
use poscal::BinningConfig;
use poscal_cli::experiment::{
    run_experiment, run_study, DataSource, ExperimentConfig, TaskMetric,
};
use poscal_cli::ingest::{DataFormat, Featurizer};
use poscal_cli::report::ModeValues;
use poscal_cli::synth::{generate_synthetic, write_dataset_csv, GeneratorKind, SyntheticSpec};
use poscal_cli::CliError;

#[derive(Parser)]
#[command(
    name = "poscal",
    version,
    about = "Posterior-calibrated classifier training with calibration reports"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the requested modes, fit temperature scaling on the MLE model,
    /// evaluate on the test split, and write report files.
    Run(Box<RunArgs>),
    /// Generate a synthetic dataset and write it as CSV.
    Datagen(DatagenArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Tsv,
    Jsonl,
}

#[derive(Clone, Copy, ValueEnum)]
enum FeaturizerArg {
    /// Parse every non-label column as a real number.
    Numeric,
    /// Hash whitespace tokens of the non-label columns into counts.
    HashedBow,
}

#[derive(Clone, Copy, ValueEnum)]
enum GeneratorArg {
    GaussianBlobs,
    NoisyMoons,
}

#[derive(Clone, Copy, ValueEnum)]
enum ArchArg {
    /// Softmax regression (one affine layer).
    Logistic,
    /// One ReLU hidden layer.
    Mlp,
}

#[derive(Clone, Copy, ValueEnum)]
enum DistanceArg {
    Kl,
    Mse,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Accuracy,
    MacroF1,
    PositiveF1,
    Matthews,
}

#[derive(Args)]
struct SourceArgs {
    /// Dataset file; when omitted, the synthetic generator is used.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// Name of the label column / field.
    #[arg(long, default_value = "label")]
    label_column: String,
    #[arg(long, value_enum, default_value = "numeric")]
    featurizer: FeaturizerArg,
    /// Bucket count for the hashed bag-of-words featurizer.
    #[arg(long, default_value_t = 256)]
    hash_dim: usize,

    #[arg(long, value_enum, default_value = "gaussian-blobs")]
    generator: GeneratorArg,
    /// Synthetic sample count.
    #[arg(long, default_value_t = 2500)]
    n: usize,
    /// Synthetic feature dimension.
    #[arg(long, default_value_t = 4)]
    p: usize,
    /// Synthetic class count.
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Class overlap (noise scale around the class geometry).
    #[arg(long, default_value_t = 1.3)]
    overlap: f64,
    /// Label-noise rate in [0, 0.5).
    #[arg(long, default_value_t = 0.2)]
    noise: f64,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: SourceArgs,

    /// Comma-separated training modes out of mle, l1, poscal.
    #[arg(long, default_value = "mle,l1,poscal")]
    mode: String,
    #[arg(long, value_enum, default_value = "mlp")]
    arch: ArchArg,
    #[arg(long, default_value_t = 64)]
    hidden_width: usize,
    /// Calibration-loss weight for PosCal.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Empirical-probability refreshes per epoch.
    #[arg(long, default_value_t = 5)]
    u: usize,
    /// Probability bins.
    #[arg(long, default_value_t = 10)]
    bins: usize,
    #[arg(long, value_enum, default_value = "kl")]
    distance: DistanceArg,
    #[arg(long, default_value_t = 12)]
    epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    /// L1 penalty weight (L1 mode).
    #[arg(long, default_value_t = 1e-8)]
    l1_weight: f64,
    /// Check validation loss every this many steps.
    #[arg(long, default_value_t = 50)]
    eval_every: usize,
    /// Prior-loss window of the early-stopping rule.
    #[arg(long, default_value_t = 10)]
    patience: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    val_frac: f64,
    #[arg(long, default_value_t = 0.2)]
    test_frac: f64,
    /// Cap on train samples per Q refresh (stratified subsample).
    #[arg(long)]
    q_sample_cap: Option<usize>,
    #[arg(long, value_enum, default_value = "accuracy")]
    metric: MetricArg,
    #[arg(long)]
    out_dir: PathBuf,
    /// Run a study over this many seeds (seed, seed+1, ...) and aggregate.
    #[arg(long)]
    seeds: Option<usize>,
}

#[derive(Args)]
struct DatagenArgs {
    #[arg(long, value_enum, default_value = "gaussian-blobs")]
    generator: GeneratorArg,
    #[arg(long, default_value_t = 2500)]
    n: usize,
    #[arg(long, default_value_t = 4)]
    p: usize,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 1.3)]
    overlap: f64,
    #[arg(long, default_value_t = 0.2)]
    noise: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

fn parse_modes(spec: &str) -> Result<Vec<TrainMode>, CliError> {
    let mut modes = Vec::new();
    for part in spec.split(',') {
        let mode = match part.trim().to_lowercase().as_str() {
            "mle" => TrainMode::Mle,
            "l1" => TrainMode::L1,
            "poscal" => TrainMode::PosCal,
            other => return Err(CliError::config(format!("unknown mode `{other}`"))),
        };
        if !modes.contains(&mode) {
            modes.push(mode);
        }
    }
    Ok(modes)
}

fn synthetic_spec(src: &SourceArgs, seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        generator: match src.generator {
            GeneratorArg::GaussianBlobs => GeneratorKind::GaussianBlobs,
            GeneratorArg::NoisyMoons => GeneratorKind::NoisyMoonsLike,
        },
        n: src.n,
        p: src.p,
        k: src.k,
        overlap: src.overlap,
        label_noise: src.noise,
        seed,
    }
}

fn build_config(args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let source = match &args.source.data {
        Some(path) => DataSource::File {
            path: path.display().to_string(),
            format: match args.source.format {
                FormatArg::Csv => DataFormat::Csv,
                FormatArg::Tsv => DataFormat::Tsv,
                FormatArg::Jsonl => DataFormat::Jsonl,
            },
            label_column: args.source.label_column.clone(),
            featurizer: match args.source.featurizer {
                FeaturizerArg::Numeric => Featurizer::Numeric,
                FeaturizerArg::HashedBow => Featurizer::HashedBow {
                    dim: args.source.hash_dim,
                },
            },
        },
        None => DataSource::Synthetic(synthetic_spec(&args.source, args.seed)),
    };
    let train = TrainConfig {
        epochs: args.epochs,
        learning_rate: args.lr,
        batch_size: args.batch_size,
        lambda: args.lambda,
        q_updates_per_epoch: args.u,
        binning: BinningConfig::new(args.bins, 1e-6).map_err(CliError::Core)?,
        distance: match args.distance {
            DistanceArg::Kl => DistanceKind::KlDivergence,
            DistanceArg::Mse => DistanceKind::MeanSquaredError,
        },
        l1_weight: args.l1_weight,
        seed: args.seed,
        eval_every_steps: args.eval_every,
        patience: args.patience,
        mode: TrainMode::Mle, // replaced per requested mode
        arch: match args.arch {
            ArchArg::Logistic => Architecture::LogisticRegression,
            ArchArg::Mlp => Architecture::Mlp1Hidden {
                hidden_width: args.hidden_width,
            },
        },
        q_sample_cap: args.q_sample_cap,
    };
    Ok(ExperimentConfig {
        source,
        val_frac: args.val_frac,
        test_frac: args.test_frac,
        train,
        modes: parse_modes(&args.mode)?,
        metric: match args.metric {
            MetricArg::Accuracy => TaskMetric::Accuracy,
            MetricArg::MacroF1 => TaskMetric::MacroF1,
            MetricArg::PositiveF1 => TaskMetric::PositiveF1,
            MetricArg::Matthews => TaskMetric::Matthews,
        },
        split_seed: args.seed,
    })
}

fn fmt_cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

fn print_rows(metric: &str, task: &ModeValues, ece: &ModeValues) {
    println!("{:<8} {:>12} {:>8}", "mode", metric, "ece");
    for (name, t, e) in [
        ("mle", task.mle, ece.mle),
        ("l1", task.l1, ece.l1),
        ("tscal", None, ece.tscal),
        ("poscal", task.poscal, ece.poscal),
    ] {
        if t.is_some() || e.is_some() {
            println!("{:<8} {:>12} {:>8}", name, fmt_cell(t), fmt_cell(e));
        }
    }
}

fn run(args: &RunArgs) -> Result<(), CliError> {
    let cfg = build_config(args)?;
    match args.seeds {
        Some(count) => {
            if count == 0 {
                return Err(CliError::config("--seeds must be >= 1"));
            }
            let seeds: Vec<u64> = (0..count as u64).map(|i| args.seed + i).collect();
            let study = run_study(&cfg, &seeds, &args.out_dir)?;
            println!("study over {} seeds (medians):", seeds.len());
            print_rows(&study.task_metric, &study.median_task_perf, &study.median_ece);
            println!("wrote {}", args.out_dir.join("aggregate.json").display());
        }
        None => {
            let outcome = run_experiment(&cfg, &args.out_dir)?;
            print_rows(
                &outcome.report.task_metric,
                &outcome.report.task_perf,
                &outcome.report.ece,
            );
            if let Some(t) = outcome.report.temperature {
                println!("fitted temperature: {t:.4}");
            }
            println!("wrote {}", args.out_dir.join("metrics.json").display());
            if outcome.diverged {
                for failure in &outcome.report.failures {
                    eprintln!("mode {} failed: {}", failure.mode, failure.message);
                }
                return Err(CliError::Core(poscal::Error::Diverged { step: 0 }));
            }
        }
    }
    Ok(())
}

fn datagen(args: &DatagenArgs) -> Result<(), CliError> {
    let spec = SyntheticSpec {
        generator: match args.generator {
            GeneratorArg::GaussianBlobs => GeneratorKind::GaussianBlobs,
            GeneratorArg::NoisyMoons => GeneratorKind::NoisyMoonsLike,
        },
        n: args.n,
        p: args.p,
        k: args.k,
        overlap: args.overlap,
        label_noise: args.noise,
        seed: args.seed,
    };
    let dataset = generate_synthetic(&spec)?;
    write_dataset_csv(&dataset, &args.out)?;
    println!(
        "wrote {} ({} samples, {} features, {} classes)",
        args.out.display(),
        dataset.num_samples(),
        dataset.num_features(),
        dataset.num_classes()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::Datagen(args) => datagen(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
