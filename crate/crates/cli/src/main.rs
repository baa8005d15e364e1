use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use sparse_evo::commands::{
    cmd_analyze, cmd_evaluate, cmd_gen_data, cmd_train_with, AnalyzeMode, AnalyzeOptions,
};
use sparse_evo::config::{read_patch, ConfigPatch, RunConfig};
use sparse_evo::core::{Error as CoreError, EvolutionPolicy, Normalization};
use sparse_evo::parallel::ThreadedCosine;
use sparse_evo::IoError;

#[derive(Parser)]
#[command(name = "sparse-evo", version, about = "Train and analyze sparse MLPs with evolving connectivity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write a run directory.
    Train(Box<TrainArgs>),
    /// Print the accuracy of a saved model on a CSV dataset.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "label")]
        label_column: String,
        /// Normalization applied to the CSV before evaluation.
        #[arg(long, default_value = "none", value_parser = parse_normalization)]
        normalize: Normalization,
    },
    /// Topology analyses of saved models.
    Analyze {
        #[arg(long, value_enum)]
        mode: Mode,
        /// Model file, or a quoted glob of checkpoints for `snapshots`.
        #[arg(long)]
        model: String,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "label")]
        label_column: String,
        #[arg(long, default_value = "none", value_parser = parse_normalization)]
        normalize: Normalization,
        /// Inputs removed between ablation evaluations.
        #[arg(long, default_value_t = 20)]
        step: usize,
        #[arg(long, default_value_t = 20)]
        bins: usize,
        /// Layer for `cosine` mode.
        #[arg(long, default_value_t = 0)]
        layer: usize,
    },
    /// Generate a synthetic dataset as CSV with a `.meta.json` sidecar.
    GenData {
        #[arg(long, default_value = "madelon-like")]
        preset: String,
        #[arg(long, default_value_t = 2600)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Degrees,
    Ablation,
    Snapshots,
    Cosine,
}

#[derive(Args)]
struct TrainArgs {
    /// Flat JSON config file; its keys are the fields of run_config.json.
    #[arg(long)]
    config: Option<PathBuf>,
    /// default, madelon or micromass.
    #[arg(long)]
    preset: Option<String>,
    /// SET, CoDASET, CoPASET, CoRSET, CoDACoRSET or CoPACoRSET.
    #[arg(long)]
    policy: Option<EvolutionPolicy>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    zeta: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Comma-separated hidden widths, e.g. 1000,1000,1000.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long)]
    sample_cap: Option<usize>,
    /// CSV dataset.
    #[arg(long, conflicts_with = "generator")]
    data: Option<PathBuf>,
    /// Synthetic dataset generator (madelon-like).
    #[arg(long)]
    generator: Option<String>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    data_seed: Option<u64>,
    #[arg(long)]
    label_column: Option<String>,
    #[arg(long, value_parser = parse_normalization)]
    normalize: Option<Normalization>,
    #[arg(long)]
    test_samples: Option<usize>,
    #[arg(long)]
    test_fraction: Option<f64>,
    /// Comma-separated epochs at which to save model_epoch<N>.json.
    #[arg(long, value_delimiter = ',')]
    checkpoints: Option<Vec<usize>>,
    /// Suppress per-epoch progress on stderr.
    #[arg(long)]
    quiet: bool,
}

fn parse_normalization(s: &str) -> Result<Normalization, String> {
    s.parse().map_err(|e: CoreError| e.to_string())
}

impl TrainArgs {
    fn patch(&self) -> ConfigPatch {
        ConfigPatch {
            preset: self.preset.clone(),
            policy: self.policy,
            epsilon: self.epsilon,
            zeta: self.zeta,
            eta: self.eta,
            dropout_rate: self.dropout,
            hidden_dims: self.hidden.clone(),
            epochs: self.epochs,
            batch_size: self.batch_size,
            momentum: self.momentum,
            seed: self.seed,
            activation_sample_cap: self.sample_cap,
            data: self.data.clone(),
            generator: self.generator.clone(),
            generator_samples: self.samples,
            data_seed: self.data_seed,
            label_column: self.label_column.clone(),
            normalize: self.normalize,
            test_samples: self.test_samples,
            test_fraction: self.test_fraction,
            out: self.out.clone(),
            checkpoints: self.checkpoints.clone(),
        }
    }
}

fn train(args: &TrainArgs) -> Result<(), IoError> {
    let file = args.config.as_deref().map(read_patch).transpose()?;
    let cfg = RunConfig::resolve(file.as_ref(), &args.patch())?;
    let quiet = args.quiet;
    let outcome = cmd_train_with(&cfg, Box::new(ThreadedCosine::from_env()), |log| {
        if !quiet {
            eprintln!(
                "epoch {:>4}  loss {:.4}  train {:.4}  test {:.4}  edges {}  rewired {}  {} ms",
                log.epoch,
                log.train_loss,
                log.train_accuracy,
                log.test_accuracy,
                log.edges_total,
                log.rewired,
                log.wall_time_ms
            );
        }
    })?;
    println!(
        "{}: final test accuracy {:.4}",
        outcome.out_dir.display(),
        outcome.final_test_accuracy()
    );
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Train(args) => train(&args)?,
        Command::Evaluate {
            model,
            data,
            label_column,
            normalize,
        } => {
            let acc = cmd_evaluate(&model, &data, &label_column, normalize)?;
            println!("{acc:.4}");
        }
        Command::Analyze {
            mode,
            model,
            data,
            out,
            label_column,
            normalize,
            step,
            bins,
            layer,
        } => {
            let mode = match mode {
                Mode::Degrees => AnalyzeMode::Degrees,
                Mode::Ablation => AnalyzeMode::Ablation,
                Mode::Snapshots => AnalyzeMode::Snapshots,
                Mode::Cosine => AnalyzeMode::Cosine,
            };
            let opts = AnalyzeOptions {
                label_column,
                normalize,
                step,
                bins,
                layer,
                ..AnalyzeOptions::new(mode, &model, &data, &out)
            };
            for path in cmd_analyze(&opts)? {
                println!("{}", path.display());
            }
        }
        Command::GenData {
            preset,
            samples,
            seed,
            out,
        } => {
            cmd_gen_data(&preset, samples, seed, &out)
                .with_context(|| format!("generating {}", out.display()))?;
            println!("{}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let usage = err.downcast_ref::<IoError>().is_some_and(IoError::is_usage);
            if let Some(IoError::Core(CoreError::Divergence { epoch, batch })) =
                err.downcast_ref::<IoError>()
            {
                eprintln!("error: training diverged in epoch {epoch} (batch {batch})");
            } else {
                eprintln!("error: {err:#}");
            }
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
