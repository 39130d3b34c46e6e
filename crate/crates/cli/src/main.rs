use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gadl::harness::{
    classification_error, run_baseline, run_compare, run_ga, write_outputs, ArmOutcome,
    ExperimentData,
};
use gadl::stack::DeepStack;
use gadl::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "gadl",
    version,
    about = "GA-assisted training of stacked tied-weight autoencoders"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Best-of-R backprop restarts; writes stack_baseline.gadl and metrics.
    TrainBaseline(Common),
    /// One GA run under the same budget; writes stack_ga.gadl and metrics.
    TrainGa(Common),
    /// Both arms under budget parity; writes metrics.csv and summary.txt.
    Compare(Common),
    /// Encodes a split through a saved stack into features_<split>.csv.
    ExtractFeatures {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        stack: PathBuf,
        #[arg(long, value_enum, default_value_t = Split::Test)]
        split: Split,
    },
    /// Trains the softmax classifier on a saved stack's features and
    /// reports the test error.
    Classify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        stack: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// `key = value` config file; missing keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replaces subsets, architecture and budget with the desk preset
    /// (5000/1000 samples, 784-64-32, 40000 updates).
    #[arg(long)]
    desk_scale: bool,
    /// Extra `key=value` overrides, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Split {
    Train,
    Test,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)
                .with_context(|| format!("reading config {}", p.display()))?,
            None => ExperimentConfig::default(),
        };
        for o in &self.overrides {
            let Some((k, v)) = o.split_once('=') else {
                bail!("override `{o}` is not KEY=VALUE");
            };
            cfg.set(k.trim(), v.trim()).map_err(anyhow::Error::msg)?;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        cfg.desk_scale |= self.desk_scale;
        let cfg = cfg.resolved();
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::TrainBaseline(c) => train_arm(&c.config()?, run_baseline),
        Command::TrainGa(c) => train_arm(&c.config()?, run_ga),
        Command::Compare(c) => {
            let cfg = c.config()?;
            let cmp = run_compare(&cfg)?;
            print!(
                "{}",
                fs::read_to_string(cfg.output_dir.join("summary.txt"))?
            );
            if !cmp.budget_parity_holds() {
                bail!("budget parity violated");
            }
            Ok(())
        }
        Command::ExtractFeatures {
            common,
            stack,
            split,
        } => {
            let cfg = common.config()?;
            let data = ExperimentData::load(&cfg)?;
            let stack = load_stack(&stack, &data)?;
            let (set, name) = match split {
                Split::Train => (&data.train, "train"),
                Split::Test => (&data.test, "test"),
            };
            let features = stack.extract_all(set.base.samples())?;
            let mut csv = String::new();
            for (f, label) in features.iter().zip(&set.labels) {
                let _ = write!(csv, "{label}");
                for v in f.iter() {
                    let _ = write!(csv, ",{v}");
                }
                csv.push('\n');
            }
            fs::create_dir_all(&cfg.output_dir)?;
            let path = cfg.output_dir.join(format!("features_{name}.csv"));
            fs::write(&path, csv)?;
            println!(
                "wrote {} rows of width {} to {}",
                features.len(),
                stack.output_width(),
                path.display()
            );
            Ok(())
        }
        Command::Classify { common, stack } => {
            let cfg = common.config()?;
            let data = ExperimentData::load(&cfg)?;
            let stack = load_stack(&stack, &data)?;
            let err = classification_error(&cfg, &data, &stack)?;
            println!("classification_error = {err:.6}");
            Ok(())
        }
    }
}

fn load_stack(path: &Path, data: &ExperimentData) -> Result<DeepStack> {
    DeepStack::from_gadl_bytes(&fs::read(path)?, Some(data.train.base.dim()))
        .with_context(|| format!("loading stack {}", path.display()))
}

fn train_arm(
    cfg: &ExperimentConfig,
    arm: fn(&ExperimentConfig, &ExperimentData) -> gadl::Result<ArmOutcome>,
) -> Result<()> {
    let data = ExperimentData::load(cfg)?;
    let mut outcome = arm(cfg, &data)?;
    outcome.report.classification_error = Some(classification_error(cfg, &data, &outcome.stack)?);
    write_outputs(cfg, &cfg.output_dir, &[&outcome], None)?;
    print!(
        "{}",
        fs::read_to_string(cfg.output_dir.join("summary.txt"))?
    );
    Ok(())
}
