//! `lwrcert`: generate ground truth, train the density estimator, certify it
//! across free-flow speeds and summarize the run.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};
use lwrcert_core::lwr::{read_dataset_file, write_csv};
use lwrcert_core::pipeline::{cmd_certify, cmd_generate, cmd_report, cmd_train, RunConfig, CONFIG_KEYS};

#[derive(Debug, Parser)]
#[command(
    name = "lwrcert",
    version,
    about = "Physics-based certification of a neural traffic density estimator"
)]
struct Cli {
    /// Run configuration (`key = value` lines); defaults apply to absent keys.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Run directory; overrides `output_dir` from the config.
    #[arg(long, global = true, value_name = "DIR")]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the conservation law for the training speed and every sweep speed.
    Generate,
    /// Sample the training dataset and train a fresh network.
    Train {
        /// Dataset to sample instead of the run's training dataset.
        #[arg(long, value_name = "PATH")]
        dataset: Option<PathBuf>,
    },
    /// Score the model in every sweep environment and classify it.
    Certify {
        /// Model file instead of the run's `model.tsem`.
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
    },
    /// Write the run summary and `npl_curve.csv`.
    Report,
    /// Print the effective configuration.
    Config,
    /// Write a dataset file as `x,t,rho` CSV to stdout.
    Export {
        #[arg(value_name = "DATASET")]
        dataset: PathBuf,
    },
}

fn keys_help() -> String {
    let width = CONFIG_KEYS.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let defaults = RunConfig::default().emit();
    let mut out = String::from("Config keys (default in brackets):\n");
    for ((key, doc), line) in CONFIG_KEYS.iter().zip(defaults.lines()) {
        let default = line.split_once('=').map_or("", |(_, v)| v.trim());
        let _ = writeln!(out, "  {key:<width$}  {doc} [{default}]");
    }
    out
}

fn load_config(path: Option<&Path>, output: Option<&Path>) -> Result<RunConfig> {
    let mut config = match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            RunConfig::parse(&text).with_context(|| format!("in config {}", p.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(dir) = output {
        config.output_dir = dir.to_path_buf();
    }
    Ok(config)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let matches = Cli::command().after_long_help(keys_help()).get_matches();
    let cli = Cli::from_arg_matches(&matches)?;
    let config = load_config(cli.config.as_deref(), cli.output.as_deref())?;

    match cli.command {
        Command::Generate => {
            let out = cmd_generate(&config)?;
            for p in &out.datasets {
                println!("wrote {}", p.display());
            }
            println!("Godunov cross-check (mean |difference|): {:e} veh/m", out.godunov_l1);
        }
        Command::Train { dataset } => {
            let out = cmd_train(&config, dataset.as_deref())?;
            println!(
                "wrote {} ({} parameters, final MSE {:e}, {:.1} s)",
                out.model_path.display(),
                out.model.num_params(),
                out.report.final_mse,
                out.report.wall_time_secs
            );
        }
        Command::Certify { model } => {
            let out = cmd_certify(&config, model.as_deref())?;
            for p in &out.regenerated {
                println!("regenerated missing dataset {}", p.display());
            }
            print!("{}", lwrcert_core::certify::report_table(&out.report));
        }
        Command::Report => {
            let out = cmd_report(&config.output_dir)?;
            print!("{}", out.summary);
        }
        Command::Config => print!("{}", config.emit()),
        Command::Export { dataset } => {
            let field = read_dataset_file(&dataset)?;
            let mut out = std::io::BufWriter::new(std::io::stdout().lock());
            write_csv(&field, &mut out)?;
            out.flush()?;
        }
    }
    Ok(())
}
