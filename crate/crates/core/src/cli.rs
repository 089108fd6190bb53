//! Command-line front end: `ptp train-offline | train-online | process`.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::pipeline::ComponentFactory;
use crate::workers::{
    assemble_config, exit_code, run_offline_trainer, run_online_trainer, run_processor, RunSummary, WorkerOptions,
    EXIT_CONFIG, EXIT_OK,
};
use crate::Result;

#[derive(Debug, Parser)]
#[command(name = "ptp", version, about = "Run configuration-driven pipeline experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Epoch-based training with full validation passes.
    TrainOffline(RunArgs),
    /// Episode-based training with periodic single-batch validation.
    TrainOnline(RunArgs),
    /// Single evaluation pass over the test task.
    Process(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LogLevel {
    Debug,
    Info,
    Warning,
    Error,
}

impl LogLevel {
    pub fn filter(self) -> log::LevelFilter {
        match self {
            Self::Debug => log::LevelFilter::Debug,
            Self::Info => log::LevelFilter::Info,
            Self::Warning => log::LevelFilter::Warn,
            Self::Error => log::LevelFilter::Error,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Configuration files, merged left to right.
    #[arg(long, required = true, value_delimiter = ',', value_name = "C1.yml[,C2.yml,...]")]
    pub config: Vec<PathBuf>,
    /// Root directory for experiment outputs.
    #[arg(long, default_value = "./experiments")]
    pub expdir: PathBuf,
    /// Experiment seed [default: the configuration's `seed`, else 1337].
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value = "info")]
    pub log_level: LogLevel,
    /// Override applied after every file, e.g. `training.task.batch_size=64`.
    #[arg(long = "set", value_name = "KEY.PATH=VALUE")]
    pub overrides: Vec<String>,
    /// Batches prepared ahead on a producer thread (0 = synchronous).
    #[arg(long, default_value_t = 0)]
    pub prefetch: usize,
}

impl Command {
    pub fn args(&self) -> &RunArgs {
        match self {
            Self::TrainOffline(a) | Self::TrainOnline(a) | Self::Process(a) => a,
        }
    }
}

/// Runs a parsed command with the built-in component zoo.
pub fn execute(command: &Command) -> Result<RunSummary> {
    let args = command.args();
    let config = assemble_config(&args.config, args.seed, &args.overrides)?;
    let opts = WorkerOptions {
        expdir: args.expdir.clone(),
        prefetch: args.prefetch,
    };
    let factory = ComponentFactory::with_zoo();
    match command {
        Command::TrainOffline(_) => run_offline_trainer(config, &factory, &opts),
        Command::TrainOnline(_) => run_online_trainer(config, &factory, &opts),
        Command::Process(_) => run_processor(config, &factory, &opts),
    }
}

fn print_summary(out: &mut impl Write, summary: &RunSummary) -> std::io::Result<()> {
    writeln!(out, "experiment directory: {}", summary.exp_dir.display())?;
    let rows = [
        ("training", summary.training.last()),
        ("validation", summary.validation.last()),
    ];
    for (phase, agg) in rows.into_iter().chain([("test", summary.test.as_ref())]) {
        if let Some(agg) = agg {
            for (key, s) in &agg.stats {
                writeln!(out, "{phase} {key}: {}", crate::stats::format_g6(s.mean))?;
            }
        }
    }
    if let Some(best) = summary.status.best_validation_loss {
        writeln!(out, "best validation loss: {}", crate::stats::format_g6(best))?;
    }
    Ok(())
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONFIG,
            };
        }
    };
    let _ = env_logger::Builder::new()
        .filter_level(cli.command.args().log_level.filter())
        .format_timestamp(None)
        .try_init();
    let result = execute(&cli.command);
    match &result {
        Ok(summary) => {
            let _ = print_summary(&mut std::io::stdout(), summary);
        }
        Err(e) => eprintln!("error: {e}"),
    }
    exit_code(&result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> std::result::Result<Cli, clap::Error> {
        Cli::try_parse_from(std::iter::once("ptp").chain(args.iter().copied()))
    }

    #[test]
    fn defaults() {
        let cli = parse(&["train-offline", "--config", "a.yml"]).unwrap();
        let a = cli.command.args();
        assert_eq!(a.config, [PathBuf::from("a.yml")]);
        assert_eq!(a.expdir, PathBuf::from("./experiments"));
        assert_eq!(a.seed, None);
        assert_eq!(a.log_level, LogLevel::Info);
        assert_eq!(a.prefetch, 0);
    }

    #[test]
    fn comma_separated_configs_and_repeated_sets() {
        let cli = parse(&[
            "process",
            "--config",
            "a.yml,b.yml",
            "--set",
            "x.y=1",
            "--set",
            "z=2",
            "--log-level",
            "warning",
        ])
        .unwrap();
        let a = cli.command.args();
        assert_eq!(a.config.len(), 2);
        assert_eq!(a.overrides, ["x.y=1", "z=2"]);
        assert_eq!(a.log_level.filter(), log::LevelFilter::Warn);
    }

    #[test]
    fn rejects_bad_invocations() {
        assert!(parse(&["train-online"]).is_err());
        assert!(parse(&["train-online", "--config", "a.yml", "--gpu"]).is_err());
        assert!(parse(&["fly", "--config", "a.yml"]).is_err());
    }
}
