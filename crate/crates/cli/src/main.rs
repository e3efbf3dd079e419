//! `fsynth`: label recordings, train class forecasters, synthesize epochs
//! and evaluate O / S / OS classifiers.
//!
//! On failure a single JSON line goes to stderr and the exit code names the
//! error class:
//!
//! | code | meaning                                   |
//! |------|-------------------------------------------|
//! | 2    | usage error (unknown flag, bad value)     |
//! | 3    | unreadable or invalid config              |
//! | 4    | missing upstream artifact                 |
//! | 5    | invalid input data                        |
//! | 6    | artifact produced under a different config|
//! | 1    | anything else (I/O, serialisation)        |

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use forecast_synth::config::{PipelineConfig, DEFAULT_WORKDIR, WORKDIR_CONFIG};
use forecast_synth::evaluation::{aggregate_csv, Condition, ForecasterChoice, GridResult};
use forecast_synth::pipeline::{Pipeline, Selection};
use forecast_synth::Error;

#[derive(Parser, Debug)]
#[command(name = "fsynth", version, about = "Class-conditional forecasters as biosignal synthesizers")]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    /// Pipeline config (JSON); missing fields take their defaults. Without
    /// it, stages after `label` reuse the config recorded in the workdir.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Base seed; every random choice in the pipeline derives from it.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Run only this context window length.
    #[arg(long, global = true, value_name = "L")]
    window: Option<usize>,

    /// Run only this condition: O, S or OS.
    #[arg(long, global = true, value_name = "COND", value_parser = parse_condition)]
    condition: Option<Condition>,

    /// Run only this forecaster, e.g. `linear-dms` or `mlp-w128`.
    #[arg(long, global = true, value_name = "NAME", value_parser = parse_forecaster)]
    forecaster: Option<ForecasterChoice>,

    /// Workdir for all artifacts (overrides the config).
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Print the default config (the demo preset with `demo`) and exit.
    #[arg(long, global = true)]
    print_default_config: bool,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Label the configured recording (or the toy recording) into epochs.
    Label,
    /// Train one forecaster per class for every grid cell.
    TrainForecasters,
    /// Generate one synthetic epoch per training epoch.
    Synthesize,
    /// Train and score classifiers, then write reports.
    Evaluate,
    /// Run every stage on the toy recording.
    Demo,
}

fn parse_condition(s: &str) -> Result<Condition, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_forecaster(s: &str) -> Result<ForecasterChoice, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 3,
        Error::MissingArtifact(_) => 4,
        Error::InvalidInput(_)
        | Error::ShapeMismatch { .. }
        | Error::InsufficientData { .. }
        | Error::Divergence { .. }
        | Error::Leakage(_)
        | Error::Parse { .. } => 5,
        Error::HashMismatch(_) => 6,
        _ => 1,
    }
}

fn kind(code: u8) -> &'static str {
    match code {
        2 => "usage",
        3 => "config",
        4 => "missing_artifact",
        5 => "invalid_data",
        6 => "hash_mismatch",
        _ => "internal",
    }
}

fn fail(code: u8, message: &str) -> ExitCode {
    let line = serde_json::json!({ "error": kind(code), "code": code, "message": message });
    eprintln!("{line}");
    ExitCode::from(code)
}

fn print_grid(result: &GridResult, pipeline: &Pipeline) {
    print!("{}", aggregate_csv(&result.aggregate, &pipeline.conditions()));
    if !result.failures.is_empty() {
        log::warn!("{} runs failed; see failures.jsonl", result.failures.len());
    }
}

fn run(cli: &Cli, command: Command) -> forecast_synth::Result<()> {
    let recorded = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_WORKDIR))
        .join(WORKDIR_CONFIG);
    let mut config = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None if command == Command::Demo => PipelineConfig::demo(),
        None if recorded.is_file() => {
            let mut c = PipelineConfig::load(&recorded)?;
            c.paths.workdir = recorded.parent().map(PathBuf::from);
            c
        }
        None => PipelineConfig::default(),
    };
    if command == Command::Demo {
        config.paths.eeg_input = None;
        config.paths.emg_input = None;
    }
    if let Some(seed) = cli.seed {
        config.experiment.base_seed = seed;
    }
    if let Some(out) = &cli.out {
        config.paths.workdir = Some(out.clone());
        config.paths.reports = None;
    }
    let selection = Selection {
        forecaster: cli.forecaster,
        window: cli.window,
        condition: cli.condition,
    };
    let pipeline = Pipeline::new(config, selection)?;
    log::info!("config hash {}", pipeline.config_hash());
    match command {
        Command::Label => {
            let s = pipeline.label()?;
            println!(
                "labeled {} epochs (WAKE {}, NREM {}, REM {}) -> {}",
                s.epochs,
                s.class_counts[0],
                s.class_counts[1],
                s.class_counts[2],
                pipeline.dataset_path().display()
            );
        }
        Command::TrainForecasters => println!("trained {} forecasters", pipeline.train_forecasters()?),
        Command::Synthesize => println!("wrote {} synthetic datasets", pipeline.synthesize()?),
        Command::Evaluate => print_grid(&pipeline.evaluate()?, &pipeline),
        Command::Demo => print_grid(&pipeline.run_all()?, &pipeline),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            return fail(2, msg.lines().next().unwrap_or("invalid arguments"));
        }
    };
    if cli.print_default_config {
        let config = match cli.command {
            Some(Command::Demo) => PipelineConfig::demo(),
            _ => PipelineConfig::default(),
        };
        println!("{}", config.to_pretty_json());
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        return fail(2, "no subcommand given; see --help");
    };
    match run(&cli, command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(exit_code(&e), &e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_classes_map_to_distinct_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 3);
        assert_eq!(exit_code(&Error::MissingArtifact("x".into())), 4);
        assert_eq!(exit_code(&Error::Leakage("x".into())), 5);
        assert_eq!(exit_code(&Error::HashMismatch("x".into())), 6);
        for code in 1..=6 {
            assert!(!kind(code).is_empty());
        }
    }

    #[test]
    fn cli_parses_global_flags_after_subcommand() {
        let cli = Cli::try_parse_from(["fsynth", "evaluate", "--condition", "O+S", "--window", "50", "--forecaster", "mlp-w64"]).unwrap();
        assert_eq!(cli.command, Some(Command::Evaluate));
        assert_eq!(cli.condition, Some(Condition::OS));
        assert_eq!(cli.window, Some(50));
        assert_eq!(cli.forecaster.unwrap().name(), "mlp-w64");
    }
}
