use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use leadflow_cli::commands::{cmd_fit, cmd_network, cmd_synth, cmd_topics, cmd_validate};
use leadflow_cli::config::{load_config, RunConfig};
use leadflow_cli::error::CliError;
use std::path::PathBuf;
use std::process::ExitCode;

/// Leadership-flow network and gravity-model toolkit.
#[derive(Debug, Parser)]
#[command(name = "leadflow", version, about, max_term_width = 100)]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override one config key, e.g. --set run.seed=7 (repeatable).
    #[arg(long, global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Directory receiving all output files.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out_dir: PathBuf,

    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Override the master seed from the config.
    #[arg(long, global = true, value_name = "SEED")]
    seed: Option<u64>,

    /// Abort on the first invalid input record (default).
    #[arg(long, global = true, overrides_with = "lenient")]
    strict: bool,

    /// Skip invalid input records and report tallies instead.
    #[arg(long, global = true, overrides_with = "strict")]
    lenient: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse the inputs, check every invariant, and report counts.
    Validate,
    /// Build the leadership-flow network and its ranking tables.
    Network,
    /// Run the full estimation pipeline.
    Fit,
    /// Generate a synthetic corpus and registry.
    Synth,
    /// Fit the topic model and dump its matrices.
    Topics,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(3);
        }
    };
    match run(cli) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error ({}): {e}", e.kind());
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<Vec<String>, CliError> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::usage(format!("cannot size the thread pool: {e}")))?;
    }
    let mut config: RunConfig = load_config(cli.config.as_deref(), &cli.set)?;
    if let Some(seed) = cli.seed {
        config.run.seed = seed;
    }
    if cli.lenient {
        config.run.strict = false;
    } else if cli.strict {
        config.run.strict = true;
    }

    let outcome = match cli.command {
        Command::Validate => cmd_validate(&config)?,
        Command::Network => cmd_network(&config, &cli.out_dir)?,
        Command::Fit => cmd_fit(&config, &cli.out_dir)?,
        Command::Synth => cmd_synth(&config, &cli.out_dir)?,
        Command::Topics => cmd_topics(&config, &cli.out_dir)?,
    };
    Ok(outcome.lines)
}
