use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use discomp::{run, CliError, Command, Context, RunConfig};

/// Compose discrete generative processes on toy worlds.
///
/// Exit codes: 0 success, 2 invalid config or input, 3 sampling failure,
/// 4 an asserted property failed.
#[derive(Debug, Parser)]
#[command(name = "discomp", version)]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides `seed` from the config.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Directory for artifacts and reports.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Named property suite, for `eval`.
    #[arg(long, global = true, value_name = "NAME")]
    suite: Option<String>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Validate the world and write it as a DCW1 artifact.
    BuildWorld,
    /// Fit the configured model and write it.
    FitModel,
    /// Learn a patch codebook from rendered world images.
    LearnCodebook,
    /// Draw composed samples, rendered to PPM when `sample.render` is set.
    Sample,
    /// Error-rate and negation evaluation, or `--suite acceptance`.
    Eval,
    /// Evaluation counts and timings over the bench grid.
    Bench,
    /// Print the sections and contents of a DCW1 file.
    Inspect { file: PathBuf },
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.clone(), source })?;
            RunConfig::from_toml(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match &cli.command {
        Cmd::BuildWorld => Command::BuildWorld,
        Cmd::FitModel => Command::FitModel,
        Cmd::LearnCodebook => Command::LearnCodebook,
        Cmd::Sample => Command::Sample,
        Cmd::Eval => Command::Eval { suite: cli.suite.clone() },
        Cmd::Bench => Command::Bench,
        Cmd::Inspect { file } => Command::Inspect { path: file.clone() },
    };
    if cli.suite.is_some() && !matches!(command, Command::Eval { .. }) {
        eprintln!("error: --suite only applies to eval");
        return ExitCode::from(2);
    }
    let result = load_config(&cli).and_then(|cfg| run(&command, &Context::new(cfg, &cli.out)));
    match result {
        Ok(out) => {
            print!("{}", out.table);
            if let Some(p) = &out.report_path {
                eprintln!("report: {}", p.display());
            }
            for f in &out.failures {
                eprintln!("property failed: {f}");
            }
            ExitCode::from(out.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
