use clap::{Parser, Subcommand};
use nlgm_cli::{commands, config, sweep, Failure};
use std::path::PathBuf;
use std::process::ExitCode;

/// Steady states of activator–inhibitor systems with nonlocal production:
/// single solves, (lambda, mu) existence sweeps, estimate verification and
/// the tail-divergence probe.
#[derive(Parser)]
#[command(name = "nlgm", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Path to the JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides output.directory from the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Random seed (overrides the config's seed field).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one coupled solve; writes u.field, v.field, report.json, decay.csv.
    Solve,
    /// Sweep the (lambda, mu) plane; writes existence_map.csv and frontier.csv.
    Sweep,
    /// Run the named estimate checks; writes verify_report.json.
    Verify,
    /// Tail-divergence probe for Riesz kernels; writes probe.csv.
    Probe,
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config_path = cli
        .config
        .ok_or_else(|| Failure::usage("--config <path> is required".into()))?;
    let loaded = config::load_config(&config_path)?;
    let seed = cli.seed.unwrap_or(loaded.config.seed);
    let out_dir = cli
        .out
        .or_else(|| loaded.config.output.directory.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));

    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::usage(format!("cannot size the worker pool: {e}")))?;
    }

    match cli.command {
        Command::Solve => commands::cmd_solve(&loaded, &out_dir, seed),
        Command::Sweep => sweep::cmd_sweep(&loaded, &out_dir, seed).map(|_| ()),
        Command::Verify => commands::cmd_verify(&loaded, &out_dir, seed),
        Command::Probe => commands::cmd_probe(&loaded, &out_dir, seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.exit_code())
        }
    }
}
