mod commands;
mod settings;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use settings::{CliError, Settings};
use std::process::ExitCode;

/// Block Gauß, Gauß-Radau and Kreĭn-Nudelman quadrature for transfer functions
/// `B^T (A + sI)^{-1} B` of large sparse symmetric operators.
#[derive(Parser)]
#[command(name = "krylovkn", version, arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a model problem as A.mtx, B.mtx and meta.kv
    Gen(ProblemArgs),
    /// Convergence study: every rule at every shift for m = stride, 2 stride, ...
    Run(RunArgs),
    /// Shift sweep at a fixed number of steps
    Sweep(RunArgs),
    /// Fixed-seed consistency checks
    Selftest,
}

#[derive(Args)]
struct ProblemArgs {
    /// key = value file; command-line flags take precedence
    #[arg(long)]
    config: Option<String>,
    /// halfline, diffusion2d or maxwell3d
    #[arg(long)]
    problem: Option<String>,
    /// Order of the half-line model
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    nx: Option<String>,
    #[arg(long)]
    ny: Option<String>,
    #[arg(long)]
    nz: Option<String>,
    /// Exterior cells per side
    #[arg(long)]
    nopt: Option<String>,
    /// Conductivity, e.g. "1;10:30,30:45=0.05" (background; box=value; ...)
    #[arg(long)]
    sigma: Option<String>,
    /// Diffusion transducer node ix:iy (repeatable)
    #[arg(long)]
    transducer: Vec<String>,
    /// Maxwell loop ix:iy:iz:axis (repeatable)
    #[arg(long = "loop", id = "loop")]
    loops: Vec<String>,
    #[arg(long)]
    mu0: Option<String>,
    /// Output directory for gen
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Matrix Market file for A (instead of --problem)
    #[arg(long)]
    matrix: Option<String>,
    /// Matrix Market array file for B
    #[arg(long)]
    rhs: Option<String>,
    /// Lanczos steps
    #[arg(long)]
    m: Option<String>,
    /// Checkpoint stride (run only)
    #[arg(long)]
    stride: Option<String>,
    /// Comma-separated subset of gauss,radau,avg,kn-spectral,kn-matching
    #[arg(long)]
    rules: Option<String>,
    /// Comma-separated complex shifts, e.g. 1e-2,1e-2i,0.1-0.3i
    #[arg(long, allow_hyphen_values = true)]
    shifts: Option<String>,
    /// Log sweep start:stop:count:real|imag (repeatable)
    #[arg(long)]
    sweep: Vec<String>,
    /// on or off
    #[arg(long)]
    reference: Option<String>,
    /// CSV path; stdout when absent
    #[arg(long)]
    output: Option<String>,
    /// on or off; off writes 0 in wall_ms for byte-identical output
    #[arg(long)]
    timing: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    epsilon_rel: Option<String>,
    #[arg(long)]
    n_quad: Option<String>,
    #[arg(long)]
    d_fraction: Option<String>,
    #[arg(long)]
    support_threshold: Option<String>,
    #[arg(long)]
    restarts: Option<String>,
    #[arg(long)]
    match_count: Option<String>,
    /// Weight of the newest selection when smoothing the damping pair across checkpoints
    #[arg(long)]
    smoothing: Option<String>,
    /// auto, full or none
    #[arg(long)]
    reorth: Option<String>,
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("KRYLOVKN_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("KRYLOVKN_THREADS must be a positive integer, got '{v}'")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn dispatch(matches: &clap::ArgMatches, cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    let sub = matches.subcommand().map(|(_, m)| m);
    let settings = || sub.map(Settings::from_matches).unwrap_or_else(|| Ok(Settings::default()));
    match cli.command {
        Command::Gen(_) => {
            let set = settings()?;
            if set.raw("problem").is_none() {
                let mut cmd = Cli::command();
                cmd.build();
                let usage = cmd.find_subcommand_mut("gen").map(|c| c.render_usage().to_string()).unwrap_or_default();
                return Err(CliError::Config(format!("--problem is required\n\n{usage}")));
            }
            commands::cmd_gen(&set, &mut std::io::stdout())
        }
        Command::Run(_) => commands::cmd_run(&settings()?, false),
        Command::Sweep(_) => commands::cmd_run(&settings()?, true),
        Command::Selftest => commands::cmd_selftest(&mut std::io::stdout()),
    }
}

fn main() -> ExitCode {
    let matches = Cli::command().get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match dispatch(&matches, cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("krylovkn: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
