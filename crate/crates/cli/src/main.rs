use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use optswitch::generate::{CostKind, GenConfig};
use optswitch::switching::DEFAULT_TOL;
use optswitch_cli::{cmd_gen, cmd_oracle, cmd_solve, cmd_validate, exit, parse_cost_kind};

/// Exact optimal switching on finite scenario trees.
///
/// SWITCH_THREADS caps the worker count; 0 runs everything sequentially.
#[derive(Parser)]
#[command(name = "optswitch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem and write reports and plot data into a directory.
    Solve {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Check the cost assumptions and the martingale hypothesis.
    Validate {
        #[arg(long)]
        input: PathBuf,
    },
    /// Compare the solver with exhaustive policy enumeration.
    Oracle {
        #[arg(long)]
        input: PathBuf,
        /// Per-path switch budget; defaults to horizon * (modes - 1).
        #[arg(long)]
        max_switches: Option<usize>,
    },
    /// Write a seeded random problem that satisfies the cost assumptions.
    Gen {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        depth: usize,
        #[arg(long)]
        branching: usize,
        #[arg(long)]
        modes: usize,
        #[arg(long)]
        output: PathBuf,
        /// signed, martingale or non-negative.
        #[arg(long, default_value = "signed", value_parser = parse_cost_kind)]
        costs: CostKind,
    },
}

fn run(cli: Cli) -> i32 {
    let (mut out, mut err) = (io::stdout().lock(), io::stderr().lock());
    match cli.command {
        Command::Solve { input, tol, output } => cmd_solve(&input, tol, &output, &mut out, &mut err),
        Command::Validate { input } => cmd_validate(&input, &mut out, &mut err),
        Command::Oracle { input, max_switches } => cmd_oracle(&input, max_switches, &mut out, &mut err),
        Command::Gen { seed, depth, branching, modes, output, costs } => {
            let cfg = GenConfig::new(seed, depth, branching, modes).with_costs(costs);
            cmd_gen(&cfg, &output, &mut out, &mut err)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::PARSE as u8 } else { 0 });
        }
    };
    let code = match std::env::var("SWITCH_THREADS") {
        Err(_) => run(cli),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(0) => optswitch::exec::serial(|| run(cli)),
            Ok(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                Ok(pool) => pool.install(|| run(cli)),
                Err(e) => {
                    eprintln!("error: cannot start {n} worker threads: {e}");
                    exit::FAILED
                }
            },
            Err(_) => {
                eprintln!("error: SWITCH_THREADS must be a non-negative integer, got {v:?}");
                exit::PARSE
            }
        },
    };
    ExitCode::from(code as u8)
}
