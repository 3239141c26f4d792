use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

#[derive(Parser)]
#[command(name = "mfgprox", version, about = "Proximal splitting solvers for stationary mean field games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one solve described by an INI config.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `[output] dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the resolved configuration and step sizes, then exit.
        #[arg(long)]
        dry_run: bool,
    },
    /// Reproduce a benchmark table.
    Bench {
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..=4))]
        test: u32,
        /// Comma-separated algorithm names.
        #[arg(long, value_delimiter = ',')]
        algos: Option<Vec<String>>,
        /// Comma-separated grid sizes.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long, default_value = "bench")]
        out: PathBuf,
    },
    /// Re-verify the optimality certificate of a solve output directory.
    Check {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Print operator norms and default step sizes.
    Norms {
        #[arg(long)]
        nh: usize,
        #[arg(long, allow_hyphen_values = true)]
        nu: f64,
        #[arg(long, default_value_t = 2.0)]
        q: f64,
    },
}

fn init_threads() {
    let Ok(raw) = std::env::var("MFGPROX_THREADS") else {
        return;
    };
    match raw.trim().parse::<usize>() {
        Ok(n) => {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
        Err(_) => eprintln!("warning: ignoring MFGPROX_THREADS={raw}"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads();
    let code = match cli.command {
        Command::Solve { config, out, dry_run } => commands::solve(&config, out, dry_run),
        Command::Bench {
            test,
            algos,
            sizes,
            out,
        } => commands::bench(test, algos, sizes, &out),
        Command::Check { dir } => commands::check(&dir),
        Command::Norms { nh, nu, q } => commands::norms(nh, nu, q),
    };
    ExitCode::from(code)
}
