//! `dtx` — command-line experiment harness over the discount-gap
//! expansion library.
//!
//! Grammar: `dtx <command> [--config FILE] [--seed N] [--out PATH] [flags]`.
//! Flags override config-file values; every output embeds the fully
//! resolved configuration and the library version. Exit codes: 0 success,
//! 2 parameter error, 3 numeric error, 4 I/O error.

mod commands;
mod meta;

use clap::Parser;
use dtx_core::Error;

#[derive(Parser, Debug)]
#[command(name = "dtx", version, about = "Discount-gap expansion experiments")]
enum Cli {
    /// Generate a random tabular MDP and write it as JSON.
    GenMdp(commands::gen_mdp::Args),
    /// Error-versus-order curves for exact and sampled expansions.
    FigTradeoff(commands::fig_tradeoff::Args),
    /// Best expansion order as a function of base-estimate noise.
    FigOptimalK(commands::fig_optimal_k::Args),
    /// Exact gradient decomposition with finite-difference residuals.
    GradDemo(commands::grad_demo::Args),
    /// Empirical coverage of the phased finite-sample bound.
    Bounds(commands::bounds_cmd::Args),
    /// Tabular policy-gradient training across update variants.
    Train(commands::train::Args),
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numeric(_) => 3,
        Error::Io(_) => 4,
        _ => 2,
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match cli {
        Cli::GenMdp(args) => commands::gen_mdp::run(args),
        Cli::FigTradeoff(args) => commands::fig_tradeoff::run(args),
        Cli::FigOptimalK(args) => commands::fig_optimal_k::run(args),
        Cli::GradDemo(args) => commands::grad_demo::run(args),
        Cli::Bounds(args) => commands::bounds_cmd::run(args),
        Cli::Train(args) => commands::train::run(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}
