//! `strength-ties`: fit, compare, query and simulate paired-comparison
//! models whose draw probability and first-move advantage vary with strength.
//!
//! Exit status: 0 on success, 2 on bad input or data, 3 when a fit did not
//! converge (its outputs are still written).

mod compare;
mod fit;
mod output;
mod predict;
mod simulate;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use strength_ties::bayes::McmcConfig;
use strength_ties::model::Color;

use output::Status;

#[derive(Parser, Debug)]
#[command(name = "strength-ties", version, about = "Paired comparisons with strength-dependent draws and order effects")]
struct Cli {
    /// Worker threads for parallel chains and compare cells (default: all cores).
    #[arg(long, global = true, env = "STRENGTH_TIES_THREADS")]
    threads: Option<usize>,

    /// Suppress progress messages on standard error.
    #[arg(long, short, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit one model to a games file and write a JSON report.
    Fit(fit::FitArgs),
    /// Fit a grid of models and prior schemes and tabulate their DIC.
    Compare(compare::CompareArgs),
    /// Outcome probabilities for one game under a fitted report.
    Predict(predict::PredictArgs),
    /// Outcome probabilities over a grid of opponent strengths, as CSV.
    Curves(predict::CurvesArgs),
    /// Simulate a Swiss tournament and write its games as CSV.
    Simulate(simulate::SimulateArgs),
    /// Empirical draw rate by average rating, as CSV.
    Diagnose(simulate::DiagnoseArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PriorChoice {
    Informative,
    Exchangeable,
    /// Maximum likelihood, no prior.
    None,
}

impl PriorChoice {
    pub fn name(self) -> &'static str {
        match self {
            PriorChoice::Informative => "informative",
            PriorChoice::Exchangeable => "exchangeable",
            PriorChoice::None => "none",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ColorChoice {
    White,
    Black,
}

impl From<ColorChoice> for Color {
    fn from(c: ColorChoice) -> Self {
        match c {
            ColorChoice::White => Color::White,
            ColorChoice::Black => Color::Black,
        }
    }
}

/// Sampler settings shared by `fit` and `compare`.
#[derive(Args, Debug, Clone)]
pub struct McmcArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    chains: usize,
    #[arg(long, default_value_t = 20_000)]
    iterations: usize,
    #[arg(long, default_value_t = 10_000)]
    burn_in: usize,
    #[arg(long, default_value_t = 5)]
    thin: usize,
    #[arg(long, default_value_t = 50)]
    adapt_window: usize,
    #[arg(long, default_value_t = 0.35)]
    target_acceptance: f64,
}

impl McmcArgs {
    pub fn config(&self) -> McmcConfig {
        McmcConfig {
            chains: self.chains,
            iterations: self.iterations,
            burn_in: self.burn_in,
            thin: self.thin,
            seed: self.seed,
            adapt_window: self.adapt_window,
            target_acceptance: self.target_acceptance,
            ..McmcConfig::default()
        }
    }

    pub fn record(&self, overrides: &mut std::collections::BTreeMap<String, String>) {
        for (k, v) in [
            ("chains", self.chains.to_string()),
            ("iterations", self.iterations.to_string()),
            ("burn_in", self.burn_in.to_string()),
            ("thin", self.thin.to_string()),
            ("adapt_window", self.adapt_window.to_string()),
            ("target_acceptance", self.target_acceptance.to_string()),
        ] {
            overrides.insert(k.to_owned(), v);
        }
    }
}

pub struct Context {
    pub quiet: bool,
}

impl Context {
    pub fn progress(&self, msg: impl FnOnce() -> String) {
        if !self.quiet {
            eprintln!("{}", msg());
        }
    }
}

pub fn path_string(p: &std::path::Path) -> String {
    p.display().to_string()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot set up {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let ctx = Context { quiet: cli.quiet };
    let result = match cli.command {
        Command::Fit(args) => fit::run(&ctx, args),
        Command::Compare(args) => compare::run(&ctx, args),
        Command::Predict(args) => predict::run_predict(args),
        Command::Curves(args) => predict::run_curves(args),
        Command::Simulate(args) => simulate::run_simulate(args),
        Command::Diagnose(args) => simulate::run_diagnose(args),
    };
    match result {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::NotConverged(msg)) => {
            eprintln!("warning: {msg}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
