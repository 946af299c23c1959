//! `qkzb` — batch front-end for the verification suite.
//!
//! Exit codes: 0 all checks pass, 1 a numeric check failed, 2 the
//! configuration is malformed or invalid.

mod config;
mod report;
mod runner;

use std::io::Write;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;
use crate::runner::{run, Command as RunCommand, MonodromyKind};

#[derive(Parser)]
#[command(
    name = "qkzb",
    about = "Elliptic R-matrices, qKZB difference operators and their hypergeometric solutions: numeric verification runs",
    version
)]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,

    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to a JSON run configuration; defaults are bundled per command.
    #[arg(long, global = true)]
    config: Option<std::path::PathBuf>,

    /// Override the configuration seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Scale every tolerance by this factor.
    #[arg(long, global = true)]
    tol_scale: Option<f64>,

    /// Number of worker threads for parallel verification jobs.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Write the result record to a file instead of standard output.
    #[arg(long, global = true)]
    out: Option<std::path::PathBuf>,
}

#[derive(Subcommand)]
enum CliCommand {
    /// Report the genericity and regime conditions of the parameter set.
    Validate,
    /// Print R-matrix blocks as JSON and cross-check the closed form.
    Rmatrix,
    /// Compute the solution tensor u and an assembled solution Ψ_f.
    Solve,
    /// Run one of the verification suites.
    Verify {
        #[command(subcommand)]
        target: VerifyTarget,
    },
}

#[derive(Subcommand)]
enum VerifyTarget {
    /// Dynamical Yang–Baxter equation at random generic draws.
    Dybe,
    /// Unitarity of the R-matrices on low weight spaces.
    Unitarity,
    /// Compatibility (flatness) of the difference operators.
    Flatness,
    /// Conjugation law of the operators under z_k → z_k+τ.
    TrQkzb,
    /// The difference equations of the hypergeometric solution tensor.
    Solution,
    /// Theta-function property of the solutions.
    ThetaLevel,
    /// Monodromy identities of the solutions.
    Monodromy {
        /// Which transport to verify (default: all three).
        #[arg(long, value_enum, default_value_t = KindArg::All)]
        kind: KindArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Perm,
    Tau,
    One,
    All,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    if let Some(threads) = cli.common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("warning: could not configure thread pool: {e}");
        }
    }

    let mut raw: RunConfig = match &cli.common.config {
        Some(path) => {
            let text = match std::fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read config {}: {e}", path.display());
                    return ExitCode::from(2);
                }
            };
            match serde_json::from_str(&text) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: malformed config: {e}");
                    return ExitCode::from(2);
                }
            }
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.common.seed {
        raw.seed = Some(seed);
    }
    if let Some(scale) = cli.common.tol_scale {
        raw.tol_scale = Some(scale);
    }

    let command = match cli.command {
        CliCommand::Validate => RunCommand::Validate,
        CliCommand::Rmatrix => RunCommand::Rmatrix,
        CliCommand::Solve => RunCommand::Solve,
        CliCommand::Verify { target } => match target {
            VerifyTarget::Dybe => RunCommand::VerifyDybe,
            VerifyTarget::Unitarity => RunCommand::VerifyUnitarity,
            VerifyTarget::Flatness => RunCommand::VerifyFlatness,
            VerifyTarget::TrQkzb => RunCommand::VerifyTrQkzb,
            VerifyTarget::Solution => RunCommand::VerifySolution,
            VerifyTarget::ThetaLevel => RunCommand::VerifyThetaLevel,
            VerifyTarget::Monodromy { kind } => RunCommand::VerifyMonodromy(match kind {
                KindArg::Perm => MonodromyKind::Perm,
                KindArg::Tau => MonodromyKind::Tau,
                KindArg::One => MonodromyKind::One,
                KindArg::All => MonodromyKind::All,
            }),
        },
    };

    let record = match run(command, &raw) {
        Ok(r) => r,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };

    let line = serde_json::to_string(&record).expect("records serialize");
    match &cli.common.out {
        Some(path) => {
            if let Err(e) = std::fs::File::create(path).and_then(|mut f| writeln!(f, "{line}")) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => println!("{line}"),
    }

    if record.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
