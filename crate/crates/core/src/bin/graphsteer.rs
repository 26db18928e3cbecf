use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use graphsteer::checks::OracleSuite;
use graphsteer::cli::commands::{self, EvaluateArgs, SampleArgs};
use graphsteer::cli::{exit_code, EXIT_CHECK_FAILED, EXIT_OK};
use graphsteer::Error;

#[derive(Parser)]
#[command(name = "graphsteer", version, about = "Reward-guided sampling of graphs")]
struct Cli {
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw guided samples and write graphs, metrics and a result record.
    Sample {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        chains: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a file of graphs against the constraint of a config.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        samples: PathBuf,
        /// Reference graphs; defaults to the prior's dataset.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Unguided samples, enabling the MMD difference.
        #[arg(long)]
        unconstrained: Option<PathBuf>,
        /// Write report.json and report.tsv here instead of printing.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the zeroth-order controllers on a smooth problem.
    BenchEstimators {
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 1e-2)]
        mu: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the rows as JSON lines here as well.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run oracle suites; exits 1 if any check fails.
    OracleCheck {
        /// gradients, estimators, posterior or all.
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn write_file(path: PathBuf, text: String) -> Result<(), Error> {
    std::fs::write(&path, text).map_err(|e| Error::io(path, e))
}

fn run(command: Command) -> Result<i32, Error> {
    match command {
        Command::Sample {
            config,
            seed,
            chains,
            out,
        } => {
            let record = commands::sample(&SampleArgs {
                config,
                seed,
                chains,
                out,
            })?;
            log::info!(
                "{} graphs, val_c {:.4}, {} reward evaluations, {:.2}s",
                record.report.n_samples,
                record.report.val_c,
                record.reward_evals_total,
                record.wall_clock_secs
            );
            Ok(EXIT_OK)
        }
        Command::Evaluate {
            config,
            samples,
            reference,
            unconstrained,
            out,
        } => {
            let report = commands::evaluate(&EvaluateArgs {
                config,
                samples,
                reference,
                unconstrained,
            })?;
            let table = commands::report_table(&report);
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                    let json = serde_json::to_string_pretty(&report).expect("serializable") + "\n";
                    write_file(dir.join("report.json"), json)?;
                    write_file(dir.join("report.tsv"), table)?;
                }
                None => print!("{table}"),
            }
            Ok(EXIT_OK)
        }
        Command::BenchEstimators { samples, mu, seed, out } => {
            let rows = commands::bench_estimators(samples, mu, seed)?;
            print!("{}", commands::bench_table(&rows));
            if let Some(path) = out {
                let lines: String = rows
                    .iter()
                    .map(|r| serde_json::to_string(r).expect("serializable") + "\n")
                    .collect();
                write_file(path, lines)?;
            }
            Ok(EXIT_OK)
        }
        Command::OracleCheck { suite, seed } => {
            let suites = if suite == "all" {
                OracleSuite::ALL.to_vec()
            } else {
                vec![suite.parse::<OracleSuite>()?]
            };
            let results = commands::oracle_check(&suites, seed)?;
            for r in &results {
                println!("{r}");
            }
            Ok(if results.iter().all(|r| r.passed) {
                EXIT_OK
            } else {
                EXIT_CHECK_FAILED
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let code = match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
