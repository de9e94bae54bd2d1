//! `cpsim` — experiment runner for the contact-process toolkit.
//!
//! Exit codes: 0 success (all requested tests passed), 1 at least one
//! statistical test failed, 2 usage or configuration error, 3 insufficient
//! data.

use clap::{Parser, Subcommand};
use cpsim_cli::config::ExperimentConfig;
use cpsim_cli::{experiments, results};
use cpsim_core::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "cpsim", about = "Subcritical contact process simulator and verifier")]
struct Cli {
    /// Worker threads for replica simulation (0 = all cores). Results are
    /// independent of this setting.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run raw replica simulation and dump per-replica records.
    Simulate {
        #[arg(short, long)]
        config: PathBuf,
        /// Override the configured output directory.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run an estimation experiment (survival, yaglom, box-law, clusters).
    Estimate {
        #[arg(short, long)]
        config: PathBuf,
        /// Override the configured output directory.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run a verification experiment (duality, poisson, goodpoints,
    /// oracle-check); exit status reflects the test verdicts.
    Test {
        #[arg(short, long)]
        config: PathBuf,
        /// Override the configured output directory.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Compute and dump the exact finite-chain spectral summary.
    Oracle {
        #[arg(short, long)]
        config: PathBuf,
        /// Override the configured output directory.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Emit plot CSVs from an existing results document.
    Plotdata {
        #[arg(short, long)]
        results: PathBuf,
        #[arg(short, long)]
        kind: String,
        #[arg(short, long)]
        out: PathBuf,
    },
}

fn load_config(path: &PathBuf) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Usage(format!("cannot read config {}: {e}", path.display())))?;
    ExperimentConfig::parse(&text)
}

fn exit_for(err: &Error) -> ExitCode {
    match err {
        Error::InsufficientData(_) => ExitCode::from(3),
        _ => ExitCode::from(2),
    }
}

fn finish(outcome: experiments::RunOutcome, enforce_tests: bool) -> ExitCode {
    print!("{}", outcome.doc.summary_table());
    for a in &outcome.artifacts {
        println!("wrote {}", a.display());
    }
    if enforce_tests && !outcome.doc.all_tests_passed() {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("cpsim: cannot configure thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Simulate { config, out } => load_config(config)
            .and_then(|cfg| experiments::simulate_raw(&cfg, out.as_deref()))
            .map(|o| finish(o, false)),
        Command::Estimate { config, out } => load_config(config)
            .and_then(|cfg| match cfg.params.kind() {
                "survival" | "yaglom" | "box-law" | "clusters" => {
                    experiments::run(&cfg, out.as_deref())
                }
                other => Err(Error::Usage(format!(
                    "estimate does not handle '{other}' configs (use test)"
                ))),
            })
            .map(|o| finish(o, true)),
        Command::Test { config, out } => load_config(config)
            .and_then(|cfg| match cfg.params.kind() {
                "duality" | "poisson" | "goodpoints" | "oracle-check" => {
                    experiments::run(&cfg, out.as_deref())
                }
                other => Err(Error::Usage(format!(
                    "test does not handle '{other}' configs (use estimate)"
                ))),
            })
            .map(|o| finish(o, true)),
        Command::Oracle { config, out } => load_config(config)
            .and_then(|cfg| experiments::oracle_dump(&cfg, out.as_deref()))
            .map(|o| finish(o, false)),
        Command::Plotdata { results, kind, out } => (|| {
            let doc = results::ResultsDoc::read(results)?;
            let written = results::emit_plotdata(&doc, kind, out)?;
            for w in &written {
                println!("wrote {}", w.display());
            }
            Ok(ExitCode::SUCCESS)
        })(),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("cpsim: {e}");
            exit_for(&e)
        }
    }
}
