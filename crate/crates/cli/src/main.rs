//! `graphcert` command-line driver. Every command prints one JSON run report.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use report::{RunReport, Status};

#[derive(Parser)]
#[command(name = "graphcert", version, about = "Evaluate, bound and certify graph bundles")]
struct Cli {
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Domain {
    Real,
    Fp32,
    Ieee32,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Backing {
    Real,
    B32,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Method {
    Ibp,
    Crown,
    CrownObj,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Opt {
    Sgd,
    Adam,
}

#[derive(Subcommand)]
enum Command {
    /// Load a bundle and validate its graph.
    Validate { bundle: PathBuf },
    /// Forward evaluation.
    Eval {
        bundle: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "real")]
        domain: Domain,
    },
    /// Reverse-mode gradient of the output against a seed.
    Grad {
        bundle: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Output cotangent; all ones when omitted.
        #[arg(long)]
        seed: Option<PathBuf>,
    },
    /// Full-batch training on the bundle's training inputs.
    TrainDemo {
        bundle: PathBuf,
        #[arg(long, default_value_t = 10)]
        steps: usize,
        #[arg(long, default_value_t = 0.2)]
        lr: f64,
        #[arg(long, value_enum, default_value = "sgd")]
        optimizer: Opt,
        #[arg(long, value_enum, default_value = "ieee32")]
        domain: Domain,
    },
    /// Interval bounds over the bundle's input region.
    Ibp {
        bundle: PathBuf,
        #[arg(long, value_enum, default_value = "real")]
        backing: Backing,
        /// Also write a box-only certificate.
        #[arg(long)]
        emit_cert: Option<PathBuf>,
    },
    /// Affine bounds over the bundle's input region.
    Crown {
        bundle: PathBuf,
        #[arg(long)]
        objective: Option<PathBuf>,
        #[arg(long)]
        alpha: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "real")]
        backing: Backing,
        /// Also write a certificate with affine payloads.
        #[arg(long)]
        emit_cert: Option<PathBuf>,
    },
    /// Replay a certificate against a bundle.
    CheckCert { bundle: PathBuf, cert: PathBuf },
    /// Sufficient-UNSAT check over every bundle in a directory.
    VnnCheck {
        dir: PathBuf,
        #[arg(long, value_enum, default_value = "crown-obj")]
        method: Method,
        #[arg(long, value_enum, default_value = "real")]
        backing: Backing,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let (name, result) = match cli.command {
        Command::Validate { bundle } => ("validate", commands::validate(&bundle)),
        Command::Eval { bundle, input, domain } => ("eval", commands::eval(&bundle, &input, domain)),
        Command::Grad { bundle, input, seed } => ("grad", commands::grad(&bundle, &input, seed.as_deref())),
        Command::TrainDemo {
            bundle,
            steps,
            lr,
            optimizer,
            domain,
        } => ("train-demo", commands::train_demo(&bundle, steps, lr, optimizer, domain)),
        Command::Ibp {
            bundle,
            backing,
            emit_cert,
        } => ("ibp", commands::ibp(&bundle, backing, emit_cert.as_deref())),
        Command::Crown {
            bundle,
            objective,
            alpha,
            backing,
            emit_cert,
        } => (
            "crown",
            commands::crown(&bundle, objective.as_deref(), alpha.as_deref(), backing, emit_cert.as_deref()),
        ),
        Command::CheckCert { bundle, cert } => ("check-cert", commands::check_cert(&bundle, &cert)),
        Command::VnnCheck { dir, method, backing } => ("vnn-check", commands::vnn_check(&dir, method, backing)),
    };
    let mut report = result.unwrap_or_else(|e| {
        let mut r = RunReport::new(name);
        r.status = Status::Error;
        r.error = Some(e.to_string());
        r
    });
    report.command = name.to_string();
    report.timing_ms = start.elapsed().as_secs_f64() * 1e3;
    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    match &cli.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &text) {
                eprintln!("cannot write {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => print!("{text}"),
    }
    ExitCode::from(report.status.exit_code() as u8)
}
