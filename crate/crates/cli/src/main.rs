//! `oscone`: cone membership, norms and factorizations for tensor products
//! of operator systems, with JSON reports that can be re-verified offline.
//!
//! Exit status: 0 for a definitive answer, 2 for `Unknown`, 1 for errors
//! and failed verifications.

mod input;
mod report;
mod verify;

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use oscone::opsys::SystemMatrix;
use oscone::tensor::TensorElement;
use rayon::prelude::*;
use serde::Serialize;

use input::{load_system, Input};
use report::{Body, Parameters, Report, EXIT_ERROR, EXIT_OK, EXIT_UNKNOWN};

#[derive(Parser, Debug)]
#[command(name = "oscone", version, about = "Tensor products of operator systems: cones, norms, certificates")]
struct Cli {
    #[command(flatten)]
    opts: Options,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Options {
    /// Multiple of the unit added before max-cone tests.
    #[arg(long, global = true, default_value_t = 1e-6, value_parser = positive_f64)]
    eps: f64,
    /// Numerical tolerance; for `verify`, overrides the one in the report.
    #[arg(long, global = true, env = "OSCONE_TOL", value_parser = positive_f64)]
    tol: Option<f64>,
    /// Largest see-saw size tried.
    #[arg(long, global = true, value_parser = positive_usize)]
    kmax: Option<usize>,
    /// Seed for randomized see-saw restarts.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for `batch`.
    #[arg(long, global = true, default_value_t = 1, value_parser = positive_usize)]
    jobs: usize,
    /// Write the report here instead of standard output.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone)]
enum Command {
    /// Build a system from a built-in name, a system file or `{name, ambient_dim, generators}`.
    Define { system: String },
    /// Concrete realization of a tensor element.
    Realize { element: String },
    /// Schur product of two system matrices of equal size.
    Schur { x: String, y: String },
    /// Membership of a Hermitian element in the min or max cone.
    Membership {
        element: String,
        #[arg(long, value_enum)]
        cone: Cone,
    },
    /// Bracket of the norm carried by the maximal tensor product.
    Norm {
        element: String,
        /// Target bracket width.
        #[arg(long, value_parser = positive_f64)]
        width: Option<f64>,
    },
    /// Factor the hat map of a level-one element through a matrix algebra.
    Factorize { element: String },
    /// Look for an approximate factorization of the identity of a system.
    Nuclearity { system: String },
    /// Re-check the certificates and witnesses in a report.
    Verify { report: String },
    /// Run a JSON array of argument lists, e.g. `[["membership", "u.json"]]`.
    Batch { queries: String },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Cone {
    Min,
    Max,
}

const DEFAULT_TOL: f64 = 1e-8;

fn positive_f64(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(_) => Err(format!("`{s}` must be a positive finite number")),
        Err(e) => Err(format!("`{s}`: {e}")),
    }
}

fn positive_usize(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        Ok(_) => Err(format!("`{s}` must be at least 1")),
        Err(e) => Err(format!("`{s}`: {e}")),
    }
}

impl Options {
    fn parameters(&self, width: Option<f64>) -> Parameters {
        Parameters {
            eps: self.eps,
            tol: self.tol.unwrap_or(DEFAULT_TOL),
            k_max: self.kmax,
            seed: self.seed,
            width,
        }
    }
}

fn load_element(arg: &str) -> Result<(TensorElement, input::InputDigest)> {
    let input = Input::load(arg)?;
    Ok((input.parse("tensor element")?, input.digest))
}

fn run(command: &Command, opts: &Options) -> Result<Report> {
    let start = Instant::now();
    let params = opts.parameters(None);
    let mut report = match command {
        Command::Define { system } => {
            let (sys, digest) = load_system(system)?;
            let body = Body::System { system: sys.to_file() };
            Report::new("define", vec![digest], params, body)
        }
        Command::Realize { element } => {
            let (u, digest) = load_element(element)?;
            Report::new("realize", vec![digest], params, report::realization(u))
        }
        Command::Schur { x, y } => {
            let (xi, yi) = (Input::load(x)?, Input::load(y)?);
            let xm: SystemMatrix = xi.parse("system matrix")?;
            let ym: SystemMatrix = yi.parse("system matrix")?;
            Report::new("schur", vec![xi.digest, yi.digest], params, report::schur(xm, ym)?)
        }
        Command::Membership { element, cone } => {
            let (u, digest) = load_element(element)?;
            let body = match cone {
                Cone::Min => report::min_membership(u, &params)?,
                Cone::Max => report::max_membership(u, &params)?,
            };
            Report::new("membership", vec![digest], params, body)
        }
        Command::Norm { element, width } => {
            let (u, digest) = load_element(element)?;
            let params = opts.parameters(Some(width.unwrap_or(report::DEFAULT_WIDTH)));
            let body = report::norm(u, &params)?;
            Report::new("norm", vec![digest], params, body)
        }
        Command::Factorize { element } => {
            let (u, digest) = load_element(element)?;
            let body = report::factorize(u, &params)?;
            Report::new("factorize", vec![digest], params, body)
        }
        Command::Nuclearity { system } => {
            let (sys, digest) = load_system(system)?;
            let body = report::nuclearity(sys, &params)?;
            Report::new("nuclearity", vec![digest], params, body)
        }
        Command::Verify { report: path } => {
            let input = Input::load(path)?;
            let checked: Report = input.parse("report")?;
            let tol = opts.tol.unwrap_or(checked.parameters.tol);
            let checks = verify::checks(&checked.result, tol)
                .with_context(|| format!("re-checking {}", input.digest.source))?;
            let passed = checks.iter().all(|c| c.passed);
            let params = Parameters { tol, ..checked.parameters.clone() };
            let body = Body::Verification {
                report: input.digest.clone(),
                checks,
                passed,
            };
            Report::new("verify", vec![input.digest], params, body)
        }
        Command::Batch { .. } => bail!("batch queries cannot be nested"),
    };
    report.wall_time_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

#[derive(Serialize)]
struct BatchEntry {
    index: usize,
    exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<Report>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn run_batch(path: &str, opts: &Options) -> Result<(Vec<BatchEntry>, i32)> {
    let input = Input::load(path)?;
    let queries: Vec<Vec<String>> = input.parse("batch (expected an array of argument lists)")?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .context("starting worker threads")?;
    let entries: Vec<BatchEntry> = pool.install(|| {
        queries
            .par_iter()
            .enumerate()
            .map(|(index, args)| {
                let argv = std::iter::once("oscone".to_string()).chain(args.iter().cloned());
                let outcome = Cli::try_parse_from(argv)
                    .map_err(|e| anyhow::anyhow!("query {index}: {}", e.to_string().trim_end()))
                    .and_then(|cli| run(&cli.command, &cli.opts));
                match outcome {
                    Ok(report) => BatchEntry {
                        index,
                        exit_code: report.exit_code(),
                        report: Some(report),
                        error: None,
                    },
                    Err(e) => BatchEntry {
                        index,
                        exit_code: EXIT_ERROR,
                        report: None,
                        error: Some(format!("{e:#}")),
                    },
                }
            })
            .collect()
    });
    let code = if entries.iter().any(|e| e.exit_code == EXIT_ERROR) {
        EXIT_ERROR
    } else if entries.iter().any(|e| e.exit_code == EXIT_UNKNOWN) {
        EXIT_UNKNOWN
    } else {
        EXIT_OK
    };
    Ok((entries, code))
}

fn emit<T: Serialize>(value: &T, output: Option<&PathBuf>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match output {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main_inner(cli: Cli) -> Result<i32> {
    if let Command::Batch { queries } = &cli.command {
        let (entries, code) = run_batch(queries, &cli.opts)?;
        emit(&entries, cli.opts.output.as_ref())?;
        return Ok(code);
    }
    let report = run(&cli.command, &cli.opts)?;
    emit(&report, cli.opts.output.as_ref())?;
    Ok(report.exit_code())
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            std::process::exit(code);
        }
    };
    let code = match main_inner(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    };
    std::process::exit(code);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numeric_parsers() {
        assert_eq!(positive_f64("1e-3"), Ok(1e-3));
        assert!(positive_f64("0").is_err());
        assert!(positive_f64("inf").is_err());
        assert!(positive_f64("x").is_err());
        assert_eq!(positive_usize("3"), Ok(3));
        assert!(positive_usize("0").is_err());
    }

    #[test]
    fn defaults_resolve() {
        let cli = Cli::try_parse_from(["oscone", "nuclearity", "Cn:2"]).unwrap();
        let p = cli.opts.parameters(None);
        assert_eq!((p.eps, p.tol, p.k_max, p.seed), (1e-6, DEFAULT_TOL, None, 0));
    }
}
