//! Command-line front-end for the weighted matrix toolkit.
//!
//! Every command produces a [`RunReport`]; `--json` prints it to stdout.
//! Exit codes are listed in [`error::code`].

pub mod bench;
pub mod cli;
pub mod commands;
pub mod error;
pub mod report;
pub mod verify;

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use serde_json::json;

pub use cli::{Cli, Command, GlobalOpts};
pub use commands::Outcome;
pub use error::CliError;
pub use report::RunReport;

use crate::error::code;

pub fn cmd_verify(opts: &GlobalOpts, cases: usize, max_support: usize) -> Result<Outcome, CliError> {
    let (family, wdigest) = commands::load_family(opts)?;
    let cfg = verify::VerifyConfig {
        seed: opts.seed,
        cases,
        max_support: max_support.max(1),
        tol: opts.tol,
        max_terms: opts.max_terms,
    };
    let repro_dir = opts
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("wmalg-repro"));
    let results = verify::run_verify(&cfg, &family, Some(&repro_dir))?;

    let mut report = RunReport::new("verify", &family);
    report.inputs.extend(wdigest);
    report.seed = Some(opts.seed);
    report.passed = results.iter().filter(|p| p.passed()).count();
    report.failed = results.len() - report.passed;
    report.outputs = json!({
        "cases": cases,
        "max_support": cfg.max_support,
        "properties": &results,
    });

    let mut summary = String::new();
    for p in &results {
        let worst = p.worst_ratio.map_or("error".to_string(), |w| format!("{w:.3e}"));
        writeln!(
            summary,
            "{} {:<34} cases {:>6}  failures {:>4}  worst {}",
            if p.passed() { "PASS" } else { "FAIL" },
            p.name,
            p.cases,
            p.failures,
            worst
        )
        .unwrap();
        if let Some(r) = &p.reproducer {
            writeln!(summary, "     reproducer: {r}").unwrap();
        }
    }
    let exit = if report.failed > 0 { code::VERIFY_FAILED } else { code::OK };
    Ok(Outcome {
        report,
        exit,
        summary,
    })
}

pub fn cmd_bench(opts: &GlobalOpts, sizes: &[usize], rho_grid: &[f64]) -> Result<Outcome, CliError> {
    let (family, wdigest) = commands::load_family(opts)?;
    let points = bench::run_bench(sizes, rho_grid, &family, opts.tol, opts.max_terms, opts.seed);
    let csv = bench::to_csv(&points);

    let mut report = RunReport::new("bench", &family);
    report.inputs.extend(wdigest);
    report.seed = Some(opts.seed);
    report.passed = points.iter().filter(|p| p.matches_closed_form()).count();
    report.failed = points.len() - report.passed;
    let mut outputs = json!({ "tol": opts.tol, "points": &points });
    match &opts.out {
        Some(path) => {
            commands::write_output(path, &csv)?;
            outputs["csv_file"] = json!(path.display().to_string());
        }
        None => outputs["csv"] = json!(csv),
    }
    report.outputs = outputs;
    // stopping-rule disagreement is a bug; unreachable points are not
    let mismatches = points
        .iter()
        .filter(|p| p.error.is_none() && !p.matches_closed_form())
        .count();
    let exit = if mismatches > 0 { code::VERIFY_FAILED } else { code::OK };
    let summary = if opts.out.is_some() { String::new() } else { csv };
    Ok(Outcome {
        report,
        exit,
        summary,
    })
}

/// Dispatches a parsed command line, timing it and running matrix products
/// on a pool of `--threads` workers when given.
pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let body = || match &cli.command {
        Command::Norm { matrix } => commands::cmd_norm(&cli.global, matrix),
        Command::Mul { a, b } => commands::cmd_mul(&cli.global, a, b),
        Command::Qinv { matrix } => commands::cmd_qinv(&cli.global, matrix),
        Command::Verify { cases, max_support } => cmd_verify(&cli.global, *cases, *max_support),
        Command::Bench { sizes, rho_grid } => cmd_bench(&cli.global, sizes, rho_grid),
    };
    let mut outcome = match cli.global.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| CliError::new(code::IO, format!("thread pool: {e}")))?
            .install(body)?,
        None => body()?,
    };
    outcome.report.timing_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(outcome)
}

/// Convenience for tests and scripts: parse `args` and run.
pub fn run_args<I, T>(args: I) -> Result<Outcome, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser;
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::new(code::PARSE, e.to_string()))?;
    run(&cli)
}

