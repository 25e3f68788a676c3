use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Clone, Parser)]
#[command(name = "wmalg", version, about = "Certified computations in weighted matrix algebras")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// Weight family file; defaults to {n^0, n^1, n^2} with g = n^2.
    #[arg(long, global = true)]
    pub weights: Option<PathBuf>,

    /// Output file (mul, qinv, bench) or reproducer directory (verify).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Print the JSON report to stdout.
    #[arg(long, global = true)]
    pub json: bool,

    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,

    #[arg(long, global = true, default_value_t = wmalg_core::quasi::DEFAULT_TOL)]
    pub tol: f64,

    #[arg(long, global = true, default_value_t = wmalg_core::quasi::DEFAULT_MAX_TERMS)]
    pub max_terms: usize,

    /// Cross-check (or replace) the Neumann series with the dense solve.
    #[arg(long, global = true)]
    pub oracle: bool,

    /// Worker threads for matrix products (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Weighted norms of a matrix with their attaining entries.
    Norm { matrix: PathBuf },
    /// Product of two matrices with the per-weight product bound.
    Mul { a: PathBuf, b: PathBuf },
    /// Certified quasi-inverse by the Neumann series.
    Qinv { matrix: PathBuf },
    /// Seeded randomized check of every algebraic estimate.
    Verify {
        #[arg(long, default_value_t = 100)]
        cases: usize,
        #[arg(long, default_value_t = 32)]
        max_support: usize,
    },
    /// Term counts and timings across support sizes and contraction factors.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "8,16,32,64")]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
        rho_grid: Vec<f64>,
    },
}
