//! Seeded random matrices for property checks and benchmarks.
//!
//! Indices follow a Zipf-like law on `1..=max_support`, so most entries sit
//! near the origin while a few land where the weights are large. Entry
//! magnitudes are log-uniform on `[min_magnitude, max_magnitude]`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Zipf};

use crate::algebra::{Block, BlockAlgebra, CoeffAlgebra, ScalarAlgebra};
use crate::error::Result;
use crate::weights::{CertifiedSeriesBound, Weight};
use crate::wmatrix::WeightedMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleConfig {
    /// Largest row or column index.
    pub max_support: usize,
    /// Upper bound on stored entries; the actual count is uniform in
    /// `1..=max_entries`.
    pub max_entries: usize,
    pub zipf_exponent: f64,
    pub min_magnitude: f64,
    pub max_magnitude: f64,
    /// Draw real entries only.
    pub real: bool,
}

impl SampleConfig {
    pub fn with_support(max_support: usize) -> Self {
        Self {
            max_support: max_support.max(1),
            max_entries: max_support.max(1),
            ..Self::default()
        }
    }
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            max_support: 32,
            max_entries: 32,
            zipf_exponent: 1.1,
            min_magnitude: 1e-3,
            max_magnitude: 1e3,
            real: false,
        }
    }
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

fn unit_phase<R: Rng + ?Sized>(rng: &mut R, real: bool) -> Complex64 {
    if real {
        Complex64::new(if rng.random::<bool>() { 1.0 } else { -1.0 }, 0.0)
    } else {
        Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU)
    }
}

fn sample_coords<R: Rng + ?Sized>(rng: &mut R, cfg: &SampleConfig) -> Vec<(usize, usize)> {
    let zipf = Zipf::new(cfg.max_support as f64, cfg.zipf_exponent)
        .expect("positive support and exponent");
    let count = rng.random_range(1..=cfg.max_entries.max(1));
    let mut coords = BTreeMap::new();
    for _ in 0..count {
        let i = (zipf.sample(rng) as usize).clamp(1, cfg.max_support);
        let j = (zipf.sample(rng) as usize).clamp(1, cfg.max_support);
        coords.insert((i, j), ());
    }
    coords.into_keys().collect()
}

/// Random scalar matrix.
pub fn sample_scalar<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &SampleConfig,
) -> WeightedMatrix<ScalarAlgebra> {
    let algebra = if cfg.real {
        ScalarAlgebra::real()
    } else {
        ScalarAlgebra::complex()
    };
    let entries: Vec<_> = sample_coords(rng, cfg)
        .into_iter()
        .map(|ij| {
            let mag = log_uniform(rng, cfg.min_magnitude, cfg.max_magnitude);
            (ij, unit_phase(rng, cfg.real) * mag)
        })
        .collect();
    WeightedMatrix::from_entries(algebra, entries).expect("sampled coordinates are distinct")
}

/// Random matrix with `k x k` block entries. Each block is a random
/// direction scaled to a log-uniform Frobenius norm.
pub fn sample_block<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &SampleConfig,
    k: usize,
) -> WeightedMatrix<BlockAlgebra> {
    let algebra = BlockAlgebra::new(k).expect("positive block size");
    let entries: Vec<_> = sample_coords(rng, cfg)
        .into_iter()
        .map(|ij| {
            let raw: Vec<Complex64> = (0..k * k)
                .map(|_| unit_phase(rng, cfg.real) * (rng.random::<f64>() + 0.05))
                .collect();
            let block = Block::new(k, raw).expect("k*k entries");
            let norm = algebra.norm(&block).expect("finite block");
            let mag = log_uniform(rng, cfg.min_magnitude, cfg.max_magnitude);
            (ij, algebra.scale(mag / norm, &block))
        })
        .collect();
    WeightedMatrix::from_entries(algebra, entries).expect("sampled coordinates are distinct")
}

/// Rescales `t` so that `C_g ||t||_g = rho`. The zero matrix is returned
/// unchanged.
pub fn rescale_to_rho<A: CoeffAlgebra>(
    t: &WeightedMatrix<A>,
    g: &Weight,
    g_bound: &CertifiedSeriesBound,
    rho: f64,
) -> Result<WeightedMatrix<A>> {
    let current = g_bound.upper * t.weighted_norm(g)?;
    if current == 0.0 {
        return Ok(t.clone());
    }
    Ok(t.scale(rho / current))
}
