use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use wmalg_core::sample::rescale_to_rho;
use wmalg_core::{
    contraction_factor, quasi_inverse_neumann, Complex64, ScalarAlgebra, WeightFamily,
    WeightedMatrix, WmError,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchPoint {
    pub size: usize,
    pub rho: f64,
    pub terms_needed: Option<usize>,
    /// `max_f ceil(log(tol (1 - rho) / ||T||_f) / log rho)`, clamped at 0.
    pub closed_form: Option<usize>,
    pub wall_time_product: f64,
    pub wall_time_qinv: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl BenchPoint {
    /// Whether the stopping rule agrees with the closed form within one term.
    pub fn matches_closed_form(&self) -> bool {
        match (self.terms_needed, self.closed_form) {
            (Some(a), Some(b)) => a.abs_diff(b) <= 1,
            _ => false,
        }
    }
}

/// Closed-form term count for a single weight norm.
pub fn closed_form_terms(norm_f: f64, rho: f64, tol: f64) -> usize {
    if norm_f == 0.0 || rho == 0.0 {
        return 0;
    }
    let n = ((tol * (1.0 - rho) / norm_f).ln() / rho.ln()).ceil();
    if n > 0.0 {
        n as usize
    } else {
        0
    }
}

/// Dense `size x size` scalar block with log-uniform moduli in `[1e-3, 1]`
/// and random phases.
pub fn dense_block(rng: &mut ChaCha8Rng, size: usize) -> WeightedMatrix<ScalarAlgebra> {
    let mut entries = Vec::with_capacity(size * size);
    for i in 1..=size {
        for j in 1..=size {
            let modulus = (rng.random::<f64>() * 1e-3f64.ln()).exp();
            let phase = rng.random::<f64>() * std::f64::consts::TAU;
            entries.push(((i, j), Complex64::from_polar(modulus, phase)));
        }
    }
    WeightedMatrix::from_entries(ScalarAlgebra::complex(), entries).expect("distinct coordinates")
}

fn bench_point(
    rng: &mut ChaCha8Rng,
    size: usize,
    rho: f64,
    family: &WeightFamily,
    tol: f64,
    max_terms: usize,
) -> Result<BenchPoint, WmError> {
    let (g, gb) = (family.summable(), family.summable_bound());
    let t = rescale_to_rho(&dense_block(rng, size), g, gb, rho)?;
    let actual_rho = contraction_factor(&t, g, gb)?;
    let closed_form = family
        .members()
        .iter()
        .map(|f| Ok(closed_form_terms(t.weighted_norm(f)?, actual_rho, tol)))
        .collect::<Result<Vec<_>, WmError>>()?
        .into_iter()
        .max();

    let start = Instant::now();
    let _ = t.multiply(&t)?;
    let wall_time_product = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let result = quasi_inverse_neumann(&t, family, tol, max_terms);
    let wall_time_qinv = start.elapsed().as_secs_f64();

    let (terms_needed, error) = match result {
        Ok((_, cert)) => (Some(cert.iterations), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(BenchPoint {
        size,
        rho: actual_rho,
        terms_needed,
        closed_form,
        wall_time_product,
        wall_time_qinv,
        error,
    })
}

/// Runs every `(size, rho)` combination. Per-point failures are recorded on
/// the point rather than aborting the sweep.
pub fn run_bench(
    sizes: &[usize],
    rho_grid: &[f64],
    family: &WeightFamily,
    tol: f64,
    max_terms: usize,
    seed: u64,
) -> Vec<BenchPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::new();
    for &size in sizes {
        for &rho in rho_grid {
            let point = bench_point(&mut rng, size.max(1), rho, family, tol, max_terms)
                .unwrap_or_else(|e| BenchPoint {
                    size,
                    rho,
                    terms_needed: None,
                    closed_form: None,
                    wall_time_product: 0.0,
                    wall_time_qinv: 0.0,
                    error: Some(e.to_string()),
                });
            points.push(point);
        }
    }
    points
}

pub fn to_csv(points: &[BenchPoint]) -> String {
    let mut out = String::from("size,rho,terms_needed,wall_time_product,wall_time_qinv\n");
    for p in points {
        let terms = p.terms_needed.map(|n| n.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{:.9},{:.9}",
            p.size, p.rho, terms, p.wall_time_product, p.wall_time_qinv
        )
        .unwrap();
    }
    out
}
