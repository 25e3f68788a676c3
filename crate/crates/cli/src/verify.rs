//! Seeded randomized checks of every estimate the toolkit relies on.
//!
//! Each property maps a generated case to a ratio `observed / allowed`; the
//! case passes when the ratio is at most 1. A failing case is shrunk by
//! greedily deleting matrix entries while it keeps failing, then written to
//! disk as a reproducer.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use wmalg_core::io::family_to_json;
use wmalg_core::sample::{rescale_to_rho, sample_block, sample_scalar, SampleConfig};
use wmalg_core::{
    contraction_factor, product_bound, quasi_inverse_exact, quasi_inverse_neumann,
    renorm_submultiplicative, AnyMatrix, CertifiedSeriesBound, CoeffAlgebra,
    Complex64, ScalarAlgebra, Weight, WeightFamily, WeightedMatrix, WmError,
};

use crate::commands::write_output;
use crate::error::CliError;

/// Multiplicative slack absorbing rounding in norm inequalities.
pub const SLACK: f64 = 1.0 + 1e-9;
/// Longest partial sum checked against the certified `C_g`.
const MAX_PREFIX: usize = 4_000_000;

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub seed: u64,
    pub cases: usize,
    pub max_support: usize,
    pub tol: f64,
    pub max_terms: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyResult {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    /// Largest `observed / allowed` ratio seen; `None` when a case errored.
    pub worst_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reproducer: Option<String>,
}

impl PropertyResult {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// A generated input: matrices plus scalar parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub matrices: Vec<AnyMatrix>,
    pub params: Vec<f64>,
}

pub struct Ctx {
    pub family: WeightFamily,
    pub sample: SampleConfig,
    pub tol: f64,
    pub max_terms: usize,
    renorm: Option<(Weight, CertifiedSeriesBound)>,
    prefix: Vec<f64>,
}

impl Ctx {
    pub fn new(family: WeightFamily, cfg: &VerifyConfig) -> Self {
        let g = family.summable().clone();
        let gb = *family.summable_bound();
        let renorm = renorm_submultiplicative(&g, &gb).ok().map(|h| (h, gb));
        Self {
            family,
            sample: SampleConfig::with_support(cfg.max_support),
            tol: cfg.tol,
            max_terms: cfg.max_terms,
            renorm,
            prefix: Vec::new(),
        }
    }

    fn g(&self) -> (&Weight, &CertifiedSeriesBound) {
        (self.family.summable(), self.family.summable_bound())
    }

    /// Naive ascending partial sums of `1/g(n)` past the certified term count.
    fn ensure_prefix(&mut self) {
        if !self.prefix.is_empty() {
            return;
        }
        let g = self.family.summable();
        let len = (2 * self.family.summable_bound().terms_used).min(MAX_PREFIX);
        let mut acc = 0.0;
        self.prefix = (1..=len)
            .map(|n| {
                acc += 1.0 / g.eval(n).expect("n >= 1");
                acc
            })
            .collect();
    }
}

type Generate = fn(&mut ChaCha8Rng, &Ctx) -> Case;
type Check = fn(&Ctx, &Case) -> Result<f64, WmError>;

pub struct Property {
    pub name: &'static str,
    pub generate: Generate,
    pub check: Check,
}

fn scalar(m: &AnyMatrix) -> &WeightedMatrix<ScalarAlgebra> {
    match m {
        AnyMatrix::Scalar(t) => t,
        AnyMatrix::Block(_) => panic!("property expects scalar matrices"),
    }
}

fn fail_ratio(observed: f64, allowed: f64) -> f64 {
    if observed == 0.0 {
        0.0
    } else {
        observed / allowed
    }
}

fn gen_weight_pair(rng: &mut ChaCha8Rng, ctx: &Ctx) -> Case {
    let idx = rng.random_range(0..ctx.family.len());
    let n = rng.random_range(1..10_000usize);
    let m = rng.random_range(n + 1..=10_000usize);
    Case {
        matrices: vec![],
        params: vec![idx as f64, n as f64, m as f64],
    }
}

fn check_monotone(ctx: &Ctx, case: &Case) -> Result<f64, WmError> {
    let w = &ctx.family.members()[case.params[0] as usize];
    let a = w.eval(case.params[1] as usize)?;
    let b = w.eval(case.params[2] as usize)?;
    Ok(if a > 0.0 { a / b } else { f64::INFINITY })
}

fn gen_prefix_len(rng: &mut ChaCha8Rng, ctx: &Ctx) -> Case {
    let len = ctx.prefix.len().max(1);
    Case {
        matrices: vec![],
        params: vec![rng.random_range(1..=len) as f64],
    }
}

fn check_series(ctx: &Ctx, case: &Case) -> Result<f64, WmError> {
    let n = case.params[0] as usize;
    let partial = ctx.prefix.get(n - 1).copied().unwrap_or(0.0);
    Ok(partial / ctx.family.summable_bound().upper)
}

fn gen_entry_pair(rng: &mut ChaCha8Rng, _ctx: &Ctx) -> Case {
    let cfg = SampleConfig {
        max_support: 1,
        max_entries: 1,
        ..SampleConfig::default()
    };
    let matrices = if rng.random::<bool>() {
        vec![sample_scalar(rng, &cfg).into(), sample_scalar(rng, &cfg).into()]
    } else {
        vec![
            sample_block(rng, &cfg, 2).into(),
            sample_block(rng, &cfg, 2).into(),
        ]
    };
    Case {
        matrices,
        params: vec![],
    }
}

fn submult_ratio<A: CoeffAlgebra>(x: &WeightedMatrix<A>, y: &WeightedMatrix<A>) -> Result<f64, WmError> {
    let alg = x.algebra();
    let (Some(a), Some(b)) = (x.get(1, 1), y.get(1, 1)) else {
        return Ok(0.0);
    };
    let lhs = alg.norm(&alg.mul(a, b)?)?;
    Ok(fail_ratio(lhs, alg.norm(a)? * alg.norm(b)? * SLACK))
}

fn check_submult(_ctx: &Ctx, case: &Case) -> Result<f64, WmError> {
    match (&case.matrices[0], &case.matrices[1]) {
        (AnyMatrix::Scalar(x), AnyMatrix::Scalar(y)) => submult_ratio(x, y),
        (AnyMatrix::Block(x), AnyMatrix::Block(y)) => submult_ratio(x, y),
        _ => Err(WmError::Shape("mixed algebras".into())),
    }
}

fn gen_scalars(rng: &mut ChaCha8Rng, ctx: &Ctx, count: usize) -> Case {
    Case {
        matrices: (0..count)
            .map(|_| sample_scalar(rng, &ctx.sample).into())
            .collect(),
        params: vec![],
    }
}

fn gen_two_scalars(rng: &mut ChaCha8Rng, ctx: &Ctx) -> Case {
    gen_scalars(rng, ctx, 2)
}

fn gen_three_scalars(rng: &mut ChaCha8Rng, ctx: &Ctx) -> Case {
    gen_scalars(rng, ctx, 3)
}

fn check_triangle(ctx: &Ctx, case: &Case) -> Result<f64, WmError> {
    let (r, s) = (scalar(&case.matrices[0]), scalar(&case.matrices[1]));
    let sum = r.add(s)?;
    let mut worst: f64 = 0.0;
    for f in ctx.family.members() {
        let allowed = (r.weighted_norm(f)? + s.weighted_norm(f)?) * SLACK;
        worst = worst.max(fail_ratio(sum.weighted_norm(f)?, allowed));
    }
    Ok(worst)
}

fn gen_product_pair(rng: &mut ChaCha8Rng, ctx: &Ctx) -> Case {
    let matrices = if rng.random::<bool>() {
        vec![
            sample_scalar(rng, &ctx.sample).into(),
            sample_scalar(rng, &ctx.sample).into(),
        ]
    } else {
        vec![
            sample_block(rng, &ctx.sample, 2).into(),
            sample_block(rng, &ctx.sample, 2).into(),
        ]
    };
    Case {
        matrices,
        params: vec![],
    }
}

/// Worst ratio of `||RS||_f` and `||SR||_f` to the product bound.
pub fn product_bound_ratio<A: CoeffAlgebra>(
    r: &WeightedMatrix<A>,
    s: &WeightedMatrix<A>,
    family: &WeightFamily,
) -> Result<f64, WmError> {
    let (g, gb) = (family.summable(), family.summable_bound());
    let rs = r.multiply(s)?;
    let sr = s.multiply(r)?;
    let mut worst: f64 = 0.0;
    for f in family.members() {
        let allowed = product_bound(r, s, f, g, gb)? * SLACK;
        worst = worst
            .max(fail_ratio(rs.weighted_norm(f)?, allowed))
            .max(fail_ratio(sr.weighted_norm(f)?, allowed));
    }
    Ok(worst)
}

fn check_product_bound(ctx: &Ctx, case: &Case) -> Result<f64, WmError> {
    match (&case.matrices[0], &case.matrices[1]) {
        (AnyMatrix::Scalar(r), AnyMatrix::Scalar(s)) => product_bound_ratio(r, s, &ctx.family),
        (AnyMatrix::Block(r), AnyMatrix::Block(s)) => product_bound_ratio(r, s, &ctx.family),
        _ => Err(WmError::Shape("mixed algebras".into())),
    }
}

fn modulus(t: &WeightedMatrix<ScalarAlgebra>) -> WeightedMatrix<ScalarAlgebra> {
    WeightedMatrix::from_entries(
        ScalarAlgebra::complex(),
        t.iter().map(|(ij, v)| (ij, Complex64::new(v.norm(), 0.0))),
    )
    .expect("entries copied from a valid matrix")
}

/// Worst entrywise `|((RS)T - R(ST))_ij| / (1e-12 (|R||S||T|)_ij)`.
pub fn associativity_ratio(
    r: &WeightedMatrix<ScalarAlgebra>,
    s: &WeightedMatrix<ScalarAlgebra>,
    t: &WeightedMatrix<ScalarAlgebra>,
) -> Result<f64, WmError> {
    let left = r.multiply(s)?.multiply(t)?;
    let right = r.multiply(&s.multiply(t)?)?;
    let scale = modulus(r).multiply(&modulus(s))?.multiply(&modulus(t))?;
    let diff = left.sub(&right)?;
    let mut worst: f64 = 0.0;
    for ((i, j), d) in diff.iter() {
        let allowed = 1e-12 * scale.get(i, j).map_or(0.0, |z| z.re);
        worst = worst.max(if allowed > 0.0 { d.norm() / allowed } else { f64::INFINITY });
    }
    Ok(worst)
}

fn check_associativity(_ctx: &Ctx, case: &Case) -> Result<f64, WmError> {
    associativity_ratio(
        scalar(&case.matrices[0]),
        scalar(&case.matrices[1]),
        scalar(&case.matrices[2]),
    )
}

fn check_renorm(ctx: &Ctx, case: &Case) -> Result<f64, WmError> {
    let Some((h, fb)) = &ctx.renorm else {
        return Ok(0.0);
    };
    let f = ctx.family.summable();
    let (r, s) = (scalar(&case.matrices[0]), scalar(&case.matrices[1]));
    let rh = r.weighted_norm(h)?;
    let sh = s.weighted_norm(h)?;
    let sub = fail_ratio(r.multiply(s)?.weighted_norm(h)?, rh * sh * SLACK);
    let expected = fb.upper * r.weighted_norm(f)?;
    let homog = fail_ratio((rh - expected).abs(), 1e-12 * expected);
    Ok(sub.max(homog))
}

fn gen_in_ball(rng: &mut ChaCha8Rng, ctx: &Ctx, rho: f64) -> Case {
    let (g, gb) = ctx.g();
    let t = sample_scalar(rng, &ctx.sample);
    let t = rescale_to_rho(&t, g, gb, rho).expect("sampled norms are finite");
    Case {
        matrices: vec![t.into()],
        params: vec![rho],
    }
}

fn gen_power(rng: &mut ChaCha8Rng, ctx: &Ctx) -> Case {
    let rho = [0.3, 0.6, 0.9][rng.random_range(0..3)];
    gen_in_ball(rng, ctx, rho)
}

/// Worst ratio of `||T^n||_f` to `rho^(n-1) ||T||_f` over `n = 1..=max_power`.
pub fn power_bound_ratio<A: CoeffAlgebra>(
    t: &WeightedMatrix<A>,
    family: &WeightFamily,
    max_power: usize,
) -> Result<f64, WmError> {
    let rho = contraction_factor(t, family.summable(), family.summable_bound())?;
    let base: Vec<f64> = family
        .members()
        .iter()
        .map(|f| t.weighted_norm(f))
        .collect::<Result<_, _>>()?;
    let mut p = t.clone();
    let mut worst: f64 = 0.0;
    for n in 1..=max_power {
        if n > 1 {
            p = p.multiply(t)?;
        }
        for (f, tf) in family.members().iter().zip(&base) {
            let allowed = rho.powi(n as i32 - 1) * tf * SLACK;
            worst = worst.max(fail_ratio(p.weighted_norm(f)?, allowed));
        }
    }
    Ok(worst)
}

fn check_power(ctx: &Ctx, case: &Case) -> Result<f64, WmError> {
    power_bound_ratio(scalar(&case.matrices[0]), &ctx.family, 20)
}

fn gen_openness(rng: &mut ChaCha8Rng, ctx: &Ctx) -> Case {
    let rho = rng.random_range(0.0..0.95);
    gen_in_ball(rng, ctx, rho)
}

fn check_openness(ctx: &Ctx, case: &Case) -> Result<f64, WmError> {
    let t = scalar(&case.matrices[0]);
    let (q, cert) = quasi_inverse_neumann(t, &ctx.family, ctx.tol, ctx.max_terms)?;
    let tq = t.multiply(&q)?;
    let qt = q.multiply(t)?;
    let defect = t.add(&q)?.sub(&tq)?;
    let commutator = tq.sub(&qt)?;
    let residual_allowed = ctx.tol * (1.0 + cert.rho / (1.0 - cert.rho));
    let mut worst: f64 = 0.0;
    for (id, f) in ctx.family.ids().iter().zip(ctx.family.members()) {
        let pair = defect.weighted_norm(f)?.max(commutator.weighted_norm(f)?);
        worst = worst.max(fail_ratio(pair, 1e-8));
        let res = cert.residual(id).expect("residual per weight");
        worst = worst.max(fail_ratio(res.left.max(res.right), residual_allowed));
    }
    Ok(worst)
}

/// Worst ratio of `||Q_neumann - Q_exact||_f` to the certified tail.
pub fn oracle_ratio(
    t: &WeightedMatrix<ScalarAlgebra>,
    family: &WeightFamily,
    tol: f64,
    max_terms: usize,
) -> Result<f64, WmError> {
    let (q, cert) = quasi_inverse_neumann(t, family, tol, max_terms)?;
    let diff = q.sub(&quasi_inverse_exact(t)?)?;
    let mut worst: f64 = 0.0;
    for (id, f) in family.ids().iter().zip(family.members()) {
        let tail = cert.tail(id).expect("tail per weight");
        worst = worst.max(fail_ratio(diff.weighted_norm(f)?, tail * (1.0 + 1e-6)));
    }
    Ok(worst)
}

fn check_oracle(ctx: &Ctx, case: &Case) -> Result<f64, WmError> {
    oracle_ratio(scalar(&case.matrices[0]), &ctx.family, ctx.tol, ctx.max_terms)
}

fn gen_solvable(rng: &mut ChaCha8Rng, ctx: &Ctx) -> Case {
    loop {
        let rho = rng.random_range(0.05..1.5);
        let case = gen_in_ball(rng, ctx, rho);
        if quasi_inverse_exact(scalar(&case.matrices[0])).is_ok() {
            return case;
        }
    }
}

/// Worst of the involution `q(q(T)) = T` and commutation `Tq = qT`
/// deviations, relative to `1e-9` times the entry scale.
pub fn involution_ratio(t: &WeightedMatrix<ScalarAlgebra>) -> Result<f64, WmError> {
    let sup = Weight::poly(0);
    let q = quasi_inverse_exact(t)?;
    let back = quasi_inverse_exact(&q)?;
    let scale = t.weighted_norm(&sup)?;
    let inv = fail_ratio(back.sub(t)?.weighted_norm(&sup)?, 1e-9 * scale);
    let tq = t.multiply(&q)?;
    let qt = q.multiply(t)?;
    let cscale = tq.weighted_norm(&sup)?.max(qt.weighted_norm(&sup)?);
    let comm = fail_ratio(tq.sub(&qt)?.weighted_norm(&sup)?, 1e-9 * cscale);
    Ok(inv.max(comm))
}

fn check_involution(_ctx: &Ctx, case: &Case) -> Result<f64, WmError> {
    involution_ratio(scalar(&case.matrices[0]))
}

pub fn properties() -> Vec<Property> {
    vec![
        Property { name: "weights.monotone", generate: gen_weight_pair, check: check_monotone },
        Property { name: "weights.series_bound", generate: gen_prefix_len, check: check_series },
        Property { name: "algebra.submultiplicative", generate: gen_entry_pair, check: check_submult },
        Property { name: "wmatrix.triangle", generate: gen_two_scalars, check: check_triangle },
        Property { name: "wmatrix.product_bound", generate: gen_product_pair, check: check_product_bound },
        Property { name: "wmatrix.associativity", generate: gen_three_scalars, check: check_associativity },
        Property { name: "wmatrix.renorm_submultiplicative", generate: gen_two_scalars, check: check_renorm },
        Property { name: "quasi.power_bound", generate: gen_power, check: check_power },
        Property { name: "quasi.openness", generate: gen_openness, check: check_openness },
        Property { name: "quasi.oracle_equivalence", generate: gen_openness, check: check_oracle },
        Property { name: "quasi.involution", generate: gen_solvable, check: check_involution },
    ]
}

fn fails(check: Check, ctx: &Ctx, case: &Case) -> bool {
    check(ctx, case).map_or(true, |r| !(r <= 1.0))
}

fn drop_entry(m: &AnyMatrix, skip: usize) -> AnyMatrix {
    fn go<A: CoeffAlgebra>(t: &WeightedMatrix<A>, skip: usize) -> WeightedMatrix<A> {
        WeightedMatrix::from_entries(
            t.algebra().clone(),
            t.iter()
                .enumerate()
                .filter(|(idx, _)| *idx != skip)
                .map(|(_, (ij, v))| (ij, v.clone())),
        )
        .expect("subset of a valid matrix")
    }
    match m {
        AnyMatrix::Scalar(t) => go(t, skip).into(),
        AnyMatrix::Block(t) => go(t, skip).into(),
    }
}

fn nnz(m: &AnyMatrix) -> usize {
    match m {
        AnyMatrix::Scalar(t) => t.nnz(),
        AnyMatrix::Block(t) => t.nnz(),
    }
}

/// Greedily removes entries while `check` keeps failing.
pub fn shrink(check: Check, ctx: &Ctx, case: &Case) -> Case {
    let mut current = case.clone();
    let mut progress = true;
    while progress {
        progress = false;
        for mi in 0..current.matrices.len() {
            let mut idx = 0;
            while idx < nnz(&current.matrices[mi]) {
                let mut candidate = current.clone();
                candidate.matrices[mi] = drop_entry(&current.matrices[mi], idx);
                if fails(check, ctx, &candidate) {
                    current = candidate;
                    progress = true;
                } else {
                    idx += 1;
                }
            }
        }
    }
    current
}

fn write_reproducer(
    dir: &Path,
    prop: &str,
    ctx: &Ctx,
    case: &Case,
    case_index: usize,
    seed: u64,
    ratio: Option<f64>,
) -> Result<String, CliError> {
    let target = dir.join(prop);
    std::fs::create_dir_all(&target).map_err(|e| CliError::io(&target.display().to_string(), e))?;
    for (k, m) in case.matrices.iter().enumerate() {
        write_output(&target.join(format!("matrix{k}.json")), &m.to_json())?;
    }
    write_output(&target.join("weights.json"), &family_to_json(&ctx.family))?;
    let meta = json!({
        "property": prop,
        "seed": seed,
        "case_index": case_index,
        "params": case.params,
        "ratio": ratio,
    });
    write_output(&target.join("case.json"), &meta.to_string())?;
    Ok(target.display().to_string())
}

/// Runs every property for `cfg.cases` cases. Case inputs depend only on the
/// seed and the property's position, never on timing or thread count.
pub fn run_verify(
    cfg: &VerifyConfig,
    family: &WeightFamily,
    repro_dir: Option<&Path>,
) -> Result<Vec<PropertyResult>, CliError> {
    let mut ctx = Ctx::new(family.clone(), cfg);
    if cfg.cases > 0 {
        ctx.ensure_prefix();
    }
    let mut results = Vec::new();
    for (stream, prop) in properties().into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(stream as u64);
        let mut failures = 0;
        let mut worst = Some(0.0_f64);
        let mut reproducer = None;
        for case_index in 0..cfg.cases {
            let case = (prop.generate)(&mut rng, &ctx);
            let outcome = (prop.check)(&ctx, &case);
            let ratio = outcome.as_ref().ok().copied();
            worst = match (worst, ratio) {
                (Some(w), Some(r)) if !r.is_nan() => Some(w.max(r)),
                _ => None,
            };
            if !ratio.is_some_and(|r| r <= 1.0) {
                failures += 1;
                if reproducer.is_none() {
                    if let Some(dir) = repro_dir {
                        let small = shrink(prop.check, &ctx, &case);
                        let r = (prop.check)(&ctx, &small).ok();
                        reproducer =
                            Some(write_reproducer(dir, prop.name, &ctx, &small, case_index, cfg.seed, r)?);
                    }
                }
            }
        }
        results.push(PropertyResult {
            name: prop.name.to_string(),
            cases: cfg.cases,
            failures,
            worst_ratio: worst,
            reproducer,
        });
    }
    Ok(results)
}
