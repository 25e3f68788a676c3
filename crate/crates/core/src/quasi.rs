//! Quasi-inversion: `y` is the quasi-inverse of `x` when `xy = yx` and
//! `x + y - xy = 0`.
//!
//! Inside the ball `C_g ||T||_g < 1` the Neumann series `-sum_{n>=1} T^n`
//! converges in every weighted norm, and `||T^n||_f <= rho^(n-1) ||T||_f`
//! with `rho = C_g ||T||_g`. Summing that geometric bound gives the
//! certified truncation error reported by [`quasi_inverse_neumann`].
//! [`quasi_inverse_exact`] is an independent dense solve for scalar entries.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::ser::{SerializeMap, SerializeStruct};
use serde::{Serialize, Serializer};

use crate::algebra::CoeffAlgebra;
use crate::error::{Result, WmError};
use crate::weights::{CertifiedSeriesBound, Weight, WeightFamily};
use crate::wmatrix::WeightedMatrix;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_TERMS: usize = 10_000;
/// Largest 1-norm condition estimate of `I - T` accepted by the dense oracle.
pub const ORACLE_MAX_CONDITION: f64 = 1e12;

/// Measured `||T + Q - TQ||_f` (left) and `||T + Q - QT||_f` (right).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residual {
    pub left: f64,
    pub right: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuasiInverseCertificate {
    /// `C_g ||T||_g`, always `< 1` on an issued certificate.
    pub rho: f64,
    /// Number of Neumann terms summed.
    pub iterations: usize,
    /// Certified bound on `||q(T) - Q_N||_f`, i.e. `||T||_f rho^N / (1 - rho)`.
    pub per_weight_tail: Vec<(String, f64)>,
    pub per_weight_residual: Vec<(String, Residual)>,
    /// `||T^n||_f` for `n = 1..=iterations`, one row per family weight.
    pub power_norms: Vec<(String, Vec<f64>)>,
}

impl QuasiInverseCertificate {
    pub fn tail(&self, weight_id: &str) -> Option<f64> {
        self.per_weight_tail
            .iter()
            .find(|(id, _)| id == weight_id)
            .map(|&(_, t)| t)
    }

    pub fn residual(&self, weight_id: &str) -> Option<Residual> {
        self.per_weight_residual
            .iter()
            .find(|(id, _)| id == weight_id)
            .map(|&(_, r)| r)
    }
}

struct PairMap<'a, V>(&'a [(String, V)]);

impl<V: Serialize> Serialize for PairMap<'_, V> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (k, v) in self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl Serialize for QuasiInverseCertificate {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("QuasiInverseCertificate", 4)?;
        st.serialize_field("rho", &self.rho)?;
        st.serialize_field("iterations", &self.iterations)?;
        st.serialize_field("tails", &PairMap(&self.per_weight_tail))?;
        st.serialize_field("residuals", &PairMap(&self.per_weight_residual))?;
        st.end()
    }
}

/// `rho = C_g ||T||_g`. `rho < 1` certifies quasi-invertibility; `rho >= 1`
/// is inconclusive.
pub fn contraction_factor<A: CoeffAlgebra>(
    t: &WeightedMatrix<A>,
    g: &Weight,
    g_bound: &CertifiedSeriesBound,
) -> Result<f64> {
    Ok(g_bound.upper * t.weighted_norm(g)?)
}

fn geometric_tail(norm_f: f64, rho: f64, terms: usize) -> f64 {
    norm_f * rho.powi(terms as i32) / (1.0 - rho)
}

/// Least `N` with `||T||_f rho^N / (1 - rho) <= tol` for every weight.
fn terms_needed(norms: &[f64], rho: f64, tol: f64, max_terms: usize) -> Result<usize> {
    let worst = |n: usize| {
        norms
            .iter()
            .map(|&nf| geometric_tail(nf, rho, n))
            .fold(0.0, f64::max)
    };
    let mut n = 0;
    while worst(n) > tol {
        if n == max_terms {
            return Err(WmError::Budget {
                max_terms,
                achievable_tail: worst(max_terms),
            });
        }
        n += 1;
    }
    Ok(n)
}

/// Truncated Neumann series `Q_N = -sum_{n=1..N} T^n` with a certificate.
///
/// `N` is the least number of terms whose certified tail is at most `tol`
/// in every family norm. Terms follow `P_n = P_(n-1) * T`.
pub fn quasi_inverse_neumann<A: CoeffAlgebra>(
    t: &WeightedMatrix<A>,
    family: &WeightFamily,
    tol: f64,
    max_terms: usize,
) -> Result<(WeightedMatrix<A>, QuasiInverseCertificate)> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(WmError::Format(format!("tolerance must be positive, got {tol}")));
    }
    let rho = contraction_factor(t, family.summable(), family.summable_bound())?;
    if !(rho < 1.0) {
        return Err(WmError::NotCertified { rho });
    }
    let ids = family.ids();
    let norms = family
        .members()
        .iter()
        .map(|f| t.weighted_norm(f))
        .collect::<Result<Vec<_>>>()?;
    let iterations = terms_needed(&norms, rho, tol, max_terms)?;

    let mut power_norms: Vec<Vec<f64>> = vec![Vec::with_capacity(iterations); family.len()];
    let mut sum = WeightedMatrix::zero(t.algebra().clone());
    let mut term = t.clone();
    for n in 1..=iterations {
        if n > 1 {
            term = term.multiply(t)?;
        }
        for (row, f) in power_norms.iter_mut().zip(family.members()) {
            row.push(term.weighted_norm(f)?);
        }
        sum = sum.add(&term)?;
    }
    let q = sum.neg();

    let tq = t.multiply(&q)?;
    let qt = q.multiply(t)?;
    let base = t.add(&q)?;
    let left = base.sub(&tq)?;
    let right = base.sub(&qt)?;
    let per_weight_residual = ids
        .iter()
        .zip(family.members())
        .map(|(id, f)| {
            Ok((
                id.clone(),
                Residual {
                    left: left.weighted_norm(f)?,
                    right: right.weighted_norm(f)?,
                },
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let per_weight_tail = ids
        .iter()
        .zip(&norms)
        .map(|(id, &nf)| (id.clone(), geometric_tail(nf, rho, iterations)))
        .collect();
    let power_norms = ids.into_iter().zip(power_norms).collect();
    Ok((
        q,
        QuasiInverseCertificate {
            rho,
            iterations,
            per_weight_tail,
            per_weight_residual,
            power_norms,
        },
    ))
}

/// Exact quasi-inverse `Y = I - (I - X)^(-1)` by a dense LU solve on the
/// indices touched by the support. Scalar entries only.
///
/// Outside those indices `I - X` is the identity, so the result is the same
/// as solving on the full padded block.
pub fn quasi_inverse_exact<A: CoeffAlgebra>(t: &WeightedMatrix<A>) -> Result<WeightedMatrix<A>> {
    let algebra = t.algebra();
    let index: Vec<usize> = t
        .iter()
        .flat_map(|((i, j), _)| [i, j])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let dim = index.len();
    let pos = |n: usize| index.binary_search(&n).expect("index collected from support");

    let mut x = DMatrix::<Complex64>::zeros(dim, dim);
    for ((i, j), v) in t.iter() {
        let z = algebra.as_scalar(v).ok_or_else(|| {
            WmError::UnsupportedAlgebra(format!(
                "exact quasi-inverse needs scalar entries, got {:?}",
                algebra.spec()
            ))
        })?;
        x[(pos(i), pos(j))] = z;
    }
    if dim == 0 {
        return Ok(WeightedMatrix::zero(algebra.clone()));
    }
    let a = DMatrix::<Complex64>::identity(dim, dim) - &x;

    let singular = |condition: f64| WmError::NotQuasiInvertible { condition };
    let lu = a.clone().lu();
    let inv = lu.try_inverse().ok_or_else(|| singular(f64::INFINITY))?;
    let condition = one_norm(&a) * one_norm(&inv);
    if !(condition.is_finite() && condition <= ORACLE_MAX_CONDITION) {
        return Err(singular(condition));
    }
    // I - (I - X)^-1 = -(I - X)^-1 X; solving for the right-hand form avoids
    // cancellation when X is small.
    let y = lu.solve(&(-x)).ok_or_else(|| singular(condition))?;

    let mut entries = Vec::with_capacity(dim * dim);
    for r in 0..dim {
        for c in 0..dim {
            let v = y[(r, c)];
            let elem = algebra
                .from_scalar(v)
                .or_else(|| algebra.from_scalar(Complex64::new(v.re, 0.0)))
                .expect("scalar algebra accepts real values");
            entries.push(((index[r], index[c]), elem));
        }
    }
    WeightedMatrix::from_entries(algebra.clone(), entries)
}

fn one_norm(m: &DMatrix<Complex64>) -> f64 {
    m.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Whether `||x + y - xy||_f <= tol` and `||xy - yx||_f <= tol`.
pub fn is_quasi_inverse_pair<A: CoeffAlgebra>(
    x: &WeightedMatrix<A>,
    y: &WeightedMatrix<A>,
    f: &Weight,
    tol: f64,
) -> bool {
    let check = || -> Result<bool> {
        let xy = x.multiply(y)?;
        let yx = y.multiply(x)?;
        let defect = x.add(y)?.sub(&xy)?.weighted_norm(f)?;
        let commutator = xy.sub(&yx)?.weighted_norm(f)?;
        Ok(defect <= tol && commutator <= tol)
    };
    check().unwrap_or(false)
}

/// Quasi-inverse by whichever route suits the algebra: the dense oracle for
/// scalar entries, otherwise a tight Neumann sum.
fn quasi_inverse_any<A: CoeffAlgebra>(
    t: &WeightedMatrix<A>,
    family: &WeightFamily,
    exact: bool,
) -> Result<WeightedMatrix<A>> {
    if exact {
        quasi_inverse_exact(t)
    } else {
        quasi_inverse_neumann(t, family, 1e-14, DEFAULT_MAX_TERMS).map(|(q, _)| q)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbePoint {
    pub scale: f64,
    /// `||q(T + s D) - q(T)||_f` per family weight, or why the perturbed
    /// point could not be inverted.
    pub deviations: std::result::Result<Vec<(String, f64)>, String>,
}

/// Empirical continuity check of quasi-inversion along `direction`.
///
/// Scalar matrices use the exact oracle at every point; other algebras use
/// the Neumann route throughout, so the comparison never mixes methods.
pub fn continuity_probe<A: CoeffAlgebra>(
    t: &WeightedMatrix<A>,
    direction: &WeightedMatrix<A>,
    scales: &[f64],
    family: &WeightFamily,
) -> Result<Vec<ProbePoint>> {
    let exact = t
        .iter()
        .chain(direction.iter())
        .all(|(_, v)| t.algebra().as_scalar(v).is_some());
    let base = quasi_inverse_any(t, family, exact)?;
    let ids = family.ids();
    Ok(scales
        .iter()
        .map(|&scale| {
            let point = || -> Result<Vec<(String, f64)>> {
                let moved = t.add(&direction.scale(scale))?;
                let q = quasi_inverse_any(&moved, family, exact)?;
                let diff = q.sub(&base)?;
                ids.iter()
                    .zip(family.members())
                    .map(|(id, f)| Ok((id.clone(), diff.weighted_norm(f)?)))
                    .collect()
            };
            ProbePoint {
                scale,
                deviations: point().map_err(|e| e.to_string()),
            }
        })
        .collect())
}

/// Trend check on a probe: walking from larger to smaller scales, no
/// deviation may grow by more than a factor 1.5 over the previous one.
/// Failed points break the trend.
pub fn probe_decays(points: &[ProbePoint]) -> bool {
    let mut sorted: Vec<&ProbePoint> = points.iter().collect();
    sorted.sort_by(|a, b| b.scale.total_cmp(&a.scale));
    let mut prev: Option<&Vec<(String, f64)>> = None;
    for p in sorted {
        let Ok(devs) = &p.deviations else { return false };
        if let Some(prev) = prev {
            for ((_, before), (_, now)) in prev.iter().zip(devs) {
                if *now > 1.5 * before + f64::MIN_POSITIVE {
                    return false;
                }
            }
        }
        prev = Some(devs);
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{Block, BlockAlgebra, ScalarAlgebra};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn scalar(entries: &[((usize, usize), f64)]) -> WeightedMatrix<ScalarAlgebra> {
        WeightedMatrix::from_entries(
            ScalarAlgebra::complex(),
            entries.iter().map(|&(ij, v)| (ij, c(v))),
        )
        .unwrap()
    }

    fn entry(t: &WeightedMatrix<ScalarAlgebra>, i: usize, j: usize) -> f64 {
        t.get(i, j).map_or(0.0, |z| z.re)
    }

    #[test]
    fn contraction_examples() {
        let fam = WeightFamily::default_family();
        let (g, gb) = (fam.summable(), fam.summable_bound());
        let rho = contraction_factor(&scalar(&[((1, 1), 0.5)]), g, gb).unwrap();
        assert!((rho - 0.5 * gb.upper).abs() < 1e-15);
        assert!((rho - 0.8225).abs() < 1e-4);
        assert_eq!(contraction_factor(&scalar(&[]), g, gb).unwrap(), 0.0);
        let rho = contraction_factor(&scalar(&[((1, 1), 0.7)]), g, gb).unwrap();
        assert!((rho - 1.1515).abs() < 1e-4);
    }

    #[test]
    fn neumann_one_by_one() {
        let fam = WeightFamily::default_family();
        let t = scalar(&[((1, 1), 0.5)]);
        let (q, cert) = quasi_inverse_neumann(&t, &fam, 1e-12, DEFAULT_MAX_TERMS).unwrap();
        assert!((entry(&q, 1, 1) + 1.0).abs() < 1e-11);
        assert!(cert.rho < 1.0);
        for (_, r) in &cert.per_weight_residual {
            assert!(r.left <= 1e-12 && r.right <= 1e-12);
        }
        for (id, tail) in &cert.per_weight_tail {
            assert!(*tail <= 1e-12, "{id}");
        }
    }

    #[test]
    fn neumann_zero_matrix() {
        let fam = WeightFamily::default_family();
        let (q, cert) = quasi_inverse_neumann(&scalar(&[]), &fam, 1e-12, 10).unwrap();
        assert!(q.is_zero());
        assert_eq!(cert.iterations, 0);
        assert!(cert.per_weight_residual.iter().all(|(_, r)| r.left == 0.0 && r.right == 0.0));
    }

    #[test]
    fn neumann_refuses_outside_ball() {
        let fam = WeightFamily::default_family();
        let t = scalar(&[((1, 2), 5.0)]);
        assert!(matches!(
            quasi_inverse_neumann(&t, &fam, 1e-12, 100),
            Err(WmError::NotCertified { .. })
        ));
        let q = quasi_inverse_exact(&t).unwrap();
        assert_eq!(q, t.neg());
    }

    #[test]
    fn neumann_budget_error() {
        let fam = WeightFamily::default_family();
        let t = scalar(&[((1, 1), 0.6)]);
        match quasi_inverse_neumann(&t, &fam, 1e-12, 5) {
            Err(WmError::Budget { max_terms, achievable_tail }) => {
                assert_eq!(max_terms, 5);
                assert!(achievable_tail > 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn exact_examples() {
        let q = quasi_inverse_exact(&scalar(&[((1, 1), 0.5)])).unwrap();
        assert!((entry(&q, 1, 1) + 1.0).abs() < 1e-15);
        let q = quasi_inverse_exact(&scalar(&[((1, 1), 0.7)])).unwrap();
        assert!((entry(&q, 1, 1) + 7.0 / 3.0).abs() < 1e-12);
        assert!(matches!(
            quasi_inverse_exact(&scalar(&[((1, 1), 1.0)])),
            Err(WmError::NotQuasiInvertible { .. })
        ));
        assert!(quasi_inverse_exact(&scalar(&[])).unwrap().is_zero());
    }

    #[test]
    fn exact_rejects_blocks() {
        let t = WeightedMatrix::from_entries(
            BlockAlgebra::new(2).unwrap(),
            [((1, 1), Block::identity(2))],
        )
        .unwrap();
        assert!(matches!(
            quasi_inverse_exact(&t),
            Err(WmError::UnsupportedAlgebra(_))
        ));
    }

    #[test]
    fn pair_predicate_examples() {
        let f = Weight::poly(2);
        let x = scalar(&[((1, 1), 0.5)]);
        assert!(is_quasi_inverse_pair(&x, &scalar(&[((1, 1), -1.0)]), &f, 1e-12));
        assert!(is_quasi_inverse_pair(&scalar(&[]), &scalar(&[]), &f, 1e-12));
        assert!(!is_quasi_inverse_pair(&x, &scalar(&[((1, 1), -0.9)]), &f, 1e-6));
    }

    #[test]
    fn pair_predicate_detects_noncommuting() {
        // x + y - xy = 0 needs xy = yx as well
        let f = Weight::poly(0);
        let x = scalar(&[((1, 2), 1.0)]);
        let y = scalar(&[((2, 1), 1.0)]);
        assert!(!is_quasi_inverse_pair(&x, &y, &f, 1e-6));
    }

    #[test]
    fn probe_examples() {
        let fam = WeightFamily::default_family();
        let t = scalar(&[((1, 1), 0.5)]);
        let zero = scalar(&[]);
        let points = continuity_probe(&t, &zero, &[0.1, 0.05], &fam).unwrap();
        for p in &points {
            assert!(p.deviations.as_ref().unwrap().iter().all(|(_, d)| *d == 0.0));
        }
        let dir = scalar(&[((1, 1), 1.0)]);
        let scales = [0.1, 0.05, 0.025];
        let points = continuity_probe(&t, &dir, &scales, &fam).unwrap();
        assert!(probe_decays(&points));
        for p in &points {
            let s = p.scale;
            let expected = (-(0.5 + s) / (0.5 - s) + 1.0).abs();
            let got = p.deviations.as_ref().unwrap()[0].1;
            assert!((got - expected).abs() < 1e-12, "s={s}: {got} vs {expected}");
        }
        let devs: Vec<f64> = points.iter().map(|p| p.deviations.as_ref().unwrap()[0].1).collect();
        // roughly linear: halving s roughly halves the deviation
        for w in devs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((1.0..=4.0).contains(&ratio), "{ratio}");
        }
    }

    #[test]
    fn probe_reports_bad_points_without_failing() {
        let fam = WeightFamily::default_family();
        let t = scalar(&[((1, 1), 0.5)]);
        let dir = scalar(&[((1, 1), 1.0)]);
        let points = continuity_probe(&t, &dir, &[0.5, 0.1], &fam).unwrap();
        assert!(points[0].deviations.is_err());
        assert!(points[1].deviations.is_ok());
        assert!(!probe_decays(&points));
    }

    #[test]
    fn certificate_json_shape() {
        let fam = WeightFamily::default_family();
        let (_, cert) =
            quasi_inverse_neumann(&scalar(&[((1, 1), 0.25)]), &fam, 1e-10, 100).unwrap();
        let v = serde_json::to_value(&cert).unwrap();
        assert!(v["rho"].is_f64());
        assert_eq!(v["iterations"].as_u64().unwrap() as usize, cert.iterations);
        assert!(v["tails"]["poly(2)"].is_f64());
        assert!(v["residuals"]["poly(0)"]["left"].is_f64());
        assert!(v.get("power_norms").is_none());
    }
}
