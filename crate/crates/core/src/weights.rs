//! Weight functions on the positive integers and certified bounds on the
//! series of their reciprocals.
//!
//! A [`Weight`] is a positive nondecreasing function `n -> w(n)` evaluated
//! 1-indexed. Weights whose reciprocal series converges can be certified with
//! [`certify_series_bound`], which returns an upper bound on `sum 1/w(n)`
//! that every product and power estimate in this crate consumes as its
//! constant.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, WmError};

/// Default number of explicitly summed terms for polynomial weights.
pub const DEFAULT_POLY_TERMS: usize = 1_000_000;
/// Default number of explicitly summed terms for exponential weights.
pub const DEFAULT_EXP_TERMS: usize = 64;

/// Serializable description of a weight.
///
/// This is the wire form; [`Weight`] is the validated value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum WeightKind {
    /// `n^m`.
    Poly { m: u32 },
    /// `base^n` with `base > 1`.
    Exp { base: f64 },
    /// Tabulated values for `n = 1..=values.len()`, then `tail(n)`.
    Table { values: Vec<f64>, tail: Box<WeightKind> },
    /// Pointwise sum of the terms.
    Sum { terms: Vec<WeightKind> },
    /// `factor * weight(n)` with `factor > 0`.
    Scaled { factor: f64, weight: Box<WeightKind> },
}

/// A validated positive nondecreasing weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WeightKind", into = "WeightKind")]
pub struct Weight {
    kind: WeightKind,
}

impl TryFrom<WeightKind> for Weight {
    type Error = WmError;

    fn try_from(kind: WeightKind) -> Result<Self> {
        validate(&kind)?;
        Ok(Self { kind })
    }
}

impl From<Weight> for WeightKind {
    fn from(w: Weight) -> Self {
        w.kind
    }
}

fn validate(kind: &WeightKind) -> Result<()> {
    match kind {
        WeightKind::Poly { m } => {
            if *m > i32::MAX as u32 {
                return Err(WmError::InvalidWeight(format!("degree {m} too large")));
            }
            Ok(())
        }
        WeightKind::Exp { base } => {
            if !(base.is_finite() && *base > 1.0) {
                return Err(WmError::InvalidWeight(format!(
                    "exponential base must be finite and > 1, got {base}"
                )));
            }
            Ok(())
        }
        WeightKind::Table { values, tail } => {
            if values.is_empty() {
                return Err(WmError::InvalidWeight("table has no values".into()));
            }
            if !matches!(**tail, WeightKind::Poly { .. } | WeightKind::Exp { .. }) {
                return Err(WmError::InvalidWeight(
                    "table tail must be a polynomial or exponential rule".into(),
                ));
            }
            validate(tail)?;
            let mut prev = 0.0_f64;
            for (idx, &v) in values.iter().enumerate() {
                if !(v.is_finite() && v > 0.0) {
                    return Err(WmError::InvalidWeight(format!(
                        "table value {} at n={} is not finite and positive",
                        v,
                        idx + 1
                    )));
                }
                if v < prev {
                    return Err(WmError::InvalidWeight(format!(
                        "table decreases at n={}",
                        idx + 1
                    )));
                }
                prev = v;
            }
            let seam = eval_kind(tail, values.len() + 1);
            if prev > seam {
                return Err(WmError::InvalidWeight(format!(
                    "last table value {prev} exceeds the tail value {seam} at n={}",
                    values.len() + 1
                )));
            }
            Ok(())
        }
        WeightKind::Sum { terms } => {
            if terms.is_empty() {
                return Err(WmError::InvalidWeight("sum has no terms".into()));
            }
            terms.iter().try_for_each(validate)
        }
        WeightKind::Scaled { factor, weight } => {
            if !(factor.is_finite() && *factor > 0.0) {
                return Err(WmError::InvalidWeight(format!(
                    "scale factor must be finite and positive, got {factor}"
                )));
            }
            validate(weight)
        }
    }
}

// n >= 1 is the caller's responsibility.
fn eval_kind(kind: &WeightKind, n: usize) -> f64 {
    match kind {
        WeightKind::Poly { m } => (n as f64).powi(*m as i32),
        WeightKind::Exp { base } => base.powf(n as f64),
        WeightKind::Table { values, tail } => match values.get(n - 1) {
            Some(v) => *v,
            None => eval_kind(tail, n),
        },
        WeightKind::Sum { terms } => terms.iter().map(|t| eval_kind(t, n)).sum(),
        WeightKind::Scaled { factor, weight } => factor * eval_kind(weight, n),
    }
}

/// Certified bound on `sum_{n > terms} 1/w(n)`, or `None` when the series
/// diverges.
fn tail_bound(kind: &WeightKind, terms: usize) -> Option<f64> {
    let big_n = terms as f64;
    match kind {
        WeightKind::Poly { m } if *m >= 2 => {
            // integral comparison: sum_{n>N} n^-m <= int_N^inf x^-m dx
            Some(big_n.powi(1 - *m as i32) / f64::from(*m - 1))
        }
        WeightKind::Poly { .. } => None,
        // geometric series, exact
        WeightKind::Exp { base } => Some(base.powf(-big_n) / (base - 1.0)),
        WeightKind::Table { values, tail } => {
            let rest = tail_bound(tail, terms.max(values.len()))?;
            let explicit: f64 = values.iter().skip(terms).map(|v| 1.0 / v).sum();
            Some(explicit + rest)
        }
        WeightKind::Sum { terms: parts } => {
            // 1/(a_1+..+a_k) <= 1/a_j for each j, and <= (1/k^2) sum_j 1/a_j
            let tails: Vec<Option<f64>> = parts.iter().map(|p| tail_bound(p, terms)).collect();
            let best_single = tails.iter().flatten().copied().reduce(f64::min)?;
            if tails.iter().all(Option::is_some) {
                let k = parts.len() as f64;
                let averaged = tails.iter().flatten().sum::<f64>() / (k * k);
                Some(best_single.min(averaged))
            } else {
                Some(best_single)
            }
        }
        WeightKind::Scaled { factor, weight } => Some(tail_bound(weight, terms)? / factor),
    }
}

fn default_terms_kind(kind: &WeightKind) -> usize {
    match kind {
        WeightKind::Poly { .. } => DEFAULT_POLY_TERMS,
        WeightKind::Exp { .. } => DEFAULT_EXP_TERMS,
        WeightKind::Table { values, tail } => values.len() + default_terms_kind(tail),
        WeightKind::Sum { terms } => terms
            .iter()
            .filter(|t| tail_bound(t, 1).is_some())
            .map(default_terms_kind)
            .max()
            .unwrap_or(DEFAULT_POLY_TERMS),
        WeightKind::Scaled { weight, .. } => default_terms_kind(weight),
    }
}

impl Weight {
    pub fn new(kind: WeightKind) -> Result<Self> {
        Self::try_from(kind)
    }

    /// `n^m`, the rapidly-decreasing family member of degree `m`.
    pub fn poly(m: u32) -> Self {
        Self::new(WeightKind::Poly { m }).expect("polynomial weights are always valid")
    }

    pub fn exp(base: f64) -> Result<Self> {
        Self::new(WeightKind::Exp { base })
    }

    pub fn table(values: Vec<f64>, tail: Weight) -> Result<Self> {
        Self::new(WeightKind::Table {
            values,
            tail: Box::new(tail.kind),
        })
    }

    /// Pointwise `factor * self`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(WeightKind::Scaled {
            factor,
            weight: Box::new(self.kind.clone()),
        })
    }

    pub fn kind(&self) -> &WeightKind {
        &self.kind
    }

    /// Evaluates `w(n)` for `n >= 1`.
    ///
    /// Values beyond the `f64` range saturate to `+inf`; norm computations
    /// reject them.
    pub fn eval(&self, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(WmError::IndexDomain(n));
        }
        Ok(eval_kind(&self.kind, n))
    }

    /// Whether `sum 1/w(n)` is finite.
    pub fn is_summable(&self) -> bool {
        tail_bound(&self.kind, 1).is_some()
    }

    /// Number of explicit terms used by [`certify_series_bound`] when the
    /// caller has no preference.
    pub fn default_terms(&self) -> usize {
        default_terms_kind(&self.kind)
    }

    /// Stable textual identifier, used as the key in reports.
    pub fn id(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_kind(&self.kind, f)
    }
}

fn fmt_kind(kind: &WeightKind, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match kind {
        WeightKind::Poly { m } => write!(f, "poly({m})"),
        WeightKind::Exp { base } => write!(f, "exp({base})"),
        WeightKind::Table { values, tail } => {
            write!(f, "table[{}](", values.len())?;
            fmt_kind(tail, f)?;
            write!(f, ")")
        }
        WeightKind::Sum { terms } => {
            write!(f, "sum(")?;
            for (idx, t) in terms.iter().enumerate() {
                if idx > 0 {
                    write!(f, "+")?;
                }
                fmt_kind(t, f)?;
            }
            write!(f, ")")
        }
        WeightKind::Scaled { factor, weight } => {
            write!(f, "{factor}*")?;
            fmt_kind(weight, f)
        }
    }
}

/// Pointwise sum `a + b`.
pub fn sum_weights(a: &Weight, b: &Weight) -> Weight {
    Weight {
        kind: WeightKind::Sum {
            terms: vec![a.kind.clone(), b.kind.clone()],
        },
    }
}

/// Upper bound on `sum_{n>=1} 1/g(n)` split into an explicit partial sum and
/// a certified tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifiedSeriesBound {
    pub partial_sum: f64,
    pub tail_bound: f64,
    pub terms_used: usize,
    /// `partial_sum + tail_bound`.
    pub upper: f64,
}

/// Certifies `sum 1/w(n) <= upper`.
///
/// The first `terms` reciprocals are accumulated in ascending `n` with
/// compensated summation, so the result is bit-reproducible.
pub fn certify_series_bound(w: &Weight, terms: usize) -> Result<CertifiedSeriesBound> {
    if terms == 0 {
        return Err(WmError::IndexDomain(0));
    }
    let tail = tail_bound(&w.kind, terms).ok_or_else(|| WmError::Divergent {
        kind: w.id(),
    })?;
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for n in 1..=terms {
        let term = 1.0 / eval_kind(&w.kind, n);
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    }
    let partial_sum = sum + comp;
    Ok(CertifiedSeriesBound {
        partial_sum,
        tail_bound: tail,
        terms_used: terms,
        upper: partial_sum + tail,
    })
}

/// [`certify_series_bound`] with [`Weight::default_terms`].
pub fn certify_default(w: &Weight) -> Result<CertifiedSeriesBound> {
    certify_series_bound(w, w.default_terms())
}

/// Serializable family description: `{"weights":[...],"summable":idx}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub weights: Vec<Weight>,
    pub summable: usize,
}

/// A finite nonempty set of weights with a designated summable member `g`
/// and its certified constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FamilySpec", into = "FamilySpec")]
pub struct WeightFamily {
    members: Vec<Weight>,
    summable: usize,
    bound: CertifiedSeriesBound,
}

impl TryFrom<FamilySpec> for WeightFamily {
    type Error = WmError;

    fn try_from(spec: FamilySpec) -> Result<Self> {
        Self::new(spec.weights, spec.summable)
    }
}

impl From<WeightFamily> for FamilySpec {
    fn from(f: WeightFamily) -> Self {
        FamilySpec {
            weights: f.members,
            summable: f.summable,
        }
    }
}

impl WeightFamily {
    pub fn new(members: Vec<Weight>, summable: usize) -> Result<Self> {
        if members.is_empty() {
            return Err(WmError::InvalidWeight("weight family is empty".into()));
        }
        let g = members.get(summable).ok_or_else(|| {
            WmError::InvalidWeight(format!(
                "summable index {summable} out of range for {} weights",
                members.len()
            ))
        })?;
        let bound = certify_default(g)?;
        Ok(Self {
            members,
            summable,
            bound,
        })
    }

    /// `{n^0, n^1, ..., n^max_degree}` with `g = n^max_degree`.
    ///
    /// `max_degree` must be at least 2 for `g` to be summable.
    pub fn rapidly_decreasing(max_degree: u32) -> Result<Self> {
        let members = (0..=max_degree).map(Weight::poly).collect();
        Self::new(members, max_degree as usize)
    }

    /// The family `{n^0, n^1, n^2}` with `g = n^2`.
    pub fn default_family() -> Self {
        Self::rapidly_decreasing(2).expect("n^2 is summable")
    }

    /// Adds every pairwise sum `f + f'` of distinct members, which makes the
    /// family upward directed without changing the topology it induces.
    pub fn with_pairwise_sums(&self) -> Self {
        let mut members = self.members.clone();
        for a in 0..self.members.len() {
            for b in (a + 1)..self.members.len() {
                members.push(sum_weights(&self.members[a], &self.members[b]));
            }
        }
        Self {
            members,
            summable: self.summable,
            bound: self.bound,
        }
    }

    pub fn members(&self) -> &[Weight] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn summable_index(&self) -> usize {
        self.summable
    }

    /// The designated summable weight `g`.
    pub fn summable(&self) -> &Weight {
        &self.members[self.summable]
    }

    /// Certified upper bound on `C_g`.
    pub fn summable_bound(&self) -> &CertifiedSeriesBound {
        &self.bound
    }

    /// Report keys, disambiguated with `#idx` when two members print alike.
    pub fn ids(&self) -> Vec<String> {
        let raw: Vec<String> = self.members.iter().map(Weight::id).collect();
        raw.iter()
            .enumerate()
            .map(|(idx, id)| {
                if raw.iter().filter(|other| *other == id).count() > 1 {
                    format!("{id}#{idx}")
                } else {
                    id.clone()
                }
            })
            .collect()
    }

    pub fn spec(&self) -> FamilySpec {
        self.clone().into()
    }
}

impl Default for WeightFamily {
    fn default() -> Self {
        Self::default_family()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_examples() {
        assert_eq!(Weight::poly(3).eval(2).unwrap(), 8.0);
        assert_eq!(Weight::poly(0).eval(17).unwrap(), 1.0);
        assert_eq!(Weight::exp(2.0).unwrap().eval(4).unwrap(), 16.0);
    }

    #[test]
    fn eval_rejects_zero_index() {
        assert_eq!(Weight::poly(2).eval(0), Err(WmError::IndexDomain(0)));
    }

    #[test]
    fn exponential_saturates() {
        let w = Weight::exp(10.0).unwrap();
        assert!(w.eval(400).unwrap().is_infinite());
    }

    #[test]
    fn invalid_weights_rejected() {
        assert!(Weight::exp(1.0).is_err());
        assert!(Weight::exp(f64::NAN).is_err());
        assert!(Weight::table(vec![], Weight::poly(2)).is_err());
        assert!(Weight::table(vec![2.0, 1.0], Weight::poly(2)).is_err());
        assert!(Weight::table(vec![1.0, -1.0], Weight::poly(2)).is_err());
        // seam: tail(3) = 9 < 10
        assert!(Weight::table(vec![1.0, 10.0], Weight::poly(2)).is_err());
        assert!(Weight::table(vec![1.0, 9.0], Weight::poly(2)).is_ok());
        let nested = Weight::table(vec![1.0], Weight::poly(2)).unwrap();
        assert!(Weight::table(vec![1.0], nested).is_err());
        assert!(Weight::poly(2).scaled(0.0).is_err());
    }

    #[test]
    fn table_eval_switches_to_tail() {
        let w = Weight::table(vec![0.5, 0.5, 3.0], Weight::poly(2)).unwrap();
        assert_eq!(w.eval(1).unwrap(), 0.5);
        assert_eq!(w.eval(3).unwrap(), 3.0);
        assert_eq!(w.eval(4).unwrap(), 16.0);
    }

    #[test]
    fn sum_example() {
        let w = sum_weights(&Weight::poly(2), &Weight::poly(0));
        assert_eq!(w.eval(3).unwrap(), 10.0);
    }

    #[test]
    fn divergent_kinds_fail() {
        for m in [0, 1] {
            let err = certify_series_bound(&Weight::poly(m), 100).unwrap_err();
            assert_eq!(
                err,
                WmError::Divergent {
                    kind: format!("poly({m})")
                }
            );
        }
        let constant_tail = Weight::table(vec![1.0, 1.0], Weight::poly(0)).unwrap();
        assert!(matches!(
            certify_series_bound(&constant_tail, 10),
            Err(WmError::Divergent { .. })
        ));
        assert!(certify_series_bound(&Weight::poly(2), 0).is_err());
    }

    #[test]
    fn zeta_two_bound() {
        let b = certify_series_bound(&Weight::poly(2), 1_000_000).unwrap();
        assert_eq!(b.tail_bound, 1e-6);
        assert!(b.upper >= 1.644933 && b.upper <= 1.644935, "{}", b.upper);
        assert!(b.upper >= std::f64::consts::PI.powi(2) / 6.0);
    }

    #[test]
    fn geometric_bound_is_exact() {
        let b = certify_series_bound(&Weight::exp(2.0).unwrap(), 50).unwrap();
        assert!((b.upper - 1.0).abs() <= 1e-12);
        assert_eq!(b.tail_bound, 2f64.powi(-50));
    }

    #[test]
    fn table_tail_covers_unsummed_values() {
        let w = Weight::table(vec![1.0, 2.0, 4.0, 8.0], Weight::exp(2.0).unwrap()).unwrap();
        // all values are 2^(n-1) then 2^n; exact sum = 1 + 1/2 + 1/4 + 1/8 + 1/16
        let exact = 1.0 + 0.5 + 0.25 + 0.125 + 1.0 / 16.0;
        for terms in [1, 2, 4, 10, 60] {
            let b = certify_series_bound(&w, terms).unwrap();
            assert!(b.upper >= exact - 1e-15, "terms={terms}");
            assert!(b.upper <= exact + 1e-12, "terms={terms}");
        }
    }

    #[test]
    fn doubled_weight_bound_is_no_larger() {
        let g = Weight::poly(2);
        let gg = sum_weights(&g, &g);
        for terms in [10, 1000, 100_000] {
            let single = certify_series_bound(&g, terms).unwrap();
            let double = certify_series_bound(&gg, terms).unwrap();
            assert!(double.upper <= single.upper);
        }
    }

    #[test]
    fn renormed_constant_is_one() {
        let f = Weight::poly(2);
        let cf = certify_default(&f).unwrap();
        let h = f.scaled(cf.upper).unwrap();
        let ch = certify_default(&h).unwrap();
        assert!((ch.upper - 1.0).abs() < 1e-12);
        assert!(ch.upper >= 1.0 - 1e-15);
    }

    #[test]
    fn family_validation_and_ids() {
        let fam = WeightFamily::default_family();
        assert_eq!(fam.ids(), vec!["poly(0)", "poly(1)", "poly(2)"]);
        assert_eq!(fam.summable(), &Weight::poly(2));
        assert!(WeightFamily::new(vec![], 0).is_err());
        assert!(WeightFamily::new(vec![Weight::poly(2)], 1).is_err());
        assert!(matches!(
            WeightFamily::new(vec![Weight::poly(1)], 0),
            Err(WmError::Divergent { .. })
        ));
        let dup = WeightFamily::new(vec![Weight::poly(2), Weight::poly(2)], 0).unwrap();
        assert_eq!(dup.ids(), vec!["poly(2)#0", "poly(2)#1"]);
        assert_eq!(fam.with_pairwise_sums().len(), 6);
    }

    #[test]
    fn weight_json_forms() {
        let w: Weight = serde_json::from_str(r#"{"kind":"poly","m":2}"#).unwrap();
        assert_eq!(w, Weight::poly(2));
        let w: Weight = serde_json::from_str(r#"{"kind":"exp","base":2.0}"#).unwrap();
        assert_eq!(w.eval(3).unwrap(), 8.0);
        let w: Weight = serde_json::from_str(
            r#"{"kind":"table","values":[1,2,3],"tail":{"kind":"poly","m":2}}"#,
        )
        .unwrap();
        assert_eq!(w.eval(2).unwrap(), 2.0);
        assert!(serde_json::from_str::<Weight>(r#"{"kind":"exp","base":0.5}"#).is_err());
        let fam: WeightFamily = serde_json::from_str(
            r#"{"weights":[{"kind":"poly","m":0},{"kind":"poly","m":2}],"summable":1}"#,
        )
        .unwrap();
        assert_eq!(fam.len(), 2);
        let back = serde_json::to_string(&fam).unwrap();
        assert_eq!(
            back,
            r#"{"weights":[{"kind":"poly","m":0},{"kind":"poly","m":2}],"summable":1}"#
        );
    }
}
