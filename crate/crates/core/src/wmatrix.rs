//! Finitely supported `N x N` matrices over a coefficient algebra and their
//! weighted sup-norms `||T||_f = max f(i v j) ||t_ij||`.
//!
//! Coordinates are 1-indexed everywhere. Exact zeros are never stored, so the
//! support is exactly the set of nonzero entries.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::CoeffAlgebra;
use crate::error::{Result, WmError};
use crate::weights::{CertifiedSeriesBound, Weight, WeightFamily};

/// Row count above which [`WeightedMatrix::multiply`] fans rows out to rayon.
const PAR_ROWS: usize = 64;
/// Widest right factor for which a dense per-row accumulator is used.
const DENSE_ACC_COLS: usize = 1 << 14;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedMatrix<A: CoeffAlgebra> {
    algebra: A,
    entries: BTreeMap<(usize, usize), A::Elem>,
    rows: usize,
    cols: usize,
}

/// Value of one weighted norm together with the entry attaining it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormValue {
    pub value: f64,
    /// `None` for the zero matrix.
    pub argmax: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormEntry {
    pub weight: String,
    pub value: f64,
    pub argmax: Option<(usize, usize)>,
}

/// Per-weight norms of one matrix over a family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormReport {
    pub norms: Vec<NormEntry>,
}

impl NormReport {
    pub fn value(&self, weight_id: &str) -> Option<f64> {
        self.norms
            .iter()
            .find(|n| n.weight == weight_id)
            .map(|n| n.value)
    }
}

impl<A: CoeffAlgebra> WeightedMatrix<A> {
    /// The zero matrix.
    pub fn zero(algebra: A) -> Self {
        Self {
            algebra,
            entries: BTreeMap::new(),
            rows: 0,
            cols: 0,
        }
    }

    /// Builds a matrix from `((i, j), value)` triples.
    ///
    /// Indices must be `>= 1`, coordinates unique and every value a member of
    /// `algebra`. Exact zeros are dropped.
    pub fn from_entries<I>(algebra: A, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = ((usize, usize), A::Elem)>,
    {
        let mut map = BTreeMap::new();
        for ((i, j), v) in entries {
            if i == 0 || j == 0 {
                return Err(WmError::IndexDomain(0));
            }
            algebra.check(&v)?;
            if map.insert((i, j), v).is_some() {
                return Err(WmError::DuplicateCoordinate { i, j });
            }
        }
        Ok(Self::from_map(algebra, map))
    }

    fn from_map(algebra: A, mut entries: BTreeMap<(usize, usize), A::Elem>) -> Self {
        entries.retain(|_, v| !algebra.is_zero(v));
        let rows = entries.keys().next_back().map_or(0, |&(i, _)| i);
        let cols = entries.keys().map(|&(_, j)| j).max().unwrap_or(0);
        Self {
            algebra,
            entries,
            rows,
            cols,
        }
    }

    pub fn algebra(&self) -> &A {
        &self.algebra
    }

    /// Largest row index with a stored entry, 0 for the zero matrix.
    pub fn support_rows(&self) -> usize {
        self.rows
    }

    /// Largest column index with a stored entry, 0 for the zero matrix.
    pub fn support_cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&A::Elem> {
        self.entries.get(&(i, j))
    }

    /// Entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), &A::Elem)> + '_ {
        self.entries.iter().map(|(&ij, v)| (ij, v))
    }

    fn ensure_compatible(&self, other: &Self) -> Result<()> {
        if self.algebra != other.algebra {
            return Err(WmError::Shape(format!(
                "algebra instances differ: {:?} vs {:?}",
                self.algebra.spec(),
                other.algebra.spec()
            )));
        }
        Ok(())
    }

    /// `||T||_f` with the index pair attaining it (first in row-major order on
    /// ties).
    pub fn weighted_norm_at(&self, f: &Weight) -> Result<NormValue> {
        let mut best = NormValue {
            value: 0.0,
            argmax: None,
        };
        for (&(i, j), v) in &self.entries {
            let w = f.eval(i.max(j))?;
            let weighted = w * self.algebra.norm(v)?;
            if !weighted.is_finite() {
                return Err(WmError::Overflow { i, j });
            }
            if best.argmax.is_none() || weighted > best.value {
                best = NormValue {
                    value: weighted,
                    argmax: Some((i, j)),
                };
            }
        }
        Ok(best)
    }

    /// `||T||_f = max over the support of f(max(i, j)) * ||t_ij||`.
    pub fn weighted_norm(&self, f: &Weight) -> Result<f64> {
        Ok(self.weighted_norm_at(f)?.value)
    }

    pub fn norm_report(&self, family: &WeightFamily) -> Result<NormReport> {
        let norms = family
            .ids()
            .into_iter()
            .zip(family.members())
            .map(|(weight, f)| {
                let nv = self.weighted_norm_at(f)?;
                Ok(NormEntry {
                    weight,
                    value: nv.value,
                    argmax: nv.argmax,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(NormReport { norms })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.ensure_compatible(other)?;
        let mut map = self.entries.clone();
        for (&ij, v) in &other.entries {
            match map.get_mut(&ij) {
                Some(slot) => *slot = self.algebra.add(slot, v)?,
                None => {
                    map.insert(ij, v.clone());
                }
            }
        }
        Ok(Self::from_map(self.algebra.clone(), map))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        let map = self
            .entries
            .iter()
            .map(|(&ij, v)| (ij, self.algebra.neg(v)))
            .collect();
        Self::from_map(self.algebra.clone(), map)
    }

    pub fn scale(&self, r: f64) -> Self {
        let map = self
            .entries
            .iter()
            .map(|(&ij, v)| (ij, self.algebra.scale(r, v)))
            .collect();
        Self::from_map(self.algebra.clone(), map)
    }

    /// The matrix product `self * other`.
    ///
    /// Entry `(i, j)` is the finite sum over `k` of `self_ik * other_kj`,
    /// accumulated sequentially in ascending `k`. Rows may be computed in
    /// parallel; the per-entry order is fixed, so the result does not depend
    /// on the thread count.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        self.ensure_compatible(other)?;
        if self.is_zero() || other.is_zero() {
            return Ok(Self::zero(self.algebra.clone()));
        }
        let lhs_rows = group_rows(&self.entries);
        let rhs_rows: BTreeMap<usize, Vec<(usize, &A::Elem)>> =
            group_rows(&other.entries).into_iter().collect();
        let width = other.cols;
        let algebra = &self.algebra;

        let row_product = |(i, row): &(usize, Vec<(usize, &A::Elem)>)| {
            product_row(algebra, *i, row, &rhs_rows, width)
        };
        let rows: Vec<Vec<((usize, usize), A::Elem)>> = if lhs_rows.len() >= PAR_ROWS {
            lhs_rows.par_iter().map(row_product).collect::<Result<_>>()?
        } else {
            lhs_rows.iter().map(row_product).collect::<Result<_>>()?
        };
        let map = rows.into_iter().flatten().collect();
        Ok(Self::from_map(self.algebra.clone(), map))
    }

    /// `T^n = T^(n-1) * T` for `n >= 1`.
    pub fn power(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(WmError::IndexDomain(0));
        }
        let mut acc = self.clone();
        for _ in 1..n {
            acc = acc.multiply(self)?;
        }
        Ok(acc)
    }
}

fn group_rows<E>(entries: &BTreeMap<(usize, usize), E>) -> Vec<(usize, Vec<(usize, &E)>)> {
    let mut rows: Vec<(usize, Vec<(usize, &E)>)> = Vec::new();
    for (&(i, j), v) in entries {
        match rows.last_mut() {
            Some((r, row)) if *r == i => row.push((j, v)),
            _ => rows.push((i, vec![(j, v)])),
        }
    }
    rows
}

fn product_row<A: CoeffAlgebra>(
    algebra: &A,
    i: usize,
    row: &[(usize, &A::Elem)],
    rhs_rows: &BTreeMap<usize, Vec<(usize, &A::Elem)>>,
    width: usize,
) -> Result<Vec<((usize, usize), A::Elem)>> {
    let mut out = Vec::new();
    let mut push = |j: usize, v: A::Elem| -> Result<()> {
        if !algebra.is_finite(&v) {
            return Err(WmError::Overflow { i, j });
        }
        if !algebra.is_zero(&v) {
            out.push(((i, j), v));
        }
        Ok(())
    };
    if width <= DENSE_ACC_COLS {
        let mut acc: Vec<Option<A::Elem>> = vec![None; width + 1];
        for &(k, r) in row {
            let Some(rhs) = rhs_rows.get(&k) else { continue };
            for &(j, s) in rhs {
                let p = algebra.mul(r, s)?;
                acc[j] = Some(match acc[j].take() {
                    Some(sum) => algebra.add(&sum, &p)?,
                    None => p,
                });
            }
        }
        for (j, v) in acc.into_iter().enumerate() {
            if let Some(v) = v {
                push(j, v)?;
            }
        }
    } else {
        let mut acc: BTreeMap<usize, A::Elem> = BTreeMap::new();
        for &(k, r) in row {
            let Some(rhs) = rhs_rows.get(&k) else { continue };
            for &(j, s) in rhs {
                let p = algebra.mul(r, s)?;
                let next = match acc.remove(&j) {
                    Some(sum) => algebra.add(&sum, &p)?,
                    None => p,
                };
                acc.insert(j, next);
            }
        }
        for (j, v) in acc {
            push(j, v)?;
        }
    }
    Ok(out)
}

/// `C_g * max(||R||_f ||S||_g, ||R||_g ||S||_f)`, which bounds both
/// `||RS||_f` and `||SR||_f`.
pub fn product_bound<A: CoeffAlgebra>(
    r: &WeightedMatrix<A>,
    s: &WeightedMatrix<A>,
    f: &Weight,
    g: &Weight,
    g_bound: &CertifiedSeriesBound,
) -> Result<f64> {
    let rf = r.weighted_norm(f)?;
    let rg = r.weighted_norm(g)?;
    let sf = s.weighted_norm(f)?;
    let sg = s.weighted_norm(g)?;
    Ok(g_bound.upper * (rf * sg).max(rg * sf))
}

/// `(C_g ||T||_g)^(n-1) ||T||_f`, the bound on `||T^n||_f`.
pub fn power_norm_bound<A: CoeffAlgebra>(
    t: &WeightedMatrix<A>,
    n: usize,
    f: &Weight,
    g: &Weight,
    g_bound: &CertifiedSeriesBound,
) -> Result<f64> {
    if n == 0 {
        return Err(WmError::IndexDomain(0));
    }
    let rho = g_bound.upper * t.weighted_norm(g)?;
    Ok(rho.powi((n - 1) as i32) * t.weighted_norm(f)?)
}

/// `h = C_f * f`, whose weighted norm is submultiplicative:
/// `||RS||_h <= ||R||_h ||S||_h`.
pub fn renorm_submultiplicative(f: &Weight, f_bound: &CertifiedSeriesBound) -> Result<Weight> {
    if !f.is_summable() {
        return Err(WmError::Divergent { kind: f.id() });
    }
    f.scaled(f_bound.upper)
}
