//! Coefficient algebras: the Banach algebras matrix entries are drawn from.

use std::fmt::Debug;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WmError};

/// A normed associative algebra over the reals or complexes with a
/// submultiplicative norm.
///
/// Implementors are algebra *instances* (e.g. blocks of a fixed size); two
/// matrices can only be combined when their instances compare equal.
/// Multiplication is never assumed to be commutative.
pub trait CoeffAlgebra: Clone + Debug + PartialEq + Send + Sync {
    type Elem: Clone + Debug + PartialEq + Send + Sync;

    fn zero(&self) -> Self::Elem;

    /// Exact zero test; no tolerance.
    fn is_zero(&self, x: &Self::Elem) -> bool;

    /// Checks that `x` belongs to this instance.
    fn check(&self, x: &Self::Elem) -> Result<()>;

    fn add(&self, x: &Self::Elem, y: &Self::Elem) -> Result<Self::Elem>;

    fn neg(&self, x: &Self::Elem) -> Self::Elem;

    fn mul(&self, x: &Self::Elem, y: &Self::Elem) -> Result<Self::Elem>;

    fn scale(&self, r: f64, x: &Self::Elem) -> Self::Elem;

    /// The algebra norm. Fails on non-finite elements.
    fn norm(&self, x: &Self::Elem) -> Result<f64>;

    fn is_finite(&self, x: &Self::Elem) -> bool;

    /// Serializable description of the instance.
    fn spec(&self) -> AlgebraSpec;

    /// Views `x` as a complex scalar, for instances that are the base field.
    fn as_scalar(&self, _x: &Self::Elem) -> Option<Complex64> {
        None
    }

    fn from_scalar(&self, _z: Complex64) -> Option<Self::Elem> {
        None
    }

    fn sub(&self, x: &Self::Elem, y: &Self::Elem) -> Result<Self::Elem> {
        self.add(x, &self.neg(y))
    }
}

/// Wire description `{"kind":"scalar"}` / `{"kind":"block","k":2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AlgebraSpec {
    Scalar {
        #[serde(default, skip_serializing_if = "Field::is_complex")]
        field: Field,
    },
    Block { k: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Real,
    #[default]
    Complex,
}

impl Field {
    fn is_complex(&self) -> bool {
        matches!(self, Field::Complex)
    }
}

/// The base field as a Banach algebra, norm = modulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScalarAlgebra {
    pub field: Field,
}

impl ScalarAlgebra {
    pub fn complex() -> Self {
        Self {
            field: Field::Complex,
        }
    }

    /// Real-restricted mode: every element has imaginary part 0.
    pub fn real() -> Self {
        Self { field: Field::Real }
    }
}

impl CoeffAlgebra for ScalarAlgebra {
    type Elem = Complex64;

    fn zero(&self) -> Complex64 {
        Complex64::new(0.0, 0.0)
    }

    fn is_zero(&self, x: &Complex64) -> bool {
        x.re == 0.0 && x.im == 0.0
    }

    fn check(&self, x: &Complex64) -> Result<()> {
        if self.field == Field::Real && x.im != 0.0 {
            return Err(WmError::InvalidElement(format!(
                "imaginary part {} in a real algebra",
                x.im
            )));
        }
        Ok(())
    }

    fn add(&self, x: &Complex64, y: &Complex64) -> Result<Complex64> {
        Ok(x + y)
    }

    fn neg(&self, x: &Complex64) -> Complex64 {
        -x
    }

    fn mul(&self, x: &Complex64, y: &Complex64) -> Result<Complex64> {
        Ok(x * y)
    }

    fn scale(&self, r: f64, x: &Complex64) -> Complex64 {
        x * r
    }

    fn norm(&self, x: &Complex64) -> Result<f64> {
        if !self.is_finite(x) {
            return Err(WmError::InvalidElement(format!("non-finite scalar {x}")));
        }
        Ok(x.norm())
    }

    fn is_finite(&self, x: &Complex64) -> bool {
        x.re.is_finite() && x.im.is_finite()
    }

    fn spec(&self) -> AlgebraSpec {
        AlgebraSpec::Scalar { field: self.field }
    }

    fn as_scalar(&self, x: &Complex64) -> Option<Complex64> {
        Some(*x)
    }

    fn from_scalar(&self, z: Complex64) -> Option<Complex64> {
        match self.field {
            Field::Real if z.im != 0.0 => None,
            _ => Some(z),
        }
    }
}

/// A dense `k x k` complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    k: usize,
    data: Vec<Complex64>,
}

impl Block {
    pub fn new(k: usize, data: Vec<Complex64>) -> Result<Self> {
        if k == 0 || data.len() != k * k {
            return Err(WmError::Shape(format!(
                "block of size {k} needs {} entries, got {}",
                k * k,
                data.len()
            )));
        }
        Ok(Self { k, data })
    }

    pub fn zeros(k: usize) -> Self {
        Self {
            k,
            data: vec![Complex64::new(0.0, 0.0); k * k],
        }
    }

    pub fn identity(k: usize) -> Self {
        let mut b = Self::zeros(k);
        for d in 0..k {
            b.data[d * k + d] = Complex64::new(1.0, 0.0);
        }
        b
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.k + col]
    }
}

/// `k x k` complex matrices with the Frobenius norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockAlgebra {
    pub k: usize,
}

impl BlockAlgebra {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(WmError::Shape("block size must be positive".into()));
        }
        Ok(Self { k })
    }

    fn same_shape(&self, x: &Block, y: &Block) -> Result<()> {
        if x.k != self.k || y.k != self.k {
            return Err(WmError::Shape(format!(
                "block sizes {} and {} in an algebra of {}x{} blocks",
                x.k, y.k, self.k, self.k
            )));
        }
        Ok(())
    }
}

impl CoeffAlgebra for BlockAlgebra {
    type Elem = Block;

    fn zero(&self) -> Block {
        Block::zeros(self.k)
    }

    fn is_zero(&self, x: &Block) -> bool {
        x.data.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    fn check(&self, x: &Block) -> Result<()> {
        if x.k != self.k {
            return Err(WmError::Shape(format!(
                "block of size {} in an algebra of {}x{} blocks",
                x.k, self.k, self.k
            )));
        }
        Ok(())
    }

    fn add(&self, x: &Block, y: &Block) -> Result<Block> {
        self.same_shape(x, y)?;
        Ok(Block {
            k: self.k,
            data: x.data.iter().zip(&y.data).map(|(a, b)| a + b).collect(),
        })
    }

    fn neg(&self, x: &Block) -> Block {
        Block {
            k: x.k,
            data: x.data.iter().map(|a| -a).collect(),
        }
    }

    fn mul(&self, x: &Block, y: &Block) -> Result<Block> {
        self.same_shape(x, y)?;
        let k = self.k;
        let mut out = vec![Complex64::new(0.0, 0.0); k * k];
        for row in 0..k {
            for col in 0..k {
                // fixed ascending inner order
                let mut acc = Complex64::new(0.0, 0.0);
                for inner in 0..k {
                    acc += x.data[row * k + inner] * y.data[inner * k + col];
                }
                out[row * k + col] = acc;
            }
        }
        Ok(Block { k, data: out })
    }

    fn scale(&self, r: f64, x: &Block) -> Block {
        Block {
            k: x.k,
            data: x.data.iter().map(|a| a * r).collect(),
        }
    }

    fn norm(&self, x: &Block) -> Result<f64> {
        if !self.is_finite(x) {
            return Err(WmError::InvalidElement("non-finite block entry".into()));
        }
        // scaled Frobenius norm, immune to underflow of tiny squares
        let largest = x.data.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if largest == 0.0 {
            return Ok(0.0);
        }
        let sum: f64 = x
            .data
            .iter()
            .map(|z| (z / largest).norm_sqr())
            .sum();
        Ok(largest * sum.sqrt())
    }

    fn is_finite(&self, x: &Block) -> bool {
        x.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    fn spec(&self) -> AlgebraSpec {
        AlgebraSpec::Block { k: self.k }
    }
}
