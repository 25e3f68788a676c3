//! JSON interchange for matrices and weight families.
//!
//! Matrix files look like
//! `{"algebra":{"kind":"scalar"},"entries":[{"i":1,"j":2,"v":[1.0,0.0]}]}`.
//! Scalars encode as `[re, im]`; blocks as a row-major array of `k*k` such
//! pairs. Indices are 1-based and each coordinate may appear once.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::algebra::{AlgebraSpec, Block, BlockAlgebra, CoeffAlgebra, ScalarAlgebra};
use crate::error::{Result, WmError};
use crate::weights::WeightFamily;
use crate::wmatrix::WeightedMatrix;

/// Encoding of single entries for an algebra instance.
pub trait EntryCodec: CoeffAlgebra {
    fn encode(&self, x: &Self::Elem) -> Value;
    fn decode(&self, v: &Value) -> Result<Self::Elem>;
}

fn encode_complex(z: &Complex64) -> Value {
    Value::Array(vec![z.re.into(), z.im.into()])
}

fn decode_complex(v: &Value) -> Result<Complex64> {
    match v {
        Value::Number(n) => n
            .as_f64()
            .map(|re| Complex64::new(re, 0.0))
            .ok_or_else(|| WmError::Format(format!("bad number {n}"))),
        Value::Array(parts) if parts.len() == 2 => {
            let re = parts[0].as_f64();
            let im = parts[1].as_f64();
            match (re, im) {
                (Some(re), Some(im)) => Ok(Complex64::new(re, im)),
                _ => Err(WmError::Format(format!("expected [re, im], got {v}"))),
            }
        }
        _ => Err(WmError::Format(format!("expected [re, im], got {v}"))),
    }
}

impl EntryCodec for ScalarAlgebra {
    fn encode(&self, x: &Complex64) -> Value {
        encode_complex(x)
    }

    fn decode(&self, v: &Value) -> Result<Complex64> {
        decode_complex(v)
    }
}

impl EntryCodec for BlockAlgebra {
    fn encode(&self, x: &Block) -> Value {
        Value::Array(x.data().iter().map(encode_complex).collect())
    }

    fn decode(&self, v: &Value) -> Result<Block> {
        let Value::Array(items) = v else {
            return Err(WmError::Format(format!(
                "block entry must be an array of {} [re, im] pairs",
                self.k * self.k
            )));
        };
        let data = items.iter().map(decode_complex).collect::<Result<Vec<_>>>()?;
        Block::new(self.k, data)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    i: usize,
    j: usize,
    v: Value,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMatrix {
    algebra: AlgebraSpec,
    entries: Vec<RawEntry>,
}

/// A matrix loaded from a file, whatever its entry algebra.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyMatrix {
    Scalar(WeightedMatrix<ScalarAlgebra>),
    Block(WeightedMatrix<BlockAlgebra>),
}

impl AnyMatrix {
    pub fn algebra_spec(&self) -> AlgebraSpec {
        match self {
            AnyMatrix::Scalar(m) => m.algebra().spec(),
            AnyMatrix::Block(m) => m.algebra().spec(),
        }
    }

    pub fn to_json(&self) -> String {
        match self {
            AnyMatrix::Scalar(m) => matrix_to_json(m),
            AnyMatrix::Block(m) => matrix_to_json(m),
        }
    }
}

impl From<WeightedMatrix<ScalarAlgebra>> for AnyMatrix {
    fn from(m: WeightedMatrix<ScalarAlgebra>) -> Self {
        AnyMatrix::Scalar(m)
    }
}

impl From<WeightedMatrix<BlockAlgebra>> for AnyMatrix {
    fn from(m: WeightedMatrix<BlockAlgebra>) -> Self {
        AnyMatrix::Block(m)
    }
}

fn json_error(e: serde_json::Error) -> WmError {
    let msg = e.to_string();
    if e.line() == 0 || msg.contains(" at line ") {
        WmError::Format(msg)
    } else {
        WmError::Format(format!("{msg} at line {} column {}", e.line(), e.column()))
    }
}

fn build<A: EntryCodec>(algebra: A, entries: Vec<RawEntry>) -> Result<WeightedMatrix<A>> {
    let decoded = entries
        .into_iter()
        .enumerate()
        .map(|(idx, e)| {
            let v = algebra
                .decode(&e.v)
                .map_err(|err| WmError::Format(format!("entry #{idx} ({},{}): {err}", e.i, e.j)))?;
            Ok(((e.i, e.j), v))
        })
        .collect::<Result<Vec<_>>>()?;
    WeightedMatrix::from_entries(algebra, decoded)
}

/// Parses a matrix file.
pub fn parse_matrix(text: &str) -> Result<AnyMatrix> {
    let raw: RawMatrix = serde_json::from_str(text).map_err(json_error)?;
    match raw.algebra {
        AlgebraSpec::Scalar { field } => {
            build(ScalarAlgebra { field }, raw.entries).map(AnyMatrix::Scalar)
        }
        AlgebraSpec::Block { k } => build(BlockAlgebra::new(k)?, raw.entries).map(AnyMatrix::Block),
    }
}

/// Serializes a matrix, entries in row-major order.
pub fn matrix_to_json<A: EntryCodec>(m: &WeightedMatrix<A>) -> String {
    let raw = RawMatrix {
        algebra: m.algebra().spec(),
        entries: m
            .iter()
            .map(|((i, j), v)| RawEntry {
                i,
                j,
                v: m.algebra().encode(v),
            })
            .collect(),
    };
    serde_json::to_string(&raw).expect("matrix values are finite")
}

/// Parses `{"weights":[...],"summable":idx}`.
pub fn parse_family(text: &str) -> Result<WeightFamily> {
    serde_json::from_str(text).map_err(|e| {
        // validation failures surface through serde as custom messages
        json_error(e)
    })
}

pub fn family_to_json(family: &WeightFamily) -> String {
    serde_json::to_string(family).expect("weight families serialize")
}
