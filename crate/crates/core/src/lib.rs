//! Weighted matrix algebras over Banach-algebra coefficients.
//!
//! Matrices are finitely supported on `N x N` (1-indexed) with entries from a
//! [`CoeffAlgebra`]. For a family of weights containing some `g` with
//! `C_g = sum 1/g(n) < infinity`, the crate provides
//!
//! - the weighted norms `||T||_f = max f(max(i, j)) ||t_ij||`,
//! - the product estimate `||RS||_f <= C_g max(||R||_f ||S||_g, ||R||_g ||S||_f)`,
//! - Neumann-series quasi-inversion on the ball `C_g ||T||_g < 1` with a
//!   certified truncation error, plus a dense oracle for scalar entries,
//! - the submultiplicative renorming `h = C_f f`.

pub mod algebra;
pub mod error;
pub mod io;
pub mod quasi;
pub mod sample;
pub mod weights;
pub mod wmatrix;

pub use algebra::{AlgebraSpec, Block, BlockAlgebra, CoeffAlgebra, Field, ScalarAlgebra};
pub use error::{Result, WmError};
pub use io::{AnyMatrix, EntryCodec};
pub use quasi::{
    continuity_probe, contraction_factor, is_quasi_inverse_pair, probe_decays,
    quasi_inverse_exact, quasi_inverse_neumann, QuasiInverseCertificate, Residual,
};
pub use weights::{
    certify_default, certify_series_bound, sum_weights, CertifiedSeriesBound, Weight,
    WeightFamily, WeightKind,
};
pub use wmatrix::{
    power_norm_bound, product_bound, renorm_submultiplicative, NormReport, NormValue,
    WeightedMatrix,
};

pub use num_complex::Complex64;

/// Crate version, embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
