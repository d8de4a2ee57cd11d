//! Finite relational structures under a sparse random measure.
//!
//! The crate is organised bottom-up:
//!
//! * [`structure`] and [`embed`]: symmetric irreflexive hypergraph structures,
//!   induced substructures and backtracking embedding search.
//! * [`dimension`]: the dimension function `δ(A) = |A| − Σ αᵢ·wᵢ(A)` kept as an
//!   exact integer linear form in the weights.
//! * [`extcalc`]: strong/intrinsic/primitive extensions, closures and copy counts.
//! * [`sampler`]: the product measure `P_n` with edge probability `γᵢ·n^{−αᵢ}`.
//! * [`amalgam`]: free joins, full amalgamation and a generic-chain builder.
//! * [`harness`]: seeded Monte Carlo experiments with log-log slope fits.
//!
//! Numeric code is written against the [`Scalar`] trait so the same routines
//! evaluate in `f32`, `f64` or exact rationals.

pub mod amalgam;
pub mod dimension;
pub mod embed;
mod error;
pub mod extcalc;
mod flow;
pub mod harness;
pub mod sampler;
pub mod scalar;
pub mod structure;

pub use dimension::{DimForm, Sign};
pub use embed::{Embedding, EmbeddingMode, EmbeddingSearch};
pub use error::{Error, Result};
pub use extcalc::ExtensionPattern;
pub use scalar::Scalar;
pub use structure::{FiniteStructure, Relation, Signature, Vertex, Weight};

/// Default floating point scalar.
pub type Real = f64;
/// Single precision scalar.
pub type Real32 = f32;
/// Exact rational scalar, used wherever a tie must be decided exactly.
pub type Exact = num_rational::BigRational;
