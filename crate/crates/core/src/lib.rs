//! # krontrace
//!
//! Matrix-free trace estimation for matrices that can only be accessed
//! through Kronecker-structured matrix-vector products: for a query
//! `x = x_1 ⊗ ⋯ ⊗ x_k` with factors of length `d`, the oracle returns `A·x`
//! and charges exactly one query.
//!
//! The library provides:
//!
//! - the oracle abstraction ([`KronOperator`]) over several matrix
//!   representations, with exact query accounting;
//! - partial trace, partial transpose, averaged partial transposes, and
//!   post-measurement reduced density matrices on explicit matrices
//!   ([`subsystems`]);
//! - the Kronecker-Hutchinson trace estimator in four flavors (real/complex ×
//!   Rademacher/Gaussian), exact trace recovery for rank-one and
//!   Kronecker-structured operators, and a complex-via-real query simulator
//!   ([`estimators`]);
//! - exact variance formulas built from partial traces of the averaged
//!   partial transposes, closed-form bounds and sample-size calculators, and
//!   an independent brute-force fourth-moment oracle that verifies them at
//!   desk scale ([`variance`]).
//!
//! Everything is sized for desk-scale verification: the total dimension
//! `D = d^k` is capped (4096 by default) so dense `D × D` intermediates stay
//! tractable, and all randomized paths are reproducible bit-for-bit from a
//! `(base_seed, stream_id)` pair.
//!
//! ```
//! use krontrace::estimators::{exact_kron_recovery, kron_hutchinson};
//! use krontrace::variance::{exact_variance, required_samples};
//! use krontrace::{Dims, KronOperator, QueryDistribution, RngStream, ScalarField};
//!
//! // A = W₁ ⊗ W₂ with seeded Wishart factors, probed only through the oracle.
//! let dims = Dims::new(2, 2)?;
//! let op = KronOperator::wishart(dims, 7);
//!
//! let estimate = kron_hutchinson(
//!     &op,
//!     QueryDistribution::RealGaussian,
//!     512,
//!     &RngStream::new(42, 0),
//!     false,
//! )?;
//! assert_eq!(op.query_count(), 512);
//!
//! // The same trace, recovered exactly from kd + 1 = 5 queries.
//! let recovered = exact_kron_recovery(&op.clone(), &RngStream::new(43, 0))?;
//! assert_eq!(recovered.queries_used, 5);
//! let trace = recovered.trace();
//! assert!((estimate.value - trace).abs() < trace);
//!
//! // How many samples the estimator needs for 10% accuracy, from the
//! // exact variance of a single quadratic form.
//! let matrix = op.materialize()?;
//! let variance = exact_variance(&matrix, &dims, ScalarField::Real)?;
//! let needed = required_samples(variance, trace, 0.1)?;
//! assert!(needed > 0);
//! # Ok::<(), krontrace::Error>(())
//! ```

pub mod dense;
pub mod dims;
pub mod error;
pub mod estimators;
pub mod field;
pub mod files;
pub mod linalg;
pub mod operator;
pub mod query;
pub mod sampling;
pub mod subsystems;
pub mod variance;

pub use dense::DenseMatrix;
pub use dims::{Dims, DEFAULT_TOTAL_DIM_CAP};
pub use error::{Error, Result};
pub use field::ScalarField;
pub use operator::{mixed_product, KronOperator, OperatorKind};
pub use query::KronQueryVector;
pub use sampling::{sample_query, QueryDistribution, RngStream};
pub use subsystems::{
    average_partial_transposes, partial_trace, partial_transpose, pmrdm, PmrdmPrefix, SubsystemSet,
};
