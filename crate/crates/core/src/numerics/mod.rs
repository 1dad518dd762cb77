//! Numerical substrate: quadrature rules, stable reductions, small dense
//! linear algebra, and reproducible random numbers.
//!
//! Everything in this module is deterministic. The random source is
//! counter-based, so equal `(seed, stream)` pairs reproduce bitwise-identical
//! sequences on every platform, and per-index substreams can be consumed in
//! any order.

mod linalg;
mod quad;
mod rng;
mod stable;
pub(crate) mod vecs;

pub use linalg::{Cholesky, Matrix};
pub use quad::{QuadratureKind, QuadratureRule};
pub use rng::{standard_normal, RandomSource};
pub use stable::{central_difference_gradient, erfc, logsumexp, normal_tail};
