//! Exact and numerical ingredients of meromorphic R-matrices for affine Yangians.

pub mod cartan;
pub mod cato;
pub mod error;
pub mod exact;
pub mod laurent;
pub mod linalg;
pub mod qcartan;
pub mod resum;
pub mod rminus;
pub mod series;

pub use cartan::{build_cartan, AffineCartanDatum, AffineTypeId};
pub use error::{Error, Result};
pub use laurent::{quantum_integer, LaurentMatrix, LaurentPoly, Q};
pub use qcartan::{analyze, build_b, QCartanReport};
