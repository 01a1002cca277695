//! Complex-matrix primitives and seeded sampling for the `M ≤ 8` antenna
//! regime.

mod matrix;
mod rng;
mod svd;

pub use matrix::{frobenius_norm_sq, ComplexMatrix};
pub use num_complex::Complex64;
pub use rng::{sample_complex_gaussian, RngStream};
pub(crate) use rng::splitmix64;
pub use svd::{complex_svd, pseudo_inverse_diag, SvdFactors, MAX_SVD_DIM};
