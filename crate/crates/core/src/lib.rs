//! Link-level simulation of learned joint source-channel coding over
//! flat-fading MIMO channels, with classical front-ends and a
//! separation-based reference.

pub mod baseline;
pub mod channel;
pub mod error;
pub mod frontend;
pub mod harness;
pub mod jscc;
pub mod linalg;

pub use error::{Error, Result};
