//! Bernstein-type deviation bounds for sums of geometrically β-mixing
//! self-adjoint random matrices, together with the machinery needed to
//! evaluate and stress-test them: symmetric spectral kernels, Cantor-like
//! blocking, exact β-coefficients of finite Markov chains, chain-driven
//! matrix models and a seeded Monte-Carlo harness.

pub mod bounds;
pub mod cantor;
pub mod error;
pub mod mc;
pub mod mixing;
pub mod models;
pub mod spectral;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use spectral::SymMatrix;
