//! Monotone heat-flow quantities for sharp Fourier extension and Strichartz
//! inequalities, with the spectral machinery and independent oracles needed to
//! evaluate and check them.

pub mod corpus;
pub mod error;
mod fft;
pub mod flows;
pub mod kinetic;
pub mod multilinear;
pub mod norms;
pub mod oracles;
pub mod pdeflow;
pub mod quadrature;
pub mod spectral;
pub mod steintomas;
pub mod suite;

pub use error::{Error, Result};
