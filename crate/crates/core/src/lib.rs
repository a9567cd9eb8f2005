//! Simulation and statistical verification of random-coefficient INAR(1)
//! processes
//!
//! ```text
//! X_n = phi_n ∘ X_{n-1} + Z_n
//! ```
//!
//! driven by i.i.d. thinning coefficients `phi_n` and i.i.d. (possibly
//! heavy-tailed) immigration counts `Z_n`.

pub mod cli;
pub mod distributions;
pub mod engine;
pub mod error;
pub mod genealogy;
pub mod limitlab;
pub mod rng;

pub use error::{Error, Result};
pub use rng::{RngStream, StreamSource};
