//! Left tails of perpetuities `X = AX + B` with nonnegative coefficients.
//!
//! The crate covers the local dependence measure `g` of a coefficient law,
//! its Legendre-type transform `φ_ρ` and fixed point `λ*`, Monte Carlo for
//! the perpetuity chain (left tails, lower envelope, Kesten–Goldie slope)
//! and an exact sampler for the two-particle Fleming–Viot step.

pub mod error;
pub mod flemingviot;
pub mod ldm;
pub mod laws;
pub mod minimize;
pub mod par;
pub mod perpetuity;
pub mod quadrature;
pub mod rng;
pub mod special;
pub mod stats;
pub mod tail_scale;
pub mod transform;

pub use error::{Error, Result};
pub use tail_scale::TailScale;
