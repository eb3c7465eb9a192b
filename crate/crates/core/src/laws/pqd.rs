//! Synthetic positively quadrant dependent coefficients.
//!
//! `A` is uniform on `[a, a + w]` and independent of `B`, and independence
//! is the simplest PQD structure. `B = H^{-1}(E/γ)` with `E ~ Exp(1)` and
//! `H(x) = x^{-ρ}`, so `P(B < x) = exp(-γ H(x))` holds for every `x > 0`.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::{Coefficients, LawMetadata};
use crate::error::{Error, Result};
use crate::ldm::LdmFunction;
use crate::tail_scale::TailScale;

#[derive(Debug, Clone, PartialEq)]
pub struct PqdLaw {
    gamma: f64,
    a: f64,
    width: f64,
    rho: f64,
    b_const: Option<f64>,
}

impl PqdLaw {
    pub fn new(gamma: f64, a: f64, width: f64, rho: f64, b_const: Option<f64>) -> Result<Self> {
        if !(a.is_finite() && a >= 0.0) {
            return Err(Error::param(format!("a must be finite and nonnegative, got {a}")));
        }
        if !(width.is_finite() && width >= 0.0) {
            return Err(Error::param(format!("width must be finite and nonnegative, got {width}")));
        }
        match b_const {
            Some(b) if !(b.is_finite() && b >= 0.0) => {
                return Err(Error::param(format!("constant b must be finite and nonnegative, got {b}")));
            }
            Some(_) => {}
            None => {
                if !(gamma.is_finite() && gamma > 0.0) {
                    return Err(Error::param(format!("gamma must be positive, got {gamma}")));
                }
                TailScale::power(rho, 1.0)?;
            }
        }
        Ok(Self { gamma, a, width, rho, b_const })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// The scale `H(x) = x^{-ρ}` in which `B` has exponent `γ`.
    pub fn tail_scale(&self) -> TailScale {
        TailScale { rho: self.rho, beta: 0.0, scale: 1.0 }
    }

    /// `P(B < x)`.
    pub fn cdf_b(&self, x: f64) -> f64 {
        match self.b_const {
            Some(b) => f64::from(u8::from(b < x)),
            None if x <= 0.0 => 0.0,
            None => (-self.gamma * x.powf(-self.rho)).exp(),
        }
    }

    pub fn metadata(&self) -> LawMetadata {
        LawMetadata {
            ess_inf_a: Some(self.a),
            closed_form_ldm: self.b_const.is_none().then_some(LdmFunction::PqdClosedForm {
                gamma: self.gamma,
                a: self.a,
                rho: self.rho,
            }),
            has_density: self.b_const.is_none() && self.width > 0.0,
        }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Coefficients {
        let a = if self.width > 0.0 { self.a + self.width * rng.random::<f64>() } else { self.a };
        let b = match self.b_const {
            Some(b) => b,
            None => {
                let e: f64 = Exp1.sample(rng);
                // H(b) = e/γ with H(x) = x^{-ρ}
                (self.gamma / e).powf(1.0 / self.rho)
            }
        };
        Coefficients { a, b }
    }
}
