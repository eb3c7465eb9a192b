//! The regularly varying scale `H` used to normalize left-tail exponents.
//!
//! The family is `H(x) = c · x^{-ρ} · (ln(e + 1/x))^β`, regularly varying
//! with index `-ρ` at zero. It is finite, positive, continuous and strictly
//! decreasing on all of `(0, ∞)`; only `(0, 1]` is the asymptotic regime.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper end of the range in which `H` is used as a small-`x` scale.
pub const ASYMPTOTIC_X_MAX: f64 = 1.0;

fn default_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailScale {
    pub rho: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default = "default_scale")]
    pub scale: f64,
}

impl Default for TailScale {
    fn default() -> Self {
        Self::h1()
    }
}

impl TailScale {
    pub fn new(rho: f64, beta: f64, scale: f64) -> Result<Self> {
        let s = Self { rho, beta, scale };
        s.validate()?;
        Ok(s)
    }

    /// `H₁(x) = 1/x`.
    pub const fn h1() -> Self {
        Self { rho: 1.0, beta: 0.0, scale: 1.0 }
    }

    /// Pure power `c · x^{-ρ}`.
    pub fn power(rho: f64, scale: f64) -> Result<Self> {
        Self::new(rho, 0.0, scale)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(Error::param(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::param(format!("beta must be nonnegative, got {}", self.beta)));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::param(format!("scale must be positive, got {}", self.scale)));
        }
        Ok(())
    }

    /// `ln H(x)` for `x > 0`; never overflows.
    #[inline]
    pub fn ln_h(&self, x: f64) -> f64 {
        let lx = x.ln();
        let mut v = self.scale.ln() - self.rho * lx;
        if self.beta != 0.0 {
            // ln(e + 1/x) = ln(1 + e·x) - ln x
            let inner = (std::f64::consts::E * x).ln_1p() - lx;
            v += self.beta * inner.ln();
        }
        v
    }

    /// `H(x)`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(x.is_finite() && x > 0.0) {
            return Err(Error::Domain { what: "H", value: x });
        }
        Ok(self.eval_unchecked(x))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: f64) -> f64 {
        if self.beta == 0.0 {
            self.scale * x.powf(-self.rho)
        } else {
            self.ln_h(x).exp()
        }
    }

    /// `H^{-1}(u)`: analytic for `β = 0`, bisection in `ln x` otherwise.
    pub fn inverse(&self, u: f64) -> Result<f64> {
        if !(u.is_finite() && u > 0.0) {
            return Err(Error::Range { what: "H^-1", value: u });
        }
        let target = u.ln();
        let x = if self.beta == 0.0 {
            (-(target - self.scale.ln()) / self.rho).exp()
        } else {
            self.bisect_ln(target)?
        };
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::Range { what: "H^-1", value: u });
        }
        Ok(x)
    }

    fn bisect_ln(&self, target: f64) -> Result<f64> {
        // bracket [1e-300, 1] in ln x, widened geometrically when needed
        let mut lo = (1e-300f64).ln();
        let mut hi = 0.0_f64;
        let mut step = 1.0;
        while self.ln_h(hi.exp()) > target {
            lo = hi;
            hi += step;
            step *= 2.0;
            if hi > 700.0 {
                return Err(Error::Range { what: "H^-1", value: target.exp() });
            }
        }
        step = 1.0;
        while self.ln_h(lo.exp()) < target {
            hi = lo;
            lo -= step;
            step *= 2.0;
            if lo < -744.0 {
                return Err(Error::Range { what: "H^-1", value: target.exp() });
            }
        }
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let v = self.ln_h(mid.exp());
            if (v - target).abs() <= 1e-13 * target.abs().max(1.0) {
                return Ok(mid.exp());
            }
            if v > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((0.5 * (lo + hi)).exp())
    }

    /// `H^{-1}(ln n)`, the lower-envelope normalizer.
    pub fn envelope_normalizer(&self, n: u64) -> Result<f64> {
        if n < 3 {
            return Err(Error::Domain { what: "envelope normalizer (n >= 3)", value: n as f64 });
        }
        self.inverse((n as f64).ln())
    }

    /// `H(xy)/H(x)`, which tends to `y^{-ρ}` as `x → 0⁺`.
    pub fn variation_ratio(&self, x: f64, y: f64) -> f64 {
        (self.ln_h(x * y) - self.ln_h(x)).exp()
    }

    /// Whether `x` lies in the small-argument regime `(0, 1]`.
    pub fn is_asymptotic(&self, x: f64) -> bool {
        x > 0.0 && x <= ASYMPTOTIC_X_MAX
    }
}
