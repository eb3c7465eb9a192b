//! A coefficient law whose local dependence measure jumps at zero.
//!
//! `A = V/U`, `B = U` with `P(V < v) = e^{-1/v}` and, conditionally on `V`,
//! `U` on `(0, 1]` with density proportional to `e^{-λ₁/u}` when `V < 1`
//! and to `e^{-λ₂/u}` when `V >= 1`. Then `g(0) = λ₂` while
//! `g(0⁺) = λ₁ > λ₂`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadOptions};
use crate::special::ln_integral_exp_inv;

const TABLE_POINTS: usize = 10_000;

/// Inverse-CDF sampler for the density `∝ e^{-λ/u}` on `(0, 1]`.
///
/// `ln F(u) = ln ∫_0^u e^{-λ/s} ds` is tabulated on a uniform grid and
/// inverted by linear interpolation in `ln F`, then polished with one
/// Newton step that is kept inside the bracketing cell.
#[derive(Debug, Clone)]
pub struct InverseExpSampler {
    lambda: f64,
    ln_total: f64,
    step: f64,
    ln_cdf: Vec<f64>,
}

impl InverseExpSampler {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::param(format!("lambda must be positive, got {lambda}")));
        }
        let step = 1.0 / TABLE_POINTS as f64;
        let ln_cdf: Vec<f64> = (0..=TABLE_POINTS)
            .map(|i| if i == 0 { f64::NEG_INFINITY } else { ln_integral_exp_inv(lambda, i as f64 * step) })
            .collect();
        let ln_total = ln_cdf[TABLE_POINTS];
        Ok(Self { lambda, ln_total, step, ln_cdf })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `ln ∫_0^1 e^{-λ/u} du`; the normalizing constant is its negative
    /// exponential.
    pub fn ln_total(&self) -> f64 {
        self.ln_total
    }

    /// Exact `ln P(U <= u)`.
    pub fn ln_cdf(&self, u: f64) -> f64 {
        if u <= 0.0 {
            f64::NEG_INFINITY
        } else if u >= 1.0 {
            0.0
        } else {
            ln_integral_exp_inv(self.lambda, u) - self.ln_total
        }
    }

    /// Inverts `ln F(u) = target` (unnormalized log scale).
    pub fn quantile_ln(&self, target: f64) -> f64 {
        if target >= self.ln_total {
            return 1.0;
        }
        // first index whose value exceeds the target
        let j = self.ln_cdf.partition_point(|&v| v <= target);
        let (lo, hi) = if j <= 1 {
            (0.0, self.step)
        } else {
            ((j - 1) as f64 * self.step, j as f64 * self.step)
        };
        if j <= 1 {
            return self.bisect(target, lo, hi);
        }
        let (f_lo, f_hi) = (self.ln_cdf[j - 1], self.ln_cdf[j]);
        let mut u = lo + (target - f_lo) / (f_hi - f_lo) * self.step;
        // Newton on ln F(u) - target; d/du ln F = e^{-λ/u} / F(u)
        let ln_f = ln_integral_exp_inv(self.lambda, u);
        let slope = (-self.lambda / u - ln_f).exp();
        let next = u - (ln_f - target) / slope;
        if next > lo && next < hi && next.is_finite() {
            u = next;
        } else if ln_f > target {
            u = 0.5 * (lo + u);
        } else {
            u = 0.5 * (u + hi);
        }
        u
    }

    fn bisect(&self, target: f64, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if ln_integral_exp_inv(self.lambda, mid) <= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let w: f64 = rng.random();
            if w > 0.0 {
                return self.quantile_ln(w.ln() + self.ln_total);
            }
        }
    }
}

/// The law of `(A, B) = (V/U, U)` described in the module docs.
#[derive(Debug, Clone)]
pub struct DiscontinuousLaw {
    lambda1: f64,
    lambda2: f64,
    u_small_v: InverseExpSampler,
    u_large_v: InverseExpSampler,
}

impl DiscontinuousLaw {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self> {
        if !(lambda2 > 0.0 && lambda1 > lambda2 && lambda1.is_finite()) {
            return Err(Error::param(format!(
                "discontinuous law needs lambda1 > lambda2 > 0, got ({lambda1}, {lambda2})"
            )));
        }
        Ok(Self {
            lambda1,
            lambda2,
            u_small_v: InverseExpSampler::new(lambda1)?,
            u_large_v: InverseExpSampler::new(lambda2)?,
        })
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    /// Normalizing constants `(c₁, c₂)` of the joint density.
    pub fn normalizers(&self) -> (f64, f64) {
        ((-self.u_small_v.ln_total()).exp(), (-self.u_large_v.ln_total()).exp())
    }

    /// Draws `(V, U)`. `V` comes from its Fréchet law by inversion; the
    /// branch `V < 1` (weight `e^{-1}`) selects the `λ₁` sampler for `U`.
    #[inline]
    pub fn sample_vu<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let v = loop {
            let w: f64 = rng.random();
            if w > 0.0 {
                break -1.0 / w.ln();
            }
        };
        let u = if v < 1.0 { self.u_small_v.sample(rng) } else { self.u_large_v.sample(rng) };
        (v, u)
    }

    /// Draws `(A, B)`.
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let (v, u) = self.sample_vu(rng);
        (v / u, u)
    }

    /// Exact `P(εAy + B < ε)` by quadrature over `u ∈ (0, ε)`.
    pub fn prob_scaled_event(&self, eps: f64, y: f64) -> Result<f64> {
        let (c1, c2) = self.normalizers();
        let e1 = (-1.0f64).exp();
        if y == 0.0 {
            let e = eps.min(1.0);
            let p = c1 * e1 * ln_integral_exp_inv(self.lambda1, e).exp()
                + c2 * (1.0 - e1) * ln_integral_exp_inv(self.lambda2, e).exp();
            return Ok(p);
        }
        let top = eps.min(1.0);
        let (l1, l2) = (self.lambda1, self.lambda2);
        let f = |u: f64| {
            if u <= 0.0 || u >= eps {
                return 0.0;
            }
            let v = u * (eps - u) / (eps * y);
            let ev = (-1.0 / v).exp();
            c1 * (-l1 / u).exp() * ev.min(e1) + c2 * (-l2 / u).exp() * (ev - e1).max(0.0)
        };
        Ok(integrate(f, 0.0, top, QuadOptions::rel(1e-11))?.value)
    }
}
