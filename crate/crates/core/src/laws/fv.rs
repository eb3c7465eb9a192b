//! Exact sampling of one Fleming–Viot branching step.
//!
//! Two Brownian particles start at 1. The first to hit 0 dies; at that
//! moment `T₁` the survivor sits at `Y₁` and branches. Both hitting times are
//! drawn exactly as `1/Z²`, and the survivor position is drawn from the
//! killed transition density at time `T₁`. Resampling the survivor's
//! position given only `{τ_survivor > T₁}` is exact because its own hitting
//! time is never used again.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::quadrature::{integrate, QuadOptions};

/// One draw of `(Y₁, T₁)` with the derived coefficients
/// `A = Y₁^{-2}` and `B = T₁ Y₁^{-2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FvStepSample {
    pub y1: f64,
    pub t1: f64,
    pub a: f64,
    pub b: f64,
}

impl FvStepSample {
    pub fn from_parts(y1: f64, t1: f64) -> Self {
        let a = 1.0 / (y1 * y1);
        Self { y1, t1, a, b: t1 * a }
    }
}

/// A survivor position together with the number of proposals it took.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivorDraw {
    pub y: f64,
    pub attempts: u32,
}

/// First passage time from 1 to 0 for a given standard normal value.
#[inline]
pub fn first_passage_from_normal(z: f64) -> f64 {
    1.0 / (z * z)
}

/// Brownian first passage time from 1 to 0, distributed as `1/Z²`.
#[inline]
pub fn sample_first_passage<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z != 0.0 {
            return first_passage_from_normal(z);
        }
    }
}

/// Position at time `t` of a Brownian motion started at 1 and conditioned
/// not to have hit 0 by time `t`.
///
/// The killed density is `φ_t(y-1) - φ_t(y+1)` on `(0, ∞)`. Since
/// `(1+y)² - (1-y)² = 4y`, it factors as `φ_t(y-1) · (1 - e^{-2y/t})`: propose
/// from `N(1, t)`, reject `y <= 0`, accept with probability `1 - e^{-2y/t}`.
/// The overall acceptance rate is `P(τ > t) = 2Φ(1/√t) - 1`.
#[inline]
pub fn sample_survivor_position<R: Rng + ?Sized>(t: f64, rng: &mut R) -> SurvivorDraw {
    debug_assert!(t > 0.0);
    let sd = t.sqrt();
    let mut attempts = 0u32;
    loop {
        attempts = attempts.saturating_add(1);
        let z: f64 = rng.sample(StandardNormal);
        let y = 1.0 + sd * z;
        if y <= 0.0 {
            continue;
        }
        // x/(1+x) <= 1 - e^{-x} <= x decides most proposals without exp
        let x = 2.0 * y / t;
        let u: f64 = rng.random();
        if u * (1.0 + x) < x || (u < x && u < -(-x).exp_m1()) {
            return SurvivorDraw { y, attempts };
        }
    }
}

/// Exact draw of `(Y₁, T₁)`.
#[inline]
pub fn sample_fv_step<R: Rng + ?Sized>(rng: &mut R) -> FvStepSample {
    let tau1 = sample_first_passage(rng);
    let tau2 = sample_first_passage(rng);
    let t1 = tau1.min(tau2);
    let y1 = sample_survivor_position(t1, rng).y;
    FvStepSample::from_parts(y1, t1)
}

/// Joint density of `(Y₁, T₁)`.
pub fn joint_density_yt(y: f64, t: f64) -> f64 {
    if y <= 0.0 || t <= 0.0 {
        return 0.0;
    }
    let k1 = (1.0 - y).powi(2) + 1.0;
    let k2 = (1.0 + y).powi(2) + 1.0;
    ((-k1 / (2.0 * t)).exp() - (-k2 / (2.0 * t)).exp()) / (PI * t * t)
}

/// Joint density of `(A, B) = (Y₁^{-2}, T₁Y₁^{-2})`.
pub fn joint_density_ab(a: f64, b: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        return 0.0;
    }
    let r = a.sqrt();
    let k1 = (r - 0.5).powi(2) + 0.25;
    let k2 = (r + 0.5).powi(2) + 0.25;
    ((-k1 / b).exp() - (-k2 / b).exp()) / (2.0 * PI * b * b * r)
}

/// Marginal density of `Y₁` (the `t`-integral of the joint density).
pub fn marginal_density_y(y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    2.0 / PI * (1.0 / ((1.0 - y).powi(2) + 1.0) - 1.0 / ((1.0 + y).powi(2) + 1.0))
}

/// Marginal density of `A`: `4 / (π (4a² + 1))`.
pub fn marginal_density_a(a: f64) -> f64 {
    if a <= 0.0 {
        0.0
    } else {
        4.0 / (PI * (4.0 * a * a + 1.0))
    }
}

/// Marginal CDF of `A`: `(2/π) arctan(2a)`.
pub fn marginal_cdf_a(a: f64) -> f64 {
    if a <= 0.0 {
        0.0
    } else {
        2.0 / PI * (2.0 * a).atan()
    }
}

/// `P(εAy + B < ε)` for the Fleming–Viot coefficients, by one-dimensional
/// quadrature after integrating out `b` and substituting `a = u²`.
pub fn prob_scaled_event(eps: f64, y: f64) -> Result<f64> {
    let upper = if y > 0.0 { 1.0 / y.sqrt() } else { f64::INFINITY };
    let integrand = |u: f64| {
        let d = eps * (1.0 - u * u * y);
        if d <= 0.0 {
            return 0.0;
        }
        let k1 = (u - 0.5).powi(2) + 0.25;
        let k2 = (u + 0.5).powi(2) + 0.25;
        ((-k1 / d).exp() / k1 - (-k2 / d).exp() / k2) / PI
    };
    let opts = QuadOptions::rel(1e-11);
    let r = if upper.is_finite() {
        integrate(integrand, 0.0, upper, opts)?
    } else {
        crate::quadrature::integrate_to_infinity(integrand, 0.0, opts)?
    };
    Ok(r.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::single;
    use approx::assert_relative_eq;

    #[test]
    fn forced_normal_gives_quarter() {
        assert_eq!(first_passage_from_normal(2.0), 0.25);
        assert_eq!(first_passage_from_normal(-2.0), 0.25);
    }

    #[test]
    fn coefficient_identities_are_exact() {
        let mut rng = single(11);
        for _ in 0..1000 {
            let s = sample_fv_step(&mut rng);
            assert!(s.y1 > 0.0 && s.t1 > 0.0 && s.a > 0.0 && s.b > 0.0);
            assert_eq!(s.a, 1.0 / (s.y1 * s.y1));
            assert_eq!(s.b, s.t1 * s.a);
        }
    }

    #[test]
    fn survivor_barely_moves_for_tiny_t() {
        let mut rng = single(5);
        let n = 100_000;
        let mean = (0..n).map(|_| sample_survivor_position(1e-6, &mut rng).y).sum::<f64>() / n as f64;
        assert!((0.999..=1.001).contains(&mean), "{mean}");
    }

    #[test]
    fn densities_are_normalized() {
        let opts = QuadOptions::rel(1e-10);
        let my = crate::quadrature::integrate_to_infinity(marginal_density_y, 0.0, opts).unwrap();
        assert_relative_eq!(my.value, 1.0, max_relative = 1e-9);
        let ma = crate::quadrature::integrate_to_infinity(marginal_density_a, 0.0, opts).unwrap();
        assert_relative_eq!(ma.value, 1.0, max_relative = 1e-9);
        assert_relative_eq!(marginal_cdf_a(0.5), 0.5, max_relative = 1e-15);
        // total mass through the scaled-event formula with a huge ε
        assert_relative_eq!(prob_scaled_event(1e7, 0.0).unwrap(), 1.0, max_relative = 1e-6);
    }

    #[test]
    fn density_change_of_variables() {
        // f_AB(a, b) = f_YT(y, t) |∂(y,t)/∂(a,b)| with y = a^{-1/2}, t = b/a
        for &(a, b) in &[(0.3, 0.7), (1.2, 2.5), (4.0, 0.2)] {
            let y = 1.0 / f64::sqrt(a);
            let t = b / a;
            let jac = 0.5 * a.powf(-1.5) / a;
            assert_relative_eq!(joint_density_ab(a, b), joint_density_yt(y, t) * jac, max_relative = 1e-12);
        }
    }
}
