//! The transform `φ_ρ(λ) = inf_{y>0} {g(y) + λ/y^ρ}`, the constant
//! `λ* = inf_{y>1} y^ρ g(y)/(y^ρ - 1)` and the iteration `λ_{n+1} = φ_ρ(λ_n)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ldm::LdmFunction;
use crate::minimize::{Argmin, ScanSolver};

/// Where an infimum over `y` was found.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Minimizer {
    At(f64),
    /// Only approached as `y → ∞`.
    Infinity,
    /// Only approached as `y → 0⁺` (or `y → 1⁺` for `λ*`).
    LowerEnd,
    /// The objective is `+∞` everywhere.
    Nowhere,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InfPoint {
    pub value: f64,
    pub minimizer: Minimizer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformContext {
    pub g: LdmFunction,
    pub rho: f64,
    pub solver: ScanSolver,
}

/// Result of `λ_{n+1} = φ(λ_n)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointTrace {
    pub lambdas: Vec<f64>,
    pub converged: bool,
    pub limit: f64,
    /// Whether the start lies in `[0, λ*]`, where the trace must be monotone.
    pub guaranteed: bool,
    pub nondecreasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyReport {
    /// `(λ, φ(λ))` on the grid.
    pub rows: Vec<(f64, f64)>,
    pub lambda_star: f64,
    /// Grid pairs where `φ` decreases.
    pub monotonicity_violations: Vec<(f64, f64)>,
    /// Pairs violating midpoint concavity.
    pub concavity_violations: Vec<(f64, f64)>,
    /// Grid points where `φ(c) >= c` disagrees with `c <= λ*`.
    pub sign_violations: Vec<f64>,
    pub phi_at_zero: f64,
    pub g_at_zero_plus: f64,
    /// First sign change of `φ(c) - c`, refined by bisection.
    pub crossing: Option<f64>,
}

impl PropertyReport {
    pub fn phi_at_zero_ok(&self) -> bool {
        (self.phi_at_zero - self.g_at_zero_plus).abs() <= 1e-9 * (1.0 + self.g_at_zero_plus.abs())
            || (self.phi_at_zero.is_infinite() && self.g_at_zero_plus.is_infinite())
    }

    pub fn passed(&self) -> bool {
        self.monotonicity_violations.is_empty()
            && self.concavity_violations.is_empty()
            && self.sign_violations.is_empty()
            && self.phi_at_zero_ok()
    }
}

const SIGN_TOL: f64 = 1e-9;

impl TransformContext {
    pub fn new(g: LdmFunction, rho: f64) -> Result<Self> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::param(format!("rho must be positive, got {rho}")));
        }
        Ok(Self { g, rho, solver: ScanSolver::default() })
    }

    pub fn with_solver(mut self, solver: ScanSolver) -> Self {
        self.solver = solver;
        self
    }

    /// `φ_ρ(λ)` with the location of the infimum, searched over
    /// `u = 1/(1 + y) ∈ (0, 1)`.
    pub fn phi_point(&self, lambda: f64) -> InfPoint {
        if !(lambda >= 0.0) {
            return InfPoint { value: f64::NAN, minimizer: Minimizer::Nowhere };
        }
        let rho = self.rho;
        let obj = |u: f64| {
            let y = (1.0 - u) / u;
            let g = self.g.eval(y);
            if lambda == 0.0 {
                g
            } else {
                g + lambda / y.powf(rho)
            }
        };
        let at_inf = self.g.at_infinity();
        let at_zero = if lambda == 0.0 { self.g.at_zero_plus() } else { f64::INFINITY };
        let m = self.solver.minimize(obj, at_inf, at_zero);
        InfPoint {
            value: m.value,
            minimizer: match m.at {
                Argmin::Interior(u) => Minimizer::At((1.0 - u) / u),
                Argmin::LowerEnd => Minimizer::Infinity,
                Argmin::UpperEnd => Minimizer::LowerEnd,
                Argmin::Nowhere => Minimizer::Nowhere,
            },
        }
    }

    pub fn phi(&self, lambda: f64) -> f64 {
        self.phi_point(lambda).value
    }

    /// `λ*` with the location of the infimum, searched over `u = 1/y`.
    pub fn lambda_star_point(&self) -> InfPoint {
        let rho = self.rho;
        let obj = |u: f64| {
            let g = self.g.eval(1.0 / u);
            if g == 0.0 {
                0.0
            } else {
                g / -(rho * u.ln()).exp_m1()
            }
        };
        let m = self.solver.minimize(obj, self.g.at_infinity(), f64::INFINITY);
        InfPoint {
            value: m.value,
            minimizer: match m.at {
                Argmin::Interior(u) => Minimizer::At(1.0 / u),
                Argmin::LowerEnd => Minimizer::Infinity,
                Argmin::UpperEnd => Minimizer::LowerEnd,
                Argmin::Nowhere => Minimizer::Nowhere,
            },
        }
    }

    pub fn lambda_star(&self) -> f64 {
        self.lambda_star_point().value
    }

    /// Bounds on `φ(λ)` from the confidence limits of a tabulated `g`.
    pub fn phi_bounds(&self, lambda: f64) -> Option<(f64, f64)> {
        let LdmFunction::TabulatedEmpirical(t) = &self.g else {
            return None;
        };
        let lo = Self { g: LdmFunction::TabulatedEmpirical(t.lower()), ..self.clone() };
        let hi = Self { g: LdmFunction::TabulatedEmpirical(t.upper()), ..self.clone() };
        Some((lo.phi(lambda), hi.phi(lambda)))
    }

    /// Iterates `λ_{n+1} = φ(λ_n)` from `λ₁` until successive values differ
    /// by at most `tol` or `max_steps` values have been produced.
    pub fn iterate(&self, lambda1: f64, max_steps: usize, tol: f64) -> FixedPointTrace {
        let star = self.lambda_star();
        let mut lambdas = vec![lambda1];
        let mut converged = false;
        while lambdas.len() < max_steps.max(1) {
            let prev = *lambdas.last().expect("non-empty");
            let next = self.phi(prev);
            lambdas.push(next);
            if !next.is_finite() {
                break;
            }
            if (next - prev).abs() <= tol {
                converged = true;
                break;
            }
        }
        let nondecreasing = lambdas.windows(2).all(|w| w[1] >= w[0] - 1e-12);
        FixedPointTrace {
            limit: *lambdas.last().expect("non-empty"),
            converged,
            guaranteed: lambda1 >= 0.0 && lambda1 <= star,
            nondecreasing,
            lambdas,
        }
    }

    /// Structural checks of `φ` on a grid of `λ >= 0`.
    pub fn property_report(&self, grid: &[f64]) -> PropertyReport {
        let star = self.lambda_star();
        let rows: Vec<(f64, f64)> = grid.iter().map(|&l| (l, self.phi(l))).collect();
        let monotonicity_violations = rows
            .windows(2)
            .filter(|w| w[1].0 > w[0].0 && w[1].1 < w[0].1 - 1e-12)
            .map(|w| (w[0].0, w[1].0))
            .collect();
        let mut concavity_violations = Vec::new();
        for i in 0..rows.len() {
            for j in i + 1..rows.len() {
                let (l1, p1) = rows[i];
                let (l2, p2) = rows[j];
                if !(p1.is_finite() && p2.is_finite()) {
                    continue;
                }
                if self.phi(0.5 * (l1 + l2)) < 0.5 * (p1 + p2) - 1e-9 {
                    concavity_violations.push((l1, l2));
                }
            }
        }
        let sign_violations = rows
            .iter()
            .filter(|&&(c, p)| if c <= star { p < c - SIGN_TOL } else { p > c + SIGN_TOL })
            .map(|&(c, _)| c)
            .collect();
        let crossing = rows
            .windows(2)
            .find(|w| w[0].1 - w[0].0 >= 0.0 && w[1].1 - w[1].0 < 0.0)
            .map(|w| self.bisect_crossing(w[0].0, w[1].0));
        PropertyReport {
            rows,
            lambda_star: star,
            monotonicity_violations,
            concavity_violations,
            sign_violations,
            phi_at_zero: self.phi(0.0),
            g_at_zero_plus: self.g.at_zero_plus(),
            crossing,
        }
    }

    fn bisect_crossing(&self, mut lo: f64, mut hi: f64) -> f64 {
        while hi - lo > 1e-12 * hi.max(1.0) {
            let mid = 0.5 * (lo + hi);
            if self.phi(mid) - mid >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// `(γ^{1/(1+ρ)} + a^{ρ/(1+ρ)} λ^{1/(1+ρ)})^{1+ρ}`.
pub fn phi_closed_pqd(gamma: f64, a: f64, rho: f64, lambda: f64) -> f64 {
    let p = 1.0 + rho;
    (gamma.powf(1.0 / p) + a.powf(rho / p) * lambda.powf(1.0 / p)).powf(p)
}

/// `γ (1 - a^{ρ/(1+ρ)})^{-(1+ρ)}` for `a < 1`, `∞` otherwise.
pub fn lambda_star_closed_pqd(gamma: f64, a: f64, rho: f64) -> f64 {
    if a >= 1.0 {
        return f64::INFINITY;
    }
    let p = 1.0 + rho;
    gamma * (1.0 - a.powf(rho / p)).powf(-p)
}

/// `(2√(λ - λ²) + 1)/4` for `λ < 1/2`, `1/2` otherwise.
pub fn phi_closed_fv(lambda: f64) -> f64 {
    if lambda < 0.5 {
        0.25 * (2.0 * (lambda - lambda * lambda).sqrt() + 1.0)
    } else {
        0.5
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fv() -> TransformContext {
        TransformContext::new(LdmFunction::FlemingViotClosedForm, 1.0).unwrap()
    }

    fn pqd(gamma: f64, a: f64, rho: f64) -> TransformContext {
        TransformContext::new(LdmFunction::PqdClosedForm { gamma, a, rho }, rho).unwrap()
    }

    #[test]
    fn closed_form_examples() {
        assert_relative_eq!(phi_closed_pqd(0.25, 1.0, 1.0, 0.25), 1.0, max_relative = 1e-15);
        assert_eq!(phi_closed_pqd(1.0, 0.0, 2.0, 5.0), 1.0);
        assert_relative_eq!(phi_closed_pqd(1.0, 0.25, 1.0, 4.0), 4.0, max_relative = 1e-15);
        assert_eq!(phi_closed_fv(0.5), 0.5);
        assert_eq!(phi_closed_fv(0.0), 0.25);
        assert_relative_eq!(phi_closed_fv(0.25), (3f64.sqrt() / 2.0 + 1.0) / 4.0, max_relative = 1e-15);
        assert_relative_eq!(lambda_star_closed_pqd(1.0, 0.25, 1.0), 4.0, max_relative = 1e-15);
        assert_eq!(lambda_star_closed_pqd(1.0, 1.0, 1.0), f64::INFINITY);
    }

    #[test]
    fn numeric_phi_examples() {
        let c = fv();
        assert_relative_eq!(c.phi(0.6), 0.5, epsilon = 1e-12);
        assert_relative_eq!(c.phi(0.0), 0.25, epsilon = 1e-12);
        assert_eq!(c.phi_point(0.6).minimizer, Minimizer::Infinity);
        let flat = pqd(0.7, 0.0, 1.0);
        for l in [0.0, 1.0, 10.0] {
            assert_relative_eq!(flat.phi(l), 0.7, epsilon = 1e-12);
        }
    }

    #[test]
    fn numeric_lambda_star_examples() {
        assert_relative_eq!(fv().lambda_star(), 0.5, epsilon = 1e-8);
        assert_relative_eq!(pqd(1.0, 0.25, 1.0).lambda_star(), 4.0, epsilon = 1e-8);
        assert_eq!(pqd(1.0, 1.0, 1.0).lambda_star(), f64::INFINITY);
        assert_eq!(pqd(1.0, 1.0, 1.0).lambda_star_point().minimizer, Minimizer::Nowhere);
    }

    #[test]
    fn iteration_examples() {
        let t = fv().iterate(0.25, 200, 1e-13);
        assert!(t.converged && t.nondecreasing && t.guaranteed);
        assert_relative_eq!(t.lambdas[1], (3f64.sqrt() / 2.0 + 1.0) / 4.0, epsilon = 1e-10);
        assert!((t.limit - 0.5).abs() < 1e-6);
        let t = fv().iterate(0.5, 200, 1e-13);
        assert!(t.lambdas.iter().all(|&l| (l - 0.5).abs() < 1e-12));
        let t = pqd(1.0, 0.25, 1.0).iterate(0.0, 2000, 1e-12);
        assert!(t.converged && (t.limit - 4.0).abs() < 1e-6, "{}", t.limit);
        let t = pqd(1.0, 1.0, 1.0).iterate(0.0, 200, 1e-12);
        assert!(!t.converged);
    }

    #[test]
    fn property_reports() {
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.05).collect();
        let r = fv().property_report(&grid);
        assert!(r.passed(), "{r:?}");
        assert!((r.crossing.unwrap() - 0.5).abs() < 1e-6);
        let grid: Vec<f64> = (0..=16).map(|i| i as f64 * 0.5).collect();
        let r = pqd(1.0, 0.25, 1.0).property_report(&grid);
        assert!(r.passed(), "{r:?}");
        assert!((r.crossing.unwrap() - 4.0).abs() < 1e-6);
        let r = TransformContext::new(LdmFunction::constant(2.0), 1.0).unwrap().property_report(&grid);
        assert!(r.passed());
        assert!((r.crossing.unwrap() - 2.0).abs() < 1e-6);
    }
}
