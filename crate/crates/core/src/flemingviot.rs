//! The embedded two-particle Fleming–Viot chain `(Y_k, T_k)` and the
//! statistics of its growth.
//!
//! `Y` grows like `e^{μk}`, so the state keeps `Y` and `T` as mantissas with
//! a shared binary exponent: `Y = y·2^e` and `T = t·4^e`. Rescaling by powers
//! of two is exact, so `t/y²` equals `T/Y²` up to the rounding of the step
//! itself.

use std::sync::OnceLock;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::laws::fv::{joint_density_yt, sample_fv_step, FvStepSample};
use crate::perpetuity::{Keeper, Thinning, OVERFLOW_LIMIT};
use crate::quadrature::{integrate_2d, QuadOptions};
use crate::rng::stream;
use crate::stats::{wilson_interval, LinearFit, OnlineRegression, Z95};

const RESCALE_ABOVE: f64 = 18446744073709551616.0; // 2^64
const RESCALE_BELOW: f64 = 1.0 / RESCALE_ABOVE;

/// `μ = E[log Y₁]` from [`mu_quadrature`], committed at relative 1e-8.
pub const MU_FIXTURE: f64 = 0.346_573_590_279_972_6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FvChainState {
    pub k: u64,
    /// Mantissa of `Y_k`.
    pub y: f64,
    /// Mantissa of `T_k`.
    pub t: f64,
    /// Binary exponent: `Y_k = y·2^e`, `T_k = t·4^e`.
    pub e: i64,
    /// `T_k / Y_k²`.
    pub x: f64,
}

impl Default for FvChainState {
    fn default() -> Self {
        Self::initial()
    }
}

impl FvChainState {
    pub fn initial() -> Self {
        Self { k: 0, y: 1.0, t: 0.0, e: 0, x: 0.0 }
    }

    pub fn log_y(&self) -> f64 {
        self.y.ln() + self.e as f64 * std::f64::consts::LN_2
    }

    /// `-∞` at `k = 0`.
    pub fn log_t(&self) -> f64 {
        self.t.ln() + 2.0 * self.e as f64 * std::f64::consts::LN_2
    }

    /// `Y_k`, infinite once it leaves the `f64` range.
    pub fn y_value(&self) -> f64 {
        self.y * 2f64.powf(self.e as f64)
    }

    pub fn t_value(&self) -> f64 {
        self.t * 4f64.powf(self.e as f64)
    }

    /// `Y / sqrt(2 T log log T)`, defined once `T > e^e`.
    pub fn lil_ratio(&self) -> Option<f64> {
        let log_t = self.log_t();
        (log_t > std::f64::consts::E).then(|| self.y / (2.0 * self.t * log_t.ln()).sqrt())
    }

    /// Applies one step with the given ratios `(Θ, Λ)`.
    pub fn advance(&self, theta: f64, lambda: f64) -> Result<Self> {
        let mut t = self.t + self.y * self.y * lambda;
        let mut y = self.y * theta;
        let mut e = self.e;
        if !(RESCALE_BELOW..=RESCALE_ABOVE).contains(&y) && y > 0.0 && y.is_finite() {
            let s = y.log2().floor() as i32;
            y *= 2f64.powi(-s);
            t *= 2f64.powi(-2 * s);
            e += i64::from(s);
        }
        let x = t / (y * y);
        let k = self.k + 1;
        if !(y > 0.0 && y.is_finite() && t.is_finite() && x <= OVERFLOW_LIMIT) {
            return Err(Error::Overflow { replica: 0, step: k, value: x });
        }
        Ok(Self { k, y, t, e, x })
    }
}

/// One step of the chain, with `(Θ, Λ) =d (Y₁, T₁)` drawn fresh.
pub fn fv_step<R: Rng + ?Sized>(state: &FvChainState, rng: &mut R) -> Result<FvChainState> {
    let s = sample_fv_step(rng);
    state.advance(s.y1, s.t1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FvRow {
    pub n: u64,
    pub log_y: f64,
    pub log_t: f64,
    pub x: f64,
    pub lil_ratio: Option<f64>,
}

impl From<&FvChainState> for FvRow {
    fn from(s: &FvChainState) -> Self {
        Self { n: s.k, log_y: s.log_y(), log_t: s.log_t(), x: s.x, lil_ratio: s.lil_ratio() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LilWindow {
    pub from: u64,
    pub to: u64,
    /// NaN when the ratio is undefined throughout.
    pub max: f64,
    pub argmax: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LilReport {
    /// Maxima over `[10^j, 10^{j+1})`.
    pub windows: Vec<LilWindow>,
    pub burn_in: u64,
    /// Maximum over `[burn_in, n_steps]`.
    pub max_after_burn_in: f64,
    pub slope_log_y: f64,
    pub slope_log_y_se: f64,
    pub slope_log_t: f64,
    pub slope_log_t_se: f64,
    /// `slope(log Y_n) / slope(log T_n)` over the final half.
    pub slope_ratio: f64,
    /// `(n, log log T_n / log n)` at powers of ten and at the end.
    pub loglog_ratio: Vec<(u64, f64)>,
    /// `log Y_n / n` at the end.
    pub mu_hat: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FvOptions {
    pub thinning: Thinning,
    pub burn_in: u64,
}

impl Default for FvOptions {
    fn default() -> Self {
        Self { thinning: Thinning::Auto, burn_in: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FvRun {
    pub seed: u64,
    pub rows: Vec<FvRow>,
    pub final_state: FvChainState,
    pub report: LilReport,
}

/// Runs the chain from `(Y₀, T₀) = (1, 0)` on stream `(seed, 0)`, the same
/// stream replica 0 of a perpetuity run uses.
pub fn run_fv(n_steps: u64, seed: u64, opts: &FvOptions) -> Result<FvRun> {
    if n_steps < 1000 {
        return Err(Error::param(format!("run_fv needs n_steps >= 1000, got {n_steps}")));
    }
    let mut rng = stream(seed, 0);
    let mut state = FvChainState::initial();
    let mut rows = vec![FvRow::from(&state)];
    let mut keep = Keeper::new(opts.thinning, n_steps);
    let mut windows: Vec<LilWindow> = Vec::new();
    let mut max_after = f64::NAN;
    let mut reg_y = OnlineRegression::default();
    let mut reg_t = OnlineRegression::default();
    let half = n_steps / 2;
    let mut loglog_ratio = Vec::new();
    let mut next_decade = 10u64;
    for n in 1..=n_steps {
        state = fv_step(&state, &mut rng).map_err(|e| match e {
            Error::Overflow { step, value, .. } => Error::Overflow { replica: seed as usize, step, value },
            e => e,
        })?;
        let from = 10u64.pow(n.ilog10());
        if windows.last().map(|w| w.from) != Some(from) {
            windows.push(LilWindow { from, to: from, max: f64::NAN, argmax: 0 });
        }
        let w = windows.last_mut().expect("pushed above");
        w.to = n;
        let lil = state.lil_ratio();
        if let Some(r) = lil {
            if !(r <= w.max) {
                w.max = r;
                w.argmax = n;
            }
            if n >= opts.burn_in && !(r <= max_after) {
                max_after = r;
            }
        }
        if n > half {
            reg_y.push(n as f64, state.log_y());
            reg_t.push(n as f64, state.log_t());
        }
        if n == next_decade || n == n_steps {
            loglog_ratio.push((n, state.log_t().ln() / (n as f64).ln()));
            if n == next_decade {
                next_decade = next_decade.saturating_mul(10);
            }
        }
        if keep.keep(n, n_steps) {
            rows.push(FvRow::from(&state));
        }
    }
    let nan_fit = LinearFit { slope: f64::NAN, intercept: f64::NAN, slope_se: f64::NAN };
    let fy = reg_y.fit().unwrap_or(nan_fit);
    let ft = reg_t.fit().unwrap_or(nan_fit);
    let report = LilReport {
        windows,
        burn_in: opts.burn_in,
        max_after_burn_in: max_after,
        slope_log_y: fy.slope,
        slope_log_y_se: fy.slope_se,
        slope_log_t: ft.slope,
        slope_log_t_se: ft.slope_se,
        slope_ratio: fy.slope / ft.slope,
        loglog_ratio,
        mu_hat: state.log_y() / n_steps as f64,
    };
    Ok(FvRun { seed, rows, final_state: state, report })
}

/// The first `n` ratio pairs `(Θ_k, Λ_k)` of stream `(seed, 0)`.
pub fn ratio_stream(n: usize, seed: u64) -> Vec<FvStepSample> {
    let mut rng = stream(seed, 0);
    (0..n).map(|_| sample_fv_step(&mut rng)).collect()
}

/// Integrates `f(y, t)` against the joint density of `(Y₁, T₁)` on
/// `(0, ∞)²`, mapped to the unit square by `y = u/(1-u)` and
/// `t = c(y) v/(1-v)`, where `c(y) = ((1-y)² + 1)/2` tracks the bulk of the
/// conditional law of `T₁` (near `y²/2` for large `y`).
pub fn integrate_joint<F: Fn(f64, f64) -> f64>(f: F, rel_tol: f64) -> Result<f64> {
    let g = |u: f64, v: f64| {
        if u <= 0.0 || u >= 1.0 || v <= 0.0 || v >= 1.0 {
            return 0.0;
        }
        let y = u / (1.0 - u);
        let c = 0.5 * ((1.0 - y) * (1.0 - y) + 1.0);
        let t = c * v / (1.0 - v);
        let jac = c / ((1.0 - u) * (1.0 - u) * (1.0 - v) * (1.0 - v));
        let d = joint_density_yt(y, t);
        if d == 0.0 {
            0.0
        } else {
            f(y, t) * d * jac
        }
    };
    let opts = QuadOptions { rel_tol, abs_tol: 1e-14, ..QuadOptions::default() };
    integrate_2d(g, (0.0, 1.0), (0.0, 1.0), opts).map(|r| r.value)
}

/// `μ = E[log Y₁]` by two-dimensional quadrature, at relative 1e-8.
pub fn mu_quadrature() -> Result<f64> {
    integrate_joint(|y, _| y.ln(), 1e-9)
}

/// [`mu_quadrature`], computed once per process.
pub fn mu() -> f64 {
    static MU: OnceLock<f64> = OnceLock::new();
    *MU.get_or_init(|| mu_quadrature().unwrap_or(MU_FIXTURE))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubgaussianRow {
    pub t: f64,
    pub hits: u64,
    pub n: u64,
    pub p_hat: f64,
    /// `log P̂(X^{-1/2} >= t) / t²`; for censored cells the bound `-log n / t²`.
    pub value: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub censored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgaussianReport {
    pub rows: Vec<SubgaussianRow>,
}

/// `log p / t²`.
#[inline]
pub fn subgaussian_statistic(p: f64, t: f64) -> f64 {
    p.ln() / (t * t)
}

/// The statistic with its Wilson interval from `hits` out of `n`.
pub fn subgaussian_row(t: f64, hits: u64, n: u64) -> SubgaussianRow {
    let (lo, hi) = wilson_interval(hits, n, Z95);
    let p_hat = hits as f64 / n as f64;
    let censored = hits == 0;
    let value = if censored { subgaussian_statistic(1.0 / n as f64, t) } else { subgaussian_statistic(p_hat, t) };
    SubgaussianRow {
        t,
        hits,
        n,
        p_hat,
        value,
        ci_lo: subgaussian_statistic(lo, t),
        ci_hi: subgaussian_statistic(hi, t),
        censored,
    }
}

/// `(1/t²) log P̂(X^{-1/2} >= t)` for samples of `X₁ = B₁` on a grid of
/// `t >= 1`. Reaching `t ≈ 2.5` takes about 10⁷ samples.
pub fn subgaussian_check(samples: &[f64], t_grid: &[f64]) -> Result<SubgaussianReport> {
    if samples.is_empty() {
        return Err(Error::param("no samples"));
    }
    if let Some(&t) = t_grid.iter().find(|&&t| !(t >= 1.0 && t.is_finite())) {
        return Err(Error::param(format!("t grid starts at 1, got {t}")));
    }
    let n = samples.len() as u64;
    let rows = t_grid
        .iter()
        .map(|&t| {
            let cut = 1.0 / (t * t);
            let hits = samples.iter().filter(|&&x| x <= cut).count() as u64;
            subgaussian_row(t, hits, n)
        })
        .collect();
    Ok(SubgaussianReport { rows })
}

/// The statistic at `t` from the exact probability `P(B₁ < t^{-2})`.
pub fn subgaussian_exact(t: f64) -> Result<f64> {
    crate::laws::fv::prob_scaled_event(1.0 / (t * t), 0.0).map(|p| subgaussian_statistic(p, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn advance_matches_the_affine_recursion() {
        let mut s = FvChainState::initial();
        for &(theta, lambda) in &[(2.0, 0.5), (0.25, 3.0), (1e30, 1.0), (1e-30, 2.0), (7.0, 0.1)] {
            let x = s.x;
            s = s.advance(theta, lambda).unwrap();
            assert_relative_eq!(s.x, (x + lambda) / (theta * theta), max_relative = 1e-14);
        }
        assert_eq!(s.k, 5);
    }

    #[test]
    fn rescaling_is_exact() {
        let s = FvChainState::initial().advance(3.0, 2.0).unwrap();
        let big = s.advance(1e25, 1.0).unwrap();
        assert!(big.e > 0 && big.y < RESCALE_ABOVE);
        assert_relative_eq!(big.log_y(), (3e25f64).ln(), max_relative = 1e-15);
        assert_relative_eq!(big.log_t(), (2.0 + 9.0f64).ln(), max_relative = 1e-13);
    }

    #[test]
    fn t_increases_and_y_stays_positive() {
        let mut rng = stream(5, 0);
        let mut s = FvChainState::initial();
        for _ in 0..5000 {
            let n = fv_step(&s, &mut rng).unwrap();
            assert!(n.log_t() > s.log_t() && n.y > 0.0);
            assert_relative_eq!(n.x, n.t / (n.y * n.y), max_relative = 1e-12);
            s = n;
        }
    }

    #[test]
    fn lil_ratio_needs_large_t() {
        let s = FvChainState { k: 1, y: 1.0, t: 10.0, e: 0, x: 10.0 };
        assert!(s.lil_ratio().is_none());
        let s = FvChainState { k: 1, y: 1.0, t: 100.0, e: 0, x: 100.0 };
        assert_relative_eq!(s.lil_ratio().unwrap(), 1.0 / (200.0 * 100f64.ln().ln()).sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn short_runs_are_rejected() {
        assert!(run_fv(999, 1, &FvOptions::default()).is_err());
    }

    #[test]
    fn run_fv_reports() {
        let r = run_fv(20_000, 3, &FvOptions::default()).unwrap();
        assert_eq!(r.rows.len(), 20_001);
        assert_eq!(r.report.windows.first().unwrap().from, 1);
        assert_eq!(r.report.windows.last().unwrap().to, 20_000);
        assert!((r.report.slope_ratio - 0.5).abs() < 0.05, "{}", r.report.slope_ratio);
        assert!((r.report.mu_hat - MU_FIXTURE).abs() < 0.05);
        assert_eq!(r.report.loglog_ratio.last().unwrap().0, 20_000);
    }

    #[test]
    fn density_mass_and_mu() {
        let mass = integrate_joint(|_, _| 1.0, 1e-10).unwrap();
        assert!((mass - 1.0).abs() < 1e-8, "{mass}");
        let m = mu_quadrature().unwrap();
        assert!(m > 0.0);
        assert_relative_eq!(m, MU_FIXTURE, max_relative = 1e-8);
    }

    #[test]
    fn subgaussian_statistic_on_exact_tail() {
        for &t in &[1.0, 1.5, 2.0, 3.0] {
            let p = (-1.0_f64 / (4.0 / (t * t))).exp();
            assert_relative_eq!(subgaussian_statistic(p, t), -0.25, max_relative = 1e-14);
        }
    }

    #[test]
    fn subgaussian_grid_rules() {
        assert!(subgaussian_check(&[1.0], &[0.5]).is_err());
        let r = subgaussian_check(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert!(!r.rows[0].censored && r.rows[1].censored);
    }
}
