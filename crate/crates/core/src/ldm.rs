//! The local dependence measure
//! `g(y) = lim_{ε→0⁺} -log P(εAy + B < ε) / H(ε)`: closed forms, a Monte
//! Carlo estimator along an ε-grid, and the Laplace-minimum oracle.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laws::CoefficientLaw;
use crate::par::map_blocks_reduce;
use crate::quadrature::{log_integrate, QuadOptions};
use crate::rng::stream;
use crate::special::ln_one_minus_exp_neg;
use crate::stats::{least_squares, wilson_interval, Z95};
use crate::tail_scale::TailScale;

/// One row of a tabulated `g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GRow {
    pub y: f64,
    pub g: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// `g` known on a grid of `y` values, sorted by `y`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TabulatedG {
    rows: Vec<GRow>,
}

impl TabulatedG {
    pub fn new(mut rows: Vec<GRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::param("tabulated g needs at least one row"));
        }
        if rows.iter().any(|r| !(r.y >= 0.0 && r.y.is_finite()) || r.g.is_nan()) {
            return Err(Error::param("tabulated g rows need finite y >= 0 and a non-NaN g"));
        }
        rows.sort_by(|a, b| a.y.total_cmp(&b.y));
        if rows.windows(2).any(|w| w[0].y == w[1].y) {
            return Err(Error::param("tabulated g has duplicate y values"));
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[GRow] {
        &self.rows
    }

    /// Linear interpolation of the selected column; NaN outside the support.
    fn interpolate(&self, y: f64, col: impl Fn(&GRow) -> f64) -> f64 {
        let r = &self.rows;
        if y < r[0].y || y > r[r.len() - 1].y {
            return f64::NAN;
        }
        let j = r.partition_point(|row| row.y < y);
        if r[j].y == y {
            return col(&r[j]);
        }
        let (lo, hi) = (&r[j - 1], &r[j]);
        let (vl, vh) = (col(lo), col(hi));
        if vl.is_infinite() || vh.is_infinite() {
            return vl.max(vh);
        }
        vl + (vh - vl) * (y - lo.y) / (hi.y - lo.y)
    }

    /// The table with `g` replaced by its lower confidence limit.
    pub fn lower(&self) -> Self {
        Self { rows: self.rows.iter().map(|r| GRow { g: r.ci_lo, ..*r }).collect() }
    }

    /// The table with `g` replaced by its upper confidence limit.
    pub fn upper(&self) -> Self {
        Self { rows: self.rows.iter().map(|r| GRow { g: r.ci_hi, ..*r }).collect() }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let rows = rd.deserialize().collect::<std::result::Result<Vec<GRow>, _>>()?;
        Self::new(rows)
    }

    /// Rows whose `g` decreases by more than the two confidence intervals
    /// allow, as index pairs `(i, i + 1)`.
    pub fn monotonicity_violations(&self) -> Vec<(usize, usize)> {
        self.rows
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[1].ci_hi < w[0].ci_lo)
            .map(|(i, _)| (i, i + 1))
            .collect()
    }
}

/// A local dependence measure.
#[derive(Debug, Clone, PartialEq)]
pub enum LdmFunction {
    /// `γ(1 - ay)^{-ρ}` for `y < 1/a`, `∞` beyond.
    PqdClosedForm { gamma: f64, a: f64, rho: f64 },
    /// `1/2 - 1/(y + 2 + √(4 + y²))`.
    FlemingViotClosedForm,
    /// `λ₂` at zero and `(√(λ₁ + y) + √y)²` for `y > 0`.
    DiscontinuousClosedForm { lambda1: f64, lambda2: f64 },
    TabulatedEmpirical(TabulatedG),
}

impl LdmFunction {
    /// Constant `g ≡ m`.
    pub fn constant(m: f64) -> Self {
        LdmFunction::PqdClosedForm { gamma: m, a: 0.0, rho: 1.0 }
    }

    /// `g(y)`, possibly `+∞`. NaN for negative `y` and, for tables, outside
    /// the tabulated support.
    pub fn eval(&self, y: f64) -> f64 {
        if !(y >= 0.0) {
            return f64::NAN;
        }
        match self {
            &LdmFunction::PqdClosedForm { gamma, a, rho } => {
                let s = 1.0 - a * y;
                if a == 0.0 {
                    gamma
                } else if s <= 0.0 {
                    f64::INFINITY
                } else {
                    gamma * s.powf(-rho)
                }
            }
            LdmFunction::FlemingViotClosedForm => {
                if y.is_infinite() {
                    0.5
                } else {
                    0.5 - 1.0 / (y + 2.0 + (4.0 + y * y).sqrt())
                }
            }
            &LdmFunction::DiscontinuousClosedForm { lambda1, lambda2 } => {
                if y == 0.0 {
                    lambda2
                } else {
                    let r = (lambda1 + y).sqrt() + y.sqrt();
                    r * r
                }
            }
            LdmFunction::TabulatedEmpirical(t) => t.interpolate(y, |r| r.g),
        }
    }

    /// `g(0⁺)`.
    pub fn at_zero_plus(&self) -> f64 {
        match self {
            &LdmFunction::PqdClosedForm { gamma, .. } => gamma,
            LdmFunction::FlemingViotClosedForm => 0.25,
            &LdmFunction::DiscontinuousClosedForm { lambda1, .. } => lambda1,
            LdmFunction::TabulatedEmpirical(t) => {
                t.rows.iter().find(|r| r.y > 0.0).map_or(f64::NAN, |r| r.g)
            }
        }
    }

    /// `lim_{y→∞} g(y)`; NaN for tables, which carry no information there.
    pub fn at_infinity(&self) -> f64 {
        match self {
            &LdmFunction::PqdClosedForm { gamma, a, .. } => {
                if a == 0.0 {
                    gamma
                } else {
                    f64::INFINITY
                }
            }
            LdmFunction::FlemingViotClosedForm => 0.5,
            LdmFunction::DiscontinuousClosedForm { .. } => f64::INFINITY,
            LdmFunction::TabulatedEmpirical(_) => f64::NAN,
        }
    }

    /// Largest finite `y` at which `g` is defined, if bounded.
    pub fn support_end(&self) -> Option<f64> {
        match self {
            LdmFunction::TabulatedEmpirical(t) => t.rows.last().map(|r| r.y),
            _ => None,
        }
    }
}

/// One ε-cell of an LDM estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GCell {
    pub eps: f64,
    pub hits: u64,
    pub n: u64,
    pub p_hat: f64,
    /// `-log p̂ / H(ε)`, or the lower bound `log n / H(ε)` when censored.
    pub g_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Delta-method standard error of `g_hat`; NaN when censored.
    pub se: f64,
    pub censored: bool,
}

impl GCell {
    pub fn from_counts(eps: f64, hits: u64, n: u64, scale: &TailScale) -> Self {
        let h = scale.eval_unchecked(eps);
        if hits == 0 {
            let bound = (n as f64).ln() / h;
            return GCell {
                eps,
                hits,
                n,
                p_hat: 0.0,
                g_hat: bound,
                ci_lo: bound,
                ci_hi: f64::INFINITY,
                se: f64::NAN,
                censored: true,
            };
        }
        let p = hits as f64 / n as f64;
        let (lo, hi) = wilson_interval(hits, n, Z95);
        GCell {
            eps,
            hits,
            n,
            p_hat: p,
            g_hat: -p.ln() / h,
            ci_lo: -hi.ln() / h,
            ci_hi: -lo.ln() / h,
            se: ((1.0 - p) / (n as f64 * p)).sqrt() / h,
            censored: false,
        }
    }
}

/// Least-squares fit of `ĝ_ε = g + c / log(1/ε)`. Heuristic: no rate is
/// known for the limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extrapolation {
    pub g_limit: f64,
    pub coefficient: f64,
    pub cells_used: usize,
    pub heuristic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GEstimate {
    pub y: f64,
    pub cells: Vec<GCell>,
    pub extrapolation: Option<Extrapolation>,
}

impl GEstimate {
    pub fn last(&self) -> &GCell {
        self.cells.last().expect("eps grid is non-empty")
    }

    /// Whether uncensored `ĝ_ε` never decreases as `ε` shrinks.
    pub fn nondecreasing(&self) -> bool {
        self.cells.iter().filter(|c| !c.censored).collect::<Vec<_>>().windows(2).all(|w| w[1].g_hat >= w[0].g_hat)
    }

    /// Whether uncensored `ĝ_ε` never increases as `ε` shrinks.
    pub fn nonincreasing(&self) -> bool {
        self.cells.iter().filter(|c| !c.censored).collect::<Vec<_>>().windows(2).all(|w| w[1].g_hat <= w[0].g_hat)
    }
}

pub(crate) fn validate_eps_grid(eps_grid: &[f64]) -> Result<()> {
    if eps_grid.is_empty() {
        return Err(Error::param("eps grid is empty"));
    }
    if eps_grid.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(Error::param("eps grid values must be positive and finite"));
    }
    if eps_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::param("eps grid must be strictly decreasing"));
    }
    Ok(())
}

fn extrapolate(cells: &[GCell]) -> Option<Extrapolation> {
    let used: Vec<&GCell> = cells.iter().filter(|c| !c.censored && c.eps < 1.0).collect();
    if used.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = used.iter().map(|c| 1.0 / (1.0 / c.eps).ln()).collect();
    let ys: Vec<f64> = used.iter().map(|c| c.g_hat).collect();
    let fit = least_squares(&xs, &ys)?;
    Some(Extrapolation { g_limit: fit.intercept, coefficient: fit.slope, cells_used: used.len(), heuristic: true })
}

const BLOCK: u64 = 1 << 16;

/// Estimates `ĝ_ε(y)` for every `y` in `ys` and `ε` in `eps_grid` from the
/// same `n` draws of `(A, B)`.
pub fn estimate_g_multi(
    law: &CoefficientLaw,
    ys: &[f64],
    scale: &TailScale,
    eps_grid: &[f64],
    n: u64,
    seed: u64,
) -> Result<Vec<GEstimate>> {
    validate_eps_grid(eps_grid)?;
    scale.validate()?;
    if ys.iter().any(|&y| !(y >= 0.0 && y.is_finite())) {
        return Err(Error::param("y values must be finite and nonnegative"));
    }
    if n == 0 {
        return Err(Error::param("sample count must be positive"));
    }
    let cells = ys.len() * eps_grid.len();
    let count = |hits: &mut [u64], a: f64, b: f64| {
        for (iy, &y) in ys.iter().enumerate() {
            let room = 1.0 - a * y;
            if room <= 0.0 {
                continue;
            }
            for (ie, &eps) in eps_grid.iter().enumerate() {
                // eps grid is decreasing: once missed, smaller eps miss too
                if b < eps * room {
                    hits[iy * eps_grid.len() + ie] += 1;
                } else {
                    break;
                }
            }
        }
    };
    let hits = if law.is_sequential() {
        let mut rng = stream(seed, 0);
        let mut s = law.sampler();
        let mut hits = vec![0u64; cells];
        for _ in 0..n {
            let c = s.draw(&mut rng)?;
            count(&mut hits, c.a, c.b);
        }
        hits
    } else {
        map_blocks_reduce(
            n,
            BLOCK,
            |blk, _, len| {
                let mut rng = stream(seed, blk);
                let mut hits = vec![0u64; cells];
                for _ in 0..len {
                    let c = law.sample(&mut rng).expect("stateless law");
                    count(&mut hits, c.a, c.b);
                }
                hits
            },
            vec![0u64; cells],
            |mut acc, part| {
                acc.iter_mut().zip(part).for_each(|(x, y)| *x += y);
                acc
            },
        )
    };
    Ok(ys
        .iter()
        .enumerate()
        .map(|(iy, &y)| {
            let cells: Vec<GCell> = eps_grid
                .iter()
                .enumerate()
                .map(|(ie, &eps)| GCell::from_counts(eps, hits[iy * eps_grid.len() + ie], n, scale))
                .collect();
            let extrapolation = extrapolate(&cells);
            GEstimate { y, cells, extrapolation }
        })
        .collect())
}

/// `ĝ_ε(y)` along `eps_grid` from `n` draws per cell (shared across cells).
pub fn estimate_g(
    law: &CoefficientLaw,
    y: f64,
    scale: &TailScale,
    eps_grid: &[f64],
    n: u64,
    seed: u64,
) -> Result<GEstimate> {
    Ok(estimate_g_multi(law, &[y], scale, eps_grid, n, seed)?.remove(0))
}

/// Tabulates the final uncensored cell of each estimate.
pub fn tabulate(estimates: &[GEstimate]) -> Result<TabulatedG> {
    let rows = estimates
        .iter()
        .filter_map(|e| {
            e.cells.iter().rev().find(|c| !c.censored).map(|c| GRow { y: e.y, g: c.g_hat, ci_lo: c.ci_lo, ci_hi: c.ci_hi })
        })
        .collect();
    TabulatedG::new(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LaplaceReport {
    /// `(ε, ε log ∫ e^{-f/ε} dμ)`.
    pub rows: Vec<(f64, f64)>,
    /// Fit of `L + c ε log ε + d ε` to the rows; `None` below three rows.
    pub extrapolated: Option<f64>,
}

impl LaplaceReport {
    pub fn last(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.1)
    }
}

/// `ε log ∫_a^b e^{-f(x)/ε} μ(dx)` along `eps_grid`, with `μ` given by its
/// log-density. Tends to `-min f` over the support of `μ`.
pub fn laplace_min_limit<F, M>(f: F, ln_mu: M, a: f64, b: f64, eps_grid: &[f64]) -> Result<LaplaceReport>
where
    F: Fn(f64) -> f64,
    M: Fn(f64) -> f64,
{
    validate_eps_grid(eps_grid)?;
    if !(a < b && a.is_finite() && b.is_finite()) {
        return Err(Error::param(format!("need a finite interval a < b, got [{a}, {b}]")));
    }
    let opts = QuadOptions::rel(1e-10);
    let mut rows = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let l = log_integrate(|x| -f(x) / eps + ln_mu(x), a, b, &[], opts).map_err(|e| match e {
            Error::Quadrature { message, .. } => Error::Quadrature { eps: Some(eps), message },
            other => other,
        })?;
        if !l.is_finite() {
            return Err(Error::Quadrature { eps: Some(eps), message: format!("log integral is {l}") });
        }
        rows.push((eps, eps * l));
    }
    let extrapolated = fit_three(&rows);
    Ok(LaplaceReport { rows, extrapolated })
}

/// Least squares for `v = L + c ε ln ε + d ε`; returns `L`.
fn fit_three(rows: &[(f64, f64)]) -> Option<f64> {
    if rows.len() < 3 {
        return None;
    }
    let basis = |e: f64| [1.0, e * e.ln(), e];
    let mut m = [[0.0; 3]; 3];
    let mut r = [0.0; 3];
    for &(e, v) in rows {
        let p = basis(e);
        for i in 0..3 {
            r[i] += p[i] * v;
            for j in 0..3 {
                m[i][j] += p[i] * p[j];
            }
        }
    }
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    if d.abs() < 1e-300 {
        return None;
    }
    let mut m0 = m;
    for i in 0..3 {
        m0[i][0] = r[i];
    }
    Some(det(&m0) / d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IedRow {
    pub eps: f64,
    /// `ε log(f₂(ε) - f₁(ε))`.
    pub minus: f64,
    /// `ε log(f₂(ε) + f₁(ε))`.
    pub plus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IedDifferenceReport {
    pub rows: Vec<IedRow>,
    pub limit: f64,
    pub final_error: f64,
    pub errors_nonincreasing: bool,
}

/// Evaluates `ε log(e^{-λ₂/ε} ± e^{-λ₁/ε})` along `eps_grid`; both tend to
/// `-λ₂` when `λ₁ > λ₂`.
pub fn ied_difference_check(lambda1: f64, lambda2: f64, eps_grid: &[f64]) -> Result<IedDifferenceReport> {
    validate_eps_grid(eps_grid)?;
    if !(lambda1 > lambda2 && lambda2 >= 0.0) {
        return Err(Error::param(format!("need lambda1 > lambda2 >= 0, got ({lambda1}, {lambda2})")));
    }
    let gap = lambda1 - lambda2;
    let rows: Vec<IedRow> = eps_grid
        .iter()
        .map(|&eps| IedRow {
            eps,
            minus: -lambda2 + eps * ln_one_minus_exp_neg(gap / eps),
            plus: -lambda2 + eps * (-gap / eps).exp().ln_1p(),
        })
        .collect();
    let err = |r: &IedRow| (r.minus + lambda2).abs().max((r.plus + lambda2).abs());
    let errors: Vec<f64> = rows.iter().map(err).collect();
    Ok(IedDifferenceReport {
        limit: -lambda2,
        final_error: *errors.last().expect("non-empty"),
        errors_nonincreasing: errors.windows(2).all(|w| w[1] <= w[0]),
        rows,
    })
}
