//! The chain `X_n = A_n X_{n-1} + B_n`, the series
//! `S = Σ_k B_k Π_{j<k} A_j`, and the statistics built on them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laws::{CoefficientLaw, LawSpec, Sampler};
use crate::ldm::{validate_eps_grid, GCell};
use crate::par::map_indexed;
use crate::rng::stream;
use crate::stats::{dkw_epsilon, least_squares, sorted, sup_cdf_difference, RunningMoments};
use crate::tail_scale::TailScale;

/// Values above this abort a replica.
pub const OVERFLOW_LIMIT: f64 = 1e300;

const REPLICA_BLOCK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub law: LawSpec,
    #[serde(default)]
    pub x0: f64,
    pub n_steps: u64,
    #[serde(default = "one")]
    pub replicas: u64,
    pub seed: u64,
    #[serde(default)]
    pub scale: TailScale,
}

fn one() -> u64 {
    1
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps < 1 {
            return Err(Error::param("n_steps must be at least 1"));
        }
        if self.replicas < 1 {
            return Err(Error::param("replicas must be at least 1"));
        }
        if !(self.x0 >= 0.0 && self.x0.is_finite()) {
            return Err(Error::param(format!("x0 must be finite and nonnegative, got {}", self.x0)));
        }
        self.scale.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverflowEvent {
    pub replica: u64,
    pub step: u64,
    pub value: f64,
}

impl From<OverflowEvent> for Error {
    fn from(e: OverflowEvent) -> Self {
        Error::Overflow { replica: e.replica as usize, step: e.step, value: e.value }
    }
}

/// Which steps of a trajectory are stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Thinning {
    /// Every step up to `10⁵` steps, geometric beyond.
    Auto,
    All,
    /// Every `k`-th step.
    Every(u64),
    /// About this many points per decade of `n`.
    Geometric(u32),
}

impl Default for Thinning {
    fn default() -> Self {
        Thinning::Auto
    }
}

/// Decides online which indices are stored.
#[derive(Debug, Clone)]
pub(crate) struct Keeper {
    mode: Thinning,
    next: f64,
    factor: f64,
}

impl Keeper {
    pub(crate) fn new(mode: Thinning, n_steps: u64) -> Self {
        let mode = match mode {
            Thinning::Auto if n_steps <= 100_000 => Thinning::All,
            Thinning::Auto => Thinning::Geometric(100),
            m => m,
        };
        let factor = match mode {
            Thinning::Geometric(k) => 10f64.powf(1.0 / k.max(1) as f64),
            _ => 1.0,
        };
        Self { mode, next: 1.0, factor }
    }

    #[inline]
    pub(crate) fn keep(&mut self, n: u64, last: u64) -> bool {
        match self.mode {
            Thinning::All | Thinning::Auto => true,
            Thinning::Every(k) => n % k.max(1) == 0 || n == last,
            Thinning::Geometric(_) => {
                if n as f64 >= self.next || n == last {
                    while self.next <= n as f64 {
                        self.next = (self.next * self.factor).max(self.next + 1.0);
                    }
                    true
                } else {
                    false
                }
            }
        }
    }
}

/// Online running infimum of `X_n / H^{-1}(log n)` from `start` on,
/// recorded on a geometric grid of `n`.
#[derive(Debug, Clone)]
pub struct EnvelopeTracker {
    scale: TailScale,
    start: u64,
    inf: f64,
    argmin: u64,
    next_record: f64,
    records: Vec<(u64, f64)>,
}

/// Envelope statistic of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub start: u64,
    /// `(n, inf_{start <= m <= n} X_m / H^{-1}(log m))`.
    pub records: Vec<(u64, f64)>,
    pub final_value: f64,
    pub argmin: u64,
}

const RECORDS_PER_DECADE: f64 = 20.0;

impl EnvelopeTracker {
    pub fn new(scale: TailScale, start: u64) -> Self {
        let start = start.max(3);
        Self { scale, start, inf: f64::INFINITY, argmin: 0, next_record: start as f64, records: Vec::new() }
    }

    #[inline]
    fn normalizer(&self, n: u64) -> f64 {
        let u = (n as f64).ln();
        if self.scale.beta == 0.0 {
            (self.scale.scale / u).powf(1.0 / self.scale.rho)
        } else {
            self.scale.inverse(u).unwrap_or(f64::NAN)
        }
    }

    #[inline]
    pub fn push(&mut self, n: u64, x: f64) {
        if n < self.start {
            return;
        }
        let v = x / self.normalizer(n);
        if v < self.inf {
            self.inf = v;
            self.argmin = n;
        }
        if n as f64 >= self.next_record {
            self.records.push((n, self.inf));
            while self.next_record <= n as f64 {
                self.next_record *= 10f64.powf(1.0 / RECORDS_PER_DECADE);
            }
        }
    }

    pub fn finish(mut self, last: u64) -> EnvelopeReport {
        if last >= self.start && self.records.last().map(|r| r.0) != Some(last) {
            self.records.push((last, self.inf));
        }
        EnvelopeReport { start: self.start, records: self.records, final_value: self.inf, argmin: self.argmin }
    }
}

/// Running infimum of `X_n / H^{-1}(log n)` for `xs[i] = X_{i+1}`, over
/// `n >= start` (at least 3).
pub fn envelope_statistic(xs: &[f64], scale: &TailScale, start: u64) -> EnvelopeReport {
    let mut t = EnvelopeTracker::new(*scale, start);
    for (i, &x) in xs.iter().enumerate() {
        t.push(i as u64 + 1, x);
    }
    t.finish(xs.len() as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub thinning: Thinning,
    pub envelope_start: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { thinning: Thinning::Auto, envelope_start: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicaRun {
    pub replica: u64,
    /// Stored `(n, X_n)`, starting with `(0, x0)`.
    pub points: Vec<(u64, f64)>,
    pub last: (u64, f64),
    pub envelope: EnvelopeReport,
    pub overflow: Option<OverflowEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainRun {
    pub replicas: Vec<ReplicaRun>,
}

fn check_replicas(law: &CoefficientLaw, replicas: u64) -> Result<()> {
    if law.is_sequential() && replicas > 1 {
        return Err(Error::param("a sequential empirical law supports a single replica only"));
    }
    Ok(())
}

#[inline]
fn step<R: Rng + ?Sized>(s: &mut Sampler<'_>, rng: &mut R, x: f64) -> Result<f64> {
    let c = s.draw(rng)?;
    Ok(c.a * x + c.b)
}

/// Runs every replica of `cfg` with its own stream `(seed, replica)`.
pub fn run_chain(cfg: &ChainConfig, opts: &RunOptions) -> Result<ChainRun> {
    cfg.validate()?;
    let law = cfg.law.build()?;
    check_replicas(&law, cfg.replicas)?;
    let runs = map_indexed(cfg.replicas as usize, |r| -> Result<ReplicaRun> {
        let r = r as u64;
        let mut rng = stream(cfg.seed, r);
        let mut s = law.sampler();
        let mut keeper = Keeper::new(opts.thinning, cfg.n_steps);
        let mut env = EnvelopeTracker::new(cfg.scale, opts.envelope_start);
        let mut points = vec![(0, cfg.x0)];
        let mut x = cfg.x0;
        let mut overflow = None;
        let mut last = (0, x);
        for n in 1..=cfg.n_steps {
            x = step(&mut s, &mut rng, x)?;
            if !(x <= OVERFLOW_LIMIT) {
                overflow = Some(OverflowEvent { replica: r, step: n, value: x });
                points.push((n, x));
                last = (n, x);
                break;
            }
            env.push(n, x);
            if keeper.keep(n, cfg.n_steps) {
                points.push((n, x));
            }
            last = (n, x);
        }
        Ok(ReplicaRun { replica: r, points, last, envelope: env.finish(last.0), overflow })
    });
    Ok(ChainRun { replicas: runs.into_iter().collect::<Result<_>>()? })
}

/// `X_n` at each checkpoint, across replicas.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalSamples {
    pub checkpoints: Vec<u64>,
    /// `values[j][r]` is `X_{checkpoints[j]}` of replica `r`; `+∞` after
    /// an overflow.
    pub values: Vec<Vec<f64>>,
    pub overflows: Vec<OverflowEvent>,
}

impl MarginalSamples {
    pub fn at(&self, n: u64) -> Option<&[f64]> {
        self.checkpoints.iter().position(|&c| c == n).map(|j| self.values[j].as_slice())
    }
}

/// Simulates `replicas` independent chains from `x0` and records the values
/// at the (sorted, deduplicated) checkpoints. Replica `r` uses the same
/// stream as in [`run_chain`].
pub fn simulate_marginals(
    law: &CoefficientLaw,
    x0: f64,
    checkpoints: &[u64],
    replicas: u64,
    seed: u64,
) -> Result<MarginalSamples> {
    check_replicas(law, replicas)?;
    let mut cps = checkpoints.to_vec();
    cps.sort_unstable();
    cps.dedup();
    if cps.is_empty() {
        return Err(Error::param("no checkpoints"));
    }
    let nc = cps.len();
    let horizon = *cps.last().expect("non-empty");
    let blocks = (replicas as usize).div_ceil(REPLICA_BLOCK);
    let parts = map_indexed(blocks, |b| -> Result<(Vec<f64>, Vec<OverflowEvent>)> {
        let lo = b * REPLICA_BLOCK;
        let hi = (lo + REPLICA_BLOCK).min(replicas as usize);
        let mut vals = Vec::with_capacity((hi - lo) * nc);
        let mut over = Vec::new();
        for r in lo..hi {
            let mut rng = stream(seed, r as u64);
            let mut s = law.sampler();
            let mut x = x0;
            let mut next = 0;
            if cps[0] == 0 {
                vals.push(x);
                next = 1;
            }
            for n in 1..=horizon {
                x = step(&mut s, &mut rng, x)?;
                if !(x <= OVERFLOW_LIMIT) {
                    over.push(OverflowEvent { replica: r as u64, step: n, value: x });
                    while next < nc {
                        vals.push(f64::INFINITY);
                        next += 1;
                    }
                    break;
                }
                if cps[next] == n {
                    vals.push(x);
                    next += 1;
                }
            }
        }
        Ok((vals, over))
    });
    let mut values = vec![Vec::with_capacity(replicas as usize); nc];
    let mut overflows = Vec::new();
    for part in parts {
        let (vals, over) = part?;
        for row in vals.chunks_exact(nc) {
            for (j, &v) in row.iter().enumerate() {
                values[j].push(v);
            }
        }
        overflows.extend(over);
    }
    Ok(MarginalSamples { checkpoints: cps, values, overflows })
}

/// A partial sum of the series together with the remaining product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesDraw {
    pub sum: f64,
    /// `Π_{j<=N} A_j`, a proxy for the size of the remainder.
    pub product: f64,
    /// `product < 1e-16`.
    pub converged: bool,
}

/// `S_N = Σ_{k<=N} B_k Π_{j<k} A_j`.
pub fn simulate_series<R: Rng + ?Sized>(law: &CoefficientLaw, n: u64, rng: &mut R) -> Result<SeriesDraw> {
    if n < 1 {
        return Err(Error::param("series truncation must be at least 1"));
    }
    let mut s = law.sampler();
    let (mut sum, mut prod) = (0.0, 1.0);
    for k in 1..=n {
        let c = s.draw(rng)?;
        sum += prod * c.b;
        prod *= c.a;
        if !(sum <= OVERFLOW_LIMIT) {
            return Err(Error::Overflow { replica: 0, step: k, value: sum });
        }
    }
    Ok(SeriesDraw { sum, product: prod, converged: prod < 1e-16 })
}

/// `S_N` for `replicas` independent streams `(seed, r)`.
pub fn simulate_series_replicas(law: &CoefficientLaw, n: u64, replicas: u64, seed: u64) -> Result<Vec<f64>> {
    check_replicas(law, replicas)?;
    map_indexed(replicas as usize, |r| simulate_series(law, n, &mut stream(seed, r as u64)).map(|d| d.sum))
        .into_iter()
        .collect()
}

/// Left-tail exponents `-log P̂(X < ε) / H(ε)` from independent samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailEstimate {
    pub cells: Vec<GCell>,
}

impl TailEstimate {
    fn uncensored(&self) -> Vec<&GCell> {
        self.cells.iter().filter(|c| !c.censored).collect()
    }

    /// Whether the exponent never decreases as `ε` shrinks.
    pub fn nondecreasing(&self) -> bool {
        self.uncensored().windows(2).all(|w| w[1].g_hat >= w[0].g_hat)
    }

    /// Whether the exponent strictly increases as `ε` shrinks.
    pub fn increasing(&self) -> bool {
        self.uncensored().windows(2).all(|w| w[1].g_hat > w[0].g_hat)
    }

    pub fn last(&self) -> &GCell {
        self.cells.last().expect("eps grid is non-empty")
    }
}

pub fn estimate_left_tail(samples: &[f64], scale: &TailScale, eps_grid: &[f64]) -> Result<TailEstimate> {
    validate_eps_grid(eps_grid)?;
    if samples.is_empty() {
        return Err(Error::param("no samples"));
    }
    let n = samples.len() as u64;
    let mut hits = vec![0u64; eps_grid.len()];
    for &x in samples {
        for (h, &e) in hits.iter_mut().zip(eps_grid) {
            if x < e {
                *h += 1;
            } else {
                break;
            }
        }
    }
    Ok(TailEstimate {
        cells: eps_grid.iter().zip(hits).map(|(&e, h)| GCell::from_counts(e, h, n, scale)).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderingCheck {
    pub n_before: u64,
    pub n_after: u64,
    /// `sup_x (F̂_after(x) - F̂_before(x))`; positive values go against the
    /// ordering.
    pub max_violation: f64,
    pub band: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub replicas: u64,
    pub checks: Vec<OrderingCheck>,
}

impl MonotonicityReport {
    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }
}

/// Checks that the empirical CDFs of `X_n` (from `x0 = 0`) are
/// nonincreasing in `n` between consecutive checkpoints, up to a DKW band
/// at confidence `1 - alpha` per pair.
pub fn stochastic_monotonicity_check(
    law: &CoefficientLaw,
    checkpoints: &[u64],
    replicas: u64,
    seed: u64,
    alpha: f64,
) -> Result<MonotonicityReport> {
    let m = simulate_marginals(law, 0.0, checkpoints, replicas, seed)?;
    let band = 2.0 * dkw_epsilon(replicas as usize, alpha / 2.0);
    let sorted_vals: Vec<Vec<f64>> = m.values.iter().map(|v| sorted(v)).collect();
    let checks = m
        .checkpoints
        .windows(2)
        .zip(sorted_vals.windows(2))
        .map(|(n, v)| {
            let gap = sup_cdf_difference(&v[1], &v[0]).a_over_b;
            OrderingCheck { n_before: n[0], n_after: n[1], max_violation: gap, band, ok: gap <= band }
        })
        .collect();
    Ok(MonotonicityReport { replicas, checks })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailCell {
    pub x: f64,
    pub count: u64,
    pub p: f64,
    pub used: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KestenReport {
    pub cells: Vec<TailCell>,
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    /// `sup_x P̂(X^{-1/2} <= x)/x` over `x ∈ [10⁻², 1]`.
    pub linear_bound_sup: f64,
}

/// Minimum count of samples above a grid point for it to enter the fit.
pub const MIN_TAIL_COUNT: u64 = 100;

/// Log-log regression of `P̂(X > x)` on the grid points with at least
/// [`MIN_TAIL_COUNT`] exceedances and not the whole sample.
pub fn kesten_right_tail(samples: &[f64], x_grid: &[f64]) -> Result<KestenReport> {
    let s = sorted(samples);
    let n = s.len() as u64;
    if n == 0 {
        return Err(Error::InsufficientTailData { usable: 0, needed: 3 });
    }
    let cells: Vec<TailCell> = x_grid
        .iter()
        .map(|&x| {
            let count = (s.len() - s.partition_point(|&v| v <= x)) as u64;
            TailCell { x, count, p: count as f64 / n as f64, used: x > 0.0 && count >= MIN_TAIL_COUNT && count < n }
        })
        .collect();
    let used: Vec<&TailCell> = cells.iter().filter(|c| c.used).collect();
    if used.len() < 3 {
        return Err(Error::InsufficientTailData { usable: used.len(), needed: 3 });
    }
    let xs: Vec<f64> = used.iter().map(|c| c.x.ln()).collect();
    let ys: Vec<f64> = used.iter().map(|c| c.p.ln()).collect();
    let fit = least_squares(&xs, &ys).ok_or(Error::InsufficientTailData { usable: used.len(), needed: 3 })?;
    Ok(KestenReport {
        cells,
        slope: fit.slope,
        intercept: fit.intercept,
        slope_se: fit.slope_se,
        linear_bound_sup: linear_bound_sup(&s),
    })
}

/// `sup_x P̂(X^{-1/2} <= x) / x` over a log grid of `x ∈ [10⁻², 1]`, for
/// sorted samples of `X`. Since `X^{-1/2} <= x ⟺ X >= x⁻²`.
pub fn linear_bound_sup(sorted_x: &[f64]) -> f64 {
    let n = sorted_x.len() as f64;
    (0..=80)
        .map(|i| {
            let x = 10f64.powf(-2.0 + 2.0 * i as f64 / 80.0);
            let count = sorted_x.len() - sorted_x.partition_point(|&v| v < x.powi(-2));
            count as f64 / n / x
        })
        .fold(0.0, f64::max)
}

/// Bounded uniformly continuous test functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestFunction {
    /// `1` below `c/2`, `2(c - x)/c` on `[c/2, c]`, `0` above `c`.
    Ramp { c: f64 },
    Constant { value: f64 },
}

impl TestFunction {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            TestFunction::Ramp { c } => {
                if x < 0.5 * c {
                    1.0
                } else if x <= c {
                    2.0 * (c - x) / c
                } else {
                    0.0
                }
            }
            TestFunction::Constant { value } => value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErgodicReport {
    pub replica_mean: f64,
    pub replica_se: f64,
    pub time_average: f64,
    pub window_means: Vec<f64>,
    pub window_min: f64,
    pub window_max: f64,
    /// `sqrt(replica_se² + batch-means SE²)`.
    pub se: f64,
    pub bracketed: bool,
}

/// Compares time averages of `f` along `path` (already restricted to the
/// subsequence of interest) with `E[f(X)]` estimated from `replica_values`.
pub fn ergodic_average_check(path: &[f64], f: TestFunction, replica_values: &[f64], windows: usize) -> Result<ErgodicReport> {
    if path.is_empty() || replica_values.is_empty() {
        return Err(Error::param("ergodic check needs a non-empty path and replica sample"));
    }
    let windows = windows.clamp(1, path.len());
    let rep: RunningMoments = replica_values.iter().map(|&x| f.eval(x)).collect();
    let vals: Vec<f64> = path.iter().map(|&x| f.eval(x)).collect();
    let time_average = vals.iter().sum::<f64>() / vals.len() as f64;
    let size = vals.len() / windows;
    let window_means: Vec<f64> =
        vals.chunks(size.max(1)).take(windows).map(|w| w.iter().sum::<f64>() / w.len() as f64).collect();
    let wm: RunningMoments = window_means.iter().copied().collect();
    let batch_se = if window_means.len() > 1 { wm.std_error() } else { 0.0 };
    let replica_se = if rep.count() > 1 { rep.std_error() } else { 0.0 };
    let se = (replica_se * replica_se + batch_se * batch_se).sqrt();
    let window_min = window_means.iter().copied().fold(f64::INFINITY, f64::min);
    let window_max = window_means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = rep.mean();
    Ok(ErgodicReport {
        replica_mean: mean,
        replica_se,
        time_average,
        bracketed: window_min - 3.0 * se - 1e-12 <= mean && mean <= window_max + 3.0 * se + 1e-12,
        window_means,
        window_min,
        window_max,
        se,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleParams {
    pub eps_tilde: f64,
    pub lambda_star: f64,
    pub eps: f64,
    pub y_star: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeSchedule {
    pub params: ScheduleParams,
    pub a0: f64,
    /// `a_0, …, a_{n_max}`.
    pub a_seq: Vec<f64>,
    /// `k_n = ⌈a_n⌉`.
    pub k_seq: Vec<u64>,
    /// Left side of the upper inequality for `n = 1, …, n_max - 1`.
    pub upper_values: Vec<f64>,
    /// Left side of the lower inequality for `n = 1, …, n_max - 1`.
    pub lower_values: Vec<f64>,
    /// First `n` from which the upper inequality holds through `n_max - 1`.
    pub upper_burn_in: usize,
    pub lower_burn_in: usize,
    pub step_at_least_one: bool,
    pub k_strictly_increasing: bool,
    pub gamma: f64,
    /// `max_{1<=m<=n} k_m^γ / m` at `n = 10, 100, …` and `n_max`.
    pub k_bound_history: Vec<(usize, f64)>,
}

impl EnvelopeSchedule {
    pub fn k_bound(&self) -> f64 {
        self.k_bound_history.last().map_or(f64::NAN, |r| r.1)
    }
}

/// Builds `a_{n+1} = a_n + f(a_n)`, `k_n = ⌈a_n⌉` with
/// `f(x) = (log ε̃ - log H^{-1}(log x / (λ*(1+ε)))) / log y*`, starting from
/// the smallest `a_0 >= 2` with `f(a_0) >= 1`, and checks the two
/// inequalities on `H^{-1}(log k_{n+1}/(λ*(1+ε))) y*^{k_{n+1}-k_n}` and the
/// growth bound `k_n^γ <= K n` at `γ = 0.9`.
pub fn build_envelope_schedule(p: ScheduleParams, scale: &TailScale, n_max: usize) -> Result<EnvelopeSchedule> {
    let positive = |v: f64| v > 0.0 && v.is_finite();
    if !(positive(p.eps_tilde) && positive(p.lambda_star) && positive(p.eps)) {
        return Err(Error::param("eps_tilde, lambda_star and eps must be positive"));
    }
    if !(p.y_star > 1.0 && p.y_star.is_finite()) {
        return Err(Error::param(format!("y_star must exceed 1, got {}", p.y_star)));
    }
    if !(p.c > 0.0 && p.c < p.eps_tilde * p.y_star) {
        return Err(Error::param(format!("c must lie in (0, eps_tilde * y_star), got {}", p.c)));
    }
    if n_max < 2 {
        return Err(Error::param("n_max must be at least 2"));
    }
    scale.validate()?;
    let denom = p.lambda_star * (1.0 + p.eps);
    let hinv = |x: f64| scale.inverse(x.ln() / denom);
    let ln_y = p.y_star.ln();
    let f = |x: f64| -> Result<f64> { Ok((p.eps_tilde.ln() - hinv(x)?.ln()) / ln_y) };

    let mut a0 = 2.0;
    if f(a0)? < 1.0 {
        let (mut lo, mut hi) = (2.0, 4.0);
        while f(hi)? < 1.0 {
            lo = hi;
            hi *= 2.0;
            if hi > 1e300 {
                return Err(Error::param("no a0 with f(a0) >= 1"));
            }
        }
        while hi - lo > 1e-12 * hi {
            let mid = 0.5 * (lo + hi);
            if f(mid)? >= 1.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        a0 = hi;
    }
    let mut a_seq = Vec::with_capacity(n_max + 1);
    a_seq.push(a0);
    for _ in 0..n_max {
        let a = *a_seq.last().expect("non-empty");
        a_seq.push(a + f(a)?);
    }
    let k_seq: Vec<u64> = a_seq.iter().map(|a| a.ceil() as u64).collect();
    let mut upper_values = Vec::with_capacity(n_max);
    let mut lower_values = Vec::with_capacity(n_max);
    for n in 1..n_max {
        let h = hinv(k_seq[n + 1] as f64)?;
        let d = (k_seq[n + 1] - k_seq[n]) as f64;
        upper_values.push(h * p.y_star.powf(d - 1.0));
        lower_values.push(h * p.y_star.powf(d));
    }
    let burn_in = |ok: &dyn Fn(f64) -> bool, vals: &[f64]| vals.iter().rposition(|&v| !ok(v)).map_or(1, |i| i + 2);
    let upper_burn_in = burn_in(&|v| v < p.eps_tilde, &upper_values);
    let lower_burn_in = burn_in(&|v| v >= p.c, &lower_values);
    let gamma = 0.9;
    let mut k_bound_history = Vec::new();
    let mut k = 0.0f64;
    let mut next_report = 10;
    for n in 1..=n_max {
        k = k.max((k_seq[n] as f64).powf(gamma) / n as f64);
        if n == next_report || n == n_max {
            k_bound_history.push((n, k));
            next_report *= 10;
        }
    }
    Ok(EnvelopeSchedule {
        params: p,
        a0,
        step_at_least_one: a_seq.windows(2).all(|w| w[1] >= w[0] + 1.0),
        k_strictly_increasing: k_seq.windows(2).all(|w| w[1] > w[0]),
        a_seq,
        k_seq,
        upper_values,
        lower_values,
        upper_burn_in,
        lower_burn_in,
        gamma,
        k_bound_history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg(law: LawSpec, x0: f64, n_steps: u64) -> ChainConfig {
        ChainConfig { law, x0, n_steps, replicas: 1, seed: 1, scale: TailScale::h1() }
    }

    #[test]
    fn deterministic_recursion() {
        let run = run_chain(&cfg(LawSpec::degenerate(0.5, 1.0), 0.0, 10), &RunOptions::default()).unwrap();
        let pts = &run.replicas[0].points;
        assert_eq!(pts[3], (3, 1.75));
        for &(n, x) in pts {
            assert_relative_eq!(x, 2.0 * (1.0 - 0.5f64.powi(n as i32)), max_relative = 1e-15);
        }
        let run = run_chain(&cfg(LawSpec::degenerate(0.0, 3.0), 5.0, 10), &RunOptions::default()).unwrap();
        assert!(run.replicas[0].points[1..].iter().all(|p| p.1 == 3.0));
    }

    #[test]
    fn overflow_aborts_replica() {
        let run = run_chain(&cfg(LawSpec::degenerate(10.0, 1.0), 0.0, 1000), &RunOptions::default()).unwrap();
        let o = run.replicas[0].overflow.unwrap();
        assert!(o.value > OVERFLOW_LIMIT && o.step < 1000);
    }

    #[test]
    fn thinning_is_geometric_for_long_runs() {
        let opts = RunOptions { thinning: Thinning::Auto, envelope_start: 3 };
        let run = run_chain(&cfg(LawSpec::degenerate(0.5, 1.0), 0.0, 200_000), &opts).unwrap();
        let pts = &run.replicas[0].points;
        assert!(pts.len() < 1000, "{}", pts.len());
        assert_eq!(pts.last().unwrap().0, 200_000);
    }

    #[test]
    fn series_examples() {
        let law = LawSpec::degenerate(0.5, 1.0).build().unwrap();
        let mut rng = stream(0, 0);
        let s = simulate_series(&law, 60, &mut rng).unwrap();
        assert_relative_eq!(s.sum, 2.0 * (1.0 - 0.5f64.powi(60)), max_relative = 1e-15);
        assert!(s.converged);
        assert_eq!(simulate_series(&law, 1, &mut rng).unwrap().sum, 1.0);
    }

    #[test]
    fn marginals_match_run_chain() {
        let law = LawSpec::FlemingViot.build().unwrap();
        let m = simulate_marginals(&law, 0.0, &[0, 1, 7], 5, 9).unwrap();
        let mut c = cfg(LawSpec::FlemingViot, 0.0, 7);
        c.replicas = 5;
        c.seed = 9;
        let run = run_chain(&c, &RunOptions::default()).unwrap();
        for (r, rep) in run.replicas.iter().enumerate() {
            assert_eq!(m.at(0).unwrap()[r], 0.0);
            assert_eq!(m.at(1).unwrap()[r], rep.points[1].1);
            assert_eq!(m.at(7).unwrap()[r], rep.last.1);
        }
    }

    #[test]
    fn degenerate_tail_is_censored() {
        let est = estimate_left_tail(&[1.0; 1000], &TailScale::h1(), &[0.5, 0.2]).unwrap();
        assert!(est.cells.iter().all(|c| c.censored));
    }

    #[test]
    fn monotonicity_for_point_masses() {
        let law = LawSpec::degenerate(0.5, 1.0).build().unwrap();
        let r = stochastic_monotonicity_check(&law, &[0, 1, 2, 5], 100, 1, 0.01).unwrap();
        assert!(r.ok());
        assert!(r.checks.iter().all(|c| c.max_violation == 0.0));
    }

    #[test]
    fn kesten_on_pareto_and_bounded() {
        let mut rng = stream(3, 0);
        let pareto: Vec<f64> = (0..1_000_000).map(|_| 1.0 / (1.0 - rng.random::<f64>())).collect();
        let grid: Vec<f64> = (0..=10).map(|i| 10f64.powf(1.0 + i as f64 / 10.0)).collect();
        let k = kesten_right_tail(&pareto, &grid).unwrap();
        assert!((k.slope + 1.0).abs() <= 0.03, "{}", k.slope);
        let bounded = vec![2.0; 10_000];
        let grid: Vec<f64> = (0..=10).map(|i| 10f64.powf(i as f64 / 10.0)).collect();
        assert!(matches!(kesten_right_tail(&bounded, &grid), Err(Error::InsufficientTailData { .. })));
    }

    #[test]
    fn ergodic_trivial_cases() {
        let run = run_chain(&cfg(LawSpec::degenerate(0.5, 1.0), 2.0, 1000), &RunOptions::default()).unwrap();
        let path: Vec<f64> = run.replicas[0].points[1..].iter().map(|p| p.1).collect();
        let f = TestFunction::Ramp { c: 3.0 };
        let r = ergodic_average_check(&path, f, &[2.0; 10], 10).unwrap();
        assert_relative_eq!(r.time_average, f.eval(2.0), max_relative = 1e-12);
        assert!(r.bracketed);
        let r = ergodic_average_check(&path, TestFunction::Constant { value: 1.0 }, &[0.3, 7.0], 10).unwrap();
        assert_eq!((r.time_average, r.replica_mean), (1.0, 1.0));
    }

    #[test]
    fn ramp_shape() {
        let f = TestFunction::Ramp { c: 0.3 };
        assert_eq!(f.eval(0.1), 1.0);
        assert_relative_eq!(f.eval(0.225), 0.5, max_relative = 1e-14);
        assert_eq!(f.eval(0.31), 0.0);
    }

    #[test]
    fn envelope_of_constant_chain_grows() {
        let xs = vec![2.0; 10_000];
        let r = envelope_statistic(&xs, &TailScale::h1(), 3);
        assert_eq!(r.argmin, 3);
        assert_relative_eq!(r.final_value, 2.0 * 3f64.ln(), max_relative = 1e-14);
    }

    #[test]
    fn schedule_examples() {
        let p = ScheduleParams { eps_tilde: 1.0, lambda_star: 0.5, eps: 0.1, y_star: 2.0, c: 0.25 };
        let s = build_envelope_schedule(p, &TailScale::h1(), 10_000).unwrap();
        assert!(s.step_at_least_one && s.k_strictly_increasing);
        assert_relative_eq!(s.a0, 1.1f64.exp(), max_relative = 1e-10);
        let n = s.a_seq.len() - 1;
        assert!((s.a_seq[n] / s.a_seq[n - 1] - 1.0).abs() < 1e-3);
        let bad = ScheduleParams { c: 2.0, ..p };
        assert!(build_envelope_schedule(bad, &TailScale::h1(), 10).is_err());
    }
}
