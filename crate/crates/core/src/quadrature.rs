//! Adaptive Gauss–Kronrod (7/15) quadrature, its log-space variant and a
//! nested two-dimensional driver.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::special::log_sum_exp;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Tolerances and limits for the adaptive driver.
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_segments: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 0.0, max_segments: 20_000 }
    }
}

impl QuadOptions {
    pub fn rel(rel_tol: f64) -> Self {
        Self { rel_tol, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Segment {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(centre - dx) + f(centre + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    Segment { a, b, value: k * half, error: ((k - g) * half).abs() }
}

/// Integrates `f` over `[a, b]` with the given initial breakpoints.
pub fn integrate_with_breaks<F: FnMut(f64) -> f64>(
    mut f: F,
    breaks: &[f64],
    opts: QuadOptions,
) -> Result<QuadResult> {
    let mut points: Vec<f64> = breaks.iter().copied().filter(|x| x.is_finite()).collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    if points.len() < 2 {
        return Ok(QuadResult { value: 0.0, error: 0.0, evaluations: 0 });
    }
    let mut heap = BinaryHeap::new();
    let (mut total, mut err) = (0.0, 0.0);
    let mut evals = 0usize;
    for w in points.windows(2) {
        let s = kronrod(&mut f, w[0], w[1]);
        evals += 15;
        total += s.value;
        err += s.error;
        heap.push(s);
    }
    loop {
        if !total.is_finite() || !err.is_finite() {
            return Err(Error::Quadrature {
                eps: None,
                message: format!("non-finite integrand value (estimate {total})"),
            });
        }
        if err <= opts.abs_tol.max(opts.rel_tol * total.abs()) {
            return Ok(QuadResult { value: total, error: err, evaluations: evals });
        }
        if heap.len() >= opts.max_segments {
            return Err(Error::Quadrature {
                eps: None,
                message: format!(
                    "segment limit {} reached (estimate {total:e}, error {err:e})",
                    opts.max_segments
                ),
            });
        }
        let worst = heap.pop().expect("heap is non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // cannot split further; accept what we have
            return Ok(QuadResult { value: total, error: err, evaluations: evals });
        }
        let left = kronrod(&mut f, worst.a, mid);
        let right = kronrod(&mut f, mid, worst.b);
        evals += 30;
        total += left.value + right.value - worst.value;
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
}

/// Integrates `f` over `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult> {
    integrate_with_breaks(f, &[a, b], opts)
}

/// Integrates `f` over `[a, ∞)` via `x = a + t/(1-t)`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(mut f: F, a: f64, opts: QuadOptions) -> Result<QuadResult> {
    integrate_with_breaks(
        |t| {
            if t >= 1.0 {
                return 0.0;
            }
            let s = 1.0 - t;
            let v = f(a + t / s);
            if v == 0.0 {
                0.0
            } else {
                v / (s * s)
            }
        },
        &[0.0, 0.5, 0.9, 0.99, 1.0],
        opts,
    )
}

/// `ln ∫_a^b exp(log_f(x)) dx` computed without underflow.
///
/// The integrand is scanned for its peak, the interval is split into panels
/// around it, every panel is integrated after a common shift and the panel
/// masses are combined by log-sum-exp.
pub fn log_integrate<F: Fn(f64) -> f64>(
    log_f: F,
    a: f64,
    b: f64,
    extra_breaks: &[f64],
    opts: QuadOptions,
) -> Result<f64> {
    const SCAN: usize = 4000;
    const PANELS: usize = 16;
    let mut peak_x = a;
    let mut peak = f64::NEG_INFINITY;
    for i in 0..=SCAN {
        let x = a + (b - a) * i as f64 / SCAN as f64;
        let v = log_f(x);
        if v > peak {
            peak = v;
            peak_x = x;
        }
    }
    if peak == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    if !peak.is_finite() {
        return Err(Error::Quadrature { eps: None, message: "log-integrand is +inf or NaN".into() });
    }
    let h = (b - a) / SCAN as f64;
    let mut breaks: Vec<f64> = (0..=PANELS).map(|i| a + (b - a) * i as f64 / PANELS as f64).collect();
    breaks.extend([peak_x, (peak_x - h).max(a), (peak_x + h).min(b)]);
    breaks.extend(extra_breaks.iter().copied().filter(|&x| x > a && x < b));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut logs = Vec::with_capacity(breaks.len());
    for w in breaks.windows(2) {
        let r = integrate(|x| (log_f(x) - peak).exp(), w[0], w[1], opts)?;
        if r.value > 0.0 {
            logs.push(r.value.ln());
        }
    }
    Ok(peak + log_sum_exp(&logs))
}

/// Nested adaptive quadrature of `f(x, y)` over `[ax, bx] × [ay, by]`.
pub fn integrate_2d<F: Fn(f64, f64) -> f64>(
    f: F,
    (ax, bx): (f64, f64),
    (ay, by): (f64, f64),
    opts: QuadOptions,
) -> Result<QuadResult> {
    let inner_opts = QuadOptions { rel_tol: opts.rel_tol * 0.1, abs_tol: opts.abs_tol * 0.1, ..opts };
    let mut failure: Option<Error> = None;
    let mut inner_evals = 0usize;
    let outer = integrate(
        |x| match integrate(|y| f(x, y), ay, by, inner_opts) {
            Ok(r) => {
                inner_evals += r.evaluations;
                r.value
            }
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        ax,
        bx,
        opts,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let mut r = outer?;
    r.evaluations += inner_evals;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| 3.0 * x * x, 0.0, 2.0, QuadOptions::default()).unwrap();
        assert_relative_eq!(r.value, 8.0, max_relative = 1e-14);
    }

    #[test]
    fn oscillatory_and_peaked() {
        let r = integrate(|x| x.sin(), 0.0, std::f64::consts::PI, QuadOptions::default()).unwrap();
        assert_relative_eq!(r.value, 2.0, max_relative = 1e-12);
        let r = integrate(|x| 1.0 / (1e-4 + (x - 0.3).powi(2)), 0.0, 1.0, QuadOptions::default()).unwrap();
        let exact = 100.0 * ((70.0f64).atan() + (30.0f64).atan());
        assert_relative_eq!(r.value, exact, max_relative = 1e-9);
    }

    #[test]
    fn semi_infinite_gaussian() {
        let r = integrate_to_infinity(|x| (-x * x).exp(), 0.0, QuadOptions::default()).unwrap();
        assert_relative_eq!(r.value, std::f64::consts::PI.sqrt() / 2.0, max_relative = 1e-10);
    }

    #[test]
    fn log_space_handles_underflow() {
        // ∫_0^1 e^{-x/ε} dx = ε (1 - e^{-1/ε}) with ε = 1e-4
        let eps = 1e-4;
        let l = log_integrate(|x| -x / eps, 0.0, 1.0, &[], QuadOptions::default()).unwrap();
        assert_relative_eq!(l, eps.ln(), max_relative = 1e-10);
        // shifted far below the representable range
        let l = log_integrate(|x| -1e5 - x / eps, 0.0, 1.0, &[], QuadOptions::default()).unwrap();
        assert_relative_eq!(l, -1e5 + eps.ln(), max_relative = 1e-12);
    }

    #[test]
    fn two_dimensional_product() {
        let r = integrate_2d(|x, y| x * y.exp(), (0.0, 1.0), (0.0, 2.0), QuadOptions::rel(1e-10)).unwrap();
        assert_relative_eq!(r.value, 0.5 * (2f64.exp() - 1.0), max_relative = 1e-10);
    }
}
