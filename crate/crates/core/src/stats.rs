//! Small statistical toolkit: running moments, binomial intervals,
//! Kolmogorov–Smirnov distances, DKW bands and least squares.

/// Two-sided 95% standard normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Welford accumulator for mean and variance. Mergeable (Chan et al.).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningMoments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningMoments {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(self, other: Self) -> Self {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * (other.n as f64 / n as f64);
        let m2 = self.m2 + other.m2 + delta * delta * (self.n as f64 * other.n as f64 / n as f64);
        Self { n, mean, m2 }
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for RunningMoments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Self::new();
        for x in iter {
            m.push(x);
        }
        m
    }
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(hits: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = hits as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    let lo = if hits == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if hits == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// One-sample KS distance of sorted data against a continuous CDF.
pub fn ks_one_sample(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0_f64, |d, (i, &x)| {
        let f = cdf(x);
        let above = (i + 1) as f64 / n - f;
        let below = f - i as f64 / n;
        d.max(above).max(below)
    })
}

/// Two-sample KS distance between sorted samples.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    sup_cdf_difference(a, b).abs_max()
}

/// Signed extremes of `F_a - F_b` over the real line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdfGap {
    /// `sup_x (F_a(x) - F_b(x))`, nonnegative.
    pub a_over_b: f64,
    /// `sup_x (F_b(x) - F_a(x))`, nonnegative.
    pub b_over_a: f64,
}

impl CdfGap {
    pub fn abs_max(&self) -> f64 {
        self.a_over_b.max(self.b_over_a)
    }
}

/// Walks two sorted samples and records the largest one-sided gaps between
/// their empirical CDFs.
pub fn sup_cdf_difference(a: &[f64], b: &[f64]) -> CdfGap {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut gap = CdfGap { a_over_b: 0.0, b_over_a: 0.0 };
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => break,
        };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        let d = i as f64 / na - j as f64 / nb;
        gap.a_over_b = gap.a_over_b.max(d);
        gap.b_over_a = gap.b_over_a.max(-d);
    }
    gap
}

/// Dvoretzky–Kiefer–Wolfowitz half-width at confidence `1 - alpha`.
pub fn dkw_epsilon(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}

/// Asymptotic two-sample KS critical value at level `alpha`.
pub fn ks_two_sample_critical(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    let (n, m) = (n as f64, m as f64);
    c * ((n + m) / (n * m)).sqrt()
}

/// Ordinary least-squares line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
}

pub fn least_squares(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_se = if n > 2 {
        let rss: f64 = xs
            .iter()
            .zip(ys)
            .map(|(&x, &y)| {
                let r = y - intercept - slope * x;
                r * r
            })
            .sum();
        (rss / (nf - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    Some(LinearFit { slope, intercept, slope_se })
}

/// Least squares accumulated one point at a time (Welford co-moments).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OnlineRegression {
    n: u64,
    mx: f64,
    my: f64,
    sxx: f64,
    syy: f64,
    sxy: f64,
}

impl OnlineRegression {
    #[inline]
    pub fn push(&mut self, x: f64, y: f64) {
        self.n += 1;
        let k = self.n as f64;
        let dx = x - self.mx;
        let dy = y - self.my;
        self.mx += dx / k;
        self.my += dy / k;
        self.sxx += dx * (x - self.mx);
        self.syy += dy * (y - self.my);
        self.sxy += dx * (y - self.my);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn fit(&self) -> Option<LinearFit> {
        if self.n < 2 || self.sxx == 0.0 {
            return None;
        }
        let slope = self.sxy / self.sxx;
        let slope_se = if self.n > 2 {
            let rss = (self.syy - slope * self.sxy).max(0.0);
            (rss / (self.n as f64 - 2.0) / self.sxx).sqrt()
        } else {
            f64::NAN
        };
        Some(LinearFit { slope, intercept: self.my - slope * self.mx, slope_se })
    }
}

/// Lag-1 sample autocorrelation.
pub fn lag1_autocorrelation(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 3 {
        return f64::NAN;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    let cov: f64 = xs.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
    cov / var
}

/// Sorts a copy of the data, NaNs last.
pub fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Empirical quantile by the inverse of the empirical CDF.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let k = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[k - 1]
}

/// Fraction of sorted data strictly below `x`.
pub fn fraction_below(sorted: &[f64], x: f64) -> f64 {
    sorted.partition_point(|&v| v < x) as f64 / sorted.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn moments_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let whole: RunningMoments = xs.iter().copied().collect();
        let left: RunningMoments = xs[..313].iter().copied().collect();
        let right: RunningMoments = xs[313..].iter().copied().collect();
        let merged = left.merge(right);
        assert_eq!(merged.count(), 1000);
        assert_relative_eq!(merged.mean(), whole.mean(), epsilon = 1e-12);
        assert_relative_eq!(merged.variance(), whole.variance(), epsilon = 1e-10);
    }

    #[test]
    fn constant_stream_has_exact_mean() {
        let m: RunningMoments = std::iter::repeat(0.5f64.ln()).take(1000).collect();
        assert_eq!(m.mean(), 0.5f64.ln());
        assert_eq!(m.variance(), 0.0);
    }

    #[test]
    fn wilson_contains_point_estimate() {
        let (lo, hi) = wilson_interval(30, 1000, Z95);
        assert!(lo < 0.03 && 0.03 < hi);
        assert_eq!(wilson_interval(0, 10, Z95).0, 0.0);
        assert_eq!(wilson_interval(10, 10, Z95).1, 1.0);
    }

    #[test]
    fn two_sample_ks_of_shifted_grids() {
        let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..100).map(|i| i as f64 + 10.0).collect();
        assert_relative_eq!(ks_two_sample(&a, &b), 0.10, epsilon = 1e-12);
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        let gap = sup_cdf_difference(&a, &b);
        assert_relative_eq!(gap.a_over_b, 0.10, epsilon = 1e-12);
        assert_eq!(gap.b_over_a, 0.0);
    }

    #[test]
    fn one_sample_ks_of_uniform_grid() {
        let xs: Vec<f64> = (0..10).map(|i| (i as f64 + 0.5) / 10.0).collect();
        assert_relative_eq!(ks_one_sample(&xs, |x| x), 0.05, epsilon = 1e-12);
    }

    #[test]
    fn least_squares_recovers_line() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.5 * x).collect();
        let fit = least_squares(&xs, &ys).unwrap();
        assert_relative_eq!(fit.slope, -0.5, epsilon = 1e-12);
        assert_relative_eq!(fit.intercept, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn online_regression_matches_batch() {
        let xs: Vec<f64> = (0..200).map(|i| 1e6 + i as f64).collect();
        let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| 0.3 * x + ((i * 7919) % 13) as f64).collect();
        let batch = least_squares(&xs, &ys).unwrap();
        let mut on = OnlineRegression::default();
        xs.iter().zip(&ys).for_each(|(&x, &y)| on.push(x, y));
        let fit = on.fit().unwrap();
        assert_relative_eq!(fit.slope, batch.slope, max_relative = 1e-10);
        assert_relative_eq!(fit.intercept, batch.intercept, max_relative = 1e-8);
        assert_relative_eq!(fit.slope_se, batch.slope_se, max_relative = 1e-8);
    }

    #[test]
    fn quantile_and_fraction() {
        let xs = sorted(&[3.0, 1.0, 2.0, 4.0]);
        assert_eq!(quantile_sorted(&xs, 0.5), 2.0);
        assert_eq!(fraction_below(&xs, 2.5), 0.5);
    }
}
