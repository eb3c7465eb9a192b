//! Special functions needed by the samplers and oracles.

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `ln(e^a + e^b)` without overflow.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `ln(sum_i e^{x_i})`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `ln(1 - e^{-x})` for `x > 0`.
#[inline]
pub fn ln_one_minus_exp_neg(x: f64) -> f64 {
    if x < std::f64::consts::LN_2 {
        (-(-x).exp_m1()).ln()
    } else {
        (-(-x).exp()).ln_1p()
    }
}

/// Natural log of the generalized exponential integral
/// `E_n(x) = ∫_1^∞ e^{-xt} t^{-n} dt` for `x > 0`, `n >= 1`.
///
/// Continued fraction (modified Lentz) for `x > 1`, power series otherwise.
pub fn ln_expint(n: u32, x: f64) -> f64 {
    assert!(n >= 1 && x > 0.0, "ln_expint needs n >= 1 and x > 0");
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;
    const MAX_ITER: u32 = 10_000;
    let nm1 = n - 1;
    if x > 1.0 {
        let mut b = x + n as f64;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=MAX_ITER {
            let an = -(i as f64) * (nm1 as f64 + i as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        h.ln() - x
    } else {
        let mut ans = if nm1 != 0 {
            1.0 / nm1 as f64
        } else {
            -x.ln() - EULER_GAMMA
        };
        let mut fact = 1.0;
        for i in 1..=MAX_ITER {
            fact *= -x / i as f64;
            let del = if i != nm1 {
                -fact / (i as f64 - nm1 as f64)
            } else {
                let psi = -EULER_GAMMA + (1..=nm1).map(|k| 1.0 / k as f64).sum::<f64>();
                fact * (-x.ln() + psi)
            };
            ans += del;
            if del.abs() < ans.abs() * EPS {
                break;
            }
        }
        ans.ln()
    }
}

/// `ln ∫_0^u e^{-λ/s} ds` for `u > 0`, `λ > 0`.
///
/// Substituting `s = 1/r` gives `u E_2(λ/u)`.
pub fn ln_integral_exp_inv(lambda: f64, u: f64) -> f64 {
    u.ln() + ln_expint(2, lambda / u)
}
