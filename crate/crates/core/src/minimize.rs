//! One-dimensional infimum over the open unit interval.
//!
//! Objectives arrive already mapped onto `u ∈ (0, 1)`; the limits at both
//! ends are supplied separately so that infima attained only in a limit
//! (for example at `y = ∞`) are still found. Values may be `+∞`.

/// Dense scan followed by golden-section polish.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSolver {
    /// Uniform grid points in `(0, 1)`.
    pub grid_points: usize,
    /// Log-spaced points near each end (down to `1e-14` from the end).
    pub edge_points: usize,
    /// Golden-section stops when `|Δu| <= rel_tol · min(u, 1 - u)`.
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for ScanSolver {
    fn default() -> Self {
        Self { grid_points: 20_000, edge_points: 200, rel_tol: 1e-10, max_iter: 300 }
    }
}

/// Where the infimum was found.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Argmin {
    Interior(f64),
    /// Limit `u → 0⁺`.
    LowerEnd,
    /// Limit `u → 1⁻`.
    UpperEnd,
    /// Objective is `+∞` everywhere.
    Nowhere,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub value: f64,
    pub at: Argmin,
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

impl ScanSolver {
    fn candidates(&self) -> Vec<f64> {
        let n = self.grid_points.max(4);
        let mut us: Vec<f64> = (1..n).map(|i| i as f64 / n as f64).collect();
        let lo = (1.0 / n as f64).log10();
        let hi = -14.0_f64;
        for k in 0..self.edge_points {
            let e = lo + (hi - lo) * (k + 1) as f64 / self.edge_points as f64;
            let d = 10f64.powf(e);
            us.push(d);
            us.push(1.0 - d);
        }
        us.retain(|&u| u > 0.0 && u < 1.0);
        us.sort_by(f64::total_cmp);
        us.dedup();
        us
    }

    /// Infimum of `obj` over `(0, 1)` together with the end limits.
    ///
    /// Ties are broken toward larger `u`.
    pub fn minimize<F: Fn(f64) -> f64>(&self, obj: F, at_zero: f64, at_one: f64) -> Minimum {
        let us = self.candidates();
        let vals: Vec<f64> = us.iter().map(|&u| obj(u)).collect();
        let mut best: Option<usize> = None;
        for (i, &v) in vals.iter().enumerate() {
            if v.is_nan() {
                continue;
            }
            match best {
                Some(b) if v > vals[b] => {}
                _ => best = Some(i),
            }
        }
        let mut result = Minimum { value: f64::INFINITY, at: Argmin::Nowhere };
        if let Some(b) = best.filter(|&b| vals[b] < f64::INFINITY) {
            let lo = if b == 0 { us[0] * 0.5 } else { us[b - 1] };
            let hi = if b + 1 == us.len() { 0.5 * (1.0 + us[b]) } else { us[b + 1] };
            let (u, v) = self.golden(&obj, lo, hi, us[b], vals[b]);
            result = Minimum { value: v, at: Argmin::Interior(u) };
        }
        if at_one <= result.value && !at_one.is_nan() && at_one < f64::INFINITY {
            result = Minimum { value: at_one, at: Argmin::UpperEnd };
        }
        if at_zero < result.value && !at_zero.is_nan() {
            result = Minimum { value: at_zero, at: Argmin::LowerEnd };
        }
        result
    }

    fn golden<F: Fn(f64) -> f64>(&self, obj: &F, mut a: f64, mut b: f64, seed_u: f64, seed_v: f64) -> (f64, f64) {
        let (mut best_u, mut best_v) = (seed_u, seed_v);
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let mut fc = obj(c);
        let mut fd = obj(d);
        for _ in 0..self.max_iter {
            let scale = a.min(1.0 - b).max(f64::MIN_POSITIVE);
            if (b - a).abs() <= self.rel_tol * scale.max(1e-300) {
                break;
            }
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - INV_PHI * (b - a);
                fc = obj(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + INV_PHI * (b - a);
                fd = obj(d);
            }
            for (u, v) in [(c, fc), (d, fd)] {
                if v < best_v || (v == best_v && u > best_u) {
                    best_u = u;
                    best_v = v;
                }
            }
        }
        (best_u, best_v)
    }
}
