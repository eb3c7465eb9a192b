//! Monte Carlo moments behind the convergence condition
//! `E[log A] < 0` and `E[log⁺ B] < ∞`.

use serde::Serialize;

use super::CoefficientLaw;
use crate::error::{Error, Result};
use crate::par::map_blocks_reduce;
use crate::rng::stream;
use crate::stats::RunningMoments;

const BLOCK: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentDiagnostics {
    pub n: u64,
    /// `-∞` when `A = 0` has positive empirical mass.
    pub e_log_a: f64,
    pub se_log_a: f64,
    pub e_log_plus_b: f64,
    pub se_log_plus_b: f64,
    pub e_sqrt_a: f64,
    pub se_sqrt_a: f64,
    pub convergence_condition_met: bool,
}

#[derive(Clone, Default)]
struct Acc {
    log_a: RunningMoments,
    zero_a: u64,
    log_plus_b: RunningMoments,
    sqrt_a: RunningMoments,
}

impl Acc {
    fn merge(self, o: Acc) -> Acc {
        Acc {
            log_a: self.log_a.merge(o.log_a),
            zero_a: self.zero_a + o.zero_a,
            log_plus_b: self.log_plus_b.merge(o.log_plus_b),
            sqrt_a: self.sqrt_a.merge(o.sqrt_a),
        }
    }

    fn push(&mut self, a: f64, b: f64) {
        if a > 0.0 {
            self.log_a.push(a.ln());
        } else {
            self.zero_a += 1;
        }
        self.log_plus_b.push(b.ln().max(0.0));
        self.sqrt_a.push(a.sqrt());
    }
}

/// Estimates `E[log A]`, `E[log⁺ B]` and `E[A^{1/2}]` from `n` draws.
pub fn moment_diagnostics(law: &CoefficientLaw, n: u64, seed: u64) -> Result<MomentDiagnostics> {
    if n < 1000 {
        return Err(Error::param(format!("moment diagnostics need n >= 1000, got {n}")));
    }
    let acc = if law.is_sequential() {
        let mut rng = stream(seed, 0);
        let mut s = law.sampler();
        let mut acc = Acc::default();
        for _ in 0..n {
            let c = s.draw(&mut rng)?;
            acc.push(c.a, c.b);
        }
        acc
    } else {
        map_blocks_reduce(
            n,
            BLOCK,
            |blk, _, len| {
                let mut rng = stream(seed, blk);
                let mut acc = Acc::default();
                for _ in 0..len {
                    let c = law.sample(&mut rng).expect("stateless law");
                    acc.push(c.a, c.b);
                }
                acc
            },
            Acc::default(),
            Acc::merge,
        )
    };
    let (e_log_a, se_log_a) = if acc.zero_a > 0 {
        (f64::NEG_INFINITY, 0.0)
    } else {
        (acc.log_a.mean(), acc.log_a.std_error())
    };
    Ok(MomentDiagnostics {
        n,
        e_log_a,
        se_log_a,
        e_log_plus_b: acc.log_plus_b.mean(),
        se_log_plus_b: acc.log_plus_b.std_error(),
        e_sqrt_a: acc.sqrt_a.mean(),
        se_sqrt_a: acc.sqrt_a.std_error(),
        convergence_condition_met: e_log_a + 3.0 * se_log_a < 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws::LawSpec;

    #[test]
    fn degenerate_law_is_exact() {
        let law = LawSpec::degenerate(0.5, 1.0).build().unwrap();
        let d = moment_diagnostics(&law, 1000, 1).unwrap();
        assert!((d.e_log_a - 0.5f64.ln()).abs() < 1e-15);
        assert_eq!(d.se_log_a, 0.0);
        assert_eq!(d.e_log_plus_b, 0.0);
        assert!(d.convergence_condition_met);
    }

    #[test]
    fn zero_a_gives_minus_infinity() {
        let law = LawSpec::degenerate(0.0, 2.0).build().unwrap();
        let d = moment_diagnostics(&law, 1000, 1).unwrap();
        assert_eq!(d.e_log_a, f64::NEG_INFINITY);
        assert!(d.convergence_condition_met);
    }

    #[test]
    fn too_few_samples() {
        let law = LawSpec::FlemingViot.build().unwrap();
        assert!(moment_diagnostics(&law, 999, 1).is_err());
    }
}
