//! Coefficient laws for `X = AX + B`.

pub mod diagnostics;
pub mod discontinuous;
pub mod empirical;
pub mod fv;
pub mod pqd;

use std::path::PathBuf;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ldm::LdmFunction;

pub use diagnostics::{moment_diagnostics, MomentDiagnostics};
pub use discontinuous::DiscontinuousLaw;
pub use empirical::{EmpiricalLaw, EmpiricalMode};
pub use fv::{sample_first_passage, sample_fv_step, sample_survivor_position, FvStepSample};
pub use pqd::PqdLaw;

/// One draw of the coefficient pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub a: f64,
    pub b: f64,
}

fn default_width() -> f64 {
    1.0
}

fn default_one() -> f64 {
    1.0
}

/// Law specification as it appears under `"law"` in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LawSpec {
    /// `A ~ U[a, a + width]` independent of `B`, with
    /// `P(B < x) = exp(-γ x^{-ρ})`, or `B ≡ b` when `b` is given.
    PqdSynthetic {
        #[serde(default = "default_one")]
        gamma: f64,
        a: f64,
        #[serde(default = "default_width")]
        width: f64,
        #[serde(default = "default_one")]
        rho: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b: Option<f64>,
    },
    DiscontinuousLdm {
        lambda1: f64,
        lambda2: f64,
    },
    FlemingViot,
    EmpiricalFile {
        path: PathBuf,
        #[serde(default)]
        mode: EmpiricalMode,
    },
}

impl LawSpec {
    pub fn fleming_viot() -> Self {
        LawSpec::FlemingViot
    }

    /// `A ≡ a`, `B ≡ b`.
    pub fn degenerate(a: f64, b: f64) -> Self {
        LawSpec::PqdSynthetic { gamma: 1.0, a, width: 0.0, rho: 1.0, b: Some(b) }
    }

    pub fn pqd(gamma: f64, a: f64, width: f64, rho: f64) -> Self {
        LawSpec::PqdSynthetic { gamma, a, width, rho, b: None }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LawSpec::PqdSynthetic { .. } => "pqd-synthetic",
            LawSpec::DiscontinuousLdm { .. } => "discontinuous-ldm",
            LawSpec::FlemingViot => "fleming-viot",
            LawSpec::EmpiricalFile { .. } => "empirical-file",
        }
    }

    pub fn build(&self) -> Result<CoefficientLaw> {
        CoefficientLaw::from_spec(self)
    }
}

/// Analytic facts known about a law.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LawMetadata {
    pub ess_inf_a: Option<f64>,
    pub closed_form_ldm: Option<LdmFunction>,
    pub has_density: bool,
}

/// A constructed, immutable coefficient law.
#[derive(Debug, Clone)]
pub enum CoefficientLaw {
    Pqd(PqdLaw),
    Discontinuous(DiscontinuousLaw),
    FlemingViot,
    Empirical(EmpiricalLaw),
}

impl CoefficientLaw {
    pub fn from_spec(spec: &LawSpec) -> Result<Self> {
        Ok(match spec {
            &LawSpec::PqdSynthetic { gamma, a, width, rho, b } => {
                CoefficientLaw::Pqd(PqdLaw::new(gamma, a, width, rho, b)?)
            }
            &LawSpec::DiscontinuousLdm { lambda1, lambda2 } => {
                CoefficientLaw::Discontinuous(DiscontinuousLaw::new(lambda1, lambda2)?)
            }
            LawSpec::FlemingViot => CoefficientLaw::FlemingViot,
            LawSpec::EmpiricalFile { path, mode } => CoefficientLaw::Empirical(EmpiricalLaw::from_path(path, *mode)?),
        })
    }

    pub fn metadata(&self) -> LawMetadata {
        match self {
            CoefficientLaw::Pqd(p) => p.metadata(),
            CoefficientLaw::Discontinuous(d) => LawMetadata {
                ess_inf_a: Some(0.0),
                closed_form_ldm: Some(LdmFunction::DiscontinuousClosedForm {
                    lambda1: d.lambda1(),
                    lambda2: d.lambda2(),
                }),
                has_density: true,
            },
            CoefficientLaw::FlemingViot => LawMetadata {
                ess_inf_a: Some(0.0),
                closed_form_ldm: Some(LdmFunction::FlemingViotClosedForm),
                has_density: true,
            },
            CoefficientLaw::Empirical(_) => LawMetadata::default(),
        }
    }

    /// Whether draws must come from a single [`Sampler`] in order.
    pub fn is_sequential(&self) -> bool {
        matches!(self, CoefficientLaw::Empirical(e) if e.mode() == EmpiricalMode::Sequential)
    }

    pub fn sampler(&self) -> Sampler<'_> {
        Sampler { law: self, cursor: 0 }
    }

    /// One draw from a stateless law. Sequential empirical laws need a
    /// [`Sampler`] and are rejected here.
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Coefficients> {
        match self {
            CoefficientLaw::Pqd(p) => Ok(p.sample(rng)),
            CoefficientLaw::Discontinuous(d) => {
                let (a, b) = d.sample(rng);
                Ok(Coefficients { a, b })
            }
            CoefficientLaw::FlemingViot => {
                let s = sample_fv_step(rng);
                Ok(Coefficients { a: s.a, b: s.b })
            }
            CoefficientLaw::Empirical(e) => {
                if e.mode() == EmpiricalMode::Sequential {
                    return Err(Error::param("a sequential empirical law must be read through a sampler"));
                }
                Ok(e.bootstrap(rng))
            }
        }
    }
}

/// A law together with a read cursor for sequential empirical files.
#[derive(Debug, Clone)]
pub struct Sampler<'a> {
    law: &'a CoefficientLaw,
    cursor: usize,
}

impl Sampler<'_> {
    #[inline]
    pub fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Coefficients> {
        match self.law {
            CoefficientLaw::Empirical(e) if e.mode() == EmpiricalMode::Sequential => {
                let c = e.row(self.cursor).ok_or(Error::Exhausted { rows: e.len() })?;
                self.cursor += 1;
                Ok(c)
            }
            law => law.sample(rng),
        }
    }
}

/// Catalog entry for one built-in law kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LawInfo {
    pub kind: &'static str,
    pub params: &'static [(&'static str, &'static str)],
    pub anchor: &'static str,
}

pub fn list_builtin_laws() -> Vec<LawInfo> {
    vec![
        LawInfo {
            kind: "pqd-synthetic",
            params: &[
                ("gamma", "γ > 0, left-tail constant: P(B < x) = exp(-γ x^{-ρ}) (default 1)"),
                ("a", "a >= 0, ess inf A"),
                ("width", "w >= 0, A ~ U[a, a + w] (default 1)"),
                ("rho", "ρ > 0, index of H(x) = x^{-ρ} (default 1)"),
                ("b", "optional constant B, makes the law degenerate in B"),
            ],
            anchor: "g(y) = γ(1 - a y)^{-ρ} for y < 1/a, ∞ for y >= 1/a",
        },
        LawInfo {
            kind: "discontinuous-ldm",
            params: &[("lambda1", "λ₁ = g(0⁺)"), ("lambda2", "λ₂ = g(0), 0 < λ₂ < λ₁")],
            anchor: "A = V/U, B = U; g(0) = λ₂ < λ₁ = g(0⁺)",
        },
        LawInfo {
            kind: "fleming-viot",
            params: &[],
            anchor: "A=Y_1^{-2} and B=T_1Y_1^{-2}",
        },
        LawInfo {
            kind: "empirical-file",
            params: &[
                ("path", "CSV with columns a,b (header optional)"),
                ("mode", "bootstrap (default) or sequential (single replica only)"),
            ],
            anchor: "rows (a, b) drawn uniformly with replacement, or read in order",
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::single;

    #[test]
    fn spec_json_shapes() {
        let s: LawSpec = serde_json::from_str(r#"{"kind": "fleming-viot"}"#).unwrap();
        assert_eq!(s, LawSpec::FlemingViot);
        let s: LawSpec = serde_json::from_str(r#"{"kind": "discontinuous-ldm", "lambda1": 2, "lambda2": 1}"#).unwrap();
        assert_eq!(s, LawSpec::DiscontinuousLdm { lambda1: 2.0, lambda2: 1.0 });
        let s: LawSpec = serde_json::from_str(r#"{"kind": "pqd-synthetic", "a": 0.25}"#).unwrap();
        assert_eq!(s, LawSpec::pqd(1.0, 0.25, 1.0, 1.0));
        assert!(serde_json::from_str::<LawSpec>(r#"{"kind": "pqd-synthetic", "a": 0.25, "alpha": 1}"#).is_err());
        assert!(serde_json::from_str::<LawSpec>(r#"{"kind": "gaussian"}"#).is_err());
    }

    #[test]
    fn degenerate_law_is_constant() {
        let law = LawSpec::degenerate(0.5, 1.0).build().unwrap();
        let mut rng = single(1);
        for _ in 0..10 {
            assert_eq!(law.sample(&mut rng).unwrap(), Coefficients { a: 0.5, b: 1.0 });
        }
    }

    #[test]
    fn same_seed_same_sequence() {
        for spec in [LawSpec::FlemingViot, LawSpec::pqd(1.0, 0.25, 1.0, 1.0), LawSpec::DiscontinuousLdm { lambda1: 2.0, lambda2: 1.0 }] {
            let law = spec.build().unwrap();
            let (mut r1, mut r2) = (single(77), single(77));
            for _ in 0..1000 {
                let (x, y) = (law.sample(&mut r1).unwrap(), law.sample(&mut r2).unwrap());
                assert_eq!(x.a.to_bits(), y.a.to_bits());
                assert_eq!(x.b.to_bits(), y.b.to_bits());
                assert!(x.a >= 0.0 && x.b >= 0.0 && x.a.is_finite() && x.b.is_finite());
            }
        }
    }

    #[test]
    fn catalog_lists_all_kinds() {
        let cat = list_builtin_laws();
        let kinds: Vec<_> = cat.iter().map(|l| l.kind).collect();
        assert_eq!(kinds, ["pqd-synthetic", "discontinuous-ldm", "fleming-viot", "empirical-file"]);
        let fv = cat.iter().find(|l| l.kind == "fleming-viot").unwrap();
        assert!(fv.anchor.contains("A=Y_1^{-2} and B=T_1Y_1^{-2}"));
        let pqd = cat.iter().find(|l| l.kind == "pqd-synthetic").unwrap();
        for p in ["gamma", "a", "rho"] {
            assert!(pqd.params.iter().any(|(n, _)| *n == p));
        }
        let d = cat.iter().find(|l| l.kind == "discontinuous-ldm").unwrap();
        assert!(d.params.iter().any(|(n, _)| *n == "lambda1") && d.params.iter().any(|(n, _)| *n == "lambda2"));
    }
}
