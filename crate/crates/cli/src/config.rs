use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use sfpe_core::laws::LawSpec;
use sfpe_core::perpetuity::Thinning;
use sfpe_core::TailScale;

/// A list of values or an evenly spaced range with `steps` intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Range { from: f64, to: f64, steps: usize },
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match *self {
            Grid::List(ref v) => v.clone(),
            Grid::Range { from, to, steps } => {
                let steps = steps.max(1);
                (0..=steps).map(|i| from + (to - from) * i as f64 / steps as f64).collect()
            }
        }
    }
}

fn one() -> f64 {
    1.0
}
fn one_u() -> u64 {
    1
}
fn two_hundred() -> usize {
    200
}
fn tol() -> f64 {
    1e-10
}
fn thousand() -> u64 {
    1000
}
fn ten_thousand() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterateConfig {
    /// Defaults to `g(0⁺)`.
    pub lambda1: Option<f64>,
    #[serde(default = "two_hundred")]
    pub max_steps: usize,
    #[serde(default = "tol")]
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformConfig {
    pub subcommand: Option<String>,
    pub law: Option<LawSpec>,
    /// Tabulated `g` (y,g,ci_lo,ci_hi) instead of a closed-form law.
    pub g_csv: Option<PathBuf>,
    #[serde(default = "one")]
    pub rho: f64,
    pub lambda_grid: Grid,
    pub iterate: Option<IterateConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub subcommand: Option<String>,
    pub law: LawSpec,
    #[serde(default)]
    pub x0: f64,
    pub n_steps: u64,
    #[serde(default = "one_u")]
    pub replicas: u64,
    pub seed: u64,
    #[serde(default)]
    pub scale: TailScale,
    #[serde(default)]
    pub thinning: Thinning,
    /// Also draw the series truncated at this many terms, one per replica.
    pub series_terms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdmConfig {
    pub ys: Vec<f64>,
    pub n: u64,
    pub eps_grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailConfig {
    pub subcommand: Option<String>,
    pub law: LawSpec,
    #[serde(default)]
    pub x0: f64,
    /// Chain length; the left tail is read off `X_n`.
    pub n: u64,
    pub replicas: u64,
    pub seed: u64,
    #[serde(default)]
    pub scale: TailScale,
    pub eps_grid: Vec<f64>,
    /// Right-tail grid for the power-law slope.
    pub kesten_grid: Option<Grid>,
    /// Estimate `g` of the coefficient law and export it.
    pub ldm: Option<LdmConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeConfig {
    pub subcommand: Option<String>,
    pub law: LawSpec,
    #[serde(default)]
    pub x0: f64,
    pub n_steps: u64,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub scale: TailScale,
    #[serde(default = "thousand")]
    pub start: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub subcommand: Option<String>,
    #[serde(default)]
    pub scale: TailScale,
    pub eps_tilde: f64,
    pub lambda_star: f64,
    pub eps: f64,
    pub y_star: f64,
    pub c: f64,
    #[serde(default = "ten_thousand")]
    pub n_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FvConfig {
    pub subcommand: Option<String>,
    pub n_steps: u64,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub thinning: Thinning,
    #[serde(default = "thousand")]
    pub burn_in: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ExperimentConfig {
    Transform(TransformConfig),
    Simulate(SimulateConfig),
    Tail(TailConfig),
    Envelope(EnvelopeConfig),
    Schedule(ScheduleConfig),
    Fv(FvConfig),
}

pub const SUBCOMMANDS: [&str; 6] = ["transform", "simulate", "tail", "envelope", "schedule", "fv"];

#[derive(Deserialize)]
struct Probe {
    subcommand: Option<String>,
}

fn parse_as<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T> {
    serde_json::from_str(text).with_context(|| format!("invalid config {origin}"))
}

impl ExperimentConfig {
    /// Parses `text`. The subcommand comes from the command line, from the
    /// config's `subcommand` key, or both, in which case they must agree.
    pub fn parse(text: &str, origin: &str, requested: Option<&str>) -> Result<Self> {
        let probe: Probe = parse_as(text, origin)?;
        let name = match (requested, probe.subcommand.as_deref()) {
            (Some(a), Some(b)) if a != b => bail!("config {origin} is for subcommand `{b}`, not `{a}`"),
            (Some(a), _) => a.to_owned(),
            (None, Some(b)) => b.to_owned(),
            (None, None) => bail!("config {origin}: missing field `subcommand`"),
        };
        let mut cfg = match name.as_str() {
            "transform" => Self::Transform(parse_as(text, origin)?),
            "simulate" => Self::Simulate(parse_as(text, origin)?),
            "tail" => Self::Tail(parse_as(text, origin)?),
            "envelope" => Self::Envelope(parse_as(text, origin)?),
            "schedule" => Self::Schedule(parse_as(text, origin)?),
            "fv" => Self::Fv(parse_as(text, origin)?),
            other => bail!("config {origin}: unknown subcommand `{other}`, expected one of {}", SUBCOMMANDS.join(", ")),
        };
        cfg.set_subcommand(name);
        if let Self::Transform(t) = &cfg {
            if t.law.is_none() && t.g_csv.is_none() {
                bail!("config {origin}: missing field `law` (or `g_csv`)");
            }
            if t.law.is_some() && t.g_csv.is_some() {
                bail!("config {origin}: give either `law` or `g_csv`, not both");
            }
        }
        Ok(cfg)
    }

    fn set_subcommand(&mut self, name: String) {
        let slot = match self {
            Self::Transform(c) => &mut c.subcommand,
            Self::Simulate(c) => &mut c.subcommand,
            Self::Tail(c) => &mut c.subcommand,
            Self::Envelope(c) => &mut c.subcommand,
            Self::Schedule(c) => &mut c.subcommand,
            Self::Fv(c) => &mut c.subcommand,
        };
        *slot = Some(name);
    }

    pub fn subcommand(&self) -> &'static str {
        match self {
            Self::Transform(_) => "transform",
            Self::Simulate(_) => "simulate",
            Self::Tail(_) => "tail",
            Self::Envelope(_) => "envelope",
            Self::Schedule(_) => "schedule",
            Self::Fv(_) => "fv",
        }
    }

    /// Replaces the seed (or the seed list by `[seed]`).
    pub fn override_seed(&mut self, seed: u64) {
        match self {
            Self::Simulate(c) => c.seed = seed,
            Self::Tail(c) => c.seed = seed,
            Self::Envelope(c) => c.seeds = vec![seed],
            Self::Fv(c) => c.seeds = vec![seed],
            Self::Transform(_) | Self::Schedule(_) => {}
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        match self {
            Self::Simulate(c) => vec![c.seed],
            Self::Tail(c) => vec![c.seed],
            Self::Envelope(c) => c.seeds.clone(),
            Self::Fv(c) => c.seeds.clone(),
            Self::Transform(_) | Self::Schedule(_) => Vec::new(),
        }
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form (keys
    /// sorted, defaults filled in).
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_value(self).expect("config serializes").to_string();
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_forms() {
        let g: Grid = serde_json::from_str(r#"{"from": 0, "to": 1, "steps": 10}"#).unwrap();
        let v = g.values();
        assert_eq!(v.len(), 11);
        assert_eq!((v[0], v[10]), (0.0, 1.0));
        let g: Grid = serde_json::from_str("[0.5, 2]").unwrap();
        assert_eq!(g.values(), vec![0.5, 2.0]);
    }

    #[test]
    fn missing_law_is_named() {
        let err = ExperimentConfig::parse(r#"{"n_steps": 10, "seed": 1}"#, "t", Some("simulate")).unwrap_err();
        assert!(format!("{err:#}").contains("missing field `law`"), "{err:#}");
        let err = ExperimentConfig::parse(r#"{"lambda_grid": [0]}"#, "t", Some("transform")).unwrap_err();
        assert!(format!("{err:#}").contains("`law`"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"{"subcommand": "fv", "n_steps": 1000, "seeds": [1], "bogus": 3}"#;
        let err = ExperimentConfig::parse(text, "t", None).unwrap_err();
        assert!(format!("{err:#}").contains("bogus"));
    }

    #[test]
    fn subcommands_must_agree() {
        let text = r#"{"subcommand": "fv", "n_steps": 1000, "seeds": [1]}"#;
        assert!(ExperimentConfig::parse(text, "t", Some("tail")).is_err());
        assert!(ExperimentConfig::parse(text, "t", Some("fv")).is_ok());
    }

    #[test]
    fn hash_ignores_key_order_and_tracks_values() {
        let a = ExperimentConfig::parse(r#"{"n_steps": 1000, "seeds": [1]}"#, "t", Some("fv")).unwrap();
        let b = ExperimentConfig::parse(r#"{"seeds": [1], "subcommand": "fv", "n_steps": 1000}"#, "t", None).unwrap();
        assert_eq!(a.hash(), b.hash());
        let mut c = a.clone();
        c.override_seed(2);
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 16);
    }
}
