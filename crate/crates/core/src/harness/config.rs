//! Experiment configuration: a JSON object, validated, canonicalized and
//! hashed.
//!
//! ```json
//! {"command": "honest", "n": 4, "T": 20, "mu": 1e-6, "seeds": 100}
//! {"command": "decay", "mu": {"poly": 2}, "distribution": "scale:0.95"}
//! ```
//!
//! Missing keys take their defaults; unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::circuit::{GateSet, NamedGate};
use crate::error::{Error, Result};
use crate::protocol::Precision;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Honest,
    Cheat,
    Env,
    Decay,
    Claim1,
    Collapse,
    Probe,
    Band,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Honest => "honest",
            Command::Cheat => "cheat",
            Command::Env => "env",
            Command::Decay => "decay",
            Command::Claim1 => "claim1",
            Command::Collapse => "collapse",
            Command::Probe => "probe",
            Command::Band => "band",
        }
    }

    /// Distribution used when the config names none.
    pub fn default_distribution(self) -> Distribution {
        match self {
            Command::Claim1 | Command::Collapse => Distribution::Identity,
            Command::Probe => Distribution::Scale(0.99),
            _ => Distribution::Ag,
        }
    }
}

/// `μ`: an absolute number, or `{"poly": d}` for `1/n^d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Mu {
    Absolute(f64),
    Poly { poly: u32 },
}

impl Mu {
    pub fn precision(self) -> Precision {
        match self {
            Mu::Absolute(m) => Precision::Absolute(m),
            Mu::Poly { poly } => Precision::InversePoly(poly),
        }
    }
}

impl FromStr for Mu {
    type Err = String;

    /// `1e-6` or `poly:2`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if let Some(d) = s.strip_prefix("poly:") {
            return d
                .parse()
                .map(|poly| Mu::Poly { poly })
                .map_err(|e| format!("bad poly degree `{d}`: {e}"));
        }
        s.parse().map(Mu::Absolute).map_err(|e| format!("bad mu `{s}`: {e}"))
    }
}

/// Which instance the protocol runs on: the AG circuit protocol, or a
/// synthetic family on 8x8 matrices under the trace functional with the
/// named transformation distribution.
///
/// Text forms: `ag`, `identity`, `phase`, `block:<contraction>`,
/// `scale:<factor>`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Distribution {
    Ag,
    Identity,
    Phase,
    Block(f64),
    Scale(f64),
}

impl Distribution {
    /// Whether the verifier should fold out the per-round phase.
    pub fn stability_preserving(self) -> bool {
        matches!(
            self,
            Distribution::Identity | Distribution::Phase | Distribution::Block(_)
        )
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distribution::Ag => write!(f, "ag"),
            Distribution::Identity => write!(f, "identity"),
            Distribution::Phase => write!(f, "phase"),
            Distribution::Block(c) => write!(f, "block:{c}"),
            Distribution::Scale(c) => write!(f, "scale:{c}"),
        }
    }
}

impl FromStr for Distribution {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let number = |a: Option<&str>, default: Option<f64>| -> std::result::Result<f64, String> {
            match (a, default) {
                (Some(a), _) => a.parse().map_err(|e| format!("bad number `{a}`: {e}")),
                (None, Some(d)) => Ok(d),
                (None, None) => Err(format!("`{head}` needs a parameter, e.g. `{head}:0.9`")),
            }
        };
        match (head, arg) {
            ("ag", None) => Ok(Distribution::Ag),
            ("identity", None) => Ok(Distribution::Identity),
            ("phase", None) => Ok(Distribution::Phase),
            ("block", a) => Ok(Distribution::Block(number(a, Some(0.5))?)),
            ("scale", a) => Ok(Distribution::Scale(number(a, None)?)),
            _ => Err(format!(
                "unknown distribution `{s}` (expected ag, identity, phase, block[:c], scale:c)"
            )),
        }
    }
}

impl Serialize for Distribution {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Distribution {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Text forms: `haar3`, `clifford_t`, `named:h,cx,ccx`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GateSetSpec(pub GateSet);

impl Default for GateSetSpec {
    fn default() -> Self {
        GateSetSpec(GateSet::Haar3)
    }
}

impl fmt::Display for GateSetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            GateSet::Haar3 => write!(f, "haar3"),
            GateSet::CliffordT => write!(f, "clifford_t"),
            GateSet::Named(list) => {
                let names: Vec<String> = list
                    .iter()
                    .map(|g| serde_json::to_value(g).expect("gate name")
                        .as_str()
                        .expect("gate names serialize as strings")
                        .to_owned())
                    .collect();
                write!(f, "named:{}", names.join(","))
            }
        }
    }
}

impl FromStr for GateSetSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "haar3" => Ok(GateSetSpec(GateSet::Haar3)),
            "clifford_t" => Ok(GateSetSpec(GateSet::CliffordT)),
            _ => {
                let list = s
                    .strip_prefix("named:")
                    .ok_or_else(|| format!("unknown gate set `{s}` (expected haar3, clifford_t, named:...)"))?;
                let gates = list
                    .split(',')
                    .map(|g| {
                        serde_json::from_value::<NamedGate>(serde_json::Value::String(g.trim().into()))
                            .map_err(|_| format!("unknown gate `{g}`"))
                    })
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                Ok(GateSetSpec(GateSet::Named(gates)))
            }
        }
    }
}

impl Serialize for GateSetSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GateSetSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

fn default_n() -> usize {
    4
}
fn default_t() -> usize {
    20
}
fn default_mu() -> Mu {
    Mu::Absolute(1e-6)
}
fn default_seeds() -> usize {
    100
}
fn default_epsilon() -> f64 {
    0.2
}
fn default_alphas() -> Vec<f64> {
    vec![1e-3]
}
fn default_samples() -> usize {
    1000
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_t", rename = "T")]
    pub t: usize,
    #[serde(default = "default_mu")]
    pub mu: Mu,
    #[serde(default)]
    pub gate_set: GateSetSpec,
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Added to `C(x)` to form the claim.
    #[serde(default)]
    pub offset: Option<f64>,
    #[serde(default)]
    pub distribution: Option<Distribution>,
    #[serde(default)]
    pub bit_quantization: Option<u32>,
    /// Shrinkage cut `1 − ε/4` for the round-fraction statistic.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    /// Samples per round (`env`), per trial (`claim1`) or in total (`probe`).
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

fn config_err(path: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        msg: msg.into(),
    }
}

impl ExperimentConfig {
    /// Config with every field at its default.
    pub fn new(command: Command) -> Self {
        Self {
            command,
            n: default_n(),
            t: default_t(),
            mu: default_mu(),
            gate_set: GateSetSpec::default(),
            seeds: default_seeds(),
            master_seed: 0,
            offset: None,
            distribution: None,
            bit_quantization: None,
            epsilon: default_epsilon(),
            alphas: default_alphas(),
            samples: default_samples(),
            out_dir: default_out_dir(),
        }
    }

    pub fn distribution(&self) -> Distribution {
        self.distribution
            .unwrap_or_else(|| self.command.default_distribution())
    }

    /// Claim offset; cheat commands default to 2/3, the rest to an honest claim.
    pub fn offset(&self) -> f64 {
        self.offset.unwrap_or(match self.command {
            Command::Cheat | Command::Decay | Command::Band => 2.0 / 3.0,
            _ => 0.0,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_err(&path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(".", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.canonical_text() + "\n")?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let dist = self.distribution();
        if dist == Distribution::Ag && self.n < 3 {
            return Err(config_err("n", format!("the AG protocol needs n >= 3, got {}", self.n)));
        }
        if self.n < 1 {
            return Err(config_err("n", "must be at least 1"));
        }
        if self.t < 1 {
            return Err(config_err("T", "must be at least 1"));
        }
        if self.seeds < 1 {
            return Err(config_err("seeds", "must be at least 1"));
        }
        match self.mu {
            Mu::Absolute(m) if !(m > 0.0 && m.is_finite()) => {
                return Err(config_err("mu", format!("must be positive and finite, got {m}")))
            }
            _ => {}
        }
        if !self.offset().is_finite() {
            return Err(config_err("offset", "must be finite"));
        }
        if matches!(self.command, Command::Cheat | Command::Decay | Command::Band) && self.offset() == 0.0 {
            return Err(config_err("offset", "cheat runs need a nonzero offset"));
        }
        match dist {
            Distribution::Block(c) if !(0.0..=1.0).contains(&c) => {
                return Err(config_err("distribution", format!("block contraction must lie in [0, 1], got {c}")))
            }
            Distribution::Scale(c) if !(c.abs() <= 1.0) => {
                return Err(config_err("distribution", format!("scale factor must have modulus at most 1, got {c}")))
            }
            Distribution::Ag
                if matches!(self.command, Command::Claim1 | Command::Collapse | Command::Probe) =>
            {
                return Err(config_err(
                    "distribution",
                    format!("`{}` needs a synthetic distribution, not `ag`", self.command.name()),
                ))
            }
            _ => {}
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(config_err("epsilon", format!("must lie in (0, 1], got {}", self.epsilon)));
        }
        if self.alphas.is_empty() {
            return Err(config_err("alphas", "need at least one alpha"));
        }
        if let Some((i, a)) = self.alphas.iter().enumerate().find(|(_, a)| !(**a > 0.0)) {
            return Err(config_err(&format!("alphas[{i}]"), format!("must be positive, got {a}")));
        }
        if self.samples < 1 {
            return Err(config_err("samples", "must be at least 1"));
        }
        Ok(())
    }

    /// Compact JSON with every field present and keys sorted.
    pub fn canonical_text(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        serde_json::to_string(&value).expect("value serializes")
    }

    /// SHA-256 of the canonical text, with the output directory left out so
    /// the same experiment hashes the same wherever it is written.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        hex::encode(Sha256::digest(c.canonical_text().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poly_mu() {
        let c = ExperimentConfig::from_json(r#"{"command":"honest","n":10,"mu":{"poly":2}}"#).unwrap();
        assert_eq!(c.mu.precision().at(c.n), 1.0 / 100.0);
    }

    #[test]
    fn unknown_key_is_named() {
        let e = ExperimentConfig::from_json(r#"{"command":"honest","sedes":3}"#).unwrap_err();
        assert!(e.to_string().contains("sedes"), "{e}");
    }

    #[test]
    fn nested_error_has_path() {
        let e = ExperimentConfig::from_json(r#"{"command":"honest","alphas":[1e-3,"x"]}"#).unwrap_err();
        assert!(e.to_string().contains("alphas[1]"), "{e}");
    }

    #[test]
    fn distribution_text_round_trip() {
        for s in ["ag", "identity", "phase", "block:0.25", "scale:0.95"] {
            assert_eq!(s.parse::<Distribution>().unwrap().to_string(), s);
        }
        assert_eq!("block".parse::<Distribution>().unwrap(), Distribution::Block(0.5));
        assert!("scale".parse::<Distribution>().is_err());
        assert!("haar".parse::<Distribution>().is_err());
    }

    #[test]
    fn gate_set_text_round_trip() {
        for s in ["haar3", "clifford_t", "named:h,cx,ccx"] {
            assert_eq!(s.parse::<GateSetSpec>().unwrap().to_string(), s);
        }
        assert!("named:h,foo".parse::<GateSetSpec>().is_err());
    }

    #[test]
    fn hash_ignores_out_dir_and_key_order() {
        let a = ExperimentConfig::from_json(r#"{"command":"honest","n":5,"T":9,"out_dir":"a"}"#).unwrap();
        let b = ExperimentConfig::from_json(r#"{"T":9,"out_dir":"b","n":5,"command":"honest"}"#).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = ExperimentConfig::from_json(r#"{"command":"honest","n":5,"T":10}"#).unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn validation_names_field() {
        let e = ExperimentConfig::from_json(r#"{"command":"probe","distribution":"ag"}"#).unwrap_err();
        assert!(e.to_string().contains("`distribution`"), "{e}");
        let e = ExperimentConfig::from_json(r#"{"command":"honest","n":2}"#).unwrap_err();
        assert!(e.to_string().contains("`n`"), "{e}");
    }
}
