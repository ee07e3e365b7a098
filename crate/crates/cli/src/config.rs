use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::{self, MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};
use trapwalk::rtrw::TrapModel;
use trapwalk::{laws, OffspringLaw};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    VerifyAnalytics,
    Speed,
    AnnealedClt,
    QuenchedClt,
    QuenchedHitting,
    Einstein,
    Coupling,
    Necessity,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::VerifyAnalytics,
        Suite::Speed,
        Suite::AnnealedClt,
        Suite::QuenchedClt,
        Suite::QuenchedHitting,
        Suite::Einstein,
        Suite::Coupling,
        Suite::Necessity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::VerifyAnalytics => "verify-analytics",
            Suite::Speed => "speed",
            Suite::AnnealedClt => "annealed-clt",
            Suite::QuenchedClt => "quenched-clt",
            Suite::QuenchedHitting => "quenched-hitting",
            Suite::Einstein => "einstein",
            Suite::Coupling => "coupling",
            Suite::Necessity => "necessity",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `law = "A"` or `law = { pmf = { "0" = 0.6, "2" = 0.4 } }`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum LawSpec {
    Named(String),
    Explicit(OffspringLaw),
}

// By hand so that a bad pmf reports why, not "no variant matched".
impl<'de> Deserialize<'de> for LawSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = LawSpec;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a law name or a table with a pmf")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<LawSpec, E> {
                Ok(LawSpec::Named(v.to_string()))
            }

            fn visit_map<A: MapAccess<'de>>(self, map: A) -> Result<LawSpec, A::Error> {
                OffspringLaw::deserialize(de::value::MapAccessDeserializer::new(map)).map(LawSpec::Explicit)
            }
        }
        d.deserialize_any(V)
    }
}

impl LawSpec {
    pub fn resolve(&self) -> Result<OffspringLaw, CliError> {
        match self {
            LawSpec::Named(name) => {
                laws::by_name(name).ok_or_else(|| CliError::Config(format!("unknown law {name:?}; use \"A\", \"B\" or a pmf table")))
            }
            LawSpec::Explicit(law) => Ok(law.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Threads {
    #[default]
    #[serde(with = "auto")]
    Auto,
    Count(usize),
}

mod auto {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str("auto")
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        let s = String::deserialize(d)?;
        if s == "auto" {
            Ok(())
        } else {
            Err(de::Error::custom(format!("threads must be a positive integer or \"auto\", got {s:?}")))
        }
    }
}

/// One experiment. Unset fields fall back to per-suite defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub suite: Suite,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub law: Option<LawSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<TrapModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicas: Option<u64>,
    /// Directory for `<suite>.csv` and `<suite>.json`. Like `threads` it
    /// does not affect results and is left out of the hash.
    #[serde(default, skip_serializing)]
    pub output: Option<PathBuf>,
    /// Worker threads.
    #[serde(default, skip_serializing)]
    pub threads: Threads,
    /// Number of seeds a goodness-of-fit check is repeated on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeats: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<usize>>,
    /// Monte Carlo sample count for suites with a single large sample.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trees: Option<u64>,
    /// Steps of the walk on the tree.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration_horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

impl ExperimentConfig {
    pub fn new(suite: Suite, seed: u64) -> Self {
        ExperimentConfig {
            suite,
            seed,
            law: None,
            model: None,
            beta: None,
            horizon: None,
            replicas: None,
            output: None,
            threads: Threads::Auto,
            repeats: None,
            betas: None,
            sizes: None,
            samples: None,
            trees: None,
            steps: None,
            calibration_horizon: None,
            control_beta: None,
            delta: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Canonical TOML of every field that affects results.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn law_or_default(&self) -> Result<OffspringLaw, CliError> {
        self.law.as_ref().map_or_else(|| Ok(laws::law_a()), LawSpec::resolve)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if let Some(law) = &self.law {
            law.resolve()?.require_subcritical().map_err(|e| CliError::Config(e.to_string()))?;
        }
        if let Some(model) = &self.model {
            model.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        if let Some(b) = self.beta {
            if !(b > 0.0 && b.is_finite()) {
                return bad(format!("beta must be positive and finite, got {b}"));
            }
        }
        if let Some(h) = self.horizon {
            if !(h >= 1.0 && h.is_finite()) {
                return bad(format!("horizon must be at least 1, got {h}"));
            }
        }
        if self.steps == Some(0) {
            return bad("steps must be at least 1".into());
        }
        if self.replicas == Some(0) {
            return bad("replicas must be at least 1".into());
        }
        if self.repeats == Some(0) {
            return bad("repeats must be at least 1".into());
        }
        if self.threads == Threads::Count(0) {
            return bad("threads must be positive or \"auto\"".into());
        }
        if let Some(sizes) = &self.sizes {
            if sizes.is_empty() || sizes[0] == 0 || sizes.windows(2).any(|w| w[0] >= w[1]) {
                return bad("sizes must be positive and strictly increasing".into());
            }
        }
        if self.suite == Suite::Necessity {
            let mu = self.law_or_default()?.mean();
            let beta = self.beta.unwrap_or(1.15);
            if beta * beta * mu < 1.0 {
                return bad(format!("necessity needs beta^2 mu >= 1, got {}", beta * beta * mu));
            }
            if beta * mu >= 1.0 {
                return bad(format!("necessity needs beta mu < 1, got {}", beta * mu));
            }
        }
        Ok(())
    }
}
