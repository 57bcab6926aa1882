//! Experiment configuration files.
//!
//! A config is a JSON object with a `schema` version. Unknown keys are
//! rejected. Every field is optional; command-line flags override it and
//! built-in defaults fill whatever is still missing.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// A scalar or a list of scalars.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub command: Option<String>,
    pub model: Option<String>,
    pub m: Option<OneOrMany<f64>>,
    pub gamma: Option<OneOrMany<f64>>,
    #[serde(rename = "E")]
    pub e: Option<OneOrMany<f64>>,
    #[serde(rename = "N")]
    pub n: Option<OneOrMany<usize>>,
    /// Inclusive `[lo, hi]`, expanded to every `N` in between.
    #[serde(rename = "N_range")]
    pub n_range: Option<[usize; 2]>,
    pub topology: Option<OneOrMany<String>>,
    pub method: Option<String>,
    pub degree: Option<usize>,
    /// Monte Carlo events per estimate.
    pub events: Option<u64>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| format!("invalid config: {e}"))?;
        if cfg.schema != SCHEMA_VERSION {
            return Err(format!("unsupported config schema {} (expected {SCHEMA_VERSION})", cfg.schema));
        }
        if let (Some(_), Some(_)) = (&cfg.n, &cfg.n_range) {
            return Err("config sets both N and N_range".into());
        }
        if let Some([lo, hi]) = cfg.n_range
            && lo > hi
        {
            return Err(format!("N_range [{lo}, {hi}] is empty"));
        }
        Ok(cfg)
    }

    /// Fails if the file was written for another subcommand.
    pub fn expect_command(&self, name: &str) -> Result<(), String> {
        match &self.command {
            Some(c) if c != name => Err(format!("config is for command '{c}', not '{name}'")),
            _ => Ok(()),
        }
    }

    pub fn n_values(&self) -> Option<Vec<usize>> {
        if let Some([lo, hi]) = self.n_range {
            return Some((lo..=hi).collect());
        }
        self.n.clone().map(OneOrMany::into_vec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_scalars_and_lists() {
        let c = ExperimentConfig::parse(r#"{"schema": 1, "model": "star", "m": [0, 1], "N_range": [2, 4], "E": 2}"#).unwrap();
        assert_eq!(c.m.clone().unwrap().into_vec(), vec![0.0, 1.0]);
        assert_eq!(c.n_values().unwrap(), vec![2, 3, 4]);
        assert_eq!(c.e.unwrap().into_vec(), vec![2.0]);
    }

    #[test]
    fn rejects_unknown_keys_and_versions() {
        assert!(ExperimentConfig::parse(r#"{"schema": 1, "colour": "red"}"#).is_err());
        assert!(ExperimentConfig::parse(r#"{"schema": 2}"#).is_err());
        assert!(ExperimentConfig::parse(r#"{"model": "star"}"#).is_err());
        assert!(ExperimentConfig::parse(r#"{"schema": 1, "N": 3, "N_range": [2, 3]}"#).is_err());
    }

    #[test]
    fn command_mismatch() {
        let c = ExperimentConfig::parse(r#"{"schema": 1, "command": "sweep"}"#).unwrap();
        assert!(c.expect_command("sweep").is_ok());
        assert!(c.expect_command("gap").is_err());
    }
}
