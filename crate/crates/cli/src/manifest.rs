//! Run manifests: everything that determines a run's outputs, hashed, plus
//! the list of files it produced.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thermopinn::{BalanceCoefficients, ProblemConfig};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let mut hasher = Sha256::new();
    let mut file = std::fs::File::open(path)?;
    std::io::copy(&mut file, &mut hasher)?;
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl From<BalanceCoefficients> for Coefficients {
    fn from(c: BalanceCoefficients) -> Self {
        Coefficients {
            alpha: c.alpha,
            beta: c.beta,
            gamma: c.gamma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Segments of shell, moisture barrier and liner.
    pub layer_segments: [usize; 3],
    pub time_segments: usize,
    pub horizon_s: f64,
}

/// Inputs of a run. Two runs with equal inputs write byte-identical CSVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInputs {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    /// Canonical TOML of the effective configuration.
    pub config: String,
    pub grid: GridSpec,
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub coefficients: Option<Coefficients>,
    /// Command-specific settings and hashes of input files.
    pub extra: BTreeMap<String, String>,
}

impl RunInputs {
    pub fn new(command: &str, config: &ProblemConfig) -> Self {
        let text = config.to_toml_string();
        RunInputs {
            tool: "thermopinn".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash: sha256_hex(text.as_bytes()),
            config: text,
            grid: GridSpec {
                layer_segments: config.segments.layers,
                time_segments: config.segments.time,
                horizon_s: config.env.horizon,
            },
            preset: None,
            seed: None,
            epochs: None,
            coefficients: None,
            extra: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.extra.insert(key.into(), value.to_string());
        self
    }

    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("manifest inputs serialize"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub hash: String,
    pub inputs: RunInputs,
    pub outputs: Vec<OutputEntry>,
    pub created_unix_s: u64,
    pub wall_time_s: f64,
}

impl RunManifest {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_covers_every_input() {
        let base = RunInputs::new("train", &ProblemConfig::default());
        let h = base.hash();
        assert_eq!(h.len(), 64);
        assert_eq!(h, RunInputs::new("train", &ProblemConfig::default()).hash());
        let mut seeded = base.clone();
        seeded.seed = Some(1);
        assert_ne!(seeded.hash(), h);
        assert_ne!(base.clone().with("n_exp", 50).hash(), h);
        let mut other = ProblemConfig::default();
        other.env.horizon = 30.0;
        assert_ne!(RunInputs::new("train", &other).hash(), h);
    }

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
