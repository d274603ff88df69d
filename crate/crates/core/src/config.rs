//! Plain-text problem description: environment, layer constants and
//! collocation segment counts, stored as TOML.
//!
//! ```toml
//! T0_K = 310.15
//! Tg_K = 2000.0
//! h_g = 40.0
//! h_air = 9.496
//! horizon_s = 60.0
//!
//! [segments]
//! shl = 50
//! msr = 70
//! lin = 200
//! time = 300
//!
//! [shl]
//! density = 300.0
//! specific_heat = 1377.0
//! conductivity = 0.082
//! thickness_mm = 0.6
//! ```
//!
//! Omitted keys take the benchmark values; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::collocation::Segments;
use crate::error::{Error, Result};
use crate::physics::{EnvironmentConfig, FabricLayer};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerToml {
    density: Option<f64>,
    specific_heat: Option<f64>,
    conductivity: Option<f64>,
    thickness_mm: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentsToml {
    shl: Option<usize>,
    msr: Option<usize>,
    lin: Option<usize>,
    time: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemToml {
    #[serde(rename = "T0_K")]
    t0_k: Option<f64>,
    #[serde(rename = "Tg_K")]
    tg_k: Option<f64>,
    h_g: Option<f64>,
    h_air: Option<f64>,
    horizon_s: Option<f64>,
    segments: Option<SegmentsToml>,
    shl: Option<LayerToml>,
    msr: Option<LayerToml>,
    lin: Option<LayerToml>,
}

/// A validated problem: physical environment plus collocation layout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemConfig {
    pub env: EnvironmentConfig,
    pub segments: Segments,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            env: EnvironmentConfig::benchmark(),
            segments: Segments::BENCHMARK,
        }
    }
}

/// Millimetres rounded to 12 significant digits, so values read from a file
/// are written back with the digits they were given.
fn metres_to_mm(m: f64) -> f64 {
    format!("{:.11e}", m * 1e3).parse().unwrap_or(m * 1e3)
}

fn merge_layer(base: FabricLayer, over: Option<LayerToml>) -> FabricLayer {
    let Some(o) = over else { return base };
    FabricLayer {
        density: o.density.unwrap_or(base.density),
        specific_heat: o.specific_heat.unwrap_or(base.specific_heat),
        conductivity: o.conductivity.unwrap_or(base.conductivity),
        thickness: o.thickness_mm.map_or(base.thickness, |mm| mm / 1e3),
    }
}

impl ProblemConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: ProblemToml = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        let base = ProblemConfig::default();
        let b = base.env;
        let [shl, msr, lin] = b.layers;
        let env = EnvironmentConfig {
            t0: raw.t0_k.unwrap_or(b.t0),
            tg: raw.tg_k.unwrap_or(b.tg),
            h_g: raw.h_g.unwrap_or(b.h_g),
            h_air: raw.h_air.unwrap_or(b.h_air),
            horizon: raw.horizon_s.unwrap_or(b.horizon),
            layers: [merge_layer(shl, raw.shl), merge_layer(msr, raw.msr), merge_layer(lin, raw.lin)],
        };
        let s = base.segments;
        let segments = match raw.segments {
            None => s,
            Some(o) => Segments::new(
                o.shl.unwrap_or(s.layers[0]),
                o.msr.unwrap_or(s.layers[1]),
                o.lin.unwrap_or(s.layers[2]),
                o.time.unwrap_or(s.time),
            ),
        };
        let config = ProblemConfig { env, segments };
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(reason) => Error::Format { path: path.to_path_buf(), reason },
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.segments.validate()
    }

    /// Fully populated TOML; equal configurations give identical text.
    pub fn to_toml_string(&self) -> String {
        let layer = |l: &FabricLayer| LayerToml {
            density: Some(l.density),
            specific_heat: Some(l.specific_heat),
            conductivity: Some(l.conductivity),
            thickness_mm: Some(metres_to_mm(l.thickness)),
        };
        let e = &self.env;
        let raw = ProblemToml {
            t0_k: Some(e.t0),
            tg_k: Some(e.tg),
            h_g: Some(e.h_g),
            h_air: Some(e.h_air),
            horizon_s: Some(e.horizon),
            segments: Some(SegmentsToml {
                shl: Some(self.segments.layers[0]),
                msr: Some(self.segments.layers[1]),
                lin: Some(self.segments.layers[2]),
                time: Some(self.segments.time),
            }),
            shl: Some(layer(&e.layers[0])),
            msr: Some(layer(&e.layers[1])),
            lin: Some(layer(&e.layers[2])),
        };
        toml::to_string(&raw).expect("plain tables always serialize")
    }
}
