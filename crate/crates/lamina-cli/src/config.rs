//! Run configuration: a single TOML file with documented defaults, merged
//! with command-line overrides, hashed for provenance metadata.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use lamina_core::{
    check_dominated_splitting, default_delta, make_standard_perturbation, BaseMap, CentralOptions,
    FiberFamily, GraphOptions, PerturbedMap, SkewProduct,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// The shipped configuration template; every field with its default and an
/// inline explanation. `lamina config-template` prints it verbatim.
pub const TEMPLATE: &str = include_str!("../config-template.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub map: MapConfig,
    pub grid: GridConfig,
    pub run: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct MapConfig {
    /// One of "solenoid", "torus", "doubling".
    pub base: String,
    /// Base-driven rotation amplitude of the fiber family.
    pub drive: f64,
    /// Fiber shear amplitude of the fiber family.
    pub shear: f64,
    /// Perturbation size.
    pub rho: f64,
    /// Seed for perturbation fields and command sampling.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct GridConfig {
    /// Chart half-width; 0 derives 50 * rho clamped to [1e-3, 0.05].
    pub delta: f64,
    pub domain_nodes: usize,
    pub fiber_nodes: usize,
    pub central_nodes: usize,
    pub cs_depth: usize,
    pub cu_depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct RunConfig {
    /// Worker cap for sweeps; 0 means one worker per core.
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            map: MapConfig::default(),
            grid: GridConfig::default(),
            run: RunConfig::default(),
        }
    }
}

impl Default for MapConfig {
    fn default() -> Self {
        Self { base: "solenoid".into(), drive: 0.1, shear: 0.05, rho: 1e-3, seed: 42 }
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            delta: 0.0,
            domain_nodes: 17,
            fiber_nodes: 64,
            central_nodes: 256,
            cs_depth: 28,
            cu_depth: 8,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { threads: 0 }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        Self::from_toml(&text)
            .with_context(|| format!("parsing config file {}", path.display()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Canonical serialization used for hashing: full structure, every field.
    pub fn canonical_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical serialization; recorded in every output
    /// so results can be traced to the exact effective configuration.
    pub fn sha256_hex(&self) -> String {
        let digest = Sha256::digest(self.canonical_toml().as_bytes());
        let mut hex = String::with_capacity(64);
        for byte in digest {
            use std::fmt::Write;
            write!(hex, "{byte:02x}").expect("writing to string");
        }
        hex
    }

    pub fn base_map(&self) -> Result<BaseMap> {
        match self.map.base.as_str() {
            "solenoid" => Ok(BaseMap::default_solenoid()),
            "torus" => Ok(BaseMap::torus()),
            "doubling" => Ok(BaseMap::doubling()),
            other => anyhow::bail!(
                "unknown base map {other:?}; expected \"solenoid\", \"torus\" or \"doubling\""
            ),
        }
    }

    pub fn skew(&self) -> Result<SkewProduct> {
        let fiber = FiberFamily::Trig { drive: self.map.drive, shear: self.map.shear };
        Ok(SkewProduct::new(self.base_map()?, fiber)?)
    }

    pub fn perturbation(&self) -> Result<PerturbedMap> {
        let skew = self.skew()?;
        Ok(make_standard_perturbation(&skew, self.map.rho, self.map.seed))
    }

    /// Effective chart half-width: the configured value, or the derived
    /// default when the configured value is zero.
    pub fn delta(&self) -> f64 {
        if self.grid.delta > 0.0 {
            self.grid.delta
        } else {
            default_delta(self.map.rho)
        }
    }

    /// Lipschitz budget constant from the measured dominated-splitting gap.
    pub fn lip_budget(&self) -> Result<f64> {
        let skew = self.skew()?;
        let report = check_dominated_splitting(&skew)?;
        Ok(report.lip_budget_constant(&skew.base().constants())?)
    }

    pub fn graph_options(&self) -> Result<GraphOptions> {
        Ok(GraphOptions::new(
            self.delta(),
            self.grid.domain_nodes,
            self.grid.fiber_nodes,
            self.lip_budget()?,
        ))
    }

    pub fn central_options(&self) -> Result<CentralOptions> {
        let mut opts = CentralOptions::new(self.graph_options()?);
        opts.nodes = self.grid.central_nodes;
        opts.cs_depth = self.grid.cs_depth;
        opts.cu_depth = self.grid.cu_depth;
        Ok(opts)
    }
}
