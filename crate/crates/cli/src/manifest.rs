//! Run manifest: everything needed to reproduce an output bundle.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use swarmfield::ScenarioConfig;

use crate::error::CliError;
use crate::scenario::Overrides;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Derived {
    pub eps_x: f64,
    pub eps_y: f64,
    pub eps_theta: f64,
    pub eps_d: f64,
    pub d_m: f64,
    pub d_m_inflated: f64,
    pub eps_j: f64,
    pub comm_radius: f64,
    pub d_c: f64,
    pub d_r: f64,
    pub d_eps: f64,
    pub eps_f: f64,
}

impl Derived {
    pub fn of(cfg: &ScenarioConfig) -> Self {
        let b = cfg.noise.bounds;
        let s = cfg.safety;
        Derived {
            eps_x: b.eps_x,
            eps_y: b.eps_y,
            eps_theta: b.eps_theta,
            eps_d: b.eps_d,
            d_m: s.d_m,
            d_m_inflated: s.d_m_inflated,
            eps_j: s.eps_j,
            comm_radius: s.comm_radius,
            d_c: s.d_c,
            d_r: s.d_r,
            d_eps: s.d_eps,
            eps_f: cfg.noise.final_tolerance,
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct OverrideRecord {
    pub mode: Option<String>,
    pub no_noise: bool,
    pub margins: Option<(f64, f64)>,
}

impl From<&Overrides> for OverrideRecord {
    fn from(o: &Overrides) -> Self {
        OverrideRecord { mode: o.mode.map(|m| m.to_string()), no_noise: o.no_noise, margins: o.margins }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub scenario_path: String,
    pub scenario_sha256: String,
    pub seeds: Vec<u64>,
    pub mode: String,
    pub overrides: OverrideRecord,
    pub derived: Derived,
    pub outputs: Vec<String>,
    pub results: serde_json::Value,
}

pub fn write_manifest(m: &Manifest, dir: &Path) -> Result<PathBuf, CliError> {
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(m).expect("manifest serializes");
    text.push('\n');
    std::fs::write(&path, text).map_err(|source| CliError::Io { path: path.clone(), source })?;
    Ok(path)
}
