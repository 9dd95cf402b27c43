//! Structured configuration file with one section per subsystem.
//!
//! A user file only needs the keys it changes; everything else falls back
//! to the embedded `config/default.toml`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const DEFAULT_TOML: &str = include_str!("../config/default.toml");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub physics: PhysicsConfig,
    pub wear: WearConfig,
    pub device: DeviceConfig,
    pub lab: LabConfig,
    pub ssd: SsdSection,
    pub energy: EnergySection,
    pub baselines: BaselinesSection,
    pub workloads: WorkloadsSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsConfig {
    pub family: String,
    pub mean: [f64; 4],
    pub sigma: [f64; 4],
    pub k_sigma: f64,
    pub default_refs: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WearConfig {
    pub sigma_coeff: [f64; 4],
    pub sigma_exponent: [f64; 4],
    pub retention_shift: [f64; 4],
    pub retention_timescale_hours: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OffsetPolicy {
    /// Out-of-range offsets are rejected.
    Error,
    /// Out-of-range offsets are clamped to the nearest legal value and the
    /// operation is flagged degraded.
    Clamp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    pub blocks_per_plane: usize,
    pub wordlines_per_block: usize,
    pub page_size_bytes: usize,
    pub dac_step: f64,
    pub register_width: u32,
    pub min_reference_v: f64,
    pub offset_policy: OffsetPolicy,
    pub edge_guard_pe: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RberTarget {
    /// Percent.
    pub target: f64,
    /// Percent, `[low, high]`.
    pub band: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RberTargets {
    pub and: RberTarget,
    pub or: RberTarget,
    pub xnor: RberTarget,
    pub not: RberTarget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabConfig {
    pub pages: usize,
    pub chunk_pages: usize,
    pub cycled_pe: u32,
    pub cycled_retention_hours: f64,
    pub heavy_pe: u32,
    pub sweep_pages_per_point: usize,
    pub targets: RberTargets,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SsdSection {
    pub channels: u32,
    pub dies_per_channel: u32,
    pub planes_per_die: u32,
    pub page_kib: u32,
    pub channel_bw_gib_s: f64,
    pub host_bw_gib_s: f64,
    pub t_r_us: f64,
    pub t_prog_us: f64,
    pub t_setfeature_us: f64,
    pub t_overhead_us: f64,
    pub t_phase_us: f64,
    /// Per-op read latency overrides in µs, keyed by op label.
    #[serde(default)]
    pub read_latency_overrides: std::collections::BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergySection {
    pub e_precharge_uj: f64,
    pub e_sense_per_phase_uj: f64,
    pub e_discharge_uj: f64,
    pub e_prog_uj: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParaBitSection {
    pub t_op_us: f64,
    pub dram_realloc_us: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlashCosmosSection {
    pub t_sense_us: f64,
    pub max_operands: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselinesSection {
    pub parabit: Option<ParaBitSection>,
    pub flashcosmos: Option<FlashCosmosSection>,
    pub targets: BaselineTargets,
}

/// Reported average MCFlash speedups the baseline parameters are fitted
/// to, in workload order: segmentation, encryption, bitmap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineTargets {
    pub parabit: [f64; 3],
    pub flashcosmos: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadsSection {
    pub segmentation_images: Vec<u64>,
    pub encryption_images: Vec<u64>,
    pub bitmap_months: Vec<u32>,
    pub image_width: u64,
    pub image_height: u64,
    pub segmentation_classes: u32,
    pub encryption_bits_per_pixel: u32,
    pub bitmap_users: u64,
    pub days_per_month: u32,
    pub functional_wordlines: usize,
    pub functional_page_bytes: usize,
}

impl Default for Config {
    fn default() -> Self {
        toml::from_str(DEFAULT_TOML).expect("embedded default config parses")
    }
}

impl Config {
    /// Parses a (possibly partial) TOML document layered over the defaults.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut base: toml::Value = toml::from_str(DEFAULT_TOML)?;
        let user: toml::Value = toml::from_str(text)?;
        merge(&mut base, user);
        let cfg: Config = base.try_into()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Applies a single `section.key = value` override, e.g. `ssd.t_r_us=40`.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (path, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
        let mut root = toml::Value::try_from(&*self).map_err(|e| Error::Config(e.to_string()))?;
        let value: toml::Value = toml::from_str::<toml::Table>(&format!("v = {}", value.trim()))?
            .remove("v")
            .expect("parsed key");
        let mut slot = &mut root;
        for part in path.trim().split('.') {
            slot = slot
                .get_mut(part)
                .ok_or_else(|| Error::Config(format!("unknown config key `{path}`")))?;
        }
        *slot = value;
        let cfg: Config = root.try_into()?;
        cfg.validate()?;
        *self = cfg;
        Ok(())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// First 16 hex digits of SHA-256 over the canonical TOML rendering.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.physics;
        if p.family != "gaussian" {
            return Err(Error::Config(format!("unsupported distribution family `{}`", p.family)));
        }
        if !p.mean.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("state means must be strictly increasing".into()));
        }
        if p.sigma.iter().any(|&s| s <= 0.0) || p.k_sigma <= 0.0 {
            return Err(Error::Config("sigmas and k_sigma must be positive".into()));
        }
        let w = &self.wear;
        if w.retention_timescale_hours <= 0.0
            || w.sigma_coeff.iter().any(|&c| c < 0.0)
            || w.sigma_exponent.iter().any(|&e| e <= 0.0)
        {
            return Err(Error::Config("wear coefficients must be non-negative with positive exponents".into()));
        }
        let d = &self.device;
        if d.blocks_per_plane == 0 || d.wordlines_per_block == 0 {
            return Err(Error::Config("device geometry counts must be >= 1".into()));
        }
        if !d.page_size_bytes.is_power_of_two() {
            return Err(Error::Config("page size must be a power of two".into()));
        }
        if d.dac_step <= 0.0 || !(2..=16).contains(&d.register_width) {
            return Err(Error::Config("dac_step must be positive and register_width in 2..=16".into()));
        }
        let s = &self.ssd;
        let positive = [
            s.channel_bw_gib_s,
            s.host_bw_gib_s,
            s.t_r_us,
            s.t_prog_us,
            s.t_overhead_us,
            s.t_phase_us,
        ];
        if s.channels == 0 || s.dies_per_channel == 0 || s.planes_per_die == 0 || s.page_kib == 0
            || positive.iter().any(|&v| v <= 0.0)
            || s.t_setfeature_us < 0.0
        {
            return Err(Error::Config("ssd parameters must be positive".into()));
        }
        if self.lab.chunk_pages == 0 || self.lab.sweep_pages_per_point == 0 {
            return Err(Error::Config("lab page counts must be >= 1".into()));
        }
        Ok(())
    }
}

fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_and_validate() {
        let cfg = Config::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.ssd.channels, 16);
        assert_eq!(cfg.device.page_size_bytes, 16 * 1024);
    }

    #[test]
    fn partial_file_layers_over_defaults() {
        let cfg = Config::from_toml_str("[ssd]\nt_r_us = 45.0\n").unwrap();
        assert_eq!(cfg.ssd.t_r_us, 45.0);
        assert_eq!(cfg.ssd.t_prog_us, 600.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Config::from_toml_str("[ssd]\nbogus = 1\n").is_err());
    }

    #[test]
    fn overrides_and_hash() {
        let mut cfg = Config::default();
        let h0 = cfg.hash();
        cfg.set("device.dac_step=0.05").unwrap();
        assert_eq!(cfg.device.dac_step, 0.05);
        assert_ne!(cfg.hash(), h0);
        assert!(cfg.set("device.nope=1").is_err());
        assert!(cfg.set("device.page_size_bytes=1000").is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = Config::default();
        assert_eq!(Config::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
    }
}
