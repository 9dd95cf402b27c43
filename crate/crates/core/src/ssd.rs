//! Closed-form SSD timing and energy for outside-storage, in-storage and
//! in-flash execution of bulk bitwise work.
//!
//! The unit of work is a stripe: one page on every plane of the drive
//! (8 MiB with the default geometry). Sizes are binary (KiB, GiB).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::{Config, EnergySection, FlashCosmosSection, ParaBitSection};
use crate::engine::{OpCode, OpKind};
use crate::error::{Error, Result};

pub const KIB: f64 = 1024.0;
pub const GIB: f64 = 1024.0 * 1024.0 * 1024.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SsdConfig {
    pub channels: u32,
    pub dies_per_channel: u32,
    pub planes_per_die: u32,
    pub page_bytes: f64,
    /// Bytes per second.
    pub channel_bw: f64,
    pub host_bw: f64,
    pub t_r_us: f64,
    pub t_prog_us: f64,
    pub t_setfeature_us: f64,
    pub t_overhead_us: f64,
    pub t_phase_us: f64,
    pub read_latency_overrides: BTreeMap<String, f64>,
}

impl SsdConfig {
    pub fn from_config(cfg: &Config) -> Self {
        let s = &cfg.ssd;
        Self {
            channels: s.channels,
            dies_per_channel: s.dies_per_channel,
            planes_per_die: s.planes_per_die,
            page_bytes: s.page_kib as f64 * KIB,
            channel_bw: s.channel_bw_gib_s * GIB,
            host_bw: s.host_bw_gib_s * GIB,
            t_r_us: s.t_r_us,
            t_prog_us: s.t_prog_us,
            t_setfeature_us: s.t_setfeature_us,
            t_overhead_us: s.t_overhead_us,
            t_phase_us: s.t_phase_us,
            read_latency_overrides: s.read_latency_overrides.clone(),
        }
    }

    pub fn total_planes(&self) -> u32 {
        self.channels * self.dies_per_channel * self.planes_per_die
    }

    /// Bytes in one stripe (one page per plane).
    pub fn stripe_bytes(&self) -> f64 {
        self.total_planes() as f64 * self.page_bytes
    }

    /// Host-link transfer slots per stripe.
    fn ext_per_stripe(&self) -> f64 {
        self.dies_per_channel as f64
    }
}

impl Default for SsdConfig {
    fn default() -> Self {
        Self::from_config(&Config::default())
    }
}

/// `(t_dma, t_ext)` in µs: one die's multi-plane page set over its
/// channel, and one page per plane per channel over the host link.
pub fn transfer_times(cfg: &SsdConfig) -> (f64, f64) {
    let die_bytes = cfg.planes_per_die as f64 * cfg.page_bytes;
    let t_dma = die_bytes / cfg.channel_bw * 1e6;
    let t_ext = cfg.channels as f64 * die_bytes / cfg.host_bw * 1e6;
    (t_dma, t_ext)
}

/// Sensing phases of the read an op compiles to.
pub fn sensing_phases(op: OpCode) -> u32 {
    let kind = match op.kind.base() {
        Some(base) if op.use_inverse_read => base,
        _ => op.kind,
    };
    match kind {
        OpKind::And => 1,
        OpKind::Or | OpKind::Not | OpKind::Nand => 2,
        OpKind::Xnor | OpKind::Nor | OpKind::Xor => 4,
    }
}

/// `t_overhead + phases * t_phase`, unless overridden for this op.
pub fn read_latency(cfg: &SsdConfig, op: OpCode) -> f64 {
    if let Some(&t) = cfg.read_latency_overrides.get(&op.label()) {
        return t;
    }
    cfg.t_overhead_us + sensing_phases(op) as f64 * cfg.t_phase_us
}

/// Reads for a sequence of ops, charging `t_setfeature` whenever the op
/// differs from the previous one. The first op is assumed preconfigured.
pub fn read_sequence_latency(cfg: &SsdConfig, ops: &[OpCode]) -> f64 {
    let switches = ops.windows(2).filter(|w| w[0] != w[1]).count();
    ops.iter().map(|&op| read_latency(cfg, op)).sum::<f64>() + switches as f64 * cfg.t_setfeature_us
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Paradigm {
    Osc,
    Isc,
    IfcAligned,
    IfcNonAligned,
    ParaBit,
    FlashCosmos,
}

impl Paradigm {
    pub const ALL: [Paradigm; 6] = [
        Paradigm::Osc,
        Paradigm::Isc,
        Paradigm::IfcAligned,
        Paradigm::IfcNonAligned,
        Paradigm::ParaBit,
        Paradigm::FlashCosmos,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Paradigm::Osc => "osc",
            Paradigm::Isc => "isc",
            Paradigm::IfcAligned => "ifc-aligned",
            Paradigm::IfcNonAligned => "ifc-nonaligned",
            Paradigm::ParaBit => "parabit",
            Paradigm::FlashCosmos => "flashcosmos",
        }
    }

    pub fn is_baseline(self) -> bool {
        matches!(self, Paradigm::ParaBit | Paradigm::FlashCosmos)
    }
}

impl fmt::Display for Paradigm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Paradigm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Paradigm::ALL
            .into_iter()
            .find(|p| p.name() == norm)
            .ok_or_else(|| Error::UnknownName { kind: "paradigm", name: s.to_string() })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Phase {
    pub name: String,
    pub us: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Timeline {
    pub paradigm: Paradigm,
    pub total_us: f64,
    pub breakdown: Vec<Phase>,
    /// Set for the analytic baselines, whose parameters are fitted.
    pub calibrated: bool,
}

impl Timeline {
    fn new(paradigm: Paradigm, phases: Vec<(String, f64)>) -> Self {
        let breakdown: Vec<Phase> =
            phases.into_iter().filter(|(_, us)| *us != 0.0).map(|(name, us)| Phase { name, us }).collect();
        Self { paradigm, total_us: breakdown.iter().map(|p| p.us).sum(), breakdown, calibrated: paradigm.is_baseline() }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            paradigm: self.paradigm,
            total_us: self.total_us * factor,
            breakdown: self.breakdown.iter().map(|p| Phase { name: p.name.clone(), us: p.us * factor }).collect(),
            calibrated: self.calibrated,
        }
    }
}

/// One in-flash operation of a stripe job.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OpStep {
    pub op: OpCode,
    /// False when the operands must first be copied onto one wordline.
    pub aligned: bool,
}

/// Work on one stripe: `operands` input vectors, `results` output vectors
/// returned to the host, and the in-flash op sequence producing them.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StripeJob {
    pub operands: u32,
    pub results: u32,
    pub steps: Vec<OpStep>,
    /// Operand count of each independent reduction chain (for
    /// multi-operand sensing).
    pub chains: Vec<u32>,
}

impl StripeJob {
    /// A single two-operand op.
    pub fn pair(op: OpCode, aligned: bool) -> Self {
        Self { operands: 2, results: 1, steps: vec![OpStep { op, aligned }], chains: vec![2] }
    }
}

/// Analytic parameters for the two in-flash baselines.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Baselines {
    pub parabit: Option<ParaBitSection>,
    pub flashcosmos: Option<FlashCosmosSection>,
}

impl Baselines {
    pub fn from_config(cfg: &Config) -> Self {
        Self { parabit: cfg.baselines.parabit.clone(), flashcosmos: cfg.baselines.flashcosmos.clone() }
    }
}

fn ifc_steps(cfg: &SsdConfig, job: &StripeJob, read_us: &dyn Fn(OpCode) -> f64) -> Vec<(String, f64)> {
    let mut align = 0.0;
    let mut compute = 0.0;
    let mut switches = 0;
    for (i, s) in job.steps.iter().enumerate() {
        if !s.aligned {
            align += 2.0 * cfg.t_r_us + cfg.t_prog_us;
        }
        compute += read_us(s.op);
        if i > 0 && job.steps[i - 1].op != s.op {
            switches += 1;
        }
    }
    if job.steps.is_empty() {
        compute = cfg.t_r_us;
    }
    vec![
        ("align (2 t_R + t_prog)".into(), align),
        ("compute read".into(), compute),
        ("set feature".into(), switches as f64 * cfg.t_setfeature_us),
    ]
}

/// Timeline of `job` under one of the four derived paradigms.
pub fn job_timeline(paradigm: Paradigm, cfg: &SsdConfig, job: &StripeJob, use_op_latency: bool) -> Result<Timeline> {
    let (t_dma, t_ext) = transfer_times(cfg);
    let e = cfg.ext_per_stripe();
    let v = job.operands as f64;
    let r = job.results as f64;
    let read_us = |op: OpCode| if use_op_latency { read_latency(cfg, op) } else { cfg.t_r_us };
    let result_out = [("t_DMA".to_string(), t_dma), ("result to host".to_string(), e * r * t_ext)];
    let phases: Vec<(String, f64)> = match paradigm {
        Paradigm::Osc => vec![
            ("t_R".into(), cfg.t_r_us),
            ("t_DMA".into(), t_dma),
            ("operands to host".into(), e * v * t_ext),
        ],
        Paradigm::Isc => vec![
            ("t_R".into(), cfg.t_r_us),
            ("operands to controller".into(), (e * (v - 1.0) + 1.0) * t_dma),
            ("result to host".into(), e * r * t_ext),
        ],
        Paradigm::IfcAligned | Paradigm::IfcNonAligned => {
            let mut j = job.clone();
            if paradigm == Paradigm::IfcNonAligned {
                for s in &mut j.steps {
                    s.aligned = false;
                }
            }
            let mut p = ifc_steps(cfg, &j, &read_us);
            p.extend(result_out);
            p
        }
        Paradigm::ParaBit | Paradigm::FlashCosmos => {
            return Err(Error::Config(format!("{paradigm} needs baseline parameters")));
        }
    };
    Ok(Timeline::new(paradigm, phases))
}

/// Calibrated analytic baselines.
pub fn baseline_job_timeline(paradigm: Paradigm, cfg: &SsdConfig, job: &StripeJob, params: &Baselines) -> Result<Timeline> {
    let (t_dma, t_ext) = transfer_times(cfg);
    let out = [("t_DMA".to_string(), t_dma), ("result to host".to_string(), cfg.ext_per_stripe() * job.results as f64 * t_ext)];
    let mut phases: Vec<(String, f64)> = match paradigm {
        Paradigm::ParaBit => {
            let p = params.parabit.as_ref().ok_or(Error::MissingParams("parabit"))?;
            let n = job.steps.len() as f64;
            if job.steps.is_empty() {
                vec![("t_R".into(), cfg.t_r_us)]
            } else {
                vec![("latch ops".into(), n * p.t_op_us), ("DRAM reallocation".into(), n * p.dram_realloc_us)]
            }
        }
        Paradigm::FlashCosmos => {
            let p = params.flashcosmos.as_ref().ok_or(Error::MissingParams("flashcosmos"))?;
            let per = (p.max_operands.max(2) - 1) as u64;
            let sensings: u64 = job.chains.iter().map(|&n| (n.max(2) as u64 - 1).div_ceil(per)).sum();
            if job.steps.is_empty() {
                vec![("t_R".into(), cfg.t_r_us)]
            } else {
                vec![("multi-wordline sensing".into(), sensings as f64 * p.t_sense_us)]
            }
        }
        _ => return job_timeline(paradigm, cfg, job, true),
    };
    phases.extend(out);
    Ok(Timeline::new(paradigm, phases))
}

/// The single two-operand scenario: 8 MiB operands, one page per plane.
/// With `op = None` every read costs the generic `t_R`.
pub fn timeline(paradigm: Paradigm, cfg: &SsdConfig, op: Option<OpCode>) -> Result<Timeline> {
    let job = StripeJob::pair(op.unwrap_or(OpCode::new(OpKind::And)), paradigm != Paradigm::IfcNonAligned);
    job_timeline(paradigm, cfg, &job, op.is_some())
}

pub fn baseline_timeline(paradigm: Paradigm, cfg: &SsdConfig, op: OpCode, params: &Baselines) -> Result<Timeline> {
    if !paradigm.is_baseline() {
        return Err(Error::UnknownName { kind: "baseline paradigm", name: paradigm.to_string() });
    }
    baseline_job_timeline(paradigm, cfg, &StripeJob::pair(op, true), params)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    pub e_precharge_uj: f64,
    pub e_sense_per_phase_uj: f64,
    pub e_discharge_uj: f64,
    pub e_prog_uj: f64,
}

impl EnergyModel {
    pub fn from_config(e: &EnergySection) -> Self {
        Self {
            e_precharge_uj: e.e_precharge_uj,
            e_sense_per_phase_uj: e.e_sense_per_phase_uj,
            e_discharge_uj: e.e_discharge_uj,
            e_prog_uj: e.e_prog_uj,
        }
    }

    pub fn per_read(&self, phases: u32) -> f64 {
        self.e_precharge_uj + phases as f64 * self.e_sense_per_phase_uj + self.e_discharge_uj
    }

    /// Per-KiB energy of an aligned op on one page.
    pub fn energy_per_kb(&self, op: OpCode, page_kib: f64) -> f64 {
        self.per_read(sensing_phases(op)) / page_kib
    }

    /// Per-KiB energy including the two default-reference reads and the
    /// program of operand alignment.
    pub fn non_aligned_energy_per_kb(&self, op: OpCode, page_kib: f64) -> f64 {
        (2.0 * self.per_read(2) + self.e_prog_uj + self.per_read(sensing_phases(op))) / page_kib
    }
}

impl Default for EnergyModel {
    fn default() -> Self {
        Self::from_config(&Config::default().energy)
    }
}

/// One CSV/JSON row per timeline phase.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimelineRow {
    pub paradigm: String,
    pub op: String,
    pub phase: String,
    pub us: f64,
    pub total_us: f64,
    pub calibrated: bool,
}

impl Timeline {
    pub fn rows(&self, op: &str) -> Vec<TimelineRow> {
        self.breakdown
            .iter()
            .map(|p| TimelineRow {
                paradigm: self.paradigm.to_string(),
                op: op.to_string(),
                phase: p.name.clone(),
                us: p.us,
                total_us: self.total_us,
                calibrated: self.calibrated,
            })
            .collect()
    }
}
