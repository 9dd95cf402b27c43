//! Bulk bitwise operations on the two pages of a wordline, built from
//! shifted reads, soft-bit reads and inverse reads.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bits::BitPage;
use crate::cell_physics::{CellPhysics, CellState, StateDistribution, WearState};
use crate::config::OffsetPolicy;
use crate::device::{NandDevice, PageAddr, PageKind, ReadRefConfig, RefIndex, SenseLimits, WordlineAddr};
use crate::error::{Error, Result};
use crate::num::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    And,
    Or,
    Xnor,
    Not,
    Nand,
    Nor,
    Xor,
}

impl OpKind {
    pub const ALL: [OpKind; 7] =
        [OpKind::And, OpKind::Or, OpKind::Xnor, OpKind::Not, OpKind::Nand, OpKind::Nor, OpKind::Xor];

    pub fn name(self) -> &'static str {
        match self {
            OpKind::And => "and",
            OpKind::Or => "or",
            OpKind::Xnor => "xnor",
            OpKind::Not => "not",
            OpKind::Nand => "nand",
            OpKind::Nor => "nor",
            OpKind::Xor => "xor",
        }
    }

    /// Host-side reference function of the (LSB, MSB) operand pair.
    /// NOT ignores the LSB operand.
    pub fn eval(self, a: bool, b: bool) -> bool {
        match self {
            OpKind::And => a & b,
            OpKind::Or => a | b,
            OpKind::Xnor => a == b,
            OpKind::Not => !b,
            OpKind::Nand => !(a & b),
            OpKind::Nor => !(a | b),
            OpKind::Xor => a != b,
        }
    }

    /// Page-wide reference result.
    pub fn eval_pages(self, a: &BitPage, b: &BitPage) -> BitPage {
        match self {
            OpKind::And => a.and(b),
            OpKind::Or => a.or(b),
            OpKind::Xnor => a.xnor(b),
            OpKind::Not => b.not(),
            OpKind::Nand => a.nand(b),
            OpKind::Nor => a.nor(b),
            OpKind::Xor => a.xor(b),
        }
    }

    /// Expected output for a cell in `state`, `None` where the state cannot
    /// occur (L0, L1 for NOT).
    pub fn expected(self, state: CellState) -> Option<bool> {
        if self == OpKind::Not && state.lsb() {
            return None;
        }
        Some(self.eval(state.lsb(), state.msb()))
    }

    /// The operation whose complement this is.
    pub fn base(self) -> Option<OpKind> {
        match self {
            OpKind::Nand => Some(OpKind::And),
            OpKind::Nor => Some(OpKind::Or),
            OpKind::Xor => Some(OpKind::Xnor),
            _ => None,
        }
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OpCode {
    pub kind: OpKind,
    /// Only meaningful for NAND, NOR and XOR.
    pub use_inverse_read: bool,
}

impl OpCode {
    pub const fn new(kind: OpKind) -> Self {
        Self { kind, use_inverse_read: false }
    }

    pub const fn inverse(kind: OpKind) -> Self {
        Self { kind, use_inverse_read: true }
    }

    /// The seven operations, complements realized by inverse read.
    pub fn standard() -> [OpCode; 7] {
        OpKind::ALL.map(|k| OpCode { kind: k, use_inverse_read: k.base().is_some() })
    }

    pub fn label(&self) -> String {
        if self.use_inverse_read && self.kind.base().is_some() {
            format!("{}-inv", self.kind)
        } else {
            self.kind.to_string()
        }
    }
}

impl fmt::Display for OpCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Accepts `and`, `nand`, `nand-inv` (also `nand+inv`, `nand_inv`).
impl FromStr for OpCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let (name, inv) = match lower.strip_suffix("-inv").or(lower.strip_suffix("+inv")).or(lower.strip_suffix("_inv")) {
            Some(n) => (n, true),
            None => (lower.as_str(), false),
        };
        let kind = OpKind::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::UnknownName { kind: "opcode", name: s.to_string() })?;
        if inv && kind.base().is_none() {
            return Err(Error::UnknownName { kind: "opcode", name: s.to_string() });
        }
        Ok(OpCode { kind, use_inverse_read: inv })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReadMode {
    Lsb,
    Msb,
    SoftBit,
}

impl ReadMode {
    pub fn sensing_phases(self) -> u32 {
        match self {
            ReadMode::Lsb => 1,
            ReadMode::Msb => 2,
            ReadMode::SoftBit => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ReadMode::Lsb => "LSB",
            ReadMode::Msb => "MSB",
            ReadMode::SoftBit => "SBR",
        }
    }
}

/// Where a shifted reference is meant to land.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Target {
    Default,
    /// Between this state and the next one up.
    Valley(CellState),
    AboveL3,
    BelowL0,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannedShift {
    /// True for the `cfg_minus` half of a soft-bit read.
    pub minus: bool,
    pub reference: RefIndex,
    pub target: Target,
    pub target_v: f64,
    pub requested: i32,
    pub applied: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffsetPlan {
    pub op: OpCode,
    pub mode: ReadMode,
    /// The single-read configuration, or `cfg_plus` for a soft-bit read.
    pub cfg: ReadRefConfig,
    /// `cfg_minus` for a soft-bit read; defaults otherwise.
    pub cfg_minus: ReadRefConfig,
    pub invert: bool,
    pub sensing_phases: u32,
    /// A required shift was truncated by the register range or floor.
    pub degraded: bool,
    pub shifts: Vec<PlannedShift>,
}

impl OffsetPlan {
    /// Offsets as requested before range limiting.
    pub fn requested(&self) -> (ReadRefConfig, ReadRefConfig) {
        let (mut plus, mut minus) = (ReadRefConfig::DEFAULT, ReadRefConfig::DEFAULT);
        for s in &self.shifts {
            let cfg = if s.minus { &mut minus } else { &mut plus };
            cfg.offsets[s.reference as usize] = s.requested;
        }
        (plus, minus)
    }

    pub fn shift(&self, reference: RefIndex, minus: bool) -> Option<&PlannedShift> {
        self.shifts.iter().find(|s| s.reference == reference && s.minus == minus)
    }
}

fn target_voltage<S: Scalar>(physics: &CellPhysics<S>, limits: &SenseLimits<S>, t: Target) -> Option<S> {
    let k = physics.k_sigma;
    let guard = WearState::new(limits.edge_guard_pe, 0.0);
    let edge = |s: CellState| -> StateDistribution<S> {
        let fresh = physics.fresh(s);
        StateDistribution { mean: fresh.mean, sigma: physics.distribution_params(s, guard).sigma.max(fresh.sigma) }
    };
    match t {
        Target::Default => None,
        Target::Valley(lower) => {
            let upper = CellState::from_index(lower.index() + 1)?;
            physics.valley_midpoint(lower, upper, k).ok()
        }
        Target::AboveL3 => Some(edge(CellState::L3).upper_edge(k) + limits.dac_step),
        Target::BelowL0 => Some(edge(CellState::L0).lower_edge(k) - limits.dac_step),
    }
}

type Targets = Vec<(RefIndex, Target)>;

/// Builds the read-offset plan for `op` from fresh nominal distributions.
/// Never fails; out-of-range shifts are clamped and flagged `degraded`.
pub fn plan_offsets<S: Scalar>(op: OpCode, physics: &CellPhysics<S>, limits: &SenseLimits<S>) -> OffsetPlan {
    use RefIndex::*;
    use Target::*;

    let kind = match op.kind.base() {
        Some(base) if op.use_inverse_read => base,
        _ => op.kind,
    };
    let v12 = Valley(CellState::L1);
    let (mode, plus, minus): (ReadMode, Targets, Targets) = match kind {
        OpKind::And => (ReadMode::Lsb, vec![(Vref1, Valley(CellState::L0))], vec![]),
        OpKind::Or => (ReadMode::Msb, vec![(Vref0, v12)], vec![]),
        OpKind::Xnor => (ReadMode::SoftBit, vec![(Vref0, v12), (Vref2, AboveL3)], vec![]),
        OpKind::Not => (ReadMode::Msb, vec![(Vref0, Valley(CellState::L2)), (Vref2, AboveL3)], vec![]),
        OpKind::Nand => (ReadMode::Msb, vec![(Vref0, BelowL0), (Vref2, Valley(CellState::L0))], vec![]),
        OpKind::Nor => (ReadMode::SoftBit, vec![(Vref0, v12), (Vref2, AboveL3)], vec![(Vref0, BelowL0)]),
        OpKind::Xor => (ReadMode::SoftBit, vec![], vec![(Vref0, BelowL0), (Vref2, v12)]),
    };

    let mut plan = OffsetPlan {
        op,
        mode,
        cfg: ReadRefConfig::DEFAULT,
        cfg_minus: ReadRefConfig::DEFAULT,
        invert: op.use_inverse_read && op.kind.base().is_some(),
        sensing_phases: mode.sensing_phases(),
        degraded: false,
        shifts: Vec::new(),
    };
    for (is_minus, list) in [(false, plus), (true, minus)] {
        for (r, t) in list {
            let default = physics.default_refs[r as usize];
            let Some(v) = target_voltage(physics, limits, t) else { continue };
            let raw = ((v - default) / limits.dac_step).as_f64();
            let requested = match t {
                AboveL3 => raw.ceil(),
                BelowL0 => raw.floor(),
                _ => raw.round(),
            } as i32;
            let (lo, hi) = limits.legal_range(default);
            let applied = requested.clamp(lo, hi);
            plan.degraded |= applied != requested;
            let cfg = if is_minus { &mut plan.cfg_minus } else { &mut plan.cfg };
            cfg.offsets[r as usize] = applied;
            plan.shifts.push(PlannedShift { minus: is_minus, reference: r, target: t, target_v: v.as_f64(), requested, applied });
        }
    }
    plan
}

/// Plans for every operation, keyed as in [`OpCode::standard`] plus the
/// non-inverse complements.
pub fn plan_table<S: Scalar>(physics: &CellPhysics<S>, limits: &SenseLimits<S>) -> Vec<OffsetPlan> {
    let mut ops: Vec<OpCode> = OpKind::ALL.iter().map(|&k| OpCode::new(k)).collect();
    ops.extend([OpKind::Nand, OpKind::Nor, OpKind::Xor].map(OpCode::inverse));
    ops.into_iter().map(|op| plan_offsets(op, physics, limits)).collect()
}

/// Plain-text rendering of a plan table: signed DAC steps per reference.
pub fn format_plan_table(plans: &[OffsetPlan]) -> String {
    let mut out = format!("{:<10} {:<4} {:<6} {:>6} {:>6} {:>6}  {}\n", "op", "read", "cfg", "VREF0", "VREF1", "VREF2", "flags");
    for p in plans {
        let rows: Vec<(&str, ReadRefConfig)> = match p.mode {
            ReadMode::SoftBit => vec![("plus", p.cfg), ("minus", p.cfg_minus)],
            _ => vec![("single", p.cfg)],
        };
        for (i, (name, c)) in rows.into_iter().enumerate() {
            let mut flags = Vec::new();
            if i == 0 && p.invert {
                flags.push("inverse");
            }
            if i == 0 && p.degraded {
                flags.push("degraded");
            }
            let o = c.offsets;
            out.push_str(&format!(
                "{:<10} {:<4} {:<6} {:>+6} {:>+6} {:>+6}  {}\n",
                if i == 0 { p.op.label() } else { String::new() },
                if i == 0 { p.mode.name() } else { "" },
                name,
                o[0],
                o[1],
                o[2],
                flags.join(",")
            ));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct OpResult {
    pub page: BitPage,
    pub degraded: bool,
    pub sensing_phases: u32,
}

/// Programs `a` as the LSB page and `b` as the MSB page of `wl`.
pub fn write_operands<S: Scalar>(device: &mut NandDevice<S>, wl: WordlineAddr, a: &BitPage, b: &BitPage) -> Result<()> {
    device.program_wordline(wl, a, b)
}

/// NOT setup: LSB forced all-zero so cells land only in L2 or L3.
pub fn write_not_operand<S: Scalar>(device: &mut NandDevice<S>, wl: WordlineAddr, m: &BitPage) -> Result<()> {
    device.program_wordline(wl, &BitPage::zeros(m.len()), m)
}

/// First erased wordline, or an error when the device is full.
pub fn allocate<S: Scalar>(device: &NandDevice<S>, needed: usize) -> Result<Vec<WordlineAddr>> {
    let free = device.erased_wordlines();
    if free.len() < needed {
        return Err(Error::InsufficientCapacity { needed, available: free.len() });
    }
    Ok(free[..needed].to_vec())
}

/// Runs `op` on the operand pair stored in `wl`.
pub fn execute<S: Scalar>(device: &mut NandDevice<S>, wl: WordlineAddr, op: OpCode) -> Result<OpResult> {
    let plan = plan_offsets(op, device.physics(), device.limits());
    execute_plan(device, wl, &plan)
}

/// Runs a prepared plan; lets callers plan once for many wordlines.
pub fn execute_plan<S: Scalar>(device: &mut NandDevice<S>, wl: WordlineAddr, plan: &OffsetPlan) -> Result<OpResult> {
    if !device.is_programmed(wl)? {
        return Err(Error::NotProgrammed { block: wl.block, wordline: wl.wordline });
    }
    if plan.op.kind == OpKind::Not && !device.states_satisfy(wl, |s| !s.lsb())? {
        return Err(Error::NotRequiresZeroLsb);
    }
    let (mut plus, mut minus) = (plan.cfg, plan.cfg_minus);
    if plan.degraded && device.limits().policy == OffsetPolicy::Error {
        (plus, minus) = plan.requested();
    }
    let applied = device.set_feature(plus)?.applied;
    let page = match plan.mode {
        ReadMode::Lsb | ReadMode::Msb => {
            let kind = if plan.mode == ReadMode::Lsb { PageKind::Lsb } else { PageKind::Msb };
            if plan.invert {
                device.inverse_read(wl.page(kind), &applied)?
            } else {
                device.read_page(wl.page(kind), &applied)?
            }
        }
        ReadMode::SoftBit => {
            let p = device.soft_bit_read(wl, &applied, &minus)?;
            if plan.invert {
                p.not()
            } else {
                p
            }
        }
    };
    Ok(OpResult { page, degraded: plan.degraded, sensing_phases: plan.sensing_phases })
}

/// Extra work spent bringing two operands onto one wordline.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentCost {
    pub reads: u32,
    pub programs: u32,
}

impl AlignmentCost {
    /// Reads on the critical path including the compute read that follows.
    pub fn reads_with_compute(&self) -> u32 {
        self.reads + 1
    }
}

/// Copies `src_a` and `src_b` into the LSB and MSB pages of the erased
/// wordline `dst` via copyback.
pub fn align_operands<S: Scalar>(
    device: &mut NandDevice<S>,
    src_a: PageAddr,
    src_b: PageAddr,
    dst: WordlineAddr,
) -> Result<AlignmentCost> {
    if device.is_programmed(dst)? {
        return Err(Error::NotErased { block: dst.block, wordline: dst.wordline });
    }
    device.copyback(src_a, dst.page(PageKind::Lsb))?;
    device.copyback(src_b, dst.page(PageKind::Msb))?;
    Ok(AlignmentCost { reads: 2, programs: 1 })
}

/// Observed per-state outputs over a wordline holding each state in turn.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TruthRow {
    pub op: OpCode,
    /// `Some(bit)` when every cell of that state read `bit`.
    pub observed: [Option<bool>; 4],
    pub expected: [Option<bool>; 4],
    pub mismatches: u64,
    pub cells: u64,
    pub degraded: bool,
}

impl TruthRow {
    pub fn passed(&self) -> bool {
        self.mismatches == 0
    }
}

/// Operand pages that put cell `i` into state `i mod 4` (`i mod 2 + 2` for NOT).
pub fn state_pattern(n: usize, op: OpKind) -> (BitPage, BitPage) {
    let state = |i: usize| {
        if op == OpKind::Not {
            CellState::from_index(2 + i % 2).expect("index")
        } else {
            CellState::from_index(i % 4).expect("index")
        }
    };
    (BitPage::from_fn(n, |i| state(i).lsb()), BitPage::from_fn(n, |i| state(i).msb()))
}

/// Programs the state pattern into `wl`, executes `op` and compares every
/// cell with the Gray-pair truth table.
pub fn truth_table<S: Scalar>(device: &mut NandDevice<S>, wl: WordlineAddr, op: OpCode) -> Result<TruthRow> {
    let n = device.cells();
    let (lsb, msb) = state_pattern(n, op.kind);
    write_operands(device, wl, &lsb, &msb)?;
    let r = execute(device, wl, op)?;
    let mut seen: [Option<Option<bool>>; 4] = [None; 4];
    let mut mismatches = 0;
    for i in 0..n {
        let s = CellState::from_bits(lsb.get(i), msb.get(i));
        let bit = r.page.get(i);
        if op.kind.expected(s) != Some(bit) {
            mismatches += 1;
        }
        let slot = &mut seen[s.index()];
        *slot = match *slot {
            None => Some(Some(bit)),
            Some(Some(b)) if b == bit => Some(Some(b)),
            _ => Some(None),
        };
    }
    Ok(TruthRow {
        op,
        observed: seen.map(Option::flatten),
        expected: CellState::ALL.map(|s| op.kind.expected(s)),
        mismatches,
        cells: n as u64,
        degraded: r.degraded,
    })
}
