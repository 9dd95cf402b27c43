//! RBER experiments: random-operand runs, offset sweeps, cycling and
//! retention stress, plus the analytic predictor and wear calibration.
//!
//! Large runs are split into chunks. Each chunk gets its own device and a
//! seed derived from (master seed, chunk index), so results do not depend
//! on thread count or scheduling.

pub mod analytic;
pub mod calibrate;

use std::ops::RangeInclusive;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::bits::BitPage;
use crate::cell_physics::WearState;
use crate::config::Config;
use crate::device::{DeviceGeometry, NandDevice, RefIndex, WordlineAddr};
use crate::engine::{self, OffsetPlan, OpCode, OpKind};
use crate::error::{Error, Result};
use crate::num::Scalar;

/// Number of equal-width position bins used for the spatial uniformity test.
pub const POSITION_BINS: usize = 16;

/// Independent sub-seed for stream `stream` of `master`.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng.next_u64()
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Tally {
    pub pages: u64,
    pub bits: u64,
    pub mismatches: u64,
    pub bins: [u64; POSITION_BINS],
}

impl Tally {
    pub fn add(&mut self, other: &Tally) {
        self.pages += other.pages;
        self.bits += other.bits;
        self.mismatches += other.mismatches;
        for (a, b) in self.bins.iter_mut().zip(other.bins) {
            *a += b;
        }
    }

    fn record(&mut self, diff: &BitPage) {
        let n = diff.len();
        self.pages += 1;
        self.bits += n as u64;
        for i in diff.ones_positions() {
            self.mismatches += 1;
            self.bins[i * POSITION_BINS / n] += 1;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RberReport {
    pub op: String,
    pub wear: WearState,
    /// Executes performed (one per page).
    pub trials: u64,
    pub pages_tested: u64,
    pub bits_compared: u64,
    pub mismatches: u64,
    pub rber_percent: f64,
    /// Rule-of-three 95% upper bound, reported when a worn run saw no errors.
    pub upper_bound_percent: Option<f64>,
    pub position_bins: Vec<u64>,
}

impl RberReport {
    pub fn from_tally(op: OpCode, wear: WearState, t: &Tally) -> Self {
        let rber_percent = if t.bits == 0 { 0.0 } else { 100.0 * t.mismatches as f64 / t.bits as f64 };
        let upper_bound_percent = (t.mismatches == 0 && !wear.is_fresh() && t.bits > 0).then(|| 300.0 / t.bits as f64);
        Self {
            op: op.label(),
            wear,
            trials: t.pages,
            pages_tested: t.pages,
            bits_compared: t.bits,
            mismatches: t.mismatches,
            rber_percent,
            upper_bound_percent,
            position_bins: t.bins.to_vec(),
        }
    }

    pub fn fraction(&self) -> f64 {
        self.rber_percent / 100.0
    }

    /// Chi-squared uniformity of mismatch positions across the page.
    pub fn uniformity(&self) -> Option<Uniformity> {
        uniformity(&self.position_bins, 0.01)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Uniformity {
    pub statistic: f64,
    pub dof: u32,
    pub critical: f64,
    pub p_value: f64,
}

impl Uniformity {
    pub fn passed(&self) -> bool {
        self.statistic <= self.critical
    }
}

/// Pearson chi-squared test against equal bin probabilities. `None` when
/// there are fewer than five expected counts per bin.
pub fn uniformity(bins: &[u64], significance: f64) -> Option<Uniformity> {
    let total: u64 = bins.iter().sum();
    let k = bins.len();
    let expected = total as f64 / k as f64;
    if k < 2 || expected < 5.0 {
        return None;
    }
    let statistic = bins.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
    let dof = (k - 1) as u32;
    let dist = ChiSquared::new(dof as f64).expect("dof > 0");
    Some(Uniformity {
        statistic,
        dof,
        critical: dist.inverse_cdf(1.0 - significance),
        p_value: dist.sf(statistic),
    })
}

/// Device with one block per `wordlines_per_block` pages, every block
/// fast-forwarded to `pe_cycles`.
pub fn preconditioned<S: Scalar>(cfg: &Config, wordlines: usize, pe_cycles: u32, seed: u64) -> NandDevice<S> {
    let per_block = cfg.device.wordlines_per_block;
    let geometry = DeviceGeometry::new(wordlines.div_ceil(per_block).max(1), per_block, cfg.device.page_size_bytes)
        .expect("validated config");
    let mut d = NandDevice::with_geometry(cfg, geometry, seed);
    for b in 0..geometry.blocks_per_plane {
        d.set_block_wear(b, pe_cycles).expect("block in range");
    }
    d
}

/// `n` rounds of (program one wordline with random data, erase block).
pub fn cycle_block<S: Scalar>(device: &mut NandDevice<S>, block: usize, n: u32) -> Result<()> {
    device.block_meta(block)?;
    let wl = WordlineAddr::new(block, 0);
    for _ in 0..n {
        if !device.is_programmed(wl)? {
            let (a, b) = (device.random_page(), device.random_page());
            device.program_wordline(wl, &a, &b)?;
        }
        device.erase_block(block)?;
    }
    Ok(())
}

/// Advances every block's retention clock.
pub fn bake_all<S: Scalar>(device: &mut NandDevice<S>, hours: f64) -> Result<()> {
    for b in 0..device.geometry().blocks_per_plane {
        device.retention_bake(b, hours)?;
    }
    Ok(())
}

/// Writes fresh random operands for `op` into each wordline.
pub fn write_random_operands<S: Scalar>(
    device: &mut NandDevice<S>,
    op: OpKind,
    wls: &[WordlineAddr],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(BitPage, BitPage)>> {
    let n = device.cells();
    wls.iter()
        .map(|&wl| {
            let b = BitPage::random(n, rng);
            let a = if op == OpKind::Not { BitPage::zeros(n) } else { BitPage::random(n, rng) };
            engine::write_operands(device, wl, &a, &b)?;
            Ok((a, b))
        })
        .collect()
}

/// Executes `plan` on each wordline and compares with the host result.
pub fn score<S: Scalar>(
    device: &mut NandDevice<S>,
    plan: &OffsetPlan,
    wls: &[WordlineAddr],
    operands: &[(BitPage, BitPage)],
) -> Result<Tally> {
    let mut t = Tally::default();
    for (&wl, (a, b)) in wls.iter().zip(operands) {
        let got = engine::execute_plan(device, wl, plan)?.page;
        t.record(&got.xor(&plan.op.kind.eval_pages(a, b)));
    }
    Ok(t)
}

/// Sequential measurement on an existing device: random operands into the
/// first `pages` erased wordlines, one execute each.
pub fn measure_rber<S: Scalar>(
    device: &mut NandDevice<S>,
    op: OpCode,
    pages: usize,
    rng: &mut ChaCha8Rng,
) -> Result<RberReport> {
    let wls = engine::allocate(device, pages)?;
    let wear = device.block_meta(wls.first().map_or(0, |w| w.block))?.wear;
    let operands = write_random_operands(device, op.kind, &wls, rng)?;
    let plan = engine::plan_offsets(op, device.physics(), device.limits());
    let t = score(device, &plan, &wls, &operands)?;
    Ok(RberReport::from_tally(op, wear, &t))
}

fn chunks(pages: usize, chunk: usize) -> Vec<(u64, usize)> {
    (0..pages.div_ceil(chunk)).map(|i| (i as u64, chunk.min(pages - i * chunk))).collect()
}

type PreparedChunk<S> = (NandDevice<S>, Vec<WordlineAddr>, Vec<(BitPage, BitPage)>);

/// Random pages programmed at `wear.pe_cycles`, aged by `wear.retention_hours`.
fn prepared_chunk<S: Scalar>(
    cfg: &Config,
    op: OpKind,
    wear: WearState,
    pages: usize,
    seed: u64,
) -> Result<PreparedChunk<S>> {
    let mut d = preconditioned::<S>(cfg, pages, wear.pe_cycles, derive_seed(seed, 0));
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let wls = engine::allocate(&d, pages)?;
    let operands = write_random_operands(&mut d, op, &wls, &mut rng)?;
    bake_all(&mut d, wear.retention_hours)?;
    Ok((d, wls, operands))
}

/// Parallel RBER measurement over `pages` random pages at `wear`.
pub fn run_rber<S: Scalar>(cfg: &Config, op: OpCode, wear: WearState, pages: usize, seed: u64) -> Result<RberReport> {
    let tallies: Vec<Result<Tally>> = chunks(pages, cfg.lab.chunk_pages)
        .into_par_iter()
        .map(|(i, n)| {
            let (mut d, wls, ops) = prepared_chunk::<S>(cfg, op.kind, wear, n, derive_seed(seed, i))?;
            let plan = engine::plan_offsets(op, d.physics(), d.limits());
            score(&mut d, &plan, &wls, &ops)
        })
        .collect();
    let mut total = Tally::default();
    for t in tallies {
        total.add(&t?);
    }
    Ok(RberReport::from_tally(op, wear, &total))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepCurve {
    pub op: String,
    pub reference: RefIndex,
    pub wear: WearState,
    pub offset_steps: Vec<i32>,
    pub rber_percent: Vec<f64>,
    pub mismatches: Vec<u64>,
    pub pages_per_point: u64,
    pub bits_per_point: u64,
    /// Longest contiguous run of zero-error points, inclusive.
    pub zero_window: Option<(i32, i32)>,
}

impl SweepCurve {
    fn from_tallies(op: OpCode, reference: RefIndex, wear: WearState, offsets: Vec<i32>, t: &[Tally]) -> Self {
        let mismatches: Vec<u64> = t.iter().map(|t| t.mismatches).collect();
        let bits = t.first().map_or(0, |t| t.bits);
        let pages = t.first().map_or(0, |t| t.pages);
        let rber_percent = mismatches.iter().map(|&m| 100.0 * m as f64 / bits.max(1) as f64).collect();
        let zero_window = zero_window(&offsets, &mismatches);
        Self { op: op.label(), reference, wear, offset_steps: offsets, rber_percent, mismatches, pages_per_point: pages, bits_per_point: bits, zero_window }
    }

    pub fn window_width(&self) -> usize {
        self.zero_window.map_or(0, |(lo, hi)| (hi - lo + 1) as usize)
    }
}

fn zero_window(offsets: &[i32], mismatches: &[u64]) -> Option<(i32, i32)> {
    let mut best: Option<(usize, usize)> = None;
    let mut start = None;
    for i in 0..=mismatches.len() {
        let zero = i < mismatches.len() && mismatches[i] == 0;
        match (zero, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                if best.is_none_or(|(bs, be)| i - s > be - bs + 1) {
                    best = Some((s, i - 1));
                }
                start = None;
            }
            _ => {}
        }
    }
    best.map(|(s, e)| (offsets[s], offsets[e]))
}

/// Which half of the plan holds `reference`; errors if neither does.
fn swept_side(plan: &OffsetPlan, reference: RefIndex) -> Result<bool> {
    if plan.shift(reference, false).is_some() {
        Ok(false)
    } else if plan.shift(reference, true).is_some() {
        Ok(true)
    } else {
        Err(Error::ReferenceNotUsed { op: plan.op.label(), reference })
    }
}

fn check_sweep_range<S: Scalar>(device: &NandDevice<S>, reference: RefIndex, range: &RangeInclusive<i32>) -> Result<()> {
    let limits = device.limits();
    let d = device.physics().default_refs[reference as usize];
    limits.check(reference, d, *range.start())?;
    limits.check(reference, d, *range.end())
}

fn sweep_tallies<S: Scalar>(
    device: &mut NandDevice<S>,
    base: &OffsetPlan,
    reference: RefIndex,
    minus: bool,
    offsets: &[i32],
    wls: &[WordlineAddr],
    operands: &[(BitPage, BitPage)],
) -> Result<Vec<Tally>> {
    offsets
        .iter()
        .map(|&o| {
            let mut plan = base.clone();
            let cfg = if minus { &mut plan.cfg_minus } else { &mut plan.cfg };
            cfg.offsets[reference as usize] = o;
            plan.degraded = false;
            score(device, &plan, wls, operands)
        })
        .collect()
}

/// Varies one reference of `op`'s plan across `range` with everything else
/// fixed. The same stored operands are read at every point.
pub fn sweep_offset<S: Scalar>(
    device: &mut NandDevice<S>,
    op: OpCode,
    reference: RefIndex,
    range: RangeInclusive<i32>,
    pages_per_point: usize,
    rng: &mut ChaCha8Rng,
) -> Result<SweepCurve> {
    let plan = engine::plan_offsets(op, device.physics(), device.limits());
    let minus = swept_side(&plan, reference)?;
    check_sweep_range(device, reference, &range)?;
    let wls = engine::allocate(device, pages_per_point)?;
    let wear = device.block_meta(wls[0].block)?.wear;
    let operands = write_random_operands(device, op.kind, &wls, rng)?;
    let offsets: Vec<i32> = range.collect();
    let t = sweep_tallies(device, &plan, reference, minus, &offsets, &wls, &operands)?;
    Ok(SweepCurve::from_tallies(op, reference, wear, offsets, &t))
}

/// Parallel sweep at a given wear point.
pub fn run_sweep<S: Scalar>(
    cfg: &Config,
    op: OpCode,
    reference: RefIndex,
    range: RangeInclusive<i32>,
    pages_per_point: usize,
    wear: WearState,
    seed: u64,
) -> Result<SweepCurve> {
    let probe = preconditioned::<S>(cfg, 1, 0, 0);
    let plan = engine::plan_offsets(op, probe.physics(), probe.limits());
    let minus = swept_side(&plan, reference)?;
    check_sweep_range(&probe, reference, &range)?;
    let offsets: Vec<i32> = range.collect();
    let parts: Vec<Result<Vec<Tally>>> = chunks(pages_per_point, cfg.lab.chunk_pages)
        .into_par_iter()
        .map(|(i, n)| {
            let (mut d, wls, ops) = prepared_chunk::<S>(cfg, op.kind, wear, n, derive_seed(seed, i))?;
            sweep_tallies(&mut d, &plan, reference, minus, &offsets, &wls, &ops)
        })
        .collect();
    let mut total = vec![Tally::default(); offsets.len()];
    for p in parts {
        for (a, b) in total.iter_mut().zip(p?) {
            a.add(&b);
        }
    }
    Ok(SweepCurve::from_tallies(op, reference, wear, offsets, &total))
}

/// One CSV row per (op, wear point, offset).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RberRow {
    pub op: String,
    pub pe_cycles: u32,
    pub retention_hours: f64,
    pub offset_steps: Option<i32>,
    pub pages: u64,
    pub bits: u64,
    pub mismatches: u64,
    pub rber_percent: f64,
    pub upper_bound_percent: Option<f64>,
    pub window_low: Option<i32>,
    pub window_high: Option<i32>,
}

impl From<&RberReport> for RberRow {
    fn from(r: &RberReport) -> Self {
        Self {
            op: r.op.clone(),
            pe_cycles: r.wear.pe_cycles,
            retention_hours: r.wear.retention_hours,
            offset_steps: None,
            pages: r.pages_tested,
            bits: r.bits_compared,
            mismatches: r.mismatches,
            rber_percent: r.rber_percent,
            upper_bound_percent: r.upper_bound_percent,
            window_low: None,
            window_high: None,
        }
    }
}

impl SweepCurve {
    pub fn rows(&self) -> Vec<RberRow> {
        self.offset_steps
            .iter()
            .zip(&self.mismatches)
            .zip(&self.rber_percent)
            .map(|((&o, &m), &r)| RberRow {
                op: self.op.clone(),
                pe_cycles: self.wear.pe_cycles,
                retention_hours: self.wear.retention_hours,
                offset_steps: Some(o),
                pages: self.pages_per_point,
                bits: self.bits_per_point,
                mismatches: m,
                rber_percent: r,
                upper_bound_percent: None,
                window_low: self.zero_window.map(|w| w.0),
                window_high: self.zero_window.map(|w| w.1),
            })
            .collect()
    }
}
