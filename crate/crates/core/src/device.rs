//! Behavioral raw MLC NAND plane with the user-mode command surface.
//!
//! Reads are noise-free comparisons of stored threshold voltages against
//! the (possibly shifted) references; they never mutate cell state.

use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitPage;
use crate::cell_physics::{draw, CellPhysics, CellState, WearState};
use crate::config::{Config, DeviceConfig, OffsetPolicy};
use crate::error::{Error, Result};
use crate::num::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PageKind {
    Lsb,
    Msb,
}

impl PageKind {
    pub fn sensing_phases(self) -> u32 {
        match self {
            PageKind::Lsb => 1,
            PageKind::Msb => 2,
        }
    }
}

/// Which of the three read references.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RefIndex {
    Vref0 = 0,
    Vref1 = 1,
    Vref2 = 2,
}

impl RefIndex {
    pub const ALL: [RefIndex; 3] = [RefIndex::Vref0, RefIndex::Vref1, RefIndex::Vref2];

    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "vref0" | "0" => Ok(RefIndex::Vref0),
            "vref1" | "1" => Ok(RefIndex::Vref1),
            "vref2" | "2" => Ok(RefIndex::Vref2),
            _ => Err(Error::UnknownName { kind: "reference", name: name.to_string() }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WordlineAddr {
    pub block: usize,
    pub wordline: usize,
}

impl WordlineAddr {
    pub fn new(block: usize, wordline: usize) -> Self {
        Self { block, wordline }
    }

    pub fn page(self, kind: PageKind) -> PageAddr {
        PageAddr { block: self.block, wordline: self.wordline, kind }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PageAddr {
    pub block: usize,
    pub wordline: usize,
    pub kind: PageKind,
}

impl PageAddr {
    pub fn wordline_addr(self) -> WordlineAddr {
        WordlineAddr::new(self.block, self.wordline)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceGeometry {
    pub blocks_per_plane: usize,
    pub wordlines_per_block: usize,
    pub page_size_bytes: usize,
}

impl DeviceGeometry {
    pub fn new(blocks_per_plane: usize, wordlines_per_block: usize, page_size_bytes: usize) -> Result<Self> {
        if blocks_per_plane == 0 || wordlines_per_block == 0 || !page_size_bytes.is_power_of_two() {
            return Err(Error::Config(format!(
                "invalid geometry {blocks_per_plane}x{wordlines_per_block}x{page_size_bytes}"
            )));
        }
        Ok(Self { blocks_per_plane, wordlines_per_block, page_size_bytes })
    }

    #[inline]
    pub fn cells_per_wordline(&self) -> usize {
        self.page_size_bytes * 8
    }

    pub fn total_wordlines(&self) -> usize {
        self.blocks_per_plane * self.wordlines_per_block
    }
}

/// Signed DAC-step offsets for VREF0, VREF1, VREF2.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReadRefConfig {
    pub offsets: [i32; 3],
}

impl ReadRefConfig {
    pub const DEFAULT: ReadRefConfig = ReadRefConfig { offsets: [0; 3] };

    pub fn new(vref0: i32, vref1: i32, vref2: i32) -> Self {
        Self { offsets: [vref0, vref1, vref2] }
    }

    pub fn offset(&self, r: RefIndex) -> i32 {
        self.offsets[r as usize]
    }

    pub fn with(mut self, r: RefIndex, steps: i32) -> Self {
        self.offsets[r as usize] = steps;
        self
    }
}

/// DAC and sense-path limits shared by every reference register.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SenseLimits<S> {
    pub dac_step: S,
    pub register_width: u32,
    /// Lowest voltage any shifted reference may take.
    pub min_reference_v: S,
    pub policy: OffsetPolicy,
    /// P/E count whose distribution width sizes out-of-distribution targets.
    pub edge_guard_pe: u32,
}

impl<S: Scalar> SenseLimits<S> {
    pub fn from_config(d: &DeviceConfig) -> Self {
        Self {
            dac_step: S::of(d.dac_step),
            register_width: d.register_width,
            min_reference_v: S::of(d.min_reference_v),
            policy: d.offset_policy,
            edge_guard_pe: d.edge_guard_pe,
        }
    }

    pub fn register_min(&self) -> i32 {
        -(1 << (self.register_width - 1))
    }

    pub fn register_max(&self) -> i32 {
        (1 << (self.register_width - 1)) - 1
    }

    /// Shifted reference = default + offset * step.
    pub fn shifted(&self, default: S, steps: i32) -> S {
        default + S::of(steps as f64) * self.dac_step
    }

    /// Smallest offset whose shifted reference is on or above the floor.
    pub fn floor_steps(&self, default: S) -> i32 {
        ((self.min_reference_v - default) / self.dac_step).ceil().to_i32().unwrap_or(i32::MIN)
    }

    /// Legal offset range for a register whose factory value is `default`.
    pub fn legal_range(&self, default: S) -> (i32, i32) {
        (self.register_min().max(self.floor_steps(default)), self.register_max())
    }

    /// Validates one offset, returning the error the device would raise.
    pub fn check(&self, r: RefIndex, default: S, steps: i32) -> Result<()> {
        if steps < self.register_min() || steps > self.register_max() {
            return Err(Error::OffsetOutOfRange {
                reference: r,
                offset: steps,
                min: self.register_min(),
                max: self.register_max(),
            });
        }
        if steps < self.floor_steps(default) {
            return Err(Error::BelowSensingFloor {
                reference: r,
                volts: self.shifted(default, steps).as_f64(),
                floor: self.min_reference_v.as_f64(),
            });
        }
        Ok(())
    }
}

/// Cell contents of one physical wordline.
#[derive(Clone, Debug, PartialEq)]
pub struct WordlineImage<S> {
    pub states: Vec<CellState>,
    pub vth: Vec<S>,
    pub programmed: bool,
}

#[derive(Clone, Debug)]
struct ProgrammedWordline<S> {
    states: Vec<CellState>,
    vth: Vec<S>,
    /// Block retention clock at program time.
    programmed_at: f64,
}

#[derive(Clone, Debug)]
enum Slot<S> {
    /// Erased cells are sampled lazily from this seed at the block's
    /// current wear; the same seed always yields the same voltages.
    Erased { seed: u64 },
    Programmed(ProgrammedWordline<S>),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockMeta {
    pub wear: WearState,
    pub erase_count: u32,
}

#[derive(Clone, Debug)]
struct Block<S> {
    meta: BlockMeta,
    slots: Vec<Slot<S>>,
}

/// Command counters consumed by the timing and energy models.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounters {
    pub lsb_reads: u64,
    pub msb_reads: u64,
    pub soft_bit_reads: u64,
    pub sensing_phases: u64,
    pub programs: u64,
    pub erases: u64,
    pub copybacks: u64,
    pub set_features: u64,
    /// `set_feature` calls that changed the register contents.
    pub feature_switches: u64,
}

/// Result of writing the feature register.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FeatureWrite {
    pub applied: ReadRefConfig,
    pub clamped: bool,
    pub switched: bool,
}

#[derive(Clone, Debug, Default)]
struct Staged {
    lsb: Option<BitPage>,
    msb: Option<BitPage>,
}

/// One MLC plane. Single-owner state machine; clone or build independent
/// instances for parallel experiments.
#[derive(Clone, Debug)]
pub struct NandDevice<S> {
    geometry: DeviceGeometry,
    physics: Arc<CellPhysics<S>>,
    limits: SenseLimits<S>,
    blocks: Vec<Block<S>>,
    feature: ReadRefConfig,
    staging: HashMap<WordlineAddr, Staged>,
    counters: OpCounters,
    rng: ChaCha8Rng,
}

impl<S: Scalar> NandDevice<S> {
    pub fn new(geometry: DeviceGeometry, physics: CellPhysics<S>, limits: SenseLimits<S>, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let blocks = (0..geometry.blocks_per_plane)
            .map(|_| Block {
                meta: BlockMeta::default(),
                slots: (0..geometry.wordlines_per_block).map(|_| Slot::Erased { seed: rng.next_u64() }).collect(),
            })
            .collect();
        Self {
            geometry,
            physics: Arc::new(physics),
            limits,
            blocks,
            feature: ReadRefConfig::DEFAULT,
            staging: HashMap::new(),
            counters: OpCounters::default(),
            rng,
        }
    }

    pub fn from_config(cfg: &Config, seed: u64) -> Result<Self> {
        let d = &cfg.device;
        let geometry = DeviceGeometry::new(d.blocks_per_plane, d.wordlines_per_block, d.page_size_bytes)?;
        Ok(Self::new(
            geometry,
            CellPhysics::from_config(&cfg.physics, &cfg.wear),
            SenseLimits::from_config(d),
            seed,
        ))
    }

    /// Same device, resized.
    pub fn with_geometry(cfg: &Config, geometry: DeviceGeometry, seed: u64) -> Self {
        Self::new(geometry, CellPhysics::from_config(&cfg.physics, &cfg.wear), SenseLimits::from_config(&cfg.device), seed)
    }

    /// Replaces the sampling stream, e.g. after cloning a preconditioned device.
    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        for b in &mut self.blocks {
            for slot in &mut b.slots {
                if let Slot::Erased { seed } = slot {
                    *seed = self.rng.next_u64();
                }
            }
        }
    }

    pub fn geometry(&self) -> DeviceGeometry {
        self.geometry
    }

    pub fn physics(&self) -> &CellPhysics<S> {
        &self.physics
    }

    pub fn limits(&self) -> &SenseLimits<S> {
        &self.limits
    }

    pub fn counters(&self) -> OpCounters {
        self.counters
    }

    pub fn reset_counters(&mut self) {
        self.counters = OpCounters::default();
    }

    pub fn cells(&self) -> usize {
        self.geometry.cells_per_wordline()
    }

    pub fn block_meta(&self, block: usize) -> Result<BlockMeta> {
        Ok(self.block(block)?.meta)
    }

    fn block(&self, block: usize) -> Result<&Block<S>> {
        self.blocks.get(block).ok_or(Error::BlockOutOfRange { block, blocks: self.blocks.len() })
    }

    fn check_addr(&self, addr: WordlineAddr) -> Result<()> {
        let b = self.block(addr.block)?;
        if addr.wordline >= b.slots.len() {
            return Err(Error::WordlineOutOfRange { wordline: addr.wordline, wordlines: b.slots.len() });
        }
        Ok(())
    }

    pub fn is_programmed(&self, addr: WordlineAddr) -> Result<bool> {
        self.check_addr(addr)?;
        Ok(matches!(self.blocks[addr.block].slots[addr.wordline], Slot::Programmed(_)))
    }

    /// Whether every intended (stored) cell state satisfies `pred`.
    pub fn states_satisfy(&self, addr: WordlineAddr, pred: impl Fn(CellState) -> bool) -> Result<bool> {
        self.check_addr(addr)?;
        Ok(match &self.blocks[addr.block].slots[addr.wordline] {
            Slot::Programmed(p) => p.states.iter().all(|&s| pred(s)),
            Slot::Erased { .. } => pred(CellState::L0),
        })
    }

    /// Wordlines currently erased and not staged, in address order.
    pub fn erased_wordlines(&self) -> Vec<WordlineAddr> {
        let mut out = Vec::new();
        for (bi, b) in self.blocks.iter().enumerate() {
            for (wi, s) in b.slots.iter().enumerate() {
                let a = WordlineAddr::new(bi, wi);
                if matches!(s, Slot::Erased { .. }) && !self.staging.contains_key(&a) {
                    out.push(a);
                }
            }
        }
        out
    }

    pub fn erase_block(&mut self, block: usize) -> Result<()> {
        self.block(block)?;
        let b = &mut self.blocks[block];
        b.meta.erase_count += 1;
        b.meta.wear.pe_cycles = b.meta.erase_count;
        b.meta.wear.retention_hours = 0.0;
        for slot in &mut b.slots {
            *slot = Slot::Erased { seed: self.rng.next_u64() };
        }
        self.staging.retain(|a, _| a.block != block);
        self.counters.erases += 1;
        Ok(())
    }

    pub fn program_wordline(&mut self, addr: WordlineAddr, lsb: &BitPage, msb: &BitPage) -> Result<()> {
        self.check_addr(addr)?;
        let n = self.cells();
        for p in [lsb, msb] {
            if p.len() != n {
                return Err(Error::LengthMismatch { got: p.len(), expected: n });
            }
        }
        if !matches!(self.blocks[addr.block].slots[addr.wordline], Slot::Erased { .. }) {
            return Err(Error::NotErased { block: addr.block, wordline: addr.wordline });
        }
        let meta = self.blocks[addr.block].meta;
        let dists = self.physics.distributions(WearState::new(meta.wear.pe_cycles, 0.0));
        let mut states = Vec::with_capacity(n);
        let mut vth = Vec::with_capacity(n);
        for (lw, mw) in lsb.words().iter().zip(msb.words()) {
            let remaining = n - states.len();
            for bit in 0..remaining.min(64) {
                let s = CellState::from_bits(lw >> bit & 1 == 1, mw >> bit & 1 == 1);
                states.push(s);
                vth.push(draw(&dists[s.index()], &mut self.rng));
            }
        }
        self.blocks[addr.block].slots[addr.wordline] =
            Slot::Programmed(ProgrammedWordline { states, vth, programmed_at: meta.wear.retention_hours });
        self.staging.remove(&addr);
        self.counters.programs += 1;
        Ok(())
    }

    /// Full analog image of a wordline (erased wordlines are materialized).
    pub fn wordline_image(&self, addr: WordlineAddr) -> Result<WordlineImage<S>> {
        self.check_addr(addr)?;
        Ok(match &self.blocks[addr.block].slots[addr.wordline] {
            Slot::Programmed(p) => WordlineImage { states: p.states.clone(), vth: p.vth.clone(), programmed: true },
            Slot::Erased { seed } => WordlineImage {
                states: vec![CellState::L0; self.cells()],
                vth: self.erased_vth(addr.block, *seed),
                programmed: false,
            },
        })
    }

    fn erased_vth(&self, block: usize, seed: u64) -> Vec<S> {
        let d = self.physics.distribution_params(CellState::L0, self.blocks[block].meta.wear);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..self.cells()).map(|_| draw(&d, &mut rng)).collect()
    }

    fn with_vth<T>(&self, addr: WordlineAddr, f: impl FnOnce(&[S]) -> T) -> Result<T> {
        self.check_addr(addr)?;
        match &self.blocks[addr.block].slots[addr.wordline] {
            Slot::Programmed(p) => Ok(f(&p.vth)),
            Slot::Erased { seed } => Ok(f(&self.erased_vth(addr.block, *seed))),
        }
    }

    /// Absolute reference voltages for `cfg`, rejecting illegal offsets.
    pub fn reference_voltages(&self, cfg: &ReadRefConfig) -> Result<[S; 3]> {
        let mut out = [S::ZERO; 3];
        for r in RefIndex::ALL {
            let d = self.physics.default_refs[r as usize];
            self.limits.check(r, d, cfg.offset(r))?;
            out[r as usize] = self.limits.shifted(d, cfg.offset(r));
        }
        Ok(out)
    }

    fn sense(&self, vth: &[S], kind: PageKind, refs: &[S; 3]) -> BitPage {
        let [r0, r1, r2] = *refs;
        let words = vth
            .chunks(64)
            .map(|chunk| {
                let mut w = 0u64;
                for (i, &v) in chunk.iter().enumerate() {
                    let bit = match kind {
                        PageKind::Lsb => v < r1,
                        PageKind::Msb => v < r0 || v >= r2,
                    };
                    w |= (bit as u64) << i;
                }
                w
            })
            .collect();
        BitPage::from_words(words, vth.len())
    }

    fn count_read(&mut self, kind: PageKind) {
        match kind {
            PageKind::Lsb => self.counters.lsb_reads += 1,
            PageKind::Msb => self.counters.msb_reads += 1,
        }
        self.counters.sensing_phases += kind.sensing_phases() as u64;
    }

    /// LSB: `1` iff `vth < VREF1'`. MSB: `1` iff `vth < VREF0'` or
    /// `vth >= VREF2'`. A cell exactly at a reference reads as above it.
    pub fn read_page(&mut self, addr: PageAddr, cfg: &ReadRefConfig) -> Result<BitPage> {
        let refs = self.reference_voltages(cfg)?;
        let page = self.with_vth(addr.wordline_addr(), |v| self.sense(v, addr.kind, &refs))?;
        self.count_read(addr.kind);
        Ok(page)
    }

    /// Read using the offsets currently held in the feature register.
    pub fn read_page_current(&mut self, addr: PageAddr) -> Result<BitPage> {
        let cfg = self.feature;
        self.read_page(addr, &cfg)
    }

    pub fn inverse_read(&mut self, addr: PageAddr, cfg: &ReadRefConfig) -> Result<BitPage> {
        Ok(self.read_page(addr, cfg)?.not())
    }

    /// XNOR of an MSB read at `cfg_minus` and one at `cfg_plus`.
    pub fn soft_bit_read(
        &mut self,
        addr: WordlineAddr,
        cfg_plus: &ReadRefConfig,
        cfg_minus: &ReadRefConfig,
    ) -> Result<BitPage> {
        let plus = self.reference_voltages(cfg_plus)?;
        let minus = self.reference_voltages(cfg_minus)?;
        let page = self.with_vth(addr, |v| {
            self.sense(v, PageKind::Msb, &minus).xnor(&self.sense(v, PageKind::Msb, &plus))
        })?;
        self.counters.soft_bit_reads += 1;
        self.counters.sensing_phases += 4;
        Ok(page)
    }

    /// Writes the offset register. Under [`OffsetPolicy::Clamp`] illegal
    /// offsets are pulled to the nearest legal value and `clamped` is set.
    pub fn set_feature(&mut self, cfg: ReadRefConfig) -> Result<FeatureWrite> {
        let mut applied = cfg;
        let mut clamped = false;
        for r in RefIndex::ALL {
            let d = self.physics.default_refs[r as usize];
            if let Err(e) = self.limits.check(r, d, cfg.offset(r)) {
                match self.limits.policy {
                    OffsetPolicy::Error => return Err(e),
                    OffsetPolicy::Clamp => {
                        let (lo, hi) = self.limits.legal_range(d);
                        applied.offsets[r as usize] = cfg.offset(r).clamp(lo, hi);
                        clamped = true;
                    }
                }
            }
        }
        let switched = applied != self.feature;
        self.feature = applied;
        self.counters.set_features += 1;
        if switched {
            self.counters.feature_switches += 1;
        }
        Ok(FeatureWrite { applied, clamped, switched })
    }

    pub fn get_feature(&self) -> ReadRefConfig {
        self.feature
    }

    /// Moves `src` (read at factory references) into the die buffer for
    /// `dst`. The destination wordline is programmed once both of its pages
    /// are staged; see [`NandDevice::fill_staged`].
    ///
    /// Returns true when this call completed the paired program.
    pub fn copyback(&mut self, src: PageAddr, dst: PageAddr) -> Result<bool> {
        let dst_wl = dst.wordline_addr();
        self.check_addr(dst_wl)?;
        let staged = self.staging.get(&dst_wl);
        let occupied = match dst.kind {
            PageKind::Lsb => staged.is_some_and(|s| s.lsb.is_some()),
            PageKind::Msb => staged.is_some_and(|s| s.msb.is_some()),
        };
        if self.is_programmed(dst_wl)? || occupied {
            return Err(Error::DestinationNotWritable(dst));
        }
        let data = self.read_page(src, &ReadRefConfig::DEFAULT)?;
        self.counters.copybacks += 1;
        let slot = self.staging.entry(dst_wl).or_default();
        match dst.kind {
            PageKind::Lsb => slot.lsb = Some(data),
            PageKind::Msb => slot.msb = Some(data),
        }
        self.complete_staged(dst_wl)
    }

    /// Stages a host-supplied page for `dst` (the partner of a copyback).
    pub fn stage_page(&mut self, dst: PageAddr, data: BitPage) -> Result<bool> {
        let dst_wl = dst.wordline_addr();
        self.check_addr(dst_wl)?;
        if data.len() != self.cells() {
            return Err(Error::LengthMismatch { got: data.len(), expected: self.cells() });
        }
        if self.is_programmed(dst_wl)? {
            return Err(Error::DestinationNotWritable(dst));
        }
        let slot = self.staging.entry(dst_wl).or_default();
        match dst.kind {
            PageKind::Lsb => slot.lsb = Some(data),
            PageKind::Msb => slot.msb = Some(data),
        }
        self.complete_staged(dst_wl)
    }

    /// Fills whichever half of a staged wordline is missing with a constant
    /// pattern and programs it.
    pub fn fill_staged(&mut self, wl: WordlineAddr, value: bool) -> Result<()> {
        let n = self.cells();
        let fill = || if value { BitPage::ones(n) } else { BitPage::zeros(n) };
        let slot = self.staging.entry(wl).or_default();
        slot.lsb.get_or_insert_with(fill);
        slot.msb.get_or_insert_with(fill);
        self.complete_staged(wl).map(|_| ())
    }

    fn complete_staged(&mut self, wl: WordlineAddr) -> Result<bool> {
        let ready = self.staging.get(&wl).is_some_and(|s| s.lsb.is_some() && s.msb.is_some());
        if !ready {
            return Ok(false);
        }
        let s = self.staging.remove(&wl).expect("checked");
        self.program_wordline(wl, s.lsb.as_ref().expect("checked"), s.msb.as_ref().expect("checked"))?;
        Ok(true)
    }

    /// Advances the block's retention clock and drifts every stored sample
    /// by the change in its state's mean shift. Cells keep their identity.
    pub fn retention_bake(&mut self, block: usize, hours: f64) -> Result<()> {
        self.block(block)?;
        assert!(hours >= 0.0 && hours.is_finite(), "invalid bake duration");
        if hours == 0.0 {
            return Ok(());
        }
        let physics = Arc::clone(&self.physics);
        let b = &mut self.blocks[block];
        let clock = b.meta.wear.retention_hours;
        for slot in &mut b.slots {
            if let Slot::Programmed(p) = slot {
                let age = clock - p.programmed_at;
                let delta = CellState::ALL
                    .map(|s| physics.wear.mean_shift(s, age + hours) - physics.wear.mean_shift(s, age));
                for (v, s) in p.vth.iter_mut().zip(&p.states) {
                    *v += delta[s.index()];
                }
            }
        }
        b.meta.wear.retention_hours = clock + hours;
        Ok(())
    }

    /// Direct wear fast-forward for building preconditioned devices.
    pub fn set_block_wear(&mut self, block: usize, pe_cycles: u32) -> Result<()> {
        self.block(block)?;
        let b = &mut self.blocks[block];
        b.meta.erase_count = pe_cycles;
        b.meta.wear.pe_cycles = pe_cycles;
        Ok(())
    }

    /// Factory-reference read of one page without touching counters.
    pub fn dump_page(&self, addr: PageAddr) -> Result<BitPage> {
        let refs = self.reference_voltages(&ReadRefConfig::DEFAULT)?;
        self.with_vth(addr.wordline_addr(), |v| self.sense(v, addr.kind, &refs))
    }

    /// Random page of device width drawn from the device stream.
    pub fn random_page(&mut self) -> BitPage {
        let n = self.cells();
        BitPage::random(n, &mut self.rng)
    }

    pub fn random_bool(&mut self) -> bool {
        self.rng.random()
    }
}
