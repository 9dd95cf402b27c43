//! Application case studies: YUV image segmentation, XOR image encryption
//! and bitmap-index queries. Each scale point gets an analytic time per
//! paradigm and a functional check on a sampled slice of the data.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bits::BitPage;
use crate::config::{Config, FlashCosmosSection, ParaBitSection};
use crate::device::{DeviceGeometry, NandDevice, PageAddr, PageKind, WordlineAddr};
use crate::engine::{execute, write_operands, OpCode, OpKind};
use crate::error::{Error, Result};
use crate::lab::derive_seed;
use crate::ssd::{baseline_job_timeline, job_timeline, Baselines, OpStep, Paradigm, SsdConfig, StripeJob};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum WorkloadKind {
    Segmentation,
    Encryption,
    Bitmap,
}

impl WorkloadKind {
    pub const ALL: [WorkloadKind; 3] = [WorkloadKind::Segmentation, WorkloadKind::Encryption, WorkloadKind::Bitmap];

    pub fn name(self) -> &'static str {
        match self {
            WorkloadKind::Segmentation => "segmentation",
            WorkloadKind::Encryption => "encryption",
            WorkloadKind::Bitmap => "bitmap",
        }
    }

    /// Evaluated scale range (images, images, months).
    pub fn scale_range(self) -> (u64, u64) {
        match self {
            WorkloadKind::Segmentation => (10_000, 200_000),
            WorkloadKind::Encryption => (5_000, 100_000),
            WorkloadKind::Bitmap => (1, 12),
        }
    }

    pub fn scale_unit(self) -> &'static str {
        match self {
            WorkloadKind::Bitmap => "months",
            _ => "images",
        }
    }

    /// Configured sweep points.
    pub fn sweep(self, cfg: &Config) -> Vec<u64> {
        let w = &cfg.workloads;
        match self {
            WorkloadKind::Segmentation => w.segmentation_images.clone(),
            WorkloadKind::Encryption => w.encryption_images.clone(),
            WorkloadKind::Bitmap => w.bitmap_months.iter().map(|&m| m as u64).collect(),
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for WorkloadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WorkloadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase();
        WorkloadKind::ALL
            .into_iter()
            .find(|k| k.name() == norm || (norm == "bitmap-index" && *k == WorkloadKind::Bitmap))
            .ok_or_else(|| Error::UnknownName { kind: "workload", name: s.to_string() })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WorkloadSpec {
    pub kind: WorkloadKind,
    pub scale: u64,
}

impl WorkloadSpec {
    pub fn new(kind: WorkloadKind, scale: u64) -> Result<Self> {
        let (lo, hi) = kind.scale_range();
        if !(lo..=hi).contains(&scale) {
            return Err(Error::ScaleOutOfRange(kind.name(), format!("{scale} {} not in {lo}..={hi}", kind.scale_unit())));
        }
        Ok(Self { kind, scale })
    }
}

/// Per-stripe job plus how many stripes the scale point covers.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WorkloadPlan {
    pub job: StripeJob,
    /// Fractional for image workloads so time stays linear in scale.
    pub stripes: f64,
}

fn and() -> OpCode {
    OpCode::new(OpKind::And)
}

fn xor() -> OpCode {
    OpCode::inverse(OpKind::Xor)
}

/// Days covered by a bitmap query.
pub fn bitmap_days(cfg: &Config, months: u64) -> u32 {
    (months as u32) * cfg.workloads.days_per_month
}

pub fn plan(spec: &WorkloadSpec, cfg: &Config, ssd: &SsdConfig) -> WorkloadPlan {
    let w = &cfg.workloads;
    let pixels = (w.image_width * w.image_height) as f64;
    let stripe = ssd.stripe_bytes();
    match spec.kind {
        WorkloadKind::Segmentation => {
            // One bitplane per channel per class, ANDed Y & U & V per class.
            let classes = w.segmentation_classes;
            let steps = (0..2 * classes).map(|_| OpStep { op: and(), aligned: true }).collect();
            WorkloadPlan {
                job: StripeJob { operands: 3 * classes, results: classes, steps, chains: vec![3; classes as usize] },
                stripes: spec.scale as f64 * pixels / 8.0 / stripe,
            }
        }
        WorkloadKind::Encryption => WorkloadPlan {
            job: StripeJob::pair(xor(), true),
            stripes: spec.scale as f64 * pixels * w.encryption_bits_per_pixel as f64 / 8.0 / stripe,
        },
        WorkloadKind::Bitmap => {
            let d = bitmap_days(cfg, spec.scale);
            // The first AND pairs two stored days; every later one pairs the
            // previous result with a new day and must be realigned.
            let steps = (1..d).map(|i| OpStep { op: and(), aligned: i == 1 }).collect();
            WorkloadPlan {
                job: StripeJob { operands: d, results: 1, steps, chains: vec![d] },
                stripes: (w.bitmap_users.div_ceil(8) as f64 / stripe).ceil(),
            }
        }
    }
}

/// Paradigms reported for workloads; `IfcAligned` stands for MCFlash
/// running the job with its own per-step alignment.
pub const WORKLOAD_PARADIGMS: [Paradigm; 5] =
    [Paradigm::Osc, Paradigm::Isc, Paradigm::IfcAligned, Paradigm::ParaBit, Paradigm::FlashCosmos];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WorkloadResult {
    pub spec: WorkloadSpec,
    pub stripes: f64,
    pub total_us: BTreeMap<Paradigm, f64>,
    /// `total_us[X] / total_us[MCFlash]`.
    pub speedups: BTreeMap<Paradigm, f64>,
    pub functional_checked: bool,
    pub mismatches: u64,
    pub bits_checked: u64,
}

impl WorkloadResult {
    pub fn mcflash_us(&self) -> f64 {
        self.total_us[&Paradigm::IfcAligned]
    }
}

/// Analytic totals and speedups; no functional check.
pub fn project(spec: &WorkloadSpec, cfg: &Config, baselines: &Baselines) -> Result<WorkloadResult> {
    let ssd = SsdConfig::from_config(cfg);
    let p = plan(spec, cfg, &ssd);
    let mut total_us = BTreeMap::new();
    for paradigm in WORKLOAD_PARADIGMS {
        let t = if paradigm.is_baseline() {
            baseline_job_timeline(paradigm, &ssd, &p.job, baselines)?
        } else {
            job_timeline(paradigm, &ssd, &p.job, true)?
        };
        total_us.insert(paradigm, t.total_us * p.stripes);
    }
    let mc = total_us[&Paradigm::IfcAligned];
    let speedups = total_us.iter().filter(|(k, _)| **k != Paradigm::IfcAligned).map(|(&k, &t)| (k, t / mc)).collect();
    Ok(WorkloadResult {
        spec: *spec,
        stripes: p.stripes,
        total_us,
        speedups,
        functional_checked: false,
        mismatches: 0,
        bits_checked: 0,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct FunctionalCheck {
    pub mismatches: u64,
    pub bits: u64,
}

fn functional_device(cfg: &Config, wordlines: usize, seed: u64) -> Result<NandDevice<f64>> {
    let per_block = cfg.device.wordlines_per_block;
    let g = DeviceGeometry::new(wordlines.div_ceil(per_block).max(1), per_block, cfg.workloads.functional_page_bytes)?;
    Ok(NandDevice::with_geometry(cfg, g, seed))
}

/// Executes `op` on an operand already stored as a page plus a host page,
/// staging both onto the erased wordline `dst` first.
fn realign_and_execute(
    dev: &mut NandDevice<f64>,
    held: BitPage,
    stored: PageAddr,
    dst: WordlineAddr,
    op: OpCode,
) -> Result<BitPage> {
    dev.stage_page(dst.page(PageKind::Lsb), held)?;
    dev.copyback(stored, dst.page(PageKind::Msb))?;
    Ok(execute(dev, dst, op)?.page)
}

fn next_free(free: &mut std::vec::IntoIter<WordlineAddr>) -> Result<WordlineAddr> {
    free.next().ok_or(Error::InsufficientCapacity { needed: 1, available: 0 })
}

/// Per class: (Y AND U) on the wordline holding both, then the partial
/// result AND V after staging it next to V's stored copy.
fn check_segmentation(cfg: &Config, slices: usize, seed: u64) -> Result<FunctionalCheck> {
    let classes = cfg.workloads.segmentation_classes as usize;
    let mut dev = functional_device(cfg, slices * classes * 3, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let mut free = dev.erased_wordlines().into_iter();
    let n = dev.cells();
    let mut out = FunctionalCheck::default();
    for _ in 0..slices * classes {
        let [y, u, v] = std::array::from_fn(|_| BitPage::random(n, &mut rng));
        let yu = next_free(&mut free)?;
        write_operands(&mut dev, yu, &y, &u)?;
        let v_home = next_free(&mut free)?;
        write_operands(&mut dev, v_home, &v, &BitPage::zeros(n))?;
        let partial = execute(&mut dev, yu, and())?.page;
        let mask = realign_and_execute(&mut dev, partial, v_home.page(PageKind::Lsb), next_free(&mut free)?, and())?;
        out.mismatches += mask.hamming(&y.and(&u).and(&v));
        out.bits += n as u64;
    }
    Ok(out)
}

/// Encrypt with XOR, then decrypt the ciphertext with the same key.
fn check_encryption(cfg: &Config, slices: usize, seed: u64) -> Result<FunctionalCheck> {
    let mut dev = functional_device(cfg, slices * 2, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 2));
    let mut free = dev.erased_wordlines().into_iter();
    let n = dev.cells();
    let mut out = FunctionalCheck::default();
    for _ in 0..slices {
        let image = BitPage::random(n, &mut rng);
        let key = BitPage::random(n, &mut rng);
        let wl = next_free(&mut free)?;
        write_operands(&mut dev, wl, &image, &key)?;
        let cipher = execute(&mut dev, wl, xor())?.page;
        out.mismatches += cipher.hamming(&image.xor(&key));
        let back = realign_and_execute(&mut dev, cipher, wl.page(PageKind::Msb), next_free(&mut free)?, xor())?;
        out.mismatches += back.hamming(&image);
        out.bits += 2 * n as u64;
    }
    Ok(out)
}

/// Daily activity vectors stored two per wordline; the running AND is
/// restaged next to each new day.
fn check_bitmap(cfg: &Config, days: u32, slices: usize, seed: u64) -> Result<FunctionalCheck> {
    let d = days as usize;
    let homes = d.div_ceil(2);
    let mut out = FunctionalCheck::default();
    for s in 0..slices {
        let mut dev = functional_device(cfg, homes + d.saturating_sub(2), derive_seed(seed, 100 + s as u64))?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 200 + s as u64));
        let mut free = dev.erased_wordlines().into_iter();
        let n = dev.cells();
        // Mostly-active users so the running AND stays informative.
        let vectors: Vec<BitPage> = (0..d).map(|_| BitPage::from_fn(n, |_| rng.random_bool(0.99))).collect();
        let mut pages = Vec::with_capacity(d);
        for pair in vectors.chunks(2) {
            let wl = next_free(&mut free)?;
            let msb = pair.get(1).cloned().unwrap_or_else(|| BitPage::zeros(n));
            write_operands(&mut dev, wl, &pair[0], &msb)?;
            pages.push(wl.page(PageKind::Lsb));
            pages.push(wl.page(PageKind::Msb));
        }
        let mut result = if d == 1 {
            dev.read_page_current(pages[0])?
        } else {
            execute(&mut dev, pages[0].wordline_addr(), and())?.page
        };
        for &day in pages.iter().take(d).skip(2) {
            result = realign_and_execute(&mut dev, result, day, next_free(&mut free)?, and())?;
        }
        let oracle = vectors[1..].iter().fold(vectors[0].clone(), |acc, v| acc.and(v));
        out.mismatches += result.hamming(&oracle);
        out.bits += n as u64;
    }
    Ok(out)
}

pub fn functional_check(spec: &WorkloadSpec, cfg: &Config, seed: u64) -> Result<FunctionalCheck> {
    let slices = cfg.workloads.functional_wordlines;
    let seed = derive_seed(seed, spec.kind.index() as u64 * 1_000_003 + spec.scale);
    match spec.kind {
        WorkloadKind::Segmentation => check_segmentation(cfg, slices, seed),
        WorkloadKind::Encryption => check_encryption(cfg, slices, seed),
        WorkloadKind::Bitmap => check_bitmap(cfg, bitmap_days(cfg, spec.scale), slices, seed),
    }
}

/// Projection plus functional check for one scale point.
pub fn run(spec: &WorkloadSpec, cfg: &Config, seed: u64) -> Result<WorkloadResult> {
    let mut r = project(spec, cfg, &Baselines::from_config(cfg))?;
    let f = functional_check(spec, cfg, seed)?;
    r.functional_checked = true;
    r.mismatches = f.mismatches;
    r.bits_checked = f.bits;
    Ok(r)
}

pub fn run_segmentation(spec: &WorkloadSpec, cfg: &Config, seed: u64) -> Result<WorkloadResult> {
    expect_kind(spec, WorkloadKind::Segmentation)?;
    run(spec, cfg, seed)
}

pub fn run_encryption(spec: &WorkloadSpec, cfg: &Config, seed: u64) -> Result<WorkloadResult> {
    expect_kind(spec, WorkloadKind::Encryption)?;
    run(spec, cfg, seed)
}

pub fn run_bitmap_index(spec: &WorkloadSpec, cfg: &Config, seed: u64) -> Result<WorkloadResult> {
    expect_kind(spec, WorkloadKind::Bitmap)?;
    run(spec, cfg, seed)
}

fn expect_kind(spec: &WorkloadSpec, kind: WorkloadKind) -> Result<()> {
    if spec.kind != kind {
        return Err(Error::UnknownName { kind: "workload for this runner", name: spec.kind.to_string() });
    }
    Ok(())
}

/// Arithmetic mean of the speedup over `paradigm` across `results`.
pub fn mean_speedup(results: &[WorkloadResult], paradigm: Paradigm) -> f64 {
    results.iter().map(|r| r.speedups[&paradigm]).sum::<f64>() / results.len() as f64
}

/// Projects every configured scale point of `kind`.
pub fn project_sweep(kind: WorkloadKind, cfg: &Config, baselines: &Baselines) -> Result<Vec<WorkloadResult>> {
    kind.sweep(cfg).into_iter().map(|s| project(&WorkloadSpec::new(kind, s)?, cfg, baselines)).collect()
}

/// Baseline parameters fitted to the configured target speedups.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BaselineFit {
    pub parabit: ParaBitSection,
    pub flashcosmos: FlashCosmosSection,
    /// Mean speedups under the fitted parameters, workload order.
    pub parabit_speedups: [f64; 3],
    pub flashcosmos_speedups: [f64; 3],
    pub parabit_targets: [f64; 3],
    pub flashcosmos_targets: [f64; 3],
}

impl BaselineFit {
    pub fn baselines(&self) -> Baselines {
        Baselines { parabit: Some(self.parabit.clone()), flashcosmos: Some(self.flashcosmos.clone()) }
    }

    /// Worst relative error of any fitted mean speedup.
    pub fn worst_relative_error(&self) -> f64 {
        let pb = self.parabit_speedups.iter().zip(&self.parabit_targets);
        let fc = self.flashcosmos_speedups.iter().zip(&self.flashcosmos_targets);
        pb.chain(fc).map(|(g, t)| (g / t - 1.0).abs()).fold(0.0, f64::max)
    }
}

fn mean_speedups(cfg: &Config, b: &Baselines, paradigm: Paradigm) -> Result<[f64; 3]> {
    let mut out = [0.0; 3];
    for k in WorkloadKind::ALL {
        out[k.index()] = mean_speedup(&project_sweep(k, cfg, b)?, paradigm);
    }
    Ok(out)
}

fn log_error(got: &[f64; 3], want: &[f64; 3]) -> f64 {
    got.iter().zip(want).map(|(g, w)| (g / w).ln().powi(2)).sum()
}

/// Minimizes `f` over `x` in `[lo, hi]` on a log grid then golden-section
/// refinement around the best grid cell.
fn minimize_log(lo: f64, hi: f64, mut f: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    const GRID: usize = 200;
    let (a, b) = (lo.ln(), hi.ln());
    let at = |i: usize| a + (b - a) * i as f64 / GRID as f64;
    let mut best = (0, f64::INFINITY);
    for i in 0..=GRID {
        let v = f(at(i).exp())?;
        if v < best.1 {
            best = (i, v);
        }
    }
    let (mut l, mut r) = (at(best.0.saturating_sub(1)), at((best.0 + 1).min(GRID)));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let m1 = r - g * (r - l);
        let m2 = l + g * (r - l);
        if f(m1.exp())? < f(m2.exp())? {
            r = m2;
        } else {
            l = m1;
        }
    }
    Ok((0.5 * (l + r)).exp())
}

/// Least-squares fit (in log speedup) of the ParaBit DRAM reallocation
/// cost with its per-op latency held fixed, and of the Flash-Cosmos
/// sensing time with its operand limit held fixed.
pub fn fit_baselines(cfg: &Config) -> Result<BaselineFit> {
    let pb0 = cfg.baselines.parabit.clone().ok_or(Error::MissingParams("parabit"))?;
    let fc0 = cfg.baselines.flashcosmos.clone().ok_or(Error::MissingParams("flashcosmos"))?;
    let t = &cfg.baselines.targets;
    let with = |pb: &ParaBitSection, fc: &FlashCosmosSection| Baselines {
        parabit: Some(pb.clone()),
        flashcosmos: Some(fc.clone()),
    };

    let realloc = minimize_log(1e-2, 1e5, |x| {
        let pb = ParaBitSection { dram_realloc_us: x, ..pb0.clone() };
        Ok(log_error(&mean_speedups(cfg, &with(&pb, &fc0), Paradigm::ParaBit)?, &t.parabit))
    })?;
    let parabit = ParaBitSection { dram_realloc_us: realloc, ..pb0 };
    let sense = minimize_log(1e-2, 1e5, |x| {
        let fc = FlashCosmosSection { t_sense_us: x, ..fc0.clone() };
        Ok(log_error(&mean_speedups(cfg, &with(&parabit, &fc), Paradigm::FlashCosmos)?, &t.flashcosmos))
    })?;
    let flashcosmos = FlashCosmosSection { t_sense_us: sense, ..fc0 };
    let b = with(&parabit, &flashcosmos);
    Ok(BaselineFit {
        parabit_speedups: mean_speedups(cfg, &b, Paradigm::ParaBit)?,
        flashcosmos_speedups: mean_speedups(cfg, &b, Paradigm::FlashCosmos)?,
        parabit,
        flashcosmos,
        parabit_targets: t.parabit,
        flashcosmos_targets: t.flashcosmos,
    })
}

/// One CSV/JSON row per scale point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WorkloadRow {
    pub workload: String,
    pub scale: u64,
    pub unit: String,
    pub stripes: f64,
    pub osc_us: f64,
    pub isc_us: f64,
    pub mcflash_us: f64,
    pub parabit_us: f64,
    pub flashcosmos_us: f64,
    pub speedup_osc: f64,
    pub speedup_isc: f64,
    /// Baseline columns come from calibrated, not derived, parameters.
    pub speedup_parabit_calibrated: f64,
    pub speedup_flashcosmos_calibrated: f64,
    pub functional_checked: bool,
    pub mismatches: u64,
    pub bits_checked: u64,
}

impl From<&WorkloadResult> for WorkloadRow {
    fn from(r: &WorkloadResult) -> Self {
        Self {
            workload: r.spec.kind.to_string(),
            scale: r.spec.scale,
            unit: r.spec.kind.scale_unit().to_string(),
            stripes: r.stripes,
            osc_us: r.total_us[&Paradigm::Osc],
            isc_us: r.total_us[&Paradigm::Isc],
            mcflash_us: r.mcflash_us(),
            parabit_us: r.total_us[&Paradigm::ParaBit],
            flashcosmos_us: r.total_us[&Paradigm::FlashCosmos],
            speedup_osc: r.speedups[&Paradigm::Osc],
            speedup_isc: r.speedups[&Paradigm::Isc],
            speedup_parabit_calibrated: r.speedups[&Paradigm::ParaBit],
            speedup_flashcosmos_calibrated: r.speedups[&Paradigm::FlashCosmos],
            functional_checked: r.functional_checked,
            mismatches: r.mismatches,
            bits_checked: r.bits_checked,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_bounds() {
        assert!(WorkloadSpec::new(WorkloadKind::Segmentation, 9_999).is_err());
        assert!(WorkloadSpec::new(WorkloadKind::Encryption, 100_000).is_ok());
        assert!(matches!(WorkloadSpec::new(WorkloadKind::Bitmap, 13), Err(Error::ScaleOutOfRange(..))));
        assert_eq!("bitmap-index".parse::<WorkloadKind>().unwrap(), WorkloadKind::Bitmap);
    }

    #[test]
    fn bitmap_chain_shape() {
        let cfg = Config::default();
        let ssd = SsdConfig::from_config(&cfg);
        let p = plan(&WorkloadSpec::new(WorkloadKind::Bitmap, 2).unwrap(), &cfg, &ssd);
        assert_eq!(p.job.steps.len(), 59);
        assert_eq!(p.job.steps.iter().filter(|s| s.aligned).count(), 1);
        assert_eq!(p.stripes, 12.0);
    }

    #[test]
    fn single_day_query_is_one_read() {
        let mut cfg = Config::default();
        cfg.workloads.days_per_month = 1;
        let ssd = SsdConfig::from_config(&cfg);
        let p = plan(&WorkloadSpec::new(WorkloadKind::Bitmap, 1).unwrap(), &cfg, &ssd);
        assert!(p.job.steps.is_empty());
        let t = job_timeline(Paradigm::IfcAligned, &ssd, &p.job, true).unwrap();
        let (dma, ext) = crate::ssd::transfer_times(&ssd);
        assert!((t.total_us - (ssd.t_r_us + dma + 8.0 * ext)).abs() < 1e-9);
        let f = check_bitmap(&cfg, 1, 2, 5).unwrap();
        assert_eq!(f.mismatches, 0);
    }

    #[test]
    fn functional_checks_are_clean_when_fresh() {
        let mut cfg = Config::default();
        cfg.workloads.functional_wordlines = 2;
        assert_eq!(check_segmentation(&cfg, 2, 1).unwrap().mismatches, 0);
        assert_eq!(check_encryption(&cfg, 2, 1).unwrap().mismatches, 0);
        assert_eq!(check_bitmap(&cfg, 9, 2, 1).unwrap().mismatches, 0);
    }

    #[test]
    fn minimizer_finds_interior_optimum() {
        let x = minimize_log(1e-2, 1e5, |x| Ok((x.ln() - 3.0f64.ln()).powi(2))).unwrap();
        assert!((x - 3.0).abs() < 1e-6, "{x}");
    }
}
