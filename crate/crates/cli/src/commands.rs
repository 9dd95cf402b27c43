use std::fs::File;
use std::io::{self, BufWriter, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use mcflash::device::{RefIndex, WordlineAddr};
use mcflash::engine::{self, format_plan_table, plan_table, truth_table, OpCode};
use mcflash::lab::{self, calibrate, RberRow};
use mcflash::report::{self, Format, Metadata};
use mcflash::ssd::{self, Baselines, Paradigm, SsdConfig, TimelineRow};
use mcflash::workloads::{self, WorkloadKind, WorkloadRow, WorkloadSpec};
use mcflash::{Config, WearState};

use crate::{Cli, Command, Failure, OutputFormat};

type Outcome = Result<(), Failure>;

pub fn load_config(cli: &Cli) -> Result<Config, Failure> {
    let mut cfg = match &cli.global.config {
        Some(p) => Config::load(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?,
        None => Config::default(),
    };
    for o in &cli.global.overrides {
        cfg.set(o)?;
    }
    Ok(cfg)
}

struct Ctx<'a> {
    cli: &'a Cli,
    cfg: Config,
    name: &'static str,
}

impl Ctx<'_> {
    fn seed(&self) -> u64 {
        self.cli.global.seed
    }

    fn meta(&self) -> Metadata {
        Metadata::new(self.name, &self.cfg, self.seed())
    }

    fn format(&self) -> Format {
        match self.cli.global.format {
            OutputFormat::Csv => Format::Csv,
            OutputFormat::Json => Format::Json,
        }
    }

    /// Writes rows to `<out>/<command>.<ext>` or stdout.
    fn emit<T: Serialize>(&self, rows: &[T]) -> Outcome {
        let meta = self.meta();
        match &self.cli.global.out {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                let ext = if self.format() == Format::Csv { "csv" } else { "json" };
                let path = dir.join(format!("{}.{ext}", self.name));
                let w = BufWriter::new(File::create(&path)?);
                report::write_rows(w, self.format(), &meta, rows)?;
                eprintln!("wrote {}", path.display());
            }
            None => report::write_rows(io::stdout().lock(), self.format(), &meta, rows)?,
        }
        Ok(())
    }
}

fn parse_ops(names: &[String]) -> Result<Vec<OpCode>, Failure> {
    names.iter().filter(|s| !s.trim().is_empty()).map(|s| s.parse::<OpCode>().map_err(Failure::from)).collect()
}

pub fn dispatch(cli: &Cli) -> Outcome {
    let cfg = load_config(cli)?;
    let name = match &cli.command {
        Command::TruthTable { .. } => "truth-table",
        Command::Rber { .. } => "rber",
        Command::Sweep { .. } => "sweep",
        Command::Cycle { .. } => "cycle",
        Command::Bake { .. } => "bake",
        Command::Calibrate { .. } => "calibrate",
        Command::Timeline { .. } => "timeline",
        Command::Workload { .. } => "workload",
        Command::Demo { .. } => "demo",
    };
    let ctx = Ctx { cli, cfg, name };
    match &cli.command {
        Command::TruthTable { ops, plans } => cmd_truth_table(&ctx, ops, *plans),
        Command::Rber { op, pe, hours, pages } => cmd_rber(&ctx, op, WearState::new(*pe, *hours), *pages),
        Command::Sweep { op, reference, from, to, pages, pe, hours } => {
            cmd_sweep(&ctx, op, reference, (*from, *to), *pages, WearState::new(*pe, *hours))
        }
        Command::Cycle { cycles, op, pages } => cmd_cycle(&ctx, *cycles, op, *pages),
        Command::Bake { hours, pe, op, pages } => cmd_bake(&ctx, hours, *pe, op, *pages),
        Command::Calibrate { baselines } => cmd_calibrate(&ctx, *baselines),
        Command::Timeline { paradigms, op } => cmd_timeline(&ctx, paradigms, op.as_deref()),
        Command::Workload { kind, images, months, no_check } => {
            cmd_workload(&ctx, kind, images.as_deref(), months.as_deref(), !*no_check)
        }
        Command::Demo { pages } => cmd_demo(&ctx, *pages),
    }
}

#[derive(Serialize)]
struct TruthTableRow {
    op: String,
    l0: String,
    l1: String,
    l2: String,
    l3: String,
    expected: String,
    cells: u64,
    mismatches: u64,
    degraded: bool,
    result: &'static str,
}

fn bit(b: Option<bool>) -> String {
    match b {
        Some(true) => "1".into(),
        Some(false) => "0".into(),
        None => "-".into(),
    }
}

fn truth_rows(cfg: &Config, ops: &[OpCode], seed: u64) -> Result<Vec<TruthTableRow>, Failure> {
    let mut dev = lab::preconditioned::<f64>(cfg, ops.len(), 0, seed);
    let wls = engine::allocate(&dev, ops.len())?;
    ops.iter()
        .zip(wls)
        .map(|(&op, wl)| {
            let r = truth_table(&mut dev, wl, op)?;
            Ok(TruthTableRow {
                op: op.label(),
                l0: bit(r.observed[0]),
                l1: bit(r.observed[1]),
                l2: bit(r.observed[2]),
                l3: bit(r.observed[3]),
                expected: r.expected.iter().map(|&b| bit(b)).collect::<Vec<_>>().join(""),
                cells: r.cells,
                mismatches: r.mismatches,
                degraded: r.degraded,
                result: if r.passed() { "PASS" } else { "FAIL" },
            })
        })
        .collect()
}

fn cmd_truth_table(ctx: &Ctx, names: &[String], plans: bool) -> Outcome {
    let ops = if names.is_empty() { OpCode::standard().to_vec() } else { parse_ops(names)? };
    if ops.is_empty() {
        return Err(Failure::Usage("no ops given".into()));
    }
    if plans {
        let p = mcflash::CellPhysics::from_config(&ctx.cfg.physics, &ctx.cfg.wear);
        let l = mcflash::device::SenseLimits::from_config(&ctx.cfg.device);
        eprint!("{}", format_plan_table(&plan_table(&p, &l)));
    }
    let rows = truth_rows(&ctx.cfg, &ops, ctx.seed())?;
    ctx.emit(&rows)?;
    let failed: Vec<&str> = rows.iter().filter(|r| r.result == "FAIL").map(|r| r.op.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(format!("truth table mismatch for {}", failed.join(", "))))
    }
}

fn cmd_rber(ctx: &Ctx, names: &[String], wear: WearState, pages: Option<usize>) -> Outcome {
    let ops = parse_ops(names)?;
    let pages = pages.unwrap_or(ctx.cfg.lab.pages);
    let mut rows = Vec::new();
    for (i, &op) in ops.iter().enumerate() {
        let r = lab::run_rber::<f64>(&ctx.cfg, op, wear, pages, lab::derive_seed(ctx.seed(), i as u64))?;
        rows.push(RberRow::from(&r));
    }
    ctx.emit(&rows)
}

fn cmd_sweep(
    ctx: &Ctx,
    op: &str,
    reference: &str,
    range: (Option<i32>, Option<i32>),
    pages: Option<usize>,
    wear: WearState,
) -> Outcome {
    let op: OpCode = op.parse()?;
    let reference = RefIndex::parse(reference)?;
    let limits = mcflash::device::SenseLimits::<f64>::from_config(&ctx.cfg.device);
    let (lo, hi) = limits.legal_range(ctx.cfg.physics.default_refs[reference as usize]);
    let (from, to) = (range.0.unwrap_or(lo), range.1.unwrap_or(hi));
    if from > to {
        return Err(Failure::Usage(format!("empty offset range {from}..={to}")));
    }
    let pages = pages.unwrap_or(ctx.cfg.lab.sweep_pages_per_point);
    let curve = lab::run_sweep::<f64>(&ctx.cfg, op, reference, from..=to, pages, wear, ctx.seed())?;
    match curve.zero_window {
        Some((lo, hi)) => eprintln!("zero-error window: {lo}..={hi} ({} steps)", curve.window_width()),
        None => eprintln!("zero-error window: none"),
    }
    ctx.emit(&curve.rows())
}

#[derive(Serialize)]
struct CycleRow {
    op: String,
    cycles: u32,
    erase_count: u32,
    pages: u64,
    bits: u64,
    mismatches: u64,
    rber_percent: f64,
    upper_bound_percent: Option<f64>,
}

fn cmd_cycle(ctx: &Ctx, cycles: u32, names: &[String], pages: usize) -> Outcome {
    let ops = parse_ops(names)?;
    let mut rows = Vec::new();
    for (i, &op) in ops.iter().enumerate() {
        let seed = lab::derive_seed(ctx.seed(), i as u64);
        let mut dev = lab::preconditioned::<f64>(&ctx.cfg, pages, 0, seed);
        for b in 0..dev.geometry().blocks_per_plane {
            lab::cycle_block(&mut dev, b, cycles)?;
        }
        let erase_count = dev.block_meta(0)?.erase_count;
        let mut rng = ChaCha8Rng::seed_from_u64(lab::derive_seed(seed, 1));
        let r = lab::measure_rber(&mut dev, op, pages, &mut rng)?;
        rows.push(CycleRow {
            op: r.op,
            cycles,
            erase_count,
            pages: r.pages_tested,
            bits: r.bits_compared,
            mismatches: r.mismatches,
            rber_percent: r.rber_percent,
            upper_bound_percent: r.upper_bound_percent,
        });
    }
    ctx.emit(&rows)
}

fn cmd_bake(ctx: &Ctx, hours: &[f64], pe: u32, op: &str, pages: usize) -> Outcome {
    if hours.windows(2).any(|w| w[1] < w[0]) || hours.iter().any(|&h| h < 0.0) {
        return Err(Failure::Usage("bake times must be non-negative and non-decreasing".into()));
    }
    let op: OpCode = op.parse()?;
    let mut dev = lab::preconditioned::<f64>(&ctx.cfg, pages, pe, ctx.seed());
    let mut rng = ChaCha8Rng::seed_from_u64(lab::derive_seed(ctx.seed(), 1));
    let wls: Vec<WordlineAddr> = engine::allocate(&dev, pages)?;
    let operands = lab::write_random_operands(&mut dev, op.kind, &wls, &mut rng)?;
    let plan = engine::plan_offsets(op, dev.physics(), dev.limits());
    let mut baked = 0.0;
    let mut rows = Vec::new();
    for &h in hours {
        lab::bake_all(&mut dev, h - baked)?;
        baked = h;
        let t = lab::score(&mut dev, &plan, &wls, &operands)?;
        rows.push(RberRow::from(&lab::RberReport::from_tally(op, WearState::new(pe, h), &t)));
    }
    ctx.emit(&rows)
}

#[derive(Serialize)]
struct CalibrationRow {
    quantity: String,
    value: f64,
    target: f64,
    satisfied: bool,
}

fn cmd_calibrate(ctx: &Ctx, baselines: bool) -> Outcome {
    if baselines {
        let fit = workloads::fit_baselines(&ctx.cfg)?;
        eprintln!("calibrated, not derived:");
        eprintln!("[baselines.parabit]\nt_op_us = {}\ndram_realloc_us = {:.2}", fit.parabit.t_op_us, fit.parabit.dram_realloc_us);
        eprintln!("[baselines.flashcosmos]\nt_sense_us = {:.2}\nmax_operands = {}", fit.flashcosmos.t_sense_us, fit.flashcosmos.max_operands);
        let mut rows = Vec::new();
        for k in WorkloadKind::ALL {
            let i = k as usize;
            for (name, got, want) in [
                ("parabit", fit.parabit_speedups[i], fit.parabit_targets[i]),
                ("flashcosmos", fit.flashcosmos_speedups[i], fit.flashcosmos_targets[i]),
            ] {
                rows.push(CalibrationRow {
                    quantity: format!("{k} mean speedup vs {name}"),
                    value: got,
                    target: want,
                    satisfied: (got / want - 1.0).abs() <= 0.2,
                });
            }
        }
        return ctx.emit(&rows);
    }
    let cal = calibrate::calibrate(&ctx.cfg).map_err(|e| match e {
        mcflash::Error::Infeasible(m) => Failure::Check(format!("calibration infeasible: {m}")),
        e => e.into(),
    })?;
    eprint!("{}", cal.wear_toml());
    let mut rows: Vec<CalibrationRow> = calibrate::CALIBRATED_OPS
        .iter()
        .zip(cal.predicted)
        .map(|(k, p)| CalibrationRow {
            quantity: format!("cycled RBER fraction, {k}"),
            value: p,
            target: cal.targets.get(*k),
            satisfied: true,
        })
        .collect();
    rows.extend(cal.constraints.iter().map(|c| CalibrationRow {
        quantity: c.name.clone(),
        value: c.value,
        target: c.limit,
        satisfied: c.satisfied,
    }));
    ctx.emit(&rows)
}

fn cmd_timeline(ctx: &Ctx, names: &[String], op: Option<&str>) -> Outcome {
    let paradigms: Vec<Paradigm> =
        names.iter().filter(|s| !s.trim().is_empty()).map(|s| s.parse()).collect::<Result<_, _>>()?;
    if paradigms.is_empty() {
        return Err(Failure::Usage("no paradigms given".into()));
    }
    let op: Option<OpCode> = op.map(str::parse).transpose()?;
    let s = SsdConfig::from_config(&ctx.cfg);
    let b = Baselines::from_config(&ctx.cfg);
    let label = op.map_or("t_R".to_string(), |o| o.label());
    let mut rows: Vec<TimelineRow> = Vec::new();
    for p in paradigms {
        let t = if p.is_baseline() {
            ssd::baseline_timeline(p, &s, op.unwrap_or(OpCode::new(mcflash::OpKind::And)), &b)?
        } else {
            ssd::timeline(p, &s, op)?
        };
        eprintln!("{:<16}{:>10.1} us{}", p.name(), t.total_us, if t.calibrated { "  (calibrated, not derived)" } else { "" });
        rows.extend(t.rows(&label));
    }
    ctx.emit(&rows)
}

/// `a,b,c`, `lo..hi` or `lo..hi:step` (inclusive).
pub fn parse_scales(text: &str) -> Result<Vec<u64>, Failure> {
    let bad = || Failure::Usage(format!("cannot parse scale list `{text}`"));
    if let Some((lo, rest)) = text.split_once("..") {
        let (hi, step) = rest.split_once(':').unwrap_or((rest, "1"));
        let lo: u64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: u64 = hi.trim_start_matches('=').trim().parse().map_err(|_| bad())?;
        let step: u64 = step.trim().parse().map_err(|_| bad())?;
        if step == 0 || lo > hi {
            return Err(bad());
        }
        return Ok((lo..=hi).step_by(step as usize).collect());
    }
    text.split(',').filter(|s| !s.trim().is_empty()).map(|s| s.trim().parse().map_err(|_| bad())).collect()
}

fn cmd_workload(ctx: &Ctx, kind: &str, images: Option<&str>, months: Option<&str>, check: bool) -> Outcome {
    let kind: WorkloadKind = kind.parse()?;
    let scales = match (kind, images, months) {
        (WorkloadKind::Bitmap, None, Some(m)) | (WorkloadKind::Segmentation | WorkloadKind::Encryption, Some(m), None) => {
            parse_scales(m)?
        }
        (_, None, None) => kind.sweep(&ctx.cfg),
        (WorkloadKind::Bitmap, Some(_), _) => return Err(Failure::Usage("bitmap scales are given with --months".into())),
        _ => return Err(Failure::Usage(format!("{kind} scales are given with --images"))),
    };
    if scales.is_empty() {
        return Err(Failure::Usage("no scale points given".into()));
    }
    let specs: Vec<WorkloadSpec> = scales.iter().map(|&s| WorkloadSpec::new(kind, s)).collect::<Result<_, _>>()?;
    let b = Baselines::from_config(&ctx.cfg);
    let mut results = Vec::new();
    for spec in &specs {
        let r = if check { workloads::run(spec, &ctx.cfg, ctx.seed())? } else { workloads::project(spec, &ctx.cfg, &b)? };
        results.push(r);
    }
    for p in [Paradigm::Osc, Paradigm::Isc, Paradigm::ParaBit, Paradigm::FlashCosmos] {
        let tag = if p.is_baseline() { " (calibrated, not derived)" } else { "" };
        eprintln!("mean speedup vs {:<12}{:>8.3}x{tag}", p.name(), workloads::mean_speedup(&results, p));
    }
    let rows: Vec<WorkloadRow> = results.iter().map(WorkloadRow::from).collect();
    ctx.emit(&rows)?;
    let bad: u64 = results.iter().map(|r| r.mismatches).sum();
    if bad > 0 {
        return Err(Failure::Check(format!("{bad} functional mismatches")));
    }
    Ok(())
}

fn cmd_demo(ctx: &Ctx, pages: usize) -> Outcome {
    let mut out = io::stdout().lock();
    let p = mcflash::CellPhysics::from_config(&ctx.cfg.physics, &ctx.cfg.wear);
    let l = mcflash::device::SenseLimits::from_config(&ctx.cfg.device);
    writeln!(out, "{}", ctx.meta().header_lines().join("\n"))?;
    writeln!(out, "\nread-reference plans (DAC steps)\n{}", format_plan_table(&plan_table(&p, &l)))?;
    let rows = truth_rows(&ctx.cfg, &OpCode::standard(), ctx.seed())?;
    writeln!(out, "truth tables (L0 L1 L2 L3)")?;
    for r in &rows {
        writeln!(out, "  {:<10}{} {} {} {}  {}", r.op, r.l0, r.l1, r.l2, r.l3, r.result)?;
    }
    writeln!(out, "\nfresh error rate, {pages} pages per op")?;
    for (i, op) in OpCode::standard().into_iter().enumerate() {
        let r = lab::run_rber::<f64>(&ctx.cfg, op, WearState::FRESH, pages, lab::derive_seed(ctx.seed(), i as u64))?;
        writeln!(out, "  {:<10}{} / {} bits", op.label(), r.mismatches, r.bits_compared)?;
    }
    let s = SsdConfig::from_config(&ctx.cfg);
    writeln!(out, "\ntwo-operand timelines, 8 MiB operands")?;
    for par in [Paradigm::Osc, Paradigm::Isc, Paradigm::IfcAligned, Paradigm::IfcNonAligned] {
        writeln!(out, "  {:<16}{:>8.1} us", par.name(), ssd::timeline(par, &s, None)?.total_us)?;
    }
    if rows.iter().any(|r| r.result == "FAIL") {
        return Err(Failure::Check("truth table mismatch".into()));
    }
    Ok(())
}
