use proptest::prelude::*;

use mcflash::cell_physics::{CellState, WearModelParams, WearState};
use mcflash::device::{DeviceGeometry, PageKind, ReadRefConfig, SenseLimits, WordlineAddr};
use mcflash::engine::{execute, plan_offsets, write_not_operand, write_operands, OpCode, OpKind};
use mcflash::lab::analytic::expected_rber;
use mcflash::ssd::{timeline, transfer_times, Paradigm, SsdConfig};
use mcflash::workloads::{project_sweep, WorkloadKind};
use mcflash::{BitPage, Config, NandDevice};

fn small_device(seed: u64) -> NandDevice {
    let cfg = Config::default();
    NandDevice::with_geometry(&cfg, DeviceGeometry::new(1, 4, 256).unwrap(), seed)
}

fn legal_config() -> impl Strategy<Value = ReadRefConfig> {
    let cfg = Config::default();
    let limits = SenseLimits::<f64>::from_config(&cfg.device);
    let r: Vec<(i32, i32)> = cfg.physics.default_refs.iter().map(|&d| limits.legal_range(d)).collect();
    (r[0].0..=r[0].1, r[1].0..=r[1].1, r[2].0..=r[2].1).prop_map(|(a, b, c)| ReadRefConfig::new(a, b, c))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn soft_bit_read_is_xnor_of_two_msb_reads(plus in legal_config(), minus in legal_config(), seed in any::<u64>()) {
        let mut d = small_device(seed);
        let wl = WordlineAddr::new(0, 0);
        let (a, b) = (d.random_page(), d.random_page());
        d.program_wordline(wl, &a, &b).unwrap();
        let sbr = d.soft_bit_read(wl, &plus, &minus).unwrap();
        let p = d.read_page(wl.page(PageKind::Msb), &plus).unwrap();
        let m = d.read_page(wl.page(PageKind::Msb), &minus).unwrap();
        let oracle = BitPage::from_fn(p.len(), |i| p.get(i) == m.get(i));
        prop_assert_eq!(sbr, oracle);
    }

    #[test]
    fn inverse_read_is_complement(cfg in legal_config(), lsb in any::<bool>(), seed in any::<u64>()) {
        let mut d = small_device(seed);
        let wl = WordlineAddr::new(0, 1);
        let (a, b) = (d.random_page(), d.random_page());
        d.program_wordline(wl, &a, &b).unwrap();
        let addr = wl.page(if lsb { PageKind::Lsb } else { PageKind::Msb });
        let normal = d.read_page(addr, &cfg).unwrap();
        let inv = d.inverse_read(addr, &cfg).unwrap();
        for i in 0..normal.len() {
            prop_assert_ne!(normal.get(i), inv.get(i));
        }
    }

    #[test]
    fn execute_never_perturbs_stored_operands(op in 0usize..7, repeats in 1usize..6, seed in any::<u64>()) {
        let op = OpCode::standard()[op];
        let mut d = small_device(seed);
        let wl = WordlineAddr::new(0, 2);
        let (a, b) = (d.random_page(), d.random_page());
        if op.kind == OpKind::Not {
            write_not_operand(&mut d, wl, &b).unwrap();
        } else {
            write_operands(&mut d, wl, &a, &b).unwrap();
        }
        let before = d.wordline_image(wl).unwrap();
        let first = execute(&mut d, wl, op).unwrap().page;
        for _ in 1..repeats {
            prop_assert_eq!(&execute(&mut d, wl, op).unwrap().page, &first);
        }
        prop_assert_eq!(d.wordline_image(wl).unwrap(), before);
    }

    #[test]
    fn wear_widens_and_retention_lowers(pe in 0u32..20_000, extra in 1u32..5_000, h in 0.0f64..500.0, dh in 0.1f64..500.0) {
        let w = WearModelParams::<f64>::from_config(&Config::default().wear);
        for s in CellState::ALL {
            prop_assert!(w.sigma_factor(s, pe + extra) >= w.sigma_factor(s, pe));
        }
        // The erased state drifts up slightly; programmed states lose charge.
        for s in CellState::ALL.into_iter().filter(|s| s.is_programmed()) {
            prop_assert!(w.mean_shift(s, h + dh) <= w.mean_shift(s, h));
        }
    }

    #[test]
    fn expected_rber_grows_with_cycling(pe in 0u32..10_000, extra in 1u32..5_000, op in 0usize..4) {
        let cfg = Config::default();
        let p = mcflash::CellPhysics::from_config(&cfg.physics, &cfg.wear);
        let l = SenseLimits::from_config(&cfg.device);
        let op = OpCode::new([OpKind::And, OpKind::Or, OpKind::Xnor, OpKind::Not][op]);
        let plan = plan_offsets(op, &p, &l);
        let lo = expected_rber(&p, &l, &plan, WearState::new(pe, 0.0));
        let hi = expected_rber(&p, &l, &plan, WearState::new(pe + extra, 0.0));
        prop_assert!(hi >= lo, "{lo} -> {hi}");
    }

    #[test]
    fn paradigm_ordering_holds_for_any_ssd(
        channel_bw in 0.2f64..8.0,
        host_share in 0.05f64..0.99,
        t_r in 20.0f64..120.0,
        t_prog in 200.0f64..2000.0,
        page_scale in 1u32..4,
    ) {
        // In-storage computing presumes the channels together outrun the
        // host link; host_share is the host link as a fraction of that.
        let mut s = SsdConfig::default();
        s.channel_bw *= channel_bw / 1.2;
        s.host_bw = host_share * s.channels as f64 * s.channel_bw;
        s.t_r_us = t_r;
        s.t_prog_us = t_prog;
        s.page_bytes *= page_scale as f64;
        let t = |p| timeline(p, &s, None).unwrap();
        let (osc, isc, al, na) = (t(Paradigm::Osc), t(Paradigm::Isc), t(Paradigm::IfcAligned), t(Paradigm::IfcNonAligned));
        prop_assert!(al.total_us < isc.total_us && isc.total_us < osc.total_us);
        prop_assert!((na.total_us - al.total_us - (2.0 * t_r + t_prog)).abs() < 1e-9);
        for x in [&osc, &isc, &al, &na] {
            let sum: f64 = x.breakdown.iter().map(|p| p.us).sum();
            prop_assert!((sum - x.total_us).abs() < 1e-9);
        }
        let mut doubled = s.clone();
        doubled.page_bytes *= 2.0;
        let (d0, e0) = transfer_times(&s);
        let (d1, e1) = transfer_times(&doubled);
        prop_assert!((d1 - 2.0 * d0).abs() < 1e-9 && (e1 - 2.0 * e0).abs() < 1e-9);
    }
}

#[test]
fn image_workload_speedups_are_scale_invariant() {
    let cfg = Config::default();
    let b = mcflash::ssd::Baselines::from_config(&cfg);
    for k in [WorkloadKind::Segmentation, WorkloadKind::Encryption] {
        let r = project_sweep(k, &cfg, &b).unwrap();
        for p in [Paradigm::Osc, Paradigm::Isc] {
            let first = r[0].speedups[&p];
            assert!(r.iter().all(|x| (x.speedups[&p] / first - 1.0).abs() < 1e-9), "{k} {p}");
        }
        let per_unit: Vec<f64> = r.iter().map(|x| x.mcflash_us() / x.spec.scale as f64).collect();
        assert!(per_unit.iter().all(|v| (v / per_unit[0] - 1.0).abs() < 1e-9), "{k} time not linear in scale");
    }
}

#[test]
fn speedup_is_ratio_of_totals() {
    let cfg = Config::default();
    let b = mcflash::ssd::Baselines::from_config(&cfg);
    for k in WorkloadKind::ALL {
        for r in project_sweep(k, &cfg, &b).unwrap() {
            for (p, s) in &r.speedups {
                assert_eq!(*s, r.total_us[p] / r.mcflash_us());
            }
        }
    }
}

#[test]
fn xor_costs_more_per_page_than_and() {
    let s = SsdConfig::default();
    let and = timeline(Paradigm::IfcAligned, &s, Some(OpCode::new(OpKind::And))).unwrap();
    let xor = timeline(Paradigm::IfcAligned, &s, Some(OpCode::inverse(OpKind::Xor))).unwrap();
    assert!(xor.total_us > and.total_us);
}

#[test]
fn every_functional_check_is_clean_when_fresh() {
    let mut cfg = Config::default();
    cfg.workloads.functional_wordlines = 2;
    for k in WorkloadKind::ALL {
        for s in k.sweep(&cfg) {
            let spec = mcflash::workloads::WorkloadSpec::new(k, s).unwrap();
            let r = mcflash::workloads::run(&spec, &cfg, 3).unwrap();
            assert!(r.functional_checked && r.bits_checked > 0);
            assert_eq!(r.mismatches, 0, "{k} at {s}");
        }
    }
}
