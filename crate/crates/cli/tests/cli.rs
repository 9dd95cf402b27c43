use std::process::{Command, Output};

fn mcflash(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcflash")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn truth_table_passes_for_the_basic_ops() {
    let o = mcflash(&["truth-table", "--ops", "and,or,xnor"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let rows = data_lines(&text);
    assert!(rows[1].starts_with("and,1,0,0,0,"), "{}", rows[1]);
    assert!(rows[2].starts_with("or,1,1,0,1,"), "{}", rows[2]);
    assert!(rows[3].starts_with("xnor,1,0,1,0,"), "{}", rows[3]);
    assert!(rows[1..].iter().all(|r| r.ends_with("PASS")));
}

#[test]
fn not_decodes_only_the_upper_states() {
    let o = mcflash(&["truth-table", "--ops", "not"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(data_lines(&stdout(&o))[1].starts_with("not,-,-,1,0,"));
}

#[test]
fn degraded_complements_fail_with_exit_one() {
    let o = mcflash(&["truth-table", "--ops", "nand"]);
    assert_eq!(o.status.code(), Some(1));
    let o = mcflash(&["truth-table", "--ops", "nand-inv,nor-inv,xor-inv"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(mcflash(&["truth-table", "--ops", "mux"]).status.code(), Some(2));
    assert_eq!(mcflash(&["timeline", "--paradigms", ""]).status.code(), Some(2));
    assert_eq!(mcflash(&["timeline", "--paradigms", "gpu"]).status.code(), Some(2));
    assert_eq!(mcflash(&["workload", "--kind", "bitmap", "--months", "0..3"]).status.code(), Some(2));
    assert_eq!(mcflash(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(mcflash(&["--set", "ssd.nope=1", "timeline"]).status.code(), Some(2));
}

#[test]
fn timeline_rows_carry_metadata_and_totals() {
    let o = mcflash(&["timeline"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for key in ["# tool: mcflash", "# config_hash: ", "# seed: 42", "# units: binary"] {
        assert!(text.contains(key), "missing {key}");
    }
    let totals: Vec<(String, f64)> = data_lines(&text)[1..]
        .iter()
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[4].parse().unwrap())
        })
        .collect();
    for (name, want) in [("osc", 2063.0), ("isc", 1495.0), ("ifc-aligned", 1087.0), ("ifc-nonaligned", 1807.0)] {
        let t = totals.iter().find(|(n, _)| n == name).unwrap().1;
        assert!((t - want).abs() <= 2.0, "{name} {t}");
    }
}

#[test]
fn set_overrides_reach_the_model() {
    let o = mcflash(&["--set", "ssd.t_r_us=40", "timeline", "--paradigms", "osc"]);
    let text = stdout(&o);
    let total: f64 = data_lines(&text)[1].split(',').nth(4).unwrap().parse().unwrap();
    assert!((total - 2043.99).abs() < 0.01, "{total}");
}

#[test]
fn config_file_is_layered_over_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    std::fs::write(&path, "[ssd]\nt_prog_us = 700.0\n").unwrap();
    let o = mcflash(&["--config", path.to_str().unwrap(), "timeline", "--paradigms", "ifc-nonaligned"]);
    let text = stdout(&o);
    let total: f64 = data_lines(&text)[1].split(',').nth(4).unwrap().parse().unwrap();
    assert!((total - 1907.43).abs() < 0.01, "{total}");
}

#[test]
fn rerun_with_same_seed_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str, seed: &str| {
        let out = dir.path().join(sub);
        let o = mcflash(&[
            "--seed", seed, "--out", out.to_str().unwrap(), "rber", "--op", "and,xnor", "--pages", "8", "--pe", "3000",
            "--hours", "48",
        ]);
        assert_eq!(o.status.code(), Some(0));
        std::fs::read(out.join("rber.csv")).unwrap()
    };
    let a = run("a", "7");
    assert_eq!(a, run("b", "7"));
    assert_ne!(a, run("c", "8"));
}

#[test]
fn json_mirrors_csv_rows() {
    let o = mcflash(&["--format", "json", "timeline", "--paradigms", "osc,isc"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["metadata"]["seed"], 42);
    let csv_text = stdout(&mcflash(&["timeline", "--paradigms", "osc,isc"]));
    assert_eq!(v["rows"].as_array().unwrap().len(), data_lines(&csv_text).len() - 1);
}

#[test]
fn bitmap_workload_reports_speedup_columns() {
    let o = mcflash(&["workload", "--kind", "bitmap", "--months", "1..12", "--no-check"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let rows = data_lines(&text);
    assert_eq!(rows.len(), 13);
    assert!(rows[0].contains("speedup_osc") && rows[0].contains("speedup_parabit_calibrated"));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("calibrated, not derived"));
}

#[test]
fn workload_functional_check_runs() {
    let o = mcflash(&["--set", "workloads.functional_wordlines=1", "workload", "--kind", "encryption", "--images", "5000"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(data_lines(&text)[1].ends_with(",true,0,32768"), "{text}");
}

#[test]
fn sweep_reports_a_fresh_zero_window() {
    let o = mcflash(&["sweep", "--op", "or", "--reference", "vref0", "--pages", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let at_zero = data_lines(&text).into_iter().find(|l| l.starts_with("or,0,0.0,0,")).unwrap();
    let f: Vec<&str> = at_zero.split(',').collect();
    let rber: f64 = f[7].parse().unwrap();
    assert!((rber - 25.0).abs() < 0.5, "{rber}");
    assert!(!f[9].is_empty() && !f[10].is_empty());
}

#[test]
fn cycle_and_bake_run() {
    let o = mcflash(&["cycle", "--cycles", "20", "--pages", "4"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(data_lines(&stdout(&o))[1].starts_with("and,20,20,4,"));
    let o = mcflash(&["bake", "--hours", "0,24", "--pages", "4"]);
    assert_eq!(data_lines(&stdout(&o)).len(), 3);
    assert_eq!(mcflash(&["bake", "--hours", "24,0"]).status.code(), Some(2));
}

#[test]
fn demo_runs() {
    let o = mcflash(&["demo", "--pages", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("ifc-nonaligned"));
}
