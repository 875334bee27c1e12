mod common;

use careflow_core::census::load_residents;
use careflow_core::survival::{log_likelihood, FittedLosModel, LosDataset};
use common::*;

#[test]
fn help_exits_zero() {
    let o = cli(&["--help"]);
    assert_eq!(o.code, 0);
    assert!(o.stdout.contains("Usage: careflow"));
    assert_eq!(cli(&["sweep", "--help"]).code, 0);
}

#[test]
fn unknown_flag_prints_usage_and_exits_two() {
    let o = cli(&["simulate", "--frobnicate"]);
    assert_eq!(o.code, 2);
    assert!(o.stderr.contains("Usage:"), "{}", o.stderr);
    assert_eq!(cli(&[]).code, 2);
}

#[test]
fn fit_los_matches_golden_output() {
    let dir = tempfile::tempdir().unwrap();
    let csv = fixtures().join("synthetic.csv");
    let out = dir.path().join("model.json");
    let o = cli(&["fit-los", csv.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let golden = std::fs::read_to_string(fixtures().join("golden/fit_los_synthetic.txt")).unwrap();
    let printed = o.stdout.replace(csv.to_str().unwrap(), "<csv>").replace(out.to_str().unwrap(), "<out>");
    assert_eq!(printed, golden);

    let got: FittedLosModel = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    let want: FittedLosModel =
        serde_json::from_slice(&std::fs::read(fixtures().join("golden/fit_los_synthetic.json")).unwrap()).unwrap();
    for (a, b) in got.params.iter().zip(&want.params) {
        assert!((a.eta - b.eta).abs() < 1e-9 && (a.sigma - b.sigma).abs() < 1e-9, "{a:?} vs {b:?}");
    }
}

#[test]
fn golden_fit_is_a_local_maximum_of_the_likelihood() {
    let golden: FittedLosModel =
        serde_json::from_slice(&std::fs::read(fixtures().join("golden/fit_los_synthetic.json")).unwrap()).unwrap();
    let records = load_residents(fixtures().join("synthetic.csv"), &golden.dispositions).unwrap();
    let data = LosDataset::new(records.iter().map(|r| r.los).collect(), golden.dispositions.clone()).unwrap();
    let ll = |p: &[_]| log_likelihood(&data, p).unwrap();
    let base = ll(&golden.params);
    let h = 1e-4;
    for i in 0..golden.params.len() {
        for (de, ds) in [(1.0, 0.0), (0.0, 1.0)] {
            let mut up = golden.params.clone();
            let mut dn = golden.params.clone();
            up[i].eta += de * h;
            up[i].sigma += ds * h;
            dn[i].eta -= de * h;
            dn[i].sigma -= ds * h;
            let g = (ll(&up) - ll(&dn)) / (2.0 * h);
            assert!(g.abs() < 1e-3, "gradient {g} at param {i}");
            let mut far = golden.params.clone();
            far[i].eta += de * 0.05;
            far[i].sigma += ds * 0.05;
            assert!(ll(&far) < base);
        }
    }
}

#[test]
fn fit_los_rejects_bad_data_with_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "resident_id,admit_day,x1,x2,x3,x4,x5,x6,x7,x8,x9,los_days,disposition,censored\nR1,0,1,0,0,1,0,0,0,0,0,-3,community,0\n").unwrap();
    let o = cli(&["fit-los", bad.to_str().unwrap(), "--out", dir.path().join("m.json").to_str().unwrap()]);
    assert_eq!(o.code, 3, "{}", o.stderr);
    assert!(o.stderr.contains("los_days"), "{}", o.stderr);
}

#[test]
fn simulate_missing_staff_table_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = serde_json::to_value(small_config(1)).unwrap();
    v.as_object_mut().unwrap().remove("staff_table");
    let path = dir.path().join("c.json");
    std::fs::write(&path, serde_json::to_vec(&v).unwrap()).unwrap();
    let o = cli(&["--data-dir", dir.path().join("d").to_str().unwrap(), "simulate", path.to_str().unwrap()]);
    assert_eq!(o.code, 2);
    assert!(o.stderr.contains("staff_table"), "{}", o.stderr);
}

#[test]
fn simulate_evaluate_sweep_validate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    let data = data.to_str().unwrap();
    let out_dir = dir.path().join("out");
    let out_dir = out_dir.to_str().unwrap();
    let cfg = write_config(dir.path(), &small_config(21));

    let o = cli(&["--data-dir", data, "simulate", cfg.to_str().unwrap()]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let id = run_id(&o.stdout);
    for line in o.stdout.lines().filter_map(|l| l.strip_prefix("wrote ")) {
        assert!(std::path::Path::new(line).is_file(), "{line}");
    }

    let cost = fixtures().join("cost.example.json");
    let o = cli(&["--data-dir", data, "evaluate", &id[..8], "CNA:1/20@state", "CNA:1/10@facility", "--cost", cost.to_str().unwrap(), "--out-dir", out_dir]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let paths: Vec<&str> = o.stdout.lines().filter_map(|l| l.strip_prefix("wrote ")).collect();
    assert_eq!(paths.len(), 2);
    assert!(paths.iter().all(|p| std::path::Path::new(p).is_file()));

    let o = cli(&["--data-dir", data, "sweep", &id, "--type", "CNA", "--k", "1..60", "--out-dir", out_dir]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert!(o.stdout.contains("suggested CNA:1/"));

    let o = cli(&["--data-dir", data, "validate", &id, fixtures().join("synthetic.csv").to_str().unwrap(), "--out-dir", out_dir]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert!(o.stdout.contains("K-S"));

    let o = cli(&["--data-dir", data, "evaluate", &id, "CNA:1/0"]);
    assert_eq!(o.code, 2, "{}", o.stderr);
    let o = cli(&["--data-dir", data, "evaluate", "00000000-0000-0000-0000-000000000000", "CNA:1/20"]);
    assert_eq!(o.code, 3, "{}", o.stderr);
    let o = cli(&["--data-dir", data, "sweep", &id, "--k", "ten"]);
    assert_eq!(o.code, 2, "{}", o.stderr);
}

#[test]
fn sweep_on_zero_demand_picks_range_max() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    let cfg = write_config(dir.path(), &empty_config());
    let o = cli(&["--data-dir", data.to_str().unwrap(), "simulate", cfg.to_str().unwrap()]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let id = run_id(&o.stdout);
    let o = cli(&["--data-dir", data.to_str().unwrap(), "sweep", &id, "--k", "3..17", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert!(o.stdout.contains("suggested CNA:1/17 "), "{}", o.stdout);
}

#[test]
fn whatif_reports_both_runs() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    let cfg = write_config(dir.path(), &small_config(2));
    let o = cli(&["--data-dir", data.to_str().unwrap(), "whatif", cfg.to_str().unwrap(), "--scenario", "S2"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert_eq!(o.stdout.lines().filter(|l| l.starts_with("run ")).count(), 2);
    assert!(o.stdout.contains("CNA min/day"));
    let o = cli(&["--data-dir", data.to_str().unwrap(), "whatif", cfg.to_str().unwrap(), "--scenario", "nope"]);
    assert_eq!(o.code, 2);
}

#[test]
fn fit_arrivals_writes_model() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("arrivals.csv");
    let counts = [2, 5, 1, 0, 7, 3, 2, 9, 1, 4, 0, 6, 2, 3, 8, 1, 2, 5, 0, 3, 4, 1, 10, 2, 3, 0, 2, 6, 1, 3];
    let body: String = std::iter::once("day,arrivals".to_string())
        .chain(counts.iter().enumerate().map(|(d, c)| format!("{d},{c}")))
        .collect::<Vec<_>>()
        .join("\n");
    std::fs::write(&csv, body).unwrap();
    let out = dir.path().join("a.json");
    let o = cli(&["fit-arrivals", csv.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let m: careflow_core::census::ArrivalModel = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    let mean = counts.iter().sum::<u32>() as f64 / counts.len() as f64;
    assert!((m.mean() - mean).abs() < 1e-6, "{} vs {mean}", m.mean());
}
