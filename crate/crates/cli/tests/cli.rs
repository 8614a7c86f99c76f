use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use clustercap::cuts::CutMatrix;
use clustercap::instance::read_instance;
use clustercap::lp::{parse_lp_text, size_stats};
use clustercap::models::{build_generalized, ModelKind};
use clustercap_cli::bench::HEADER;
use clustercap_cli::run;

fn workdir() -> &'static Path {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        std::env::set_var("CLUSTERCAP_CACHE", dir.path().join("cache"));
        dir
    })
    .path()
}

fn path(name: &str) -> PathBuf {
    workdir().join(name)
}

fn cli(args: &[&str]) -> i32 {
    workdir();
    run(std::iter::once("clustercap").chain(args.iter().copied()))
}

fn two_lots() -> String {
    format!("{}/../../data/two_lots.json", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn cuts_for_three_chambers_match_shipped_table() {
    let out = path("m3.csv");
    assert_eq!(cli(&["cuts", "--chambers", "3", "--out", out.to_str().unwrap()]), 0);
    let ours = CutMatrix::from_csv(&std::fs::read_to_string(&out).unwrap(), 3, true).unwrap();
    let table = std::fs::read_to_string(format!("{}/../../data/reference_cuts_n3.csv", env!("CARGO_MANIFEST_DIR"))).unwrap();
    let table = CutMatrix::from_csv(&table, 3, true).unwrap();
    assert_eq!(ours.twice_pi_rows(), table.twice_pi_rows());
}

#[test]
fn raw_cuts_and_graph() {
    let raw = path("raw2.csv");
    assert_eq!(cli(&["cuts", "--chambers", "2", "--raw", "--out", raw.to_str().unwrap()]), 0);
    assert_eq!(std::fs::read_to_string(&raw).unwrap().lines().count(), 4);
    let graph = path("g3.txt");
    assert_eq!(cli(&["cuts", "--chambers", "3", "--graph", "--out", graph.to_str().unwrap()]), 0);
    assert_eq!(std::fs::read_to_string(&graph).unwrap().lines().count(), 6);
}

#[test]
fn generate_then_solve_is_optimal() {
    let inst = path("i.json");
    let args = ["gen", "--sizecat", "0", "--shape", "1:1", "--locked", "0", "--density", "2", "--chambers", "3"];
    assert_eq!(cli(&[&args[..], &["--seed", "7", "--out", inst.to_str().unwrap()]].concat()), 0);
    let sol = path("sol.json");
    assert_eq!(cli(&["solve", "--model", "generalized", inst.to_str().unwrap(), "--out", sol.to_str().unwrap()]), 0);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&sol).unwrap()).unwrap();
    assert_eq!(v["status"], "Optimal");
    assert_eq!(v["model"], "generalized");
    assert!(v["rho"].as_f64().unwrap() > 0.0);
    assert!(!v["assignments"].as_array().unwrap().is_empty());
    assert_eq!(cli(&["verify", inst.to_str().unwrap(), "--samples", "50"]), 0);
}

#[test]
fn two_lots_solves_to_330() {
    for model in ["generalized", "alternative"] {
        let sol = path(&format!("two_lots_{model}.json"));
        assert_eq!(cli(&["solve", "--model", model, &two_lots(), "--out", sol.to_str().unwrap()]), 0);
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&sol).unwrap()).unwrap();
        assert!((v["rho"].as_f64().unwrap() - 330.0).abs() < 1e-6);
    }
}

#[test]
fn exported_lp_counts_match_model() {
    let lp = path("two_lots.lp");
    assert_eq!(cli(&["export-lp", "--model", "generalized", &two_lots(), "--out", lp.to_str().unwrap()]), 0);
    let parsed = parse_lp_text(&std::fs::read_to_string(&lp).unwrap()).unwrap();
    let inst = read_instance(two_lots()).unwrap();
    let m = clustercap::cuts::compute_cut_matrix(3, true).unwrap();
    let built = build_generalized(&inst, &m).unwrap();
    assert_eq!(size_stats(&parsed), built.stats);
    assert_eq!(built.kind, ModelKind::Generalized);
}

#[test]
fn bench_report() {
    let empty = path("empty.csv");
    assert_eq!(cli(&["bench", "--out", empty.to_str().unwrap()]), 0);
    assert_eq!(std::fs::read_to_string(&empty).unwrap(), HEADER.join(",") + "\n");

    let report = path("report.csv");
    let args = ["bench", &two_lots(), "--repetitions", "3", "--workers", "2", "--out", report.to_str().unwrap()];
    assert_eq!(cli(&args), 0);
    let mut rdr = csv::Reader::from_path(&report).unwrap();
    let records: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    let runs: Vec<_> = records.iter().filter(|r| &r[0] == "run").collect();
    assert_eq!(runs.len(), 6);
    for r in &runs {
        assert!((r[15].parse::<f64>().unwrap() - 330.0).abs() < 1e-6);
        assert_eq!(&r[16], "Optimal");
    }
    let summary = records.iter().find(|r| &r[0] == "instance").unwrap();
    assert!(summary[17].parse::<f64>().unwrap() > 0.0);
    let ratio: f64 = summary[18].parse().unwrap();
    assert!((ratio - 63.0 / 68.0).abs() < 1e-12);
}

#[test]
fn exit_codes() {
    assert_eq!(cli(&["frobnicate"]), 2);
    assert_eq!(cli(&["cuts"]), 2);
    assert_eq!(cli(&["solve", "--model", "quadratic", &two_lots()]), 2);
    assert_eq!(cli(&["solve", path("missing.json").to_str().unwrap()]), 1);
    assert_eq!(cli(&["cuts", "--chambers", "9"]), 1);
    assert_eq!(cli(&["gen", "--sizecat", "7"]), 1);
    assert_eq!(cli(&["--help"]), 0);
}
