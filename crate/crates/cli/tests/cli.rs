use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pseudoconic"))
        .args(args)
        .arg("--cache-dir")
        .arg(dir.join("cache"))
        .env("PSEUDOCONIC_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)))
}

#[test]
fn scheme_verify_exhaustive_q3() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["scheme", "verify", "--q", "3", "--exhaustive"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["ok"], true);
    let inter = &r["report"]["scheme"]["intersection"];
    assert_eq!(inter["computed"], inter["claimed"]);
    assert_eq!(r["report"]["quotient"]["parameters"], serde_json::json!([81, 32, 13, 12]));
}

#[test]
fn eigen_reports_are_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let a = run(&["scheme", "eigen", "--q", "5"], dir.path());
    let b = run(&["scheme", "eigen", "--q", "5"], dir.path());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(report(&a)["report"]["multiplicities"][0], "1");
}

#[test]
fn pseudoconic_file_round_trip_and_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("pc.json");
    let f = file.to_str().unwrap();
    assert_eq!(run(&["pseudoconic", "build", "--q", "3", "--out", f], dir.path()).status.code(), Some(0));
    let good = run(&["pseudoconic", "verify", "--q", "3", "--in", f], dir.path());
    assert_eq!(good.status.code(), Some(0));
    assert_eq!(report(&good)["ok"], true);

    let original: Value = serde_json::from_str(&std::fs::read_to_string(&file).unwrap()).unwrap();

    // a different generator list
    let mut v = original.clone();
    v["generators"][0] = Value::from(v["generators"][0].as_u64().unwrap() + 1);
    std::fs::write(&file, v.to_string()).unwrap();
    let bad = run(&["pseudoconic", "verify", "--q", "3", "--in", f], dir.path());
    assert_eq!(bad.status.code(), Some(1));
    assert_eq!(report(&bad)["ok"], false);

    // a moved point
    let mut v = original.clone();
    v["special_set"][0][1] = serde_json::json!([1, 1]);
    std::fs::write(&file, v.to_string()).unwrap();
    assert_eq!(run(&["pseudoconic", "verify", "--q", "3", "--in", f], dir.path()).status.code(), Some(1));

    // not a report at all
    std::fs::write(&file, "{}").unwrap();
    assert_eq!(run(&["pseudoconic", "verify", "--q", "3", "--in", f], dir.path()).status.code(), Some(1));
}

#[test]
fn every_uset_is_infeasible_q3() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["search", "uset-feasibility", "--q", "3", "--all"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["report"]["infeasible"], 432);
    assert_eq!(r["report"]["timeouts"], 0);
}

#[test]
fn classify_with_checkpoint_q3() {
    let dir = tempfile::tempdir().unwrap();
    let cp = dir.path().join("cp.json");
    let args = ["search", "classify", "--q", "3", "--checkpoint", cp.to_str().unwrap()];
    let first = run(&args, dir.path());
    assert_eq!(first.status.code(), Some(0));
    let r = report(&first);
    assert_eq!(r["report"]["solution_count"], 324);
    assert_eq!(r["report"]["kinds"]["pseudo-conic"], 324);
    // every subtree is exhausted, so the resumed run only rebuilds the split
    let again = report(&run(&args, dir.path()));
    assert_eq!(again["report"]["solution_count"], 324);
    let nodes = |r: &Value| r["report"]["search"]["nodes"].as_u64().unwrap();
    assert!(nodes(&again) < nodes(&r) / 4, "{} vs {}", nodes(&again), nodes(&r));
}

#[test]
fn lp_export_cross_check() {
    let dir = tempfile::tempdir().unwrap();
    let lp = dir.path().join("m.lp");
    let out = run(&["export", "lp", "--q", "3", "--uset", "7", "--out", lp.to_str().unwrap(), "--cross-check"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["report"]["cross_check"]["internal"], "infeasible");
    assert_eq!(r["report"]["x_variables"], 243);
    let text = std::fs::read_to_string(&lp).unwrap();
    assert!(text.contains("Maximize") && text.contains("Binary") && text.trim_end().ends_with("End"));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["scheme", "verify", "--q", "4"][..],
        &["scheme", "verify", "--q", "9"],
        &["scheme", "verify", "--q", "3", "--exhaustive", "--samples", "5"],
        &["search", "uset-feasibility", "--q", "3"],
        &["usets", "enumerate", "--q", "3", "--flag", "99"],
        &["frobnicate"],
    ] {
        assert_eq!(run(args, dir.path()).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn output_file_and_cache_reuse() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let a = run(&["usets", "enumerate", "--q", "3", "-o", out.to_str().unwrap()], dir.path());
    assert_eq!(a.status.code(), Some(0));
    assert!(a.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(r["report"]["usets"], 432);
    assert_eq!(r["report"]["vectors"], 864);
    let cached: Vec<_> = std::fs::read_dir(dir.path().join("cache")).unwrap().collect();
    assert_eq!(cached.len(), 1);
    // second run reads the cache and reports the same
    let b = run(&["usets", "enumerate", "--q", "3"], dir.path());
    let r2: Value = serde_json::from_slice(&b.stdout).unwrap();
    assert_eq!(r, r2);
}
