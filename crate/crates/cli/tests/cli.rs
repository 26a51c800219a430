//! End-to-end runs of the `pomdp-lambda` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pomdp-lambda"));
    cmd.env_remove("POMDP_LAMBDA_OUT");
    cmd
}

/// Runs with `--out dir` and returns the finished process.
fn run(dir: &Path, args: &[&str]) -> Output {
    bin()
        .arg("--out")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert_eq!(code(&out), 0, "{args:?} failed: {}", stderr(&out));
    out
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path)
        .expect("csv opens")
        .records()
        .map(|r| r.expect("csv row"))
        .collect()
}

fn num(rec: &csv::StringRecord, i: usize) -> f64 {
    rec[i].parse().expect("numeric field")
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).expect("json file")).expect("valid json")
}

#[test]
fn validate_accepts_tiger() {
    let dir = TempDir::new().unwrap();
    let tiger = fixture("tiger.POMDP");
    let out = ok(dir.path(), &["validate", tiger.to_str().unwrap()]);
    assert!(stdout(&out).contains("5 states, 3 actions, 4 observations"));
    assert!(!stdout(&out).contains("FAIL"));
}

#[test]
fn validate_reports_line_of_truncated_file() {
    let dir = TempDir::new().unwrap();
    let text = fs::read_to_string(fixture("tiger.POMDP")).unwrap();
    let mut cut: Vec<&str> = text.lines().take(38).collect();
    cut.push("0 0.85");
    let path = dir.path().join("cut.POMDP");
    fs::write(&path, cut.join("\n")).unwrap();
    let out = run(dir.path(), &["validate", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 39"), "{}", stderr(&out));
}

#[test]
fn validate_names_the_slice_that_does_not_sum_to_one() {
    let dir = TempDir::new().unwrap();
    let text = fs::read_to_string(fixture("tiger.POMDP")).unwrap().replace(
        "T: listen : tiger-left-1 : tiger-left-2 1",
        "T: listen : tiger-left-1 : tiger-left-2 0.5",
    );
    let path = dir.path().join("bad.POMDP");
    fs::write(&path, text).unwrap();
    let out = run(dir.path(), &["validate", path.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("state tiger-left-1, action listen"));

    let out = run(dir.path(), &["validate", path.to_str().unwrap(), "--json"]);
    assert_eq!(code(&out), 1);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passed"], false);
    let failed: Vec<&Value> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"] == false)
        .collect();
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0]["check"], "transition_row_sums");
    assert_eq!(failed[0]["index"], serde_json::json!([0, 0]));
}

#[test]
fn missing_file_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.POMDP");
    assert_eq!(
        code(&run(dir.path(), &["validate", missing.to_str().unwrap()])),
        3
    );
    assert_eq!(
        code(&run(
            dir.path(),
            &["solve", "--file", missing.to_str().unwrap()]
        )),
        3
    );
}

#[test]
fn usage_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&run(dir.path(), &["bogus"])), 2);
    assert_eq!(
        code(&run(dir.path(), &["discrep", "--env", "no-such-env"])),
        2
    );
    assert_eq!(
        code(&run(
            dir.path(),
            &["discrep", "--env", "tiger", "--lambdas", "0,1.5"]
        )),
        2
    );
    assert_eq!(
        code(&run(
            dir.path(),
            &["sample-check", "--env", "tiger", "--episodes", "0"]
        )),
        2
    );
    assert_eq!(
        code(&run(
            dir.path(),
            &["sample-check", "--env", "tiger", "--horizon", "0"]
        )),
        2
    );
    assert_eq!(code(&bin().arg("--help").output().unwrap()), 0);
}

#[test]
fn solve_prints_tmaze_values() {
    let dir = TempDir::new().unwrap();
    let out = ok(dir.path(), &["solve", "--env", "tmaze", "--json"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let results = v["results"].as_array().unwrap();
    assert_eq!(results.len(), 2);
    let q = |k: usize, o: usize, a: usize| results[k]["q"][o][a].as_f64().unwrap();
    // Up at the junction ends the episode paying 4 or -0.1, each half the time.
    for k in 0..2 {
        assert!((q(k, 3, 0) - 1.95).abs() < 1e-9);
    }
    // The aliased corridor is where the two estimators disagree.
    assert!(q(1, 2, 2) - q(0, 2, 2) > 0.1);
}

fn discrep_values(dir: &Path, args: &[&str]) -> Vec<f64> {
    let mut full = vec!["discrep"];
    full.extend_from_slice(args);
    ok(dir, &full);
    csv_rows(&dir.join("discrep.csv"))
        .iter()
        .filter(|r| &r[0] == "policy")
        .map(|r| num(r, 2))
        .collect()
}

#[test]
fn discrep_is_zero_on_parity_for_random_policies() {
    let dir = TempDir::new().unwrap();
    let values = discrep_values(
        dir.path(),
        &[
            "--env",
            "parity",
            "--policies",
            "random:100:7",
            "--lambdas",
            "0,1",
        ],
    );
    assert_eq!(values.len(), 100);
    assert!(values.iter().all(|&v| v < 1e-8), "{values:?}");
}

#[test]
fn discrep_is_positive_on_tmaze() {
    let dir = TempDir::new().unwrap();
    let values = discrep_values(dir.path(), &["--env", "tmaze", "--policies", "random:20:1"]);
    assert_eq!(values.len(), 20);
    assert!(values.iter().all(|&v| v > 1e-6), "{values:?}");

    let rows = csv_rows(&dir.path().join("discrep.csv"));
    let min = rows.iter().find(|r| &r[0] == "min").unwrap();
    let max = rows.iter().find(|r| &r[0] == "max").unwrap();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(0.0, f64::max);
    assert_eq!(num(min, 2), lo);
    assert_eq!(num(max, 2), hi);
    let argmax: usize = max[1].parse().unwrap();
    assert_eq!(values[argmax], hi);
}

#[test]
fn discrep_between_equal_lambdas_is_zero() {
    let dir = TempDir::new().unwrap();
    let values = discrep_values(
        dir.path(),
        &[
            "--env",
            "tiger",
            "--policies",
            "random:10:2",
            "--lambdas",
            "0.4,0.4",
        ],
    );
    assert!(values.iter().all(|&v| v == 0.0), "{values:?}");
}

#[test]
fn sweep_po_starts_at_zero_and_grows() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["sweep-po", "--grid", "0:1:6"]);
    let rows = csv_rows(&dir.path().join("sweep-po.csv"));
    assert_eq!(rows.len(), 18);
    for pattern in ["corridor", "junction", "both"] {
        let curve: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| &r[0] == pattern)
            .map(|r| (num(r, 1), num(r, 2)))
            .collect();
        assert_eq!(curve.len(), 6);
        assert_eq!(curve[0].0, 0.0);
        assert!(curve[0].1 < 1e-10, "{pattern}: {curve:?}");
        assert!(curve[5].1 > 0.1, "{pattern}: {curve:?}");
        for w in curve.windows(2) {
            assert!(
                w[1].1 >= w[0].1 - 1e-12,
                "{pattern} not monotone: {curve:?}"
            );
        }
    }
}

#[test]
fn parity_sweep_breaks_symmetry_only_when_perturbed() {
    let dir = TempDir::new().unwrap();
    for perturbation in ["start-probs", "stay-action"] {
        ok(
            dir.path(),
            &[
                "parity-sweep",
                "--perturbation",
                perturbation,
                "--grid",
                "0,0.05",
            ],
        );
        let rows = csv_rows(&dir.path().join("parity-sweep.csv"));
        assert_eq!(rows.len(), 2);
        assert_eq!(&rows[0][0], perturbation);
        let max = |r: &csv::StringRecord| num(r, 5);
        assert!(max(&rows[0]) < 1e-8, "{perturbation}: {rows:?}");
        assert!(max(&rows[1]) > 1e-6, "{perturbation}: {rows:?}");
    }
}

#[test]
fn optimize_mem_writes_runs_and_summary() {
    let dir = TempDir::new().unwrap();
    ok(
        dir.path(),
        &[
            "optimize-mem",
            "--env",
            "parity",
            "--n-mem",
            "1,2",
            "--seeds",
            "0..2",
            "--memory-steps",
            "200",
            "--policy-steps",
            "50",
            "--pre-augment",
        ],
    );
    let rows = csv_rows(&dir.path().join("optimize-mem-summary.csv"));
    assert_eq!(rows.len(), 4);
    for r in &rows {
        let (n_mem, seed) = (&r[0], &r[1]);
        assert!(dir
            .path()
            .join(format!("optimize-mem/m{n_mem}-s{seed}.json"))
            .exists());
        let (initial, last) = (num(r, 3), num(r, 4));
        if n_mem == "1" {
            // One memory state has nothing to learn.
            assert!((initial - last).abs() < 1e-12 && initial < 1e-8);
        } else {
            assert!(last < initial, "{r:?}");
        }
    }
    let manifest = json(&dir.path().join("optimize-mem.manifest.json"));
    assert_eq!(manifest["seeds"], serde_json::json!([0, 1]));
}

#[test]
fn optimize_mem_rejects_the_max_norm() {
    let dir = TempDir::new().unwrap();
    let out = run(
        dir.path(),
        &[
            "optimize-mem",
            "--env",
            "tmaze",
            "--seeds",
            "0",
            "--norm",
            "occupancy_weighted_max",
        ],
    );
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn sample_check_on_block_mdp_is_consistent_with_zero() {
    let dir = TempDir::new().unwrap();
    ok(
        dir.path(),
        &[
            "sample-check",
            "--env",
            "block:6:2:3",
            "--episodes",
            "2000",
            "--horizon",
            "150",
            "--replicates",
            "40",
            "--seed",
            "1",
        ],
    );
    let report = json(&dir.path().join("sample-check.json"));
    assert_eq!(report["closed_form"].as_f64().unwrap(), 0.0);
    assert_eq!(report["consistent_with_zero"], true);
    assert_eq!(report["episodes"], 2000);
}

#[test]
fn manifest_hashes_match_outputs() {
    let dir = TempDir::new().unwrap();
    let tiger = fixture("tiger.POMDP");
    ok(
        dir.path(),
        &[
            "discrep",
            "--file",
            tiger.to_str().unwrap(),
            "--policies",
            "random:5:3",
        ],
    );
    let manifest = json(&dir.path().join("discrep.manifest.json"));
    assert_eq!(manifest["schema"], "pomdp-lambda/v1");
    assert_eq!(manifest["command"], "discrep");
    let hex = |bytes: &[u8]| {
        Sha256::digest(bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect::<String>()
    };

    let outputs = manifest["outputs"].as_array().unwrap();
    assert_eq!(outputs.len(), 1);
    assert_eq!(outputs[0]["file"], "discrep.csv");
    let written = fs::read(dir.path().join("discrep.csv")).unwrap();
    assert_eq!(outputs[0]["sha256"], hex(&written));

    let inputs = manifest["inputs"].as_array().unwrap();
    assert_eq!(inputs.len(), 1);
    assert_eq!(inputs[0]["sha256"], hex(&fs::read(&tiger).unwrap()));
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let args = ["sweep-po", "--grid", "0:1:4", "--threads", "3"];
    ok(a.path(), &args);
    ok(b.path(), &args[..3]);
    let read = |d: &TempDir, f: &str| fs::read(d.path().join(f)).unwrap();
    assert_eq!(read(&a, "sweep-po.csv"), read(&b, "sweep-po.csv"));

    let strip = |d: &TempDir| {
        let mut m = json(&d.path().join("sweep-po.manifest.json"));
        m.as_object_mut().unwrap().remove("created_unix");
        m
    };
    let (ma, mb) = (strip(&a), strip(&b));
    assert_eq!(ma["outputs"], mb["outputs"]);
}

#[test]
fn out_directory_comes_from_the_environment() {
    let dir = TempDir::new().unwrap();
    let target = dir.path().join("from-env");
    let out = bin()
        .env("POMDP_LAMBDA_OUT", &target)
        .args(["discrep", "--env", "tmaze", "--policies", "uniform"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(target.join("discrep.csv").exists());
    assert!(target.join("discrep.manifest.json").exists());
    assert!(!dir.path().join("pomdp-lambda-out").exists());
}
