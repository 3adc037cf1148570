use assert_cmd::Command;
use predicates::prelude::*;

fn bin() -> Command {
    Command::cargo_bin("cylwalk").unwrap()
}

#[test]
fn identity_passes_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    bin()
        .args(["identity", "--N", "4", "--seed", "1"])
        .env("CYLWALK_OUTPUT_DIR", dir.path())
        .assert()
        .success()
        .stdout(predicate::str::contains("PASS"));
    let report = std::fs::read_to_string(dir.path().join("identity.json")).unwrap();
    assert!(report.contains("\"provenance\": \"exact\""));
}

#[test]
fn unknown_subcommand_is_64() {
    bin().arg("frobnicate").assert().code(64);
}

#[test]
fn missing_required_key_is_65_with_no_output() {
    let dir = tempfile::tempdir().unwrap();
    bin()
        .arg("identity")
        .env("CYLWALK_OUTPUT_DIR", dir.path())
        .assert()
        .code(65);
    assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none());
}

#[test]
fn config_file_supplies_keys_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.ini");
    std::fs::write(&cfg, "N = 10\ngamma = 0\nv = 0.3\nsteps = 8\n").unwrap();
    bin()
        .args(["ld-check", "--config"])
        .arg(&cfg)
        .args(["--v", "0.7"])
        .env("CYLWALK_OUTPUT_DIR", dir.path())
        .assert()
        .success();
    let report = std::fs::read_to_string(dir.path().join("ld_check.json")).unwrap();
    assert!(report.contains("\"v\": 0.7"), "flag should override config: {report}");
}

#[test]
fn degenerate_sprinkle_is_inconclusive() {
    let dir = tempfile::tempdir().unwrap();
    bin()
        .args(["sprinkle", "--N", "16", "--alpha", "0.05", "--v", "3.0", "--epsilon", "0.8"])
        .env("CYLWALK_OUTPUT_DIR", dir.path())
        .assert()
        .code(3);
}

#[test]
fn same_seed_gives_byte_identical_csv() {
    let run = |dir: &std::path::Path| {
        bin()
            .args(["tightness", "--n-list", "4", "--reps", "5", "--seed", "3"])
            .env("CYLWALK_OUTPUT_DIR", dir)
            .assert()
            .success();
        std::fs::read(dir.join("tightness.csv")).unwrap()
    };
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    assert_eq!(run(d1.path()), run(d2.path()));
}
