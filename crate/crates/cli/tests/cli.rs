use std::path::PathBuf;
use std::process::{Command, Output};

fn noether(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_noether"))
        .args(args)
        .env_remove("NOETHER_FIXTURES")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("noether-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

/// Data rows of the first table in a machine document.
fn table_rows(doc: &str) -> usize {
    let v: serde_json::Value = serde_json::from_str(doc.lines().nth(1).unwrap()).unwrap();
    v["rows"].as_array().unwrap().len()
}

#[test]
fn derive_row_counts() {
    for (alg, n) in [("fixtures/boltzmann.alg", 7), ("fixtures/equivariant.alg", 5), ("fixtures/ffn.alg", 1), ("sort", 2), ("relational", 4)] {
        let o = noether(&["--format", "machine", "derive", alg]);
        assert!(o.status.success(), "{alg}");
        assert_eq!(table_rows(&stdout(&o)), n, "{alg}");
    }
}

#[test]
fn ffn_yields_single_stability_pattern() {
    let o = noether(&["derive", "ffn"]);
    assert!(stdout(&o).contains("m_stab"));
}

#[test]
fn machine_document_is_versioned_and_deterministic() {
    let a = noether(&["--format", "machine", "--seed", "3", "kill"]);
    let b = noether(&["--format", "machine", "--seed", "3", "kill"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(stdout(&a).lines().next().unwrap(), r#"{"report_version":1}"#);
}

#[test]
fn reproduce_default_is_green() {
    let o = noether(&["reproduce"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let out = stdout(&o);
    for id in 1..=11 {
        assert!(out.contains(&format!("PASS [{id}]")), "check {id} missing:\n{out}");
    }
    assert!(!out.contains("FAIL"));
}

#[test]
fn tampered_matrix_cell_fails_scaling_check() {
    let dir = scratch("tamper");
    let base = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures/reproduce.cfg")).unwrap();
    let path = dir.join("tampered.cfg");
    std::fs::write(&path, format!("{base}matrix MATH L_STAR breaks\n")).unwrap();
    let o = noether(&["reproduce", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("FAIL [5] scaling-blindness experiment"), "{out}");
    assert!(out.contains("scaling-breaking"));
    assert!(out.contains("PASS [1]"));
}

#[test]
fn missing_fixture_exits_two() {
    let o = noether(&["reproduce", "no/such/config.cfg"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no such file or fixture"));

    let o = noether(&["derive", "fixtures/absent.alg"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fixture_directory_from_environment() {
    let dir = scratch("env");
    let o = Command::new(env!("CARGO_BIN_EXE_noether"))
        .args(["derive", "sort"])
        .env("NOETHER_FIXTURES", &dir)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2), "empty directory has no sort.alg");
    std::fs::copy(concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures/sort.alg"), dir.join("sort.alg")).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_noether"))
        .args(["--format", "machine", "derive", "sort"])
        .env("NOETHER_FIXTURES", &dir)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(table_rows(&stdout(&o)), 2);
}

#[test]
fn usage_error_exits_two() {
    let o = noether(&["derive"]);
    assert_eq!(o.status.code(), Some(2));
    let o = noether(&["stats", "fisher", "3", "2", "0", "5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn check_mr_rejects_with_obstructions() {
    let o = noether(&["--format", "machine", "check-mr", "rho_mtc_bor", "--algebra", "boltzmann"]);
    assert!(o.status.success());
    let first: serde_json::Value = serde_json::from_str(stdout(&o).lines().nth(1).unwrap()).unwrap();
    assert_eq!(first["rows"][0][2], "false");
    assert_eq!(first["rows"][0][4], "O1,O4,O5");

    let o = noether(&["--format", "machine", "check-mr", "fixtures/mr/rho_adj.mr", "--algebra", "fixtures/boltzmann.alg"]);
    let first: serde_json::Value = serde_json::from_str(stdout(&o).lines().nth(1).unwrap()).unwrap();
    assert_eq!(first["rows"][0][3], "T_STAR");
}

#[test]
fn coverage_of_set_b() {
    let o = noether(&[
        "coverage", "--algebra", "equivariant", "b_idempotence", "b_noise", "b_label_flip", "b_interpolation", "b_confidence",
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("equivariant  1        5          0.20"), "{}", stdout(&o));
}

#[test]
fn stats_commands() {
    let out = stdout(&noether(&["stats", "mcnemar", "2", "0"]));
    assert!(out.contains("0.5000"));
    let out = stdout(&noether(&["stats", "fisher", "2", "5", "0", "5"]));
    assert!(out.contains("0.4444"));
    let out = stdout(&noether(&["stats", "kappa"]));
    assert!(out.contains("0.8571"));
}

#[test]
fn rel_faults_are_detected() {
    let out = stdout(&noether(&["--format", "machine", "rel", "--fault", "guardless"]));
    let t: serde_json::Value = serde_json::from_str(out.lines().nth(1).unwrap()).unwrap();
    let push = t["rows"].as_array().unwrap().iter().find(|r| r[0] == "select_push").unwrap();
    assert_ne!(push[2], "0");

    let out = stdout(&noether(&["--format", "machine", "rel"]));
    let t: serde_json::Value = serde_json::from_str(out.lines().nth(1).unwrap()).unwrap();
    assert!(t["rows"].as_array().unwrap().iter().all(|r| r[2] == "0"));
}

#[test]
fn out_flag_writes_file() {
    let dir = scratch("out");
    let p = dir.join("report.jsonl");
    let o = noether(&["--format", "machine", "--out", p.to_str().unwrap(), "mutate", "hypot"]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&p).unwrap();
    assert!(text.starts_with(r#"{"report_version":1}"#));
    assert!(text.contains("RETURN_VALS"));
}
