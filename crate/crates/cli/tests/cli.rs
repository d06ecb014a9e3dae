use std::path::Path;
use std::process::{Command, Output};

fn jlkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jlkit"))
        .args(args)
        .env_remove("JLKIT_THREADS")
        .output()
        .expect("spawn jlkit")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn field<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key))
        .unwrap_or_else(|| panic!("no line starting with {key:?} in\n{text}"))
        .trim()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

fn gen_instance(dir: &Path) {
    let o = jlkit(&[
        "gen",
        "--k",
        "2",
        "--sizes",
        "50,50",
        "--dim",
        "1000",
        "--gap",
        "1",
        "--seed",
        "7",
        "--out",
        &p(dir, "data.bin"),
        "--partition-out",
        &p(dir, "truth.csv"),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn dim_prints_sample_size_row() {
    let o = jlkit(&[
        "dim",
        "--m",
        "10",
        "--epsilon",
        "0.01",
        "--delta",
        "0.05",
        "--n",
        "500000",
        "--dg",
    ]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(field(&out, "n' explicit:"), "15226");
    // High-precision evaluation of the implicit condition lands here.
    assert_eq!(field(&out, "n' implicit:"), "14205");
    assert_eq!(field(&out, "ratio:"), "1.07");
    assert_eq!(field(&out, "dg n':"), "3879");
    assert_eq!(field(&out, "dg repetitions:"), "44");
}

#[test]
fn dim_config_line_goes_to_stderr_first() {
    let o = jlkit(&[
        "dim",
        "--m",
        "2000000",
        "--epsilon",
        "0.001",
        "--delta",
        "0.05",
        "--n",
        "500000",
    ]);
    assert!(o.status.success());
    let err = stderr(&o);
    assert!(
        err.starts_with("config: dim m=2000000 epsilon=0.001 delta=0.05 n=500000"),
        "{err}"
    );
    assert!(!stdout(&o).contains("config:"));
    assert_eq!(field(&stdout(&o), "n' explicit:"), "59389");
}

#[test]
fn dim_domain_corner_and_errors() {
    let o = jlkit(&["dim", "--m", "2", "--epsilon", "0.5", "--delta", "0.4999"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(field(&stdout(&o), "n' explicit:"), "45");

    for bad in [
        &["dim", "--m", "1", "--epsilon", "0.1", "--delta", "0.1"][..],
        &["dim", "--m", "10", "--epsilon", "1.5", "--delta", "0.1"],
        &["dim", "--m", "10", "--epsilon", "0.1", "--delta", "0.5"],
        &["dim", "--m", "10", "--epsilon", "0.1"],
        &["dim", "--m", "ten", "--epsilon", "0.1", "--delta", "0.1"],
    ] {
        assert_eq!(jlkit(bad).status.code(), Some(2), "{bad:?}");
    }
}

#[test]
fn reproduce_table3_and_fig_gap() {
    let o = jlkit(&["reproduce", "table3"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(
        lines.next(),
        Some("delta,n' explicit,n' implicit,explicit/implicit")
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 14);
    let last = rows.iter().find(|r| r.starts_with("0.01,")).unwrap();
    assert!(last.starts_with("0.01,1353858,"), "{last}");

    let o = jlkit(&["reproduce", "fig-gap"]);
    assert!(o.status.success());
    assert!(stdout(&o).lines().any(|l| l == "2,1,0.3333333333333333"));
}

#[test]
fn reproduce_table5_columns() {
    let o = jlkit(&["reproduce", "table5"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let header = out.lines().next().unwrap();
    assert!(
        header.contains("Gupta n'") && header.contains("Their Repetitions"),
        "{header}"
    );
    assert_eq!(out.lines().count(), 23);
    assert!(out.lines().nth(1).unwrap().starts_with("10,15226,"));
}

#[test]
fn reproduce_is_stable_and_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = jlkit(&["reproduce", "table2"]);
    let b = jlkit(&["reproduce", "table2"]);
    assert_eq!(a.stdout, b.stdout);
    let f = p(dir.path(), "t2.csv");
    assert!(jlkit(&["reproduce", "table2", "--out", &f])
        .status
        .success());
    assert_eq!(std::fs::read(&f).unwrap(), a.stdout);
}

#[test]
fn reproduce_unknown_id_is_validation_error() {
    let o = jlkit(&["reproduce", "table9"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("table9"));
}

#[test]
fn gen_project_verify_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    gen_instance(d);
    let o = jlkit(&[
        "project",
        "--auto-dim",
        "--epsilon",
        "0.1",
        "--delta",
        "0.2",
        "--input",
        &p(d, "data.bin"),
        "--out",
        &p(d, "projected.bin"),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let err = stderr(&o);
    assert!(
        err.contains("n_prime=530") && err.contains("seed=0"),
        "{err}"
    );
    assert!(d.join("projected.operator").exists());

    let o = jlkit(&[
        "verify",
        "--original",
        &p(d, "data.bin"),
        "--projected",
        &p(d, "projected.bin"),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(field(&out, "pairs:"), "4950");
    assert_eq!(field(&out, "success="), "true");
}

#[test]
fn project_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    gen_instance(d);
    for name in ["a.bin", "b.bin"] {
        let o = jlkit(&[
            "project",
            "--nprime",
            "60",
            "--seed",
            "3",
            "--input",
            &p(d, "data.bin"),
            "--out",
            &p(d, name),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(
        std::fs::read(d.join("a.bin")).unwrap(),
        std::fs::read(d.join("b.bin")).unwrap()
    );
}

#[test]
fn verify_rejects_mismatched_ids() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    gen_instance(d);
    let o = jlkit(&[
        "gen",
        "--k",
        "2",
        "--sizes",
        "30,30",
        "--dim",
        "1000",
        "--gap",
        "1",
        "--seed",
        "1",
        "--out",
        &p(d, "small.bin"),
        "--partition-out",
        &p(d, "small.csv"),
    ]);
    assert!(o.status.success());
    let o = jlkit(&[
        "project",
        "--nprime",
        "100",
        "--input",
        &p(d, "small.bin"),
        "--out",
        &p(d, "small_proj.bin"),
    ]);
    assert!(o.status.success());
    let o = jlkit(&[
        "verify",
        "--original",
        &p(d, "data.bin"),
        "--projected",
        &p(d, "small_proj.bin"),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("identifiers"));
}

#[test]
fn missing_input_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = jlkit(&[
        "verify",
        "--original",
        &p(dir.path(), "nope.bin"),
        "--projected",
        &p(dir.path(), "nope2.bin"),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn kmeans_compare_instance_reports_pass_rate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    gen_instance(d);
    let o = jlkit(&[
        "kmeans-compare",
        "--input",
        &p(d, "data.bin"),
        "--partition",
        &p(d, "truth.csv"),
        "--trials",
        "20",
        "--random-partitions",
        "20",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let line = out
        .lines()
        .find(|l| l.starts_with("cost sandwich:"))
        .unwrap();
    assert!(line.ends_with(" ok"), "{line}");
}

#[test]
fn gen_rejects_infeasible_spec() {
    let dir = tempfile::tempdir().unwrap();
    let o = jlkit(&[
        "gen",
        "--k",
        "2",
        "--sizes",
        "5,5,5",
        "--dim",
        "10",
        "--gap",
        "1",
        "--out",
        &p(dir.path(), "x.bin"),
        "--partition-out",
        &p(dir.path(), "x.csv"),
    ]);
    assert_eq!(o.status.code(), Some(2));
}
