use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/synthetic").join(name)
}

fn vulnidx(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vulnidx"))
        .args(args)
        .arg("--output-dir")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn input_args() -> Vec<String> {
    let mut v = Vec::new();
    for (flag, file) in [
        ("--values", "values.csv"),
        ("--regions", "regions.csv"),
        ("--variables", "variables.csv"),
        ("--adjacency", "adjacency.csv"),
    ] {
        v.push(flag.to_string());
        v.push(fixture(file).display().to_string());
    }
    v
}

fn with_inputs<'a>(cmd: &'a str, extra: &'a [&'a str], inputs: &'a [String]) -> Vec<&'a str> {
    let mut a = vec![cmd];
    a.extend(inputs.iter().map(String::as_str));
    a.extend_from_slice(extra);
    a
}

fn dir_hashes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn run_succeeds_and_is_reproducible() {
    let inputs = input_args();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = with_inputs("run", &["--k", "4", "--restarts", "5"], &inputs);
    let o = vulnidx(&args, a.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut args_b = args.clone();
    args_b.extend(["--threads", "3"]);
    assert!(vulnidx(&args_b, b.path()).status.success());
    for name in ["selection_report.json", "pca_model.json", "scores.csv", "assignments.csv", "stability.json", "profile.json", "manifest.json"] {
        assert!(a.path().join(name).is_file(), "{name}");
    }
    assert_eq!(dir_hashes(a.path()), dir_hashes(b.path()));
}

#[test]
fn steps_in_order_and_out_of_order() {
    let inputs = input_args();
    let out = tempfile::tempdir().unwrap();
    let o = vulnidx(&with_inputs("pca", &[], &inputs), out.path());
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("pca") && err.contains("selected_values.csv"), "{err}");

    assert!(vulnidx(&with_inputs("ingest", &[], &inputs), out.path()).status.success());
    assert!(vulnidx(&with_inputs("select", &[], &inputs), out.path()).status.success());
    assert!(out.path().join("selection_report.json").is_file());
    assert!(vulnidx(&with_inputs("pca", &[], &inputs), out.path()).status.success());

    let o = vulnidx(&with_inputs("stability", &["--k", "3", "--seeds", "123"], &inputs), out.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("at least 2 seeds"));

    let o = vulnidx(&with_inputs("cluster", &["--k", "3"], &inputs), out.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn config_file_with_flag_override() {
    let out = tempfile::tempdir().unwrap();
    let cfg = out.path().join("config.json");
    let json = serde_like(&[
        ("values", fixture("values.csv")),
        ("regions", fixture("regions.csv")),
        ("variables", fixture("variables.csv")),
    ]);
    std::fs::write(&cfg, json).unwrap();
    let o = vulnidx(
        &["run", "--config", cfg.to_str().unwrap(), "--k", "2", "--restarts", "3", "--seeds", "1,2"],
        &out.path().join("run"),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = std::fs::read_to_string(out.path().join("run/manifest.json")).unwrap();
    assert!(manifest.contains("\"chosen_k\": 2"));
    assert!(!manifest.contains("suggested_k"));
}

fn serde_like(fields: &[(&str, PathBuf)]) -> String {
    let body: Vec<String> = fields
        .iter()
        .map(|(k, v)| format!("\"{k}\": \"{}\"", v.display()))
        .collect();
    format!("{{{}}}", body.join(", "))
}

#[test]
fn bad_arguments_fail() {
    let inputs = input_args();
    let out = tempfile::tempdir().unwrap();
    assert!(!vulnidx(&["run"], out.path()).status.success());
    assert!(!vulnidx(&with_inputs("run", &["--corr-threshold", "-1"], &inputs), out.path()).status.success());
    assert!(!vulnidx(&with_inputs("run", &["--retention", "cumulative-variance"], &inputs), out.path()).status.success());
    let o = Command::new(env!("CARGO_BIN_EXE_vulnidx")).arg("run").output().unwrap();
    assert!(!o.status.success());
}
