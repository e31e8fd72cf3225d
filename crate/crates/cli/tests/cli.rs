use std::path::{Path, PathBuf};
use std::process::Command;

use pars_reduce::catalog;
use pars_reduce::io;
use pars_reduce::psys::ParamStateSpace;
use pars_reduce_cli::{parse_gamma, reduced_model_path, RunReport};

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn model(name: &str) -> PathBuf {
    crate_dir().join("models").join(name)
}

fn config(name: &str) -> PathBuf {
    crate_dir().join("configs").join(name)
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_pars-reduce"));
    c.env("PARS_REDUCE_THREADS", "2");
    c
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = bin().args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn shipped() -> Vec<(&'static str, ParamStateSpace)> {
    vec![
        ("illustrative.json", catalog::illustrative_discrete()),
        ("illustrative_gramian_n2.json", catalog::illustrative_gramian_n2()),
        ("illustrative_gramian_n1.json", catalog::illustrative_gramian_n1()),
        ("illustrative_sos_n2.json", catalog::illustrative_sos_n2()),
        ("illustrative_sos_n1.json", catalog::illustrative_sos_n1()),
        ("power_network.json", catalog::power_network()),
        ("power_network_published.json", catalog::power_network_published()),
    ]
}

/// Set `PARS_REDUCE_REGENERATE=1` to rewrite the files.
#[test]
fn shipped_models_match_catalog() {
    let regen = std::env::var_os("PARS_REDUCE_REGENERATE").is_some();
    for (name, g) in shipped() {
        let text = io::model_json(&g) + "\n";
        if regen {
            std::fs::write(model(name), &text).unwrap();
        }
        assert_eq!(std::fs::read_to_string(model(name)).unwrap(), text, "{name}");
    }
}

#[test]
fn gamma_flag_parses() {
    assert!(parse_gamma("0:1").is_ok());
    assert!(parse_gamma("0.1:0.4:0.01").is_ok());
    assert!(parse_gamma("0.1").is_err());
    assert!(parse_gamma("a:b").is_err());
}

#[test]
fn validate_self_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("table.json");
    let m = model("illustrative.json");
    let (code, stdout, _) = run(&["validate", "--model", p(&m), "--against", p(&m), "--grid", "5", "--out", p(&out)]);
    assert_eq!(code, 0);
    assert!(stdout.contains("maxError 0.000000000"), "{stdout}");
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(v["table"].as_array().unwrap().len(), 25);
}

#[test]
fn validate_published_models() {
    let cases = [
        ("power_network.json", "power_network_published.json", 0.15, 0.03),
        ("illustrative.json", "illustrative_gramian_n1.json", 0.27, 0.02),
        ("illustrative.json", "illustrative_gramian_n2.json", 0.14, 0.02),
    ];
    for (a, b, want, tol) in cases {
        let (code, stdout, stderr) = run(&["validate", "--model", p(&model(a)), "--against", p(&model(b))]);
        assert_eq!(code, 0, "{stderr}");
        let v: f64 = stdout.split_whitespace().nth(1).unwrap().parse().unwrap();
        assert!((v - want).abs() <= tol, "{a} vs {b}: {v}");
    }
}

#[test]
fn malformed_inputs_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"timeDomain\": \"discrete\",\n  \"dims\": {\"n\": 2,}\n}").unwrap();
    let out = dir.path().join("r.json");
    let (code, _, stderr) =
        run(&["reduce", "--model", p(&bad), "--config", p(&config("illustrative_n2.json")), "--out", p(&out)]);
    assert_eq!(code, 1);
    assert!(stderr.contains("line 3"), "{stderr}");

    let mut v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(model("illustrative.json")).unwrap()).unwrap();
    v["extra"] = 1.into();
    std::fs::write(&bad, v.to_string()).unwrap();
    let (code, _, stderr) = run(&["validate", "--model", p(&bad), "--against", p(&bad)]);
    assert_eq!(code, 1);
    assert!(stderr.contains("unknown field"), "{stderr}");

    let (code, _, _) = run(&["validate", "--model", p(&dir.path().join("missing.json")), "--against", p(&bad)]);
    assert_eq!(code, 1);
}

#[test]
fn baseline_drop_second_channel() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.json");
    let m = model("illustrative.json");
    let (code, stdout, stderr) = run(&["baseline", "--model", p(&m), "--keep", "2,1,0", "--out", p(&out)]);
    assert_eq!(code, 0, "{stdout}{stderr}");
    let report: RunReport = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let b = report.baseline.as_ref().unwrap();
    assert!((b.bound - 0.62).abs() <= 0.05, "{}", b.bound);
    assert!((report.sampled_error.max_error - 0.14).abs() <= 0.02);
    assert!(report.sampled_error.max_error <= b.bound + 1e-6);
    let g = io::read_model(&m).unwrap();
    assert!((report.revalidate(&g).unwrap() - report.sampled_error.max_error).abs() <= 1e-9);
    // the sibling model file parses and matches the embedded one
    let sib = io::read_model(&reduced_model_path(&out)).unwrap();
    assert_eq!(io::ModelFile::from_system(&sib), report.reduced_model);
}

#[test]
fn baseline_keep_all_and_n1() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.json");
    let m = model("illustrative.json");
    let (code, _, stderr) = run(&["baseline", "--model", p(&m), "--n-prime", "2", "--p-prime", "2", "--out", p(&out)]);
    assert_eq!(code, 0, "{stderr}");
    let report: RunReport = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(report.sampled_error.max_error <= 1e-6);

    let (code, _, stderr) = run(&["baseline", "--model", p(&m), "--n-prime", "1", "--p-prime", "1", "--out", p(&out)]);
    assert_eq!(code, 0, "{stderr}");
    let report: RunReport = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!((report.sampled_error.max_error - 0.27).abs() <= 0.02);
}

#[test]
fn baseline_rejects_continuous_time() {
    let dir = tempfile::tempdir().unwrap();
    let mut g = catalog::illustrative_discrete();
    g.time_domain = pars_reduce::psys::TimeDomain::Continuous;
    let m = dir.path().join("c.json");
    std::fs::write(&m, io::model_json(&g)).unwrap();
    let (code, _, stderr) = run(&["baseline", "--model", p(&m), "--keep", "2,1,0", "--out", p(&dir.path().join("o"))]);
    assert_eq!(code, 1);
    assert!(stderr.contains("baseline requires discrete time"), "{stderr}");
}

#[test]
fn reduce_identity_reaches_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let sdpa = dir.path().join("first.dat-s");
    let m = model("illustrative.json");
    let (code, stdout, stderr) = run(&[
        "reduce",
        "--model",
        p(&m),
        "--config",
        p(&config("illustrative_identity.json")),
        "--out",
        p(&out),
        "--grid",
        "11",
        "--dump-sdp",
        p(&sdpa),
    ]);
    assert!(code == 0 || code == 2, "{stdout}{stderr}");
    let report: RunReport = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let gamma = report.certified_gamma.unwrap();
    assert!(gamma <= 0.005 + 1e-9, "{gamma}");
    assert!(report.sampled_error.max_error <= gamma + 1e-6);
    let g = io::read_model(&m).unwrap();
    assert!((report.revalidate(&g).unwrap() - report.sampled_error.max_error).abs() <= 1e-9);
    let dumped = pars_reduce::sdp::sdpa::read(&std::fs::read_to_string(sdpa).unwrap()).unwrap();
    assert!(!dumped.equalities.is_empty());
}

#[test]
fn json_log_lines_are_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let m = model("illustrative.json");
    let output = bin()
        .env("RUST_LOG", "info")
        .args([
            "--json-log",
            "reduce",
            "--model",
            p(&m),
            "--config",
            p(&config("illustrative_identity.json")),
            "--out",
            p(&out),
            "--grid",
            "5",
        ])
        .output()
        .unwrap();
    let stderr = String::from_utf8_lossy(&output.stderr);
    let lines: Vec<&str> = stderr.lines().filter(|l| !l.trim().is_empty()).collect();
    assert!(!lines.is_empty());
    for l in lines {
        let v: serde_json::Value = serde_json::from_str(l).unwrap_or_else(|e| panic!("{l}: {e}"));
        assert!(v["level"].is_string());
    }
}
