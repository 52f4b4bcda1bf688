use std::process::{Command, Output};

use bfma::inference::parse_reports;

fn bfma(args: &[&str], backend_env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bfma"));
    cmd.args(args).env_remove("BFMA_BACKEND");
    if let Some(b) = backend_env {
        cmd.env("BFMA_BACKEND", b);
    }
    cmd.output().unwrap()
}

fn text(b: &[u8]) -> String {
    String::from_utf8(b.to_vec()).unwrap()
}

#[test]
fn backend_from_environment() {
    let args = ["probe", "--in", "binary16", "--out", "binary32", "--report", "structured"];
    let out = bfma(&args, Some("sim:ampere.cfg"));
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let reports = parse_reports(&text(&out.stdout)).unwrap();
    assert_eq!(reports.len(), 1);
    assert!(reports[0].complete);

    let missing = bfma(&args, None);
    assert_eq!(missing.status.code(), Some(64));
    assert!(text(&missing.stderr).contains("BFMA_BACKEND"));
    assert!(missing.stdout.is_empty());
}

#[test]
fn identical_runs_are_byte_identical() {
    let args = ["probe", "--backend", "sim:volta_like.cfg", "--in", "binary16,bfloat16", "--out", "binary32"];
    let (a, b) = (bfma(&args, None), bfma(&args, None));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn dead_backend_is_partial() {
    let script = r#"exec:echo '{"proto":1,"pairs":[["binary16","binary32"]],"kmax":16}'"#;
    let out = bfma(&["probe", "--backend", script, "--in", "binary16", "--out", "binary32"], None);
    assert_eq!(out.status.code(), Some(2), "{}", text(&out.stderr));
}

#[test]
fn unknown_format_is_usage_error() {
    let out = bfma(&["probe", "--backend", "sim:ampere.cfg", "--in", "binary8", "--out", "binary32"], None);
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn unsupported_pair_is_an_error() {
    let script = r#"exec:echo '{"proto":1,"pairs":[["bfloat16","binary32"]],"kmax":16}'"#;
    let out = bfma(&["probe", "--backend", script, "--in", "binary16", "--out", "binary32"], None);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn selftest_on_a_stride_of_the_grid() {
    let out = bfma(&["selftest", "--stride", "97"], None);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stdout));
    assert!(text(&out.stdout).contains("0 failures"));
}

#[test]
fn serve_answers_on_stdio() {
    use std::io::Write;
    let mut child = Command::new(env!("CARGO_BIN_EXE_bfma"))
        .args(["serve", "--config", "volta_like.cfg", "--set", "n_eab=1"])
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    let req = r#"{"id":7,"fin":"binary16","fout":"binary32","k":1,"a":["3c00"],"b":["3c00"],"c":"3f800000"}"#;
    writeln!(child.stdin.take().unwrap(), "{req}").unwrap();
    let out = text(&child.wait_with_output().unwrap().stdout);
    let mut lines = out.lines();
    assert!(lines.next().unwrap().contains("\"proto\""));
    let reply = lines.next().unwrap();
    assert!(reply.contains("\"id\":7") && reply.contains("40000000"), "{reply}");
}

#[test]
fn bad_set_is_usage_error() {
    let out = bfma(&["serve", "--set", "fma_width"], None);
    assert_eq!(out.status.code(), Some(64));
    let out = bfma(&["serve", "--set", "colour=blue"], None);
    assert_eq!(out.status.code(), Some(64));
}
