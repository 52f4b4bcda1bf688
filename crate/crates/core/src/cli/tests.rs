use super::*;
use crate::probes::parse_records;

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(std::iter::once("bfma").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn eval_known_example() {
    let sim = "sim:volta_like.cfg";
    let base = ["eval", "--backend", sim, "--in", "binary16", "--out", "binary32"];
    let (code, out, _) = call(&[&base[..], &["--c", "40000000", "--a", "3a00", "--b", "0004"]].concat());
    assert_eq!((code, out.as_str()), (0, "40000000\n"));
    let (code, out, _) = call(&[&base[..], &["--c", "c0000000", "--a", "ba00", "--b", "0004"]].concat());
    assert_eq!((code, out.as_str()), (0, "c0000000\n"));
    let (code, out, _) = call(&[&base[..], &["--c", "00000000"]].concat());
    assert_eq!((code, out.as_str()), (0, "00000000\n"));
    let (code, _, err) = call(&[&base[..], &["--c", "0", "--a", "3c00,3c00", "--b", "3c00"]].concat());
    assert_eq!(code, EXIT_USAGE, "{err}");
}

#[test]
fn usage_errors() {
    let (code, _, _) = call(&["probe", "--backend", "sim:ampere.cfg", "--in", "binary8", "--out", "binary32"]);
    assert_eq!(code, EXIT_USAGE);
    let (code, _, _) = call(&["probe", "--backend", "gpu:0", "--in", "binary16", "--out", "binary32"]);
    assert_eq!(code, EXIT_USAGE);
    let (code, _, _) = call(&["frobnicate"]);
    assert_eq!(code, EXIT_USAGE);
    let (code, _, _) = call(&["gen-vectors", "--in", "binary16", "--out", "binary32", "--probe", "nope"]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn probe_table() {
    let (code, out, _) = call(&[
        "probe", "--backend", "sim:ampere.cfg", "--in", "binary16,bfloat16", "--out", "binary32",
    ]);
    assert_eq!(code, EXIT_OK);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("binary16"));
    assert!(lines[2].contains("≥3"));
}

#[test]
fn gen_vectors_width_pair() {
    let (code, out, _) = call(&["gen-vectors", "--probe", "algorithm1", "--in", "binary16", "--out", "binary32"]);
    assert_eq!(code, EXIT_OK);
    let recs = parse_records(&out).unwrap();
    let first = &recs[0];
    assert_eq!(first.vectors.len(), 2);
    assert_eq!(first.vectors[0].a, ["3c00", "1000"]);
    assert_eq!(first.vectors[0].c, "3f800001");
    assert_eq!(first.vectors[1].c, "bf800001");
}

#[test]
fn gen_vectors_dependencies() {
    let (code, _, err) = call(&["gen-vectors", "--probe", "rm_mbfma", "--in", "binary16", "--out", "binary32"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("--fma-width"));
    let (code, out, err) = call(&["gen-vectors", "--in", "binary16", "--out", "binary32"]);
    assert_eq!(code, EXIT_OK);
    assert!(err.contains("skipped ordering"));
    let recs = parse_records(&out).unwrap();
    assert_eq!(recs[0].probe, ProbeKind::SubnormalIn);
    let (code, out, _) = call(&[
        "gen-vectors", "--in", "binary16", "--out", "binary32", "--fma-width", "8",
    ]);
    assert_eq!(code, EXIT_OK);
    let recs = parse_records(&out).unwrap();
    assert_eq!(recs.last().unwrap().probe, ProbeKind::RmMbfma);
}
