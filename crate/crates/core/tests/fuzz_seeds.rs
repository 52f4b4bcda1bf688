//! Replays the checked-in fuzz corpus through the fuzz target checks.

use std::fs;
use std::path::PathBuf;

use bfma::backend::{serve, Handshake, MmaReply, MmaRequest, SimBackend};
use bfma::formats::{decode, encode, parse_hex, to_hex, FpFormat, RoundingMode, Value};
use bfma::inference::parse_reports;
use bfma::probes::parse_records;
use bfma::simulator::BlockFmaConfig;

fn fuzz_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz")
}

fn seeds(target: &str) -> Vec<Vec<u8>> {
    let dir = fuzz_dir().join("corpus").join(target);
    let mut out: Vec<Vec<u8>> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| fs::read(e.unwrap().path()).unwrap())
        .collect();
    assert!(!out.is_empty(), "no seeds for {target}");
    out.sort();
    out
}

fn utf8(data: &[u8]) -> Option<&str> {
    std::str::from_utf8(data).ok()
}

fn pick(sel: u8) -> FpFormat {
    let formats = FpFormat::builtin();
    formats[sel as usize % formats.len()].clone()
}

#[test]
fn every_target_has_a_corpus() {
    let manifest = fs::read_to_string(fuzz_dir().join("Cargo.toml")).unwrap();
    let names: Vec<&str> = manifest
        .lines()
        .filter_map(|l| l.strip_prefix("name = \""))
        .filter_map(|l| l.strip_suffix('"'))
        .filter(|n| *n != "bfma-fuzz")
        .collect();
    assert_eq!(names.len(), 9);
    for n in names {
        assert!(fuzz_dir().join("fuzz_targets").join(format!("{n}.rs")).exists());
        seeds(n);
    }
}

#[test]
fn decode_bits() {
    for data in seeds("decode_bits") {
        let fmt = pick(data[0]);
        let bits = u64::from_le_bytes(data[1..9].try_into().unwrap());
        let bits = if fmt.storage_bits == 64 { bits } else { bits & ((1u64 << fmt.storage_bits) - 1) };
        let v = decode(bits, &fmt);
        if let Value::Special(_) = v {
            continue;
        }
        let (back, flags) = encode(&v, &fmt, RoundingMode::Rne);
        assert!(!flags.inexact);
        assert_eq!(decode(back, &fmt), v);
    }
}

#[test]
fn parse_hex_seeds() {
    let mut accepted = 0;
    for data in seeds("parse_hex") {
        let fmt = pick(data[0]);
        let Some(text) = utf8(&data[1..]) else { continue };
        if let Ok(bits) = parse_hex(text, &fmt) {
            accepted += 1;
            assert_eq!(parse_hex(&to_hex(bits, &fmt), &fmt).unwrap(), bits);
        }
    }
    assert!(accepted >= 3);
}

macro_rules! line_round_trip {
    ($name:ident, $target:literal, $ty:ty) => {
        #[test]
        fn $name() {
            let mut parsed = 0;
            for data in seeds($target) {
                let Some(line) = utf8(&data) else { continue };
                if let Ok(v) = <$ty>::parse(line) {
                    parsed += 1;
                    let again = v.to_line();
                    assert_eq!(<$ty>::parse(&again).unwrap().to_line(), again);
                }
            }
            assert!(parsed > 0);
        }
    };
}

line_round_trip!(protocol_request, "protocol_request", MmaRequest);
line_round_trip!(protocol_reply, "protocol_reply", MmaReply);
line_round_trip!(handshake, "handshake", Handshake);

#[test]
fn config_parse() {
    let mut parsed = 0;
    for data in seeds("config_parse") {
        let Some(text) = utf8(&data) else { continue };
        if let Ok(cfg) = BlockFmaConfig::from_text(text) {
            parsed += 1;
            assert_eq!(BlockFmaConfig::from_text(&cfg.to_text()).unwrap(), cfg);
        }
    }
    assert_eq!(parsed, 4);
}

#[test]
fn report_parse() {
    for data in seeds("report_parse") {
        let reports = parse_reports(utf8(&data).unwrap()).unwrap();
        let again: String = reports.iter().map(|r| r.to_line() + "\n").collect();
        assert_eq!(again.as_bytes(), &data[..]);
    }
}

#[test]
fn vector_records() {
    for data in seeds("vector_records") {
        let records = parse_records(utf8(&data).unwrap()).unwrap();
        let again: String = records.iter().map(|r| r.to_line() + "\n").collect();
        assert_eq!(again.as_bytes(), &data[..]);
    }
}

#[test]
fn serve_session() {
    for data in seeds("serve_session") {
        let mut backend = SimBackend::new(BlockFmaConfig::default()).unwrap();
        let mut out = Vec::new();
        serve(&mut backend, &data[..], &mut out).unwrap();
        let replies = String::from_utf8(out).unwrap();
        let requests = utf8(&data).unwrap().lines().filter(|l| !l.trim().is_empty()).count();
        assert_eq!(replies.lines().count(), requests + 1);
    }
}
