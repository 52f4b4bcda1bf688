use super::*;
use crate::backend::SimBackend;
use crate::formats::RoundingMode;
use crate::probes::RoundingVerdict;
use crate::simulator::{BlockFmaConfig, NormPolicy};

fn infer(cfg: BlockFmaConfig, fin: FpFormat) -> FeatureReport {
    let mut s = Session::new(Box::new(SimBackend::new(cfg).unwrap()));
    infer_features(&mut s, &fin, &FpFormat::binary32(), &InferenceOptions::default()).unwrap()
}

fn ampere() -> BlockFmaConfig {
    BlockFmaConfig {
        fma_width: 8,
        n_eab: 1,
        n_ecb: 3,
        ..Default::default()
    }
}

#[test]
fn ampere_like_row() {
    let r = infer(ampere(), FpFormat::binary16());
    assert!(r.complete);
    let row = table_row(&r);
    assert_eq!(
        &row[2..10],
        &["✓", "✓", "1", "≥3", "✗", "8", "Truncate", "Truncate"]
    );
    assert_eq!(r.ordering, VerdictValue::Ordering(BlockOrdering::CFirst));
    assert_eq!(r.rm_post_alignment, VerdictValue::Rounding(RoundingVerdict::Truncate));
}

#[test]
fn no_alignment_bits_width_four() {
    let r = infer(
        BlockFmaConfig {
            fma_width: 4,
            n_eab: 0,
            n_ecb: 2,
            rm_intra: RoundingMode::Rne,
            rm_inter: RoundingMode::Rne,
            ..Default::default()
        },
        FpFormat::binary16(),
    );
    assert_eq!(r.fma_width, VerdictValue::Int(4));
    assert_eq!(r.n_eab, VerdictValue::Int(0));
    assert_eq!(r.rm_bfma, VerdictValue::Rounding(RoundingVerdict::Rne));
    assert_eq!(r.rm_mbfma, VerdictValue::Rounding(RoundingVerdict::Rne));
}

#[test]
fn immediate_unit() {
    let r = infer(
        BlockFmaConfig {
            norm_policy: NormPolicy::Immediate,
            n_ecb: 0,
            rm_intra: RoundingMode::Ru,
            ..Default::default()
        },
        FpFormat::bfloat16(),
    );
    assert_eq!(r.immediate_norm, VerdictValue::Bool(true));
    assert_eq!(r.n_ecb, VerdictValue::Int(0));
    assert_eq!(r.fma_width, VerdictValue::Int(1));
    assert_eq!(r.rm_mbfma, VerdictValue::Rounding(RoundingVerdict::Ru));
}

#[test]
fn unsupported_pair() {
    let mut s = Session::new(Box::new(SimBackend::new(ampere()).unwrap()));
    let opts = InferenceOptions::default();
    let err = infer_features(&mut s, &FpFormat::binary32(), &FpFormat::binary16(), &opts);
    assert!(err.is_err());
}

#[test]
fn rendering() {
    let empty = render_report(&[], ReportStyle::Table);
    assert_eq!(empty.lines().count(), 1);
    assert!(empty.starts_with("Input | Output | Subnormal in"));
    assert_eq!(render_report(&[], ReportStyle::Structured), "");
    let r = infer(ampere(), FpFormat::tf32());
    let text = render_report(&[r.clone(), r.clone()], ReportStyle::Structured);
    assert_eq!(parse_reports(&text).unwrap(), vec![r.clone(), r.clone()]);
    let table = render_report(&[r], ReportStyle::Table);
    assert_eq!(table.lines().count(), 2);
    assert!(parse_reports("{\"schema\":\"x\"}").is_err());
}

#[test]
fn deterministic() {
    let a = infer(ampere(), FpFormat::binary16());
    let b = infer(ampere(), FpFormat::binary16());
    assert_eq!(a.to_line(), b.to_line());
}
