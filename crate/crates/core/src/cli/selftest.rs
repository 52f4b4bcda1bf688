//! Round trip of the inference driver over the simulator family.

use std::sync::Mutex;
use std::thread;

use crate::backend::{Session, SimBackend};
use crate::formats::{FpFormat, RoundingMode};
use crate::inference::{infer_features, table_row, FeatureReport, InferenceOptions};
use crate::probes::{RoundingVerdict, VerdictValue};
use crate::simulator::{carry_bits_for, BlockFmaConfig, BlockOrdering, NormPolicy};

pub const PRESETS: [(&str, &str); 4] = [
    ("ampere.cfg", include_str!("../../../../presets/ampere.cfg")),
    ("tf32_ampere.cfg", include_str!("../../../../presets/tf32_ampere.cfg")),
    ("volta_like.cfg", include_str!("../../../../presets/volta_like.cfg")),
    (
        "ampere_binary16_out.cfg",
        include_str!("../../../../presets/ampere_binary16_out.cfg"),
    ),
];

pub fn preset(name: &str) -> Option<BlockFmaConfig> {
    let (_, text) = PRESETS.iter().find(|(n, _)| *n == name)?;
    Some(BlockFmaConfig::from_text(text).expect("shipped presets parse"))
}

#[derive(Debug, Clone)]
pub struct Case {
    pub cfg: BlockFmaConfig,
    pub fin: FpFormat,
    pub fout: FpFormat,
}

const MODES: [RoundingMode; 4] = [
    RoundingMode::TruncateMagnitude,
    RoundingMode::Rne,
    RoundingMode::Ru,
    RoundingMode::Rd,
];

/// Every hardware-consistent unit of the round-trip grid, binary32 output.
pub fn grid() -> Vec<Case> {
    let mut out = Vec::new();
    for fin in [FpFormat::binary16(), FpFormat::bfloat16(), FpFormat::tf32()] {
        for n in [1usize, 2, 3, 4, 8, 16] {
            for n_eab in 0..=2 {
                for norm_policy in [NormPolicy::Immediate, NormPolicy::Deferred] {
                    for rm_intra in MODES {
                        for rm_inter in MODES {
                            for ordering in BlockOrdering::ALL {
                                let cfg = BlockFmaConfig {
                                    fma_width: n,
                                    n_eab,
                                    n_ecb: carry_bits_for(n, fin.precision),
                                    norm_policy,
                                    rm_intra,
                                    rm_inter,
                                    ordering,
                                    ..Default::default()
                                };
                                if cfg.is_hardware_consistent(fin.precision) {
                                    out.push(Case {
                                        cfg,
                                        fin: fin.clone(),
                                        fout: FpFormat::binary32(),
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Feature values a unit exhibits through the probes. A unit that rounds
/// after every addition behaves as width one; when its blocks are wider the
/// probes never leave the first block, so it reads as ordering `CFirst`
/// with a single rounding mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expected {
    pub fma_width: VerdictValue,
    pub n_ecb: VerdictValue,
    pub n_eab: VerdictValue,
    pub immediate_norm: VerdictValue,
    pub rm_bfma: VerdictValue,
    pub rm_mbfma: VerdictValue,
    pub rm_post_alignment: VerdictValue,
    pub ordering: VerdictValue,
    /// Whether the driver must reach a determinate verdict on every field.
    pub deferred: bool,
}

pub fn expected(case: &Case) -> Expected {
    let cfg = &case.cfg;
    let immediate = cfg.norm_policy == NormPolicy::Immediate;
    let width_one = immediate || cfg.fma_width == 1;
    let n = if width_one { 1 } else { cfg.fma_width };
    let folded = immediate && cfg.fma_width > 1;
    let rm = |m| VerdictValue::Rounding(RoundingVerdict::of(m));
    let n_eab = if width_one {
        VerdictValue::AtLeast(0)
    } else if (cfg.n_eab as usize) < n - 1 {
        VerdictValue::Int(cfg.n_eab)
    } else {
        VerdictValue::AtLeast(n as u32 - 1)
    };
    Expected {
        fma_width: VerdictValue::Int(n as u32),
        n_ecb: if width_one {
            VerdictValue::Int(0)
        } else {
            VerdictValue::AtLeast(cfg.n_ecb)
        },
        n_eab,
        immediate_norm: VerdictValue::Bool(width_one),
        rm_bfma: rm(cfg.rm_intra),
        rm_mbfma: rm(if folded { cfg.rm_intra } else { cfg.rm_inter }),
        rm_post_alignment: rm(cfg.alignment_policy.as_rounding()),
        ordering: VerdictValue::Ordering(if folded {
            BlockOrdering::CFirst
        } else {
            cfg.ordering
        }),
        deferred: !immediate,
    }
}

/// Fields that disagree with the expectation. Undetermined is accepted only
/// where a probe precondition fails.
pub fn check(case: &Case, r: &FeatureReport) -> Vec<String> {
    let e = expected(case);
    let n = case.cfg.fma_width;
    let mut bad = Vec::new();
    let mut field = |name: &str, got: &VerdictValue, want: &VerdictValue, required: bool| {
        if got.is_determinate() {
            if got != want {
                bad.push(format!("{name}: got {got}, expected {want}"));
            }
        } else if required {
            bad.push(format!("{name}: undetermined, expected {want}"));
        }
    };
    field("fma_width", &r.fma_width, &e.fma_width, true);
    field("n_ecb", &r.n_ecb, &e.n_ecb, true);
    field("n_eab", &r.n_eab, &e.n_eab, true);
    field("immediate_norm", &r.immediate_norm, &e.immediate_norm, true);
    field("rm_bfma", &r.rm_bfma, &e.rm_bfma, e.deferred && n >= 3);
    field("rm_mbfma", &r.rm_mbfma, &e.rm_mbfma, e.deferred);
    field(
        "rm_post_alignment",
        &r.rm_post_alignment,
        &e.rm_post_alignment,
        e.deferred && n >= 2 && case.cfg.n_eab <= 1 && (case.cfg.n_eab as usize) < n - 1,
    );
    field("ordering", &r.ordering, &e.ordering, e.deferred);
    if !r.complete {
        bad.push("report incomplete".into());
    }
    bad
}

pub fn infer_case(case: &Case) -> FeatureReport {
    let backend = SimBackend::new(case.cfg.clone()).expect("grid configs validate");
    let mut s = Session::new(Box::new(backend));
    infer_features(&mut s, &case.fin, &case.fout, &InferenceOptions::default())
        .expect("simulator supports every grid pair")
}

/// Run `f` over `items` on all cores, keeping input order.
pub fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let threads = thread::available_parallelism().map_or(4, |n| n.get());
    let next = Mutex::new(0usize);
    let out: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = {
                    let mut n = next.lock().unwrap();
                    let i = *n;
                    *n += 1;
                    i
                };
                if i >= items.len() {
                    break;
                }
                *out[i].lock().unwrap() = Some(f(&items[i]));
            });
        }
    });
    out.into_iter()
        .map(|m| m.into_inner().unwrap().expect("every index visited"))
        .collect()
}

/// Reference rows: preset, input, output and the eight leading report columns.
pub const GOLDEN: [(&str, &str, &str, [&str; 8]); 4] = [
    ("ampere.cfg", "binary16", "binary32", ["✓", "✓", "1", "≥3", "✗", "8", "Truncate", "Truncate"]),
    ("ampere.cfg", "bfloat16", "binary32", ["✓", "✓", "1", "≥3", "✗", "8", "Truncate", "Truncate"]),
    ("tf32_ampere.cfg", "TensorFloat32", "binary32", ["✓", "✓", "1", "≥2", "✗", "4", "Truncate", "Truncate"]),
    ("ampere_binary16_out.cfg", "binary16", "binary16", ["✓", "✓", "1", "≥3", "✗", "8", "RNE", "RNE"]),
];

pub fn golden_failures() -> Vec<String> {
    let mut bad = Vec::new();
    for (name, fin, fout, want) in GOLDEN {
        let case = Case {
            cfg: preset(name).expect("golden preset exists"),
            fin: FpFormat::by_name(fin).expect("builtin"),
            fout: FpFormat::by_name(fout).expect("builtin"),
        };
        let row = table_row(&infer_case(&case));
        if row[2..10] != want {
            bad.push(format!("{name} {fin}->{fout}: got {:?}", &row[2..10]));
        }
    }
    bad
}

#[derive(Debug, Default)]
pub struct Summary {
    pub cases: usize,
    pub failures: Vec<String>,
}

/// Grid round trip plus golden rows.
pub fn run_selftest(cases: &[Case]) -> Summary {
    let results = par_map(cases, |c| check(c, &infer_case(c)));
    let mut failures: Vec<String> = cases
        .iter()
        .zip(results)
        .filter(|(_, r)| !r.is_empty())
        .map(|(c, r)| format!("{} {}: {}", c.fin, c.cfg, r.join("; ")))
        .collect();
    failures.extend(golden_failures());
    Summary {
        cases: cases.len(),
        failures,
    }
}
