//! The `bfma` command line.

pub mod selftest;

use std::ffi::OsString;
use std::io::{self, Write};
use std::path::Path;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};

use crate::backend::{serve, Backend, ExecBackend, Session, SimBackend};
use crate::formats::{decode, parse_hex, FpFormat, Value};
use crate::inference::{infer_features, render_report, InferenceOptions, ReportStyle};
use crate::probes::{
    self, algorithm1_iteration, probe_record, ClassifierRow, MbfmaPlacement, Probe, ProbeKind,
    RoundingVerdict, VerdictValue,
};
use crate::simulator::{carry_bits_for, BlockFmaConfig, BlockOrdering};

/// Environment variable holding the default `--backend`.
pub const BACKEND_ENV: &str = "BFMA_BACKEND";

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(name = "bfma", version, about = "Probe block FMA units for their numerical features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Style {
    Table,
    Structured,
}

#[derive(clap::Args, Debug)]
struct BackendArg {
    /// `sim:<config file or preset>` or `exec:<command>`; defaults to $BFMA_BACKEND.
    #[arg(long)]
    backend: Option<String>,
    /// Per-request timeout of exec backends, in seconds.
    #[arg(long, default_value_t = 30)]
    timeout: u64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Infer the features of a backend for one or more format pairs.
    Probe {
        #[command(flatten)]
        backend: BackendArg,
        /// Input format; a comma-separated list runs each in turn.
        #[arg(long = "in")]
        fin: String,
        #[arg(long = "out")]
        fout: String,
        #[arg(long, value_enum, default_value_t = Style::Table)]
        report: Style,
        #[arg(long, default_value_t = 64)]
        kmax: usize,
        /// Probe offsets `j,t`.
        #[arg(long, default_value = "0,3")]
        seed_params: String,
    },
    /// Evaluate one MMA and print d as hex.
    Eval {
        #[command(flatten)]
        backend: BackendArg,
        #[arg(long = "in")]
        fin: String,
        #[arg(long = "out")]
        fout: String,
        #[arg(long)]
        c: String,
        /// Comma-separated hex operands.
        #[arg(long, default_value = "")]
        a: String,
        #[arg(long, default_value = "")]
        b: String,
    },
    /// Write probe vectors and classifier tables as JSON lines.
    GenVectors {
        #[arg(long = "in")]
        fin: String,
        #[arg(long = "out")]
        fout: String,
        /// Probe name or `all`.
        #[arg(long, default_value = "all")]
        probe: String,
        #[arg(long)]
        fma_width: Option<usize>,
        /// Known extra alignment bits (post-alignment probe).
        #[arg(long, default_value_t = 0)]
        n_eab: u32,
        /// Alignment bits to test.
        #[arg(long, default_value_t = 1)]
        n: u32,
        /// Known block rounding (selects the alignment vector variant).
        #[arg(long)]
        rm: Option<String>,
        /// Known ordering (selects the inter-block probe placement).
        #[arg(long)]
        ordering: Option<String>,
        /// Width-test iteration.
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        j: i64,
        #[arg(long, default_value_t = 3)]
        t: i64,
    },
    /// Round-trip inference over the simulator grid plus golden rows.
    Selftest {
        /// Only every n-th grid case.
        #[arg(long, default_value_t = 1)]
        stride: usize,
    },
    /// Serve the line protocol on stdin/stdout from a simulated unit.
    Serve {
        /// Config file or preset name; defaults apply when absent.
        #[arg(long)]
        config: Option<String>,
        /// `key=value` overrides applied after the config file.
        #[arg(long = "set")]
        set: Vec<String>,
    },
}

struct Failure {
    code: i32,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn error(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_ERROR,
        message: message.into(),
    }
}

fn format(name: &str) -> Result<FpFormat, Failure> {
    FpFormat::by_name(name).map_err(|e| usage(e.to_string()))
}

/// Config text from a file, or from a shipped preset of that name.
pub fn load_config(spec: &str) -> Result<BlockFmaConfig, String> {
    if Path::new(spec).exists() {
        let text = std::fs::read_to_string(spec).map_err(|e| format!("{spec}: {e}"))?;
        return BlockFmaConfig::from_text(&text).map_err(|e| format!("{spec}: {e}"));
    }
    let name = Path::new(spec)
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or(spec);
    selftest::preset(name).ok_or_else(|| format!("no config file or preset `{spec}`"))
}

fn open_backend(arg: &BackendArg) -> Result<Box<dyn Backend>, Failure> {
    let spec = match &arg.backend {
        Some(s) => s.clone(),
        None => std::env::var(BACKEND_ENV)
            .map_err(|_| usage(format!("no --backend given and {BACKEND_ENV} is unset")))?,
    };
    if let Some(path) = spec.strip_prefix("sim:") {
        let cfg = load_config(path).map_err(usage)?;
        let b = SimBackend::new(cfg).map_err(|e| usage(e.to_string()))?;
        Ok(Box::new(b))
    } else if let Some(cmd) = spec.strip_prefix("exec:") {
        let b = ExecBackend::with_timeout(cmd, Duration::from_secs(arg.timeout))
            .map_err(|e| error(e.to_string()))?;
        Ok(Box::new(b))
    } else {
        Err(usage(format!("backend `{spec}` must start with sim: or exec:")))
    }
}

/// Run the command line `args` (program name first) and return the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "bfma: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let io = |e: io::Error| error(e.to_string());
    match cmd {
        Command::Probe {
            backend,
            fin,
            fout,
            report,
            kmax,
            seed_params,
        } => {
            let fins = fin
                .split(',')
                .map(|n| format(n.trim()))
                .collect::<Result<Vec<_>, _>>()?;
            let fout = format(&fout)?;
            let (j, t) = seed_params
                .split_once(',')
                .and_then(|(j, t)| Some((j.trim().parse().ok()?, t.trim().parse().ok()?)))
                .ok_or_else(|| usage(format!("--seed-params `{seed_params}` is not `j,t`")))?;
            let opts = InferenceOptions { k_max: kmax, j, t };
            let mut session = Session::new(open_backend(&backend)?);
            let mut reports = Vec::new();
            for fin in &fins {
                let r = infer_features(&mut session, fin, &fout, &opts)
                    .map_err(|e| error(e.to_string()))?;
                for n in &r.notes {
                    let _ = writeln!(err, "{} -> {}: {n}", r.fin, r.fout);
                }
                reports.push(r);
            }
            let style = match report {
                Style::Table => ReportStyle::Table,
                Style::Structured => ReportStyle::Structured,
            };
            write!(out, "{}", render_report(&reports, style)).map_err(io)?;
            let partial = reports.iter().any(|r| {
                !r.complete || !r.fma_width.is_determinate() || 2 * r.undetermined_count() > r.verdicts().len()
            });
            Ok(if partial { EXIT_PARTIAL } else { EXIT_OK })
        }
        Command::Eval {
            backend,
            fin,
            fout,
            c,
            a,
            b,
        } => {
            let (fin, fout) = (format(&fin)?, format(&fout)?);
            let list = |s: &str| -> Result<Vec<Value>, Failure> {
                s.split(',')
                    .map(str::trim)
                    .filter(|x| !x.is_empty())
                    .map(|x| {
                        parse_hex(x, &fin)
                            .map(|bits| decode(bits, &fin))
                            .map_err(|e| usage(e.to_string()))
                    })
                    .collect()
            };
            let (a, b) = (list(&a)?, list(&b)?);
            if a.len() != b.len() {
                return Err(usage(format!("--a has {} operands, --b has {}", a.len(), b.len())));
            }
            let c = decode(parse_hex(&c, &fout).map_err(|e| usage(e.to_string()))?, &fout);
            let mut session = Session::new(open_backend(&backend)?);
            let obs = session
                .evaluate(&fin, &fout, &a, &b, &c)
                .map_err(|e| error(e.to_string()))?;
            writeln!(out, "{}", obs.hex).map_err(io)?;
            Ok(EXIT_OK)
        }
        Command::GenVectors {
            fin,
            fout,
            probe,
            fma_width,
            n_eab,
            n,
            rm,
            ordering,
            k,
            j,
            t,
        } => {
            let (fin, fout) = (format(&fin)?, format(&fout)?);
            let rm = rm
                .map(|r| {
                    r.parse()
                        .map(RoundingVerdict::of)
                        .map_err(|e: String| usage(e))
                })
                .transpose()?;
            let ordering = ordering
                .map(|o| {
                    BlockOrdering::ALL
                        .into_iter()
                        .find(|x| x.name() == o)
                        .ok_or_else(|| usage(format!("unknown ordering `{o}`")))
                })
                .transpose()?;
            let kinds = if probe == "all" {
                ProbeKind::ALL.to_vec()
            } else {
                vec![ProbeKind::from_name(&probe).ok_or_else(|| usage(format!("unknown probe `{probe}`")))?]
            };
            let p = GenParams {
                fma_width,
                n_eab,
                n,
                rm,
                ordering,
                k,
                j,
                t,
            };
            for kind in &kinds {
                match generate(*kind, &fin, &fout, &p) {
                    Ok(list) => {
                        for pr in list {
                            let rec = probe_record(&pr, &fin, &fout).map_err(|e| error(e.to_string()))?;
                            writeln!(out, "{}", rec.to_line()).map_err(io)?;
                        }
                    }
                    Err(msg) if kinds.len() > 1 => {
                        let _ = writeln!(err, "skipped {}: {msg}", kind.name());
                    }
                    Err(msg) => return Err(usage(msg)),
                }
            }
            Ok(EXIT_OK)
        }
        Command::Selftest { stride } => {
            let cases: Vec<_> = selftest::grid().into_iter().step_by(stride.max(1)).collect();
            let s = selftest::run_selftest(&cases);
            for f in &s.failures {
                writeln!(out, "FAIL {f}").map_err(io)?;
            }
            writeln!(
                out,
                "{} grid cases, {} golden rows, {} failures",
                s.cases,
                selftest::GOLDEN.len(),
                s.failures.len()
            )
            .map_err(io)?;
            Ok(if s.failures.is_empty() { EXIT_OK } else { EXIT_ERROR })
        }
        Command::Serve { config, set } => {
            let mut text = match &config {
                Some(spec) => load_config(spec).map_err(usage)?.to_text(),
                None => BlockFmaConfig::default().to_text(),
            };
            // Later keys replace earlier ones.
            for kv in &set {
                let (key, _) = kv
                    .split_once('=')
                    .ok_or_else(|| usage(format!("--set `{kv}` is not key=value")))?;
                let key = key.trim();
                text = text
                    .lines()
                    .filter(|l| l.split('=').next().map(str::trim) != Some(key))
                    .map(|l| format!("{l}\n"))
                    .collect();
                text.push_str(kv);
                text.push('\n');
            }
            let cfg = BlockFmaConfig::from_text(&text).map_err(|e| usage(e.to_string()))?;
            let mut backend = SimBackend::new(cfg).map_err(|e| usage(e.to_string()))?;
            let stdin = io::stdin();
            serve(&mut backend, stdin.lock(), out).map_err(io)?;
            Ok(EXIT_OK)
        }
    }
}

struct GenParams {
    fma_width: Option<usize>,
    n_eab: u32,
    n: u32,
    rm: Option<RoundingVerdict>,
    ordering: Option<BlockOrdering>,
    k: usize,
    j: i64,
    t: i64,
}

/// Width-test records for one iteration: the request pair, the extra width
/// vectors and the carry test.
fn algorithm1_probes(fin: &FpFormat, fout: &FpFormat, k: usize) -> Result<Vec<Probe>, String> {
    let it = algorithm1_iteration(fin, fout, k).map_err(|e| e.to_string())?;
    let exact_row = |vs: &[probes::ProbeVector], verdict| {
        ClassifierRow::new(vs.iter().map(|v| Some(v.exact())).collect(), verdict)
    };
    let mut out = Vec::new();
    let pass = VerdictValue::AtLeast(k as u32);
    let pair = it.test_a.to_vec();
    let rows = vec![
        exact_row(&pair, pass.clone()),
        ClassifierRow::new(
            pair.iter().map(|v| Some(-v.exact())).collect(),
            pass.clone(),
        ),
    ];
    out.push(Probe {
        kind: ProbeKind::Algorithm1,
        label: format!("algorithm1 k={k} A"),
        vectors: pair,
        rows,
    });
    if !it.boundary.is_empty() {
        out.push(Probe {
            kind: ProbeKind::Algorithm1,
            label: format!("algorithm1 k={k} boundary"),
            rows: vec![exact_row(&it.boundary, pass)],
            vectors: it.boundary,
        });
    }
    if let Some(v) = it.test_b {
        let vs = vec![v];
        out.push(Probe {
            kind: ProbeKind::Algorithm1,
            label: format!("algorithm1 k={k} B"),
            rows: vec![exact_row(&vs, VerdictValue::AtLeast(carry_bits_for(k, fin.precision)))],
            vectors: vs,
        });
    }
    Ok(out)
}

fn generate(kind: ProbeKind, fin: &FpFormat, fout: &FpFormat, p: &GenParams) -> Result<Vec<Probe>, String> {
    let need_width = || {
        p.fma_width
            .ok_or_else(|| format!("{} depends on the FMA width: pass --fma-width", kind.name()))
    };
    let one = |r: Result<Probe, probes::ProbeError>| r.map(|x| vec![x]).map_err(|e| e.to_string());
    match kind {
        ProbeKind::SubnormalIn => one(probes::subnormal_input(fin, fout)),
        ProbeKind::SubnormalOut => one(probes::subnormal_output(fin, fout)),
        ProbeKind::Algorithm1 => algorithm1_probes(fin, fout, p.k),
        ProbeKind::AlignmentBits => one(probes::alignment_bits(fin, fout, p.n, p.j, p.rm)),
        ProbeKind::Normalisation => match p.fma_width {
            Some(n) if n >= 3 => one(probes::normalisation_deferred_carry(fin, fout)),
            Some(_) => one(probes::normalisation_subtractive(fin, fout, p.t)),
            None => Ok(vec![
                probes::normalisation_deferred_carry(fin, fout).map_err(|e| e.to_string())?,
                probes::normalisation_subtractive(fin, fout, p.t).map_err(|e| e.to_string())?,
            ]),
        },
        ProbeKind::RmBfma => one(probes::rm_bfma(fin, fout, p.j)),
        ProbeKind::PostAlignmentRounding => one(probes::post_alignment_rounding(fin, fout, p.n_eab, p.j)),
        ProbeKind::Ordering => {
            let n = need_width()?;
            Ok(vec![
                probes::ordering_primary(fin, fout, n, p.j).map_err(|e| e.to_string())?,
                probes::ordering_permutations(fin, fout, n, p.j).map_err(|e| e.to_string())?,
            ])
        }
        ProbeKind::RmMbfma => {
            let n = need_width()?;
            let placement = match p.ordering {
                Some(BlockOrdering::CWithLast) => MbfmaPlacement::FirstBlock,
                _ => MbfmaPlacement::SecondBlock,
            };
            one(probes::rm_mbfma(fin, fout, n, placement, n == 1))
        }
    }
}

#[cfg(test)]
mod tests;
