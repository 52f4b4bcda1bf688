//! Runs the probes against a backend in dependency order and collects the
//! verdicts into a [`FeatureReport`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, Session};
use crate::formats::{FpFormat, Value};
use crate::probes::{
    self, run_algorithm1, Evidence, MbfmaPlacement, Probe, ProbeError, VerdictValue, WidthResult,
};
use crate::simulator::BlockOrdering;

pub const REPORT_SCHEMA: &str = "bfma-report/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InferenceOptions {
    pub k_max: usize,
    /// Exponent offset of the scaled probes.
    pub j: i64,
    /// Offset of the subtractive normalisation case.
    pub t: i64,
}

impl Default for InferenceOptions {
    fn default() -> Self {
        InferenceOptions {
            k_max: 64,
            j: 0,
            t: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureReport {
    pub schema: String,
    pub fin: String,
    pub fout: String,
    pub subnormal_in: VerdictValue,
    pub subnormal_out: VerdictValue,
    pub n_eab: VerdictValue,
    pub n_ecb: VerdictValue,
    pub immediate_norm: VerdictValue,
    pub fma_width: VerdictValue,
    pub rm_bfma: VerdictValue,
    pub rm_mbfma: VerdictValue,
    pub rm_post_alignment: VerdictValue,
    pub ordering: VerdictValue,
    /// False when a backend failure cut the run short.
    pub complete: bool,
    pub notes: Vec<String>,
    pub evidence: Vec<Evidence>,
}

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("backend does not support {fin} -> {fout}")]
    UnsupportedPair { fin: String, fout: String },
}

impl FeatureReport {
    fn new(fin: &FpFormat, fout: &FpFormat) -> Self {
        let pending = || VerdictValue::undetermined("not run");
        FeatureReport {
            schema: REPORT_SCHEMA.into(),
            fin: fin.name.clone(),
            fout: fout.name.clone(),
            subnormal_in: pending(),
            subnormal_out: pending(),
            n_eab: pending(),
            n_ecb: pending(),
            immediate_norm: pending(),
            fma_width: pending(),
            rm_bfma: pending(),
            rm_mbfma: pending(),
            rm_post_alignment: pending(),
            ordering: pending(),
            complete: true,
            notes: Vec::new(),
            evidence: Vec::new(),
        }
    }

    pub fn verdicts(&self) -> [(&'static str, &VerdictValue); 10] {
        [
            ("subnormal_in", &self.subnormal_in),
            ("subnormal_out", &self.subnormal_out),
            ("n_eab", &self.n_eab),
            ("n_ecb", &self.n_ecb),
            ("immediate_norm", &self.immediate_norm),
            ("fma_width", &self.fma_width),
            ("rm_bfma", &self.rm_bfma),
            ("rm_mbfma", &self.rm_mbfma),
            ("rm_post_alignment", &self.rm_post_alignment),
            ("ordering", &self.ordering),
        ]
    }

    pub fn undetermined_count(&self) -> usize {
        self.verdicts().iter().filter(|(_, v)| !v.is_determinate()).count()
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("reports always serialise")
    }
}

struct Run<'a> {
    session: &'a mut Session,
    fin: &'a FpFormat,
    fout: &'a FpFormat,
    report: FeatureReport,
}

impl Run<'_> {
    fn probe(&mut self, built: Result<Probe, ProbeError>) -> Result<VerdictValue, BackendError> {
        let probe = match built {
            Ok(p) => p,
            Err(e) => return Ok(VerdictValue::undetermined(e.to_string())),
        };
        let kmax = self.session.info().kmax;
        if let Some(v) = probe.vectors.iter().find(|v| v.k() > kmax) {
            return Ok(VerdictValue::undetermined(format!(
                "{} needs k = {} > kmax = {kmax}",
                probe.label,
                v.k()
            )));
        }
        let mut seen: Vec<Value> = Vec::new();
        for v in &probe.vectors {
            let obs = self.session.run(self.fin, self.fout, v)?;
            self.report.evidence.push(Evidence::new(v, self.fin, self.fout, &obs));
            seen.push(obs.value);
        }
        Ok(probe.classify(&seen))
    }

    fn note(&mut self, text: String) {
        self.report.notes.push(text);
    }
}

fn skip(reason: &str) -> VerdictValue {
    VerdictValue::undetermined(reason)
}

/// Probe `fin -> fout` on `session` and assemble the report.
///
/// Order: subnormals, width and carries, one alignment bit, normalisation,
/// block rounding, the remaining alignment bits, post-alignment rounding,
/// ordering, then inter-block rounding.
pub fn infer_features(
    session: &mut Session,
    fin: &FpFormat,
    fout: &FpFormat,
    opts: &InferenceOptions,
) -> Result<FeatureReport, InferenceError> {
    if !session.info().supports(&fin.name, &fout.name) {
        return Err(InferenceError::UnsupportedPair {
            fin: fin.name.clone(),
            fout: fout.name.clone(),
        });
    }
    let mut run = Run {
        session,
        fin,
        fout,
        report: FeatureReport::new(fin, fout),
    };
    if let Err(e) = steps(&mut run, opts) {
        run.report.complete = false;
        run.note(format!("aborted: {e}"));
    }
    Ok(run.report)
}

fn steps(run: &mut Run<'_>, opts: &InferenceOptions) -> Result<(), BackendError> {
    let (fin, fout) = (run.fin, run.fout);
    let j = opts.j;

    run.report.subnormal_in = run.probe(probes::subnormal_input(fin, fout))?;
    run.report.subnormal_out = run.probe(probes::subnormal_output(fin, fout))?;

    let a1 = run_algorithm1(run.session, fin, fout, opts.k_max)?;
    run.report.evidence.extend(a1.evidence);
    for n in a1.notes {
        run.note(format!("algorithm1: {n}"));
    }
    let n_fma = match a1.fma_width {
        WidthResult::Exact(n) => {
            run.report.fma_width = VerdictValue::Int(n as u32);
            Some(n)
        }
        WidthResult::AtLeast(n) if n >= 2 => {
            run.report.fma_width = VerdictValue::AtLeast(n as u32);
            None
        }
        WidthResult::AtLeast(_) => {
            run.report.fma_width = skip("no width could be tested");
            None
        }
    };
    run.report.n_ecb = match (n_fma, a1.n_ecb) {
        (Some(1), _) => VerdictValue::Int(0),
        (_, Some(n)) => VerdictValue::AtLeast(n),
        _ => skip("no carry test returned its exact sum"),
    };

    let Some(n) = n_fma else {
        let why = "FMA width not determined";
        for f in [
            &mut run.report.n_eab,
            &mut run.report.immediate_norm,
            &mut run.report.rm_bfma,
            &mut run.report.rm_mbfma,
            &mut run.report.rm_post_alignment,
            &mut run.report.ordering,
        ] {
            *f = skip(why);
        }
        return Ok(());
    };

    // With one addition per rounding every sum is normalised at once.
    let mut n_eab: Option<u32> = None;
    if n == 1 {
        run.report.n_eab = VerdictValue::AtLeast(0);
        run.report.immediate_norm = VerdictValue::Bool(true);
    } else {
        match run.probe(probes::alignment_bits(fin, fout, 1, j, None))? {
            VerdictValue::Bool(false) => {
                n_eab = Some(0);
                run.report.n_eab = VerdictValue::Int(0);
            }
            VerdictValue::Bool(true) => run.report.n_eab = VerdictValue::AtLeast(1),
            other => run.report.n_eab = other,
        }
        let norm = if n >= 3 {
            probes::normalisation_deferred_carry(fin, fout)
        } else {
            probes::normalisation_subtractive(fin, fout, opts.t)
        };
        run.report.immediate_norm = run.probe(norm)?;
    }
    let deferred = run.report.immediate_norm == VerdictValue::Bool(false);

    run.report.rm_bfma = if n < 3 {
        skip("block rounding needs an FMA width of at least 3")
    } else if !deferred {
        skip("block rounding needs deferred normalisation")
    } else {
        if !run.report.n_ecb.is_determinate() {
            run.note("rm_bfma: run without a confirmed carry bit".into());
        }
        if run.report.n_eab != VerdictValue::Int(0) {
            run.note("rm_bfma: vectors use no alignment bits, run despite extra alignment bits".into());
        }
        run.probe(probes::rm_bfma(fin, fout, j))?
    };

    if run.report.n_eab == VerdictValue::AtLeast(1) {
        let rm = match &run.report.rm_bfma {
            VerdictValue::Rounding(r) => Some(*r),
            _ => None,
        };
        let cap = (n - 1) as u32;
        let mut found = VerdictValue::AtLeast(1);
        for bits in 2..=cap {
            match run.probe(probes::alignment_bits(fin, fout, bits, j, rm))? {
                VerdictValue::Bool(true) => found = VerdictValue::AtLeast(bits),
                VerdictValue::Bool(false) => {
                    found = VerdictValue::Int(bits - 1);
                    break;
                }
                other => {
                    found = other;
                    break;
                }
            }
        }
        if let VerdictValue::Int(b) = found {
            n_eab = Some(b);
        }
        run.report.n_eab = found;
    }

    run.report.rm_post_alignment = match n_eab {
        Some(b) if b <= 1 && deferred => {
            run.probe(probes::post_alignment_rounding(fin, fout, b, j))?
        }
        Some(_) => skip("post-alignment rounding needs at most one extra alignment bit"),
        None if !deferred => skip("post-alignment rounding needs deferred normalisation"),
        None => skip("number of extra alignment bits not determined exactly"),
    };

    run.report.ordering = match run.probe(probes::ordering_primary(fin, fout, n, j))? {
        v @ VerdictValue::Ordering(_) => v,
        _ => run.probe(probes::ordering_permutations(fin, fout, n, j))?,
    };

    let placement = match run.report.ordering {
        VerdictValue::Ordering(BlockOrdering::CWithLast) => Some(MbfmaPlacement::FirstBlock),
        VerdictValue::Ordering(_) => Some(MbfmaPlacement::SecondBlock),
        _ => None,
    };
    run.report.rm_mbfma = match placement {
        Some(p) => run.probe(probes::rm_mbfma(fin, fout, n, p, n == 1))?,
        None => skip("ordering not determined"),
    };
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportStyle {
    Table,
    Structured,
}

pub const TABLE_COLUMNS: [&str; 12] = [
    "Input",
    "Output",
    "Subnormal in",
    "Subnormal out",
    "n_eab",
    "n_ecb",
    "I.Norm",
    "N_FMA",
    "RM-BFMA",
    "RM-MBFMA",
    "RM-align",
    "Ordering",
];

pub fn table_row(r: &FeatureReport) -> Vec<String> {
    let mut row = vec![r.fin.clone(), r.fout.clone()];
    row.extend(
        [
            &r.subnormal_in,
            &r.subnormal_out,
            &r.n_eab,
            &r.n_ecb,
            &r.immediate_norm,
            &r.fma_width,
            &r.rm_bfma,
            &r.rm_mbfma,
            &r.rm_post_alignment,
            &r.ordering,
        ]
        .iter()
        .map(|v| v.to_string()),
    );
    row
}

pub fn render_report(reports: &[FeatureReport], style: ReportStyle) -> String {
    match style {
        ReportStyle::Structured => reports.iter().map(|r| r.to_line() + "\n").collect(),
        ReportStyle::Table => {
            let rows: Vec<Vec<String>> = std::iter::once(TABLE_COLUMNS.map(String::from).to_vec())
                .chain(reports.iter().map(table_row))
                .collect();
            let widths: Vec<usize> = (0..TABLE_COLUMNS.len())
                .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
                .collect();
            let mut out = String::new();
            for r in &rows {
                let cells: Vec<String> = r
                    .iter()
                    .zip(&widths)
                    .map(|(cell, w)| format!("{cell:<w$}"))
                    .collect();
                out.push_str(cells.join(" | ").trim_end());
                out.push('\n');
            }
            out
        }
    }
}

/// Inverse of the structured rendering.
pub fn parse_reports(text: &str) -> Result<Vec<FeatureReport>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let r: FeatureReport =
                serde_json::from_str(l).map_err(|e| format!("line {}: {e}", i + 1))?;
            if r.schema != REPORT_SCHEMA {
                return Err(format!("line {}: unknown schema `{}`", i + 1, r.schema));
            }
            Ok(r)
        })
        .collect()
}

#[cfg(test)]
mod tests;
