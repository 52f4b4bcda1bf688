//! Probe vectors as JSON-lines records for offline harnesses.

use serde::{Deserialize, Serialize};

use super::{Probe, ProbeError, ProbeKind, VerdictValue};
use crate::formats::{encode_exact, to_hex, Dyadic, FpFormat, Value};

pub const VECTOR_SCHEMA: &str = "bfma-vectors/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorLine {
    pub label: String,
    pub k: usize,
    pub a: Vec<String>,
    pub b: Vec<String>,
    pub c: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowLine {
    /// Expected `d` per vector, `null` for any value.
    pub expect: Vec<Option<String>>,
    pub verdict: VerdictValue,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorRecord {
    pub schema: String,
    pub probe: ProbeKind,
    pub label: String,
    pub fin: String,
    pub fout: String,
    pub vectors: Vec<VectorLine>,
    pub rows: Vec<RowLine>,
}

fn hex(x: &Dyadic, fmt: &FpFormat) -> Result<String, ProbeError> {
    encode_exact(&Value::Num(x.clone()), fmt)
        .map(|bits| to_hex(bits, fmt))
        .ok_or_else(|| ProbeError::Precondition(format!("{x} is not exact in {fmt}")))
}

pub fn probe_record(probe: &Probe, fin: &FpFormat, fout: &FpFormat) -> Result<VectorRecord, ProbeError> {
    let vectors = probe
        .vectors
        .iter()
        .map(|v| {
            Ok(VectorLine {
                label: v.label.clone(),
                k: v.k(),
                a: v.a.iter().map(|x| hex(x, fin)).collect::<Result<_, _>>()?,
                b: v.b.iter().map(|x| hex(x, fin)).collect::<Result<_, _>>()?,
                c: hex(&v.c, fout)?,
            })
        })
        .collect::<Result<_, ProbeError>>()?;
    let rows = probe
        .rows
        .iter()
        .map(|r| {
            Ok(RowLine {
                expect: r
                    .expect
                    .iter()
                    .map(|e| e.as_ref().map(|x| hex(x, fout)).transpose())
                    .collect::<Result<_, _>>()?,
                verdict: r.verdict.clone(),
            })
        })
        .collect::<Result<_, ProbeError>>()?;
    Ok(VectorRecord {
        schema: VECTOR_SCHEMA.into(),
        probe: probe.kind,
        label: probe.label.clone(),
        fin: fin.name.clone(),
        fout: fout.name.clone(),
        vectors,
        rows,
    })
}

impl VectorRecord {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("records always serialise")
    }
}

/// One record per non-blank line; every record must carry the current schema.
pub fn parse_records(text: &str) -> Result<Vec<VectorRecord>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let r: VectorRecord =
                serde_json::from_str(l).map_err(|e| format!("line {}: {e}", i + 1))?;
            if r.schema != VECTOR_SCHEMA {
                return Err(format!("line {}: unknown schema `{}`", i + 1, r.schema));
            }
            if r.vectors.iter().any(|v| v.a.len() != v.k || v.b.len() != v.k)
                || r.rows.iter().any(|row| row.expect.len() != r.vectors.len())
            {
                return Err(format!("line {}: inconsistent lengths", i + 1));
            }
            Ok(r)
        })
        .collect()
}
