//! Test vectors parameterised by the input and output precisions, and the
//! tables that turn device outputs into feature verdicts.

mod algorithm1;
mod export;
mod generators;
mod ordering;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use algorithm1::{
    algorithm1_iteration, run_algorithm1, Algorithm1Iteration, Algorithm1Outcome, WidthResult,
};
pub use export::{parse_records, probe_record, VectorRecord, VECTOR_SCHEMA};
pub use generators::{
    alignment_bits, normalisation_deferred_carry, normalisation_subtractive, post_alignment_rounding,
    rm_bfma, rm_mbfma, subnormal_input, subnormal_output, MbfmaPlacement,
};
pub use ordering::{ordering_permutations, ordering_primary, OrderingClassifier};

use crate::backend::Observation;
use crate::formats::{Dyadic, FpFormat, RoundingMode, Value};
use crate::simulator::BlockOrdering;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProbeError {
    #[error("{value} cannot be written as a product of two {format} operands")]
    NotFactorable { value: String, format: String },
    #[error("precondition not met: {0}")]
    Precondition(String),
}

/// One scalar test `d = c + sum a_l b_l`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeVector {
    pub label: String,
    pub c: Dyadic,
    pub a: Vec<Dyadic>,
    pub b: Vec<Dyadic>,
}

impl ProbeVector {
    /// Build from intended products, factoring each into `fin` operands.
    pub fn from_products(
        label: impl Into<String>,
        c: Dyadic,
        r: &[Dyadic],
        fin: &FpFormat,
    ) -> Result<Self, ProbeError> {
        let (a, b) = r
            .iter()
            .map(|x| factor_into_operands(x, fin))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .unzip();
        Ok(ProbeVector {
            label: label.into(),
            c,
            a,
            b,
        })
    }

    pub fn k(&self) -> usize {
        self.a.len()
    }

    pub fn products(&self) -> Vec<Dyadic> {
        self.a.iter().zip(&self.b).map(|(x, y)| x * y).collect()
    }

    pub fn exact(&self) -> Dyadic {
        crate::simulator::exact_oracle(&self.c, &self.a, &self.b)
    }

    /// The same test with `c` and every `a_l` negated.
    pub fn negated(&self) -> Self {
        ProbeVector {
            label: format!("{} neg", self.label),
            c: -&self.c,
            a: self.a.iter().map(|x| -x).collect(),
            b: self.b.clone(),
        }
    }

    /// Whether every operand is exact in its format.
    pub fn encodable(&self, fin: &FpFormat, fout: &FpFormat) -> bool {
        fout.represents(&self.c) && self.a.iter().chain(&self.b).all(|x| fin.represents(x))
    }

    /// True when a single block of any width at least `k` with no extra
    /// alignment bits returns the exact sum: every addend lies on the grid of
    /// the largest one and the sum is representable in `fout`.
    pub fn exact_on_plain_grid(&self, fin: &FpFormat, fout: &FpFormat) -> bool {
        let addends: Vec<Dyadic> = std::iter::once(self.c.clone())
            .chain(self.products())
            .filter(|x| !x.is_zero())
            .collect();
        let Some(lead) = addends.iter().filter_map(Dyadic::lead_exponent).max() else {
            return self.encodable(fin, fout);
        };
        let quantum = lead - (fout.precision as i64 - 1);
        self.encodable(fin, fout)
            && addends.iter().all(|x| x.exponent() >= quantum)
            && fout.represents(&self.exact())
            && !fout.is_subnormal(&self.exact())
    }
}

impl fmt::Display for ProbeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: c={}", self.label, self.c)?;
        for (x, y) in self.a.iter().zip(&self.b) {
            write!(f, " +({x})({y})")?;
        }
        Ok(())
    }
}

/// Split `r` into `a * b` with `a` carrying the significand and `b` a power
/// of two, both finite in `fin`. Normal operands are preferred.
pub fn factor_into_operands(r: &Dyadic, fin: &FpFormat) -> Result<(Dyadic, Dyadic), ProbeError> {
    let fail = || ProbeError::NotFactorable {
        value: r.to_string(),
        format: fin.name.clone(),
    };
    let Some(e) = r.lead_exponent() else {
        return Ok((Dyadic::zero(), Dyadic::zero()));
    };
    if r.width() > fin.precision as u64 {
        return Err(fail());
    }
    let (emin, emax) = (fin.emin(), fin.emax());
    let lo = emin.max(e - emax);
    let hi = emax.min(e - emin);
    if lo <= hi {
        let ea = (e - e.div_euclid(2)).clamp(lo, hi);
        let b = Dyadic::pow2(e - ea);
        let a = r.scale(ea - e);
        if fin.represents(&a) && fin.represents(&b) {
            return Ok((a, b));
        }
    }
    for eb in emin - (fin.precision as i64 - 1)..=emax {
        let (a, b) = (r.scale(-eb), Dyadic::pow2(eb));
        if fin.represents(&a) && fin.represents(&b) {
            return Ok((a, b));
        }
    }
    Err(fail())
}

/// Rounding behaviour as the probes can tell it apart: RZ and truncation
/// of a sign-magnitude value give identical results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RoundingVerdict {
    Truncate,
    #[serde(rename = "RNE")]
    Rne,
    #[serde(rename = "RU")]
    Ru,
    #[serde(rename = "RD")]
    Rd,
}

impl RoundingVerdict {
    pub const ALL: [RoundingVerdict; 4] = [
        RoundingVerdict::Truncate,
        RoundingVerdict::Rne,
        RoundingVerdict::Ru,
        RoundingVerdict::Rd,
    ];

    pub fn of(rm: RoundingMode) -> Self {
        match rm {
            RoundingMode::Rz | RoundingMode::TruncateMagnitude => RoundingVerdict::Truncate,
            RoundingMode::Rne => RoundingVerdict::Rne,
            RoundingMode::Ru => RoundingVerdict::Ru,
            RoundingMode::Rd => RoundingVerdict::Rd,
        }
    }

    pub fn mode(self) -> RoundingMode {
        match self {
            RoundingVerdict::Truncate => RoundingMode::TruncateMagnitude,
            RoundingVerdict::Rne => RoundingMode::Rne,
            RoundingVerdict::Ru => RoundingMode::Ru,
            RoundingVerdict::Rd => RoundingMode::Rd,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RoundingVerdict::Truncate => "Truncate",
            RoundingVerdict::Rne => "RNE",
            RoundingVerdict::Ru => "RU",
            RoundingVerdict::Rd => "RD",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum VerdictValue {
    Bool(bool),
    Int(u32),
    AtLeast(u32),
    Rounding(RoundingVerdict),
    Ordering(BlockOrdering),
    Undetermined(String),
}

impl VerdictValue {
    pub fn undetermined(reason: impl Into<String>) -> Self {
        VerdictValue::Undetermined(reason.into())
    }

    pub fn is_determinate(&self) -> bool {
        !matches!(self, VerdictValue::Undetermined(_))
    }
}

impl fmt::Display for VerdictValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VerdictValue::Bool(true) => write!(f, "✓"),
            VerdictValue::Bool(false) => write!(f, "✗"),
            VerdictValue::Int(n) => write!(f, "{n}"),
            VerdictValue::AtLeast(n) => write!(f, "≥{n}"),
            VerdictValue::Rounding(r) => write!(f, "{}", r.name()),
            VerdictValue::Ordering(o) => write!(f, "{}", o.name()),
            VerdictValue::Undetermined(_) => write!(f, "?"),
        }
    }
}

/// Expected outputs, one per vector (`None` matches anything), and the
/// verdict they imply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassifierRow {
    pub expect: Vec<Option<Dyadic>>,
    pub verdict: VerdictValue,
}

impl ClassifierRow {
    pub fn new(expect: Vec<Option<Dyadic>>, verdict: VerdictValue) -> Self {
        ClassifierRow { expect, verdict }
    }

    fn matches(&self, observed: &[Value]) -> bool {
        self.expect.len() == observed.len()
            && self.expect.iter().zip(observed).all(|(e, o)| match e {
                None => true,
                Some(v) => o.as_dyadic().as_ref() == Some(v),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    SubnormalIn,
    SubnormalOut,
    Algorithm1,
    AlignmentBits,
    Normalisation,
    RmBfma,
    PostAlignmentRounding,
    Ordering,
    RmMbfma,
}

impl ProbeKind {
    pub const ALL: [ProbeKind; 9] = [
        ProbeKind::SubnormalIn,
        ProbeKind::SubnormalOut,
        ProbeKind::Algorithm1,
        ProbeKind::AlignmentBits,
        ProbeKind::Normalisation,
        ProbeKind::RmBfma,
        ProbeKind::PostAlignmentRounding,
        ProbeKind::Ordering,
        ProbeKind::RmMbfma,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProbeKind::SubnormalIn => "subnormal_in",
            ProbeKind::SubnormalOut => "subnormal_out",
            ProbeKind::Algorithm1 => "algorithm1",
            ProbeKind::AlignmentBits => "alignment_bits",
            ProbeKind::Normalisation => "normalisation",
            ProbeKind::RmBfma => "rm_bfma",
            ProbeKind::PostAlignmentRounding => "post_alignment_rounding",
            ProbeKind::Ordering => "ordering",
            ProbeKind::RmMbfma => "rm_mbfma",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        ProbeKind::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// Vectors issued together plus their classifier table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Probe {
    pub kind: ProbeKind,
    pub label: String,
    pub vectors: Vec<ProbeVector>,
    pub rows: Vec<ClassifierRow>,
}

impl Probe {
    /// First matching row, or Undetermined.
    pub fn classify(&self, observed: &[Value]) -> VerdictValue {
        self.rows
            .iter()
            .find(|r| r.matches(observed))
            .map(|r| r.verdict.clone())
            .unwrap_or_else(|| {
                let seen: Vec<String> = observed.iter().map(Value::to_string).collect();
                VerdictValue::undetermined(format!(
                    "{}: observation [{}] matches no row",
                    self.label,
                    seen.join(", ")
                ))
            })
    }
}

/// Raw record of one evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub label: String,
    pub c: String,
    pub a: Vec<String>,
    pub b: Vec<String>,
    pub d: String,
}

impl Evidence {
    pub fn new(v: &ProbeVector, fin: &FpFormat, fout: &FpFormat, obs: &Observation) -> Self {
        let hex = |x: &Dyadic, f: &FpFormat| {
            crate::formats::encode_exact(&Value::Num(x.clone()), f)
                .map(|bits| crate::formats::to_hex(bits, f))
                .unwrap_or_else(|| x.to_string())
        };
        Evidence {
            label: v.label.clone(),
            c: hex(&v.c, fout),
            a: v.a.iter().map(|x| hex(x, fin)).collect(),
            b: v.b.iter().map(|x| hex(x, fin)).collect(),
            d: obs.hex.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factoring_examples() {
        let fp16 = FpFormat::binary16();
        let below_two = Dyadic::from_i64(2) - Dyadic::pow2(-10);
        assert_eq!(
            factor_into_operands(&below_two, &fp16).unwrap(),
            (below_two.clone(), Dyadic::one())
        );
        let (a, b) = factor_into_operands(&Dyadic::pow2(-23), &fp16).unwrap();
        assert_eq!(&a * &b, Dyadic::pow2(-23));
        assert!(!fp16.is_subnormal(&a) && !fp16.is_subnormal(&b));
        assert!(matches!(
            factor_into_operands(&Dyadic::sum_of_pow2(&[0, -11]), &fp16),
            Err(ProbeError::NotFactorable { .. })
        ));
        let neg = -Dyadic::sum_of_pow2(&[-30, -31]);
        let (a, b) = factor_into_operands(&neg, &fp16).unwrap();
        assert_eq!(&a * &b, neg);
        // Below the normal product range a subnormal operand is used.
        let tiny = Dyadic::pow2(-40);
        let (a, b) = factor_into_operands(&tiny, &fp16).unwrap();
        assert_eq!(&a * &b, tiny);
        assert!(factor_into_operands(&Dyadic::pow2(-60), &fp16).is_err());
    }

    #[test]
    fn classifier_falls_back_to_undetermined() {
        let p = Probe {
            kind: ProbeKind::RmBfma,
            label: "t".into(),
            vectors: vec![],
            rows: vec![ClassifierRow::new(
                vec![Some(Dyadic::one()), None],
                VerdictValue::Bool(true),
            )],
        };
        let one = Value::Num(Dyadic::one());
        assert_eq!(p.classify(&[one.clone(), Value::zero()]), VerdictValue::Bool(true));
        assert!(!p.classify(&[Value::zero(), one.clone()]).is_determinate());
        assert!(!p.classify(&[one]).is_determinate());
    }

    #[test]
    fn kind_names() {
        for k in ProbeKind::ALL {
            assert_eq!(ProbeKind::from_name(k.name()), Some(k));
        }
    }
}
