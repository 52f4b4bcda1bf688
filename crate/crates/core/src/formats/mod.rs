//! Floating-point format descriptors and bit-exact conversion between
//! encodings and exact [`Dyadic`] values.

mod dyadic;
mod round;

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dyadic::Dyadic;
pub use round::{round_to_precision, round_to_quantum, RoundingMode};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("unknown format `{0}`")]
    UnknownFormat(String),
    #[error("invalid format description: {0}")]
    InvalidFormat(String),
    #[error("bad hex `{text}` for {format}: {reason}")]
    BadHex {
        text: String,
        format: String,
        reason: String,
    },
}

/// A binary interchange-style floating-point format.
///
/// Fields are laid out sign, exponent, fraction from the most significant
/// bit down; any storage bits left over (TensorFloat32 in a 32-bit word) sit
/// below the fraction, are written as zero and ignored on read.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FpFormat {
    pub name: String,
    /// Significand bits including the implicit bit.
    pub precision: u32,
    pub exp_bits: u32,
    pub storage_bits: u32,
    pub subnormals: bool,
}

const BUILTIN: [(&str, u32, u32, u32); 5] = [
    ("binary16", 11, 5, 16),
    ("bfloat16", 8, 8, 16),
    ("TensorFloat32", 11, 8, 32),
    ("binary32", 24, 8, 32),
    ("binary64", 53, 11, 64),
];

impl FpFormat {
    pub fn new(
        name: &str,
        precision: u32,
        exp_bits: u32,
        storage_bits: u32,
        subnormals: bool,
    ) -> Result<Self, FormatError> {
        if precision < 2 || exp_bits < 2 {
            return Err(FormatError::InvalidFormat(format!(
                "{name}: precision and exponent width must be at least 2"
            )));
        }
        if storage_bits < exp_bits + precision || storage_bits > 64 || exp_bits > 20 {
            return Err(FormatError::InvalidFormat(format!(
                "{name}: {storage_bits} storage bits cannot hold 1+{exp_bits}+{}",
                precision - 1
            )));
        }
        Ok(FpFormat {
            name: name.to_string(),
            precision,
            exp_bits,
            storage_bits,
            subnormals,
        })
    }

    /// The registered formats, in a fixed order.
    pub fn builtin() -> Vec<FpFormat> {
        BUILTIN
            .iter()
            .map(|&(n, p, e, s)| FpFormat::new(n, p, e, s, true).expect("builtin format"))
            .collect()
    }

    pub fn by_name(name: &str) -> Result<FpFormat, FormatError> {
        BUILTIN
            .iter()
            .find(|b| b.0 == name)
            .map(|&(n, p, e, s)| FpFormat::new(n, p, e, s, true).expect("builtin format"))
            .ok_or_else(|| FormatError::UnknownFormat(name.to_string()))
    }

    pub fn binary16() -> Self {
        Self::by_name("binary16").unwrap()
    }
    pub fn bfloat16() -> Self {
        Self::by_name("bfloat16").unwrap()
    }
    pub fn tf32() -> Self {
        Self::by_name("TensorFloat32").unwrap()
    }
    pub fn binary32() -> Self {
        Self::by_name("binary32").unwrap()
    }
    pub fn binary64() -> Self {
        Self::by_name("binary64").unwrap()
    }

    pub fn emax(&self) -> i64 {
        (1i64 << (self.exp_bits - 1)) - 1
    }

    pub fn emin(&self) -> i64 {
        1 - self.emax()
    }

    fn frac_bits(&self) -> u32 {
        self.precision - 1
    }

    fn padding_bits(&self) -> u32 {
        self.storage_bits - self.exp_bits - self.precision
    }

    pub fn hex_width(&self) -> usize {
        self.storage_bits.div_ceil(4) as usize
    }

    fn storage_mask(&self) -> u64 {
        if self.storage_bits == 64 {
            u64::MAX
        } else {
            (1u64 << self.storage_bits) - 1
        }
    }

    pub fn max_finite(&self) -> Dyadic {
        let sig = (BigUint::one() << self.precision) - 1u32;
        Dyadic::from_parts(false, sig, self.emax() - self.frac_bits() as i64)
    }

    pub fn min_normal(&self) -> Dyadic {
        Dyadic::pow2(self.emin())
    }

    /// Smallest positive value: the least subnormal, or the least normal
    /// when subnormals are not supported.
    pub fn min_positive(&self) -> Dyadic {
        if self.subnormals {
            Dyadic::pow2(self.emin() - self.frac_bits() as i64)
        } else {
            self.min_normal()
        }
    }

    /// Whether `v` is a finite value of this format (no rounding needed).
    pub fn represents(&self, v: &Dyadic) -> bool {
        let (r, flags) = round_to_format(v, self, RoundingMode::Rz);
        !flags.inexact && !flags.overflow && r == Value::Num(v.clone())
    }

    pub fn is_subnormal(&self, v: &Dyadic) -> bool {
        matches!(v.lead_exponent(), Some(l) if l < self.emin())
    }
}

impl fmt::Display for FpFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Special {
    NaN,
    PosInf,
    NegInf,
}

/// A decoded floating-point datum. Negative zero is kept apart from the
/// canonical (positive) dyadic zero so that encodings round-trip.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value {
    Num(Dyadic),
    NegZero,
    Special(Special),
}

impl Value {
    pub fn zero() -> Self {
        Value::Num(Dyadic::zero())
    }

    pub fn as_dyadic(&self) -> Option<Dyadic> {
        match self {
            Value::Num(d) => Some(d.clone()),
            Value::NegZero => Some(Dyadic::zero()),
            Value::Special(_) => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Value::Num(d) => d.is_zero(),
            Value::NegZero => true,
            Value::Special(_) => false,
        }
    }

    pub fn is_negative(&self) -> bool {
        match self {
            Value::Num(d) => d.is_negative(),
            Value::NegZero => true,
            Value::Special(s) => *s == Special::NegInf,
        }
    }

    pub fn neg(&self) -> Value {
        match self {
            Value::Num(d) if d.is_zero() => Value::NegZero,
            Value::Num(d) => Value::Num(-d),
            Value::NegZero => Value::zero(),
            Value::Special(Special::PosInf) => Value::Special(Special::NegInf),
            Value::Special(Special::NegInf) => Value::Special(Special::PosInf),
            Value::Special(Special::NaN) => Value::Special(Special::NaN),
        }
    }

    pub fn abs(&self) -> Value {
        if self.is_negative() {
            self.neg()
        } else {
            self.clone()
        }
    }

    /// Signed zero with the given sign.
    pub fn signed_zero(negative: bool) -> Value {
        if negative {
            Value::NegZero
        } else {
            Value::zero()
        }
    }
}

impl From<Dyadic> for Value {
    fn from(d: Dyadic) -> Self {
        Value::Num(d)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(d) => write!(f, "{d}"),
            Value::NegZero => write!(f, "-0"),
            Value::Special(Special::NaN) => write!(f, "NaN"),
            Value::Special(Special::PosInf) => write!(f, "+Inf"),
            Value::Special(Special::NegInf) => write!(f, "-Inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Flags {
    pub inexact: bool,
    pub overflow: bool,
    pub underflow_flush: bool,
}

/// Round an exact value into `fmt`'s finite range under `rm`, handling
/// subnormals, flush-to-zero and overflow. This is the shared kernel of
/// [`encode`] and the simulator's final rounding.
pub fn round_to_format(v: &Dyadic, fmt: &FpFormat, rm: RoundingMode) -> (Value, Flags) {
    let mut flags = Flags::default();
    let Some(lead) = v.lead_exponent() else {
        return (Value::zero(), flags);
    };
    let negative = v.is_negative();
    if lead < fmt.emin() && !fmt.subnormals {
        flags.underflow_flush = true;
        flags.inexact = true;
        return (Value::signed_zero(negative), flags);
    }
    let quantum = lead.max(fmt.emin()) - fmt.frac_bits() as i64;
    let (r, inexact) = round_to_quantum(v, quantum, rm);
    flags.inexact = inexact;
    if r.is_zero() {
        return (Value::signed_zero(negative), flags);
    }
    if r.lead_exponent().unwrap() > fmt.emax() {
        flags.overflow = true;
        flags.inexact = true;
        let to_inf = match rm {
            RoundingMode::Rne => true,
            RoundingMode::Ru => !negative,
            RoundingMode::Rd => negative,
            RoundingMode::Rz | RoundingMode::TruncateMagnitude => false,
        };
        let out = if to_inf {
            Value::Special(if negative {
                Special::NegInf
            } else {
                Special::PosInf
            })
        } else {
            Value::Num(fmt.max_finite().with_sign(negative))
        };
        return (out, flags);
    }
    if !fmt.subnormals && r.lead_exponent().unwrap() < fmt.emin() {
        flags.underflow_flush = true;
        flags.inexact = true;
        return (Value::signed_zero(negative), flags);
    }
    (Value::Num(r), flags)
}

/// Exact value of an encoding. Bits above `storage_bits` and padding bits
/// are ignored.
pub fn decode(bits: u64, fmt: &FpFormat) -> Value {
    let bits = (bits & fmt.storage_mask()) >> fmt.padding_bits();
    let f = fmt.frac_bits();
    let frac = bits & ((1u64 << f) - 1);
    let exp_field = (bits >> f) & ((1u64 << fmt.exp_bits) - 1);
    let negative = (bits >> (f + fmt.exp_bits)) & 1 == 1;
    let all_ones = (1u64 << fmt.exp_bits) - 1;
    if exp_field == all_ones {
        return if frac != 0 {
            Value::Special(Special::NaN)
        } else if negative {
            Value::Special(Special::NegInf)
        } else {
            Value::Special(Special::PosInf)
        };
    }
    let (sig, exp) = if exp_field == 0 {
        if !fmt.subnormals {
            return Value::signed_zero(negative);
        }
        (frac, fmt.emin() - f as i64)
    } else {
        (frac | (1u64 << f), exp_field as i64 - fmt.emax() - f as i64)
    };
    if sig == 0 {
        return Value::signed_zero(negative);
    }
    Value::Num(Dyadic::from_parts(negative, BigUint::from(sig), exp))
}

fn pack(negative: bool, exp_field: u64, frac: u64, fmt: &FpFormat) -> u64 {
    let f = fmt.frac_bits();
    let word = ((negative as u64) << (f + fmt.exp_bits)) | (exp_field << f) | frac;
    word << fmt.padding_bits()
}

/// Round `v` into `fmt` and return its encoding. NaN payloads are
/// canonicalised to a single positive quiet NaN.
pub fn encode(v: &Value, fmt: &FpFormat, rm: RoundingMode) -> (u64, Flags) {
    let f = fmt.frac_bits();
    let all_ones = (1u64 << fmt.exp_bits) - 1;
    let (rounded, flags) = match v {
        Value::Num(d) => round_to_format(d, fmt, rm),
        other => (other.clone(), Flags::default()),
    };
    let bits = match rounded {
        Value::Special(Special::NaN) => pack(false, all_ones, 1u64 << (f - 1), fmt),
        Value::Special(Special::PosInf) => pack(false, all_ones, 0, fmt),
        Value::Special(Special::NegInf) => pack(true, all_ones, 0, fmt),
        Value::NegZero => pack(true, 0, 0, fmt),
        Value::Num(d) if d.is_zero() => pack(false, 0, 0, fmt),
        Value::Num(d) => {
            let lead = d.lead_exponent().unwrap();
            if lead < fmt.emin() {
                let units = d
                    .units_of(fmt.emin() - f as i64)
                    .and_then(|u| u.to_u64())
                    .expect("rounded subnormal fits");
                pack(d.is_negative(), 0, units, fmt)
            } else {
                let units = d
                    .units_of(lead - f as i64)
                    .and_then(|u| u.to_u64())
                    .expect("rounded normal fits");
                let frac = units & ((1u64 << f) - 1);
                pack(d.is_negative(), (lead + fmt.emax()) as u64, frac, fmt)
            }
        }
    };
    (bits, flags)
}

/// Lowercase hex, most significant nibble first, `storage_bits / 4` digits.
pub fn to_hex(bits: u64, fmt: &FpFormat) -> String {
    format!("{:0width$x}", bits & fmt.storage_mask(), width = fmt.hex_width())
}

pub fn parse_hex(text: &str, fmt: &FpFormat) -> Result<u64, FormatError> {
    let err = |reason: &str| FormatError::BadHex {
        text: text.chars().take(40).collect(),
        format: fmt.name.clone(),
        reason: reason.to_string(),
    };
    if text.len() != fmt.hex_width() {
        return Err(err(&format!("expected {} hex digits", fmt.hex_width())));
    }
    if !text.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(err("not a hex number"));
    }
    let v = u64::from_str_radix(text, 16).map_err(|e| err(&e.to_string()))?;
    if v & !fmt.storage_mask() != 0 {
        return Err(err("value wider than the format"));
    }
    Ok(v)
}

/// Encode a value that must be exactly representable (probe operands).
pub fn encode_exact(v: &Value, fmt: &FpFormat) -> Option<u64> {
    let (bits, flags) = encode(v, fmt, RoundingMode::Rne);
    if flags.inexact || flags.overflow || flags.underflow_flush {
        None
    } else {
        Some(bits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn num(x: f64) -> Value {
        Value::Num(Dyadic::from_f64(x).unwrap())
    }

    #[test]
    fn registry() {
        let names: Vec<_> = FpFormat::builtin().into_iter().map(|f| f.name).collect();
        assert_eq!(
            names,
            ["binary16", "bfloat16", "TensorFloat32", "binary32", "binary64"]
        );
        let h = FpFormat::binary16();
        assert_eq!((h.emin(), h.emax()), (-14, 15));
        assert!(FpFormat::by_name("fp8").is_err());
        assert!(FpFormat::new("bad", 24, 8, 16, true).is_err());
        assert!(FpFormat::new("bad", 1, 8, 16, true).is_err());
    }

    #[test]
    fn decode_examples() {
        assert_eq!(decode(0x3c00, &FpFormat::binary16()), num(1.0));
        assert_eq!(
            decode(0x0001, &FpFormat::binary16()),
            Value::Num(Dyadic::pow2(-24))
        );
        assert_eq!(
            decode(0x3f80_0001, &FpFormat::binary32()),
            Value::Num(Dyadic::sum_of_pow2(&[0, -23]))
        );
        assert_eq!(decode(0x8000, &FpFormat::binary16()), Value::NegZero);
        assert_eq!(decode(0x7c00, &FpFormat::binary16()), Value::Special(Special::PosInf));
        assert_eq!(decode(0x7e01, &FpFormat::binary16()), Value::Special(Special::NaN));
    }

    #[test]
    fn decode_agrees_with_native_binary32() {
        for bits in [0u32, 1, 0x0080_0000, 0x3f80_0001, 0xc2f6_e979, 0x7f7f_ffff, 0x8000_0001] {
            let native = f32::from_bits(bits) as f64;
            assert_eq!(
                decode(bits as u64, &FpFormat::binary32()).as_dyadic().unwrap(),
                Dyadic::from_f64(native).unwrap()
            );
        }
    }

    #[test]
    fn tf32_padding() {
        let tf = FpFormat::tf32();
        assert_eq!(decode(0x3f80_0000, &tf), num(1.0));
        assert_eq!(decode(0x3f80_1fff, &tf), num(1.0));
        assert_eq!(decode(0x3f80_2000, &tf), Value::Num(Dyadic::sum_of_pow2(&[0, -10])));
        let (bits, _) = encode(&num(1.0), &tf, RoundingMode::Rne);
        assert_eq!(bits, 0x3f80_0000);
    }

    #[test]
    fn encode_examples() {
        let b32 = FpFormat::binary32();
        let v = Value::Num(Dyadic::sum_of_pow2(&[0, -24]));
        let (bits, flags) = encode(&v, &b32, RoundingMode::Rne);
        assert_eq!(bits, 0x3f80_0000);
        assert!(flags.inexact);
        let (bits, _) = encode(&v, &b32, RoundingMode::Ru);
        assert_eq!(bits, 0x3f80_0001);
        let w = Value::Num(Dyadic::from_i64(2) - Dyadic::pow2(-10));
        for rm in RoundingMode::ALL {
            let (bits, flags) = encode(&w, &FpFormat::binary16(), rm);
            assert_eq!(bits, 0x3fff);
            assert!(!flags.inexact);
        }
    }

    #[test]
    fn overflow_rules() {
        let h = FpFormat::binary16();
        let big = Value::Num(Dyadic::from_i64(70000));
        assert_eq!(encode(&big, &h, RoundingMode::Rne).0, 0x7c00);
        assert_eq!(encode(&big, &h, RoundingMode::Ru).0, 0x7c00);
        assert_eq!(encode(&big, &h, RoundingMode::Rz).0, 0x7bff);
        assert_eq!(encode(&big, &h, RoundingMode::Rd).0, 0x7bff);
        assert_eq!(encode(&big.neg(), &h, RoundingMode::Rd).0, 0xfc00);
        assert_eq!(encode(&big.neg(), &h, RoundingMode::Ru).0, 0xfbff);
        assert!(encode(&big, &h, RoundingMode::TruncateMagnitude).1.overflow);
    }

    #[test]
    fn flush_without_subnormals() {
        let ftz = FpFormat::new("b16ftz", 11, 5, 16, false).unwrap();
        let (bits, flags) = encode(&Value::Num(Dyadic::pow2(-20)), &ftz, RoundingMode::Rne);
        assert_eq!(bits, 0);
        assert!(flags.underflow_flush);
        assert_eq!(decode(0x0001, &ftz), Value::zero());
    }

    #[test]
    fn tiny_negative_rounds_to_negative_zero() {
        let h = FpFormat::binary16();
        let (bits, flags) = encode(&Value::Num(-Dyadic::pow2(-40)), &h, RoundingMode::Rne);
        assert_eq!(bits, 0x8000);
        assert!(flags.inexact);
    }

    #[test]
    fn hex_text() {
        let h = FpFormat::binary16();
        assert_eq!(to_hex(0x3c00, &h), "3c00");
        assert_eq!(parse_hex("3C00", &h).unwrap(), 0x3c00);
        assert!(parse_hex("3c0", &h).is_err());
        assert!(parse_hex("3g00", &h).is_err());
        assert!(parse_hex("+c00", &h).is_err());
        assert_eq!(to_hex(0x3f80_0000, &FpFormat::tf32()), "3f800000");
    }
}
