use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::Dyadic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RoundingMode {
    #[serde(rename = "RNE")]
    Rne,
    #[serde(rename = "RZ")]
    Rz,
    #[serde(rename = "RU")]
    Ru,
    #[serde(rename = "RD")]
    Rd,
    /// Drop bits beyond the boundary. On a sign-magnitude value this is
    /// value-identical to `Rz`, but probes report it under its own name.
    #[serde(rename = "TruncateMagnitude")]
    TruncateMagnitude,
}

impl RoundingMode {
    pub const ALL: [RoundingMode; 5] = [
        RoundingMode::Rne,
        RoundingMode::Rz,
        RoundingMode::Ru,
        RoundingMode::Rd,
        RoundingMode::TruncateMagnitude,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RoundingMode::Rne => "RNE",
            RoundingMode::Rz => "RZ",
            RoundingMode::Ru => "RU",
            RoundingMode::Rd => "RD",
            RoundingMode::TruncateMagnitude => "TruncateMagnitude",
        }
    }

    /// Whether the magnitude of a value with the given sign moves up when
    /// bits are discarded, given the discarded fraction relative to one unit
    /// and the parity of the retained units.
    fn rounds_away(self, negative: bool, rem: &BigUint, half: &BigUint, odd: bool) -> bool {
        if rem.is_zero() {
            return false;
        }
        match self {
            RoundingMode::Rz | RoundingMode::TruncateMagnitude => false,
            RoundingMode::Ru => !negative,
            RoundingMode::Rd => negative,
            RoundingMode::Rne => rem > half || (rem == half && odd),
        }
    }
}

impl fmt::Display for RoundingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RoundingMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "RNE" | "RN" => Ok(RoundingMode::Rne),
            "RZ" => Ok(RoundingMode::Rz),
            "RU" => Ok(RoundingMode::Ru),
            "RD" => Ok(RoundingMode::Rd),
            "TruncateMagnitude" | "Truncate" => Ok(RoundingMode::TruncateMagnitude),
            other => Err(format!("unknown rounding mode `{other}`")),
        }
    }
}

/// Round `v` to an integer multiple of `2^quantum`. Returns the rounded value
/// and whether anything was discarded.
pub fn round_to_quantum(v: &Dyadic, quantum: i64, rm: RoundingMode) -> (Dyadic, bool) {
    if v.is_zero() || v.exponent() >= quantum {
        return (v.clone(), false);
    }
    let shift = (quantum - v.exponent()) as u64;
    let sig = v.significand();
    let kept = sig >> shift;
    let rem = sig - (&kept << shift);
    let half = BigUint::one() << (shift - 1);
    let odd = kept.bit(0);
    let kept = if rm.rounds_away(v.is_negative(), &rem, &half, odd) {
        kept + 1u32
    } else {
        kept
    };
    let inexact = !rem.is_zero();
    (Dyadic::from_parts(v.is_negative(), kept, quantum), inexact)
}

/// Round `v` so that its significand fits in `p` bits.
pub fn round_to_precision(v: &Dyadic, p: u32, rm: RoundingMode) -> Dyadic {
    assert!(p >= 1, "precision must be at least one bit");
    match v.lead_exponent() {
        None => Dyadic::zero(),
        Some(lead) => round_to_quantum(v, lead - p as i64 + 1, rm).0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(exps: &[i64]) -> Dyadic {
        Dyadic::sum_of_pow2(exps)
    }

    #[test]
    fn worked_examples() {
        // 1 + 2^-23 + 1.5*2^-24
        let v = d(&[0, -23, -24, -25]);
        assert_eq!(round_to_precision(&v, 24, RoundingMode::Rne), d(&[0, -22]));
        assert_eq!(
            round_to_precision(&v, 24, RoundingMode::TruncateMagnitude),
            d(&[0, -23])
        );
        let w = -(Dyadic::from_i64(2) - Dyadic::pow2(-27));
        assert_eq!(
            round_to_precision(&w, 24, RoundingMode::Rne),
            Dyadic::from_i64(-2)
        );
    }

    #[test]
    fn ties() {
        let tie = d(&[0, -24]);
        assert_eq!(round_to_precision(&tie, 24, RoundingMode::Rne), Dyadic::one());
        assert_eq!(round_to_precision(&tie, 24, RoundingMode::Ru), d(&[0, -23]));
        assert_eq!(
            round_to_precision(&-tie.clone(), 24, RoundingMode::Ru),
            -Dyadic::one()
        );
        assert_eq!(
            round_to_precision(&-tie, 24, RoundingMode::Rd),
            -d(&[0, -23])
        );
        let odd_tie = d(&[0, -23, -24]);
        assert_eq!(round_to_precision(&odd_tie, 24, RoundingMode::Rne), d(&[0, -22]));
    }

    #[test]
    fn carry_out_of_precision() {
        let v = Dyadic::from_i64(2) - Dyadic::pow2(-30);
        assert_eq!(round_to_precision(&v, 24, RoundingMode::Ru), Dyadic::from_i64(2));
        assert_eq!(round_to_precision(&Dyadic::zero(), 3, RoundingMode::Ru), Dyadic::zero());
    }

    #[test]
    fn names_parse() {
        for rm in RoundingMode::ALL {
            assert_eq!(rm.name().parse::<RoundingMode>().unwrap(), rm);
        }
        assert_eq!("Truncate".parse::<RoundingMode>().unwrap(), RoundingMode::TruncateMagnitude);
        assert!("nearest".parse::<RoundingMode>().is_err());
    }
}
