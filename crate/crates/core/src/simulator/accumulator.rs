//! Fixed-point alignment grid shared by all addends of one block.

use num_bigint::{BigInt, Sign};
use num_traits::{One, Signed, Zero};

use super::config::{AlignmentPolicy, CarryOverflow};
use super::SimError;
use crate::formats::{round_to_quantum, Dyadic};

/// Integer accumulator in units of `2^quantum`, where the quantum sits
/// `precision - 1 + n_eab` bits below the largest addend's leading bit.
#[derive(Debug, Clone)]
pub struct Accumulator {
    quantum: i64,
    /// `|sum|` must stay below `2^headroom_bits` units.
    headroom_bits: u64,
    units: BigInt,
}

impl Accumulator {
    /// `None` when every addend is zero.
    pub fn for_addends(addends: &[Dyadic], precision: u32, n_eab: u32, n_ecb: u32) -> Option<Self> {
        let lead = addends.iter().filter_map(Dyadic::lead_exponent).max()?;
        Some(Accumulator {
            quantum: lead - (precision as i64 - 1 + n_eab as i64),
            headroom_bits: (precision + n_eab + n_ecb) as u64,
            units: BigInt::zero(),
        })
    }

    pub fn quantum(&self) -> i64 {
        self.quantum
    }

    /// Shift `x` onto the grid, discarding bits per `policy`, and add it.
    pub fn add(&mut self, x: &Dyadic, policy: AlignmentPolicy) {
        let (aligned, _) = round_to_quantum(x, self.quantum, policy.as_rounding());
        let mag = aligned
            .units_of(self.quantum)
            .expect("aligned value lies on the grid");
        let sign = if aligned.is_negative() { Sign::Minus } else { Sign::Plus };
        self.units += BigInt::from_biguint(sign, mag);
    }

    /// Exact grid sum with the headroom enforced per `overflow`.
    pub fn finish(self, overflow: CarryOverflow) -> Result<Dyadic, SimError> {
        let limit = BigInt::one() << self.headroom_bits;
        let units = if self.units.abs() < limit {
            self.units
        } else {
            match overflow {
                CarryOverflow::Error => return Err(SimError::CarryOverflow),
                CarryOverflow::Saturate => {
                    if self.units.is_negative() {
                        -limit.clone()
                    } else {
                        limit - 1
                    }
                }
                CarryOverflow::Wrap => {
                    let modulus = &limit << 1u32;
                    let mut r = ((&self.units % &modulus) + &modulus) % &modulus;
                    if r >= limit {
                        r -= &modulus;
                    }
                    r
                }
            }
        };
        Ok(Self::to_dyadic(&units, self.quantum))
    }

    /// Exact grid sum without a headroom check.
    pub fn finish_unbounded(self) -> Dyadic {
        Self::to_dyadic(&self.units, self.quantum)
    }

    fn to_dyadic(units: &BigInt, quantum: i64) -> Dyadic {
        Dyadic::from_parts(units.is_negative(), units.magnitude().clone(), quantum)
    }
}
