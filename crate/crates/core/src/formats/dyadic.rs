//! Exact sign-magnitude dyadic rationals `±m·2^e`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigUint;
use num_traits::{One, Zero};

/// An exact value `(-1)^negative · significand · 2^exponent`.
///
/// Values are kept canonical: the significand is odd, or the value is zero
/// with exponent 0 and a positive sign. Addition, subtraction and
/// multiplication never round.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Dyadic {
    negative: bool,
    significand: BigUint,
    exponent: i64,
}

impl Dyadic {
    pub fn zero() -> Self {
        Dyadic {
            negative: false,
            significand: BigUint::zero(),
            exponent: 0,
        }
    }

    pub fn one() -> Self {
        Dyadic::pow2(0)
    }

    /// `2^j`.
    pub fn pow2(j: i64) -> Self {
        Dyadic {
            negative: false,
            significand: BigUint::one(),
            exponent: j,
        }
    }

    /// Sum of `2^e` over the given exponents (repeats add up).
    pub fn sum_of_pow2(exponents: &[i64]) -> Self {
        exponents
            .iter()
            .fold(Dyadic::zero(), |acc, &e| acc + Dyadic::pow2(e))
    }

    pub fn from_parts(negative: bool, significand: BigUint, exponent: i64) -> Self {
        let mut d = Dyadic {
            negative,
            significand,
            exponent,
        };
        d.canonicalize();
        d
    }

    pub fn from_i64(v: i64) -> Self {
        Dyadic::from_parts(v < 0, BigUint::from(v.unsigned_abs()), 0)
    }

    /// Exact conversion of a finite `f64`; `None` for NaN and infinities.
    pub fn from_f64(x: f64) -> Option<Self> {
        if !x.is_finite() {
            return None;
        }
        let bits = x.to_bits();
        let negative = bits >> 63 == 1;
        let biased = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mant, exp) = if biased == 0 {
            (frac, -1074)
        } else {
            (frac | (1u64 << 52), biased - 1075)
        };
        Some(Dyadic::from_parts(negative, BigUint::from(mant), exp))
    }

    fn canonicalize(&mut self) {
        if self.significand.is_zero() {
            self.negative = false;
            self.exponent = 0;
            return;
        }
        let tz = self.significand.trailing_zeros().unwrap_or(0);
        if tz > 0 {
            self.significand >>= tz;
            self.exponent += tz as i64;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.significand.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.negative
    }

    pub fn significand(&self) -> &BigUint {
        &self.significand
    }

    pub fn exponent(&self) -> i64 {
        self.exponent
    }

    /// Number of bits in the canonical (odd) significand; 0 for zero.
    pub fn width(&self) -> u64 {
        self.significand.bits()
    }

    /// `floor(log2 |v|)`, or `None` for zero.
    pub fn lead_exponent(&self) -> Option<i64> {
        if self.is_zero() {
            None
        } else {
            Some(self.exponent + self.significand.bits() as i64 - 1)
        }
    }

    pub fn abs(&self) -> Self {
        Dyadic {
            negative: false,
            ..self.clone()
        }
    }

    pub fn with_sign(&self, negative: bool) -> Self {
        let mut d = self.clone();
        d.negative = negative && !d.is_zero();
        d
    }

    /// Multiply by `2^shift`.
    pub fn scale(&self, shift: i64) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        Dyadic {
            exponent: self.exponent + shift,
            ..self.clone()
        }
    }

    /// Magnitude as an integer multiple of `2^quantum`, when exactly divisible.
    pub fn units_of(&self, quantum: i64) -> Option<BigUint> {
        if self.is_zero() {
            return Some(BigUint::zero());
        }
        if self.exponent < quantum {
            None
        } else {
            Some(&self.significand << (self.exponent - quantum) as u64)
        }
    }

    /// Lossy conversion, for diagnostics only.
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let bits = self.significand.bits();
        let (top, shift) = if bits > 60 {
            let drop = bits - 60;
            (
                (&self.significand >> drop)
                    .iter_u64_digits()
                    .next()
                    .unwrap_or(0),
                self.exponent + drop as i64,
            )
        } else {
            (
                self.significand.iter_u64_digits().next().unwrap_or(0),
                self.exponent,
            )
        };
        let shift = shift.clamp(-2200, 2200) as i32;
        let v = top as f64 * 2f64.powi(shift / 2) * 2f64.powi(shift - shift / 2);
        if self.negative {
            -v
        } else {
            v
        }
    }

    fn cmp_magnitude(&self, other: &Self) -> Ordering {
        match (self.lead_exponent(), other.lead_exponent()) {
            (None, None) => Ordering::Equal,
            (None, Some(_)) => Ordering::Less,
            (Some(_), None) => Ordering::Greater,
            (Some(a), Some(b)) if a != b => a.cmp(&b),
            _ => {
                let e = self.exponent.min(other.exponent);
                let x = &self.significand << (self.exponent - e) as u64;
                let y = &other.significand << (other.exponent - e) as u64;
                x.cmp(&y)
            }
        }
    }
}

impl Default for Dyadic {
    fn default() -> Self {
        Dyadic::zero()
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.negative, other.negative) {
            (false, true) => Ordering::Greater,
            (true, false) => Ordering::Less,
            (false, false) => self.cmp_magnitude(other),
            (true, true) => other.cmp_magnitude(self),
        }
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Neg for Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        let negative = !self.negative && !self.is_zero();
        Dyadic { negative, ..self }
    }
}

impl Neg for &Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        -(self.clone())
    }
}

impl Add for &Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: &Dyadic) -> Dyadic {
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        let e = self.exponent.min(rhs.exponent);
        let x = &self.significand << (self.exponent - e) as u64;
        let y = &rhs.significand << (rhs.exponent - e) as u64;
        if self.negative == rhs.negative {
            Dyadic::from_parts(self.negative, x + y, e)
        } else {
            match x.cmp(&y) {
                Ordering::Equal => Dyadic::zero(),
                Ordering::Greater => Dyadic::from_parts(self.negative, x - y, e),
                Ordering::Less => Dyadic::from_parts(rhs.negative, y - x, e),
            }
        }
    }
}

impl Add for Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: Dyadic) -> Dyadic {
        &self + &rhs
    }
}

impl Sub for &Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: &Dyadic) -> Dyadic {
        self + &(-rhs)
    }
}

impl Sub for Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: Dyadic) -> Dyadic {
        &self - &rhs
    }
}

impl Mul for &Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: &Dyadic) -> Dyadic {
        Dyadic::from_parts(
            self.negative != rhs.negative,
            &self.significand * &rhs.significand,
            self.exponent + rhs.exponent,
        )
    }
}

impl Mul for Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: Dyadic) -> Dyadic {
        &self * &rhs
    }
}

impl std::iter::Sum for Dyadic {
    fn sum<I: Iterator<Item = Dyadic>>(iter: I) -> Dyadic {
        iter.fold(Dyadic::zero(), |a, b| &a + &b)
    }
}

impl<'a> std::iter::Sum<&'a Dyadic> for Dyadic {
    fn sum<I: Iterator<Item = &'a Dyadic>>(iter: I) -> Dyadic {
        iter.fold(Dyadic::zero(), |a, b| &a + b)
    }
}

impl fmt::Debug for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Renders as `[-]m*2^e`, e.g. `3*2^-2`, and `0` for zero.
impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let sign = if self.negative { "-" } else { "" };
        if self.exponent == 0 {
            write!(f, "{sign}{}", self.significand)
        } else {
            write!(f, "{sign}{}*2^{}", self.significand, self.exponent)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_form() {
        let d = Dyadic::from_parts(false, BigUint::from(12u32), -4);
        assert_eq!(d.significand(), &BigUint::from(3u32));
        assert_eq!(d.exponent(), -2);
        let z = Dyadic::from_parts(true, BigUint::zero(), 17);
        assert_eq!(z, Dyadic::zero());
        assert!(!z.is_negative());
    }

    #[test]
    fn pow2_constructors() {
        assert_eq!(Dyadic::pow2(0), Dyadic::one());
        assert_eq!(
            Dyadic::sum_of_pow2(&[0, -23]),
            Dyadic::from_f64(1.0 + 2f64.powi(-23)).unwrap()
        );
        assert_eq!(Dyadic::sum_of_pow2(&[]), Dyadic::zero());
        assert_eq!(Dyadic::sum_of_pow2(&[-1, -1]), Dyadic::one());
    }

    #[test]
    fn exact_arithmetic() {
        let a = Dyadic::sum_of_pow2(&[0, -10]);
        let sq = &a * &a;
        assert_eq!(sq, Dyadic::sum_of_pow2(&[0, -9, -20]));
        let x = Dyadic::pow2(200) + Dyadic::pow2(-200);
        assert_eq!(&x - &Dyadic::pow2(200), Dyadic::pow2(-200));
        assert_eq!(&x - &x, Dyadic::zero());
        assert_eq!(
            Dyadic::from_i64(3) - Dyadic::from_i64(5),
            Dyadic::from_i64(-2)
        );
    }

    #[test]
    fn ordering_and_lead() {
        let v = [-3.5, -1.0, -0.25, 0.0, 0.125, 1.0, 1.5, 1e9];
        for w in v.windows(2) {
            let a = Dyadic::from_f64(w[0]).unwrap();
            let b = Dyadic::from_f64(w[1]).unwrap();
            assert!(a < b, "{a} < {b}");
        }
        assert_eq!(Dyadic::from_f64(1.5).unwrap().lead_exponent(), Some(0));
        assert_eq!(Dyadic::from_f64(0.75).unwrap().lead_exponent(), Some(-1));
        assert_eq!(Dyadic::zero().lead_exponent(), None);
    }

    #[test]
    fn f64_round_trip() {
        for x in [1.0, -2.5, 1e-310, 3.0e300, 0.1] {
            assert_eq!(Dyadic::from_f64(x).unwrap().to_f64(), x);
        }
    }
}
