//! Radical inverses and the 2D Halton sequence.
//!
//! For an index `i = a_0 + a_1 b + ... + a_m b^m` the radical inverse in base
//! `b` mirrors the digits across the radix point:
//! `phi_b(i) = a_0 / b + a_1 / b^2 + ... + a_m / b^(m+1)`.
//!
//! Two routes are provided. [`radical_inverse`] evaluates the digit reversal
//! directly for one index; [`RadicalInverseIter`] walks consecutive indices
//! with the classic incremental numerator/denominator update, which is what
//! [`halton_2d`] uses for bulk generation. Both carry the exact value as an
//! integer fraction `numer / b^m` and convert to `f64` with one division, so
//! they agree bit for bit.
//!
//! Indices start at 1. Index 0 (which maps to 0) is not part of the sequence.

use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::math::gcd;

/// Base of a radical inverse, at least 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RadixBase(u32);

impl RadixBase {
    pub const TWO: RadixBase = RadixBase(2);
    pub const THREE: RadixBase = RadixBase(3);

    pub fn new(base: u32) -> Result<Self> {
        if base < 2 {
            return Err(Error::invalid(alloc::format!(
                "radix base must be >= 2, got {base}"
            )));
        }
        Ok(RadixBase(base))
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

/// An exact non-negative fraction, always stored in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fraction {
    numer: u128,
    denom: u128,
}

impl Fraction {
    pub fn new(numer: u128, denom: u128) -> Result<Self> {
        if denom == 0 {
            return Err(Error::invalid("fraction with zero denominator"));
        }
        let g = gcd(numer, denom).max(1);
        Ok(Fraction {
            numer: numer / g,
            denom: denom / g,
        })
    }

    pub fn numer(&self) -> u128 {
        self.numer
    }

    pub fn denom(&self) -> u128 {
        self.denom
    }

    pub fn to_f64(self) -> f64 {
        self.numer as f64 / self.denom as f64
    }

    /// `floor(self * k)`, computed without rounding.
    pub fn floor_mul(self, k: u128) -> Option<u128> {
        Some(self.numer.checked_mul(k)? / self.denom)
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer, self.denom)
    }
}

/// Digit reversal of `i` as an unreduced pair `(numer, b^m)`, `m` = digit count.
fn reversed_digits(i: u64, base: RadixBase) -> Result<(u128, u128)> {
    if i == 0 {
        return Err(Error::invalid("radical inverse index must be >= 1"));
    }
    let b = base.0 as u128;
    let mut rest = i as u128;
    let mut numer: u128 = 0;
    let mut denom: u128 = 1;
    while rest > 0 {
        numer = numer
            .checked_mul(b)
            .and_then(|n| n.checked_add(rest % b))
            .ok_or_else(|| Error::invalid("radical inverse overflows 128-bit fraction"))?;
        denom = denom
            .checked_mul(b)
            .ok_or_else(|| Error::invalid("radical inverse overflows 128-bit fraction"))?;
        rest /= b;
    }
    Ok((numer, denom))
}

/// `phi_b(i)` in binary floating point.
pub fn radical_inverse(i: u64, base: RadixBase) -> Result<f64> {
    let (numer, denom) = reversed_digits(i, base)?;
    Ok(numer as f64 / denom as f64)
}

/// `phi_b(i)` as an exact fraction.
pub fn radical_inverse_exact(i: u64, base: RadixBase) -> Result<Fraction> {
    let (numer, denom) = reversed_digits(i, base)?;
    Fraction::new(numer, denom)
}

/// Incremental generator of `phi_b(1), phi_b(2), ...`.
///
/// Each step updates the current numerator `n` and denominator `d` in place:
/// when `d - n == 1` the next value opens a new digit (`n = 1`, `d *= b`),
/// otherwise the carry is located by repeatedly dividing `d / b` until it
/// drops below `d - n`.
#[derive(Debug, Clone)]
pub struct RadicalInverseIter {
    base: u128,
    numer: u128,
    denom: u128,
}

impl RadicalInverseIter {
    pub fn new(base: RadixBase) -> Self {
        RadicalInverseIter {
            base: base.0 as u128,
            numer: 0,
            denom: 1,
        }
    }

    /// Advances and returns the raw `(numer, denom)` pair, `denom = b^m`.
    fn advance(&mut self) -> Option<(u128, u128)> {
        let x = self.denom - self.numer;
        if x == 1 {
            self.numer = 1;
            self.denom = self.denom.checked_mul(self.base)?;
        } else {
            let mut y = self.denom / self.base;
            while y >= x {
                y /= self.base;
            }
            self.numer = (self.base + 1) * y - x;
        }
        Some((self.numer, self.denom))
    }

    pub fn next_f64(&mut self) -> Option<f64> {
        self.advance().map(|(n, d)| n as f64 / d as f64)
    }
}

impl Iterator for RadicalInverseIter {
    type Item = Fraction;

    fn next(&mut self) -> Option<Fraction> {
        let (n, d) = self.advance()?;
        Fraction::new(n, d).ok()
    }
}

/// A point of the 2D Halton sequence: `x` on the base-2 axis, `y` on base 3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HaltonPoint2D {
    pub x: f64,
    pub y: f64,
}

impl HaltonPoint2D {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&x) || !(0.0..1.0).contains(&y) {
            return Err(Error::invalid(alloc::format!(
                "point ({x}, {y}) outside [0,1)^2"
            )));
        }
        Ok(HaltonPoint2D { x, y })
    }
}

/// Exact counterpart of [`HaltonPoint2D`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactPoint2D {
    pub x: Fraction,
    pub y: Fraction,
}

/// The first `n_h` points of the 2D Halton sequence, in order.
#[derive(Debug, Clone, PartialEq)]
pub struct HaltonSequence2D {
    points: Vec<HaltonPoint2D>,
}

impl HaltonSequence2D {
    pub fn points(&self) -> &[HaltonPoint2D] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<HaltonPoint2D> {
        self.points
    }
}

/// Endless 2D Halton stream (bases 2 and 3) in floating point.
#[derive(Debug, Clone)]
pub struct Halton2DIter {
    x: RadicalInverseIter,
    y: RadicalInverseIter,
}

impl Halton2DIter {
    pub fn new() -> Self {
        Halton2DIter {
            x: RadicalInverseIter::new(RadixBase::TWO),
            y: RadicalInverseIter::new(RadixBase::THREE),
        }
    }
}

impl Default for Halton2DIter {
    fn default() -> Self {
        Self::new()
    }
}

impl Iterator for Halton2DIter {
    type Item = HaltonPoint2D;

    fn next(&mut self) -> Option<HaltonPoint2D> {
        Some(HaltonPoint2D {
            x: self.x.next_f64()?,
            y: self.y.next_f64()?,
        })
    }
}

/// Endless 2D Halton stream with exact coordinates.
#[derive(Debug, Clone)]
pub struct ExactHalton2DIter {
    x: RadicalInverseIter,
    y: RadicalInverseIter,
}

impl ExactHalton2DIter {
    pub fn new() -> Self {
        ExactHalton2DIter {
            x: RadicalInverseIter::new(RadixBase::TWO),
            y: RadicalInverseIter::new(RadixBase::THREE),
        }
    }
}

impl Default for ExactHalton2DIter {
    fn default() -> Self {
        Self::new()
    }
}

impl Iterator for ExactHalton2DIter {
    type Item = ExactPoint2D;

    fn next(&mut self) -> Option<ExactPoint2D> {
        Some(ExactPoint2D {
            x: self.x.next()?,
            y: self.y.next()?,
        })
    }
}

/// `[(phi_2(1), phi_3(1)), ..., (phi_2(n_h), phi_3(n_h))]`.
pub fn halton_2d(n_h: usize) -> Result<HaltonSequence2D> {
    if n_h == 0 {
        return Err(Error::invalid("halton_2d needs n_h >= 1"));
    }
    let points: Vec<_> = Halton2DIter::new().take(n_h).collect();
    if points.len() != n_h {
        return Err(Error::internal("Halton generator overflowed"));
    }
    Ok(HaltonSequence2D { points })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frac(n: u128, d: u128) -> Fraction {
        Fraction::new(n, d).unwrap()
    }

    #[test]
    fn radical_inverse_examples() {
        assert_eq!(
            radical_inverse_exact(1, RadixBase::TWO).unwrap(),
            frac(1, 2)
        );
        assert_eq!(
            radical_inverse_exact(4, RadixBase::TWO).unwrap(),
            frac(1, 8)
        );
        assert_eq!(
            radical_inverse_exact(5, RadixBase::THREE).unwrap(),
            frac(7, 9)
        );
        assert_eq!(radical_inverse(1, RadixBase::TWO).unwrap(), 0.5);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(RadixBase::new(1).is_err());
        assert!(RadixBase::new(0).is_err());
        assert!(radical_inverse(0, RadixBase::TWO).is_err());
        assert!(halton_2d(0).is_err());
    }

    #[test]
    fn halton_prefixes() {
        let seq = halton_2d(4).unwrap();
        let p = seq.points();
        assert_eq!(
            p[0],
            HaltonPoint2D {
                x: 0.5,
                y: 1.0 / 3.0
            }
        );
        assert_eq!(
            p[1],
            HaltonPoint2D {
                x: 0.25,
                y: 2.0 / 3.0
            }
        );
        assert_eq!(
            p[3],
            HaltonPoint2D {
                x: 0.125,
                y: 4.0 / 9.0
            }
        );
        assert_eq!(halton_2d(1).unwrap().points(), &p[..1]);
    }

    #[test]
    fn incremental_matches_direct_in_odd_bases() {
        for b in [2u32, 3, 5, 7, 10] {
            let base = RadixBase::new(b).unwrap();
            let mut it = RadicalInverseIter::new(base);
            for i in 1..=2000u64 {
                let (n, d) = it.advance().unwrap();
                assert_eq!(
                    (n, d),
                    reversed_digits(i, base).unwrap(),
                    "base {b} index {i}"
                );
            }
        }
    }

    #[test]
    fn floor_mul_is_exact() {
        assert_eq!(frac(2, 3).floor_mul(3), Some(2));
        assert_eq!(frac(1, 3).floor_mul(2), Some(0));
        assert_eq!(frac(4, 9).floor_mul(9), Some(4));
    }
}
