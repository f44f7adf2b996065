//! Exact half-integer quantum numbers.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A half-integer stored as twice its value, so `7/2` is `HalfInt(7)`.
///
/// Serializes as the bare twice-value integer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HalfInt(i32);

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt(0);
    pub const HALF: HalfInt = HalfInt(1);
    pub const ONE: HalfInt = HalfInt(2);

    pub const fn from_twice(twice: i32) -> Self {
        HalfInt(twice)
    }

    pub const fn from_int(value: i32) -> Self {
        HalfInt(2 * value)
    }

    pub const fn twice(self) -> i32 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub const fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }

    pub const fn is_nonneg(self) -> bool {
        self.0 >= 0
    }

    pub const fn abs(self) -> Self {
        HalfInt(self.0.abs())
    }

    /// `j(j+1)`
    pub fn casimir(self) -> f64 {
        let j = self.value();
        j * (j + 1.0)
    }

    /// Multiplet dimension `2j+1`.
    pub fn multiplicity(self) -> usize {
        debug_assert!(self.0 >= 0);
        (self.0 + 1) as usize
    }

    /// Projections `-j, -j+1, ..., j`.
    pub fn projections(self) -> impl Iterator<Item = HalfInt> + Clone {
        (-self.0..=self.0).step_by(2).map(HalfInt)
    }

    /// Whether `m` is a valid projection of `self` (`|m| <= j`, equal parity).
    pub fn admits(self, m: HalfInt) -> bool {
        self.0 >= 0 && m.0.abs() <= self.0 && (self.0 - m.0) % 2 == 0
    }

    /// Clebsch-Gordan series `|j1-j2|, ..., j1+j2`.
    pub fn coupled_range(j1: HalfInt, j2: HalfInt) -> impl Iterator<Item = HalfInt> + Clone {
        ((j1.0 - j2.0).abs()..=j1.0 + j2.0).step_by(2).map(HalfInt)
    }

    pub fn triangle(j1: HalfInt, j2: HalfInt, j3: HalfInt) -> bool {
        j3.0 >= (j1.0 - j2.0).abs() && j3.0 <= j1.0 + j2.0 && (j1.0 + j2.0 + j3.0) % 2 == 0
    }
}

impl PartialOrd for HalfInt {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HalfInt {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.cmp(&other.0)
    }
}

impl Add for HalfInt {
    type Output = HalfInt;
    fn add(self, rhs: HalfInt) -> HalfInt {
        HalfInt(self.0 + rhs.0)
    }
}

impl Sub for HalfInt {
    type Output = HalfInt;
    fn sub(self, rhs: HalfInt) -> HalfInt {
        HalfInt(self.0 - rhs.0)
    }
}

impl Neg for HalfInt {
    type Output = HalfInt;
    fn neg(self) -> HalfInt {
        HalfInt(-self.0)
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_and_value() {
        assert_eq!(HalfInt::from_twice(7).to_string(), "7/2");
        assert_eq!(HalfInt::from_twice(-4).to_string(), "-2");
        assert_eq!(HalfInt::from_twice(7).value(), 3.5);
        assert_eq!(HalfInt::from_twice(3).casimir(), 1.5 * 2.5);
    }

    #[test]
    fn projections_and_parity() {
        let j = HalfInt::from_twice(3);
        let ms: Vec<i32> = j.projections().map(|m| m.twice()).collect();
        assert_eq!(ms, vec![-3, -1, 1, 3]);
        assert!(j.admits(HalfInt::from_twice(-1)));
        assert!(!j.admits(HalfInt::from_twice(0)));
        assert!(!j.admits(HalfInt::from_twice(5)));
    }

    #[test]
    fn coupled_range_is_cg_series() {
        let js: Vec<i32> = HalfInt::coupled_range(HalfInt::from_twice(7), HalfInt::from_twice(7))
            .map(|j| j.twice())
            .collect();
        assert_eq!(js, (0..=14).step_by(2).collect::<Vec<_>>());
        assert!(HalfInt::triangle(HalfInt::ONE, HalfInt::HALF, HalfInt::from_twice(3)));
        assert!(!HalfInt::triangle(HalfInt::ONE, HalfInt::HALF, HalfInt::ONE));
    }

    #[test]
    fn serializes_as_twice_value() {
        let s = serde_json::to_string(&HalfInt::from_twice(7)).unwrap();
        assert_eq!(s, "7");
        let back: HalfInt = serde_json::from_str("-3").unwrap();
        assert_eq!(back, HalfInt::from_twice(-3));
    }
}
