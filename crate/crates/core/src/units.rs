//! Integer picosecond durations.
//!
//! All configured times are held as whole picoseconds so that ns, µs and ps
//! values from different sources never mix silently. Rates stay in `f64` per
//! second.

use core::fmt;
use core::ops::{Add, Neg, Sub};

pub const PS_PER_NS: i64 = 1_000;
pub const PS_PER_US: i64 = 1_000_000;
pub const PS_PER_S: i64 = 1_000_000_000_000;

/// A signed duration in picoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Picos(pub i64);

impl Picos {
    pub const ZERO: Picos = Picos(0);

    pub const fn from_ps(ps: i64) -> Self {
        Picos(ps)
    }

    pub const fn from_ns(ns: i64) -> Self {
        Picos(ns * PS_PER_NS)
    }

    /// Rounds to the nearest picosecond.
    pub fn from_ns_f64(ns: f64) -> Self {
        Picos(libm::round(ns * PS_PER_NS as f64) as i64)
    }

    /// Rounds to the nearest picosecond.
    pub fn from_secs_f64(s: f64) -> Self {
        Picos(libm::round(s * PS_PER_S as f64) as i64)
    }

    pub const fn ps(self) -> i64 {
        self.0
    }

    pub fn as_ns(self) -> f64 {
        self.0 as f64 / PS_PER_NS as f64
    }

    pub fn as_secs(self) -> f64 {
        self.0 as f64 / PS_PER_S as f64
    }

    pub const fn is_negative(self) -> bool {
        self.0 < 0
    }
}

impl Add for Picos {
    type Output = Picos;
    fn add(self, rhs: Picos) -> Picos {
        Picos(self.0 + rhs.0)
    }
}

impl Sub for Picos {
    type Output = Picos;
    fn sub(self, rhs: Picos) -> Picos {
        Picos(self.0 - rhs.0)
    }
}

impl Neg for Picos {
    type Output = Picos;
    fn neg(self) -> Picos {
        Picos(-self.0)
    }
}

impl fmt::Display for Picos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ps", self.0)
    }
}

/// Shifts an absolute timestamp by a signed offset, saturating at zero.
#[inline]
pub fn shift(t: u64, by: i64) -> u64 {
    if by >= 0 {
        t.saturating_add(by as u64)
    } else {
        t.saturating_sub(by.unsigned_abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions_round_to_nearest_ps() {
        assert_eq!(Picos::from_ns_f64(1.525e3).ps(), 1_525_000);
        assert_eq!(Picos::from_secs_f64(600e-12).ps(), 600);
        assert_eq!(Picos::from_ns(260).as_secs(), 260e-9);
    }

    #[test]
    fn shift_saturates() {
        assert_eq!(shift(5, -10), 0);
        assert_eq!(shift(5, 10), 15);
        assert_eq!(shift(u64::MAX, 1), u64::MAX);
    }
}
