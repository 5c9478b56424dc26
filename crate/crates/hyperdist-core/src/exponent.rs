//! Exact rational exponents for the infinitesimal generator.
//!
//! Series exponents are kept as reduced fractions p/q (q > 0) so that
//! support queries, lexicographic comparison, and truncation against a
//! maximum order are exact. Float exponents would make the leading term of
//! a series — and with it the entire classification machinery — ill-defined.

use core::cmp::Ordering;
use core::fmt;
use core::ops::{Add, Neg, Sub};
use core::str::FromStr;

/// A rational exponent p/q in lowest terms, q > 0.
///
/// Arithmetic uses 128-bit intermediates and reduces eagerly; exponents in
/// practice stay tiny (|p|, q ≤ a few hundred), so overflow panics rather
/// than being handled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ExponentQ {
    num: i64,
    den: i64,
}

const fn gcd(mut a: i64, mut b: i64) -> i64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    if a < 0 {
        -a
    } else {
        a
    }
}

impl ExponentQ {
    pub const ZERO: ExponentQ = ExponentQ { num: 0, den: 1 };
    pub const ONE: ExponentQ = ExponentQ { num: 1, den: 1 };

    /// Builds p/q reduced to lowest terms. Panics if `den == 0`.
    pub fn new(num: i64, den: i64) -> ExponentQ {
        assert!(den != 0, "exponent denominator must be nonzero");
        let (num, den) = if den < 0 { (-num, -den) } else { (num, den) };
        if num == 0 {
            return ExponentQ::ZERO;
        }
        let g = gcd(num, den);
        ExponentQ {
            num: num / g,
            den: den / g,
        }
    }

    pub fn from_int(n: i64) -> ExponentQ {
        ExponentQ { num: n, den: 1 }
    }

    pub fn num(&self) -> i64 {
        self.num
    }

    pub fn den(&self) -> i64 {
        self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn is_positive(&self) -> bool {
        self.num > 0
    }

    pub fn is_negative(&self) -> bool {
        self.num < 0
    }

    /// Integer multiple k·(p/q), used when raising a term to an integer power.
    pub fn scaled(&self, k: i64) -> ExponentQ {
        let num = i128::from(self.num) * i128::from(k);
        ExponentQ::from_i128(num, i128::from(self.den))
    }

    /// Largest integer m with m·other ≤ self (other must be positive).
    ///
    /// Drives how many Taylor orders are needed before a power of an
    /// infinitesimal falls past the truncation order.
    pub fn div_floor(&self, other: &ExponentQ) -> i64 {
        assert!(other.is_positive());
        // floor((a/b) / (c/d)) = floor(ad / bc)
        let n = i128::from(self.num) * i128::from(other.den);
        let d = i128::from(self.den) * i128::from(other.num);
        let q = n.div_euclid(d);
        i64::try_from(q).expect("exponent ratio overflow")
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    fn from_i128(num: i128, den: i128) -> ExponentQ {
        let (num, den) = if den < 0 { (-num, -den) } else { (num, den) };
        let g = {
            let (mut a, mut b) = (num.abs(), den);
            while b != 0 {
                let t = a % b;
                a = b;
                b = t;
            }
            if a == 0 {
                1
            } else {
                a
            }
        };
        ExponentQ {
            num: i64::try_from(num / g).expect("exponent overflow"),
            den: i64::try_from(den / g).expect("exponent overflow"),
        }
    }
}

impl Add for ExponentQ {
    type Output = ExponentQ;
    fn add(self, rhs: ExponentQ) -> ExponentQ {
        let num = i128::from(self.num) * i128::from(rhs.den) + i128::from(rhs.num) * i128::from(self.den);
        ExponentQ::from_i128(num, i128::from(self.den) * i128::from(rhs.den))
    }
}

impl Sub for ExponentQ {
    type Output = ExponentQ;
    fn sub(self, rhs: ExponentQ) -> ExponentQ {
        self + (-rhs)
    }
}

impl Neg for ExponentQ {
    type Output = ExponentQ;
    fn neg(self) -> ExponentQ {
        ExponentQ {
            num: -self.num,
            den: self.den,
        }
    }
}

impl PartialOrd for ExponentQ {
    fn partial_cmp(&self, other: &ExponentQ) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExponentQ {
    fn cmp(&self, other: &ExponentQ) -> Ordering {
        let lhs = i128::from(self.num) * i128::from(other.den);
        let rhs = i128::from(other.num) * i128::from(self.den);
        lhs.cmp(&rhs)
    }
}

impl fmt::Display for ExponentQ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

/// Error from parsing an exponent out of its `p` / `p/q` text form.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("malformed rational exponent: {0}")]
pub struct ParseExponentError(pub &'static str);

impl FromStr for ExponentQ {
    type Err = ParseExponentError;

    fn from_str(s: &str) -> Result<ExponentQ, ParseExponentError> {
        let s = s.trim();
        let (num, den) = match s.split_once('/') {
            Some((n, d)) => (
                n.trim().parse::<i64>().map_err(|_| ParseExponentError("numerator"))?,
                d.trim().parse::<i64>().map_err(|_| ParseExponentError("denominator"))?,
            ),
            None => (s.parse::<i64>().map_err(|_| ParseExponentError("integer part"))?, 1),
        };
        if den == 0 {
            return Err(ParseExponentError("zero denominator"));
        }
        Ok(ExponentQ::new(num, den))
    }
}
