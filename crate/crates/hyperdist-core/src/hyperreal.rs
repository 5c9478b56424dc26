//! Truncated sparse series over one infinitesimal generator ε.
//!
//! A value is a finite sum Σ aᵢ·ε^{qᵢ} with exact rational exponents qᵢ and
//! f64 coefficients aᵢ, stored sorted by exponent with the smallest — i.e.
//! asymptotically dominant — term first. Invariants:
//!
//! * exponents are strictly increasing and ≤ `policy.max_order`;
//! * no stored coefficient is exactly 0.0;
//! * at most `policy.max_terms` terms survive (lowest exponents win).
//!
//! Arithmetic is exact term arithmetic followed by truncation: products whose
//! exponent exceeds `max_order` are discarded. The classification tolerance
//! `zero_tol` is consulted **only** by [`HyperReal::classify`] and
//! [`HyperReal::infinitely_close`] (where quadrature noise must not masquerade
//! as a leading term) — never by arithmetic or comparison.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::exponent::ExponentQ;

/// Truncation parameters carried by every series value.
///
/// Mixing operands with different policies coarsens to the safer side:
/// smaller `max_order`, smaller `max_terms`, larger `zero_tol`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationPolicy {
    /// Largest retained exponent of ε.
    pub max_order: ExponentQ,
    /// Cap on the number of stored terms.
    pub max_terms: usize,
    /// Classification-only tolerance for treating coefficients as zero.
    pub zero_tol: f64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            max_order: ExponentQ::from_int(6),
            max_terms: 64,
            zero_tol: 1e-12,
        }
    }
}

impl TruncationPolicy {
    /// The coarser of two policies; used whenever operands disagree.
    pub fn meet(&self, other: &TruncationPolicy) -> TruncationPolicy {
        TruncationPolicy {
            max_order: self.max_order.min(other.max_order),
            max_terms: self.max_terms.min(other.max_terms),
            zero_tol: self.zero_tol.max(other.zero_tol),
        }
    }
}

/// Magnitude classification of a series value.
///
/// Decided by the sign of the leading exponent after ignoring coefficients
/// within `zero_tol` of zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NumClass {
    /// No significant term at all.
    Zero,
    /// Leading exponent > 0: nonzero but smaller than every positive real.
    NonzeroInfinitesimal,
    /// Leading exponent = 0: finite with nonzero standard part.
    Appreciable,
    /// Leading exponent < 0: larger in magnitude than every real.
    Infinite,
}

/// Errors from series arithmetic and standard-part extraction.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum HyperError {
    #[error("division by zero series")]
    DivisionByZero,
    #[error("standard part of an infinite value")]
    NotLimited,
}

/// A truncated series value. See the module docs for invariants.
#[derive(Clone, Debug)]
pub struct HyperReal {
    terms: Vec<(ExponentQ, f64)>,
    policy: TruncationPolicy,
}

impl HyperReal {
    /// The zero series under the default policy.
    pub fn zero() -> HyperReal {
        HyperReal {
            terms: Vec::new(),
            policy: TruncationPolicy::default(),
        }
    }

    pub fn zero_with(policy: TruncationPolicy) -> HyperReal {
        HyperReal {
            terms: Vec::new(),
            policy,
        }
    }

    /// Embeds a real number as the ε⁰ term.
    pub fn from_real(x: f64) -> HyperReal {
        HyperReal::from_real_with(x, TruncationPolicy::default())
    }

    pub fn from_real_with(x: f64, policy: TruncationPolicy) -> HyperReal {
        let mut terms = Vec::new();
        if x != 0.0 {
            terms.push((ExponentQ::ZERO, x));
        }
        HyperReal { terms, policy }
    }

    /// The canonical positive infinitesimal ε.
    pub fn epsilon() -> HyperReal {
        HyperReal::epsilon_with(TruncationPolicy::default())
    }

    pub fn epsilon_with(policy: TruncationPolicy) -> HyperReal {
        HyperReal::monomial(1.0, ExponentQ::ONE, policy)
    }

    /// A single term a·ε^q (normalized away if `a == 0` or q exceeds the order).
    pub fn monomial(coef: f64, exp: ExponentQ, policy: TruncationPolicy) -> HyperReal {
        let mut terms = Vec::new();
        if coef != 0.0 && exp <= policy.max_order {
            terms.push((exp, coef));
        }
        HyperReal { terms, policy }
    }

    /// Builds a series from arbitrary (exponent, coefficient) pairs.
    pub fn from_terms(pairs: &[(ExponentQ, f64)], policy: TruncationPolicy) -> HyperReal {
        let mut map: BTreeMap<ExponentQ, f64> = BTreeMap::new();
        for &(e, c) in pairs {
            *map.entry(e).or_insert(0.0) += c;
        }
        HyperReal::from_map(map, policy)
    }

    fn from_map(map: BTreeMap<ExponentQ, f64>, policy: TruncationPolicy) -> HyperReal {
        let mut terms: Vec<(ExponentQ, f64)> = map
            .into_iter()
            .filter(|&(e, c)| c != 0.0 && e <= policy.max_order)
            .collect();
        terms.truncate(policy.max_terms);
        HyperReal { terms, policy }
    }

    pub fn policy(&self) -> &TruncationPolicy {
        &self.policy
    }

    /// Re-truncates the value under a (usually coarser) policy.
    pub fn with_policy(&self, policy: TruncationPolicy) -> HyperReal {
        let mut terms: Vec<(ExponentQ, f64)> = self
            .terms
            .iter()
            .copied()
            .filter(|&(e, _)| e <= policy.max_order)
            .collect();
        terms.truncate(policy.max_terms);
        HyperReal { terms, policy }
    }

    /// The stored terms, ascending by exponent.
    pub fn terms(&self) -> &[(ExponentQ, f64)] {
        &self.terms
    }

    /// True when no term is stored at all (exact zero).
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Exponent and coefficient of the dominant (lowest-exponent) term.
    pub fn leading(&self) -> Option<(ExponentQ, f64)> {
        self.terms.first().copied()
    }

    /// Coefficient at an exact exponent (0.0 when absent).
    pub fn coeff(&self, exp: ExponentQ) -> f64 {
        match self.terms.binary_search_by(|&(e, _)| e.cmp(&exp)) {
            Ok(i) => self.terms[i].1,
            Err(_) => 0.0,
        }
    }

    pub fn add(&self, rhs: &HyperReal) -> HyperReal {
        let policy = self.policy.meet(&rhs.policy);
        let mut map: BTreeMap<ExponentQ, f64> = BTreeMap::new();
        for &(e, c) in self.terms.iter().chain(rhs.terms.iter()) {
            *map.entry(e).or_insert(0.0) += c;
        }
        HyperReal::from_map(map, policy)
    }

    pub fn sub(&self, rhs: &HyperReal) -> HyperReal {
        self.add(&rhs.neg())
    }

    pub fn neg(&self) -> HyperReal {
        HyperReal {
            terms: self.terms.iter().map(|&(e, c)| (e, -c)).collect(),
            policy: self.policy,
        }
    }

    /// Multiplies by a real scalar, termwise.
    pub fn scale(&self, k: f64) -> HyperReal {
        HyperReal {
            terms: self
                .terms
                .iter()
                .map(|&(e, c)| (e, c * k))
                .filter(|&(_, c)| c != 0.0)
                .collect(),
            policy: self.policy,
        }
    }

    /// Cauchy product with truncation past `max_order`.
    pub fn mul(&self, rhs: &HyperReal) -> HyperReal {
        let policy = self.policy.meet(&rhs.policy);
        let mut map: BTreeMap<ExponentQ, f64> = BTreeMap::new();
        for &(ea, ca) in &self.terms {
            for &(eb, cb) in &rhs.terms {
                let e = ea + eb;
                if e <= policy.max_order {
                    *map.entry(e).or_insert(0.0) += ca * cb;
                }
            }
        }
        HyperReal::from_map(map, policy)
    }

    /// Integer power by repeated multiplication (n = 0 gives 1).
    pub fn pow_int(&self, n: u32) -> HyperReal {
        let mut acc = HyperReal::from_real_with(1.0, self.policy);
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// Series reciprocal: the leading exponent negates and the tail inverts
    /// as a geometric series.
    ///
    /// Internally widens the working order so that after shifting by the
    /// leading exponent the result is still full-rank up to `max_order`:
    /// `mul(a, recip(a))` differs from 1 only at exponents beyond
    /// `max_order − |lead(a)|`.
    pub fn recip(&self) -> Result<HyperReal, HyperError> {
        let (lead_exp, lead_coef) = self.leading().ok_or(HyperError::DivisionByZero)?;
        let policy = self.policy;
        let widened = TruncationPolicy {
            max_order: policy.max_order
                + ExponentQ::new(lead_exp.num().abs(), lead_exp.den()),
            ..policy
        };
        // u = self / (lead_coef · ε^lead) − 1 has strictly positive support.
        let shifted = HyperReal {
            terms: self
                .terms
                .iter()
                .map(|&(e, c)| (e - lead_exp, c / lead_coef))
                .collect(),
            policy: widened,
        };
        let u = shifted.sub(&HyperReal::from_real_with(1.0, widened));
        // 1/(1+u) = Σ (−u)^k; each factor raises the leading exponent, so the
        // loop terminates once the running power truncates to zero.
        let mut acc = HyperReal::from_real_with(1.0, widened);
        let mut pow = HyperReal::from_real_with(1.0, widened);
        let neg_u = u.neg();
        while !neg_u.is_zero() {
            pow = pow.mul(&neg_u);
            if pow.is_zero() {
                break;
            }
            acc = acc.add(&pow);
        }
        // Shift back down by the leading exponent and restore the policy.
        let mut out = HyperReal {
            terms: acc
                .terms
                .iter()
                .map(|&(e, c)| (e - lead_exp, c / lead_coef))
                .collect(),
            policy: widened,
        };
        out = out.with_policy(policy);
        Ok(out)
    }

    pub fn div(&self, rhs: &HyperReal) -> Result<HyperReal, HyperError> {
        Ok(self.mul(&rhs.recip()?))
    }

    /// Exact lexicographic comparison via the sign of the difference's
    /// leading coefficient. No tolerance is involved.
    pub fn compare(&self, rhs: &HyperReal) -> Ordering {
        let diff = self.sub(rhs);
        match diff.leading() {
            None => Ordering::Equal,
            Some((_, c)) if c > 0.0 => Ordering::Greater,
            Some(_) => Ordering::Less,
        }
    }

    /// Absolute value: negate when the leading coefficient is negative.
    pub fn abs(&self) -> HyperReal {
        match self.leading() {
            Some((_, c)) if c < 0.0 => self.neg(),
            _ => self.clone(),
        }
    }

    /// Magnitude class, ignoring coefficients within `zero_tol`.
    pub fn classify(&self) -> NumClass {
        let tol = self.policy.zero_tol;
        for &(e, c) in &self.terms {
            if c.abs() <= tol {
                continue;
            }
            return if e.is_negative() {
                NumClass::Infinite
            } else if e.is_zero() {
                NumClass::Appreciable
            } else {
                NumClass::NonzeroInfinitesimal
            };
        }
        NumClass::Zero
    }

    pub fn is_limited(&self) -> bool {
        self.classify() != NumClass::Infinite
    }

    pub fn is_infinitesimal(&self) -> bool {
        matches!(self.classify(), NumClass::Zero | NumClass::NonzeroInfinitesimal)
    }

    /// The ε⁰ coefficient; errors on infinite values.
    pub fn standard_part(&self) -> Result<f64, HyperError> {
        if self.classify() == NumClass::Infinite {
            return Err(HyperError::NotLimited);
        }
        Ok(self.coeff(ExponentQ::ZERO))
    }

    /// True when the difference is infinitesimal (or zero).
    pub fn infinitely_close(&self, rhs: &HyperReal) -> bool {
        self.sub(rhs).is_infinitesimal()
    }
}

/// Structural equality of the stored terms (policy is ignored: two values
/// that print the same compare equal).
impl PartialEq for HyperReal {
    fn eq(&self, other: &HyperReal) -> bool {
        self.terms == other.terms
    }
}

impl fmt::Display for HyperReal {
    /// Human-readable form like `2 - 0.5·eps^1 + 1·eps^3/2`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, &(e, c)) in self.terms.iter().enumerate() {
            let mag = c.abs();
            if i == 0 {
                if c < 0.0 {
                    write!(f, "-")?;
                }
            } else if c < 0.0 {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            if e.is_zero() {
                write!(f, "{mag}")?;
            } else {
                write!(f, "{mag}·eps^{e}")?;
            }
        }
        Ok(())
    }
}

macro_rules! ref_binop {
    ($trait:ident, $method:ident, $delegate:ident) => {
        impl core::ops::$trait for &HyperReal {
            type Output = HyperReal;
            fn $method(self, rhs: &HyperReal) -> HyperReal {
                HyperReal::$delegate(self, rhs)
            }
        }
    };
}

ref_binop!(Add, add, add);
ref_binop!(Sub, sub, sub);
ref_binop!(Mul, mul, mul);

impl core::ops::Neg for &HyperReal {
    type Output = HyperReal;
    fn neg(self) -> HyperReal {
        HyperReal::neg(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn eps() -> HyperReal {
        HyperReal::epsilon()
    }

    fn real(x: f64) -> HyperReal {
        HyperReal::from_real(x)
    }

    fn eps_pow(num: i64, den: i64) -> HyperReal {
        HyperReal::monomial(1.0, ExponentQ::new(num, den), TruncationPolicy::default())
    }

    #[test]
    fn epsilon_is_below_every_positive_real() {
        for r in [1.0, 0.5, 1e-3, 1e-9, 1e-300] {
            assert_eq!(eps().compare(&real(r)), Ordering::Less);
            assert_eq!(real(r).compare(&eps()), Ordering::Greater);
        }
        assert_eq!(eps().compare(&real(0.0)), Ordering::Greater);
    }

    #[test]
    fn lower_exponent_dominates_comparison() {
        // ε vs ε²: the difference ε − ε² has leading term +ε.
        assert_eq!(eps().compare(&eps().mul(&eps())), Ordering::Greater);
        assert_eq!(eps_pow(1, 2).compare(&eps()), Ordering::Greater);
        assert_eq!(eps_pow(-1, 1).compare(&real(1e12)), Ordering::Greater);
    }

    #[test]
    fn classification_examples() {
        assert_eq!(real(5.0).add(&eps().scale(3.0)).classify(), NumClass::Appreciable);
        assert_eq!(eps().sub(&eps().mul(&eps())).classify(), NumClass::NonzeroInfinitesimal);
        assert_eq!(eps_pow(-1, 1).add(&real(7.0)).classify(), NumClass::Infinite);
        assert_eq!(real(0.0).classify(), NumClass::Zero);
        // Sub-tolerance noise does not affect classification...
        assert_eq!(real(1e-15).classify(), NumClass::Zero);
        // ...but is preserved by arithmetic.
        assert_relative_eq!(real(1e-15).coeff(ExponentQ::ZERO), 1e-15);
    }

    #[test]
    fn standard_part() {
        let v = real(5.0).add(&eps().scale(3.0));
        assert_relative_eq!(v.standard_part().unwrap(), 5.0);
        assert_eq!(
            eps_pow(-1, 1).standard_part(),
            Err(HyperError::NotLimited)
        );
        assert_relative_eq!(eps().standard_part().unwrap(), 0.0);
    }

    #[test]
    fn infinitely_close_ignores_shared_infinite_part() {
        let omega = eps_pow(-1, 1);
        assert!(!omega.infinitely_close(&omega.add(&real(5.0))));
        assert!(omega.infinitely_close(&omega.add(&eps())));
        assert!(real(2.0).infinitely_close(&real(2.0).add(&eps().scale(-7.0))));
    }

    #[test]
    fn recip_of_one_minus_eps_is_geometric() {
        let v = real(1.0).sub(&eps());
        let r = v.recip().unwrap();
        for k in 0..=6 {
            assert_relative_eq!(r.coeff(ExponentQ::from_int(k)), 1.0);
        }
        assert_eq!(r.terms().len(), 7);
        // Widened working order makes the product exactly 1 after truncation.
        assert!(v.mul(&r).sub(&real(1.0)).is_zero());
    }

    #[test]
    fn recip_negates_leading_exponent() {
        let r = eps().recip().unwrap();
        assert_eq!(r.leading(), Some((ExponentQ::from_int(-1), 1.0)));
        assert_eq!(real(0.0).recip(), Err(HyperError::DivisionByZero));

        let v = eps().scale(2.0).add(&eps().mul(&eps()));
        let r = v.recip().unwrap();
        assert!(v.mul(&r).sub(&real(1.0)).is_zero());
    }

    #[test]
    fn mul_truncates_past_max_order() {
        let v = eps_pow(3, 1).mul(&eps_pow(4, 1));
        assert!(v.is_zero());
        // Exponent 6 itself is retained.
        assert!(!eps_pow(3, 1).mul(&eps_pow(3, 1)).is_zero());
    }

    #[test]
    fn exact_cancellation_drops_terms() {
        assert!(eps().add(&eps().neg()).is_zero());
        assert_eq!(eps().add(&eps().neg()).classify(), NumClass::Zero);
    }

    #[test]
    fn mixed_policies_coarsen() {
        let fine = TruncationPolicy {
            max_order: ExponentQ::from_int(10),
            ..TruncationPolicy::default()
        };
        let a = HyperReal::monomial(1.0, ExponentQ::from_int(8), fine);
        assert!(!a.is_zero());
        let b = HyperReal::from_real(1.0); // default max_order 6
        let sum = a.add(&b);
        assert_eq!(sum.policy().max_order, ExponentQ::from_int(6));
        assert_eq!(sum.terms().len(), 1); // the ε⁸ term is gone
    }

    #[test]
    fn max_terms_keeps_dominant_terms() {
        let policy = TruncationPolicy::default();
        let pairs: Vec<(ExponentQ, f64)> = (0..=96)
            .map(|i| (ExponentQ::new(i, 16), 1.0))
            .collect();
        let v = HyperReal::from_terms(&pairs, policy);
        assert_eq!(v.terms().len(), 64);
        assert_eq!(v.leading(), Some((ExponentQ::ZERO, 1.0)));
        // The highest exponents were dropped, not the lowest.
        assert_eq!(v.coeff(ExponentQ::new(96, 16)), 0.0);
        assert_relative_eq!(v.coeff(ExponentQ::new(63, 16)), 1.0);
    }

    #[test]
    fn division_round_trips() {
        let a = real(2.0).add(&eps().scale(0.5));
        let b = real(-3.0).add(&eps_pow(1, 2));
        let q = a.div(&b).unwrap();
        let back = q.mul(&b);
        // Exact up to truncation of the widened tail.
        assert!(back.sub(&a).is_infinitesimal());
        assert_relative_eq!(back.coeff(ExponentQ::ZERO), 2.0);
    }

    #[test]
    fn display_is_readable() {
        let v = real(2.0).sub(&eps().scale(0.5));
        assert_eq!(alloc::format!("{v}"), "2 - 0.5·eps^1");
        assert_eq!(alloc::format!("{}", HyperReal::zero()), "0");
    }
}
