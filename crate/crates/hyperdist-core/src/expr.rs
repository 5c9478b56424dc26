//! Internal-function expression trees and their evaluation at series points.
//!
//! An [`InternalExpr`] denotes a function of one variable that can be
//! evaluated at any (limited or, where meaningful, unlimited) series number.
//! Smooth primitives evaluate by Taylor expansion around the standard part
//! of the argument: with t = s + δ (δ the infinitesimal tail), f(t) is the
//! jet of f at s composed with δ, truncated by the argument's policy.
//! Branching ([`InternalExpr::Piecewise`]) decides its condition by *exact*
//! series comparison, so infinitesimally separated points can take different
//! branches — this is what lets the tree distinguish x = b from x = b + ε.
//!
//! [`InternalExpr::Mollify`] rescales a base shape by a series factor σ and
//! multiplies by a series amplitude; with infinitesimal σ and amplitude
//! ~1/σ this produces the concentrated spikes the rest of the crate treats
//! as generalized functions.

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::cmp::Ordering;
use thiserror::Error;

use crate::exponent::ExponentQ;
use crate::hyperreal::{HyperError, HyperReal, NumClass, TruncationPolicy};
use crate::jet::{bump_jet, Jet};
use crate::testfn::{bump_mass, plateau_jet, TestFn};

/// Hard cap on the Taylor order used when composing a jet with an
/// infinitesimal tail.
pub const ORDER_CAP: usize = 32;

/// Comparison operator of a piecewise branch condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Ge,
    Gt,
}

impl CmpOp {
    /// Whether the condition holds for a given exact comparison outcome.
    fn holds(self, ord: Ordering) -> bool {
        match (self, ord) {
            (CmpOp::Lt, Ordering::Less) => true,
            (CmpOp::Le, Ordering::Less | Ordering::Equal) => true,
            (CmpOp::Ge, Ordering::Greater | Ordering::Equal) => true,
            (CmpOp::Gt, Ordering::Greater) => true,
            _ => false,
        }
    }
}

/// Why an evaluation could not produce a value.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("division by an exact zero")]
    DivisionByZero,
    #[error("standard part of an unlimited value")]
    NotLimited,
    #[error("unsupported evaluation: {0}")]
    UnsupportedEvaluation(&'static str),
    #[error("composition would need Taylor order {requested}, cap is {cap}")]
    OrderCap { requested: usize, cap: usize },
    #[error("expression has no standard shadow")]
    NotShadowable,
}

impl From<HyperError> for EvalError {
    fn from(e: HyperError) -> EvalError {
        match e {
            HyperError::DivisionByZero => EvalError::DivisionByZero,
            HyperError::NotLimited => EvalError::NotLimited,
        }
    }
}

/// Side observations accumulated during one evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EvalFlags {
    /// A branch condition was decided by an *exact tie* between its two
    /// sides; the chosen branch followed the operator's inclusivity.
    pub degenerate_branch: bool,
}

/// Expression tree over one variable, evaluable at series points.
#[derive(Clone, Debug, PartialEq)]
pub enum InternalExpr {
    /// The variable x.
    Var,
    /// A series constant.
    Const(HyperReal),
    Add(Box<InternalExpr>, Box<InternalExpr>),
    Mul(Box<InternalExpr>, Box<InternalExpr>),
    Neg(Box<InternalExpr>),
    /// Multiplicative inverse of the operand.
    Recip(Box<InternalExpr>),
    /// Operand raised to a fixed nonnegative integer power.
    IntPow(Box<InternalExpr>, u32),
    Sin(Box<InternalExpr>),
    Cos(Box<InternalExpr>),
    Exp(Box<InternalExpr>),
    /// The standard bump b(x) = exp(−1/(1−x²)) on (−1, 1), 0 elsewhere.
    /// A leaf: its argument is the variable itself.
    Bump,
    /// Smoothed indicator of [−a, a]: exactly 1 on [−a/2, a/2], 0 outside
    /// (−a, a). A leaf like [`InternalExpr::Bump`].
    Plateau(f64),
    /// `then` where `lhs op rhs` holds, `els` elsewhere, decided by exact
    /// series comparison.
    Piecewise {
        lhs: Box<InternalExpr>,
        op: CmpOp,
        rhs: Box<InternalExpr>,
        then: Box<InternalExpr>,
        els: Box<InternalExpr>,
    },
    /// amplitude · base(x / scale). `scale` must be appreciable or a nonzero
    /// infinitesimal.
    Mollify {
        base: Box<InternalExpr>,
        scale: HyperReal,
        amplitude: HyperReal,
    },
    /// A compactly supported smooth test function applied to the variable.
    TestRef(TestFn),
}

impl InternalExpr {
    // ---- constructors ---------------------------------------------------

    pub fn var() -> InternalExpr {
        InternalExpr::Var
    }

    /// Real constant with the default policy.
    pub fn real(x: f64) -> InternalExpr {
        InternalExpr::Const(HyperReal::from_real(x))
    }

    pub fn constant(h: HyperReal) -> InternalExpr {
        InternalExpr::Const(h)
    }

    pub fn add(a: InternalExpr, b: InternalExpr) -> InternalExpr {
        InternalExpr::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: InternalExpr, b: InternalExpr) -> InternalExpr {
        InternalExpr::add(a, InternalExpr::neg(b))
    }

    pub fn mul(a: InternalExpr, b: InternalExpr) -> InternalExpr {
        InternalExpr::Mul(Box::new(a), Box::new(b))
    }

    pub fn neg(a: InternalExpr) -> InternalExpr {
        InternalExpr::Neg(Box::new(a))
    }

    pub fn recip(a: InternalExpr) -> InternalExpr {
        InternalExpr::Recip(Box::new(a))
    }

    pub fn int_pow(a: InternalExpr, n: u32) -> InternalExpr {
        InternalExpr::IntPow(Box::new(a), n)
    }

    pub fn sin(a: InternalExpr) -> InternalExpr {
        InternalExpr::Sin(Box::new(a))
    }

    pub fn cos(a: InternalExpr) -> InternalExpr {
        InternalExpr::Cos(Box::new(a))
    }

    pub fn exp(a: InternalExpr) -> InternalExpr {
        InternalExpr::Exp(Box::new(a))
    }

    pub fn piecewise(
        lhs: InternalExpr,
        op: CmpOp,
        rhs: InternalExpr,
        then: InternalExpr,
        els: InternalExpr,
    ) -> InternalExpr {
        InternalExpr::Piecewise {
            lhs: Box::new(lhs),
            op,
            rhs: Box::new(rhs),
            then: Box::new(then),
            els: Box::new(els),
        }
    }

    pub fn mollify(base: InternalExpr, scale: HyperReal, amplitude: HyperReal) -> InternalExpr {
        InternalExpr::Mollify {
            base: Box::new(base),
            scale,
            amplitude,
        }
    }

    pub fn test_ref(g: TestFn) -> InternalExpr {
        InternalExpr::TestRef(g)
    }

    // ---- evaluation -----------------------------------------------------

    /// Evaluate at a series point.
    pub fn eval_at(&self, t: &HyperReal) -> Result<HyperReal, EvalError> {
        self.eval_at_flagged(t).map(|(v, _)| v)
    }

    /// Evaluate and report side observations (currently: whether any branch
    /// condition was decided by an exact tie).
    pub fn eval_at_flagged(&self, t: &HyperReal) -> Result<(HyperReal, EvalFlags), EvalError> {
        let mut flags = EvalFlags::default();
        let v = self.eval_inner(t, &mut flags)?;
        Ok((v, flags))
    }

    fn eval_inner(&self, t: &HyperReal, flags: &mut EvalFlags) -> Result<HyperReal, EvalError> {
        let policy = *t.policy();
        match self {
            InternalExpr::Var => Ok(t.clone()),
            InternalExpr::Const(h) => Ok(h.clone()),
            InternalExpr::Add(a, b) => {
                Ok(a.eval_inner(t, flags)?.add(&b.eval_inner(t, flags)?))
            }
            InternalExpr::Mul(a, b) => {
                Ok(a.eval_inner(t, flags)?.mul(&b.eval_inner(t, flags)?))
            }
            InternalExpr::Neg(a) => Ok(a.eval_inner(t, flags)?.neg()),
            InternalExpr::Recip(a) => Ok(a.eval_inner(t, flags)?.recip()?),
            InternalExpr::IntPow(a, n) => Ok(a.eval_inner(t, flags)?.pow_int(*n)),
            InternalExpr::Sin(a) => {
                let v = a.eval_inner(t, flags)?;
                eval_smooth(&v, |s, m| Jet::variable(s, m).sin_cos().0)
            }
            InternalExpr::Cos(a) => {
                let v = a.eval_inner(t, flags)?;
                eval_smooth(&v, |s, m| Jet::variable(s, m).sin_cos().1)
            }
            InternalExpr::Exp(a) => {
                let v = a.eval_inner(t, flags)?;
                eval_smooth(&v, |s, m| Jet::variable(s, m).exp())
            }
            InternalExpr::Bump => {
                let one = HyperReal::from_real_with(1.0, policy);
                if t.abs().compare(&one) != Ordering::Less {
                    return Ok(HyperReal::zero_with(policy));
                }
                // Strictly inside, so the argument is limited.
                eval_smooth(t, bump_jet)
            }
            InternalExpr::Plateau(a) => {
                let outer = HyperReal::from_real_with(*a, policy);
                if t.abs().compare(&outer) != Ordering::Less {
                    return Ok(HyperReal::zero_with(policy));
                }
                let half = 0.5 * *a;
                let outer_r = *a;
                eval_smooth(t, move |s, m| plateau_jet(half, outer_r, s, m))
            }
            InternalExpr::Piecewise {
                lhs,
                op,
                rhs,
                then,
                els,
            } => {
                let l = lhs.eval_inner(t, flags)?;
                let r = rhs.eval_inner(t, flags)?;
                let ord = l.compare(&r);
                if ord == Ordering::Equal {
                    flags.degenerate_branch = true;
                }
                if op.holds(ord) {
                    then.eval_inner(t, flags)
                } else {
                    els.eval_inner(t, flags)
                }
            }
            InternalExpr::Mollify {
                base,
                scale,
                amplitude,
            } => {
                match scale.classify() {
                    NumClass::NonzeroInfinitesimal | NumClass::Appreciable => {}
                    _ => {
                        return Err(EvalError::UnsupportedEvaluation(
                            "mollifier scale must be appreciable or a nonzero infinitesimal",
                        ))
                    }
                }
                let inner = t.div(scale)?;
                Ok(amplitude.mul(&base.eval_inner(&inner, flags)?))
            }
            InternalExpr::TestRef(g) => {
                if !t.is_limited() {
                    // Compact support: unlimited arguments lie outside it.
                    return Ok(HyperReal::zero_with(policy));
                }
                eval_smooth(t, |s, m| g.jet(s, m))
            }
        }
    }

    // ---- structure ------------------------------------------------------

    /// Derivative of the smooth fragment (no branching, no mollification,
    /// no bare bump/plateau leaves); `None` outside it.
    pub fn symbolic_derivative(&self) -> Option<InternalExpr> {
        match self {
            InternalExpr::Var => Some(InternalExpr::real(1.0)),
            InternalExpr::Const(_) => Some(InternalExpr::real(0.0)),
            InternalExpr::Add(a, b) => Some(InternalExpr::add(
                a.symbolic_derivative()?,
                b.symbolic_derivative()?,
            )),
            InternalExpr::Mul(a, b) => {
                let da = a.symbolic_derivative()?;
                let db = b.symbolic_derivative()?;
                Some(InternalExpr::add(
                    InternalExpr::mul(da, (**b).clone()),
                    InternalExpr::mul((**a).clone(), db),
                ))
            }
            InternalExpr::Neg(a) => Some(InternalExpr::neg(a.symbolic_derivative()?)),
            InternalExpr::Recip(a) => {
                let da = a.symbolic_derivative()?;
                Some(InternalExpr::neg(InternalExpr::mul(
                    da,
                    InternalExpr::int_pow(InternalExpr::recip((**a).clone()), 2),
                )))
            }
            InternalExpr::IntPow(a, n) => {
                if *n == 0 {
                    return Some(InternalExpr::real(0.0));
                }
                let da = a.symbolic_derivative()?;
                Some(InternalExpr::mul(
                    InternalExpr::real(*n as f64),
                    InternalExpr::mul(InternalExpr::int_pow((**a).clone(), n - 1), da),
                ))
            }
            InternalExpr::Sin(a) => Some(InternalExpr::mul(
                InternalExpr::cos((**a).clone()),
                a.symbolic_derivative()?,
            )),
            InternalExpr::Cos(a) => Some(InternalExpr::neg(InternalExpr::mul(
                InternalExpr::sin((**a).clone()),
                a.symbolic_derivative()?,
            ))),
            InternalExpr::Exp(a) => Some(InternalExpr::mul(
                InternalExpr::exp((**a).clone()),
                a.symbolic_derivative()?,
            )),
            InternalExpr::TestRef(g) => {
                Some(InternalExpr::test_ref(TestFn::deriv(1, g.clone())))
            }
            InternalExpr::Bump
            | InternalExpr::Plateau(_)
            | InternalExpr::Piecewise { .. }
            | InternalExpr::Mollify { .. } => None,
        }
    }

    /// Whether some subexpression is a mollification at infinitesimal scale
    /// (the structural signature of a concentrated spike).
    pub fn contains_infinitesimal_mollify(&self) -> bool {
        match self {
            InternalExpr::Mollify { base, scale, .. } => {
                scale.classify() == NumClass::NonzeroInfinitesimal
                    || base.contains_infinitesimal_mollify()
            }
            other => other.any_child(InternalExpr::contains_infinitesimal_mollify),
        }
    }

    fn any_child(&self, pred: impl Fn(&InternalExpr) -> bool + Copy) -> bool {
        match self {
            InternalExpr::Var
            | InternalExpr::Const(_)
            | InternalExpr::Bump
            | InternalExpr::Plateau(_)
            | InternalExpr::TestRef(_) => false,
            InternalExpr::Add(a, b) | InternalExpr::Mul(a, b) => pred(a) || pred(b),
            InternalExpr::Neg(a)
            | InternalExpr::Recip(a)
            | InternalExpr::IntPow(a, _)
            | InternalExpr::Sin(a)
            | InternalExpr::Cos(a)
            | InternalExpr::Exp(a) => pred(a),
            InternalExpr::Piecewise {
                lhs,
                rhs,
                then,
                els,
                ..
            } => pred(lhs) || pred(rhs) || pred(then) || pred(els),
            InternalExpr::Mollify { base, .. } => pred(base),
        }
    }

    /// A real interval outside which the function provably vanishes, when
    /// one can be read off the structure. (Products intersect, sums hull.)
    pub fn structural_support(&self) -> Option<(f64, f64)> {
        match self {
            InternalExpr::Bump => Some((-1.0, 1.0)),
            InternalExpr::Plateau(a) => Some((-*a, *a)),
            InternalExpr::TestRef(g) => Some(g.support()),
            InternalExpr::Const(h) if h.is_zero() => Some((0.0, 0.0)),
            InternalExpr::Neg(a) => a.structural_support(),
            InternalExpr::IntPow(a, n) if *n >= 1 => a.structural_support(),
            InternalExpr::Mul(a, b) => match (a.structural_support(), b.structural_support()) {
                (Some((al, ah)), Some((bl, bh))) => {
                    let (lo, hi) = (al.max(bl), ah.min(bh));
                    if lo <= hi {
                        Some((lo, hi))
                    } else {
                        // Disjoint factor supports: identically zero.
                        Some((0.0, 0.0))
                    }
                }
                (s, None) => s,
                (None, s) => s,
            },
            InternalExpr::Add(a, b) => {
                let (al, ah) = a.structural_support()?;
                let (bl, bh) = b.structural_support()?;
                Some((al.min(bl), ah.max(bh)))
            }
            InternalExpr::Mollify { base, scale, .. } => {
                let (lo, hi) = base.structural_support()?;
                let s0 = scale.standard_part().ok()?;
                let (a, b) = (lo * s0, hi * s0);
                Some((a.min(b), a.max(b)))
            }
            _ => None,
        }
    }

    /// Collect real points where the function may lose smoothness: branch
    /// boundaries against constants and support edges. Used to pre-split
    /// quadrature domains.
    pub fn real_breakpoints(&self, out: &mut Vec<f64>) {
        match self {
            InternalExpr::Bump => {
                out.push(-1.0);
                out.push(1.0);
            }
            InternalExpr::Plateau(a) => {
                for p in [-*a, -0.5 * *a, 0.5 * *a, *a] {
                    out.push(p);
                }
            }
            InternalExpr::TestRef(g) => {
                let (lo, hi) = g.support();
                out.push(lo);
                out.push(hi);
            }
            InternalExpr::Piecewise {
                lhs,
                rhs,
                then,
                els,
                ..
            } => {
                match (&**lhs, &**rhs) {
                    (InternalExpr::Var, InternalExpr::Const(c))
                    | (InternalExpr::Const(c), InternalExpr::Var) => {
                        if let Ok(s) = c.standard_part() {
                            out.push(s);
                        }
                    }
                    _ => {}
                }
                lhs.real_breakpoints(out);
                rhs.real_breakpoints(out);
                then.real_breakpoints(out);
                els.real_breakpoints(out);
            }
            InternalExpr::Mollify { base, .. } => {
                if let Some((lo, hi)) = self.structural_support() {
                    out.push(lo);
                    out.push(hi);
                }
                let _ = base;
            }
            InternalExpr::Add(a, b) | InternalExpr::Mul(a, b) => {
                a.real_breakpoints(out);
                b.real_breakpoints(out);
            }
            InternalExpr::Neg(a)
            | InternalExpr::Recip(a)
            | InternalExpr::IntPow(a, _)
            | InternalExpr::Sin(a)
            | InternalExpr::Cos(a)
            | InternalExpr::Exp(a) => a.real_breakpoints(out),
            InternalExpr::Var | InternalExpr::Const(_) => {}
        }
    }

    // ---- shadows --------------------------------------------------------

    /// The standard expression obtained by taking standard parts of every
    /// constant, with basic algebraic cleanup. Fails when a constant is
    /// unlimited or a mollification is at infinitesimal scale.
    pub fn shadow_ast(&self) -> Result<InternalExpr, EvalError> {
        let mapped = self.shadow_map()?;
        Ok(simplify(mapped))
    }

    fn shadow_map(&self) -> Result<InternalExpr, EvalError> {
        Ok(match self {
            InternalExpr::Var => InternalExpr::Var,
            InternalExpr::Const(h) => {
                let s = h.standard_part().map_err(|_| EvalError::NotShadowable)?;
                InternalExpr::real(s)
            }
            InternalExpr::Add(a, b) => InternalExpr::add(a.shadow_map()?, b.shadow_map()?),
            InternalExpr::Mul(a, b) => InternalExpr::mul(a.shadow_map()?, b.shadow_map()?),
            InternalExpr::Neg(a) => InternalExpr::neg(a.shadow_map()?),
            InternalExpr::Recip(a) => InternalExpr::recip(a.shadow_map()?),
            InternalExpr::IntPow(a, n) => InternalExpr::int_pow(a.shadow_map()?, *n),
            InternalExpr::Sin(a) => InternalExpr::sin(a.shadow_map()?),
            InternalExpr::Cos(a) => InternalExpr::cos(a.shadow_map()?),
            InternalExpr::Exp(a) => InternalExpr::exp(a.shadow_map()?),
            InternalExpr::Bump => InternalExpr::Bump,
            InternalExpr::Plateau(a) => InternalExpr::Plateau(*a),
            InternalExpr::Piecewise {
                lhs,
                op,
                rhs,
                then,
                els,
            } => InternalExpr::piecewise(
                lhs.shadow_map()?,
                *op,
                rhs.shadow_map()?,
                then.shadow_map()?,
                els.shadow_map()?,
            ),
            InternalExpr::Mollify {
                base,
                scale,
                amplitude,
            } => {
                if scale.classify() == NumClass::NonzeroInfinitesimal {
                    return Err(EvalError::NotShadowable);
                }
                let s = scale
                    .standard_part()
                    .map_err(|_| EvalError::NotShadowable)?;
                let a = amplitude
                    .standard_part()
                    .map_err(|_| EvalError::NotShadowable)?;
                InternalExpr::mollify(
                    base.shadow_map()?,
                    HyperReal::from_real(s),
                    HyperReal::from_real(a),
                )
            }
            InternalExpr::TestRef(g) => InternalExpr::TestRef(g.clone()),
        })
    }

    /// True when every node is defined for all real inputs (no reciprocal,
    /// no branching that could hide a pole).
    fn is_total(&self) -> bool {
        match self {
            InternalExpr::Recip(_) => false,
            InternalExpr::Piecewise { .. } => false,
            other => {
                !other.any_child(|c| !c.is_total())
                    && !matches!(other, InternalExpr::Mollify { .. })
                // Mollified subtrees are total iff the base is, but their
                // scale bookkeeping is not worth folding through here.
                || matches!(other, InternalExpr::Mollify { base, .. } if base.is_total())
            }
        }
    }
}

/// Evaluate a smooth primitive at a limited series point by composing its
/// jet at the standard part with the infinitesimal tail.
fn eval_smooth(
    v: &HyperReal,
    jet_at: impl Fn(f64, usize) -> Jet,
) -> Result<HyperReal, EvalError> {
    if !v.is_limited() {
        return Err(EvalError::UnsupportedEvaluation(
            "analytic primitive at an unlimited argument",
        ));
    }
    let policy = *v.policy();
    let s = v.standard_part()?;
    let delta = v.sub(&HyperReal::from_real_with(s, policy));
    let m = jet_order(&delta, &policy)?;
    let jet = jet_at(s, m);
    Ok(compose_jet(&jet, &delta, policy))
}

/// Taylor order needed so that δ^order falls outside the policy's retained
/// exponent range.
fn jet_order(delta: &HyperReal, policy: &TruncationPolicy) -> Result<usize, EvalError> {
    let lead = match delta.leading() {
        None => return Ok(0),
        Some((e, _)) => e,
    };
    debug_assert!(lead.is_positive());
    let m = policy.max_order.div_floor(&lead);
    let m = if m < 0 { 0 } else { m as usize };
    if m > ORDER_CAP {
        return Err(EvalError::OrderCap {
            requested: m,
            cap: ORDER_CAP,
        });
    }
    Ok(m)
}

/// Σₖ jet.coeff(k)·δᵏ, stopping as soon as the power truncates to zero.
fn compose_jet(jet: &Jet, delta: &HyperReal, policy: TruncationPolicy) -> HyperReal {
    let mut acc = HyperReal::from_real_with(jet.coeff(0), policy);
    if delta.is_zero() {
        return acc;
    }
    let mut pow = delta.clone();
    for k in 1..=jet.order() {
        if pow.is_zero() {
            break;
        }
        acc = acc.add(&pow.scale(jet.coeff(k)));
        if k < jet.order() {
            pow = pow.mul(delta);
        }
    }
    acc
}

/// Bottom-up algebraic cleanup: drop additive zeros and multiplicative
/// units, collapse branch nodes whose arms are identical.
fn simplify(e: InternalExpr) -> InternalExpr {
    match e {
        InternalExpr::Add(a, b) => {
            let a = simplify(*a);
            let b = simplify(*b);
            if is_const_zero(&a) {
                return b;
            }
            if is_const_zero(&b) {
                return a;
            }
            InternalExpr::add(a, b)
        }
        InternalExpr::Mul(a, b) => {
            let a = simplify(*a);
            let b = simplify(*b);
            if is_const_one(&a) {
                return b;
            }
            if is_const_one(&b) {
                return a;
            }
            // Annihilation is only sound when the surviving factor cannot
            // fail to evaluate.
            if is_const_zero(&a) && b.is_total() {
                return a;
            }
            if is_const_zero(&b) && a.is_total() {
                return b;
            }
            InternalExpr::mul(a, b)
        }
        InternalExpr::Neg(a) => {
            let a = simplify(*a);
            if is_const_zero(&a) {
                return a;
            }
            InternalExpr::neg(a)
        }
        InternalExpr::Recip(a) => InternalExpr::recip(simplify(*a)),
        InternalExpr::IntPow(a, n) => InternalExpr::int_pow(simplify(*a), n),
        InternalExpr::Sin(a) => InternalExpr::sin(simplify(*a)),
        InternalExpr::Cos(a) => InternalExpr::cos(simplify(*a)),
        InternalExpr::Exp(a) => InternalExpr::exp(simplify(*a)),
        InternalExpr::Piecewise {
            lhs,
            op,
            rhs,
            then,
            els,
        } => {
            let then = simplify(*then);
            let els = simplify(*els);
            if then == els {
                return then;
            }
            InternalExpr::piecewise(simplify(*lhs), op, simplify(*rhs), then, els)
        }
        InternalExpr::Mollify {
            base,
            scale,
            amplitude,
        } => InternalExpr::mollify(simplify(*base), scale, amplitude),
        leaf => leaf,
    }
}

fn is_const_zero(e: &InternalExpr) -> bool {
    matches!(e, InternalExpr::Const(h) if h.is_zero())
}

fn is_const_one(e: &InternalExpr) -> bool {
    matches!(e, InternalExpr::Const(h) if h.terms() == [(ExponentQ::ZERO, 1.0)])
}

/// The canonical concentrated spike: (1/(∫b))·ε⁻¹ · b(x/ε) with the default
/// policy. Its pairings reproduce point evaluation at 0 up to infinitesimals.
pub fn make_dirac() -> InternalExpr {
    make_dirac_with(TruncationPolicy::default())
}

/// [`make_dirac`] under an explicit truncation policy.
pub fn make_dirac_with(policy: TruncationPolicy) -> InternalExpr {
    let amplitude = HyperReal::monomial(1.0 / bump_mass(), ExponentQ::from_int(-1), policy);
    InternalExpr::mollify(InternalExpr::Bump, HyperReal::epsilon_with(policy), amplitude)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn eps() -> HyperReal {
        HyperReal::epsilon()
    }

    fn q(n: i64) -> ExponentQ {
        ExponentQ::from_int(n)
    }

    #[test]
    fn polynomial_evaluation_at_series_points() {
        // (x + 1)² at 3 → 16; at ε → 1 + 2ε + ε².
        let f = InternalExpr::int_pow(
            InternalExpr::add(InternalExpr::var(), InternalExpr::real(1.0)),
            2,
        );
        let at3 = f.eval_at(&HyperReal::from_real(3.0)).unwrap();
        assert_eq!(at3, HyperReal::from_real(16.0));
        let ate = f.eval_at(&eps()).unwrap();
        assert_eq!(ate.coeff(q(0)), 1.0);
        assert_eq!(ate.coeff(q(1)), 2.0);
        assert_eq!(ate.coeff(q(2)), 1.0);
    }

    #[test]
    fn sine_expands_around_standard_part() {
        let f = InternalExpr::sin(InternalExpr::var());
        let v = f.eval_at(&eps()).unwrap();
        assert_eq!(v.coeff(q(1)), 1.0);
        assert_relative_eq!(v.coeff(q(3)), -1.0 / 6.0, epsilon = 1e-15);
        assert_relative_eq!(v.coeff(q(5)), 1.0 / 120.0, epsilon = 1e-15);
        assert_eq!(v.coeff(q(0)), 0.0);

        let at = HyperReal::from_real(core::f64::consts::FRAC_PI_2).add(&eps());
        let w = f.eval_at(&at).unwrap();
        assert_relative_eq!(w.standard_part().unwrap(), 1.0);
        assert_relative_eq!(w.coeff(q(2)), -0.5, epsilon = 1e-12);
    }

    #[test]
    fn exponential_expands_around_standard_part() {
        let f = InternalExpr::exp(InternalExpr::var());
        let v = f.eval_at(&HyperReal::from_real(1.0).add(&eps())).unwrap();
        let e = libm::exp(1.0);
        assert_relative_eq!(v.coeff(q(0)), e, epsilon = 1e-15);
        assert_relative_eq!(v.coeff(q(1)), e, epsilon = 1e-15);
        assert_relative_eq!(v.coeff(q(2)), e / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn analytic_primitives_reject_unlimited_arguments() {
        let f = InternalExpr::sin(InternalExpr::var());
        let omega = HyperReal::monomial(1.0, q(-1), TruncationPolicy::default());
        assert!(matches!(
            f.eval_at(&omega),
            Err(EvalError::UnsupportedEvaluation(_))
        ));
    }

    #[test]
    fn bump_leaf_values() {
        let b = InternalExpr::Bump;
        let e_inv = libm::exp(-1.0);
        assert_relative_eq!(
            b.eval_at(&HyperReal::zero()).unwrap().coeff(q(0)),
            e_inv
        );
        // At ε: even function, so the ε¹ term vanishes and the ε² term is
        // b″(0)/2 (frozen multiprecision value −0.73575888234288464/2).
        let v = b.eval_at(&eps()).unwrap();
        assert_relative_eq!(v.coeff(q(0)), e_inv);
        assert_eq!(v.coeff(q(1)), 0.0);
        assert_relative_eq!(v.coeff(q(2)), -0.73575888234288464 / 2.0, max_relative = 1e-12);
        // Outside or at the edge: exact zero; infinitely close inside the
        // edge the value is below every retained order, so it flushes too.
        for t in [
            HyperReal::from_real(1.0),
            HyperReal::from_real(1.0).add(&eps()),
            HyperReal::from_real(1.0).sub(&eps()),
            HyperReal::from_real(-3.0),
            HyperReal::monomial(1.0, q(-1), TruncationPolicy::default()),
        ] {
            assert!(b.eval_at(&t).unwrap().is_zero(), "expected 0 at {t:?}");
        }
    }

    #[test]
    fn plateau_leaf_values() {
        let p = InternalExpr::Plateau(2.0);
        assert_eq!(
            p.eval_at(&HyperReal::from_real(0.5)).unwrap(),
            HyperReal::from_real(1.0)
        );
        assert!(p.eval_at(&HyperReal::from_real(2.0)).unwrap().is_zero());
        assert!(p.eval_at(&HyperReal::from_real(-2.5)).unwrap().is_zero());
        // Mid-transition at x = 1.5: value 1/2; slope −(b(0)/∫b)·2/width
        // with band width 1 (frozen b(0)/∫b = 0.8285688398691052).
        let mid = p.eval_at(&HyperReal::from_real(1.5).add(&eps())).unwrap();
        assert_relative_eq!(mid.coeff(q(0)), 0.5, epsilon = 1e-10);
        assert_relative_eq!(mid.coeff(q(1)), -2.0 * 0.8285688398691052, max_relative = 1e-10);
        // On the flat top, infinitesimally displaced: still exactly 1.
        let top = p.eval_at(&HyperReal::from_real(1.0).sub(&eps())).unwrap();
        assert_eq!(top, HyperReal::from_real(1.0));
    }

    #[test]
    fn reciprocal_series_and_division_by_zero() {
        let f = InternalExpr::recip(InternalExpr::var());
        let v = f.eval_at(&HyperReal::from_real(2.0).add(&eps())).unwrap();
        assert_relative_eq!(v.coeff(q(0)), 0.5);
        assert_relative_eq!(v.coeff(q(1)), -0.25);
        let w = f.eval_at(&eps()).unwrap();
        assert_eq!(w.coeff(q(-1)), 1.0);
        assert_eq!(
            f.eval_at(&HyperReal::zero()),
            Err(EvalError::DivisionByZero)
        );
    }

    #[test]
    fn order_cap_is_enforced() {
        let f = InternalExpr::sin(InternalExpr::var());
        let pol = TruncationPolicy::default();
        // lead 1/6 with max order 6 would need 36 Taylor terms.
        let t = HyperReal::monomial(1.0, ExponentQ::new(1, 6), pol);
        assert_eq!(
            f.eval_at(&t),
            Err(EvalError::OrderCap {
                requested: 36,
                cap: ORDER_CAP
            })
        );
        // lead 1/4 needs 24 ≤ 32: fine.
        let t = HyperReal::monomial(1.0, ExponentQ::new(1, 4), pol);
        assert!(f.eval_at(&t).is_ok());
    }

    #[test]
    fn piecewise_branches_on_exact_comparison() {
        // step(x) = 0 for x < 2, 1 for x ≥ 2.
        let step = InternalExpr::piecewise(
            InternalExpr::var(),
            CmpOp::Lt,
            InternalExpr::real(2.0),
            InternalExpr::real(0.0),
            InternalExpr::real(1.0),
        );
        let below = HyperReal::from_real(2.0).sub(&eps());
        let at = HyperReal::from_real(2.0);
        let above = HyperReal::from_real(2.0).add(&eps());
        assert!(step.eval_at(&below).unwrap().is_zero());
        assert_eq!(step.eval_at(&at).unwrap(), HyperReal::from_real(1.0));
        assert_eq!(step.eval_at(&above).unwrap(), HyperReal::from_real(1.0));

        let (_, flags) = step.eval_at_flagged(&at).unwrap();
        assert!(flags.degenerate_branch);
        let (_, flags) = step.eval_at_flagged(&above).unwrap();
        assert!(!flags.degenerate_branch);
    }

    #[test]
    fn spike_evaluation() {
        let d = make_dirac();
        // At 0: amplitude · b(0) = (e⁻¹/∫b)·ε⁻¹.
        let v = d.eval_at(&HyperReal::zero()).unwrap();
        assert_eq!(v.leading().unwrap().0, q(-1));
        assert_relative_eq!(
            v.leading().unwrap().1,
            0.8285688398691052,
            max_relative = 1e-10
        );
        // At any appreciable point, and at x = ε (edge of the rescaled
        // support), the spike vanishes exactly.
        assert!(d.eval_at(&HyperReal::from_real(0.3)).unwrap().is_zero());
        assert!(d.eval_at(&eps()).unwrap().is_zero());
        // Appreciable-scale mollification is just a rescaled bump.
        let wide = InternalExpr::mollify(
            InternalExpr::Bump,
            HyperReal::from_real(2.0),
            HyperReal::from_real(1.0),
        );
        assert_relative_eq!(
            wide.eval_at(&HyperReal::from_real(1.0))
                .unwrap()
                .coeff(q(0)),
            0.26359713811572677,
            max_relative = 1e-12
        );
        // Zero or unlimited scales are rejected.
        let bad = InternalExpr::mollify(
            InternalExpr::Bump,
            HyperReal::zero(),
            HyperReal::from_real(1.0),
        );
        assert!(matches!(
            bad.eval_at(&HyperReal::zero()),
            Err(EvalError::UnsupportedEvaluation(_))
        ));
    }

    #[test]
    fn test_function_reference_evaluates_by_jet() {
        let g = InternalExpr::test_ref(TestFn::bump(0.0, 1.0));
        let direct = InternalExpr::Bump;
        for t in [
            HyperReal::from_real(0.3),
            HyperReal::from_real(0.3).add(&eps()),
            eps(),
        ] {
            let a = g.eval_at(&t).unwrap();
            let b = direct.eval_at(&t).unwrap();
            for (e, c) in a.terms() {
                assert_relative_eq!(*c, b.coeff(*e), max_relative = 1e-12);
            }
        }
        // Unlimited arguments fall outside the compact support.
        let omega = HyperReal::monomial(1.0, q(-1), TruncationPolicy::default());
        assert!(g.eval_at(&omega).unwrap().is_zero());
    }

    #[test]
    fn symbolic_derivative_agrees_with_series_coefficient() {
        // f′(s) read two ways: symbolically, and as the ε-coefficient of
        // f(s + ε).
        let cases = [
            InternalExpr::sin(InternalExpr::mul(InternalExpr::var(), InternalExpr::var())),
            InternalExpr::exp(InternalExpr::sin(InternalExpr::var())),
            InternalExpr::recip(InternalExpr::add(
                InternalExpr::int_pow(InternalExpr::var(), 2),
                InternalExpr::real(1.0),
            )),
            InternalExpr::test_ref(TestFn::bump(0.0, 2.0)),
        ];
        for f in cases {
            let df = f.symbolic_derivative().unwrap();
            for s in [-0.7, 0.0, 0.4, 1.3] {
                let series = f
                    .eval_at(&HyperReal::from_real(s).add(&eps()))
                    .unwrap();
                let sym = df
                    .eval_at(&HyperReal::from_real(s))
                    .unwrap()
                    .standard_part()
                    .unwrap();
                assert_relative_eq!(series.coeff(q(1)), sym, max_relative = 1e-10, epsilon = 1e-12);
            }
        }
        assert!(InternalExpr::Bump.symbolic_derivative().is_none());
        assert!(make_dirac().symbolic_derivative().is_none());
    }

    #[test]
    fn shadow_collapses_infinitesimal_constants() {
        let f = InternalExpr::sin(InternalExpr::add(
            InternalExpr::var(),
            InternalExpr::constant(HyperReal::epsilon()),
        ));
        assert_eq!(
            f.shadow_ast().unwrap(),
            InternalExpr::sin(InternalExpr::var())
        );
        assert_eq!(make_dirac().shadow_ast(), Err(EvalError::NotShadowable));
        let unlimited = InternalExpr::constant(HyperReal::monomial(
            1.0,
            q(-1),
            TruncationPolicy::default(),
        ));
        assert_eq!(unlimited.shadow_ast(), Err(EvalError::NotShadowable));
    }

    #[test]
    fn shadow_simplification_is_guarded() {
        // 0·(1/x) must not collapse: the reciprocal can fail.
        let f = InternalExpr::mul(
            InternalExpr::constant(HyperReal::epsilon()),
            InternalExpr::recip(InternalExpr::var()),
        );
        let shadow = f.shadow_ast().unwrap();
        assert_eq!(
            shadow,
            InternalExpr::mul(
                InternalExpr::real(0.0),
                InternalExpr::recip(InternalExpr::var())
            )
        );
        // 0·sin(x) does collapse.
        let g = InternalExpr::mul(
            InternalExpr::constant(HyperReal::epsilon()),
            InternalExpr::sin(InternalExpr::var()),
        );
        assert_eq!(g.shadow_ast().unwrap(), InternalExpr::real(0.0));
        // Equal branches collapse.
        let h = InternalExpr::piecewise(
            InternalExpr::var(),
            CmpOp::Lt,
            InternalExpr::constant(HyperReal::epsilon()),
            InternalExpr::sin(InternalExpr::var()),
            InternalExpr::sin(InternalExpr::var()),
        );
        assert_eq!(
            h.shadow_ast().unwrap(),
            InternalExpr::sin(InternalExpr::var())
        );
    }

    #[test]
    fn spike_detection_and_support() {
        assert!(make_dirac().contains_infinitesimal_mollify());
        assert!(InternalExpr::add(InternalExpr::var(), make_dirac())
            .contains_infinitesimal_mollify());
        let wide = InternalExpr::mollify(
            InternalExpr::Bump,
            HyperReal::from_real(2.0),
            HyperReal::from_real(1.0),
        );
        assert!(!wide.contains_infinitesimal_mollify());

        assert_eq!(InternalExpr::Bump.structural_support(), Some((-1.0, 1.0)));
        assert_eq!(
            InternalExpr::mul(
                InternalExpr::Bump,
                InternalExpr::test_ref(TestFn::bump(0.5, 2.0))
            )
            .structural_support(),
            Some((-1.0, 1.0))
        );
        assert_eq!(
            InternalExpr::add(InternalExpr::Bump, InternalExpr::Plateau(2.0))
                .structural_support(),
            Some((-2.0, 2.0))
        );
        assert_eq!(make_dirac().structural_support(), Some((0.0, 0.0)));
        assert_eq!(wide.structural_support(), Some((-2.0, 2.0)));
        assert_eq!(InternalExpr::var().structural_support(), None);
    }

    #[test]
    fn breakpoints_are_collected() {
        let step = InternalExpr::piecewise(
            InternalExpr::var(),
            CmpOp::Lt,
            InternalExpr::real(2.0),
            InternalExpr::real(0.0),
            InternalExpr::Bump,
        );
        let mut pts = Vec::new();
        step.real_breakpoints(&mut pts);
        assert!(pts.contains(&2.0));
        assert!(pts.contains(&1.0));
        assert!(pts.contains(&-1.0));
    }
}
