//! Continuity analysis at series points.
//!
//! Two distinct notions live here:
//!
//! * **S-continuity at a real point p** — external: f must take infinitely
//!   close values across the whole monad of p. Checked by *probing*: a
//!   [`MonadProbeSet`] of infinitesimal offsets is evaluated in order and
//!   any appreciable jump refutes with a concrete witness offset. When no
//!   probe refutes, structural rules may still *prove* continuity (smooth
//!   compositions, branch points with infinitesimal jumps); otherwise the
//!   honest answer is [`Verdict::NotRefuted`].
//! * ***-continuity at a series point q** — internal: the transferred
//!   continuity of the expression as a function on series points. This is
//!   decided structurally (smooth primitives are continuous everywhere, no
//!   sampling needed), with branch nodes checked for an exact value gap at
//!   their boundary.
//!
//! The same probe philosophy powers [`s_convergence`] (sampling a sequence
//! at unlimited indices) and [`shadow`] (tabulating standard parts over a
//! grid, with the reconstructed standard expression cross-checked pointwise).

use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

use crate::exponent::ExponentQ;
use crate::expr::{EvalError, InternalExpr};
use crate::hyperreal::{HyperReal, NumClass, TruncationPolicy};
use crate::testfn::{TestFn, TestFnError};

/// Outcome of a continuity or convergence analysis.
#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    /// Established by the named structural rule.
    Proved { rule: &'static str },
    /// Disproved by a concrete witness.
    Refuted { witness: RefutationWitness },
    /// Neither provable by the implemented rules nor refuted by any probe.
    NotRefuted,
}

impl Verdict {
    pub fn is_refuted(&self) -> bool {
        matches!(self, Verdict::Refuted { .. })
    }
    pub fn is_proved(&self) -> bool {
        matches!(self, Verdict::Proved { .. })
    }
}

/// The concrete evidence behind a refutation: the probe (an offset for
/// S-continuity, a point for *-continuity, an index for convergence) and
/// the two values whose separation is appreciable.
#[derive(Clone, Debug, PartialEq)]
pub struct RefutationWitness {
    pub probe: HyperReal,
    pub base_value: HyperReal,
    pub probe_value: HyperReal,
}

/// Ordered infinitesimal offsets used to sample a monad.
#[derive(Clone, Debug)]
pub struct MonadProbeSet {
    pub offsets: Vec<HyperReal>,
}

impl MonadProbeSet {
    /// The default ladder: ±ε, ±2ε, ±ε/2, ±ε², ±ε^{3/2}, ±ε^{1/2}, in that
    /// order (coarser scales first so witnesses are as simple as possible).
    pub fn standard(policy: TruncationPolicy) -> MonadProbeSet {
        let eps = HyperReal::epsilon_with(policy);
        let mono = |c: f64, num: i64, den: i64| {
            HyperReal::monomial(c, ExponentQ::new(num, den), policy)
        };
        let offsets = vec![
            eps.clone(),
            eps.neg(),
            eps.scale(2.0),
            eps.scale(-2.0),
            eps.scale(0.5),
            eps.scale(-0.5),
            mono(1.0, 2, 1),
            mono(-1.0, 2, 1),
            mono(1.0, 3, 2),
            mono(-1.0, 3, 2),
            mono(1.0, 1, 2),
            mono(-1.0, 1, 2),
        ];
        MonadProbeSet { offsets }
    }

    /// The standard ladder, extended with offsets matched to every spike
    /// scale σ occurring in `f` (±σ/2 and ±σ), so concentrated features are
    /// probed at their own width.
    pub fn for_expr(f: &InternalExpr, policy: TruncationPolicy) -> MonadProbeSet {
        let mut set = MonadProbeSet::standard(policy);
        let mut scales = Vec::new();
        collect_spike_scales(f, &mut scales);
        for sigma in scales {
            for candidate in [sigma.scale(0.5), sigma.scale(-0.5), sigma.clone(), sigma.neg()] {
                if !set.offsets.contains(&candidate) {
                    set.offsets.push(candidate);
                }
            }
        }
        set
    }

    pub fn custom(offsets: Vec<HyperReal>) -> MonadProbeSet {
        MonadProbeSet { offsets }
    }

    fn policy(&self) -> TruncationPolicy {
        self.offsets
            .first()
            .map(|o| *o.policy())
            .unwrap_or_default()
    }
}

fn collect_spike_scales(f: &InternalExpr, out: &mut Vec<HyperReal>) {
    match f {
        InternalExpr::Mollify { base, scale, .. } => {
            if scale.classify() == NumClass::NonzeroInfinitesimal && !out.contains(scale) {
                out.push(scale.clone());
            }
            collect_spike_scales(base, out);
        }
        InternalExpr::Add(a, b) | InternalExpr::Mul(a, b) => {
            collect_spike_scales(a, out);
            collect_spike_scales(b, out);
        }
        InternalExpr::Neg(a)
        | InternalExpr::Recip(a)
        | InternalExpr::IntPow(a, _)
        | InternalExpr::Sin(a)
        | InternalExpr::Cos(a)
        | InternalExpr::Exp(a) => collect_spike_scales(a, out),
        InternalExpr::Piecewise {
            lhs,
            rhs,
            then,
            els,
            ..
        } => {
            collect_spike_scales(lhs, out);
            collect_spike_scales(rhs, out);
            collect_spike_scales(then, out);
            collect_spike_scales(els, out);
        }
        InternalExpr::Var
        | InternalExpr::Const(_)
        | InternalExpr::Bump
        | InternalExpr::Plateau(_)
        | InternalExpr::TestRef(_) => {}
    }
}

// ---- S-continuity -------------------------------------------------------

/// Probe-based S-continuity check of `f` at the real point `p`.
///
/// Probes are evaluated in order; the first appreciable jump refutes (a
/// refutation found by a later probe takes priority over an evaluation
/// error at an earlier one, and only if no probe refutes is the first error
/// reported). With all probes infinitely close, structural rules may
/// upgrade the verdict to [`Verdict::Proved`].
pub fn s_continuity(
    f: &InternalExpr,
    p: f64,
    probes: &MonadProbeSet,
) -> Result<Verdict, EvalError> {
    let policy = probes.policy();
    let base_point = HyperReal::from_real_with(p, policy);
    let v0 = f.eval_at(&base_point)?;
    let mut first_err: Option<EvalError> = None;
    for off in &probes.offsets {
        match f.eval_at(&base_point.add(off)) {
            Err(e) => {
                if first_err.is_none() {
                    first_err = Some(e);
                }
            }
            Ok(v) => {
                if !v.infinitely_close(&v0) {
                    return Ok(Verdict::Refuted {
                        witness: RefutationWitness {
                            probe: off.clone(),
                            base_value: v0,
                            probe_value: v,
                        },
                    });
                }
            }
        }
    }
    if let Some(e) = first_err {
        return Err(e);
    }
    Ok(structural_s_verdict(f, p, probes, &base_point))
}

/// S-continuity of a pointwise product — the probe evaluates the product
/// expression, so spike×smooth cancellations are seen exactly.
pub fn product_s_continuity(
    f1: &InternalExpr,
    f2: &InternalExpr,
    p: f64,
    probes: &MonadProbeSet,
) -> Result<Verdict, EvalError> {
    let product = InternalExpr::mul(f1.clone(), f2.clone());
    s_continuity(&product, p, probes)
}

fn structural_s_verdict(
    f: &InternalExpr,
    p: f64,
    probes: &MonadProbeSet,
    base_point: &HyperReal,
) -> Verdict {
    if is_limited_smooth_tree(f) {
        return Verdict::Proved {
            rule: "smooth composition with limited constants",
        };
    }
    if let InternalExpr::Piecewise {
        lhs,
        op,
        rhs,
        then,
        els,
    } = f
    {
        let boundary = match (&**lhs, &**rhs) {
            (InternalExpr::Var, InternalExpr::Const(c)) => c.standard_part().ok(),
            _ => None,
        };
        if let Some(b) = boundary {
            if p != b {
                // The whole monad of p lies strictly on one side of the
                // boundary, so only the active branch matters.
                let ord = if p < b {
                    core::cmp::Ordering::Less
                } else {
                    core::cmp::Ordering::Greater
                };
                let branch = if op_holds(*op, ord) { then } else { els };
                return match s_continuity(branch, p, probes) {
                    Ok(Verdict::Proved { .. }) => Verdict::Proved {
                        rule: "branch away from its boundary",
                    },
                    Ok(v) => v,
                    Err(_) => Verdict::NotRefuted,
                };
            }
            // p is the boundary: an infinitesimal jump between structurally
            // continuous branches is still S-continuous.
            if let (Ok(tv), Ok(ev)) = (then.eval_at(base_point), els.eval_at(base_point)) {
                let both_smooth = is_limited_smooth_tree(then) && is_limited_smooth_tree(els);
                if tv.infinitely_close(&ev) && both_smooth {
                    return Verdict::Proved {
                        rule: "infinitesimal jump at the branch point",
                    };
                }
            }
        }
    }
    Verdict::NotRefuted
}

/// Smooth fragment with limited constants: every node preserves
/// "limited value, infinitesimal increments stay infinitesimal".
fn is_limited_smooth_tree(f: &InternalExpr) -> bool {
    match f {
        InternalExpr::Var
        | InternalExpr::Bump
        | InternalExpr::Plateau(_)
        | InternalExpr::TestRef(_) => true,
        InternalExpr::Const(h) => h.is_limited(),
        InternalExpr::Add(a, b) | InternalExpr::Mul(a, b) => {
            is_limited_smooth_tree(a) && is_limited_smooth_tree(b)
        }
        InternalExpr::Neg(a)
        | InternalExpr::IntPow(a, _)
        | InternalExpr::Sin(a)
        | InternalExpr::Cos(a)
        | InternalExpr::Exp(a) => is_limited_smooth_tree(a),
        InternalExpr::Mollify {
            base,
            scale,
            amplitude,
        } => {
            scale.classify() == NumClass::Appreciable
                && amplitude.is_limited()
                && is_limited_smooth_tree(base)
        }
        InternalExpr::Recip(_) | InternalExpr::Piecewise { .. } => false,
    }
}

// ---- *-continuity -------------------------------------------------------

/// Structural *-continuity of `f` at the series point `q`.
///
/// Smooth primitives are continuous at every internal point by transfer —
/// no evaluation happens for them, which is what lets unlimited-frequency
/// oscillations be recognized as *-continuous. Branch nodes compare their
/// two sides at `q`: an exact tie with a nonzero value gap refutes.
pub fn star_continuity(f: &InternalExpr, q: &HyperReal) -> Verdict {
    match f {
        InternalExpr::Var | InternalExpr::Const(_) => Verdict::Proved {
            rule: "smooth at every internal point",
        },
        InternalExpr::Bump | InternalExpr::Plateau(_) | InternalExpr::TestRef(_) => {
            Verdict::Proved {
                rule: "smooth at every internal point",
            }
        }
        InternalExpr::Add(a, b) | InternalExpr::Mul(a, b) => {
            meet(star_continuity(a, q), star_continuity(b, q))
        }
        InternalExpr::Neg(a)
        | InternalExpr::IntPow(a, _)
        | InternalExpr::Sin(a)
        | InternalExpr::Cos(a)
        | InternalExpr::Exp(a) => star_continuity(a, q),
        InternalExpr::Recip(a) => match a.eval_at(q) {
            Err(_) => Verdict::NotRefuted,
            Ok(v) => {
                if v.is_zero() {
                    Verdict::Refuted {
                        witness: RefutationWitness {
                            probe: q.clone(),
                            base_value: v.clone(),
                            probe_value: v,
                        },
                    }
                } else {
                    star_continuity(a, q)
                }
            }
        },
        InternalExpr::Mollify { base, scale, .. } => match q.div(scale) {
            Err(_) => Verdict::NotRefuted,
            Ok(inner) => match star_continuity(base, &inner) {
                Verdict::Proved { .. } => Verdict::Proved {
                    rule: "rescaled smooth shape",
                },
                v => v,
            },
        },
        InternalExpr::Piecewise {
            lhs,
            op: _,
            rhs,
            then,
            els,
        } => {
            let (lv, rv) = match (lhs.eval_at(q), rhs.eval_at(q)) {
                (Ok(l), Ok(r)) => (l, r),
                _ => return Verdict::NotRefuted,
            };
            match lv.compare(&rv) {
                core::cmp::Ordering::Equal => {
                    let (tv, ev) = match (then.eval_at(q), els.eval_at(q)) {
                        (Ok(t), Ok(e)) => (t, e),
                        _ => return Verdict::NotRefuted,
                    };
                    if !tv.sub(&ev).is_zero() {
                        return Verdict::Refuted {
                            witness: RefutationWitness {
                                probe: q.clone(),
                                base_value: tv,
                                probe_value: ev,
                            },
                        };
                    }
                    meet(star_continuity(then, q), star_continuity(els, q))
                }
                ord => {
                    // Strictly off the boundary: only the active branch is
                    // seen near q.
                    let holds = match f {
                        InternalExpr::Piecewise { op, .. } => op_holds(*op, ord),
                        _ => unreachable!(),
                    };
                    let branch = if holds { then } else { els };
                    star_continuity(branch, q)
                }
            }
        }
    }
}

fn op_holds(op: crate::expr::CmpOp, ord: core::cmp::Ordering) -> bool {
    use core::cmp::Ordering::*;
    use crate::expr::CmpOp::*;
    matches!(
        (op, ord),
        (Lt, Less) | (Le, Less) | (Le, Equal) | (Ge, Greater) | (Ge, Equal) | (Gt, Greater)
    )
}

/// Refuted > NotRefuted > Proved (keep the strongest negative finding).
fn meet(a: Verdict, b: Verdict) -> Verdict {
    match (a, b) {
        (v @ Verdict::Refuted { .. }, _) => v,
        (_, v @ Verdict::Refuted { .. }) => v,
        (Verdict::NotRefuted, _) | (_, Verdict::NotRefuted) => Verdict::NotRefuted,
        (v @ Verdict::Proved { .. }, _) => v,
    }
}

// ---- sequences ----------------------------------------------------------

/// A sequence given as an expression in the index variable.
#[derive(Clone, Debug)]
pub struct InternalSeq(pub InternalExpr);

/// Default unlimited indices at which sequences are sampled: 1/ε, 2/ε, 1/ε².
pub fn unlimited_indices(policy: TruncationPolicy) -> Vec<HyperReal> {
    vec![
        HyperReal::monomial(1.0, ExponentQ::from_int(-1), policy),
        HyperReal::monomial(2.0, ExponentQ::from_int(-1), policy),
        HyperReal::monomial(1.0, ExponentQ::from_int(-2), policy),
    ]
}

/// S-convergence of `seq` to the real `limit`: the sequence value at every
/// unlimited sample index must be infinitely close to the limit.
pub fn s_convergence(
    seq: &InternalSeq,
    limit: f64,
    omegas: &[HyperReal],
) -> Result<Verdict, EvalError> {
    if !contains_var(&seq.0) {
        let v = seq.0.eval_at(&HyperReal::from_real(0.0))?;
        let l = HyperReal::from_real_with(limit, *v.policy());
        return Ok(if v.infinitely_close(&l) {
            Verdict::Proved {
                rule: "constant sequence",
            }
        } else {
            Verdict::Refuted {
                witness: RefutationWitness {
                    probe: HyperReal::from_real(0.0),
                    base_value: l,
                    probe_value: v,
                },
            }
        });
    }
    for omega in omegas {
        let v = seq.0.eval_at(omega)?;
        let l = HyperReal::from_real_with(limit, *omega.policy());
        if !v.infinitely_close(&l) {
            return Ok(Verdict::Refuted {
                witness: RefutationWitness {
                    probe: omega.clone(),
                    base_value: l,
                    probe_value: v,
                },
            });
        }
    }
    Ok(Verdict::NotRefuted)
}

fn contains_var(e: &InternalExpr) -> bool {
    match e {
        // Every leaf except a constant reads the variable.
        InternalExpr::Var
        | InternalExpr::Bump
        | InternalExpr::Plateau(_)
        | InternalExpr::TestRef(_) => true,
        InternalExpr::Const(_) => false,
        InternalExpr::Add(a, b) | InternalExpr::Mul(a, b) => contains_var(a) || contains_var(b),
        InternalExpr::Neg(a)
        | InternalExpr::Recip(a)
        | InternalExpr::IntPow(a, _)
        | InternalExpr::Sin(a)
        | InternalExpr::Cos(a)
        | InternalExpr::Exp(a) => contains_var(a),
        InternalExpr::Piecewise {
            lhs,
            rhs,
            then,
            els,
            ..
        } => contains_var(lhs) || contains_var(rhs) || contains_var(then) || contains_var(els),
        InternalExpr::Mollify { base, .. } => contains_var(base),
    }
}

/// Whether `x` lies within limited distance of `q`.
pub fn limited_point(x: &HyperReal, q: &HyperReal) -> bool {
    x.sub(q).classify() != NumClass::Infinite
}

// ---- shadows ------------------------------------------------------------

/// Why a shadow could not be tabulated.
#[derive(Clone, Debug, Error, PartialEq)]
pub enum ShadowError {
    #[error("not S-continuous at {at}")]
    NotSContinuous { at: f64 },
    #[error("evaluation failed")]
    Eval(#[from] EvalError),
}

/// A tabulated standard shadow: standard parts over a grid, the
/// reconstructed standard expression when one exists, and the largest
/// pointwise defect between the two.
#[derive(Clone, Debug)]
pub struct ShadowReport {
    pub table: Vec<(f64, f64)>,
    pub ast: Option<InternalExpr>,
    pub max_defect: f64,
}

/// Tabulate st f(p) over `grid`, refusing points where S-continuity is
/// refuted (the shadow would not be well defined there).
pub fn shadow(
    f: &InternalExpr,
    grid: &[f64],
    probes: &MonadProbeSet,
) -> Result<ShadowReport, ShadowError> {
    let policy = probes.policy();
    let mut table = Vec::with_capacity(grid.len());
    for &p in grid {
        if s_continuity(f, p, probes)?.is_refuted() {
            return Err(ShadowError::NotSContinuous { at: p });
        }
        let v = f.eval_at(&HyperReal::from_real_with(p, policy))?;
        let s = v.standard_part().map_err(EvalError::from)?;
        table.push((p, s));
    }
    let ast = f.shadow_ast().ok();
    let mut max_defect: f64 = 0.0;
    if let Some(a) = &ast {
        for (p, s) in &table {
            if let Ok(v) = a.eval_at(&HyperReal::from_real_with(*p, policy)) {
                if let Ok(sv) = v.standard_part() {
                    max_defect = max_defect.max(libm::fabs(sv - s));
                }
            }
        }
    }
    Ok(ShadowReport {
        table,
        ast,
        max_defect,
    })
}

// ---- seminorms ----------------------------------------------------------

/// Sup-norms of derivatives over a deterministic sample grid of the
/// support: the C^k seminorm ladder used to recognize null sequences of
/// test functions.
#[derive(Clone, Debug)]
pub struct SeminormFamily {
    pub orders: Vec<usize>,
}

/// Samples per seminorm evaluation (support endpoints included).
const SEMINORM_SAMPLES: usize = 513;

impl SeminormFamily {
    pub fn up_to(max_order: usize) -> SeminormFamily {
        SeminormFamily {
            orders: (0..=max_order).collect(),
        }
    }

    /// One sup-norm per requested order, in order.
    pub fn seminorms(&self, g: &TestFn) -> Result<Vec<f64>, TestFnError> {
        let (lo, hi) = g.support();
        let mut out = Vec::with_capacity(self.orders.len());
        for &k in &self.orders {
            let mut sup = 0.0f64;
            for i in 0..SEMINORM_SAMPLES {
                let x = lo + (hi - lo) * (i as f64) / ((SEMINORM_SAMPLES - 1) as f64);
                let v = libm::fabs(g.deriv_eval(k, x)?);
                sup = sup.max(v);
            }
            out.push(sup);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{make_dirac, CmpOp};
    use approx::assert_relative_eq;

    fn probes() -> MonadProbeSet {
        MonadProbeSet::standard(TruncationPolicy::default())
    }

    fn eps() -> HyperReal {
        HyperReal::epsilon()
    }

    #[test]
    fn smooth_expressions_are_proved_s_continuous() {
        let f = InternalExpr::exp(InternalExpr::sin(InternalExpr::var()));
        for p in [-2.0, 0.0, 1.5] {
            assert!(s_continuity(&f, p, &probes()).unwrap().is_proved());
        }
        // Infinitesimal constant shifts stay S-continuous.
        let g = InternalExpr::add(
            InternalExpr::var(),
            InternalExpr::constant(eps()),
        );
        assert!(s_continuity(&g, 0.0, &probes()).unwrap().is_proved());
    }

    #[test]
    fn spike_is_refuted_at_its_center_with_the_first_probe() {
        let d = make_dirac();
        let v = s_continuity(&d, 0.0, &probes()).unwrap();
        match v {
            Verdict::Refuted { witness } => {
                assert_eq!(witness.probe, eps());
                assert!(!witness.base_value.is_limited());
                assert!(witness.probe_value.is_zero());
            }
            other => panic!("expected refutation, got {other:?}"),
        }
        // Away from the spike the probes see only zeros: nothing to refute.
        assert_eq!(s_continuity(&d, 1.0, &probes()).unwrap(), Verdict::NotRefuted);
    }

    #[test]
    fn unlimited_frequency_oscillation() {
        // sin(x/ε): *-continuous everywhere by structure, S-continuity at 0
        // refuted — with the witness (π/2)·ε when that probe is tried first.
        let lam = HyperReal::monomial(1.0, ExponentQ::from_int(-1), TruncationPolicy::default());
        let f = InternalExpr::sin(InternalExpr::mul(
            InternalExpr::constant(lam),
            InternalExpr::var(),
        ));
        assert!(star_continuity(&f, &HyperReal::from_real(0.3)).is_proved());
        assert!(star_continuity(&f, &eps()).is_proved());

        let pi_half = eps().scale(core::f64::consts::FRAC_PI_2);
        let custom = MonadProbeSet::custom(vec![pi_half.clone(), eps()]);
        match s_continuity(&f, 0.0, &custom).unwrap() {
            Verdict::Refuted { witness } => {
                assert_eq!(witness.probe, pi_half);
                assert!(witness.base_value.is_zero());
                assert_relative_eq!(
                    witness.probe_value.standard_part().unwrap(),
                    1.0,
                    epsilon = 1e-15
                );
            }
            other => panic!("expected refutation, got {other:?}"),
        }
        // The default ladder refutes too (witness +ε, value sin 1).
        match s_continuity(&f, 0.0, &probes()).unwrap() {
            Verdict::Refuted { witness } => assert_eq!(witness.probe, eps()),
            other => panic!("expected refutation, got {other:?}"),
        }
    }

    #[test]
    fn step_with_appreciable_jump() {
        let b = 2.0;
        let step = InternalExpr::piecewise(
            InternalExpr::var(),
            CmpOp::Lt,
            InternalExpr::real(b),
            InternalExpr::real(0.0),
            InternalExpr::real(1.0),
        );
        // S-continuity at the jump: refuted by the −ε probe (the +ε side
        // agrees with the base value).
        match s_continuity(&step, b, &probes()).unwrap() {
            Verdict::Refuted { witness } => {
                assert_eq!(witness.probe, eps().neg());
                assert!(witness.probe_value.is_zero());
            }
            other => panic!("expected refutation, got {other:?}"),
        }
        // Away from the boundary both continuity notions hold.
        assert!(s_continuity(&step, 3.0, &probes()).unwrap().is_proved());
        assert!(star_continuity(&step, &HyperReal::from_real(3.0)).is_proved());
        // *-continuity: refuted exactly at the boundary point, proved at an
        // infinitesimally displaced one.
        match star_continuity(&step, &HyperReal::from_real(b)) {
            Verdict::Refuted { witness } => {
                assert!(witness.base_value.is_zero());
                assert_eq!(witness.probe_value, HyperReal::from_real(1.0));
            }
            other => panic!("expected refutation, got {other:?}"),
        }
        assert!(star_continuity(&step, &HyperReal::from_real(b).add(&eps())).is_proved());
    }

    #[test]
    fn step_with_infinitesimal_jump_is_s_continuous() {
        let b = 2.0;
        let step = InternalExpr::piecewise(
            InternalExpr::var(),
            CmpOp::Lt,
            InternalExpr::real(b),
            InternalExpr::real(0.0),
            InternalExpr::constant(eps()),
        );
        match s_continuity(&step, b, &probes()).unwrap() {
            Verdict::Proved { rule } => {
                assert_eq!(rule, "infinitesimal jump at the branch point")
            }
            other => panic!("expected proof, got {other:?}"),
        }
        // Internally the gap is still exact: *-continuity is refuted at b.
        assert!(star_continuity(&step, &HyperReal::from_real(b)).is_refuted());
    }

    fn indicator_of_width(width: HyperReal) -> InternalExpr {
        // 1 on [−w, 0) ∪ (0, w], 0 at 0 and outside: a comb that collapses
        // to 0 in the standard world but takes the value 1 at ±infinitesimal
        // offsets.
        let w = InternalExpr::constant(width);
        InternalExpr::piecewise(
            InternalExpr::var(),
            CmpOp::Lt,
            InternalExpr::neg(w.clone()),
            InternalExpr::real(0.0),
            InternalExpr::piecewise(
                InternalExpr::var(),
                CmpOp::Lt,
                InternalExpr::real(0.0),
                InternalExpr::real(1.0),
                InternalExpr::piecewise(
                    InternalExpr::var(),
                    CmpOp::Le,
                    InternalExpr::real(0.0),
                    InternalExpr::real(0.0),
                    InternalExpr::piecewise(
                        InternalExpr::var(),
                        CmpOp::Le,
                        w,
                        InternalExpr::real(1.0),
                        InternalExpr::real(0.0),
                    ),
                ),
            ),
        )
    }

    #[test]
    fn infinitesimal_indicator_comb() {
        let f = indicator_of_width(eps());
        // At 0 the base value is 0 but x = +ε lands on the comb: refuted.
        match s_continuity(&f, 0.0, &probes()).unwrap() {
            Verdict::Refuted { witness } => {
                assert_eq!(witness.probe, eps());
                assert!(witness.base_value.is_zero());
                assert_eq!(witness.probe_value, HyperReal::from_real(1.0));
            }
            other => panic!("expected refutation, got {other:?}"),
        }
        // Everywhere else the whole monad evaluates to 0.
        for p in [-1.0, -0.25, 0.5, 3.0] {
            let v = s_continuity(&f, p, &probes()).unwrap();
            assert!(!v.is_refuted(), "unexpected refutation at {p}");
        }
    }

    #[test]
    fn sequences_sampled_at_unlimited_indices() {
        let omegas = unlimited_indices(TruncationPolicy::default());
        // 1/n → 0.
        let inv = InternalSeq(InternalExpr::recip(InternalExpr::var()));
        assert_eq!(s_convergence(&inv, 0.0, &omegas).unwrap(), Verdict::NotRefuted);
        // n·ε does not S-converge to 0: at index 1/ε it equals 1.
        let drift = InternalSeq(InternalExpr::mul(
            InternalExpr::var(),
            InternalExpr::constant(eps()),
        ));
        match s_convergence(&drift, 0.0, &omegas).unwrap() {
            Verdict::Refuted { witness } => {
                assert_eq!(witness.probe, omegas[0]);
                assert_eq!(witness.probe_value, HyperReal::from_real(1.0));
            }
            other => panic!("expected refutation, got {other:?}"),
        }
        // Constant sequences are proved outright.
        let c = InternalSeq(InternalExpr::real(3.0));
        assert!(s_convergence(&c, 3.0, &omegas).unwrap().is_proved());
        assert!(s_convergence(&c, 2.0, &omegas).unwrap().is_refuted());
    }

    #[test]
    fn limited_points() {
        let q = HyperReal::from_real(1.0);
        assert!(limited_point(&HyperReal::from_real(500.0), &q));
        assert!(limited_point(&q.add(&eps()), &q));
        let omega = HyperReal::monomial(1.0, ExponentQ::from_int(-1), TruncationPolicy::default());
        assert!(!limited_point(&omega, &q));
    }

    #[test]
    fn shadow_of_infinitesimally_shifted_sine() {
        let f = InternalExpr::sin(InternalExpr::add(
            InternalExpr::var(),
            InternalExpr::constant(eps()),
        ));
        let grid = [-1.0, -0.3, 0.0, 0.7, 2.0];
        let r = shadow(&f, &grid, &probes()).unwrap();
        assert_eq!(r.ast, Some(InternalExpr::sin(InternalExpr::var())));
        // The tabulated standard parts and the reconstructed expression go
        // through the same sine evaluation: the defect is identically zero.
        assert_eq!(r.max_defect, 0.0);
        for (p, s) in &r.table {
            assert_eq!(*s, libm::sin(*p));
        }
    }

    #[test]
    fn shadow_refuses_s_discontinuous_points() {
        let d = make_dirac();
        let err = shadow(&d, &[-1.0, 0.0, 1.0], &probes()).unwrap_err();
        assert_eq!(err, ShadowError::NotSContinuous { at: 0.0 });
        // Excluding the bad point, the shadow is identically zero.
        let r = shadow(&d, &[-1.0, -0.5, 0.5, 1.0], &probes()).unwrap();
        assert!(r.table.iter().all(|(_, s)| *s == 0.0));
        assert!(r.ast.is_none());
    }

    #[test]
    fn comb_shadow_vanishes_away_from_origin() {
        let f = indicator_of_width(eps());
        let r = shadow(&f, &[-2.0, -1.0, 1.0, 2.0], &probes()).unwrap();
        assert!(r.table.iter().all(|(_, s)| *s == 0.0));
    }

    #[test]
    fn seminorm_ladder_laws() {
        let fam = SeminormFamily::up_to(2);
        let g = TestFn::bump(0.0, 1.0);
        let s = fam.seminorms(&g).unwrap();
        // Sup of the bump itself is its center value (the grid hits 0).
        assert_eq!(s[0], libm::exp(-1.0));
        assert!(s[1] > 0.0 && s[2] > 0.0);

        // Scaling law: |c|·g scales every seminorm by |c|.
        let scaled = TestFn::lin_comb(vec![(-3.0, g.clone())]);
        let ss = fam.seminorms(&scaled).unwrap();
        for (a, b) in ss.iter().zip(&s) {
            assert_relative_eq!(*a, 3.0 * b, max_relative = 1e-12);
        }

        // Triangle inequality on the shared grid.
        let h = TestFn::bump(0.25, 0.75);
        let sum = TestFn::lin_comb(vec![(1.0, g.clone()), (1.0, h.clone())]);
        let s_sum = fam.seminorms(&sum).unwrap();
        let s_g = fam.seminorms(&g).unwrap();
        let s_h = fam.seminorms(&h).unwrap();
        for k in 0..3 {
            assert!(s_sum[k] <= s_g[k] + s_h[k] + 1e-9);
        }
    }

    #[test]
    fn product_with_spike_can_refute() {
        // δ·δ jumps from unlimited at 0 to zero at ε.
        let d = make_dirac();
        let v = product_s_continuity(&d, &d, 0.0, &probes()).unwrap();
        assert!(v.is_refuted());
        // x·δ vanishes at the center and at ±ε (the bump's edge) but takes
        // an appreciable value half-way into the spike: the internal product
        // is not S-continuous at 0 even though the associated functional is
        // equivalent to zero.
        match product_s_continuity(&InternalExpr::var(), &d, 0.0, &probes()).unwrap() {
            Verdict::Refuted { witness } => {
                assert_eq!(witness.probe, eps().scale(0.5));
                assert!(witness.base_value.is_zero());
                assert_relative_eq!(
                    witness.probe_value.standard_part().unwrap(),
                    0.5 * 0.26359713811572677 / 0.44399381616807944,
                    max_relative = 1e-12
                );
            }
            other => panic!("expected refutation, got {other:?}"),
        }
    }

    #[test]
    fn probe_ladder_order_and_spike_extension() {
        let std = probes();
        assert_eq!(std.offsets[0], eps());
        assert_eq!(std.offsets[1], eps().neg());
        assert_eq!(std.offsets.len(), 12);
        // A spike at scale ε² adds its own offsets.
        let fine = InternalExpr::mollify(
            InternalExpr::Bump,
            eps().pow_int(2),
            HyperReal::from_real(1.0),
        );
        let ext = MonadProbeSet::for_expr(&fine, TruncationPolicy::default());
        assert!(ext.offsets.len() > 12);
        assert!(ext.offsets.contains(&eps().pow_int(2).scale(0.5)));
    }
}
