//! The quasi-inner product ⟨f, g⟩ = ∫ f(x)·g(x) dx, computed
//! coefficient-wise as a series, together with energy integrals ⟨f, f⟩ over
//! windows and the admissibility check for the function class the calculus
//! operates on.
//!
//! Integrands are brought into a normal form first: a sum of terms, each a
//! series scalar × at most one *spike* (a mollification at infinitesimal
//! scale) × a residual smooth factor. Spike-free terms integrate directly
//! over a real domain. For a spike at scale σ the substitution x = σ·u turns
//! the concentrated integral into a quadrature over the spike's base
//! support, with the remaining factors sampled at the infinitesimal points
//! σ·u — this is where pairings against test functions pick up their Taylor
//! corrections in powers of σ.

use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

use crate::expr::{EvalError, InternalExpr};
use crate::hyperreal::{HyperReal, NumClass, TruncationPolicy};
use crate::quad::{integrate_with_breakpoints, QuadFailure, QuadratureConfig};
use crate::testfn::{default_corpus, TestFn};

/// Policy and quadrature settings shared by all pairing operations.
#[derive(Clone, Copy, Debug, Default)]
pub struct PairingConfig {
    pub policy: TruncationPolicy,
    pub quad: QuadratureConfig,
}

/// Coarse magnitude of a pairing value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairingStatus {
    /// Appreciable: finite and not infinitely small.
    Limited,
    /// Zero or a nonzero infinitesimal.
    Infinitesimal,
    /// Unlimited: the leading exponent is negative.
    Unlimited,
}

impl PairingStatus {
    pub fn from_class(class: NumClass) -> PairingStatus {
        match class {
            NumClass::Zero | NumClass::NonzeroInfinitesimal => PairingStatus::Infinitesimal,
            NumClass::Appreciable => PairingStatus::Limited,
            NumClass::Infinite => PairingStatus::Unlimited,
        }
    }
}

/// Which normal-form route produced a pairing value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairingForm {
    /// One spike-free term, integrated over a real domain.
    Regular,
    /// One spike term, integrated in rescaled coordinates.
    Mollified,
    /// Several terms were summed.
    Sum,
}

/// A pairing or energy value with its provenance.
#[derive(Clone, Debug)]
pub struct PairingResult {
    pub value: HyperReal,
    pub status: PairingStatus,
    /// Summed quadrature error estimates across all terms.
    pub quad_error: f64,
    pub form: PairingForm,
}

/// Why a pairing could not be computed.
#[derive(Clone, Debug, Error, PartialEq)]
pub enum PairingError {
    /// The integrand has no supported normal form (spike inside a
    /// non-product context, mismatched spike scales, unbounded domain, or an
    /// evaluation that only makes sense at unlimited arguments).
    #[error("unsupported integrand form: {0}")]
    UnsupportedForm(&'static str),
    #[error("integrand evaluation failed")]
    Eval(#[from] EvalError),
    #[error("quadrature budget exhausted on [{0}, {1}]")]
    QuadratureBudget(f64, f64),
}

fn lift_quad_failure(e: QuadFailure<EvalError>) -> PairingError {
    match e {
        QuadFailure::Integrand(EvalError::UnsupportedEvaluation(msg)) => {
            PairingError::UnsupportedForm(msg)
        }
        QuadFailure::Integrand(err) => PairingError::Eval(err),
        QuadFailure::TooManySubdivisions { interval, .. } => {
            PairingError::QuadratureBudget(interval.0, interval.1)
        }
    }
}

fn reason_of(e: &PairingError) -> &'static str {
    match e {
        PairingError::UnsupportedForm(s) => s,
        PairingError::Eval(EvalError::DivisionByZero) => "division by zero while integrating",
        PairingError::Eval(EvalError::NotLimited) => "unlimited value where a limited one was needed",
        PairingError::Eval(EvalError::UnsupportedEvaluation(s)) => s,
        PairingError::Eval(EvalError::OrderCap { .. }) => "Taylor order cap exceeded",
        PairingError::Eval(EvalError::NotShadowable) => "expression has no standard shadow",
        PairingError::QuadratureBudget(..) => "quadrature budget exhausted",
    }
}

// ---- normal form --------------------------------------------------------

struct SpikeFactor {
    base: InternalExpr,
    scale: HyperReal,
    amplitude: HyperReal,
}

struct NormalTerm {
    scalar: HyperReal,
    spike: Option<SpikeFactor>,
    rest: Option<InternalExpr>,
}

/// Pull top-level series constants out of a spike-free expression so that
/// scalar multiples stay *exactly* scalar multiples of the same quadrature.
fn extract_scalar(e: &InternalExpr, policy: TruncationPolicy) -> (HyperReal, InternalExpr) {
    match e {
        InternalExpr::Neg(a) => {
            let (s, c) = extract_scalar(a, policy);
            (s.neg(), c)
        }
        InternalExpr::Mul(a, b) => {
            if let InternalExpr::Const(h) = &**a {
                let (s, c) = extract_scalar(b, policy);
                return (s.mul(h), c);
            }
            if let InternalExpr::Const(h) = &**b {
                let (s, c) = extract_scalar(a, policy);
                return (s.mul(h), c);
            }
            (HyperReal::from_real_with(1.0, policy), e.clone())
        }
        InternalExpr::Const(h) => (h.clone(), InternalExpr::real(1.0)),
        other => (HyperReal::from_real_with(1.0, policy), other.clone()),
    }
}

/// Distribute sums (and small spike powers) into a list of factor products.
fn distribute(e: &InternalExpr) -> Result<Vec<Vec<InternalExpr>>, PairingError> {
    match e {
        InternalExpr::Add(a, b) => {
            let mut out = distribute(a)?;
            out.extend(distribute(b)?);
            Ok(out)
        }
        InternalExpr::Neg(a) => {
            let mut out = distribute(a)?;
            for t in &mut out {
                t.push(InternalExpr::real(-1.0));
            }
            Ok(out)
        }
        InternalExpr::Mul(a, b) => {
            let left = distribute(a)?;
            let right = distribute(b)?;
            let mut out = Vec::with_capacity(left.len() * right.len());
            for l in &left {
                for r in &right {
                    let mut t = l.clone();
                    t.extend(r.iter().cloned());
                    out.push(t);
                }
            }
            Ok(out)
        }
        InternalExpr::IntPow(a, n) if a.contains_infinitesimal_mollify() => {
            if *n == 0 {
                return Ok(vec![vec![InternalExpr::real(1.0)]]);
            }
            if *n > 8 {
                return Err(PairingError::UnsupportedForm(
                    "spike raised to a power too large to expand",
                ));
            }
            let base = distribute(a)?;
            let mut out = base.clone();
            for _ in 1..*n {
                let mut next = Vec::with_capacity(out.len() * base.len());
                for l in &out {
                    for r in &base {
                        let mut t = l.clone();
                        t.extend(r.iter().cloned());
                        next.push(t);
                    }
                }
                out = next;
            }
            Ok(out)
        }
        other => Ok(vec![vec![other.clone()]]),
    }
}

fn classify_term(
    factors: Vec<InternalExpr>,
    policy: TruncationPolicy,
) -> Result<NormalTerm, PairingError> {
    let mut scalar = HyperReal::from_real_with(1.0, policy);
    let mut spike: Option<SpikeFactor> = None;
    let mut rest: Option<InternalExpr> = None;
    for fac in factors {
        match fac {
            InternalExpr::Const(h) => scalar = scalar.mul(&h),
            InternalExpr::Mollify {
                base,
                scale,
                amplitude,
            } if scale.classify() == NumClass::NonzeroInfinitesimal => {
                if base.contains_infinitesimal_mollify() {
                    return Err(PairingError::UnsupportedForm(
                        "spike nested inside another spike",
                    ));
                }
                match &mut spike {
                    None => {
                        spike = Some(SpikeFactor {
                            base: *base,
                            scale,
                            amplitude,
                        })
                    }
                    Some(s) => {
                        if s.scale != scale {
                            return Err(PairingError::UnsupportedForm(
                                "spikes at different scales in one product",
                            ));
                        }
                        s.base = InternalExpr::mul(s.base.clone(), *base);
                        s.amplitude = s.amplitude.mul(&amplitude);
                    }
                }
            }
            other => {
                if other.contains_infinitesimal_mollify() {
                    return Err(PairingError::UnsupportedForm(
                        "spike inside a non-product context",
                    ));
                }
                rest = Some(match rest {
                    None => other,
                    Some(r) => InternalExpr::mul(r, other),
                });
            }
        }
    }
    Ok(NormalTerm {
        scalar,
        spike,
        rest,
    })
}

fn normalize(f: &InternalExpr, policy: TruncationPolicy) -> Result<Vec<NormalTerm>, PairingError> {
    if !f.contains_infinitesimal_mollify() {
        let (scalar, core) = extract_scalar(f, policy);
        return Ok(vec![NormalTerm {
            scalar,
            spike: None,
            rest: Some(core),
        }]);
    }
    distribute(f)?
        .into_iter()
        .map(|fs| classify_term(fs, policy))
        .collect()
}

// ---- term integration ---------------------------------------------------

/// Position of a window endpoint after dividing by the spike scale.
enum UBound {
    NegUnlimited,
    At(f64),
    PosUnlimited,
}

fn u_bound(x: f64, sigma: &HyperReal, policy: TruncationPolicy) -> Result<UBound, PairingError> {
    let ratio = HyperReal::from_real_with(x, policy)
        .div(sigma)
        .map_err(|_| PairingError::UnsupportedForm("spike scale is exactly zero"))?;
    Ok(match ratio.classify() {
        NumClass::Infinite => {
            if ratio.leading().map(|(_, c)| c > 0.0).unwrap_or(false) {
                UBound::PosUnlimited
            } else {
                UBound::NegUnlimited
            }
        }
        NumClass::Zero => UBound::At(0.0),
        _ => UBound::At(ratio.standard_part().expect("limited ratio")),
    })
}

fn ubound_rank(b: &UBound) -> (i8, f64) {
    match b {
        UBound::NegUnlimited => (-1, 0.0),
        UBound::At(v) => (0, *v),
        UBound::PosUnlimited => (1, 0.0),
    }
}

struct TermOutcome {
    value: HyperReal,
    error: f64,
    form: PairingForm,
}

fn zero_outcome(policy: TruncationPolicy, form: PairingForm) -> TermOutcome {
    TermOutcome {
        value: HyperReal::zero_with(policy),
        error: 0.0,
        form,
    }
}

fn integrate_term(
    term: &NormalTerm,
    weight: Option<&TestFn>,
    window: Option<(f64, f64)>,
    cfg: &PairingConfig,
) -> Result<TermOutcome, PairingError> {
    let policy = cfg.policy;
    match &term.spike {
        None => {
            let core = term
                .rest
                .clone()
                .unwrap_or_else(|| InternalExpr::real(1.0));
            let mut dom: Option<(f64, f64)> = weight.map(|g| g.support());
            if let Some((c, d)) = window {
                dom = Some(match dom {
                    None => (c, d),
                    Some((lo, hi)) => (lo.max(c), hi.min(d)),
                });
            }
            let dom = match dom.or_else(|| core.structural_support()) {
                Some(d) => d,
                None => {
                    return Err(PairingError::UnsupportedForm(
                        "cannot bound the integration domain",
                    ))
                }
            };
            if dom.0 >= dom.1 {
                return Ok(zero_outcome(policy, PairingForm::Regular));
            }
            let mut cuts = Vec::new();
            core.real_breakpoints(&mut cuts);
            if let Some(g) = weight {
                let (lo, hi) = g.support();
                cuts.push(lo);
                cuts.push(hi);
            }
            let out = integrate_with_breakpoints(
                |x| {
                    let v = core.eval_at(&HyperReal::from_real_with(x, policy))?;
                    Ok::<_, EvalError>(match weight {
                        Some(g) => v.scale(g.eval(x)),
                        None => v,
                    })
                },
                dom.0,
                dom.1,
                &cuts,
                &cfg.quad,
            )
            .map_err(lift_quad_failure)?;
            Ok(TermOutcome {
                value: term.scalar.mul(&out.value),
                error: out.error,
                form: PairingForm::Regular,
            })
        }
        Some(SpikeFactor {
            base,
            scale,
            amplitude,
        }) => {
            let (blo, bhi) = base.structural_support().ok_or(
                PairingError::UnsupportedForm("spike base has no bounded support"),
            )?;
            let (mut lo, mut hi) = (blo, bhi);
            if let Some((c, d)) = window {
                let b1 = u_bound(c, scale, policy)?;
                let b2 = u_bound(d, scale, policy)?;
                let (wlo, whi) = if ubound_rank(&b1) <= ubound_rank(&b2) {
                    (b1, b2)
                } else {
                    (b2, b1)
                };
                match wlo {
                    UBound::NegUnlimited => {}
                    UBound::At(v) => lo = lo.max(v),
                    UBound::PosUnlimited => return Ok(zero_outcome(policy, PairingForm::Mollified)),
                }
                match whi {
                    UBound::PosUnlimited => {}
                    UBound::At(v) => hi = hi.min(v),
                    UBound::NegUnlimited => return Ok(zero_outcome(policy, PairingForm::Mollified)),
                }
            }
            if lo >= hi {
                return Ok(zero_outcome(policy, PairingForm::Mollified));
            }
            let mut cuts = Vec::new();
            base.real_breakpoints(&mut cuts);
            let weight_expr = weight.map(|g| InternalExpr::test_ref(g.clone()));
            let out = integrate_with_breakpoints(
                |u| {
                    let uh = HyperReal::from_real_with(u, policy);
                    let mut v = base.eval_at(&uh)?;
                    if v.is_zero() {
                        return Ok::<_, EvalError>(v);
                    }
                    let xu = scale.scale(u);
                    if let Some(r) = &term.rest {
                        v = v.mul(&r.eval_at(&xu)?);
                    }
                    if let Some(w) = &weight_expr {
                        v = v.mul(&w.eval_at(&xu)?);
                    }
                    Ok(v)
                },
                lo,
                hi,
                &cuts,
                &cfg.quad,
            )
            .map_err(lift_quad_failure)?;
            let value = term
                .scalar
                .mul(amplitude)
                .mul(&scale.abs())
                .mul(&out.value);
            Ok(TermOutcome {
                value,
                error: out.error,
                form: PairingForm::Mollified,
            })
        }
    }
}

fn integrate_normalized(
    terms: &[NormalTerm],
    weight: Option<&TestFn>,
    window: Option<(f64, f64)>,
    cfg: &PairingConfig,
) -> Result<PairingResult, PairingError> {
    let mut value: Option<HyperReal> = None;
    let mut error = 0.0;
    let mut form: Option<PairingForm> = None;
    for term in terms {
        let out = integrate_term(term, weight, window, cfg)?;
        error += out.error;
        value = Some(match value {
            None => out.value,
            Some(v) => v.add(&out.value),
        });
        form = Some(match form {
            None => out.form,
            Some(f) if f == out.form => f,
            Some(_) => PairingForm::Sum,
        });
    }
    let value = value.unwrap_or_else(|| HyperReal::zero_with(cfg.policy));
    let form = if terms.len() > 1 {
        PairingForm::Sum
    } else {
        form.unwrap_or(PairingForm::Regular)
    };
    Ok(PairingResult {
        status: PairingStatus::from_class(value.classify()),
        value,
        quad_error: error,
        form,
    })
}

// ---- public operations --------------------------------------------------

/// ⟨f, g⟩ = ∫ f·g over the support of the test function `g`.
pub fn pair(
    f: &InternalExpr,
    g: &TestFn,
    cfg: &PairingConfig,
) -> Result<PairingResult, PairingError> {
    let terms = normalize(f, cfg.policy)?;
    integrate_normalized(&terms, Some(g), None, cfg)
}

/// Energy ⟨f, f⟩ over the window [c, d].
pub fn energy(
    f: &InternalExpr,
    c: f64,
    d: f64,
    cfg: &PairingConfig,
) -> Result<PairingResult, PairingError> {
    let squared = InternalExpr::mul(f.clone(), f.clone());
    let terms = normalize(&squared, cfg.policy)?;
    integrate_normalized(&terms, None, Some((c, d)), cfg)
}

/// Standard-part Cauchy–Schwarz check over a window: |st⟨f,g⟩|² ≤
/// st⟨f,f⟩·st⟨g,g⟩ (+ slack). Holds vacuously when the energy of `f` is
/// unlimited.
#[derive(Clone, Debug)]
pub struct SchwarzReport {
    pub pairing_std: Option<f64>,
    pub energy_f_std: Option<f64>,
    pub energy_g_std: f64,
    pub holds: bool,
}

pub fn schwarz_check(
    f: &InternalExpr,
    g: &TestFn,
    window: (f64, f64),
    cfg: &PairingConfig,
) -> Result<SchwarzReport, PairingError> {
    let p = pair(f, g, cfg)?;
    let ef = energy(f, window.0, window.1, cfg)?;
    let g_expr = InternalExpr::test_ref(g.clone());
    let eg = energy(&g_expr, window.0, window.1, cfg)?;
    let eg_std = eg
        .value
        .standard_part()
        .map_err(|_| PairingError::UnsupportedForm("test-function energy is unlimited"))?;
    let p_std = p.value.standard_part().ok();
    let ef_std = ef.value.standard_part().ok();
    let holds = match (p_std, ef_std) {
        (_, None) => true,
        (None, Some(_)) => false,
        (Some(pv), Some(efv)) => pv * pv <= efv * eg_std * (1.0 + 1e-9) + 1e-12,
    };
    Ok(SchwarzReport {
        pairing_std: p_std,
        energy_f_std: ef_std,
        energy_g_std: eg_std,
        holds,
    })
}

// ---- membership ---------------------------------------------------------

/// Windows over which energies are probed during membership checking.
pub const ENERGY_WINDOWS: [(f64, f64); 3] = [(-1.0, 1.0), (-4.0, 4.0), (-10.0, 10.0)];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MembershipVerdict {
    Admitted,
    Rejected,
}

/// What disqualified a candidate.
#[derive(Clone, Debug, PartialEq)]
pub enum MembershipWitness {
    /// An energy integral could not be computed at all.
    EnergyFailure {
        window: (f64, f64),
        reason: &'static str,
    },
    /// A corpus pairing could not be computed.
    PairingFailure {
        corpus_index: usize,
        reason: &'static str,
    },
    /// A corpus pairing came out unlimited.
    UnlimitedPairing { corpus_index: usize },
}

#[derive(Clone, Debug)]
pub struct MembershipReport {
    pub verdict: MembershipVerdict,
    pub witness: Option<MembershipWitness>,
    /// Whether every probed energy was limited. Admitted members may carry
    /// unlimited energy (concentrated spikes do); the flag records it.
    pub energy_limited: bool,
    pub energy_statuses: Vec<((f64, f64), PairingStatus)>,
    pub pairings_checked: usize,
}

/// Admissibility: every energy window must *evaluate* (limited or not), and
/// every pairing against the standard corpus must evaluate to a limited (or
/// infinitesimal) value.
pub fn member_t(f: &InternalExpr, cfg: &PairingConfig) -> MembershipReport {
    let mut energy_limited = true;
    let mut energy_statuses = Vec::new();
    for (c, d) in ENERGY_WINDOWS {
        match energy(f, c, d, cfg) {
            Err(e) => {
                return MembershipReport {
                    verdict: MembershipVerdict::Rejected,
                    witness: Some(MembershipWitness::EnergyFailure {
                        window: (c, d),
                        reason: reason_of(&e),
                    }),
                    energy_limited,
                    energy_statuses,
                    pairings_checked: 0,
                }
            }
            Ok(r) => {
                if r.status == PairingStatus::Unlimited {
                    energy_limited = false;
                }
                energy_statuses.push(((c, d), r.status));
            }
        }
    }
    let corpus = default_corpus();
    for (i, g) in corpus.iter().enumerate() {
        match pair(f, g, cfg) {
            Err(e) => {
                return MembershipReport {
                    verdict: MembershipVerdict::Rejected,
                    witness: Some(MembershipWitness::PairingFailure {
                        corpus_index: i,
                        reason: reason_of(&e),
                    }),
                    energy_limited,
                    energy_statuses,
                    pairings_checked: i,
                }
            }
            Ok(r) => {
                if r.status == PairingStatus::Unlimited {
                    return MembershipReport {
                        verdict: MembershipVerdict::Rejected,
                        witness: Some(MembershipWitness::UnlimitedPairing { corpus_index: i }),
                        energy_limited,
                        energy_statuses,
                        pairings_checked: i,
                    };
                }
            }
        }
    }
    MembershipReport {
        verdict: MembershipVerdict::Admitted,
        witness: None,
        energy_limited,
        energy_statuses,
        pairings_checked: corpus.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponent::ExponentQ;
    use crate::expr::make_dirac;
    use approx::assert_relative_eq;

    const I_B: f64 = 0.44399381616807944;
    const I_B2: f64 = 0.13308612084499427;
    /// Normalized second moment ∫u²b / ∫b.
    const M2_NORM: f64 = 0.15811363626379823;
    const E_INV: f64 = 0.36787944117144233;

    fn cfg() -> PairingConfig {
        PairingConfig::default()
    }

    fn q(n: i64) -> ExponentQ {
        ExponentQ::from_int(n)
    }

    #[test]
    fn constant_pairs_to_weighted_mass() {
        let f = InternalExpr::real(2.0);
        let g = TestFn::bump(0.0, 1.0);
        let r = pair(&f, &g, &cfg()).unwrap();
        assert_relative_eq!(
            r.value.standard_part().unwrap(),
            2.0 * I_B,
            max_relative = 1e-10
        );
        assert_eq!(r.status, PairingStatus::Limited);
        assert_eq!(r.form, PairingForm::Regular);
    }

    #[test]
    fn series_scalars_factor_out_exactly() {
        let lam = HyperReal::from_real(3.0).add(&HyperReal::epsilon());
        let f = InternalExpr::sin(InternalExpr::var());
        let scaled = InternalExpr::mul(
            InternalExpr::constant(lam.clone()),
            f.clone(),
        );
        let g = TestFn::bump(0.5, 1.0);
        let direct = pair(&scaled, &g, &cfg()).unwrap();
        let reference = pair(&f, &g, &cfg()).unwrap();
        assert_eq!(direct.value, lam.mul(&reference.value));
    }

    #[test]
    fn pairing_is_additive_within_quadrature_tolerance() {
        let f1 = InternalExpr::sin(InternalExpr::var());
        let f2 = InternalExpr::int_pow(InternalExpr::var(), 2);
        let sum = InternalExpr::add(f1.clone(), f2.clone());
        let g = TestFn::bump(0.3, 1.5);
        let c = cfg();
        let lhs = pair(&sum, &g, &c).unwrap().value;
        let rhs = pair(&f1, &g, &c).unwrap().value.add(&pair(&f2, &g, &c).unwrap().value);
        assert!(lhs.sub(&rhs).terms().iter().all(|(_, co)| libm::fabs(*co) < 1e-9));
    }

    #[test]
    fn test_function_pairings_are_symmetric_and_positive() {
        let g1 = TestFn::bump(0.0, 1.0);
        let g2 = TestFn::bump(0.5, 1.5);
        let c = cfg();
        let a = pair(&InternalExpr::test_ref(g1.clone()), &g2, &c).unwrap();
        let b = pair(&InternalExpr::test_ref(g2.clone()), &g1, &c).unwrap();
        assert_relative_eq!(
            a.value.standard_part().unwrap(),
            b.value.standard_part().unwrap(),
            epsilon = 1e-9
        );
        let e = pair(&InternalExpr::test_ref(g1.clone()), &g1, &c).unwrap();
        assert!(e.value.standard_part().unwrap() > 0.0);
    }

    #[test]
    fn spike_pairing_reproduces_point_value_with_taylor_tail() {
        let d = make_dirac();
        let g = TestFn::bump(0.0, 1.0);
        let r = pair(&d, &g, &cfg()).unwrap();
        assert_eq!(r.form, PairingForm::Mollified);
        assert_eq!(r.status, PairingStatus::Limited);
        // st = g(0) = e⁻¹; the ε² coefficient is (g″(0)/2)·(∫u²b/∫b) with
        // the frozen normalized moment and g″(0) = −0.73575888234288464.
        assert_relative_eq!(r.value.standard_part().unwrap(), E_INV, epsilon = 1e-10);
        assert_relative_eq!(
            r.value.coeff(q(2)),
            (-0.73575888234288464 / 2.0) * M2_NORM,
            max_relative = 1e-8
        );
        // Odd coefficients vanish by symmetry.
        assert!(libm::fabs(r.value.coeff(q(1))) < 1e-12);
        assert!(libm::fabs(r.value.coeff(q(3))) < 1e-12);
    }

    #[test]
    fn shifted_test_functions_sample_the_spike_location() {
        let d = make_dirac();
        let c = cfg();
        for g in [
            TestFn::bump(0.5, 2.0),
            TestFn::bump(-1.0, 3.0),
            TestFn::poly_mod(alloc::vec![1.0, 2.0, 1.0], TestFn::bump(0.0, 2.0)),
        ] {
            let r = pair(&d, &g, &c).unwrap();
            assert_relative_eq!(
                r.value.standard_part().unwrap(),
                g.eval(0.0),
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn squared_spike_is_unlimited_with_known_leading_term() {
        let d = make_dirac();
        let f = InternalExpr::mul(d.clone(), d.clone());
        let g = TestFn::bump(0.0, 1.0);
        let r = pair(&f, &g, &cfg()).unwrap();
        assert_eq!(r.status, PairingStatus::Unlimited);
        let (lead_exp, lead_coef) = r.value.leading().unwrap();
        assert_eq!(lead_exp, q(-1));
        assert_relative_eq!(
            lead_coef,
            (I_B2 / (I_B * I_B)) * E_INV,
            max_relative = 1e-8
        );
    }

    #[test]
    fn energy_windows() {
        let c = cfg();
        // ⟨2, 2⟩ over [−1, 1] = 8.
        let r = energy(&InternalExpr::real(2.0), -1.0, 1.0, &c).unwrap();
        assert_relative_eq!(r.value.standard_part().unwrap(), 8.0, epsilon = 1e-10);
        // A spike's energy is unlimited on any window containing 0 …
        let d = make_dirac();
        let r = energy(&d, -1.0, 1.0, &c).unwrap();
        assert_eq!(r.status, PairingStatus::Unlimited);
        // … and exactly zero on windows that stay away from it.
        let r = energy(&d, 2.0, 5.0, &c).unwrap();
        assert!(r.value.is_zero());
        // A one-sided window halves the spike energy.
        let full = energy(&d, -1.0, 1.0, &c).unwrap();
        let half = energy(&d, 0.0, 1.0, &c).unwrap();
        assert_relative_eq!(
            half.value.leading().unwrap().1,
            0.5 * full.value.leading().unwrap().1,
            max_relative = 1e-9
        );
    }

    #[test]
    fn sum_of_spike_and_smooth_part() {
        let f = InternalExpr::add(make_dirac(), InternalExpr::real(1.0));
        let g = TestFn::bump(0.0, 1.0);
        let r = pair(&f, &g, &cfg()).unwrap();
        assert_eq!(r.form, PairingForm::Sum);
        assert_relative_eq!(
            r.value.standard_part().unwrap(),
            E_INV + I_B,
            epsilon = 1e-9
        );
    }

    #[test]
    fn unsupported_forms_are_rejected() {
        let g = TestFn::bump(0.0, 1.0);
        let c = cfg();
        // Unlimited-frequency oscillation cannot be sampled at real points.
        let fast = InternalExpr::sin(InternalExpr::mul(
            InternalExpr::constant(
                HyperReal::monomial(1.0, q(-1), TruncationPolicy::default()),
            ),
            InternalExpr::var(),
        ));
        assert!(matches!(
            pair(&fast, &g, &c),
            Err(PairingError::UnsupportedForm(_))
        ));
        // A spike inside a nonlinear context has no normal form.
        let wrapped = InternalExpr::sin(make_dirac());
        assert!(matches!(
            pair(&wrapped, &g, &c),
            Err(PairingError::UnsupportedForm(_))
        ));
        // Two spikes at different scales cannot share one substitution.
        let eps2 = HyperReal::epsilon().pow_int(2);
        let other = InternalExpr::mollify(
            InternalExpr::Bump,
            eps2,
            HyperReal::from_real(1.0),
        );
        let product = InternalExpr::mul(make_dirac(), other);
        assert!(matches!(
            pair(&product, &g, &c),
            Err(PairingError::UnsupportedForm(_))
        ));
    }

    #[test]
    fn schwarz_inequality_on_smooth_functions() {
        let f = InternalExpr::sin(InternalExpr::var());
        let g = TestFn::bump(0.0, 1.0);
        let r = schwarz_check(&f, &g, (-1.0, 1.0), &cfg()).unwrap();
        assert!(r.holds);
        assert!(r.energy_f_std.is_some());
        // Spikes hold vacuously: unlimited energy.
        let r = schwarz_check(&make_dirac(), &g, (-1.0, 1.0), &cfg()).unwrap();
        assert!(r.holds);
        assert!(r.energy_f_std.is_none());
    }

    #[test]
    fn membership_examples() {
        let c = cfg();
        // An infinitesimal constant is admitted.
        let r = member_t(
            &InternalExpr::constant(HyperReal::epsilon()),
            &c,
        );
        assert_eq!(r.verdict, MembershipVerdict::Admitted);
        assert!(r.energy_limited);

        // A spike is admitted: pairings stay limited even though the energy
        // is unlimited.
        let r = member_t(&make_dirac(), &c);
        assert_eq!(r.verdict, MembershipVerdict::Admitted);
        assert!(!r.energy_limited);

        // An unlimited multiple of a bump pairs to unlimited values.
        let f = InternalExpr::mul(
            InternalExpr::constant(HyperReal::monomial(
                1.0,
                q(-1),
                TruncationPolicy::default(),
            )),
            InternalExpr::Bump,
        );
        let r = member_t(&f, &c);
        assert_eq!(r.verdict, MembershipVerdict::Rejected);
        assert!(matches!(
            r.witness,
            Some(MembershipWitness::UnlimitedPairing { .. })
        ));
    }
}
