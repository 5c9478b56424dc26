//! Generalized functionals: internal representatives acting on test
//! functions through the pairing.
//!
//! A [`GenFunctional`] is a pair (representative expression, derivative
//! order k); it acts by
//!
//! ```text
//! F[g] = (−1)^k · st ⟨rep, g⁽ᵏ⁾⟩
//! ```
//!
//! so differentiation never touches the representative — it only shifts
//! derivatives onto the test function with the alternating sign. Two
//! functionals are *equivalent* when their actions agree on a deterministic
//! test corpus; a functional is *equivalent to zero* when all its corpus
//! values vanish to tolerance. Multiplication is deliberately restricted:
//! only a standard smooth factor may multiply a representative directly
//! (the general product is the pointwise one and is handled upstream).
//!
//! [`GenFunctional::schwarz_class_diagnostic`] probes compatibility with a
//! classical distribution: on a null sequence of test functions (seminorms
//! decaying) the values F[gₙ] must decay too. A spike functional fed a
//! width-shrinking sequence fails the *precondition* (such a sequence is
//! not null — its sup norm never decays), which is reported distinctly
//! from a failing value trend.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use thiserror::Error;

use crate::continuity::{s_continuity, MonadProbeSet, SeminormFamily, Verdict};
use crate::expr::{EvalError, InternalExpr};
use crate::hyperreal::HyperReal;
use crate::pairing::{pair, PairingConfig, PairingError, PairingResult};
use crate::testfn::{default_corpus, TestFn, TestFnError, DERIV_CAP};

/// Corpus-value tolerance for equivalence and zero tests.
pub const T0_TOL: f64 = 1e-8;

/// Errors from functional application and construction.
#[derive(Debug, Error)]
pub enum FunctionalError {
    #[error(transparent)]
    Pairing(#[from] PairingError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    TestFn(#[from] TestFnError),
    #[error("functional value is unlimited; it has no standard part")]
    UnlimitedValue,
    #[error("derivative order {requested} exceeds the cap {cap}")]
    OrderCap { requested: usize, cap: usize },
    #[error("factor is not a standard smooth expression")]
    NotStandardSmooth,
    #[error("not S-continuous at the requested point")]
    NotSContinuousHere,
    #[error("operation requires an underived representative")]
    NeedsDirectRep,
}

/// A generalized functional: representative plus derivative bookkeeping.
#[derive(Clone, Debug)]
pub struct GenFunctional {
    pub rep: InternalExpr,
    pub deriv_order: usize,
    pub label: Option<String>,
}

/// Verdict of the equivalent-to-zero test.
#[derive(Clone, Debug, PartialEq)]
pub enum T0Verdict {
    EquivalentZeroNotRefuted,
    Distinct { corpus_index: usize, value: f64 },
}

/// Verdict of the pairwise equivalence test.
#[derive(Clone, Debug, PartialEq)]
pub enum EquivalenceVerdict {
    NotRefuted,
    Distinct {
        corpus_index: usize,
        lhs: f64,
        rhs: f64,
    },
}

/// A point value together with the continuity evidence backing it.
#[derive(Clone, Debug)]
pub struct PointValue {
    pub value: f64,
    pub continuity: Verdict,
}

/// Whether the observed behaviour is consistent with a classical
/// distribution of finite order acting continuously.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DiagnosticVerdict {
    Consistent,
    Inconsistent,
}

/// Outcome of the null-sequence diagnostic.
#[derive(Clone, Debug)]
pub struct SchwarzDiagnostic {
    pub verdict: DiagnosticVerdict,
    /// False when the supplied sequence is not a null sequence (seminorms
    /// fail to decay), in which case no trend conclusion is possible.
    pub precondition_ok: bool,
    /// The values F[gₙ] that were computed (empty when the precondition
    /// fails, partial when a value comes out unlimited).
    pub trend: Vec<f64>,
}

impl GenFunctional {
    pub fn new(rep: InternalExpr) -> GenFunctional {
        GenFunctional {
            rep,
            deriv_order: 0,
            label: None,
        }
    }

    pub fn with_label(mut self, label: &str) -> GenFunctional {
        self.label = Some(String::from(label));
        self
    }

    /// F[g] = (−1)^k · st ⟨rep, g⁽ᵏ⁾⟩.
    pub fn apply(&self, g: &TestFn, cfg: &PairingConfig) -> Result<f64, FunctionalError> {
        let r = self.apply_pairing(g, cfg)?;
        r.value
            .standard_part()
            .map_err(|_| FunctionalError::UnlimitedValue)
    }

    /// The full series value of (−1)^k ⟨rep, g⁽ᵏ⁾⟩, before taking the
    /// standard part.
    pub fn apply_pairing(
        &self,
        g: &TestFn,
        cfg: &PairingConfig,
    ) -> Result<PairingResult, FunctionalError> {
        let gk = TestFn::deriv(self.deriv_order, g.clone());
        let mut r = pair(&self.rep, &gk, cfg)?;
        if self.deriv_order % 2 == 1 {
            r.value = r.value.neg();
        }
        Ok(r)
    }

    /// The derivative functional: same representative, one more derivative
    /// pushed onto the test side.
    pub fn derivative(&self) -> Result<GenFunctional, FunctionalError> {
        let requested = self.deriv_order + 1;
        if requested > DERIV_CAP {
            return Err(FunctionalError::OrderCap {
                requested,
                cap: DERIV_CAP,
            });
        }
        Ok(GenFunctional {
            rep: self.rep.clone(),
            deriv_order: requested,
            label: self.label.as_ref().map(|l| format!("{l}'")),
        })
    }

    pub fn negate(&self) -> GenFunctional {
        GenFunctional {
            rep: InternalExpr::neg(self.rep.clone()),
            deriv_order: self.deriv_order,
            label: None,
        }
    }

    /// Sum of two functionals; only defined when their derivative orders
    /// agree (otherwise there is no common representative form).
    pub fn sum(&self, other: &GenFunctional) -> Option<GenFunctional> {
        if self.deriv_order != other.deriv_order {
            return None;
        }
        Some(GenFunctional {
            rep: InternalExpr::add(self.rep.clone(), other.rep.clone()),
            deriv_order: self.deriv_order,
            label: None,
        })
    }

    /// Test F against the zero functional on the default corpus.
    pub fn in_t0(&self, cfg: &PairingConfig) -> Result<T0Verdict, FunctionalError> {
        for (i, g) in default_corpus().iter().enumerate() {
            let v = self.apply(g, cfg)?;
            if libm::fabs(v) > T0_TOL {
                return Ok(T0Verdict::Distinct {
                    corpus_index: i,
                    value: v,
                });
            }
        }
        Ok(T0Verdict::EquivalentZeroNotRefuted)
    }

    /// Value-wise comparison against another functional on the corpus.
    pub fn equivalent(
        &self,
        other: &GenFunctional,
        cfg: &PairingConfig,
    ) -> Result<EquivalenceVerdict, FunctionalError> {
        for (i, g) in default_corpus().iter().enumerate() {
            let a = self.apply(g, cfg)?;
            let b = other.apply(g, cfg)?;
            if libm::fabs(a - b) > T0_TOL {
                return Ok(EquivalenceVerdict::Distinct {
                    corpus_index: i,
                    lhs: a,
                    rhs: b,
                });
            }
        }
        Ok(EquivalenceVerdict::NotRefuted)
    }

    /// Standard point value of the representative, gated on S-continuity
    /// evidence (a refuted point has no well-defined value).
    pub fn value_at(
        &self,
        x: f64,
        probes: &MonadProbeSet,
    ) -> Result<PointValue, FunctionalError> {
        if self.deriv_order != 0 {
            return Err(FunctionalError::NeedsDirectRep);
        }
        let continuity = s_continuity(&self.rep, x, probes)?;
        if continuity.is_refuted() {
            return Err(FunctionalError::NotSContinuousHere);
        }
        let v = self.rep.eval_at(&HyperReal::from_real(x))?;
        let value = v
            .standard_part()
            .map_err(|_| FunctionalError::UnlimitedValue)?;
        Ok(PointValue { value, continuity })
    }

    /// Null-sequence diagnostic: feed F a sequence of test functions whose
    /// seminorms decay and check that the values F[gₙ] decay too.
    pub fn schwarz_class_diagnostic(
        &self,
        seq: &[TestFn],
        cfg: &PairingConfig,
    ) -> Result<SchwarzDiagnostic, FunctionalError> {
        let fam = SeminormFamily::up_to(2);
        let mut norms = Vec::with_capacity(seq.len());
        for g in seq {
            norms.push(fam.seminorms(g)?);
        }
        if !null_sequence_precondition(&norms) {
            return Ok(SchwarzDiagnostic {
                verdict: DiagnosticVerdict::Inconsistent,
                precondition_ok: false,
                trend: Vec::new(),
            });
        }
        let mut trend = Vec::with_capacity(seq.len());
        for g in seq {
            match self.apply(g, cfg) {
                Ok(v) => trend.push(v),
                Err(FunctionalError::UnlimitedValue) => {
                    // An unlimited value on a genuine null sequence already
                    // contradicts continuous action.
                    return Ok(SchwarzDiagnostic {
                        verdict: DiagnosticVerdict::Inconsistent,
                        precondition_ok: true,
                        trend,
                    });
                }
                Err(e) => return Err(e),
            }
        }
        let verdict = if trend_decays(&trend) {
            DiagnosticVerdict::Consistent
        } else {
            DiagnosticVerdict::Inconsistent
        };
        Ok(SchwarzDiagnostic {
            verdict,
            precondition_ok: true,
            trend,
        })
    }
}

/// Seminorms must be non-increasing (to float slack) and genuinely decay
/// from first to last sample.
fn null_sequence_precondition(norms: &[Vec<f64>]) -> bool {
    if norms.len() < 2 {
        return false;
    }
    let orders = norms[0].len();
    for k in 0..orders {
        for n in 1..norms.len() {
            if norms[n][k] > norms[n - 1][k] + 1e-9 {
                return false;
            }
        }
        let first = norms[0][k];
        let last = norms[norms.len() - 1][k];
        if first > 0.0 && last > 0.9 * first {
            return false;
        }
    }
    true
}

/// A trend decays when it has a monotone (in magnitude) tail of length ≥ 2
/// that ends either negligibly small or substantially below its start.
fn trend_decays(trend: &[f64]) -> bool {
    if trend.len() < 2 {
        return false;
    }
    let mags: Vec<f64> = trend.iter().map(|v| libm::fabs(*v)).collect();
    let mut start = mags.len() - 1;
    while start > 0 && mags[start - 1] >= mags[start] {
        start -= 1;
    }
    if start > mags.len() - 2 {
        return false;
    }
    let vmax = mags.iter().fold(0.0f64, |m, v| m.max(*v));
    let last = mags[mags.len() - 1];
    last <= 1e-4 * vmax || last <= 0.75 * mags[start]
}

/// Product of a standard smooth factor with a functional: rewrites the
/// representative. Only order-0 functionals and genuinely standard smooth
/// factors qualify.
pub fn customary_product(
    smooth: &InternalExpr,
    f: &GenFunctional,
) -> Result<GenFunctional, FunctionalError> {
    if f.deriv_order != 0 {
        return Err(FunctionalError::NeedsDirectRep);
    }
    if !is_standard_smooth(smooth) {
        return Err(FunctionalError::NotStandardSmooth);
    }
    Ok(GenFunctional {
        rep: InternalExpr::mul(smooth.clone(), f.rep.clone()),
        deriv_order: 0,
        label: None,
    })
}

/// Smooth expressions whose constants are plain reals: the fragment on
/// which pointwise multiplication agrees with the classical product.
pub fn is_standard_smooth(e: &InternalExpr) -> bool {
    match e {
        InternalExpr::Var
        | InternalExpr::Bump
        | InternalExpr::Plateau(_)
        | InternalExpr::TestRef(_) => true,
        InternalExpr::Const(h) => match h.standard_part() {
            Ok(s) => h.sub(&HyperReal::from_real(s)).is_zero(),
            Err(_) => false,
        },
        InternalExpr::Add(a, b) | InternalExpr::Mul(a, b) => {
            is_standard_smooth(a) && is_standard_smooth(b)
        }
        InternalExpr::Neg(a)
        | InternalExpr::IntPow(a, _)
        | InternalExpr::Sin(a)
        | InternalExpr::Cos(a)
        | InternalExpr::Exp(a) => is_standard_smooth(a),
        InternalExpr::Recip(_)
        | InternalExpr::Piecewise { .. }
        | InternalExpr::Mollify { .. } => false,
    }
}
