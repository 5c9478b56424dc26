//! JSON schemas for series values, test functions, and expression trees,
//! with lossless conversions to and from the core types.
//!
//! A series value is an *ascending* array of terms
//! `[{"exp": "p/q", "coef": c}, …]`; exponents use the exact `p` / `p/q`
//! text form. Scalars may alternatively be written in the tiny expression
//! language (`"1/eps + 3"`, see [`crate::parse`]). Expression trees are
//! tagged objects `{"op": "sin", "args": […]}` mirroring the internal
//! constructors one-to-one, plus the `{"op": "dirac"}` shorthand.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use hyperdist_core::continuity::{RefutationWitness, Verdict};
use hyperdist_core::expr::CmpOp;
use hyperdist_core::{
    ExponentQ, GenFunctional, HyperReal, InternalExpr, TestFn, TruncationPolicy,
};

/// Errors from decoding any of the JSON schemas.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct SchemaError(pub String);

fn bad(msg: impl Into<String>) -> SchemaError {
    SchemaError(msg.into())
}

// ---- series values ------------------------------------------------------

/// One series term.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TermJson {
    pub exp: String,
    pub coef: f64,
}

/// Encode a series value as its ascending term array.
pub fn terms_of(v: &HyperReal) -> Vec<TermJson> {
    v.terms()
        .iter()
        .map(|(q, c)| TermJson {
            exp: q.to_string(),
            coef: *c,
        })
        .collect()
}

/// Decode a term array into a series value under `policy`.
pub fn terms_to_hyper(
    terms: &[TermJson],
    policy: TruncationPolicy,
) -> Result<HyperReal, SchemaError> {
    let mut acc = HyperReal::from_real_with(0.0, policy);
    for t in terms {
        let q: ExponentQ = t
            .exp
            .parse()
            .map_err(|e| bad(format!("exponent {:?}: {e}", t.exp)))?;
        acc = acc.add(&HyperReal::monomial(t.coef, q, policy));
    }
    Ok(acc)
}

/// A scalar in either surface form: expression text or a term array.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarJson {
    Text(String),
    Terms(Vec<TermJson>),
}

impl ScalarJson {
    pub fn to_hyper(&self, policy: TruncationPolicy) -> Result<HyperReal, SchemaError> {
        match self {
            ScalarJson::Text(s) => crate::parse::parse_scalar(s, policy)
                .map_err(|e| bad(format!("scalar {s:?}: {e}"))),
            ScalarJson::Terms(ts) => terms_to_hyper(ts, policy),
        }
    }

    pub fn from_hyper(v: &HyperReal) -> ScalarJson {
        ScalarJson::Terms(terms_of(v))
    }
}

// ---- test functions -----------------------------------------------------

/// Mirror of the test-function constructors.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFnJson {
    Bump {
        center: f64,
        halfwidth: f64,
    },
    PolyMod {
        coeffs: Vec<f64>,
        inner: Box<TestFnJson>,
    },
    Scale {
        factor: f64,
        inner: Box<TestFnJson>,
    },
    Shift {
        offset: f64,
        inner: Box<TestFnJson>,
    },
    LinComb {
        terms: Vec<(f64, TestFnJson)>,
    },
    Plateau {
        inner_radius: f64,
        outer_radius: f64,
    },
    Deriv {
        order: usize,
        inner: Box<TestFnJson>,
    },
}

impl TestFnJson {
    pub fn to_testfn(&self) -> Result<TestFn, SchemaError> {
        let f = match self {
            TestFnJson::Bump { center, halfwidth } => TestFn::bump(*center, *halfwidth),
            TestFnJson::PolyMod { coeffs, inner } => {
                TestFn::poly_mod(coeffs.clone(), inner.to_testfn()?)
            }
            TestFnJson::Scale { factor, inner } => TestFn::scale(*factor, inner.to_testfn()?),
            TestFnJson::Shift { offset, inner } => TestFn::shift(*offset, inner.to_testfn()?),
            TestFnJson::LinComb { terms } => {
                let mut out = Vec::with_capacity(terms.len());
                for (w, t) in terms {
                    out.push((*w, t.to_testfn()?));
                }
                TestFn::lin_comb(out)
            }
            TestFnJson::Plateau {
                inner_radius,
                outer_radius,
            } => TestFn::plateau(*inner_radius, *outer_radius),
            TestFnJson::Deriv { order, inner } => TestFn::deriv(*order, inner.to_testfn()?),
        };
        f.validate().map_err(|e| bad(format!("test function: {e}")))?;
        Ok(f)
    }

    pub fn from_testfn(f: &TestFn) -> TestFnJson {
        match f {
            TestFn::Bump { center, halfwidth } => TestFnJson::Bump {
                center: *center,
                halfwidth: *halfwidth,
            },
            TestFn::PolyMod { coeffs, inner } => TestFnJson::PolyMod {
                coeffs: coeffs.clone(),
                inner: Box::new(TestFnJson::from_testfn(inner)),
            },
            TestFn::Scale { factor, inner } => TestFnJson::Scale {
                factor: *factor,
                inner: Box::new(TestFnJson::from_testfn(inner)),
            },
            TestFn::Shift { offset, inner } => TestFnJson::Shift {
                offset: *offset,
                inner: Box::new(TestFnJson::from_testfn(inner)),
            },
            TestFn::LinComb(terms) => TestFnJson::LinComb {
                terms: terms
                    .iter()
                    .map(|(w, t)| (*w, TestFnJson::from_testfn(t)))
                    .collect(),
            },
            TestFn::Plateau {
                inner_radius,
                outer_radius,
            } => TestFnJson::Plateau {
                inner_radius: *inner_radius,
                outer_radius: *outer_radius,
            },
            TestFn::Deriv { order, inner } => TestFnJson::Deriv {
                order: *order,
                inner: Box::new(TestFnJson::from_testfn(inner)),
            },
        }
    }
}

// ---- expressions --------------------------------------------------------

/// Mirror of the expression constructors. `add` and `mul` accept two or
/// more arguments and fold left; `dirac` is input shorthand for the unit
/// spike (it re-exports as its mollified form).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum ExprJson {
    Var,
    Const {
        value: ScalarJson,
    },
    Add {
        args: Vec<ExprJson>,
    },
    Mul {
        args: Vec<ExprJson>,
    },
    Neg {
        args: Vec<ExprJson>,
    },
    Recip {
        args: Vec<ExprJson>,
    },
    IntPow {
        args: Vec<ExprJson>,
        n: u32,
    },
    Sin {
        args: Vec<ExprJson>,
    },
    Cos {
        args: Vec<ExprJson>,
    },
    Exp {
        args: Vec<ExprJson>,
    },
    Bump,
    Plateau {
        outer: f64,
    },
    Piecewise {
        cmp: String,
        args: Vec<ExprJson>,
    },
    Mollify {
        scale: ScalarJson,
        amplitude: ScalarJson,
        args: Vec<ExprJson>,
    },
    TestRef {
        testfn: TestFnJson,
    },
    Dirac,
}

fn one(
    args: &[ExprJson],
    op: &str,
    policy: TruncationPolicy,
) -> Result<InternalExpr, SchemaError> {
    match args {
        [a] => a.to_expr(policy),
        _ => Err(bad(format!("{op} takes exactly one argument"))),
    }
}

fn fold(
    args: &[ExprJson],
    op: &str,
    policy: TruncationPolicy,
    f: fn(InternalExpr, InternalExpr) -> InternalExpr,
) -> Result<InternalExpr, SchemaError> {
    if args.len() < 2 {
        return Err(bad(format!("{op} takes at least two arguments")));
    }
    let mut acc = args[0].to_expr(policy)?;
    for a in &args[1..] {
        acc = f(acc, a.to_expr(policy)?);
    }
    Ok(acc)
}

impl ExprJson {
    pub fn to_expr(&self, policy: TruncationPolicy) -> Result<InternalExpr, SchemaError> {
        Ok(match self {
            ExprJson::Var => InternalExpr::var(),
            ExprJson::Const { value } => InternalExpr::constant(value.to_hyper(policy)?),
            ExprJson::Add { args } => fold(args, "add", policy, InternalExpr::add)?,
            ExprJson::Mul { args } => fold(args, "mul", policy, InternalExpr::mul)?,
            ExprJson::Neg { args } => InternalExpr::neg(one(args, "neg", policy)?),
            ExprJson::Recip { args } => InternalExpr::recip(one(args, "recip", policy)?),
            ExprJson::IntPow { args, n } => InternalExpr::int_pow(one(args, "int_pow", policy)?, *n),
            ExprJson::Sin { args } => InternalExpr::sin(one(args, "sin", policy)?),
            ExprJson::Cos { args } => InternalExpr::cos(one(args, "cos", policy)?),
            ExprJson::Exp { args } => InternalExpr::exp(one(args, "exp", policy)?),
            ExprJson::Bump => InternalExpr::Bump,
            ExprJson::Plateau { outer } => {
                if !(outer.is_finite() && *outer > 0.0) {
                    return Err(bad("plateau outer radius must be positive"));
                }
                InternalExpr::Plateau(*outer)
            }
            ExprJson::Piecewise { cmp, args } => {
                let op = match cmp.as_str() {
                    "lt" => CmpOp::Lt,
                    "le" => CmpOp::Le,
                    "ge" => CmpOp::Ge,
                    "gt" => CmpOp::Gt,
                    other => return Err(bad(format!("unknown comparison {other:?}"))),
                };
                match args.as_slice() {
                    [lhs, rhs, then, els] => InternalExpr::piecewise(
                        lhs.to_expr(policy)?,
                        op,
                        rhs.to_expr(policy)?,
                        then.to_expr(policy)?,
                        els.to_expr(policy)?,
                    ),
                    _ => {
                        return Err(bad(
                            "piecewise takes [lhs, rhs, then, else] as arguments",
                        ))
                    }
                }
            }
            ExprJson::Mollify {
                scale,
                amplitude,
                args,
            } => InternalExpr::mollify(
                one(args, "mollify", policy)?,
                scale.to_hyper(policy)?,
                amplitude.to_hyper(policy)?,
            ),
            ExprJson::TestRef { testfn } => InternalExpr::test_ref(testfn.to_testfn()?),
            ExprJson::Dirac => hyperdist_core::expr::make_dirac_with(policy),
        })
    }

    pub fn from_expr(e: &InternalExpr) -> ExprJson {
        match e {
            InternalExpr::Var => ExprJson::Var,
            InternalExpr::Const(h) => ExprJson::Const {
                value: ScalarJson::from_hyper(h),
            },
            InternalExpr::Add(a, b) => ExprJson::Add {
                args: vec![ExprJson::from_expr(a), ExprJson::from_expr(b)],
            },
            InternalExpr::Mul(a, b) => ExprJson::Mul {
                args: vec![ExprJson::from_expr(a), ExprJson::from_expr(b)],
            },
            InternalExpr::Neg(a) => ExprJson::Neg {
                args: vec![ExprJson::from_expr(a)],
            },
            InternalExpr::Recip(a) => ExprJson::Recip {
                args: vec![ExprJson::from_expr(a)],
            },
            InternalExpr::IntPow(a, n) => ExprJson::IntPow {
                args: vec![ExprJson::from_expr(a)],
                n: *n,
            },
            InternalExpr::Sin(a) => ExprJson::Sin {
                args: vec![ExprJson::from_expr(a)],
            },
            InternalExpr::Cos(a) => ExprJson::Cos {
                args: vec![ExprJson::from_expr(a)],
            },
            InternalExpr::Exp(a) => ExprJson::Exp {
                args: vec![ExprJson::from_expr(a)],
            },
            InternalExpr::Bump => ExprJson::Bump,
            InternalExpr::Plateau(a) => ExprJson::Plateau { outer: *a },
            InternalExpr::Piecewise {
                lhs,
                op,
                rhs,
                then,
                els,
            } => ExprJson::Piecewise {
                cmp: match op {
                    CmpOp::Lt => "lt",
                    CmpOp::Le => "le",
                    CmpOp::Ge => "ge",
                    CmpOp::Gt => "gt",
                }
                .into(),
                args: vec![
                    ExprJson::from_expr(lhs),
                    ExprJson::from_expr(rhs),
                    ExprJson::from_expr(then),
                    ExprJson::from_expr(els),
                ],
            },
            InternalExpr::Mollify {
                base,
                scale,
                amplitude,
            } => ExprJson::Mollify {
                scale: ScalarJson::from_hyper(scale),
                amplitude: ScalarJson::from_hyper(amplitude),
                args: vec![ExprJson::from_expr(base)],
            },
            InternalExpr::TestRef(g) => ExprJson::TestRef {
                testfn: TestFnJson::from_testfn(g),
            },
        }
    }
}

// ---- verdicts -----------------------------------------------------------

/// Serialized continuity/convergence verdict.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum VerdictJson {
    Proved {
        rule: String,
    },
    Refuted {
        witness: WitnessJson,
    },
    NotRefuted,
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessJson {
    pub probe: Vec<TermJson>,
    pub base_value: Vec<TermJson>,
    pub probe_value: Vec<TermJson>,
}

impl VerdictJson {
    pub fn from_verdict(v: &Verdict) -> VerdictJson {
        match v {
            Verdict::Proved { rule } => VerdictJson::Proved {
                rule: (*rule).into(),
            },
            Verdict::Refuted { witness } => VerdictJson::Refuted {
                witness: WitnessJson::from_witness(witness),
            },
            Verdict::NotRefuted => VerdictJson::NotRefuted,
        }
    }
}

impl WitnessJson {
    pub fn from_witness(w: &RefutationWitness) -> WitnessJson {
        WitnessJson {
            probe: terms_of(&w.probe),
            base_value: terms_of(&w.base_value),
            probe_value: terms_of(&w.probe_value),
        }
    }
}

/// One matching prescription: a test function and its target value.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TargetJson {
    pub testfn: TestFnJson,
    pub value: f64,
}

/// A named functional: representative plus carried derivative order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FunctionalJson {
    pub rep: ExprJson,
    #[serde(default)]
    pub deriv_order: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl FunctionalJson {
    pub fn to_functional(&self, policy: TruncationPolicy) -> Result<GenFunctional, SchemaError> {
        let mut f = GenFunctional::new(self.rep.to_expr(policy)?);
        for _ in 0..self.deriv_order {
            f = f
                .derivative()
                .map_err(|e| bad(format!("functional: {e}")))?;
        }
        if let Some(label) = &self.label {
            f = GenFunctional {
                label: Some(label.clone()),
                ..f
            };
        }
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn policy() -> TruncationPolicy {
        TruncationPolicy::default()
    }

    #[test]
    fn series_terms_round_trip() {
        let v = HyperReal::epsilon()
            .recip()
            .unwrap()
            .add(&HyperReal::from_real(3.0))
            .add(&HyperReal::monomial(
                0.25,
                ExponentQ::new(3, 2),
                policy(),
            ));
        let terms = terms_of(&v);
        assert_eq!(terms[0].exp, "-1");
        assert_eq!(terms[2].exp, "3/2");
        assert_eq!(terms_to_hyper(&terms, policy()).unwrap(), v);
    }

    #[test]
    fn scalar_accepts_both_surface_forms() {
        let text: ScalarJson = serde_json::from_str(r#""1/eps + 3""#).unwrap();
        let arr: ScalarJson =
            serde_json::from_str(r#"[{"exp": "-1", "coef": 1.0}, {"exp": "0", "coef": 3.0}]"#)
                .unwrap();
        assert_eq!(
            text.to_hyper(policy()).unwrap(),
            arr.to_hyper(policy()).unwrap()
        );
        assert!(ScalarJson::Text("nope".into()).to_hyper(policy()).is_err());
        let bad_exp = ScalarJson::Terms(vec![TermJson {
            exp: "x".into(),
            coef: 1.0,
        }]);
        assert!(bad_exp.to_hyper(policy()).is_err());
    }

    #[test]
    fn testfn_round_trip_and_validation() {
        let g = TestFn::poly_mod(vec![0.0, 1.0], TestFn::shift(0.5, TestFn::bump(0.0, 2.0)));
        let j = TestFnJson::from_testfn(&g);
        assert_eq!(j.to_testfn().unwrap(), g);

        let invalid = TestFnJson::Bump {
            center: 0.0,
            halfwidth: -1.0,
        };
        assert!(invalid.to_testfn().is_err());
    }

    #[test]
    fn expr_round_trip_covers_structured_nodes() {
        let e = InternalExpr::piecewise(
            InternalExpr::var(),
            CmpOp::Ge,
            InternalExpr::real(0.0),
            InternalExpr::mollify(
                InternalExpr::Bump,
                HyperReal::epsilon(),
                HyperReal::from_real(2.0),
            ),
            InternalExpr::sin(InternalExpr::int_pow(InternalExpr::var(), 2)),
        );
        let j = ExprJson::from_expr(&e);
        assert_eq!(j.to_expr(policy()).unwrap(), e);
    }

    #[test]
    fn add_folds_left_over_many_args() {
        let j: ExprJson = serde_json::from_str(
            r#"{"op": "add", "args": [{"op": "var"}, {"op": "bump"}, {"op": "var"}]}"#,
        )
        .unwrap();
        let e = j.to_expr(policy()).unwrap();
        let expected = InternalExpr::add(
            InternalExpr::add(InternalExpr::var(), InternalExpr::Bump),
            InternalExpr::var(),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn dirac_shorthand_expands_to_the_unit_spike() {
        let j: ExprJson = serde_json::from_str(r#"{"op": "dirac"}"#).unwrap();
        let e = j.to_expr(policy()).unwrap();
        assert_eq!(e, hyperdist_core::expr::make_dirac_with(policy()));
        // Re-export shows the expanded mollified form, not the shorthand.
        assert!(matches!(ExprJson::from_expr(&e), ExprJson::Mollify { .. }));
    }

    #[test]
    fn arity_and_cmp_errors() {
        let too_few: ExprJson =
            serde_json::from_str(r#"{"op": "mul", "args": [{"op": "var"}]}"#).unwrap();
        assert!(too_few.to_expr(policy()).is_err());

        let two_args: ExprJson = serde_json::from_str(
            r#"{"op": "sin", "args": [{"op": "var"}, {"op": "var"}]}"#,
        )
        .unwrap();
        assert!(two_args.to_expr(policy()).is_err());

        let bad_cmp: ExprJson = serde_json::from_str(
            r#"{"op": "piecewise", "cmp": "eq", "args":
                [{"op": "var"}, {"op": "var"}, {"op": "var"}, {"op": "var"}]}"#,
        )
        .unwrap();
        assert!(bad_cmp.to_expr(policy()).is_err());
    }
}
