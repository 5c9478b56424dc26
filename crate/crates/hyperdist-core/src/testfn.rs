//! Compactly supported smooth test functions.
//!
//! The base shape is the standard bump b(x) = exp(−1/(1−x²)) on (−1, 1);
//! everything else is built from it by shifting, rescaling, polynomial
//! modulation, linear combination, plateau smoothing of an indicator, and
//! differentiation. Every shape carries a structural support interval and
//! can produce its Taylor jet at any real point, so arbitrary-order
//! derivative values come from exact recurrences rather than finite
//! differences.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::convert::Infallible;
use once_cell::race::OnceBox;
use thiserror::Error;

use crate::jet::{bump_jet, poly_jet, Jet};
use crate::quad::{integrate, QuadratureConfig};

/// Highest derivative order accepted by [`TestFn::deriv_eval`] and by
/// [`TestFn::deriv`] nesting. (Jet recurrences stay exact at any order; the
/// cap keeps requested orders in the regime the rest of the crate is
/// validated for.)
pub const DERIV_CAP: usize = 12;

/// Errors from test-function validation or derivative evaluation.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum TestFnError {
    #[error("derivative order {requested} exceeds cap {cap}")]
    OrderCap { requested: usize, cap: usize },
    #[error("invalid test-function shape: {0}")]
    InvalidShape(&'static str),
}

/// A compactly supported smooth function on the real line.
#[derive(Clone, Debug, PartialEq)]
pub enum TestFn {
    /// b((x − center)/halfwidth); support [center − halfwidth, center + halfwidth].
    Bump { center: f64, halfwidth: f64 },
    /// p(x)·inner(x) with p given by `coeffs` (ascending powers of the
    /// global variable x).
    PolyMod { coeffs: Vec<f64>, inner: Box<TestFn> },
    /// inner(x / factor).
    Scale { factor: f64, inner: Box<TestFn> },
    /// inner(x − offset).
    Shift { offset: f64, inner: Box<TestFn> },
    /// Σ cᵢ·gᵢ(x).
    LinComb(Vec<(f64, TestFn)>),
    /// Smoothed indicator: exactly 1 on [−inner_radius, inner_radius],
    /// exactly 0 outside (−outer_radius, outer_radius), a rescaled bump
    /// antiderivative in between.
    Plateau { inner_radius: f64, outer_radius: f64 },
    /// order-th derivative of `inner`.
    Deriv { order: usize, inner: Box<TestFn> },
}

static BUMP_MASS: OnceBox<f64> = OnceBox::new();

/// ∫₋₁¹ b(x) dx, computed once by adaptive quadrature and cached.
pub fn bump_mass() -> f64 {
    *BUMP_MASS.get_or_init(|| {
        let cfg = QuadratureConfig::default();
        let out = integrate(
            |x| Ok::<_, Infallible>(bump_jet(x, 0).value()),
            -1.0,
            1.0,
            &cfg,
        )
        .expect("bump integral converges");
        Box::new(out.value)
    })
}

/// Jet of the plateau shape at `x0`: 1 inside the inner radius, 0 outside
/// the outer radius, and on each transition band the smooth step
/// S(y) = ∫₋₁^y b / ∫₋₁¹ b composed with the affine map sending the band
/// onto [−1, 1] (value 1 at the inner edge, 0 at the outer edge).
pub fn plateau_jet(inner_radius: f64, outer_radius: f64, x0: f64, order: usize) -> Jet {
    let a = libm::fabs(x0);
    if a <= inner_radius {
        return Jet::constant(1.0, order);
    }
    if a >= outer_radius {
        return Jet::zero(order);
    }
    // Right band: y = (outer + inner − 2x)/(outer − inner) decreases from 1
    // to −1; the left band mirrors it.
    let width = outer_radius - inner_radius;
    let (y0, slope) = if x0 > 0.0 {
        ((outer_radius + inner_radius - 2.0 * x0) / width, -2.0 / width)
    } else {
        ((outer_radius + inner_radius + 2.0 * x0) / width, 2.0 / width)
    };
    let cfg = QuadratureConfig::default();
    let below = integrate(
        |t| Ok::<_, Infallible>(bump_jet(t, 0).value()),
        -1.0,
        y0,
        &cfg,
    )
    .expect("bump integral converges")
    .value;
    let step_value = below / bump_mass();
    // S′ = b/∫b, so the step's jet is the integrated bump jet.
    let step = bump_jet(y0, order.saturating_sub(1))
        .scale(1.0 / bump_mass())
        .integrate(step_value);
    // Compose with the affine band map: coefficient k picks up slopeᵏ.
    let mut out = step.compose_affine(slope);
    if out.order() > order {
        out = Jet::from_coeffs(out.coeffs()[..=order].to_vec());
    }
    out
}

impl TestFn {
    pub fn bump(center: f64, halfwidth: f64) -> TestFn {
        TestFn::Bump { center, halfwidth }
    }

    pub fn plateau(inner_radius: f64, outer_radius: f64) -> TestFn {
        TestFn::Plateau {
            inner_radius,
            outer_radius,
        }
    }

    pub fn poly_mod(coeffs: Vec<f64>, inner: TestFn) -> TestFn {
        TestFn::PolyMod {
            coeffs,
            inner: Box::new(inner),
        }
    }

    pub fn scale(factor: f64, inner: TestFn) -> TestFn {
        TestFn::Scale {
            factor,
            inner: Box::new(inner),
        }
    }

    pub fn shift(offset: f64, inner: TestFn) -> TestFn {
        TestFn::Shift {
            offset,
            inner: Box::new(inner),
        }
    }

    pub fn lin_comb(terms: Vec<(f64, TestFn)>) -> TestFn {
        TestFn::LinComb(terms)
    }

    /// Derivative node; order 0 is the identity and nested derivatives
    /// collapse into a single node.
    pub fn deriv(order: usize, inner: TestFn) -> TestFn {
        if order == 0 {
            return inner;
        }
        match inner {
            TestFn::Deriv { order: k, inner } => TestFn::Deriv {
                order: order + k,
                inner,
            },
            other => TestFn::Deriv {
                order,
                inner: Box::new(other),
            },
        }
    }

    /// Structural support hull [lo, hi]. The function vanishes identically
    /// outside it (the converse need not hold for linear combinations).
    pub fn support(&self) -> (f64, f64) {
        match self {
            TestFn::Bump { center, halfwidth } => {
                (center - libm::fabs(*halfwidth), center + libm::fabs(*halfwidth))
            }
            TestFn::PolyMod { inner, .. } => inner.support(),
            TestFn::Scale { factor, inner } => {
                let (lo, hi) = inner.support();
                let (a, b) = (lo * factor, hi * factor);
                (a.min(b), a.max(b))
            }
            TestFn::Shift { offset, inner } => {
                let (lo, hi) = inner.support();
                (lo + offset, hi + offset)
            }
            TestFn::LinComb(terms) => {
                let mut hull: Option<(f64, f64)> = None;
                for (c, g) in terms {
                    if *c == 0.0 {
                        continue;
                    }
                    let (lo, hi) = g.support();
                    hull = Some(match hull {
                        None => (lo, hi),
                        Some((a, b)) => (a.min(lo), b.max(hi)),
                    });
                }
                hull.unwrap_or((0.0, 0.0))
            }
            TestFn::Plateau { outer_radius, .. } => (-outer_radius, *outer_radius),
            TestFn::Deriv { inner, .. } => inner.support(),
        }
    }

    /// Taylor jet at the real point `x`, to the requested order.
    pub fn jet(&self, x: f64, order: usize) -> Jet {
        match self {
            TestFn::Bump { center, halfwidth } => bump_jet((x - center) / halfwidth, order)
                .compose_affine(1.0 / halfwidth),
            TestFn::PolyMod { coeffs, inner } => {
                let mut prod = poly_jet(coeffs, x, order).mul(&inner.jet(x, order));
                if prod.order() > order {
                    prod = Jet::from_coeffs(prod.coeffs()[..=order].to_vec());
                }
                prod
            }
            TestFn::Scale { factor, inner } => inner
                .jet(x / factor, order)
                .compose_affine(1.0 / factor),
            TestFn::Shift { offset, inner } => inner.jet(x - offset, order),
            TestFn::LinComb(terms) => {
                let mut acc = Jet::zero(order);
                for (c, g) in terms {
                    acc = acc.add(&g.jet(x, order).scale(*c));
                }
                acc
            }
            TestFn::Plateau {
                inner_radius,
                outer_radius,
            } => plateau_jet(*inner_radius, *outer_radius, x, order),
            TestFn::Deriv { order: k, inner } => inner.jet(x, order + k).derivative_jet(*k),
        }
    }

    /// Point value g(x).
    pub fn eval(&self, x: f64) -> f64 {
        self.jet(x, 0).value()
    }

    /// Derivative value g⁽ᵏ⁾(x); rejects orders above [`DERIV_CAP`].
    pub fn deriv_eval(&self, k: usize, x: f64) -> Result<f64, TestFnError> {
        if k > DERIV_CAP {
            return Err(TestFnError::OrderCap {
                requested: k,
                cap: DERIV_CAP,
            });
        }
        Ok(self.jet(x, k).derivative(k))
    }

    /// Checks shape parameters (positive widths, nonzero scale factors,
    /// ordered plateau radii, finite coefficients, derivative caps).
    pub fn validate(&self) -> Result<(), TestFnError> {
        match self {
            TestFn::Bump { center, halfwidth } => {
                if !center.is_finite() || !halfwidth.is_finite() || *halfwidth <= 0.0 {
                    return Err(TestFnError::InvalidShape(
                        "bump needs finite center and positive halfwidth",
                    ));
                }
            }
            TestFn::PolyMod { coeffs, inner } => {
                if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(TestFnError::InvalidShape(
                        "polynomial modulation needs finite, nonempty coefficients",
                    ));
                }
                inner.validate()?;
            }
            TestFn::Scale { factor, inner } => {
                if !factor.is_finite() || *factor == 0.0 {
                    return Err(TestFnError::InvalidShape("scale factor must be nonzero"));
                }
                inner.validate()?;
            }
            TestFn::Shift { offset, inner } => {
                if !offset.is_finite() {
                    return Err(TestFnError::InvalidShape("shift offset must be finite"));
                }
                inner.validate()?;
            }
            TestFn::LinComb(terms) => {
                for (c, g) in terms {
                    if !c.is_finite() {
                        return Err(TestFnError::InvalidShape(
                            "linear-combination coefficient must be finite",
                        ));
                    }
                    g.validate()?;
                }
            }
            TestFn::Plateau {
                inner_radius,
                outer_radius,
            } => {
                if !(inner_radius.is_finite()
                    && outer_radius.is_finite()
                    && 0.0 < *inner_radius
                    && inner_radius < outer_radius)
                {
                    return Err(TestFnError::InvalidShape(
                        "plateau needs 0 < inner_radius < outer_radius",
                    ));
                }
            }
            TestFn::Deriv { order, inner } => {
                if *order > DERIV_CAP {
                    return Err(TestFnError::OrderCap {
                        requested: *order,
                        cap: DERIV_CAP,
                    });
                }
                inner.validate()?;
            }
        }
        Ok(())
    }
}

/// Deterministic family of 32 test functions: 20 plain bumps (5 centers × 4
/// halfwidths) followed by 12 monomially modulated bumps (degrees 1–4 ×
/// 3 base bumps).
pub fn default_corpus() -> Vec<TestFn> {
    let mut out = Vec::with_capacity(32);
    for center in [-2.0, -1.0, 0.0, 1.0, 2.0] {
        for halfwidth in [0.25, 0.5, 1.0, 2.0] {
            out.push(TestFn::bump(center, halfwidth));
        }
    }
    let bases = [
        TestFn::bump(0.0, 1.0),
        TestFn::bump(0.0, 2.0),
        TestFn::bump(1.0, 1.0),
    ];
    for degree in 1..=4usize {
        for base in &bases {
            let mut coeffs = vec![0.0; degree + 1];
            coeffs[degree] = 1.0;
            out.push(TestFn::poly_mod(coeffs, base.clone()));
        }
    }
    out
}
