//! Adaptive numeric quadrature, generic over the value being accumulated.
//!
//! Both scalar (`f64`), batched (`Vec<f64>`, one slot per integrand in a
//! family sharing the same sample points) and series-valued
//! ([`HyperReal`](crate::hyperreal::HyperReal), coefficient-wise) integrals
//! go through the same panel logic. The primary rule is the 15-point
//! Gauss–Kronrod pair; a classic adaptive Simpson rule is kept as an
//! independent cross-check.
//!
//! Panels are refined by bisection with the local tolerance halved on each
//! split, recursing into the left half first, so the summation order — and
//! therefore the exact floating-point result — is deterministic.

use alloc::vec::Vec;
use thiserror::Error;

use crate::hyperreal::HyperReal;

/// Values that can be accumulated by a quadrature rule.
///
/// There is intentionally no `zero()`: empty sums are represented as
/// `Option<V>` so the trait never has to invent a default-configured value.
pub trait QuadValue: Clone {
    fn add(&self, rhs: &Self) -> Self;
    fn scale(&self, k: f64) -> Self;
    /// Magnitude used for error estimates.
    fn err_norm(&self) -> f64;
}

impl QuadValue for f64 {
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn scale(&self, k: f64) -> Self {
        self * k
    }
    fn err_norm(&self) -> f64 {
        libm::fabs(*self)
    }
}

impl QuadValue for HyperReal {
    fn add(&self, rhs: &Self) -> Self {
        HyperReal::add(self, rhs)
    }
    fn scale(&self, k: f64) -> Self {
        HyperReal::scale(self, k)
    }
    fn err_norm(&self) -> f64 {
        self.terms()
            .iter()
            .fold(0.0, |m, (_, c)| m.max(libm::fabs(*c)))
    }
}

impl QuadValue for Vec<f64> {
    fn add(&self, rhs: &Self) -> Self {
        debug_assert_eq!(self.len(), rhs.len());
        self.iter().zip(rhs).map(|(a, b)| a + b).collect()
    }
    fn scale(&self, k: f64) -> Self {
        self.iter().map(|a| a * k).collect()
    }
    fn err_norm(&self) -> f64 {
        self.iter().fold(0.0, |m, a| m.max(libm::fabs(*a)))
    }
}

/// Quadrature rule selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuadRule {
    /// 15-point Gauss–Kronrod pair (7-point Gauss embedded).
    GaussKronrod15,
    /// Adaptive Simpson with Richardson error estimate; independent of the
    /// Gauss–Kronrod tables, useful as a cross-check.
    AdaptiveSimpson,
}

/// Tolerances and budget for one adaptive integration.
#[derive(Clone, Copy, Debug)]
pub struct QuadratureConfig {
    /// Absolute tolerance the summed panel error estimates must meet.
    pub abs_tol: f64,
    /// Hard cap on the number of panels evaluated.
    pub max_subdivisions: usize,
    pub rule: QuadRule,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            abs_tol: 1e-10,
            max_subdivisions: 2000,
            rule: QuadRule::GaussKronrod15,
        }
    }
}

/// Successful integration: value, summed error estimate, panels used.
#[derive(Clone, Debug)]
pub struct QuadOutcome<V> {
    pub value: V,
    pub error: f64,
    pub panels: usize,
}

/// Why an integration did not produce a value.
#[derive(Debug, Error, PartialEq)]
pub enum QuadFailure<E> {
    /// The integrand itself failed at a sample point.
    #[error("integrand evaluation failed")]
    Integrand(#[source] E),
    /// The panel budget ran out before the tolerance was met.
    #[error("quadrature used all {panels} subdivisions on [{:?}]", interval)]
    TooManySubdivisions { panels: usize, interval: (f64, f64) },
}

// 15-point Kronrod abscissae (positive half; last entry is the center).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

// Embedded 7-point Gauss weights (for xgk indices 1, 3, 5 and the center).
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

// 15-point Kronrod weights matching XGK.
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

struct Panel<V> {
    value: V,
    err: f64,
}

struct Worker<'a, F> {
    f: F,
    cfg: &'a QuadratureConfig,
    panels: usize,
}

impl<'a, V, E, F> Worker<'a, F>
where
    V: QuadValue,
    F: FnMut(f64) -> Result<V, E>,
{
    fn eval(&mut self, x: f64) -> Result<V, QuadFailure<E>> {
        (self.f)(x).map_err(QuadFailure::Integrand)
    }

    /// One Gauss–Kronrod panel on [a, b]; error is ‖K − G‖·half-length.
    fn gk15(&mut self, a: f64, b: f64) -> Result<Panel<V>, QuadFailure<E>> {
        let half = 0.5 * (b - a);
        let center = 0.5 * (a + b);
        let fc = self.eval(center)?;
        let mut kron = fc.scale(WGK[7]);
        let mut gauss = fc.scale(WG[3]);
        for j in 0..7 {
            let off = half * XGK[j];
            let pair = self.eval(center - off)?.add(&self.eval(center + off)?);
            kron = kron.add(&pair.scale(WGK[j]));
            if j % 2 == 1 {
                gauss = gauss.add(&pair.scale(WG[j / 2]));
            }
        }
        let err = kron.add(&gauss.scale(-1.0)).err_norm() * libm::fabs(half);
        Ok(Panel {
            value: kron.scale(half),
            err,
        })
    }

    /// One Simpson panel with Richardson error estimate ‖S₂ − S₁‖/15.
    fn simpson(&mut self, a: f64, b: f64) -> Result<Panel<V>, QuadFailure<E>> {
        let m = 0.5 * (a + b);
        let h = b - a;
        let (fa, fm, fb) = (self.eval(a)?, self.eval(m)?, self.eval(b)?);
        let coarse = fa.add(&fm.scale(4.0)).add(&fb).scale(h / 6.0);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (self.eval(lm)?, self.eval(rm)?);
        let fine = fa
            .add(&flm.scale(4.0))
            .add(&fm.scale(2.0))
            .add(&frm.scale(4.0))
            .add(&fb)
            .scale(h / 12.0);
        let err = fine.add(&coarse.scale(-1.0)).err_norm() / 15.0;
        Ok(Panel { value: fine, err })
    }

    fn panel(&mut self, a: f64, b: f64) -> Result<Panel<V>, QuadFailure<E>> {
        self.panels += 1;
        match self.cfg.rule {
            QuadRule::GaussKronrod15 => self.gk15(a, b),
            QuadRule::AdaptiveSimpson => self.simpson(a, b),
        }
    }

    /// Leftmost-first recursive refinement of [a, b] to tolerance `tol`.
    fn refine(&mut self, a: f64, b: f64, tol: f64, out: &mut Accum<V>) -> Result<(), QuadFailure<E>> {
        let p = self.panel(a, b)?;
        let mid = 0.5 * (a + b);
        let splittable = mid > a && mid < b;
        if p.err <= tol || !splittable {
            out.push(p);
            return Ok(());
        }
        if self.panels >= self.cfg.max_subdivisions {
            return Err(QuadFailure::TooManySubdivisions {
                panels: self.panels,
                interval: (a, b),
            });
        }
        self.refine(a, mid, 0.5 * tol, out)?;
        self.refine(mid, b, 0.5 * tol, out)
    }
}

struct Accum<V> {
    value: Option<V>,
    error: f64,
}

impl<V: QuadValue> Accum<V> {
    fn new() -> Self {
        Accum {
            value: None,
            error: 0.0,
        }
    }
    fn push(&mut self, p: Panel<V>) {
        self.error += p.err;
        self.value = Some(match self.value.take() {
            None => p.value,
            Some(v) => v.add(&p.value),
        });
    }
}

/// Adaptively integrate `f` over [a, b].
///
/// `a > b` flips the orientation (and the sign); `a == b` yields the
/// integrand's value at `a` scaled by zero, so the result carries whatever
/// configuration the integrand's values carry.
pub fn integrate<V, E, F>(
    f: F,
    a: f64,
    b: f64,
    cfg: &QuadratureConfig,
) -> Result<QuadOutcome<V>, QuadFailure<E>>
where
    V: QuadValue,
    F: FnMut(f64) -> Result<V, E>,
{
    integrate_with_breakpoints(f, a, b, &[], cfg)
}

/// Like [`integrate`], but pre-splits the domain at the interior points of
/// `breakpoints` (kinks, support edges, branch boundaries) so that each
/// sub-interval sees a smooth integrand.
pub fn integrate_with_breakpoints<V, E, F>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    cfg: &QuadratureConfig,
) -> Result<QuadOutcome<V>, QuadFailure<E>>
where
    V: QuadValue,
    F: FnMut(f64) -> Result<V, E>,
{
    let mut w = Worker { f, cfg, panels: 0 };
    if a == b {
        let value = w.eval(a)?.scale(0.0);
        return Ok(QuadOutcome {
            value,
            error: 0.0,
            panels: 0,
        });
    }
    let (lo, hi, sign) = if a <= b { (a, b, 1.0) } else { (b, a, -1.0) };

    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|p| p.is_finite() && *p > lo && *p < hi)
        .collect();
    cuts.sort_by(|x, y| x.partial_cmp(y).expect("finite breakpoints"));
    cuts.dedup();

    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(lo);
    edges.extend(cuts);
    edges.push(hi);

    let seg_tol = cfg.abs_tol / (edges.len() - 1) as f64;
    let mut acc = Accum::new();
    for pair in edges.windows(2) {
        w.refine(pair[0], pair[1], seg_tol, &mut acc)?;
    }
    let value = acc.value.expect("at least one panel").scale(sign);
    Ok(QuadOutcome {
        value,
        error: acc.error,
        panels: w.panels,
    })
}
