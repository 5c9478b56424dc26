//! Computable calculus of generalized functions over a truncated
//! infinitesimal-series number system.
//!
//! The crate is organized bottom-up:
//!
//! * [`exponent`] — exact rational exponents for the infinitesimal generator ε.
//! * [`hyperreal`] — truncated sparse series Σ aᵢ·ε^{qᵢ}: an ordered-field
//!   approximation with exact term arithmetic, lexicographic comparison,
//!   standard parts, and magnitude classification.
//! * [`jet`] — dense Taylor jets; the derivative engine behind every smooth
//!   primitive (no symbolic derivative trees, no finite differences).
//! * [`quad`] — adaptive Gauss–Kronrod / Simpson quadrature, generic over
//!   scalar- or series-valued integrands with a deterministic subdivision
//!   and summation order.
//! * [`testfn`] — compactly supported smooth test functions with structural
//!   supports and arbitrary-order derivative evaluation.
//! * [`expr`] — internal-function expression trees and their evaluation at
//!   series points, including mollified bumps and exact piecewise branching.
//! * [`pairing`] — the quasi-inner product ⟨f, g⟩ computed coefficient-wise,
//!   energy integrals, and the admissibility check for the function class the
//!   calculus operates on.
//! * [`functional`] — generalized functionals f[g] = st⟨f, g⟩: application,
//!   derivatives, products with smooth factors, point values, equivalence.
//! * [`legendre`] — functional matching: least assemblies of Legendre modes
//!   reproducing prescribed functional values on independent test functions.
//! * [`continuity`] — probe-based S-continuity / sequence-convergence
//!   refutation, structural *-continuity analysis, shadows, and seminorms.
//!
//! Everything is `no_std` + `alloc`; float transcendentals go through `libm`
//! so results are bit-identical across platforms.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod continuity;
pub mod exponent;
pub mod functional;
pub mod expr;
pub mod hyperreal;
pub mod jet;
pub mod legendre;
pub mod pairing;
pub mod quad;
pub mod testfn;

pub use continuity::{MonadProbeSet, Verdict};
pub use exponent::ExponentQ;
pub use expr::{EvalError, InternalExpr};
pub use functional::GenFunctional;
pub use hyperreal::{HyperReal, NumClass, TruncationPolicy};
pub use legendre::{MatchConfig, MatchResult};
pub use pairing::{PairingConfig, PairingResult};
pub use testfn::TestFn;
