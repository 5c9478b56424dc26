//! Functional matching over a rescaled Legendre basis.
//!
//! Given m prescriptions ⟨u, gⱼ⟩ = aⱼ (test functions gⱼ, real targets aⱼ),
//! find a polynomial representative
//!
//! ```text
//! u(x) = Σ_l c_l · P_{j_l}(x / c)
//! ```
//!
//! using exactly m Legendre modes on a window [−c, c] covering every gⱼ.
//! The matcher computes the coefficient matrix B[j][n] = ⟨gⱼ, Pₙ(·/c)⟩ / rₙ
//! (rₙ = 2c/(2n+1), so B rows are Legendre coefficients of the gⱼ), greedily
//! selects one column per prescription by largest surviving pivot under
//! row elimination, solves the resulting m×m system by partially pivoted
//! LU, and then *re-verifies* every prescription with a fresh scalar
//! quadrature of u·gⱼ — the report's residuals never reuse the matrix
//! entries that produced the solution.
//!
//! [`brute_force_oracle`] solves the same constraints with the *full* basis
//! (minimum-norm solution via the normal equations); it exists to
//! cross-check solvability independently of the greedy selection.

use alloc::vec;
use alloc::vec::Vec;
use core::convert::Infallible;
use thiserror::Error;

use crate::expr::InternalExpr;
use crate::quad::{integrate, QuadFailure, QuadratureConfig};
use crate::testfn::TestFn;

/// Legendre polynomial Pₙ(x) by the three-term recurrence.
pub fn legendre_p(n: usize, x: f64) -> f64 {
    let mut row = [1.0, x];
    if n < 2 {
        return row[n];
    }
    for k in 1..n {
        let next = (((2 * k + 1) as f64) * x * row[1] - (k as f64) * row[0]) / ((k + 1) as f64);
        row = [row[1], next];
    }
    row[1]
}

/// P₀(x)..Pₙ(x) in one recurrence pass.
pub fn legendre_row(n: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(1.0);
    if n == 0 {
        return out;
    }
    out.push(x);
    for k in 1..n {
        let next =
            (((2 * k + 1) as f64) * x * out[k] - (k as f64) * out[k - 1]) / ((k + 1) as f64);
        out.push(next);
    }
    out
}

/// Monomial coefficients of Pₙ (ascending powers), by the same recurrence
/// applied to coefficient vectors.
pub fn legendre_monomial(n: usize) -> Vec<f64> {
    let mut prev = vec![1.0];
    if n == 0 {
        return prev;
    }
    let mut cur = vec![0.0, 1.0];
    for k in 1..n {
        let mut next = vec![0.0; k + 2];
        for (i, c) in cur.iter().enumerate() {
            next[i + 1] += ((2 * k + 1) as f64) * c;
        }
        for (i, c) in prev.iter().enumerate() {
            next[i] -= (k as f64) * c;
        }
        for c in next.iter_mut() {
            *c /= (k + 1) as f64;
        }
        prev = cur;
        cur = next;
    }
    cur
}

/// Matching parameters.
#[derive(Clone, Debug)]
pub struct MatchConfig {
    /// Number of basis modes scanned for selection.
    pub n_basis: usize,
    /// Window half-width c; `None` picks 1.1× the support hull of the
    /// prescriptions.
    pub half_width: Option<f64>,
    /// Smallest acceptable elimination pivot before the prescriptions are
    /// declared dependent.
    pub cond_tol: f64,
    /// Largest acceptable re-verified residual.
    pub match_tol: f64,
    pub quad: QuadratureConfig,
}

impl Default for MatchConfig {
    fn default() -> MatchConfig {
        MatchConfig {
            n_basis: 64,
            half_width: None,
            cond_tol: 1e-10,
            match_tol: 1e-6,
            quad: QuadratureConfig::default(),
        }
    }
}

/// A successful match.
#[derive(Clone, Debug)]
pub struct MatchResult {
    /// Selected mode indices, ascending.
    pub indices: Vec<usize>,
    /// Coefficient of each selected mode, aligned with `indices`.
    pub coeffs: Vec<f64>,
    /// Window half-width actually used.
    pub half_width: f64,
    /// Smallest elimination pivot (an independence margin, not a norm
    /// condition number).
    pub condition: f64,
    /// |⟨u, gⱼ⟩ − aⱼ| from the fresh verification pass, per prescription.
    pub residuals: Vec<f64>,
    /// u as monomial coefficients in x, ascending.
    pub monomial_coeffs: Vec<f64>,
    /// u as an expression tree (Horner form of the monomials).
    pub rep: InternalExpr,
}

/// Why a match could not be produced.
#[derive(Clone, Debug, Error, PartialEq)]
pub enum MatchError {
    #[error("window half-width {given} does not cover the support hull {needed}")]
    SupportViolation { needed: f64, given: f64 },
    #[error("prescriptions are dependent: stage {stage} pivot {pivot:e}")]
    Independence { stage: usize, pivot: f64 },
    #[error("quadrature budget exhausted while {during}")]
    Quadrature { during: &'static str },
    #[error("singular linear system")]
    Singular,
    #[error("verified residual {residual:e} for prescription {index} exceeds tolerance")]
    Verification { index: usize, residual: f64 },
    #[error("{0}")]
    BadInput(&'static str),
}

fn support_hull(targets: &[(TestFn, f64)]) -> f64 {
    let mut needed = 0.0f64;
    for (g, _) in targets {
        let (lo, hi) = g.support();
        needed = needed.max(lo.abs()).max(hi.abs());
    }
    needed
}

fn row_integral(
    g: &TestFn,
    n_basis: usize,
    c: f64,
    quad: &QuadratureConfig,
) -> Result<Vec<f64>, MatchError> {
    let (lo, hi) = g.support();
    let f = |x: f64| -> Result<Vec<f64>, Infallible> {
        let w = g.eval(x);
        let mut row = legendre_row(n_basis - 1, x / c);
        for v in row.iter_mut() {
            *v *= w;
        }
        Ok(row)
    };
    match integrate(f, lo, hi, quad) {
        Ok(out) => Ok(out.value),
        Err(QuadFailure::TooManySubdivisions { .. }) => Err(MatchError::Quadrature {
            during: "assembling the coefficient matrix",
        }),
        Err(QuadFailure::Integrand(e)) => match e {},
    }
}

/// Solve `mat · x = rhs` by partially pivoted LU. `None` when singular.
fn lu_solve(mut mat: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = mat.len();
    for col in 0..n {
        let (piv, mag) = (col..n)
            .map(|r| (r, mat[r][col].abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1))?;
        if mag == 0.0 {
            return None;
        }
        mat.swap(col, piv);
        rhs.swap(col, piv);
        for r in col + 1..n {
            let factor = mat[r][col] / mat[col][col];
            if factor != 0.0 {
                for k in col..n {
                    let s = mat[col][k];
                    mat[r][k] -= factor * s;
                }
                rhs[r] -= factor * rhs[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for k in row + 1..n {
            acc -= mat[row][k] * x[k];
        }
        x[row] = acc / mat[row][row];
    }
    Some(x)
}

/// Greedy one-column-per-row selection with elimination. Returns the
/// chosen columns (in selection order) and the smallest pivot.
fn greedy_select(
    b: &[Vec<f64>],
    cond_tol: f64,
) -> Result<(Vec<usize>, f64), MatchError> {
    let m = b.len();
    let n = b[0].len();
    let mut work: Vec<Vec<f64>> = b.to_vec();
    let mut chosen: Vec<usize> = Vec::with_capacity(m);
    let mut min_pivot = f64::INFINITY;
    for s in 0..m {
        let mut best = None;
        let mut best_mag = 0.0f64;
        for j in 0..n {
            if chosen.contains(&j) {
                continue;
            }
            let mag = work[s][j].abs();
            if mag > best_mag {
                best_mag = mag;
                best = Some(j);
            }
        }
        let j = match best {
            Some(j) if best_mag > cond_tol => j,
            _ => {
                return Err(MatchError::Independence {
                    stage: s,
                    pivot: best_mag,
                })
            }
        };
        min_pivot = min_pivot.min(best_mag);
        chosen.push(j);
        for r in s + 1..m {
            let factor = work[r][j] / work[s][j];
            if factor != 0.0 {
                for k in 0..n {
                    let v = work[s][k];
                    work[r][k] -= factor * v;
                }
            }
        }
    }
    Ok((chosen, min_pivot))
}

/// Match the prescriptions with exactly one Legendre mode per prescription.
pub fn match_functionals(
    targets: &[(TestFn, f64)],
    cfg: &MatchConfig,
) -> Result<MatchResult, MatchError> {
    let m = targets.len();
    if m == 0 {
        return Err(MatchError::BadInput("no prescriptions"));
    }
    if m > cfg.n_basis {
        return Err(MatchError::BadInput("more prescriptions than basis modes"));
    }
    let needed = support_hull(targets);
    let c = match cfg.half_width {
        Some(given) => {
            if given < needed {
                return Err(MatchError::SupportViolation { needed, given });
            }
            given
        }
        None => {
            if needed == 0.0 {
                return Err(MatchError::BadInput("prescriptions have empty support"));
            }
            1.1 * needed
        }
    };

    // Coefficient matrix: one vector-valued quadrature pass per row.
    let mut b: Vec<Vec<f64>> = Vec::with_capacity(m);
    for (g, _) in targets {
        let mut row = row_integral(g, cfg.n_basis, c, &cfg.quad)?;
        for (n, v) in row.iter_mut().enumerate() {
            let r_n = 2.0 * c / ((2 * n + 1) as f64);
            *v /= r_n;
        }
        b.push(row);
    }

    let (mut indices, condition) = greedy_select(&b, cfg.cond_tol)?;
    indices.sort_unstable();

    // Solve on the original (uneliminated) entries of the chosen columns.
    let a_mat: Vec<Vec<f64>> = b
        .iter()
        .map(|row| indices.iter().map(|&j| row[j]).collect())
        .collect();
    let rhs: Vec<f64> = targets.iter().map(|(_, a)| *a).collect();
    let y = lu_solve(a_mat, rhs).ok_or(MatchError::Singular)?;
    let coeffs: Vec<f64> = y
        .iter()
        .zip(&indices)
        .map(|(yl, &j)| {
            let r_n = 2.0 * c / ((2 * j + 1) as f64);
            yl / r_n
        })
        .collect();

    // Fresh verification: scalar quadrature of u·gⱼ per prescription,
    // evaluating u through the recurrence (not the reported monomials).
    let n_max = *indices.last().unwrap();
    let mut residuals = Vec::with_capacity(m);
    for (j, (g, a)) in targets.iter().enumerate() {
        let (lo, hi) = g.support();
        let f = |x: f64| -> Result<f64, Infallible> {
            let row = legendre_row(n_max, x / c);
            let u: f64 = indices
                .iter()
                .zip(&coeffs)
                .map(|(&n, cl)| cl * row[n])
                .sum();
            Ok(u * g.eval(x))
        };
        let out = match integrate(f, lo, hi, &cfg.quad) {
            Ok(out) => out.value,
            Err(QuadFailure::TooManySubdivisions { .. }) => {
                return Err(MatchError::Quadrature {
                    during: "verifying the match",
                })
            }
            Err(QuadFailure::Integrand(e)) => match e {},
        };
        let residual = (out - a).abs();
        if residual > cfg.match_tol {
            return Err(MatchError::Verification { index: j, residual });
        }
        residuals.push(residual);
    }

    // Monomial report: Σ c_l P_{j_l}(y) expanded in y, then y = x/c.
    let mut monomial_coeffs = vec![0.0; n_max + 1];
    for (&n, cl) in indices.iter().zip(&coeffs) {
        for (k, pk) in legendre_monomial(n).iter().enumerate() {
            monomial_coeffs[k] += cl * pk;
        }
    }
    for (k, v) in monomial_coeffs.iter_mut().enumerate() {
        *v /= libm::pow(c, k as f64);
    }
    let rep = horner_ast(&monomial_coeffs);

    Ok(MatchResult {
        indices,
        coeffs,
        half_width: c,
        condition,
        residuals,
        monomial_coeffs,
        rep,
    })
}

/// Horner-form expression tree for ascending monomial coefficients.
pub fn horner_ast(coeffs: &[f64]) -> InternalExpr {
    let mut acc = InternalExpr::real(*coeffs.last().unwrap_or(&0.0));
    for &a in coeffs.iter().rev().skip(1) {
        acc = InternalExpr::add(
            InternalExpr::mul(acc, InternalExpr::var()),
            InternalExpr::real(a),
        );
    }
    acc
}

/// Full-basis minimum-norm solution of the same constraints.
#[derive(Clone, Debug)]
pub struct OracleResult {
    /// One coefficient per basis mode 0..n_basis.
    pub coeffs: Vec<f64>,
    /// max |Σₙ M[j][n]·xₙ − aⱼ| over the prescriptions.
    pub max_residual: f64,
}

/// Solve the constraints with every mode available: x = Mᵀ(MMᵀ)⁻¹a, where
/// M[j][n] = ⟨gⱼ, Pₙ(·/c)⟩. The matrix is rebuilt from scratch.
pub fn brute_force_oracle(
    targets: &[(TestFn, f64)],
    half_width: f64,
    n_basis: usize,
    quad: &QuadratureConfig,
) -> Result<OracleResult, MatchError> {
    let m = targets.len();
    if m == 0 {
        return Err(MatchError::BadInput("no prescriptions"));
    }
    let needed = support_hull(targets);
    if half_width < needed {
        return Err(MatchError::SupportViolation {
            needed,
            given: half_width,
        });
    }
    let mut mat: Vec<Vec<f64>> = Vec::with_capacity(m);
    for (g, _) in targets {
        mat.push(row_integral(g, n_basis, half_width, quad)?);
    }
    let mut gram = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            gram[i][j] = mat[i].iter().zip(&mat[j]).map(|(a, b)| a * b).sum();
        }
    }
    let rhs: Vec<f64> = targets.iter().map(|(_, a)| *a).collect();
    let z = lu_solve(gram, rhs).ok_or(MatchError::Singular)?;
    let mut coeffs = vec![0.0; n_basis];
    for (row, zj) in mat.iter().zip(&z) {
        for (n, v) in row.iter().enumerate() {
            coeffs[n] += zj * v;
        }
    }
    let mut max_residual = 0.0f64;
    for (j, (_, a)) in targets.iter().enumerate() {
        let got: f64 = mat[j].iter().zip(&coeffs).map(|(mv, xv)| mv * xv).sum();
        max_residual = max_residual.max((got - a).abs());
    }
    Ok(OracleResult {
        coeffs,
        max_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::GenFunctional;
    use crate::pairing::PairingConfig;
    use approx::assert_relative_eq;

    #[test]
    fn legendre_values_and_monomials() {
        assert_eq!(legendre_p(0, 0.3), 1.0);
        assert_eq!(legendre_p(1, 0.3), 0.3);
        assert_relative_eq!(legendre_p(2, 0.5), -0.125, epsilon = 1e-15);
        assert_relative_eq!(legendre_p(3, 0.7), -0.1925, max_relative = 1e-14);
        let row = legendre_row(5, 0.7);
        for (n, v) in row.iter().enumerate() {
            assert_relative_eq!(*v, legendre_p(n, 0.7), max_relative = 1e-14);
        }
        assert_eq!(legendre_monomial(3), vec![0.0, -1.5, 0.0, 2.5]);
        assert_eq!(legendre_monomial(4), vec![0.375, 0.0, -3.75, 0.0, 4.375]);
    }

    #[test]
    fn legendre_orthogonality() {
        let quad = QuadratureConfig::default();
        let f23 = |x: f64| -> Result<f64, Infallible> {
            Ok(legendre_p(2, x) * legendre_p(3, x))
        };
        let v = integrate(f23, -1.0, 1.0, &quad).unwrap().value;
        assert!(v.abs() < 1e-12);
        let f33 = |x: f64| -> Result<f64, Infallible> {
            let p = legendre_p(3, x);
            Ok(p * p)
        };
        let n3 = integrate(f33, -1.0, 1.0, &quad).unwrap().value;
        assert_relative_eq!(n3, 2.0 / 7.0, max_relative = 1e-12);
    }

    #[test]
    fn single_prescription_matches_exactly() {
        let targets = vec![(TestFn::bump(0.0, 1.0), 1.0)];
        let r = match_functionals(&targets, &MatchConfig::default()).unwrap();
        assert_eq!(r.indices.len(), 1);
        assert_eq!(r.coeffs.len(), 1);
        assert_relative_eq!(r.half_width, 1.1);
        assert!(r.residuals[0] <= 1e-10);
        assert!(r.condition > 0.0);
        // Monomial report and mode coefficients describe the same u.
        let x = 0.37;
        let u_modes: f64 = r
            .indices
            .iter()
            .zip(&r.coeffs)
            .map(|(&n, c)| c * legendre_p(n, x / r.half_width))
            .sum();
        let u_monos: f64 = r
            .monomial_coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * libm::pow(x, k as f64))
            .sum();
        assert_relative_eq!(u_modes, u_monos, max_relative = 1e-12);
    }

    #[test]
    fn scaling_a_target_scales_the_coefficients() {
        let g = TestFn::bump(0.3, 0.8);
        let r1 = match_functionals(&[(g.clone(), 1.0)], &MatchConfig::default()).unwrap();
        let r3 = match_functionals(&[(g, -3.0)], &MatchConfig::default()).unwrap();
        assert_eq!(r1.indices, r3.indices);
        for (a, b) in r1.coeffs.iter().zip(&r3.coeffs) {
            assert_relative_eq!(-3.0 * a, *b, max_relative = 1e-12);
        }
    }

    #[test]
    fn multi_mode_match_verified_through_the_pairing() {
        let targets = vec![
            (TestFn::bump(0.0, 1.0), 1.0),
            (TestFn::bump(0.5, 0.5), 0.0),
            (TestFn::poly_mod(vec![0.0, 1.0], TestFn::bump(0.0, 1.0)), 2.0),
        ];
        let r = match_functionals(&targets, &MatchConfig::default()).unwrap();
        assert_eq!(r.indices.len(), 3);
        assert!(r.indices.windows(2).all(|w| w[0] < w[1]));
        assert!(r.residuals.iter().all(|e| *e <= 1e-6));
        // The reported expression tree reproduces the prescribed values
        // through the quasi-inner product — a separate integration path.
        let f = GenFunctional::new(r.rep.clone());
        let cfg = PairingConfig::default();
        for (g, a) in &targets {
            assert_relative_eq!(f.apply(g, &cfg).unwrap(), *a, epsilon = 5e-7);
        }
    }

    #[test]
    fn oracle_solves_with_the_full_basis() {
        let targets = vec![
            (TestFn::bump(0.0, 1.0), 1.0),
            (TestFn::bump(0.5, 0.5), 0.0),
        ];
        let c = 1.1 * 1.0f64.max(1.0);
        let o = brute_force_oracle(&targets, c, 16, &QuadratureConfig::default()).unwrap();
        assert!(o.max_residual <= 1e-10, "residual {}", o.max_residual);
        assert_eq!(o.coeffs.len(), 16);
    }

    #[test]
    fn dependent_prescriptions_are_rejected() {
        let g = TestFn::bump(0.0, 1.0);
        let targets = vec![(g.clone(), 1.0), (g, 2.0)];
        match match_functionals(&targets, &MatchConfig::default()) {
            Err(MatchError::Independence { stage, pivot }) => {
                assert_eq!(stage, 1);
                assert!(pivot <= 1e-10);
            }
            other => panic!("expected independence error, got {other:?}"),
        }
    }

    #[test]
    fn support_violations_are_rejected() {
        let targets = vec![(TestFn::bump(2.0, 0.25), 1.0)];
        let cfg = MatchConfig {
            half_width: Some(1.0),
            ..MatchConfig::default()
        };
        match match_functionals(&targets, &cfg) {
            Err(MatchError::SupportViolation { needed, given }) => {
                assert_relative_eq!(needed, 2.25);
                assert_relative_eq!(given, 1.0);
            }
            other => panic!("expected support violation, got {other:?}"),
        }
        // A generous explicit window works.
        let ok = MatchConfig {
            half_width: Some(4.0),
            ..MatchConfig::default()
        };
        assert!(match_functionals(&targets, &ok).is_ok());
    }

    #[test]
    fn bad_inputs() {
        assert!(matches!(
            match_functionals(&[], &MatchConfig::default()),
            Err(MatchError::BadInput(_))
        ));
        let cfg = MatchConfig {
            n_basis: 1,
            ..MatchConfig::default()
        };
        let targets = vec![
            (TestFn::bump(0.0, 1.0), 1.0),
            (TestFn::bump(0.5, 0.5), 0.0),
        ];
        assert!(matches!(
            match_functionals(&targets, &cfg),
            Err(MatchError::BadInput(_))
        ));
    }

    #[test]
    fn horner_ast_evaluates_the_polynomial() {
        let e = horner_ast(&[1.0, -2.0, 0.5]);
        let v = e
            .eval_at(&crate::hyperreal::HyperReal::from_real(2.0))
            .unwrap()
            .standard_part()
            .unwrap();
        assert_relative_eq!(v, 1.0 - 4.0 + 2.0, epsilon = 1e-15);
    }
}
