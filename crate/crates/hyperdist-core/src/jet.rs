//! Dense Taylor jets: truncated expansions of smooth functions at a real
//! point.
//!
//! A jet stores the coefficients c₀..c_m of f(x₀ + h) = Σ cₖ·hᵏ, i.e.
//! cₖ = f⁽ᵏ⁾(x₀)/k!. All derivative information in the crate flows through
//! the classical Taylor-mode recurrences below (product convolution,
//! reciprocal, exp, joint sin/cos) — there is no symbolic differentiation
//! of smooth primitives and no finite differencing.

use alloc::vec;
use alloc::vec::Vec;

/// Taylor coefficients of a smooth function at a point, up to a fixed order.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    c: Vec<f64>,
}

impl Jet {
    /// The constant function v (only c₀ nonzero).
    pub fn constant(v: f64, order: usize) -> Jet {
        let mut c = vec![0.0; order + 1];
        c[0] = v;
        Jet { c }
    }

    /// The identity x ↦ x expanded at x₀: coefficients [x₀, 1, 0, …].
    pub fn variable(x0: f64, order: usize) -> Jet {
        let mut c = vec![0.0; order + 1];
        c[0] = x0;
        if order >= 1 {
            c[1] = 1.0;
        }
        Jet { c }
    }

    pub fn zero(order: usize) -> Jet {
        Jet {
            c: vec![0.0; order + 1],
        }
    }

    pub fn from_coeffs(c: Vec<f64>) -> Jet {
        assert!(!c.is_empty());
        Jet { c }
    }

    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    /// Taylor coefficient cₖ (0.0 past the stored order).
    pub fn coeff(&self, k: usize) -> f64 {
        self.c.get(k).copied().unwrap_or(0.0)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    /// Value of the k-th derivative at the expansion point: k!·cₖ.
    pub fn derivative(&self, k: usize) -> f64 {
        let mut fact = 1.0;
        for i in 1..=k {
            fact *= i as f64;
        }
        fact * self.coeff(k)
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn add(&self, rhs: &Jet) -> Jet {
        let order = self.order().max(rhs.order());
        let c = (0..=order).map(|k| self.coeff(k) + rhs.coeff(k)).collect();
        Jet { c }
    }

    pub fn sub(&self, rhs: &Jet) -> Jet {
        self.add(&rhs.neg())
    }

    pub fn neg(&self) -> Jet {
        Jet {
            c: self.c.iter().map(|v| -v).collect(),
        }
    }

    pub fn scale(&self, k: f64) -> Jet {
        Jet {
            c: self.c.iter().map(|v| v * k).collect(),
        }
    }

    /// Truncated convolution product.
    pub fn mul(&self, rhs: &Jet) -> Jet {
        let order = self.order().max(rhs.order());
        let mut c = vec![0.0; order + 1];
        for (k, slot) in c.iter_mut().enumerate() {
            let mut acc = 0.0;
            for i in 0..=k {
                acc += self.coeff(i) * rhs.coeff(k - i);
            }
            *slot = acc;
        }
        Jet { c }
    }

    /// Integer power by repeated multiplication.
    pub fn pow_int(&self, n: u32) -> Jet {
        let mut acc = Jet::constant(1.0, self.order());
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// Reciprocal 1/f; `None` when the value at the point is zero.
    pub fn recip(&self) -> Option<Jet> {
        let a0 = self.c[0];
        if a0 == 0.0 {
            return None;
        }
        let order = self.order();
        let mut r = vec![0.0; order + 1];
        r[0] = 1.0 / a0;
        for k in 1..=order {
            let mut acc = 0.0;
            for i in 1..=k {
                acc += self.coeff(i) * r[k - i];
            }
            r[k] = -acc / a0;
        }
        Some(Jet { c: r })
    }

    /// exp ∘ f via the standard ODE recurrence y′ = y·f′.
    pub fn exp(&self) -> Jet {
        let order = self.order();
        let mut y = vec![0.0; order + 1];
        y[0] = libm::exp(self.c[0]);
        for k in 1..=order {
            let mut acc = 0.0;
            for i in 1..=k {
                acc += (i as f64) * self.coeff(i) * y[k - i];
            }
            y[k] = acc / k as f64;
        }
        Jet { c: y }
    }

    /// sin ∘ f and cos ∘ f computed jointly (each drives the other's
    /// recurrence).
    pub fn sin_cos(&self) -> (Jet, Jet) {
        let order = self.order();
        let mut s = vec![0.0; order + 1];
        let mut c = vec![0.0; order + 1];
        s[0] = libm::sin(self.c[0]);
        c[0] = libm::cos(self.c[0]);
        for k in 1..=order {
            let (mut ds, mut dc) = (0.0, 0.0);
            for i in 1..=k {
                let w = (i as f64) * self.coeff(i);
                ds += w * c[k - i];
                dc += w * s[k - i];
            }
            s[k] = ds / k as f64;
            c[k] = -dc / k as f64;
        }
        (Jet { c: s }, Jet { c })
    }

    /// Jet of the k-th derivative f⁽ᵏ⁾ at the same point, to order
    /// `self.order() − k`. Coefficient shift with factorial reweighting.
    pub fn derivative_jet(&self, k: usize) -> Jet {
        assert!(k <= self.order());
        let order = self.order() - k;
        let mut c = vec![0.0; order + 1];
        for (j, slot) in c.iter_mut().enumerate() {
            // s_j = f^{(k+j)}/j! = c_{k+j} · (k+j)!/j!
            let mut w = 1.0;
            for t in (j + 1)..=(j + k) {
                w *= t as f64;
            }
            *slot = self.coeff(k + j) * w;
        }
        Jet { c }
    }

    /// Antiderivative jet: given this jet for f′ and the value F(x₀),
    /// produces the jet of F.
    pub fn integrate(&self, value_at_point: f64) -> Jet {
        let mut c = vec![0.0; self.order() + 2];
        c[0] = value_at_point;
        for k in 0..=self.order() {
            c[k + 1] = self.coeff(k) / (k + 1) as f64;
        }
        Jet { c }
    }

    /// Composition with an affine inner map x = x₀ + λ·h: coefficients pick
    /// up powers of λ. (Sufficient for recentering/rescaling arguments;
    /// general composition is not needed.)
    pub fn compose_affine(&self, lambda: f64) -> Jet {
        let mut pow = 1.0;
        let c = self
            .c
            .iter()
            .map(|v| {
                let out = v * pow;
                pow *= lambda;
                out
            })
            .collect();
        Jet { c }
    }
}

/// Jet of the polynomial Σ coeffs[i]·xⁱ at x₀ (Taylor shift by repeated
/// Horner differentiation).
pub fn poly_jet(coeffs: &[f64], x0: f64, order: usize) -> Jet {
    let mut out = vec![0.0; order + 1];
    // Synthetic division: repeatedly divide by (x − x₀); remainders are the
    // shifted coefficients.
    let mut work: Vec<f64> = coeffs.to_vec();
    for slot in out.iter_mut() {
        if work.is_empty() {
            break;
        }
        let mut rem = 0.0;
        for w in work.iter_mut().rev() {
            rem = rem * x0 + *w;
            *w = rem;
        }
        *slot = rem;
        work.remove(0);
    }
    Jet { c: out }
}

/// Floor below which the flat bump is flushed to an exact zero jet: with
/// 1 − x² < 1/700 every derivative value is below ~1e−290 and the recurrences
/// would only produce underflow noise.
const BUMP_FLUSH: f64 = 1.0 / 700.0;

/// Jet of the standard bump b(x) = exp(−1/(1−x²)) (zero outside |x| < 1),
/// expanded at `x0`.
pub fn bump_jet(x0: f64, order: usize) -> Jet {
    let eta = 1.0 - x0 * x0;
    if eta <= BUMP_FLUSH {
        return Jet::zero(order);
    }
    let t = Jet::variable(x0, order);
    let w = Jet::constant(1.0, order).sub(&t.mul(&t));
    let v = w.recip().expect("interior point");
    v.neg().exp()
}
