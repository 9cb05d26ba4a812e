//! Truncated Taylor ("jet") arithmetic.
//!
//! Used to evaluate high-order derivatives of the bump profile
//! exp(−1/(1−s²)) analytically, which the moment solvers need to materialize
//! derivative cores of bump-modulated exponential sums without numerical
//! differentiation.

use crate::{s, Scalar};

/// Taylor coefficients c[n] = f^{(n)}(t₀)/n! of a function at a fixed point,
/// truncated at `len() - 1` orders.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet<S> {
    c: Vec<S>,
}

impl<S: Scalar> Jet<S> {
    /// Jet of the constant `value`.
    pub fn constant(value: S, order: usize) -> Self {
        let mut c = vec![S::zero(); order + 1];
        c[0] = value;
        Self { c }
    }

    /// Jet of the identity t ↦ t, evaluated at `value`.
    pub fn variable(value: S, order: usize) -> Self {
        let mut c = vec![S::zero(); order + 1];
        c[0] = value;
        if order >= 1 {
            c[1] = S::one();
        }
        Self { c }
    }

    pub fn from_coeffs(c: Vec<S>) -> Self {
        Self { c }
    }

    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    /// Value f(t₀).
    pub fn value(&self) -> S {
        self.c[0]
    }

    /// Taylor coefficient f^{(n)}(t₀)/n!.
    pub fn coeff(&self, n: usize) -> S {
        self.c.get(n).copied().unwrap_or_else(S::zero)
    }

    /// Derivative value f^{(n)}(t₀) = n!·c[n].
    pub fn derivative(&self, n: usize) -> S {
        let mut f = S::one();
        for i in 2..=n {
            f *= s(i as f64);
        }
        self.coeff(n) * f
    }

    pub fn add(&self, other: &Self) -> Self {
        let ord = self.order().min(other.order());
        let c = (0..=ord).map(|n| self.coeff(n) + other.coeff(n)).collect();
        Self { c }
    }

    pub fn scale(&self, a: S) -> Self {
        Self {
            c: self.c.iter().map(|&x| x * a).collect(),
        }
    }

    /// Truncated Cauchy product.
    pub fn mul(&self, other: &Self) -> Self {
        let ord = self.order().min(other.order());
        let mut c = vec![S::zero(); ord + 1];
        for (n, cn) in c.iter_mut().enumerate() {
            for l in 0..=n {
                *cn += self.coeff(l) * other.coeff(n - l);
            }
        }
        Self { c }
    }

    /// Reciprocal 1/f; requires f(t₀) ≠ 0.
    pub fn recip(&self) -> Self {
        let ord = self.order();
        let inv0 = S::one() / self.c[0];
        let mut c = vec![S::zero(); ord + 1];
        c[0] = inv0;
        for n in 1..=ord {
            let mut acc = S::zero();
            for l in 1..=n {
                acc += self.coeff(l) * c[n - l];
            }
            c[n] = -inv0 * acc;
        }
        Self { c }
    }

    /// Exponential exp(f) via the standard recurrence g' = f'·g.
    pub fn exp(&self) -> Self {
        let ord = self.order();
        let mut c = vec![S::zero(); ord + 1];
        c[0] = self.c[0].exp();
        for n in 1..=ord {
            let mut acc = S::zero();
            for l in 1..=n {
                acc += s::<S>(l as f64) * self.coeff(l) * c[n - l];
            }
            c[n] = acc / s(n as f64);
        }
        Self { c }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exp_of_affine_matches_closed_form() {
        // f(t) = 2t + 1 at t = 0.3: d^n/dt^n exp(2t+1) = 2^n exp(1.6).
        let t = Jet::variable(0.3f64, 6);
        let f = t.scale(2.0).add(&Jet::constant(1.0, 6));
        let g = f.exp();
        let base = (1.6f64).exp();
        for n in 0..=6 {
            assert_abs_diff_eq!(
                g.derivative(n),
                2.0f64.powi(n as i32) * base,
                epsilon = 1e-10 * base
            );
        }
    }

    #[test]
    fn recip_matches_geometric_series() {
        // 1/(1 - t) at t = 0: coefficients all 1.
        let t = Jet::variable(0.0f64, 8);
        let f = Jet::constant(1.0, 8).add(&t.scale(-1.0));
        let r = f.recip();
        for n in 0..=8 {
            assert_abs_diff_eq!(r.coeff(n), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn bump_profile_derivatives_match_finite_differences() {
        // h(s) = exp(-1/(1-s²)), compare the jet's first two derivatives in t
        // (s affine in t) against central differences.
        let eval = |t: f64, order: usize| -> Jet<f64> {
            let tv = Jet::variable(t, order);
            // s = 2t - 1 on (0,1)
            let sjet = tv.scale(2.0).add(&Jet::constant(-1.0, order));
            let one_minus_s2 = Jet::constant(1.0, order).add(&sjet.mul(&sjet).scale(-1.0));
            one_minus_s2.recip().scale(-1.0).exp()
        };
        let t0 = 0.37;
        let j = eval(t0, 4);
        let h = 1e-5;
        let fd1 = (eval(t0 + h, 0).value() - eval(t0 - h, 0).value()) / (2.0 * h);
        let fd2 = (eval(t0 + h, 0).value() - 2.0 * j.value() + eval(t0 - h, 0).value()) / (h * h);
        assert_abs_diff_eq!(j.derivative(1), fd1, epsilon = 1e-7);
        assert_abs_diff_eq!(j.derivative(2), fd2, epsilon = 1e-4);
    }
}
