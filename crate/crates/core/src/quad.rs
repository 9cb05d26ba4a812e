//! Quadrature kernels: Gauss–Legendre nodes on (0,1), composite trapezoid
//! rules with their iterated primitives and adjoints, and Filon-trapezoid
//! oscillatory moments that stay exact for piecewise-linear integrands at
//! arbitrary frequency.

use nalgebra::ComplexField;
use num_complex::Complex;

use crate::{s, Scalar};

/// Gauss–Legendre nodes and weights on (0,1).
///
/// Nodes are roots of the Legendre polynomial found by Newton iteration from
/// the Chebyshev initial guess; weights via the derivative identity. Accurate
/// to machine precision for the orders used here (≤ a few hundred).
pub fn gauss_legendre_01<S: Scalar>(order: usize) -> (Vec<S>, Vec<S>) {
    assert!(order >= 1);
    let n = order;
    let mut nodes = vec![S::zero(); n];
    let mut weights = vec![S::zero(); n];
    let nf: S = s(n as f64);
    for i in 0..n.div_ceil(2) {
        // Initial guess on (-1,1), then Newton on P_n.
        let theta: S = S::pi() * (s::<S>(i as f64) + s(0.75)) / (nf + s(0.5));
        let mut x = theta.cos();
        let mut pp = S::zero();
        for _ in 0..100 {
            // Recurrence for P_n(x) and P'_n(x).
            let mut p0 = S::one();
            let mut p1 = x;
            for j in 2..=n {
                let jf: S = s(j as f64);
                let p2 = ((s::<S>(2.0) * jf - S::one()) * x * p1 - (jf - S::one()) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            pp = nf * (x * p1 - p0) / (x * x - S::one());
            let dx = p1 / pp;
            x -= dx;
            if dx.abs() < s(1e-16) {
                break;
            }
        }
        let w = s::<S>(2.0) / ((S::one() - x * x) * pp * pp);
        // Map (-1,1) -> (0,1); nodes are symmetric about the midpoint.
        nodes[i] = (S::one() - x) / s(2.0);
        nodes[n - 1 - i] = (S::one() + x) / s(2.0);
        weights[i] = w / s(2.0);
        weights[n - 1 - i] = w / s(2.0);
    }
    (nodes, weights)
}

/// Composite trapezoid rule over uniformly spaced samples.
pub fn trapezoid<S: Scalar>(values: &[S], dt: S) -> S {
    if values.len() < 2 {
        return S::zero();
    }
    let mut acc = (values[0] + values[values.len() - 1]) / s(2.0);
    for v in &values[1..values.len() - 1] {
        acc += *v;
    }
    acc * dt
}

/// Trapezoid node weights: `dot(weights, values)` equals `trapezoid(values, dt)`.
pub fn trapezoid_weights<S: Scalar>(n_nodes: usize, dt: S) -> Vec<S> {
    assert!(n_nodes >= 2);
    let mut w = vec![dt; n_nodes];
    w[0] = dt / s(2.0);
    w[n_nodes - 1] = dt / s(2.0);
    w
}

/// Cumulative trapezoid primitive: output[i] = ∫_0^{t_i} (linear interpolant).
/// output[0] = 0 exactly.
pub fn trapezoid_primitive<S: Scalar>(values: &[S], dt: S) -> Vec<S> {
    let mut out = vec![S::zero(); values.len()];
    let half = dt / s(2.0);
    for i in 1..values.len() {
        out[i] = out[i - 1] + (values[i - 1] + values[i]) * half;
    }
    out
}

/// Adjoint of [`trapezoid_primitive`] viewed as a matrix on node samples.
///
/// Needed to pull terminal-value and moment functionals of iterated
/// primitives back to linear functionals of the core samples in O(n).
pub fn trapezoid_primitive_adjoint<S: Scalar>(values: &[S], dt: S) -> Vec<S> {
    let n = values.len();
    let mut out = vec![S::zero(); n];
    let half = dt / s(2.0);
    // suffix[l] = sum_{i > l} values[i]
    let mut suffix = S::zero();
    for l in (0..n).rev() {
        if l == 0 {
            out[l] = half * suffix;
        } else {
            out[l] = dt * suffix + half * values[l];
        }
        suffix += values[l];
    }
    out
}

/// Per-interval Filon coefficients A = ∫_0^h e^{iωτ}dτ and B = ∫_0^h τe^{iωτ}dτ.
///
/// Switches to a Taylor series in θ = ωh near zero where the closed forms
/// cancel catastrophically.
fn filon_ab<S: Scalar>(omega: S, h: S) -> (Complex<S>, Complex<S>) {
    let theta = omega * h;
    if theta.abs() < s(1e-3) {
        let it = Complex::new(S::zero(), theta);
        let mut term = Complex::new(S::one(), S::zero());
        let mut a = Complex::new(S::zero(), S::zero());
        let mut b = Complex::new(S::zero(), S::zero());
        // A = h Σ (iθ)^n/(n+1)!,  B = h² Σ (iθ)^n (n+1)/(n+2)!
        for n in 0..12u32 {
            let nf: S = s(n as f64);
            a += term / fact::<S>(n + 1);
            b += term * ((nf + S::one()) / fact(n + 2));
            term *= it;
        }
        (a * h, b * h * h)
    } else {
        let iw = Complex::new(S::zero(), omega);
        let e = Complex::new(S::zero(), theta).exp();
        let a = (e - Complex::new(S::one(), S::zero())) / iw;
        let b = (e * h - a) / iw;
        (a, b)
    }
}

fn fact<S: Scalar>(n: u32) -> S {
    let mut f = S::one();
    for i in 2..=n {
        f *= s(i as f64);
    }
    f
}

/// Filon-trapezoid moment ∫_0^T u(t)e^{iωt}dt of complex node samples.
///
/// On each interval the linear interpolant of `u` is integrated against
/// e^{iωt} in closed form, so the result is exact for piecewise-linear `u`
/// independent of ω.
pub fn filon_moment_complex<S: Scalar>(samples: &[Complex<S>], dt: S, omega: S) -> Complex<S> {
    let mut acc = Complex::new(S::zero(), S::zero());
    if samples.len() < 2 {
        return acc;
    }
    let (a, b) = filon_ab(omega, dt);
    let slope_w = b / dt;
    let left_w = a - slope_w;
    let rot = Complex::new(S::zero(), omega * dt).exp();
    let mut phase = Complex::new(S::one(), S::zero());
    for i in 0..samples.len() - 1 {
        acc += phase * (samples[i] * left_w + samples[i + 1] * slope_w);
        phase *= rot;
    }
    acc
}

/// Real-sample wrapper around [`filon_moment_complex`].
pub fn filon_moment<S: Scalar>(samples: &[S], dt: S, omega: S) -> Complex<S> {
    let mut acc = Complex::new(S::zero(), S::zero());
    if samples.len() < 2 {
        return acc;
    }
    let (a, b) = filon_ab(omega, dt);
    let slope_w = b / dt;
    let left_w = a - slope_w;
    let rot = Complex::new(S::zero(), omega * dt).exp();
    let mut phase = Complex::new(S::one(), S::zero());
    for i in 0..samples.len() - 1 {
        acc += phase * (left_w * samples[i] + slope_w * samples[i + 1]);
        phase *= rot;
    }
    acc
}

/// Cumulative Filon moments: output[i] = ∫_0^{t_i} u(τ)e^{iωτ}dτ.
pub fn filon_prefix_complex<S: Scalar>(
    samples: &[Complex<S>],
    dt: S,
    omega: S,
) -> Vec<Complex<S>> {
    let n = samples.len();
    let mut out = vec![Complex::new(S::zero(), S::zero()); n];
    if n < 2 {
        return out;
    }
    let (a, b) = filon_ab(omega, dt);
    let slope_w = b / dt;
    let left_w = a - slope_w;
    let rot = Complex::new(S::zero(), omega * dt).exp();
    let mut phase = Complex::new(S::one(), S::zero());
    for i in 1..n {
        out[i] = out[i - 1] + phase * (samples[i - 1] * left_w + samples[i] * slope_w);
        phase *= rot;
    }
    out
}

/// Node-weight vector of the Filon moment: moment = Σ_i weights[i]·u_i.
///
/// Used to express moment constraints as rows of the low-frequency Gram
/// system.
pub fn filon_weights<S: Scalar>(n_nodes: usize, dt: S, omega: S) -> Vec<Complex<S>> {
    let mut w = vec![Complex::new(S::zero(), S::zero()); n_nodes];
    if n_nodes < 2 {
        return w;
    }
    let (a, b) = filon_ab(omega, dt);
    let slope_w = b / dt;
    let left_w = a - slope_w;
    let rot = Complex::new(S::zero(), omega * dt).exp();
    let mut phase = Complex::new(S::one(), S::zero());
    for i in 0..n_nodes - 1 {
        w[i] += phase * left_w;
        w[i + 1] += phase * slope_w;
        phase *= rot;
    }
    w
}
