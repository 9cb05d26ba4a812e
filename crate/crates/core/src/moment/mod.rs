//! Trigonometric moment problems on the transition-frequency ladder, with
//! polynomial side constraints and simultaneous Sobolev estimates.

mod combined;
mod highfreq;
mod lowfreq;

pub use combined::{choose_cutoff, combined_solver, weak_estimate_solver};
pub use highfreq::{contraction_probe, neumann_inverse, op_ln, op_pn};
pub use lowfreq::{low_freq_solver, solve_constrained, MomentConstraint};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::Error;
use crate::{s, Result, Scalar};

/// Gap certificate ω_{j+1} − ω_j ≥ c·j^ε for j ≥ n0.
#[derive(Debug, Clone, Copy)]
pub struct GapInfo<S> {
    pub c: S,
    pub eps: S,
    pub n0: usize,
}

/// Increasing frequencies ω_0 = 0 < ω_1 < … with a polynomial gap.
#[derive(Debug, Clone)]
pub struct FrequencyLadder<S> {
    omega: Vec<S>,
    gap: GapInfo<S>,
}

impl<S: Scalar> FrequencyLadder<S> {
    /// The Schrödinger ladder ω_j = λ_{j+1} − λ₁ = ((j+1)² − 1)π²,
    /// 0 ≤ j ≤ len−1, whose gap is ω_{j+1} − ω_j = (2j+3)π².
    pub fn schrodinger(len: usize) -> Self {
        assert!(len >= 1);
        let pi2 = S::pi() * S::pi();
        let omega = (0..len)
            .map(|j| s::<S>(((j + 1) * (j + 1) - 1) as f64) * pi2)
            .collect();
        Self {
            omega,
            gap: GapInfo {
                c: s::<S>(2.0) * pi2,
                eps: S::one(),
                n0: 1,
            },
        }
    }

    pub fn from_frequencies(omega: Vec<S>, gap: GapInfo<S>) -> Self {
        assert!(!omega.is_empty() && omega[0] == S::zero());
        assert!(omega.windows(2).all(|w| w[0] < w[1]));
        Self { omega, gap }
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn omega(&self, j: usize) -> S {
        self.omega[j]
    }

    pub fn omegas(&self) -> &[S] {
        &self.omega
    }

    pub fn gap(&self) -> &GapInfo<S> {
        &self.gap
    }
}

/// Complex moment targets d_j on the ladder (d_0 real) plus polynomial-moment
/// targets d_{−q} = ∫ t^q u dt, q = 1..poly.len().
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector<S> {
    pub d: Vec<Complex<S>>,
    pub poly: Vec<S>,
}

impl<S: Scalar> MomentVector<S> {
    pub fn new(d: Vec<Complex<S>>, poly: Vec<S>) -> Self {
        Self { d, poly }
    }

    pub fn zero(len: usize) -> Self {
        Self {
            d: vec![Complex::new(S::zero(), S::zero()); len],
            poly: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    /// Check the realness invariant on d_0.
    pub fn validate(&self, cfg: &Tolerances) -> Result<()> {
        let d0 = self.d[0];
        if d0.im.abs() > s::<S>(cfg.real_tol) * d0.re.abs() {
            return Err(Error::ComplexZeroMoment {
                imag: d0.im.abs().to_f64().unwrap_or(f64::NAN),
                tol: cfg.real_tol,
            });
        }
        Ok(())
    }

    /// Weighted sequence norm (Σ_j |(δ_{j,0} + ω_j^m) d_j|²)^{1/2}: weight 1
    /// at j = 0, ω_j^m for j ≥ 1.
    pub fn h2m_norm(&self, m: i64, ladder: &FrequencyLadder<S>) -> S {
        let mut acc = self.d[0].norm_sqr();
        for j in 1..self.d.len().min(ladder.len()) {
            let w = ladder.omega(j).powi(m as i32);
            acc += w * w * self.d[j].norm_sqr();
        }
        acc.sqrt()
    }

    /// Plain h⁰ norm of the trigonometric part.
    pub fn h0_norm(&self) -> S {
        self.d
            .iter()
            .map(|z| z.norm_sqr())
            .fold(S::zero(), |a, b| a + b)
            .sqrt()
    }
}

/// Diagnostics attached to every solver output.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SolverReport {
    /// |achieved − target| per ladder index, measured with the same discrete
    /// moment operator the solver inverted.
    pub residuals: Vec<f64>,
    /// |achieved − target| per polynomial-moment index.
    pub poly_residuals: Vec<f64>,
    /// Achieved ‖u‖_{H^m_0} per reported order m.
    pub norms: Vec<(i64, f64)>,
    /// Terminal iterated-primitive values u_2(T) … u_{k+1}(T).
    pub boundary_values: Vec<f64>,
    /// Neumann iterations spent in the high-frequency branch.
    pub neumann_iters: usize,
    /// Measured contraction factor of the Neumann iteration, if it ran.
    pub contraction: Option<f64>,
    /// High-frequency cutoff N used.
    pub cutoff: Option<usize>,
    /// Condition number of the low-frequency Gram system, if it ran.
    pub gram_cond: Option<f64>,
}

impl SolverReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals
            .iter()
            .chain(&self.poly_residuals)
            .fold(0.0f64, |a, &b| a.max(b))
    }
}
