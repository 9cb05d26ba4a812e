//! Real control signals on a uniform time grid.
//!
//! A signal is canonically represented by the samples of its k-th derivative
//! ("core"), so membership in H^k_0 at the left endpoint holds exactly by
//! construction: u is rebuilt as the k-fold trapezoid primitive of the core.
//! The module also houses iterated primitives, positive/negative Sobolev
//! norms, Filon oscillatory moments, and the compactly supported bump χ.

use num_complex::Complex;

use crate::config::Tolerances;
use crate::error::Error;
use crate::jet::Jet;
use crate::quad::{filon_moment, trapezoid, trapezoid_primitive};
use crate::{s, Result, Scalar};

/// Uniform grid 0 = t_0 < … < t_{n_steps} = T.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid<S> {
    t_final: S,
    n_steps: usize,
}

impl<S: Scalar> TimeGrid<S> {
    pub fn new(t_final: S, n_steps: usize) -> Self {
        assert!(t_final > S::zero() && n_steps >= 2);
        Self { t_final, n_steps }
    }

    pub fn t_final(&self) -> S {
        self.t_final
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of nodes, n_steps + 1.
    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn dt(&self) -> S {
        self.t_final / s(self.n_steps as f64)
    }

    pub fn node(&self, i: usize) -> S {
        self.t_final * s::<S>(i as f64) / s(self.n_steps as f64)
    }

    pub fn nodes(&self) -> Vec<S> {
        (0..self.n_nodes()).map(|i| self.node(i)).collect()
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch {
                detail: format!(
                    "T = {:?} vs {:?}, n_steps = {} vs {}",
                    self.t_final.to_f64(),
                    other.t_final.to_f64(),
                    self.n_steps,
                    other.n_steps
                ),
            });
        }
        Ok(())
    }
}

/// Real control signal with exact left boundary conditions u^{(m)}(0) = 0
/// for m < k.
#[derive(Debug, Clone)]
pub struct ControlSignal<S> {
    grid: TimeGrid<S>,
    k: usize,
    /// Samples of w := u^{(k)}.
    core: Vec<S>,
    /// Samples of u, the k-fold primitive of `core`.
    values: Vec<S>,
}

impl<S: Scalar> ControlSignal<S> {
    /// Build from the k-th derivative core; u is its k-fold primitive.
    pub fn from_core(grid: TimeGrid<S>, k: usize, core: Vec<S>) -> Self {
        assert_eq!(core.len(), grid.n_nodes());
        let dt = grid.dt();
        let mut values = core.clone();
        for _ in 0..k {
            values = trapezoid_primitive(&values, dt);
        }
        Self {
            grid,
            k,
            core,
            values,
        }
    }

    /// Build from analytically known samples of both u and u^{(k)}.
    ///
    /// Used when a closed-form construction (e.g. bump-modulated exponential
    /// sums) provides exact derivatives, bypassing the trapezoid primitive
    /// error. The caller guarantees consistency of the pair.
    pub fn from_core_and_values(grid: TimeGrid<S>, k: usize, core: Vec<S>, values: Vec<S>) -> Self {
        assert_eq!(core.len(), grid.n_nodes());
        assert_eq!(values.len(), grid.n_nodes());
        Self {
            grid,
            k,
            core,
            values,
        }
    }

    /// Plain sample-level signal: k = 0, core = values.
    pub fn from_samples(grid: TimeGrid<S>, values: Vec<S>) -> Self {
        assert_eq!(values.len(), grid.n_nodes());
        Self {
            grid,
            k: 0,
            core: values.clone(),
            values,
        }
    }

    pub fn zero(grid: TimeGrid<S>, k: usize) -> Self {
        let n = grid.n_nodes();
        Self {
            grid,
            k,
            core: vec![S::zero(); n],
            values: vec![S::zero(); n],
        }
    }

    pub fn grid(&self) -> &TimeGrid<S> {
        &self.grid
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn core(&self) -> &[S] {
        &self.core
    }

    /// Reuse the same core at a lower declared regularity: the new signal's
    /// value samples are the k_new-fold primitive of the core, i.e. the
    /// (k − k_new)-th derivative of u.
    pub fn reinterpret(&self, k_new: usize) -> Result<Self> {
        if k_new > self.k {
            return Err(Error::OrderOutOfRange {
                m: k_new as i64,
                min: 0,
                max: self.k as i64,
            });
        }
        Ok(Self::from_core(self.grid, k_new, self.core.clone()))
    }

    /// Samples of u^{(m)} for 0 ≤ m ≤ k, reconstructed from the core.
    pub fn derivative_samples(&self, m: usize) -> Result<Vec<S>> {
        if m > self.k {
            return Err(Error::OrderOutOfRange {
                m: m as i64,
                min: -(self.k as i64 + 1),
                max: self.k as i64,
            });
        }
        let dt = self.grid.dt();
        let mut v = self.core.clone();
        for _ in 0..(self.k - m) {
            v = trapezoid_primitive(&v, dt);
        }
        Ok(v)
    }

    /// Samples of the iterated primitive u_n (u_0 = u, u_{n+1} = ∫ u_n).
    pub fn primitive(&self, n: usize, cfg: &Tolerances) -> Result<Vec<S>> {
        if n > cfg.max_primitive_order {
            return Err(Error::OrderOutOfRange {
                m: n as i64,
                min: 0,
                max: cfg.max_primitive_order as i64,
            });
        }
        let dt = self.grid.dt();
        let mut v = self.values.clone();
        for _ in 0..n {
            v = trapezoid_primitive(&v, dt);
        }
        Ok(v)
    }

    /// Sobolev norm on the scale carried by the representation:
    /// m ≥ 0 → ‖u^{(m)}‖_{L²}; m < 0 → |u_1(T)| + ‖u_{|m|}‖_{L²}.
    pub fn sobolev_norm(&self, m: i64, cfg: &Tolerances) -> Result<S> {
        if m > self.k as i64 || m < -(self.k as i64 + 1) {
            return Err(Error::OrderOutOfRange {
                m,
                min: -(self.k as i64 + 1),
                max: self.k as i64,
            });
        }
        let dt = self.grid.dt();
        if m >= 0 {
            let v = self.derivative_samples(m as usize)?;
            let sq: Vec<S> = v.iter().map(|&x| x * x).collect();
            Ok(trapezoid(&sq, dt).sqrt())
        } else {
            let u1 = self.primitive(1, cfg)?;
            let un = self.primitive((-m) as usize, cfg)?;
            let sq: Vec<S> = un.iter().map(|&x| x * x).collect();
            Ok(u1[u1.len() - 1].abs() + trapezoid(&sq, dt).sqrt())
        }
    }

    pub fn l2_norm(&self) -> S {
        let sq: Vec<S> = self.values.iter().map(|&x| x * x).collect();
        trapezoid(&sq, self.grid.dt()).sqrt()
    }

    pub fn max_abs(&self) -> S {
        self.values
            .iter()
            .fold(S::zero(), |acc, &x| acc.max(x.abs()))
    }

    /// ∫_0^T u(t) e^{iωt} dt by Filon-trapezoid.
    pub fn oscillatory_moment(&self, omega: S, cfg: &Tolerances) -> Result<Complex<S>> {
        let phase = omega.abs() * self.grid.dt();
        if phase > s(cfg.max_phase_per_step) {
            return Err(Error::PhaseResolutionExceeded {
                phase: phase.to_f64().unwrap_or(f64::NAN),
                max: cfg.max_phase_per_step,
            });
        }
        Ok(filon_moment(&self.values, self.grid.dt(), omega))
    }

    /// True iff the terminal boundary conditions |u^{(m)}(T)| ≤
    /// bc_tol·‖u^{(m)}‖_∞ hold for all m < k (the left ones hold exactly).
    pub fn h_k0_flag(&self, cfg: &Tolerances) -> bool {
        for m in 0..self.k {
            let v = self.derivative_samples(m).expect("m <= k");
            let sup = v.iter().fold(S::zero(), |acc, &x| acc.max(x.abs()));
            if v[v.len() - 1].abs() > s::<S>(cfg.bc_tol) * sup {
                return false;
            }
        }
        true
    }

    /// Pointwise sum; grids and regularity orders must match.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        if self.k != other.k {
            return Err(Error::OrderOutOfRange {
                m: other.k as i64,
                min: self.k as i64,
                max: self.k as i64,
            });
        }
        Ok(Self {
            grid: self.grid,
            k: self.k,
            core: self
                .core
                .iter()
                .zip(&other.core)
                .map(|(&a, &b)| a + b)
                .collect(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| a + b)
                .collect(),
        })
    }

    pub fn scale(&self, a: S) -> Self {
        Self {
            grid: self.grid,
            k: self.k,
            core: self.core.iter().map(|&x| x * a).collect(),
            values: self.values.iter().map(|&x| x * a).collect(),
        }
    }
}

/// Smooth compactly supported bump χ(t) = κ·exp(−1/(1−s²)),
/// s = (2t − T)/(T − 2·margin), vanishing outside (margin, T − margin).
///
/// κ is fixed so that ∫_0^T χ = T, making the diagonal moment identity of the
/// modulated family ξ̃_j = (1/T)e^{−iω_j t}χ exactly 1.
#[derive(Debug, Clone)]
pub struct BumpChi<S> {
    grid: TimeGrid<S>,
    margin: S,
    samples: Vec<S>,
    amplitude: S,
}

impl<S: Scalar> BumpChi<S> {
    pub fn new(grid: TimeGrid<S>, margin: S) -> Result<Self> {
        let t = grid.t_final();
        let half = t / s(2.0);
        if margin <= S::zero() || margin >= half {
            return Err(Error::BadMargin {
                margin: margin.to_f64().unwrap_or(f64::NAN),
                half_horizon: half.to_f64().unwrap_or(f64::NAN),
            });
        }
        let raw: Vec<S> = grid
            .nodes()
            .iter()
            .map(|&ti| Self::raw_profile(ti, t, margin))
            .collect();
        let integral = trapezoid(&raw, grid.dt());
        let amplitude = t / integral;
        let samples = raw.iter().map(|&x| x * amplitude).collect();
        Ok(Self {
            grid,
            margin,
            samples,
            amplitude,
        })
    }

    /// Default margin T/8.
    pub fn with_default_margin(grid: TimeGrid<S>) -> Result<Self> {
        let margin = grid.t_final() / s(8.0);
        Self::new(grid, margin)
    }

    fn raw_profile(t: S, t_final: S, margin: S) -> S {
        let sv = (s::<S>(2.0) * t - t_final) / (t_final - s::<S>(2.0) * margin);
        let g = S::one() - sv * sv;
        // The exponential underflows far before g reaches zero; the cutoff
        // keeps intermediate 1/g finite.
        if g <= s(1.5e-3) {
            S::zero()
        } else {
            (-S::one() / g).exp()
        }
    }

    pub fn grid(&self) -> &TimeGrid<S> {
        &self.grid
    }

    pub fn margin(&self) -> S {
        self.margin
    }

    /// Normalized samples at the grid nodes.
    pub fn samples(&self) -> &[S] {
        &self.samples
    }

    /// χ at an arbitrary time.
    pub fn value(&self, t: S) -> S {
        self.amplitude * Self::raw_profile(t, self.grid.t_final(), self.margin)
    }

    /// Taylor jet of χ at grid node `i`, up to `order` derivatives.
    pub fn jet(&self, i: usize, order: usize) -> Jet<S> {
        let t = self.grid.node(i);
        let t_final = self.grid.t_final();
        let denom = t_final - s::<S>(2.0) * self.margin;
        let sv = (s::<S>(2.0) * t - t_final) / denom;
        let g0 = S::one() - sv * sv;
        if g0 <= s(1.5e-3) {
            return Jet::constant(S::zero(), order);
        }
        let tj = Jet::variable(t, order);
        let sj = tj
            .scale(s::<S>(2.0) / denom)
            .add(&Jet::constant(-t_final / denom, order));
        let g = Jet::constant(S::one(), order).add(&sj.mul(&sj).scale(-S::one()));
        g.recip().scale(-S::one()).exp().scale(self.amplitude)
    }

    /// (1/T)·∫_0^T χ(t) e^{iωt} dt — the cross-moment kernel C(ω) of the
    /// modulated family.
    pub fn cross_moment(&self, omega: S) -> Complex<S> {
        filon_moment(&self.samples, self.grid.dt(), omega) / self.grid.t_final()
    }
}
