use serde::{Deserialize, Serialize};

/// Numerical tolerances and search parameters shared across the toolkit.
///
/// Stored as `f64` and converted to the working scalar at the point of use, so
/// one config value serves every instantiation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Relative tolerance on moment residuals for all solvers.
    pub tol: f64,
    /// Terminal boundary-condition tolerance (relative to a norm scale).
    pub bc_tol: f64,
    /// Admissible deviation of a sphere-flagged state from unit norm.
    pub sphere_tol: f64,
    /// Admissible relative imaginary part of quantities that must be real.
    pub real_tol: f64,
    /// Floor below which the dipole decay constant counts as a violation.
    pub decay_floor: f64,
    /// Maximum phase advance omega*dt accepted by the Filon moment.
    pub max_phase_per_step: f64,
    /// Maximum kick phase dt*||u||_inf*||M||_2 accepted by the propagator.
    pub kick_phase_max: f64,
    /// Neumann iteration aborts if the measured ratio stays above this.
    pub contraction_ceiling: f64,
    /// Iterations used to probe the contraction factor during cutoff search.
    pub probe_iters: usize,
    /// Hard cap on Neumann iterations.
    pub max_neumann_iters: usize,
    /// Condition-number ceiling for the low-frequency Gram system.
    pub gram_cond_max: f64,
    /// Initial high-frequency cutoff for the contraction search.
    pub n_start: usize,
    /// Largest iterated-primitive order served by `primitive`.
    pub max_primitive_order: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            bc_tol: 1e-8,
            sphere_tol: 1e-6,
            real_tol: 1e-9,
            decay_floor: 1e-12,
            max_phase_per_step: 1.5,
            kick_phase_max: 0.5,
            contraction_ceiling: 0.95,
            probe_iters: 3,
            max_neumann_iters: 200,
            gram_cond_max: 1e12,
            n_start: 12,
            max_primitive_order: 12,
        }
    }
}
