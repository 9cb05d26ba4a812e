use thiserror::Error;

/// Error type shared by every module of the toolkit.
///
/// Numerical payloads are reported as `f64` regardless of the working scalar
/// so that error values stay printable and comparable across instantiations.
#[derive(Debug, Error)]
pub enum Error {
    /// The dipole coefficients b_j decay too fast on the requested mode set:
    /// min_{j in J} j^{2p+3} |b_j| fell to or below the configured floor.
    #[error("dipole decay hypothesis fails: min j^{{2p+3}}|b_j| = {min_product:.3e} <= floor {floor:.3e} (worst mode j = {worst_j})")]
    DecayViolation {
        min_product: f64,
        floor: f64,
        worst_j: usize,
    },

    /// A state required to lie on the unit sphere does not.
    #[error("state is off the unit sphere: | ||psi|| - 1 | = {deviation:.3e} > {tol:.3e}")]
    NotOnSphere { deviation: f64, tol: f64 },

    /// Data that must be tangential (Re<xi, psi> = 0) is not.
    #[error("tangency violated: |Re<xi, psi>| = {defect:.3e} > {tol:.3e}")]
    TangencyViolation { defect: f64, tol: f64 },

    /// A state that must be supported on the projection set J has mass off J.
    #[error("state has mass off the projection set: ||(I-P_J) psi|| = {off_mass:.3e} > {tol:.3e}")]
    SupportViolation { off_mass: f64, tol: f64 },

    /// Requested Sobolev order is outside what the signal representation carries.
    #[error("Sobolev order m = {m} out of range [{min}, {max}] for this signal")]
    OrderOutOfRange { m: i64, min: i64, max: i64 },

    /// An oscillatory moment was requested at a frequency the grid cannot resolve.
    #[error("oscillatory phase per step omega*dt = {phase:.3e} exceeds {max:.3e}")]
    PhaseResolutionExceeded { phase: f64, max: f64 },

    /// Bump margin outside (0, T/2).
    #[error("bump margin {margin:.3e} not in (0, {half_horizon:.3e})")]
    BadMargin { margin: f64, half_horizon: f64 },

    /// Moment data handed to a high-frequency operator has entries below the cutoff.
    #[error("moment entry at index {index} lies below the high-frequency cutoff N = {cutoff}")]
    UnsupportedIndexRange { index: usize, cutoff: usize },

    /// The Neumann iteration does not contract at the current cutoff.
    #[error("no contraction: measured rho = {rho:.3} >= ceiling {ceiling:.3} at cutoff N = {cutoff}; increase N or j_max")]
    NoContraction { rho: f64, ceiling: f64, cutoff: usize },

    /// The low-frequency constraint Gram matrix is numerically singular.
    #[error("Gram system ill-conditioned: cond = {cond:.3e} > {max:.3e}; reduce zero_upto or refine the grid")]
    SingularGram { cond: f64, max: f64 },

    /// The time step cannot resolve the control kick.
    #[error("time grid too coarse: kick phase dt*||u||_inf*||M||_2 = {phase:.3e} > {max:.3e}")]
    GridTooCoarse { phase: f64, max: f64 },

    /// The fixed-point synthesis ran out of iterations.
    #[error("no convergence after {iters} iterations: residual {residual:.3e} > tol {tol:.3e}; consider shrinking delta")]
    NoConvergence {
        iters: usize,
        residual: f64,
        tol: f64,
        history: Vec<f64>,
    },

    /// The coupling profile violates the odd-derivative boundary hypothesis.
    #[error("mu^{{({order})}} at boundary is {value:.3e}, expected 0 (odd-derivative hypothesis up to order 2p+1)")]
    MuBoundaryCondition { order: usize, value: f64 },

    /// Dimension mismatch between cooperating objects.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// Mismatched time grids between combined signals.
    #[error("incompatible time grids: {detail}")]
    GridMismatch { detail: String },

    /// A moment vector whose j = 0 entry must be real is not.
    #[error("d_0 must be real: |Im d_0| = {imag:.3e} exceeds {tol:.3e}")]
    ComplexZeroMoment { imag: f64, tol: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed external data (CSV / sidecar).
    #[error("parse error: {0}")]
    Parse(String),
}
