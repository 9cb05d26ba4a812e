//! Spectral toolkit for bilinear Schrödinger control on (0,1).
//!
//! Everything lives on the truncated eigenbasis of the Dirichlet Laplacian:
//! states are modal coefficient vectors, controls are real signals on a
//! uniform time grid, and the linearized control problem is a trigonometric
//! moment problem on the transition-frequency ladder. The crate provides
//!
//! * [`spectral`] — eigenbasis, modal states, Sobolev-scale norms, projections,
//!   and the dipole-moment operator,
//! * [`signal`] — control signals with exact-by-construction `H^k_0` membership,
//!   iterated primitives, and Filon oscillatory moments,
//! * [`moment`] — moment-problem solvers (Neumann high-frequency inverse,
//!   minimum-norm low-frequency Gram solve, and their combination with
//!   simultaneous Sobolev estimates),
//! * [`sim`] — split-step Galerkin propagation, the explicit linearized flow,
//!   and the projected end-point map,
//! * [`synthesis`] — linearized control synthesis and the nonlinear
//!   fixed-point loop for local control in projection.
//!
//! Core math is generic over the scalar type through [`Scalar`]; the type
//! aliases below pin the default `f64` instantiation.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

pub mod config;
pub mod error;
pub mod io;
pub mod jet;
pub mod moment;
pub mod quad;
pub mod signal;
pub mod sim;
pub mod spectral;
pub mod synthesis;
pub mod verify;

pub use config::Tolerances;
pub use error::Error;

/// Scalar type the toolkit is generic over. Implemented by `f32` and `f64`.
pub trait Scalar:
    RealField + FromPrimitive + ToPrimitive + Copy + Default + std::iter::Sum
{
}

impl<T> Scalar for T where
    T: RealField + FromPrimitive + ToPrimitive + Copy + Default + std::iter::Sum
{
}

/// Shorthand conversion from an `f64` literal into the working scalar type.
#[inline]
pub fn s<S: Scalar>(x: f64) -> S {
    S::from_f64(x).expect("f64 -> scalar conversion")
}

/// Modulus of a complex number over the generic scalar.
///
/// `Complex::norm` requires `num_traits::Float`, which the [`Scalar`] bound
/// deliberately omits; this helper covers the generic code paths.
#[inline]
pub fn cmod<S: Scalar>(z: num_complex::Complex<S>) -> S {
    (z.re * z.re + z.im * z.im).sqrt()
}

/// Default scalar used by the CLI and the concrete aliases.
pub type Real = f64;

pub type Basis = spectral::EigenBasis<Real>;
pub type State = spectral::ModalState<Real>;
pub type Dipole = spectral::DipoleOperator<Real>;
pub type Signal = signal::ControlSignal<Real>;
pub type Bump = signal::BumpChi<Real>;
pub type Grid = signal::TimeGrid<Real>;
pub type Ladder = moment::FrequencyLadder<Real>;
pub type Moments = moment::MomentVector<Real>;
pub type Scene = sim::Scenario<Real>;

pub type Result<T> = std::result::Result<T, Error>;
