//! Pulse-design toolkit for selective and robust SO(3) rotations of
//! spin-1/2 ensembles with offset inhomogeneity.
//!
//! The crate is organized around five building blocks:
//!
//! * [`so3`] — exact SO(3)/quaternion algebra (generators, closed-form
//!   exponentials, composition, Frobenius fidelity);
//! * [`propagation`] — exact propagation of piecewise-constant controls
//!   across offsets, fidelity profiles and ensemble costs;
//! * [`pmp`] — the Hamiltonian-lift (adjoint) dynamics of the two-offset
//!   time-optimal problem: bang durations, singular-arc detection and the
//!   regular/singular exclusion checks;
//! * [`design`] — closed-form pulse designers (selective singular pulses,
//!   robust one/two-switch bang families, locally robust pairs);
//! * [`grape`] — a gradient-descent optimizer of the ensemble cost over
//!   bounded piecewise-constant fields, with landscape sweeps.

pub mod design;
pub mod error;
pub mod grape;
pub mod pmp;
pub mod propagation;
pub mod so3;

pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;
