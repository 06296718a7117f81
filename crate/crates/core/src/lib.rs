//! Simulation and analysis toolkit for the delayed retrieval of a stored
//! ground-state coherence grating in an ensemble of three-level Λ atoms.
//!
//! Two writing beams prepare a spatially periodic Zeeman ground-state
//! coherence. After a dark storage interval, a pair of resonant reading beams
//! Bragg-diffracts off the stored grating and the retrieved light separates
//! into a four-wave-mixing pulse and a weaker, delayed six-wave-mixing pulse
//! on the two orthogonal polarization channels of the Λ system.
//!
//! The crate is organized along the stages of that experiment:
//!
//! * [`model`] — parameter, state, and trace types shared by everything else.
//! * [`bloch`] — the resonant three-level master-equation integrator, the
//!   writing-stage dark state, phase-component extraction, and the
//!   reconstruction of the two pulse-shape functions.
//! * [`signals`] — assembly of retrieved pulse amplitudes, detector-response
//!   convolution, and retrieved-energy integrals.
//! * [`phasematch`] — wavevector algebra over the beam geometry.
//! * [`sweep`] — experiment drivers: intensity-split sweeps, pulse-shape
//!   computation, storage-time scans, and low-intensity scaling probes.
//! * [`fit`] — nonlinear least-squares estimation of model parameters from a
//!   measured pulse trace.
//!
//! All internal quantities are expressed in units where the excited-state
//! decay rate is 1 (times in units of its inverse); intensities are quoted in
//! units of the saturation intensity.

use std::fmt;

pub mod bloch;
pub mod fit;
pub mod model;
pub mod phasematch;
pub mod signals;
pub mod sweep;

/// Scalar type for all core math: `f32` or `f64`.
pub trait Real:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::FromPrimitive
    + num_traits::NumAssignOps
    + std::iter::Sum<Self>
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + 'static
{
}

impl<T> Real for T where
    T: num_traits::Float
        + num_traits::FloatConst
        + num_traits::FromPrimitive
        + num_traits::NumAssignOps
        + std::iter::Sum<T>
        + fmt::Debug
        + fmt::Display
        + Send
        + Sync
        + 'static
{
}

/// Convert an `f64` literal into the working scalar type.
pub(crate) fn fl<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal conversion")
}

/// Errors produced by the core operations.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Input outside the physical domain (negative rate, intensity, time, …).
    Domain(String),
    /// A density matrix failed its validity checks.
    State(String),
    /// Integration step too large for the requested rates.
    StepSize { dt: f64, limit: f64 },
    /// The linear system of the pulse-shape inversion is ill-conditioned.
    Conditioning { det: f64 },
    /// The phase-component table failed its reconstruction self-check.
    Aliasing { residual: f64, tol: f64 },
    /// A quadrature or iteration did not converge.
    NonConverged(String),
    /// A fit problem is degenerate.
    IllPosed(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::State(msg) => write!(f, "invalid state: {msg}"),
            Error::StepSize { dt, limit } => {
                write!(f, "step size {dt} exceeds stability limit {limit}")
            }
            Error::Conditioning { det } => {
                write!(f, "ill-conditioned split system (det = {det})")
            }
            Error::Aliasing { residual, tol } => write!(
                f,
                "phase-component reconstruction residual {residual} exceeds {tol}"
            ),
            Error::NonConverged(msg) => write!(f, "did not converge: {msg}"),
            Error::IllPosed(msg) => write!(f, "ill-posed problem: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<V> = std::result::Result<V, Error>;

// Concrete aliases for the common double-precision instantiation.
pub type C64 = num_complex::Complex<f64>;
pub type LambdaParams64 = model::LambdaParams<f64>;
pub type ReadoutDrive64 = model::ReadoutDrive<f64>;
pub type StoredGrating64 = model::StoredGrating<f64>;
pub type DensityMatrix64 = model::DensityMatrix3<f64>;
pub type ComplexTrace64 = model::ComplexTrace<f64>;
pub type RealTrace64 = model::RealTrace<f64>;
pub type TimeGrid64 = model::TimeGrid<f64>;
pub type FgFunctions64 = bloch::FgFunctions<f64>;
