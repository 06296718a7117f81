//! Assembly of the retrieved pulses: slowly varying amplitudes from the
//! pulse-shape functions, detector-response convolution, and the retrieved
//! pulse energies.
//!
//! With total reading intensity `I_t = I_R + I_R'`, stored amplitude `A`, and
//! storage time `t_s`, the two detected amplitudes are
//!
//! ```text
//! fwm(t) = |Ω_R|  |A| e^{-γ t_s} / (I_t Γ) · [ f(t) I_R + g(t) I_R' ]
//! swm(t) = I_R |Ω_R'| |A| e^{-γ t_s} / (I_t Γ) · [ f(t) - g(t) ]
//! ```
//!
//! and the pulse energies are their squared moduli integrated over time.
//! Proportionality constants are fixed to one; comparisons with measured data
//! are made on normalized quantities.

use num_complex::Complex;

use crate::bloch::FgFunctions;
use crate::model::{ComplexTrace, LambdaParams, ReadoutDrive, RealTrace, StoredGrating};
use crate::{fl, Error, Real, Result};

/// A four-wave and a six-wave intensity trace on a common grid.
#[derive(Debug, Clone)]
pub struct PulsePair<T> {
    pub fwm: RealTrace<T>,
    pub swm: RealTrace<T>,
    /// Whether the traces went through the detector-response filter.
    pub convolved: bool,
    /// Response time used, if they did.
    pub tau: Option<T>,
}

impl<T: Real> PulsePair<T> {
    pub fn new(fwm: RealTrace<T>, swm: RealTrace<T>, tau: Option<T>) -> Result<Self> {
        if !fwm.same_grid(&swm) {
            return Err(Error::Domain("pulse traces must share one grid".into()));
        }
        if fwm
            .values
            .iter()
            .chain(swm.values.iter())
            .any(|v| *v < T::zero() || !v.is_finite())
        {
            return Err(Error::Domain(
                "pulse intensities must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            fwm,
            swm,
            convolved: tau.is_some(),
            tau,
        })
    }
}

/// Retrieved pulse energies with a quadrature error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyPair<T> {
    pub u_fwm: T,
    pub u_swm: T,
    /// Absolute error estimate of the trapezoid quadrature.
    pub quadrature_error: T,
}

fn check_intensity_match<T: Real>(fg: &FgFunctions<T>, drive: &ReadoutDrive<T>) -> Result<()> {
    if (fg.i_t - drive.i_t()).abs() > fl::<T>(1e-9) * T::one().max(fg.i_t) {
        return Err(Error::Domain(format!(
            "pulse-shape functions extracted at I_t = {} but drive totals {}",
            fg.i_t,
            drive.i_t()
        )));
    }
    Ok(())
}

/// Common prefactor `|A| e^{-γ t_s} / (I_t Γ)`.
fn grating_prefactor<T: Real>(
    grating: &StoredGrating<T>,
    params: &LambdaParams<T>,
    i_t: T,
) -> Result<T> {
    grating.validate()?;
    params.validate()?;
    let decay = (-params.gamma_g * grating.t_s).exp();
    Ok(grating.amplitude.norm() * decay / (i_t * params.gamma_e))
}

/// Slowly varying amplitude of the retrieved four-wave pulse.
pub fn fwm_coherence<T: Real>(
    fg: &FgFunctions<T>,
    drive: &ReadoutDrive<T>,
    grating: &StoredGrating<T>,
    params: &LambdaParams<T>,
) -> Result<ComplexTrace<T>> {
    check_intensity_match(fg, drive)?;
    let pref = grating_prefactor(grating, params, fg.i_t)? * drive.omega_r();
    let values = fg
        .f
        .values
        .iter()
        .zip(fg.g.values.iter())
        .map(|(f, g)| (*f * drive.i_r + *g * drive.i_rp) * pref)
        .collect();
    ComplexTrace::new(fg.f.t0, fg.f.dt, values)
}

/// Slowly varying amplitude of the retrieved six-wave pulse.
pub fn swm_coherence<T: Real>(
    fg: &FgFunctions<T>,
    drive: &ReadoutDrive<T>,
    grating: &StoredGrating<T>,
    params: &LambdaParams<T>,
) -> Result<ComplexTrace<T>> {
    check_intensity_match(fg, drive)?;
    let pref = grating_prefactor(grating, params, fg.i_t)? * drive.i_r * drive.omega_rp();
    let values = fg
        .f
        .values
        .iter()
        .zip(fg.g.values.iter())
        .map(|(f, g)| (*f - *g) * pref)
        .collect();
    ComplexTrace::new(fg.f.t0, fg.f.dt, values)
}

/// Pointwise squared modulus of a coherence trace.
pub fn pulse_intensity<T: Real>(coh: &ComplexTrace<T>) -> RealTrace<T> {
    coh.intensity()
}

/// Causal single-pole detector response `h(t) = (1/τ) e^{-t/τ}`, discretized
/// with exactly unit DC gain. `tau = 0` returns the input unchanged.
pub fn detector_convolve<T: Real>(intensity: &RealTrace<T>, tau: T) -> Result<RealTrace<T>> {
    if tau < T::zero() {
        return Err(Error::Domain("detector response time must be >= 0".into()));
    }
    if tau == T::zero() {
        return Ok(intensity.clone());
    }
    let alpha = (-intensity.dt / tau).exp();
    let gain = T::one() - alpha;
    let mut out = Vec::with_capacity(intensity.len());
    let mut y = T::zero();
    for (i, x) in intensity.values.iter().enumerate() {
        y = if i == 0 { gain * *x } else { alpha * y + gain * *x };
        out.push(y);
    }
    RealTrace::new(intensity.t0, intensity.dt, out)
}

/// Trapezoid integral over the whole trace.
pub(crate) fn trapezoid<T: Real>(trace: &RealTrace<T>) -> T {
    let half = fl::<T>(0.5);
    let mut acc = T::zero();
    for w in trace.values.windows(2) {
        acc += (w[0] + w[1]) * half;
    }
    acc * trace.dt
}

/// Curvature-based absolute error estimate for the trapezoid rule.
fn trapezoid_error<T: Real>(trace: &RealTrace<T>) -> T {
    let mut acc = T::zero();
    for w in trace.values.windows(3) {
        acc += (w[2] - fl::<T>(2.0) * w[1] + w[0]).abs();
    }
    acc * trace.dt / fl(12.0)
}

/// Check that the integrand has genuinely rung down inside the grid: it must
/// stay below `1e-8` of its running peak for 100 consecutive samples. A trace
/// that never does and still ends above `1e-4` of its peak has been truncated
/// too early.
fn check_converged<T: Real>(trace: &RealTrace<T>, label: &str) -> Result<()> {
    let floor = fl::<T>(1e-8);
    let mut peak = T::zero();
    let mut run = 0usize;
    let mut converged = false;
    for v in trace.values.iter() {
        peak = peak.max(*v);
        if *v <= floor * peak {
            run += 1;
            if run >= 100 {
                converged = true;
            }
        } else {
            run = 0;
        }
    }
    if peak == T::zero() {
        return Ok(());
    }
    if !converged {
        let tail = *trace.values.last().unwrap();
        if tail > fl::<T>(1e-4) * peak {
            return Err(Error::NonConverged(format!(
                "{label} integrand still at {:e} of peak at the end of the grid",
                (tail / peak).to_f64().unwrap_or(f64::NAN)
            )));
        }
    }
    Ok(())
}

/// Retrieved energies of both pulses by trapezoid quadrature of the squared
/// amplitudes, including the `e^{-2 γ t_s} |A|²` storage factor.
pub fn retrieved_energies<T: Real>(
    fg: &FgFunctions<T>,
    drive: &ReadoutDrive<T>,
    grating: &StoredGrating<T>,
    params: &LambdaParams<T>,
) -> Result<EnergyPair<T>> {
    let fwm = pulse_intensity(&fwm_coherence(fg, drive, grating, params)?);
    let swm = pulse_intensity(&swm_coherence(fg, drive, grating, params)?);
    check_converged(&fwm, "four-wave")?;
    check_converged(&swm, "six-wave")?;
    Ok(EnergyPair {
        u_fwm: trapezoid(&fwm),
        u_swm: trapezoid(&swm),
        quadrature_error: trapezoid_error(&fwm).max(trapezoid_error(&swm)),
    })
}

/// Relative L2 distance between two complex traces after aligning one global
/// phase (the overall phase of a retrieved amplitude is set by convention,
/// not by the dynamics).
pub fn phase_aligned_relative_l2<T: Real>(
    a: &ComplexTrace<T>,
    b: &ComplexTrace<T>,
) -> Result<T> {
    if !a.same_grid(b) {
        return Err(Error::Domain("traces must share one grid".into()));
    }
    let mut overlap = Complex::new(T::zero(), T::zero());
    let mut norm_b = T::zero();
    for (x, y) in a.values.iter().zip(b.values.iter()) {
        overlap = overlap + *x * y.conj();
        norm_b += y.norm_sqr();
    }
    if norm_b == T::zero() {
        return Err(Error::Domain("reference trace is identically zero".into()));
    }
    let u = if overlap.norm() > T::zero() {
        (overlap / overlap.norm()).conj()
    } else {
        Complex::new(T::one(), T::zero())
    };
    let mut num = T::zero();
    for (x, y) in a.values.iter().zip(b.values.iter()) {
        num += (*x * u - *y).norm_sqr();
    }
    Ok((num / norm_b).sqrt())
}
