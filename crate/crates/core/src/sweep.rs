//! Experiment drivers: intensity-split energy sweeps, pulse-shape
//! computation with detector convolution, storage-time scans, and
//! low-intensity scaling probes.

use crate::bloch::{extract_fg, extract_phase_components, FgFunctions, SimOptions};
use crate::model::{LambdaParams, ReadoutDrive, StoredGrating, TimeGrid};
use crate::signals::{
    detector_convolve, fwm_coherence, pulse_intensity, retrieved_energies, swm_coherence,
    PulsePair,
};
use crate::{fl, Error, Real, Result};

/// One row of a sweep: control value, both energies, and the energies
/// normalized by the sweep maximum of the four-wave energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow<T> {
    pub control: T,
    pub u_fwm: T,
    pub u_swm: T,
    pub u_fwm_norm: T,
    pub u_swm_norm: T,
}

/// Sweep results keyed by one control variable.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable<T> {
    /// Name of the swept variable (used as the output column header).
    pub control_name: &'static str,
    pub rows: Vec<SweepRow<T>>,
    /// Largest four-wave energy over the sweep; the normalizer.
    pub u_max: T,
}

impl<T: Real> SweepTable<T> {
    fn build(control_name: &'static str, raw: Vec<(T, T, T)>) -> Result<Self> {
        let u_max = raw
            .iter()
            .map(|(_, uf, _)| *uf)
            .fold(T::zero(), T::max);
        let rows = raw
            .into_iter()
            .map(|(control, u_fwm, u_swm)| {
                let (u_fwm_norm, u_swm_norm) = if u_max > T::zero() {
                    (u_fwm / u_max, u_swm / u_max)
                } else {
                    (T::zero(), T::zero())
                };
                SweepRow {
                    control,
                    u_fwm,
                    u_swm,
                    u_fwm_norm,
                    u_swm_norm,
                }
            })
            .collect();
        Ok(Self {
            control_name,
            rows,
            u_max,
        })
    }
}

/// Default integration grid for a given total reading intensity: step
/// `0.005 / max(Γ, Ω_t)` out to a horizon that comfortably outlasts the
/// slowest readout transient.
pub fn default_grid<T: Real>(i_t: T, params: &LambdaParams<T>) -> Result<TimeGrid<T>> {
    if i_t <= T::zero() {
        return Err(Error::Domain("total reading intensity must be > 0".into()));
    }
    let omega_t = (i_t / fl(2.0)).sqrt();
    let dt = fl::<T>(0.005) / params.gamma_e.max(omega_t);
    let t_end = (fl::<T>(30.0) + fl::<T>(200.0) / i_t) / params.gamma_e;
    TimeGrid::from_end(t_end, dt)
}

/// Retrieved energies over an even split sweep `I_R ∈ [0, I_t]` at fixed
/// total intensity. The pulse-shape pair is extracted once and reused for
/// every split.
pub fn split_sweep<T: Real>(
    i_t: T,
    n: usize,
    params: &LambdaParams<T>,
    grating: &StoredGrating<T>,
    opts: &SimOptions,
) -> Result<SweepTable<T>> {
    if n < 3 {
        return Err(Error::Domain("sweep needs at least 3 points".into()));
    }
    let grid = default_grid(i_t, params)?;
    let fg = extract_fg(i_t, params, &grid, opts)?;
    split_sweep_with_fg(&fg, n, params, grating)
}

/// Same sweep with a caller-provided pulse-shape pair.
pub fn split_sweep_with_fg<T: Real>(
    fg: &FgFunctions<T>,
    n: usize,
    params: &LambdaParams<T>,
    grating: &StoredGrating<T>,
) -> Result<SweepTable<T>> {
    if n < 3 {
        return Err(Error::Domain("sweep needs at least 3 points".into()));
    }
    let i_t = fg.i_t;
    let steps = T::from_usize(n - 1).unwrap();
    let mut raw = Vec::with_capacity(n);
    for j in 0..n {
        // Fraction first, so the endpoints come out exactly 0 and i_t.
        let frac = T::from_usize(j).unwrap() / steps;
        let i_r = i_t * frac;
        let i_rp = i_t * (T::one() - frac);
        let drive = ReadoutDrive::new(i_r, i_rp)?;
        let pair = retrieved_energies(fg, &drive, grating, params)?;
        raw.push((i_r, pair.u_fwm, pair.u_swm));
    }
    SweepTable::build("i_r", raw)
}

/// Raw and detector-convolved pulse shapes for one split.
#[derive(Debug, Clone)]
pub struct PulseShapes<T> {
    pub raw: PulsePair<T>,
    pub convolved: PulsePair<T>,
}

/// Compute both retrieved pulse intensity traces at one intensity split and
/// pass them through the detector response.
pub fn pulse_shapes<T: Real>(
    i_t: T,
    split: (T, T),
    tau: T,
    params: &LambdaParams<T>,
    grating: &StoredGrating<T>,
    opts: &SimOptions,
) -> Result<PulseShapes<T>> {
    let (i_r, i_rp) = split;
    if ((i_r + i_rp) - i_t).abs() > fl::<T>(1e-9) * T::one().max(i_t) {
        return Err(Error::Domain(format!(
            "split {i_r} + {i_rp} does not sum to the total intensity {i_t}"
        )));
    }
    let grid = default_grid(i_t, params)?;
    let fg = extract_fg(i_t, params, &grid, opts)?;
    let drive = ReadoutDrive::new(i_r, i_rp)?;
    let fwm_raw = pulse_intensity(&fwm_coherence(&fg, &drive, grating, params)?);
    let swm_raw = pulse_intensity(&swm_coherence(&fg, &drive, grating, params)?);
    let fwm_conv = detector_convolve(&fwm_raw, tau)?;
    let swm_conv = detector_convolve(&swm_raw, tau)?;
    Ok(PulseShapes {
        raw: PulsePair::new(fwm_raw, swm_raw, None)?,
        convolved: PulsePair::new(fwm_conv, swm_conv, Some(tau))?,
    })
}

/// Retrieved energies versus storage time at a fixed split. The pulse-shape
/// pair does not depend on the storage time, so it is extracted once.
pub fn storage_sweep<T: Real>(
    t_s_values: &[T],
    i_t: T,
    split: (T, T),
    params: &LambdaParams<T>,
    grating: &StoredGrating<T>,
    opts: &SimOptions,
) -> Result<SweepTable<T>> {
    if t_s_values.len() < 2 {
        return Err(Error::Domain("storage sweep needs at least 2 points".into()));
    }
    let grid = default_grid(i_t, params)?;
    let fg = extract_fg(i_t, params, &grid, opts)?;
    let drive = ReadoutDrive::new(split.0, split.1)?;
    if (drive.i_t() - i_t).abs() > fl::<T>(1e-9) * T::one().max(i_t) {
        return Err(Error::Domain("split does not sum to the total".into()));
    }
    let mut raw = Vec::with_capacity(t_s_values.len());
    for &t_s in t_s_values {
        let g = grating.with_storage_time(t_s)?;
        let pair = retrieved_energies(&fg, &drive, &g, params)?;
        raw.push((t_s, pair.u_fwm, pair.u_swm));
    }
    SweepTable::build("t_s", raw)
}

/// One row of a scaling probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingRow<T> {
    /// Global scale applied to both reading Rabi frequencies.
    pub lambda: T,
    /// `|four-wave component|` at the probe time.
    pub fwm_mag: T,
    /// `|six-wave component|` at the probe time.
    pub swm_mag: T,
}

/// Result of a low-intensity scaling probe: component magnitudes at a fixed
/// early time versus the global readout scale, with fitted log-log slopes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingTable<T> {
    pub t_star: T,
    pub rows: Vec<ScalingRow<T>>,
    pub slope_fwm: T,
    pub slope_swm: T,
    /// Largest jump between slopes of consecutive row pairs.
    pub slope_drift_fwm: T,
    pub slope_drift_swm: T,
}

/// Default readout scales for a scaling probe: powers of 1/2 down to 1/32.
pub fn default_lambdas<T: Real>() -> Vec<T> {
    (0..6).map(|k| fl::<T>(0.5).powi(k)).collect()
}

/// Scale both reading Rabi frequencies by each `lambda`, evolve to a fixed
/// early time, and read off how the two retrieved components scale.
///
/// The probe detects departure from the perturbative window by the drift of
/// pairwise slopes: more than 0.1 between consecutive pairs is an error.
pub fn scaling_probe<T: Real>(
    lambdas: &[T],
    base_drive: &ReadoutDrive<T>,
    t_star: T,
    params: &LambdaParams<T>,
    grating: &StoredGrating<T>,
    opts: &SimOptions,
) -> Result<ScalingTable<T>> {
    if lambdas.iter().any(|l| *l > T::one() || *l < T::zero()) {
        return Err(Error::Domain("scales must lie in [0, 1]".into()));
    }
    if t_star <= T::zero() {
        return Err(Error::Domain("probe time must be positive".into()));
    }
    let dt_max = fl::<T>(0.005)
        / params
            .gamma_e
            .max(base_drive.omega_r())
            .max(base_drive.omega_rp());
    let grid = TimeGrid::from_end(t_star, dt_max)?;
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        if lambda == T::zero() {
            rows.push(ScalingRow {
                lambda,
                fwm_mag: T::zero(),
                swm_mag: T::zero(),
            });
            continue;
        }
        let drive = base_drive.scaled(lambda);
        let pc = extract_phase_components(&drive, grating, params, &grid, opts)?;
        let last = grid.len - 1;
        rows.push(ScalingRow {
            lambda,
            fwm_mag: pc.fwm().values[last].norm(),
            swm_mag: pc.swm().values[last].norm(),
        });
    }

    let fit = |pick: fn(&ScalingRow<T>) -> T| -> Result<(T, T)> {
        let pts: Vec<(T, T)> = rows
            .iter()
            .filter(|r| r.lambda > T::zero() && pick(r) > T::zero())
            .map(|r| (r.lambda.ln(), pick(r).ln()))
            .collect();
        if pts.len() < 2 {
            return Err(Error::IllPosed(
                "scaling probe needs at least two nonzero scales".into(),
            ));
        }
        let n = T::from_usize(pts.len()).unwrap();
        let mx = pts.iter().map(|(x, _)| *x).sum::<T>() / n;
        let my = pts.iter().map(|(_, y)| *y).sum::<T>() / n;
        let mut sxx = T::zero();
        let mut sxy = T::zero();
        for (x, y) in &pts {
            sxx += (*x - mx) * (*x - mx);
            sxy += (*x - mx) * (*y - my);
        }
        let slope = sxy / sxx;
        let mut drift = T::zero();
        let mut prev: Option<T> = None;
        for pair in pts.windows(2) {
            let s = (pair[1].1 - pair[0].1) / (pair[1].0 - pair[0].0);
            if let Some(p) = prev {
                drift = drift.max((s - p).abs());
            }
            prev = Some(s);
        }
        Ok((slope, drift))
    };
    let (slope_fwm, slope_drift_fwm) = fit(|r| r.fwm_mag)?;
    let (slope_swm, slope_drift_swm) = fit(|r| r.swm_mag)?;
    let limit = fl::<T>(0.1);
    if slope_drift_fwm > limit || slope_drift_swm > limit {
        return Err(Error::NonConverged(format!(
            "slope drift {:?}/{:?} exceeds 0.1: probe time outside the perturbative window",
            slope_drift_fwm.to_f64(),
            slope_drift_swm.to_f64()
        )));
    }
    Ok(ScalingTable {
        t_star,
        rows,
        slope_fwm,
        slope_swm,
        slope_drift_fwm,
        slope_drift_swm,
    })
}
