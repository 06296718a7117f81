//! Wavevector algebra over the beam geometry: candidate mixing terms, phase
//! mismatch over the interaction length, and which combinations radiate into
//! the detected direction.
//!
//! Geometry: the two writing beams W and W' cross at a small angle; both
//! reading beams counterpropagate with respect to W. The retrieved four-wave
//! combination `k_R + k_W - k_W'` and six-wave combination
//! `2k_R - k_R' + k_W - k_W'` then both point along `-k_W'` and sit exactly
//! on the optical shell, while every mirror combination leaves the detected
//! mode by twice the writing angle.
//!
//! Two mismatch figures are reported per term: the on-shell phase slip
//! `| |Σ c·k| - k₀ | · L`, which decides whether the combination can
//! propagate at all, and the detection-mode slip `|Σ c·k - k₀ d̂| · L`
//! against a chosen direction `d̂`, which decides whether it radiates into
//! the detected mode.

use crate::{fl, Error, Real, Result};

/// Propagation directions (unit vectors), wavelength, and interaction length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamGeometry<T> {
    pub dir_w: [T; 3],
    pub dir_wp: [T; 3],
    pub dir_r: [T; 3],
    pub dir_rp: [T; 3],
    /// Optical wavelength in meters.
    pub lambda0: T,
    /// Interaction (cloud) length in meters.
    pub length: T,
}

fn norm3<T: Real>(v: &[T; 3]) -> T {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

impl<T: Real> BeamGeometry<T> {
    pub fn new(
        dir_w: [T; 3],
        dir_wp: [T; 3],
        dir_r: [T; 3],
        dir_rp: [T; 3],
        lambda0: T,
        length: T,
    ) -> Result<Self> {
        let g = Self {
            dir_w,
            dir_wp,
            dir_r,
            dir_rp,
            lambda0,
            length,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("W", &self.dir_w),
            ("W'", &self.dir_wp),
            ("R", &self.dir_r),
            ("R'", &self.dir_rp),
        ] {
            if (norm3(v) - T::one()).abs() > fl(1e-12) {
                return Err(Error::Domain(format!("direction {name} is not unit-norm")));
            }
        }
        if self.lambda0 <= T::zero() || self.length <= T::zero() {
            return Err(Error::Domain(
                "wavelength and interaction length must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Writing beams split by `theta` in the x-z plane, both reading beams
    /// exactly counterpropagating with respect to W.
    pub fn counterpropagating(theta: T, lambda0: T, length: T) -> Result<Self> {
        Self::new(
            [T::zero(), T::zero(), T::one()],
            [theta.sin(), T::zero(), theta.cos()],
            [T::zero(), T::zero(), -T::one()],
            [T::zero(), T::zero(), -T::one()],
            lambda0,
            length,
        )
    }

    /// Default retrieval geometry: 10 mrad writing angle, 852 nm, 3 mm cloud.
    pub fn default_retrieval() -> Self {
        Self::counterpropagating(fl(0.010), fl(852e-9), fl(3e-3)).expect("valid constants")
    }

    /// `2π/λ₀` in rad/m.
    pub fn k0(&self) -> T {
        fl::<T>(2.0) * T::PI() / self.lambda0
    }

    /// Direction the retrieved signals are detected in: opposite to W'.
    pub fn detection_direction(&self) -> [T; 3] {
        [-self.dir_wp[0], -self.dir_wp[1], -self.dir_wp[2]]
    }
}

/// Which optical transition a term radiates on. The two transitions carry
/// opposite circular polarizations, so this is what a polarizing analyzer
/// separates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolarizationChannel {
    /// `g- ↔ e` transition (the four-wave channel).
    GroundMinus,
    /// `g+ ↔ e` transition (the six-wave channel).
    GroundPlus,
}

/// Identity of a candidate mixing term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermLabel {
    StimR,
    StimRp,
    /// R diffracted off the stored grating (the retrieved four-wave signal).
    FwmR,
    /// R against the opposite grating order.
    FwmRMirror,
    /// R' diffracted off the opposite grating order.
    FwmRp,
    /// R' against the stored grating order.
    FwmRpMirror,
    /// Two R photons against one R' (the retrieved six-wave signal).
    SwmR,
    SwmRMirror,
    /// Two R' photons against one R.
    SwmRp,
    SwmRpMirror,
}

/// Integer wavevector combination `c_R k_R + c_R' k_R' + c_W k_W + c_W' k_W'`
/// with its emission channel and whether the Λ response sources it at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MixingTerm {
    pub label: TermLabel,
    /// Coefficients `(c_R, c_R', c_W, c_W')`.
    pub coeffs: [i32; 4],
    pub channel: PolarizationChannel,
    /// Whether the local optical coherence carries this combination with a
    /// nonvanishing amplitude. The stored grating holds a single spatial
    /// harmonic and enters the linear readout dynamics once, so each optical
    /// coherence populates exactly one grating-bearing drive-phase harmonic;
    /// the opposite pairings (the `*Mirror` labels) have no source. The
    /// dynamics tests pin this spectral purity to machine precision.
    pub radiates: bool,
}

impl MixingTerm {
    pub fn new(
        label: TermLabel,
        coeffs: [i32; 4],
        channel: PolarizationChannel,
        radiates: bool,
    ) -> Result<Self> {
        let order: i32 = coeffs.iter().map(|c| c.abs()).sum();
        if order > 5 {
            return Err(Error::Domain(format!(
                "mixing order {order} exceeds the six-wave budget of five incident photons"
            )));
        }
        Ok(Self {
            label,
            coeffs,
            channel,
            radiates,
        })
    }
}

/// The candidate set: stimulated emission of each reading beam, plus the
/// closure under adding one grating order `±(k_W - k_W')` and one reading
/// exchange `2k_X - k_Y`. Scattering of R radiates on the `g- ↔ e` leg
/// except for the six-wave exchange, which comes back on R's own leg; the
/// R' family mirrors that with the opposite grating order.
pub fn catalog() -> Vec<MixingTerm> {
    use PolarizationChannel::{GroundMinus, GroundPlus};
    use TermLabel::*;
    [
        (StimR, [1, 0, 0, 0], GroundPlus, true),
        (StimRp, [0, 1, 0, 0], GroundMinus, true),
        (FwmR, [1, 0, 1, -1], GroundMinus, true),
        (FwmRMirror, [1, 0, -1, 1], GroundMinus, false),
        (FwmRp, [0, 1, -1, 1], GroundPlus, true),
        (FwmRpMirror, [0, 1, 1, -1], GroundPlus, false),
        (SwmR, [2, -1, 1, -1], GroundPlus, true),
        (SwmRMirror, [2, -1, -1, 1], GroundPlus, false),
        (SwmRp, [-1, 2, -1, 1], GroundMinus, true),
        (SwmRpMirror, [-1, 2, 1, -1], GroundMinus, false),
    ]
    .into_iter()
    .map(|(label, coeffs, channel, radiates)| {
        MixingTerm::new(label, coeffs, channel, radiates).expect("order <= 5")
    })
    .collect()
}

/// Resultant wavevector of a term, rad/m.
pub fn term_wavevector<T: Real>(term: &MixingTerm, geom: &BeamGeometry<T>) -> [T; 3] {
    let k0 = geom.k0();
    let dirs = [&geom.dir_r, &geom.dir_rp, &geom.dir_w, &geom.dir_wp];
    let mut out = [T::zero(); 3];
    for (c, dir) in term.coeffs.iter().zip(dirs) {
        let w = k0 * T::from_i32(*c).unwrap();
        for (o, d) in out.iter_mut().zip(dir.iter()) {
            *o += w * *d;
        }
    }
    out
}

/// Dimensionless on-shell phase slip `| |Σ c·k| - k₀ | · L`. A term below
/// [`PHASE_SLIP_LIMIT`] can build up a propagating field.
pub fn mismatch<T: Real>(term: &MixingTerm, geom: &BeamGeometry<T>) -> T {
    let k = term_wavevector(term, geom);
    (norm3(&k) - geom.k0()).abs() * geom.length
}

/// Dimensionless slip against the detected plane-wave mode along `direction`:
/// `|Σ c·k - k₀ d̂| · L`.
pub fn detection_mismatch<T: Real>(
    term: &MixingTerm,
    geom: &BeamGeometry<T>,
    direction: &[T; 3],
) -> T {
    let k = term_wavevector(term, geom);
    let k0 = geom.k0();
    let scale = k0 / norm3(direction);
    let mut d2 = T::zero();
    for i in 0..3 {
        let d = k[i] - scale * direction[i];
        d2 += d * d;
    }
    d2.sqrt() * geom.length
}

/// First-null phase-slip criterion.
pub fn phase_slip_limit<T: Real>() -> T {
    T::PI()
}

/// One row of the enumeration report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermVerdict<T> {
    pub term: MixingTerm,
    pub wavevector: [T; 3],
    /// On-shell phase slip over the interaction length.
    pub mismatch: T,
    /// `mismatch <= π`: the combination can radiate a propagating field.
    pub matched: bool,
    /// Phase slip against the detected mode (opposite to W').
    pub detection_mismatch: T,
    /// `detection_mismatch <= π`: it radiates into the detected direction.
    pub into_detector: bool,
}

/// Evaluate the full candidate set against a geometry, sorted by on-shell
/// mismatch (ties by catalog order).
pub fn enumerate_terms<T: Real>(geom: &BeamGeometry<T>) -> Result<Vec<TermVerdict<T>>> {
    geom.validate()?;
    let limit = phase_slip_limit::<T>();
    let detector = geom.detection_direction();
    let mut rows: Vec<TermVerdict<T>> = catalog()
        .into_iter()
        .map(|term| {
            let wavevector = term_wavevector(&term, geom);
            let slip = mismatch(&term, geom);
            let det = detection_mismatch(&term, geom, &detector);
            TermVerdict {
                term,
                wavevector,
                mismatch: slip,
                matched: slip <= limit,
                detection_mismatch: det,
                into_detector: det <= limit,
            }
        })
        .collect();
    rows.sort_by(|a, b| a.mismatch.partial_cmp(&b.mismatch).unwrap());
    Ok(rows)
}
