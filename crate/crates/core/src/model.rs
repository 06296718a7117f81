//! Parameters, state types, time grids, and conversion conventions.
//!
//! Basis convention for the Λ system: index 0 is the ground sublevel one unit
//! of angular momentum below the excited state (written `g-`), index 1 the
//! sublevel one unit above (`g+`), index 2 the excited state `e`. The two
//! optical transitions `g- ↔ e` and `g+ ↔ e` carry opposite circular
//! polarizations; which handedness maps to which leg is a cosmetic label and
//! is not fixed here.
//!
//! Intensity ↔ Rabi-frequency convention: `I / I_sat = 2 Ω² / Γ²`, the
//! resonant saturation rule, so `I = 2 I_sat` corresponds to `Ω = Γ`.

use num_complex::Complex;

use crate::{fl, Error, Real, Result};

/// Hermiticity tolerance for a valid density matrix.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Trace-one tolerance for a valid density matrix.
pub const TRACE_TOL: f64 = 1e-9;
/// Lowest admissible eigenvalue of a valid density matrix.
pub const EIGENVALUE_FLOOR: f64 = -1e-9;

/// Tag recording the intensity ↔ Rabi conversion rule in use.
///
/// Only the resonant saturation convention is defined; the tag exists so the
/// rule travels with the parameter set instead of being implicit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SaturationConvention {
    /// `I / I_sat = 2 Ω² / Γ²`
    #[default]
    ResonantTwoOmegaSq,
}

/// Convert an intensity in saturation units into a Rabi frequency in units of
/// the excited-state decay rate.
pub fn intensity_to_rabi<T: Real>(i: T) -> Result<T> {
    if i < T::zero() {
        return Err(Error::Domain(format!("intensity must be >= 0, got {i}")));
    }
    Ok((i / fl(2.0)).sqrt())
}

/// Exact inverse of [`intensity_to_rabi`].
pub fn rabi_to_intensity<T: Real>(omega: T) -> Result<T> {
    if omega < T::zero() {
        return Err(Error::Domain(format!(
            "Rabi frequency must be >= 0, got {omega}"
        )));
    }
    Ok(fl::<T>(2.0) * omega * omega)
}

/// Physical rates of the Λ system, in units of the excited-state decay rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaParams<T> {
    /// Excited-state decay rate; 1 in internal units.
    pub gamma_e: T,
    /// Ground-coherence decay rate, in units of `gamma_e`.
    pub gamma_g: T,
    /// Fraction of the excited decay branching into `g-`.
    pub branch_1: T,
    /// Fraction branching into `g+`.
    pub branch_2: T,
    /// Intensity ↔ Rabi rule in effect.
    pub i_sat_convention: SaturationConvention,
}

impl<T: Real> Default for LambdaParams<T> {
    fn default() -> Self {
        Self {
            gamma_e: T::one(),
            gamma_g: fl(0.002),
            branch_1: fl(0.5),
            branch_2: fl(0.5),
            i_sat_convention: SaturationConvention::default(),
        }
    }
}

impl<T: Real> LambdaParams<T> {
    pub fn new(gamma_e: T, gamma_g: T, branch_1: T, branch_2: T) -> Result<Self> {
        let p = Self {
            gamma_e,
            gamma_g,
            branch_1,
            branch_2,
            i_sat_convention: SaturationConvention::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma_e <= T::zero() {
            return Err(Error::Domain("gamma_e must be positive".into()));
        }
        if self.gamma_g < T::zero() {
            return Err(Error::Domain("gamma_g must be >= 0".into()));
        }
        if self.gamma_g >= self.gamma_e {
            return Err(Error::Domain(
                "the model requires the ground-coherence decay to be slower than \
                 the excited-state decay"
                    .into(),
            ));
        }
        let sum = self.branch_1 + self.branch_2;
        if (sum - T::one()).abs() > fl(1e-12)
            || self.branch_1 < T::zero()
            || self.branch_2 < T::zero()
        {
            return Err(Error::Domain(
                "branching fractions must be in [0, 1] and sum to 1".into(),
            ));
        }
        Ok(())
    }

    /// Same rates with the ground-coherence decay switched off.
    pub fn without_ground_decay(mut self) -> Self {
        self.gamma_g = T::zero();
        self
    }
}

/// Intensities and local phases of the two reading beams.
///
/// `phase_r` and `phase_rp` represent the local optical phases `k_R·r` and
/// `k_R'·r` at the position of the atom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutDrive<T> {
    /// Intensity of beam R, in saturation units.
    pub i_r: T,
    /// Intensity of beam R', in saturation units.
    pub i_rp: T,
    /// Local phase of beam R, radians.
    pub phase_r: T,
    /// Local phase of beam R', radians.
    pub phase_rp: T,
}

impl<T: Real> ReadoutDrive<T> {
    pub fn new(i_r: T, i_rp: T) -> Result<Self> {
        if i_r < T::zero() || i_rp < T::zero() {
            return Err(Error::Domain("readout intensities must be >= 0".into()));
        }
        Ok(Self {
            i_r,
            i_rp,
            phase_r: T::zero(),
            phase_rp: T::zero(),
        })
    }

    /// Total reading intensity `I_R + I_R'`.
    pub fn i_t(&self) -> T {
        self.i_r + self.i_rp
    }

    /// Rabi frequency of beam R.
    pub fn omega_r(&self) -> T {
        intensity_to_rabi(self.i_r).expect("validated intensity")
    }

    /// Rabi frequency of beam R'.
    pub fn omega_rp(&self) -> T {
        intensity_to_rabi(self.i_rp).expect("validated intensity")
    }

    /// Both intensities scaled by `lambda²` (both Rabi frequencies by `lambda`).
    pub fn scaled(&self, lambda: T) -> Self {
        Self {
            i_r: self.i_r * lambda * lambda,
            i_rp: self.i_rp * lambda * lambda,
            ..*self
        }
    }
}

/// The ground-state coherence grating left behind by the writing stage.
///
/// The stored ground coherence at readout start is
/// `σ(g-, g+) = amplitude · e^{-γ t_s} · e^{-i phase_g}`,
/// with `phase_g` the local grating phase `(k_W - k_W')·r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoredGrating<T> {
    /// Complex coherence amplitude at write time (before storage decay).
    pub amplitude: Complex<T>,
    /// Local grating phase, radians.
    pub phase_g: T,
    /// Storage time, in units of the inverse excited-state decay rate.
    pub t_s: T,
    /// Ground population of `g-` after writing.
    pub pop_1: T,
    /// Ground population of `g+` after writing.
    pub pop_2: T,
}

impl<T: Real> StoredGrating<T> {
    pub fn new(amplitude: Complex<T>, phase_g: T, t_s: T, pop_1: T, pop_2: T) -> Result<Self> {
        let g = Self {
            amplitude,
            phase_g,
            t_s,
            pop_1,
            pop_2,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_s < T::zero() {
            return Err(Error::Domain("storage time must be >= 0".into()));
        }
        if self.pop_1 < -fl::<T>(1e-12) || self.pop_2 < -fl::<T>(1e-12) {
            return Err(Error::Domain("ground populations must be >= 0".into()));
        }
        if ((self.pop_1 + self.pop_2) - T::one()).abs() > fl(1e-9) {
            return Err(Error::Domain("ground populations must sum to 1".into()));
        }
        let bound = (self.pop_1 * self.pop_2).max(T::zero()).sqrt();
        if self.amplitude.norm() > bound + fl(1e-9) {
            return Err(Error::Domain(format!(
                "coherence amplitude {} exceeds the physical bound {bound}",
                self.amplitude.norm()
            )));
        }
        Ok(())
    }

    /// Grating written by projecting onto the dark state of the writing pair,
    /// with zero grating phase and zero storage time.
    pub fn from_dark_state(omega_w: T, omega_wp: T) -> Result<Self> {
        let rho = crate::bloch::dark_state(omega_w, omega_wp)?;
        Ok(Self {
            amplitude: rho.0[0][1],
            phase_g: T::zero(),
            t_s: T::zero(),
            pop_1: rho.0[0][0].re,
            pop_2: rho.0[1][1].re,
        })
    }

    /// Same grating with a different storage time.
    pub fn with_storage_time(mut self, t_s: T) -> Result<Self> {
        if t_s < T::zero() {
            return Err(Error::Domain("storage time must be >= 0".into()));
        }
        self.t_s = t_s;
        Ok(self)
    }

    /// Density matrix at readout start: stored coherence decayed by
    /// `e^{-γ t_s}`, grating phase offset by `extra_phase`, optical entries
    /// zero.
    pub fn initial_state(
        &self,
        params: &LambdaParams<T>,
        extra_phase: T,
    ) -> Result<DensityMatrix3<T>> {
        self.validate()?;
        let phase = Complex::new(T::zero(), -(self.phase_g + extra_phase)).exp();
        let coh = self.amplitude * phase;
        let mut rho = DensityMatrix3::zero();
        rho.0[0][0] = Complex::new(self.pop_1, T::zero());
        rho.0[1][1] = Complex::new(self.pop_2, T::zero());
        rho.0[0][1] = coh;
        rho.0[1][0] = coh.conj();
        crate::bloch::apply_storage(&rho, self.t_s, params)
    }
}

/// Uniform time grid. Sample `i` sits at `t0 + i·dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid<T> {
    pub t0: T,
    pub dt: T,
    pub len: usize,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(t0: T, dt: T, len: usize) -> Result<Self> {
        if dt <= T::zero() {
            return Err(Error::Domain("grid step must be positive".into()));
        }
        if len < 2 {
            return Err(Error::Domain("grid needs at least two samples".into()));
        }
        Ok(Self { t0, dt, len })
    }

    /// Grid from 0 to at least `t_end` with step at most `dt_max`.
    pub fn from_end(t_end: T, dt_max: T) -> Result<Self> {
        if t_end <= T::zero() || dt_max <= T::zero() {
            return Err(Error::Domain("grid extent and step must be positive".into()));
        }
        let n = (t_end / dt_max).ceil().to_usize().unwrap_or(1).max(1);
        let dt = t_end / T::from_usize(n).unwrap();
        Ok(Self {
            t0: T::zero(),
            dt,
            len: n + 1,
        })
    }

    pub fn time(&self, i: usize) -> T {
        self.t0 + self.dt * T::from_usize(i).unwrap()
    }

    pub fn end(&self) -> T {
        self.time(self.len - 1)
    }

    pub fn times(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.len).map(move |i| self.time(i))
    }

    /// Grids are compatible when origin, step, and length agree.
    pub fn same_as(&self, other: &Self) -> bool {
        self.len == other.len
            && (self.t0 - other.t0).abs() <= fl::<T>(1e-12) * self.dt
            && (self.dt - other.dt).abs() <= fl::<T>(1e-12) * self.dt
    }
}

/// Uniformly sampled complex-valued time series.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexTrace<T> {
    pub t0: T,
    pub dt: T,
    pub values: Vec<Complex<T>>,
}

impl<T: Real> ComplexTrace<T> {
    pub fn new(t0: T, dt: T, values: Vec<Complex<T>>) -> Result<Self> {
        if dt <= T::zero() {
            return Err(Error::Domain("trace step must be positive".into()));
        }
        if values.is_empty() {
            return Err(Error::Domain("trace must be non-empty".into()));
        }
        Ok(Self { t0, dt, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, i: usize) -> T {
        self.t0 + self.dt * T::from_usize(i).unwrap()
    }

    pub fn grid(&self) -> TimeGrid<T> {
        TimeGrid {
            t0: self.t0,
            dt: self.dt,
            len: self.values.len(),
        }
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.grid().same_as(&other.grid())
    }

    /// Largest magnitude over the trace.
    pub fn max_abs(&self) -> T {
        self.values
            .iter()
            .map(|v| v.norm())
            .fold(T::zero(), T::max)
    }

    /// Pointwise squared modulus.
    pub fn intensity(&self) -> RealTrace<T> {
        RealTrace {
            t0: self.t0,
            dt: self.dt,
            values: self.values.iter().map(|v| v.norm_sqr()).collect(),
        }
    }
}

/// Uniformly sampled real-valued time series.
#[derive(Debug, Clone, PartialEq)]
pub struct RealTrace<T> {
    pub t0: T,
    pub dt: T,
    pub values: Vec<T>,
}

impl<T: Real> RealTrace<T> {
    pub fn new(t0: T, dt: T, values: Vec<T>) -> Result<Self> {
        if dt <= T::zero() {
            return Err(Error::Domain("trace step must be positive".into()));
        }
        if values.is_empty() {
            return Err(Error::Domain("trace must be non-empty".into()));
        }
        Ok(Self { t0, dt, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, i: usize) -> T {
        self.t0 + self.dt * T::from_usize(i).unwrap()
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// Index and time of the largest sample (first occurrence).
    pub fn peak(&self) -> (usize, T) {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        (best, self.time(best))
    }

    /// Trace rescaled so the peak value is 1 (unchanged if the peak is 0).
    pub fn peak_normalized(&self) -> Self {
        let m = self.max();
        if m <= T::zero() {
            return self.clone();
        }
        Self {
            t0: self.t0,
            dt: self.dt,
            values: self.values.iter().map(|v| *v / m).collect(),
        }
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.len() == other.len()
            && (self.t0 - other.t0).abs() <= fl::<T>(1e-12) * self.dt
            && (self.dt - other.dt).abs() <= fl::<T>(1e-12) * self.dt
    }
}

/// 3×3 density matrix of one Λ atom over the basis `{g-, g+, e}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix3<T>(pub [[Complex<T>; 3]; 3]);

impl<T: Real> DensityMatrix3<T> {
    pub fn zero() -> Self {
        Self([[Complex::new(T::zero(), T::zero()); 3]; 3])
    }

    /// Maximally mixed state.
    pub fn maximally_mixed() -> Self {
        let mut rho = Self::zero();
        let third = Complex::new(T::one() / fl(3.0), T::zero());
        for i in 0..3 {
            rho.0[i][i] = third;
        }
        rho
    }

    /// Equal ground populations, nothing excited, no coherences.
    pub fn mixed_grounds() -> Self {
        let mut rho = Self::zero();
        let half = Complex::new(fl(0.5), T::zero());
        rho.0[0][0] = half;
        rho.0[1][1] = half;
        rho
    }

    pub fn trace(&self) -> Complex<T> {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    /// `tr(ρ²)`, real for Hermitian input.
    pub fn purity(&self) -> T {
        let mut s = T::zero();
        for i in 0..3 {
            for j in 0..3 {
                s += (self.0[i][j] * self.0[j][i]).re;
            }
        }
        s
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_defect(&self) -> T {
        let mut d2 = T::zero();
        for i in 0..3 {
            for j in i..3 {
                d2 = d2.max((self.0[i][j] - self.0[j][i].conj()).norm_sqr());
            }
        }
        d2.sqrt()
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> [T; 3] {
        // Symmetrize first so roundoff asymmetry cannot leak in.
        let mut a = [[Complex::new(T::zero(), T::zero()); 3]; 3];
        let half = fl::<T>(0.5);
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] = (self.0[i][j] + self.0[j][i].conj()) * half;
            }
        }
        hermitian3_eigenvalues(&a)
    }

    pub fn min_eigenvalue(&self) -> T {
        self.eigenvalues()[0]
    }

    /// Coherence `⟨g-|ρ|e⟩`.
    pub fn sigma_e1(&self) -> Complex<T> {
        self.0[0][2]
    }

    /// Coherence `⟨g+|ρ|e⟩`.
    pub fn sigma_e2(&self) -> Complex<T> {
        self.0[1][2]
    }

    /// Ground coherence `⟨g-|ρ|g+⟩`.
    pub fn ground_coherence(&self) -> Complex<T> {
        self.0[0][1]
    }
}

/// Diagnostic outcome of [`validate_state`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationReport<T> {
    pub hermiticity_defect: T,
    pub trace_defect: T,
    pub min_eigenvalue: T,
    pub passes: bool,
}

/// Check Hermiticity, unit trace, and positivity of a density matrix.
///
/// Pure diagnostic: never fails, reports the defects and whether all three
/// invariants hold at the module tolerances.
pub fn validate_state<T: Real>(rho: &DensityMatrix3<T>) -> ValidationReport<T> {
    let hermiticity_defect = rho.hermiticity_defect();
    let trace_defect = (rho.trace() - Complex::new(T::one(), T::zero())).norm();
    let min_eigenvalue = rho.min_eigenvalue();
    let passes = hermiticity_defect <= fl(HERMITICITY_TOL)
        && trace_defect <= fl(TRACE_TOL)
        && min_eigenvalue >= fl(EIGENVALUE_FLOOR);
    ValidationReport {
        hermiticity_defect,
        trace_defect,
        min_eigenvalue,
        passes,
    }
}

/// Cheap sufficient test that every eigenvalue of the Hermitian part of `m`
/// exceeds `-floor`: all seven principal minors of `herm(m) + floor·I` must
/// clear a small positive slack. A `false` answer is inconclusive (the matrix
/// may sit just on the boundary) and callers escalate to the exact solver.
pub(crate) fn eigenvalue_floor_fast_pass<T: Real>(m: &[[Complex<T>; 3]; 3], floor: T) -> bool {
    let half = fl::<T>(0.5);
    let slack = fl::<T>(1e-13);
    let a00 = m[0][0].re + floor;
    let a11 = m[1][1].re + floor;
    let a22 = m[2][2].re + floor;
    let a01 = (m[0][1] + m[1][0].conj()) * half;
    let a02 = (m[0][2] + m[2][0].conj()) * half;
    let a12 = (m[1][2] + m[2][1].conj()) * half;
    if a00 < slack || a11 < slack || a22 < slack {
        return false;
    }
    let m01 = a00 * a11 - a01.norm_sqr();
    let m02 = a00 * a22 - a02.norm_sqr();
    let m12 = a11 * a22 - a12.norm_sqr();
    if m01 < slack || m02 < slack || m12 < slack {
        return false;
    }
    let det = a00 * (a11 * a22 - a12.norm_sqr())
        - (a01 * (a01.conj() * a22 - a12 * a02.conj())).re
        + (a02 * (a01.conj() * a12.conj() - a02.conj() * a11)).re;
    det >= slack
}

/// Eigenvalues of a Hermitian 3×3 matrix, ascending, by cyclic complex
/// Jacobi rotations. Converges quadratically to full working precision,
/// which the closed-form cubic cannot deliver near degenerate spectra.
fn hermitian3_eigenvalues<T: Real>(a: &[[Complex<T>; 3]; 3]) -> [T; 3] {
    let zero = Complex::new(T::zero(), T::zero());
    let mut m = *a;
    let scale = {
        let mut s = T::zero();
        for row in m.iter() {
            for v in row.iter() {
                s = s.max(v.norm());
            }
        }
        s.max(T::min_positive_value())
    };
    let tiny = scale * T::epsilon() * fl(0.25);
    for _ in 0..32 {
        let off = m[0][1].norm() + m[0][2].norm() + m[1][2].norm();
        if off <= tiny {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let beta = m[p][q];
            if beta.norm() <= tiny {
                continue;
            }
            // Unitary 2x2 that diagonalizes the (p,q) Hermitian block.
            let alpha = m[p][p].re;
            let gamma = m[q][q].re;
            let d = (alpha - gamma) * fl(0.5);
            let h = (d * d + beta.norm_sqr()).sqrt();
            let lp = (alpha + gamma) * fl::<T>(0.5) + h;
            let b0 = beta;
            let b1 = Complex::new(lp - alpha, T::zero());
            let norm = (b0.norm_sqr() + b1.norm_sqr()).sqrt();
            if norm <= tiny {
                continue;
            }
            let u_pp = b0 / norm;
            let u_qp = b1 / norm;
            // Second column orthogonal to the first.
            let u_pq = -u_qp.conj();
            let u_qq = u_pp.conj();
            let mut u = [[zero; 3]; 3];
            for i in 0..3 {
                u[i][i] = Complex::new(T::one(), T::zero());
            }
            u[p][p] = u_pp;
            u[p][q] = u_pq;
            u[q][p] = u_qp;
            u[q][q] = u_qq;
            // m <- U† m U
            let mut tmp = [[zero; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    let mut acc = zero;
                    for k in 0..3 {
                        acc = acc + m[i][k] * u[k][j];
                    }
                    tmp[i][j] = acc;
                }
            }
            let mut next = [[zero; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    let mut acc = zero;
                    for k in 0..3 {
                        acc = acc + u[k][i].conj() * tmp[k][j];
                    }
                    next[i][j] = acc;
                }
            }
            m = next;
        }
    }
    let mut e = [m[0][0].re, m[1][1].re, m[2][2].re];
    e.sort_by(|x, y| x.partial_cmp(y).unwrap());
    e
}
