//! Nonlinear least-squares estimation of model parameters from a measured
//! pulse trace.
//!
//! The forward model assembles a retrieved pulse intensity from the
//! pulse-shape functions, applies the detector response, then scales and
//! shifts it onto the measurement clock:
//!
//! ```text
//! model(t) = scale · convolved_pulse( (t - t0) · Γ ; I_t, τ, γ )
//! ```
//!
//! Up to five parameters can be freed: the amplitude scale, the time offset,
//! the total reading intensity, the detector response time, and the
//! ground-coherence decay rate. Minimization is a bounded Nelder-Mead
//! simplex; pulse-shape extraction is cached on a grid of total intensities
//! and interpolated, so candidate evaluations stay cheap.

use num_complex::Complex;

use crate::bloch::{extract_fg, FgFunctions, SimOptions};
use crate::model::{ComplexTrace, LambdaParams, ReadoutDrive, StoredGrating, TimeGrid};
use crate::signals::{detector_convolve, fwm_coherence, pulse_intensity, swm_coherence};
use crate::{fl, Error, Real, Result};

/// Which retrieved pulse the data shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Fwm,
    Swm,
}

/// The model parameters a fit can adjust.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamId {
    /// Overall amplitude factor (arbitrary units per detected unit).
    Scale,
    /// Trigger offset between model time zero and the data clock, µs.
    TimeOffset,
    /// Total reading intensity, saturation units.
    TotalIntensity,
    /// Detector response time, µs.
    DetectorTau,
    /// Ground-coherence decay rate, units of the excited decay rate.
    GroundDecay,
}

/// One free parameter with its box and starting point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeParam<T> {
    pub id: ParamId,
    pub guess: T,
    pub lower: T,
    pub upper: T,
}

/// Values used for every parameter a fit does not free.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams<T> {
    pub scale: T,
    pub t0_us: T,
    pub i_t: T,
    pub tau_us: T,
    pub gamma_g: T,
}

/// Fixed experimental context of the forward model.
#[derive(Debug, Clone)]
pub struct ModelContext<T> {
    /// Excited-state decay rate in rad/µs; converts between the data clock
    /// and internal time units.
    pub gamma_e_rad_per_us: T,
    /// `I_R / I_t` during the measured readout.
    pub split_fraction: T,
    /// Stored grating (its storage time is in internal units).
    pub grating: StoredGrating<T>,
    /// Rates and branching; the ground decay is overridden when freed.
    pub params: LambdaParams<T>,
    /// Node spacing of the total-intensity cache, saturation units.
    pub fg_grid_spacing: T,
    /// Sample spacing of the cached model traces, internal time units. The
    /// extraction runs on its own fine grid and is decimated to this; pulse
    /// features evolve on the scale of one inverse decay rate, so 0.05 keeps
    /// the interpolation error orders below the fit tolerances.
    pub model_dt: T,
    pub opts: SimOptions,
}

impl<T: Real> ModelContext<T> {
    /// Cesium-flavored defaults: Γ/2π = 5.2 MHz, equal reading split, the
    /// 10:1 writing-ratio grating stored for 1 µs.
    pub fn cesium_defaults() -> Self {
        let gamma_e_rad_per_us = fl::<T>(2.0) * T::PI() * fl(5.2);
        let grating = StoredGrating::from_dark_state(fl::<T>(10.0).sqrt(), T::one())
            .expect("valid writing ratio")
            .with_storage_time(gamma_e_rad_per_us)
            .expect("positive storage time");
        Self {
            gamma_e_rad_per_us,
            split_fraction: fl(0.5),
            grating,
            params: LambdaParams::default(),
            fg_grid_spacing: fl(0.1),
            model_dt: fl(0.05),
            // The pulse-shape extraction runs at zero ground decay, where
            // the grating sector carries single spectral lines; five phase
            // samples per axis are alias-free there and halve the cache cost.
            opts: SimOptions {
                n_phi: 5,
                threads: 1,
            },
        }
    }
}

/// A measured trace plus everything needed to fit it.
#[derive(Debug, Clone)]
pub struct FitProblem<T> {
    /// Sample times, µs, strictly increasing.
    pub times_us: Vec<T>,
    /// Measured values (pulse intensity, arbitrary units).
    pub values: Vec<T>,
    pub channel: Channel,
    /// Values of parameters that stay fixed.
    pub base: ModelParams<T>,
    /// Parameters to optimize. At most one entry per [`ParamId`].
    pub free: Vec<FreeParam<T>>,
    pub context: ModelContext<T>,
}

/// Outcome of a fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<T> {
    /// Final values of the freed parameters, in the order they were freed.
    pub estimates: Vec<(ParamId, T)>,
    /// Final sum of squared residuals.
    pub ssr: T,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Whether any estimate ended on its box boundary.
    pub hit_bounds: bool,
}

impl<T: Real> FitProblem<T> {
    fn validate(&self) -> Result<()> {
        if self.times_us.len() < 10 {
            return Err(Error::IllPosed("need at least 10 samples".into()));
        }
        if self.times_us.len() != self.values.len() {
            return Err(Error::IllPosed("times and values differ in length".into()));
        }
        for w in self.times_us.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::IllPosed("times must be strictly increasing".into()));
            }
        }
        if self
            .values
            .iter()
            .chain(self.times_us.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::IllPosed("data must be finite".into()));
        }
        let lo = self.values.iter().copied().fold(T::infinity(), T::min);
        let hi = self.values.iter().copied().fold(T::neg_infinity(), T::max);
        if hi - lo <= T::zero() {
            return Err(Error::IllPosed("constant data cannot constrain a fit".into()));
        }
        if self.free.is_empty() {
            return Err(Error::IllPosed("no free parameters".into()));
        }
        for (i, p) in self.free.iter().enumerate() {
            if !(p.lower < p.upper) || p.guess < p.lower || p.guess > p.upper {
                return Err(Error::IllPosed(format!(
                    "free parameter {:?} has bounds [{}, {}] not containing guess {}",
                    p.id, p.lower, p.upper, p.guess
                )));
            }
            if self.free[..i].iter().any(|q| q.id == p.id) {
                return Err(Error::IllPosed(format!("{:?} freed twice", p.id)));
            }
            if p.id == ParamId::TotalIntensity && p.lower <= T::zero() {
                return Err(Error::IllPosed(
                    "total intensity must stay positive over its box".into(),
                ));
            }
        }
        self.context.grating.validate()?;
        self.context.params.validate()?;
        Ok(())
    }

    fn param_value(&self, id: ParamId, x: &[T]) -> T {
        for (k, p) in self.free.iter().enumerate() {
            if p.id == id {
                return x[k];
            }
        }
        match id {
            ParamId::Scale => self.base.scale,
            ParamId::TimeOffset => self.base.t0_us,
            ParamId::TotalIntensity => self.base.i_t,
            ParamId::DetectorTau => self.base.tau_us,
            ParamId::GroundDecay => self.base.gamma_g,
        }
    }
}

/// Pulse-shape pairs extracted on a grid of total intensities, all on one
/// common time grid so they blend sample by sample.
struct FgCache<T> {
    nodes: Vec<T>,
    tables: Vec<FgFunctions<T>>,
}

impl<T: Real> FgCache<T> {
    fn build(problem: &FitProblem<T>) -> Result<Self> {
        let (lo, hi) = match problem
            .free
            .iter()
            .find(|p| p.id == ParamId::TotalIntensity)
        {
            Some(p) => (p.lower, p.upper),
            None => (problem.base.i_t, problem.base.i_t),
        };
        if lo <= T::zero() {
            return Err(Error::IllPosed("total intensity must be positive".into()));
        }
        let h = problem.context.fg_grid_spacing;
        let mut nodes = Vec::new();
        if lo == hi {
            nodes.push(lo);
        } else {
            let first = (lo / h).floor().to_isize().unwrap_or(0);
            let last = (hi / h).ceil().to_isize().unwrap_or(0);
            for k in first..=last {
                let v = h * T::from_isize(k).unwrap();
                if v > T::zero() {
                    nodes.push(v);
                }
            }
            if nodes.is_empty() {
                nodes.push(hi);
            }
        }
        // One shared grid, fine and long enough for every node.
        let i_min = nodes.first().copied().unwrap();
        let i_max = nodes.last().copied().unwrap();
        let p = &problem.context.params;
        let omega_max = (i_max / fl(2.0)).sqrt();
        let dt = fl::<T>(0.005) / p.gamma_e.max(omega_max);
        let t_end = (fl::<T>(30.0) + fl::<T>(200.0) / i_min) / p.gamma_e;
        let grid = TimeGrid::from_end(t_end, dt)?;
        let stride = (problem.context.model_dt / grid.dt)
            .round()
            .to_usize()
            .unwrap_or(1)
            .max(1);
        let decimate = |t: &ComplexTrace<T>| -> ComplexTrace<T> {
            let values: Vec<Complex<T>> = t.values.iter().step_by(stride).copied().collect();
            ComplexTrace::new(t.t0, t.dt * T::from_usize(stride).unwrap(), values)
                .expect("decimation keeps a valid grid")
        };
        let tables = nodes
            .iter()
            .map(|&i_t| {
                extract_fg(i_t, p, &grid, &problem.context.opts).map(|fg| FgFunctions {
                    i_t: fg.i_t,
                    f: decimate(&fg.f),
                    g: decimate(&fg.g),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { nodes, tables })
    }

    /// Linear interpolation in the total intensity.
    fn at(&self, i_t: T) -> FgFunctions<T> {
        if self.nodes.len() == 1 {
            let t = &self.tables[0];
            return FgFunctions {
                i_t,
                f: t.f.clone(),
                g: t.g.clone(),
            };
        }
        let mut hi = 1;
        while hi + 1 < self.nodes.len() && self.nodes[hi] < i_t {
            hi += 1;
        }
        let lo = hi - 1;
        let span = self.nodes[hi] - self.nodes[lo];
        let w = ((i_t - self.nodes[lo]) / span).max(T::zero()).min(T::one());
        let blend = |a: &ComplexTrace<T>, b: &ComplexTrace<T>| -> ComplexTrace<T> {
            let values = a
                .values
                .iter()
                .zip(b.values.iter())
                .map(|(x, y)| {
                    *x * (T::one() - w) + *y * w
                })
                .collect::<Vec<Complex<T>>>();
            ComplexTrace::new(a.t0, a.dt, values).expect("grids validated")
        };
        FgFunctions {
            i_t,
            f: blend(&self.tables[lo].f, &self.tables[hi].f),
            g: blend(&self.tables[lo].g, &self.tables[hi].g),
        }
    }
}

/// Simplex state ordered so entry 0 is the best vertex.
struct Simplex<T> {
    vertices: Vec<(Vec<T>, T)>,
}

/// Fit a measured pulse trace.
///
/// Minimizes the sum of squared residuals with a bounded Nelder-Mead simplex
/// (reflection 1, expansion 2, contraction 0.5, shrink 0.5; candidates are
/// projected onto the box before evaluation). Converges when the simplex
/// spread falls below 1e-8 of the box widths, when the residual hits its
/// floor, or after 10000 model evaluations.
pub fn fit_trace<T: Real>(problem: &FitProblem<T>) -> Result<FitResult<T>> {
    problem.validate()?;
    let cache = FgCache::build(problem)?;

    // Residual floor relative to the data scale, so rescaling the data and
    // the amplitude box together leaves the fit's behavior unchanged.
    let data_scale: T = problem.values.iter().map(|v| *v * *v).sum();
    let ssr_floor = fl::<T>(1e-16) * data_scale;

    let dim = problem.free.len();
    let lower: Vec<T> = problem.free.iter().map(|p| p.lower).collect();
    let upper: Vec<T> = problem.free.iter().map(|p| p.upper).collect();
    let project = |x: &mut [T]| {
        for k in 0..dim {
            x[k] = x[k].max(lower[k]).min(upper[k]);
        }
    };

    let evaluations = std::cell::Cell::new(0usize);
    let objective = |x: &[T]| -> Result<T> {
        evaluations.set(evaluations.get() + 1);
        let model = forward_model(problem, &cache, x)?;
        let mut ssr = T::zero();
        for (m, y) in model.iter().zip(problem.values.iter()) {
            let r = *m - *y;
            ssr += r * r;
        }
        Ok(ssr)
    };

    // Initial simplex: guess plus one 5%-of-box step per dimension, stepping
    // inward when the guess sits near the upper edge.
    let x0: Vec<T> = problem.free.iter().map(|p| p.guess).collect();
    let mut vertices: Vec<(Vec<T>, T)> = Vec::with_capacity(dim + 1);
    let f0 = objective(&x0)?;
    vertices.push((x0.clone(), f0));
    for k in 0..dim {
        let mut x = x0.clone();
        let step = (upper[k] - lower[k]) * fl(0.05);
        x[k] = if x[k] + step <= upper[k] {
            x[k] + step
        } else {
            x[k] - step
        };
        project(&mut x);
        let f = objective(&x)?;
        vertices.push((x, f));
    }
    let mut simplex = Simplex { vertices };
    let order = |s: &mut Simplex<T>| {
        s.vertices
            .sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    };
    order(&mut simplex);

    let xtol = fl::<T>(1e-8);
    let max_evals = 10_000usize;
    let mut iterations = 0usize;
    let mut converged = false;
    loop {
        let best = simplex.vertices[0].1;
        if best <= ssr_floor {
            converged = true;
            break;
        }
        let spread = (0..dim)
            .map(|k| {
                let width = T::one().max(upper[k] - lower[k]);
                simplex
                    .vertices
                    .iter()
                    .map(|(x, _)| (x[k] - simplex.vertices[0].0[k]).abs() / width)
                    .fold(T::zero(), T::max)
            })
            .fold(T::zero(), T::max);
        if spread <= xtol {
            converged = true;
            break;
        }
        if evaluations.get() >= max_evals {
            break;
        }
        iterations += 1;

        let worst_idx = dim;
        let f_best = simplex.vertices[0].1;
        let f_second = simplex.vertices[dim - 1].1;
        let f_worst = simplex.vertices[worst_idx].1;
        let mut centroid = vec![T::zero(); dim];
        for (x, _) in simplex.vertices[..dim].iter() {
            for k in 0..dim {
                centroid[k] += x[k];
            }
        }
        let inv = T::one() / T::from_usize(dim).unwrap();
        for c in centroid.iter_mut() {
            *c *= inv;
        }
        let combine = |a: &[T], b: &[T], s: T| -> Vec<T> {
            let mut out = vec![T::zero(); dim];
            for k in 0..dim {
                out[k] = a[k] + (a[k] - b[k]) * s;
            }
            out
        };

        let mut reflected = combine(&centroid, &simplex.vertices[worst_idx].0, T::one());
        project(&mut reflected);
        let f_r = objective(&reflected)?;

        if f_r < f_best {
            let mut expanded = combine(&centroid, &simplex.vertices[worst_idx].0, fl(2.0));
            project(&mut expanded);
            let f_e = objective(&expanded)?;
            simplex.vertices[worst_idx] = if f_e < f_r {
                (expanded, f_e)
            } else {
                (reflected, f_r)
            };
        } else if f_r < f_second {
            simplex.vertices[worst_idx] = (reflected, f_r);
        } else {
            let shrink_needed;
            if f_r < f_worst {
                let mut outside = combine(&centroid, &simplex.vertices[worst_idx].0, fl(0.5));
                project(&mut outside);
                let f_oc = objective(&outside)?;
                if f_oc <= f_r {
                    simplex.vertices[worst_idx] = (outside, f_oc);
                    shrink_needed = false;
                } else {
                    shrink_needed = true;
                }
            } else {
                let mut inside = combine(&centroid, &simplex.vertices[worst_idx].0, fl(-0.5));
                project(&mut inside);
                let f_ic = objective(&inside)?;
                if f_ic < f_worst {
                    simplex.vertices[worst_idx] = (inside, f_ic);
                    shrink_needed = false;
                } else {
                    shrink_needed = true;
                }
            }
            if shrink_needed {
                let best_x = simplex.vertices[0].0.clone();
                for v in simplex.vertices[1..].iter_mut() {
                    for k in 0..dim {
                        v.0[k] = best_x[k] + (v.0[k] - best_x[k]) * fl(0.5);
                    }
                    project(&mut v.0);
                    v.1 = objective(&v.0)?;
                }
            }
        }
        order(&mut simplex);
        if evaluations.get() >= max_evals {
            break;
        }
    }

    let (best_x, best_f) = simplex.vertices[0].clone();
    let mut hit_bounds = false;
    for k in 0..dim {
        let width = upper[k] - lower[k];
        if (best_x[k] - lower[k]).abs() <= fl::<T>(1e-9) * width
            || (upper[k] - best_x[k]).abs() <= fl::<T>(1e-9) * width
        {
            hit_bounds = true;
        }
    }
    Ok(FitResult {
        estimates: problem
            .free
            .iter()
            .zip(best_x.iter())
            .map(|(p, v)| (p.id, *v))
            .collect(),
        ssr: best_f,
        iterations,
        evaluations: evaluations.get(),
        converged,
        hit_bounds,
    })
}

/// Evaluate the forward model at the data sample times.
fn forward_model<T: Real>(
    problem: &FitProblem<T>,
    cache: &FgCache<T>,
    x: &[T],
) -> Result<Vec<T>> {
    let ctx = &problem.context;
    let scale = problem.param_value(ParamId::Scale, x);
    let t0_us = problem.param_value(ParamId::TimeOffset, x);
    let i_t = problem.param_value(ParamId::TotalIntensity, x);
    let tau_us = problem.param_value(ParamId::DetectorTau, x);
    let gamma_g = problem.param_value(ParamId::GroundDecay, x);

    let mut params = ctx.params;
    params.gamma_g = gamma_g;
    params.validate()?;

    let fg = cache.at(i_t);
    let i_r = i_t * ctx.split_fraction;
    let drive = ReadoutDrive::new(i_r, i_t - i_r)?;
    let coh = match problem.channel {
        Channel::Fwm => fwm_coherence(&fg, &drive, &ctx.grating, &params)?,
        Channel::Swm => swm_coherence(&fg, &drive, &ctx.grating, &params)?,
    };
    let intensity = pulse_intensity(&coh);
    let tau_internal = tau_us * ctx.gamma_e_rad_per_us;
    let convolved = detector_convolve(&intensity, tau_internal)?;

    // Resample onto the data clock.
    let n = convolved.len();
    let out = problem
        .times_us
        .iter()
        .map(|&t_us| {
            let t = (t_us - t0_us) * ctx.gamma_e_rad_per_us;
            if t < T::zero() {
                return T::zero();
            }
            let idx = t / convolved.dt;
            let i = idx.floor().to_usize().unwrap_or(usize::MAX);
            if i + 1 >= n {
                return T::zero();
            }
            let w = idx - T::from_usize(i).unwrap();
            scale * (convolved.values[i] * (T::one() - w) + convolved.values[i + 1] * w)
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn context() -> ModelContext<f64> {
        let mut ctx = ModelContext::cesium_defaults();
        ctx.opts.threads = 2;
        ctx
    }

    fn synthesize(
        channel: Channel,
        truth: &ModelParams<f64>,
        free: Vec<FreeParam<f64>>,
        ctx: &ModelContext<f64>,
    ) -> FitProblem<f64> {
        let times: Vec<f64> = (0..160).map(|i| i as f64 * 0.02).collect();
        let skeleton = FitProblem {
            times_us: times.clone(),
            values: vec![0.0; times.len()],
            channel,
            base: *truth,
            free: vec![FreeParam {
                id: ParamId::Scale,
                guess: truth.scale,
                lower: truth.scale * 0.1,
                upper: truth.scale * 10.0,
            }],
            context: ctx.clone(),
        };
        let cache = FgCache::build(&skeleton).unwrap();
        let values = forward_model(&skeleton, &cache, &[truth.scale]).unwrap();
        FitProblem {
            times_us: times,
            values,
            channel,
            base: *truth,
            free,
            context: ctx.clone(),
        }
    }

    fn truth() -> ModelParams<f64> {
        ModelParams {
            scale: 1.0,
            t0_us: 0.0,
            i_t: 2.8,
            tau_us: 0.2,
            gamma_g: 0.002,
        }
    }

    #[test]
    fn round_trip_recovers_the_generating_parameters() {
        let ctx = context();
        let truth = truth();
        let free = vec![
            FreeParam {
                id: ParamId::Scale,
                guess: 1.3,
                lower: 0.2,
                upper: 5.0,
            },
            FreeParam {
                id: ParamId::TimeOffset,
                guess: 0.04,
                lower: -0.3,
                upper: 0.3,
            },
            FreeParam {
                id: ParamId::TotalIntensity,
                guess: 2.65,
                lower: 2.55,
                upper: 3.05,
            },
            FreeParam {
                id: ParamId::DetectorTau,
                guess: 0.26,
                lower: 0.05,
                upper: 0.6,
            },
        ];
        let problem = synthesize(Channel::Fwm, &truth, free, &ctx);
        let result = fit_trace(&problem).unwrap();
        assert!(result.converged, "{result:?}");
        let get = |id: ParamId| {
            result
                .estimates
                .iter()
                .find(|(p, _)| *p == id)
                .map(|(_, v)| *v)
                .unwrap()
        };
        assert!((get(ParamId::Scale) - 1.0).abs() <= 0.01);
        assert!(get(ParamId::TimeOffset).abs() <= 0.005);
        assert!((get(ParamId::TotalIntensity) - 2.8).abs() <= 0.028);
        assert!((get(ParamId::DetectorTau) - 0.2).abs() <= 0.002);
    }

    #[test]
    fn exact_guess_converges_immediately() {
        let ctx = context();
        let truth = truth();
        let free = vec![
            FreeParam {
                id: ParamId::Scale,
                guess: 1.0,
                lower: 0.2,
                upper: 5.0,
            },
            FreeParam {
                id: ParamId::DetectorTau,
                guess: 0.2,
                lower: 0.05,
                upper: 0.6,
            },
        ];
        let problem = synthesize(Channel::Fwm, &truth, free, &ctx);
        let result = fit_trace(&problem).unwrap();
        assert!(result.converged);
        assert!(result.iterations <= 2, "{}", result.iterations);
        assert!(result.ssr <= 1e-16, "{}", result.ssr);
    }

    #[test]
    fn degenerate_data_is_rejected() {
        let ctx = context();
        let mut problem = synthesize(
            Channel::Fwm,
            &truth(),
            vec![FreeParam {
                id: ParamId::Scale,
                guess: 1.0,
                lower: 0.1,
                upper: 10.0,
            }],
            &ctx,
        );
        problem.values = vec![0.0; problem.times_us.len()];
        assert!(matches!(fit_trace(&problem), Err(Error::IllPosed(_))));
        problem.values = vec![1.0; problem.times_us.len()];
        assert!(matches!(fit_trace(&problem), Err(Error::IllPosed(_))));
    }

    #[test]
    fn invalid_problems_are_rejected() {
        let ctx = context();
        let good = synthesize(
            Channel::Fwm,
            &truth(),
            vec![FreeParam {
                id: ParamId::Scale,
                guess: 1.0,
                lower: 0.1,
                upper: 10.0,
            }],
            &ctx,
        );
        let mut short = good.clone();
        short.times_us.truncate(5);
        short.values.truncate(5);
        assert!(fit_trace(&short).is_err());

        let mut unordered = good.clone();
        unordered.times_us[3] = unordered.times_us[2];
        assert!(fit_trace(&unordered).is_err());

        let mut nan = good.clone();
        nan.values[7] = f64::NAN;
        assert!(fit_trace(&nan).is_err());

        let mut bad_bounds = good.clone();
        bad_bounds.free[0].guess = 100.0;
        assert!(fit_trace(&bad_bounds).is_err());
    }

    #[test]
    fn optimum_outside_the_box_is_flagged() {
        let ctx = context();
        let truth = truth();
        let free = vec![FreeParam {
            id: ParamId::Scale,
            guess: 0.6,
            lower: 0.4,
            upper: 0.8,
        }];
        let problem = synthesize(Channel::Fwm, &truth, free, &ctx);
        let result = fit_trace(&problem).unwrap();
        assert!(result.hit_bounds);
        let (_, scale) = result.estimates[0];
        assert!((scale - 0.8).abs() <= 1e-6);
    }

    #[test]
    fn fit_is_scale_invariant_and_deterministic() {
        let ctx = context();
        let truth = truth();
        let free = vec![
            FreeParam {
                id: ParamId::Scale,
                guess: 1.4,
                lower: 0.1,
                upper: 30.0,
            },
            FreeParam {
                id: ParamId::TimeOffset,
                guess: 0.03,
                lower: -0.3,
                upper: 0.3,
            },
            FreeParam {
                id: ParamId::DetectorTau,
                guess: 0.25,
                lower: 0.05,
                upper: 0.6,
            },
        ];
        let mut problem = synthesize(Channel::Swm, &truth, free.clone(), &ctx);
        // Deterministic distortion so the minimum has a strictly positive
        // residual and the scale-covariance of the optimum is meaningful.
        let peak = problem.values.iter().cloned().fold(0.0_f64, f64::max);
        for (i, v) in problem.values.iter_mut().enumerate() {
            *v += 0.02 * peak * (7.3 * i as f64).sin();
        }
        let r1 = fit_trace(&problem).unwrap();
        let r2 = fit_trace(&problem).unwrap();
        assert_eq!(r1, r2);

        let mut scaled = problem.clone();
        for v in scaled.values.iter_mut() {
            *v *= 10.0;
        }
        scaled.free[0].guess *= 10.0;
        scaled.free[0].lower *= 10.0;
        scaled.free[0].upper *= 10.0;
        let r10 = fit_trace(&scaled).unwrap();
        assert!(
            (r10.ssr / r1.ssr - 100.0).abs() <= 1e-3 * 100.0,
            "ssr ratio {}",
            r10.ssr / r1.ssr
        );
        for ((id1, v1), (id10, v10)) in r1.estimates.iter().zip(r10.estimates.iter()) {
            assert_eq!(id1, id10);
            let expected = if *id1 == ParamId::Scale { *v1 * 10.0 } else { *v1 };
            assert!(
                (*v10 - expected).abs() <= 1e-6 * expected.abs().max(1.0),
                "{id1:?}: {v10} vs {expected}"
            );
        }
        // The fit never ends worse than its starting point.
        assert!(r1.ssr <= problem_ssr_at_guess(&problem) * (1.0 + 1e-12));
    }

    fn problem_ssr_at_guess(problem: &FitProblem<f64>) -> f64 {
        let cache = FgCache::build(problem).unwrap();
        let x: Vec<f64> = problem.free.iter().map(|p| p.guess).collect();
        let model = forward_model(problem, &cache, &x).unwrap();
        model
            .iter()
            .zip(problem.values.iter())
            .map(|(m, y)| (m - y) * (m - y))
            .sum()
    }
}
