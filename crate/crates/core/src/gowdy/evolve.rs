use nalgebra::DMatrix;
use rayon::prelude::*;

use super::GowdyState;
use crate::circle::{CircleGrid, Scheme};
use crate::symmat::{spd_inverse, symmetrize};
use crate::{Error, Result};

/// Absolute cap on the default step, so coarse grids still resolve the
/// pointwise (Kasner-like) dynamics.
pub const DEFAULT_DS_CAP: f64 = 0.05;

/// The filter runs once per this many grid spacings of elapsed `s`.
pub const FILTER_INTERVAL: f64 = 0.5;

/// Largest relative determinant correction accepted in a single step.
pub const MAX_DET_CORRECTION: f64 = 1e-6;

/// Step-size and output controls for [`evolve_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct EvolveOptions {
    /// Courant number relative to the characteristic speed `e^{−s}`.
    pub cfl: f64,
    /// Upper bound on `|Δs|`; defaults to the smaller of `Δy/2` and
    /// [`DEFAULT_DS_CAP`].
    pub ds_max: Option<f64>,
    /// Output times, strictly monotone in the direction of evolution. The
    /// last entry is the end time.
    pub outputs: Vec<f64>,
    /// Apply [`CircleGrid::filter`] to `G` and `G_s` every
    /// [`FILTER_INTERVAL`]`·Δy` of elapsed `s`. Without
    /// it, near-Nyquist modes seeded by roundoff grow through aliasing at fine
    /// resolution.
    pub filter: bool,
}

impl EvolveOptions {
    /// Outputs spaced by about `Δy` from `s0` to `s_end`.
    pub fn uniform(grid: &CircleGrid, s0: f64, s_end: f64, cfl: f64) -> Self {
        let span = s_end - s0;
        let count = ((span.abs() / grid.spacing()).ceil() as usize).max(4);
        let outputs = (1..=count).map(|i| s0 + span * i as f64 / count as f64).collect();
        Self { cfl, ds_max: None, outputs, filter: true }
    }
}

/// Sampled evolution, including the initial state.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<GowdyState>,
    /// Running `∫ e^{−2s}∮Tr(B²)dy ds` from the first sample, integrated
    /// alongside the fields.
    pub bound_integral: Vec<f64>,
    pub steps: usize,
    /// Largest relative determinant correction applied in one step.
    pub max_det_correction: f64,
    /// Largest pure-trace correction of `Ã` applied in one step.
    pub max_trace_correction: f64,
}

impl Trajectory {
    /// Wrap externally produced states; the running bound integral is
    /// recomputed by trapezoid quadrature.
    pub fn from_states(states: Vec<GowdyState>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InsufficientSamples { needed: 1, got: 0 });
        }
        let s: Vec<f64> = states.iter().map(GowdyState::s).collect();
        let f = states.iter().map(bound_integrand).collect::<Result<Vec<_>>>()?;
        let bound_integral = crate::quad::cumulative_trapezoid(&s, &f);
        Ok(Self { states, bound_integral, steps: 0, max_det_correction: 0.0, max_trace_correction: 0.0 })
    }

    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(GowdyState::s).collect()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Every `stride`-th sample, always keeping the last one.
    pub fn subsample(&self, stride: usize) -> Self {
        let stride = stride.max(1);
        let m = self.states.len();
        let mut idx: Vec<usize> = (0..m).step_by(stride).collect();
        if *idx.last().unwrap() != m - 1 {
            idx.push(m - 1);
        }
        Self {
            states: idx.iter().map(|&i| self.states[i].clone()).collect(),
            bound_integral: idx.iter().map(|&i| self.bound_integral[i]).collect(),
            steps: self.steps,
            max_det_correction: self.max_det_correction,
            max_trace_correction: self.max_trace_correction,
        }
    }

    pub fn last(&self) -> &GowdyState {
        self.states.last().expect("trajectory is nonempty")
    }
}

fn bound_integrand(state: &GowdyState) -> Result<f64> {
    let b = state.connection()?;
    let f: Vec<f64> = b.iter().map(|b| (b * b).trace()).collect();
    Ok((-2.0 * state.s()).exp() * state.grid().integrate(&f))
}

/// Largest stable Courant number of classical RK4 for the scheme.
pub fn cfl_limit(scheme: Scheme) -> f64 {
    let rk4_imag = 2.0 * 2f64.sqrt();
    let max_symbol = match scheme {
        Scheme::Spectral => std::f64::consts::PI,
        // max over θ of (8 sin θ − sin 2θ)/6
        Scheme::Fd4 => 1.372_380_7,
    };
    rk4_imag / max_symbol
}

fn sym_filter(grid: &CircleGrid, values: &mut [DMatrix<f64>]) {
    let n = values[0].nrows();
    let mut line = vec![0.0; values.len()];
    for i in 0..n {
        for j in i..n {
            for (l, m) in line.iter_mut().zip(values.iter()) {
                *l = m[(i, j)];
            }
            let f = grid.filter(&line).expect("grid and field sizes agree");
            for (o, v) in values.iter_mut().zip(f) {
                o[(i, j)] = v;
                o[(j, i)] = v;
            }
        }
    }
}

/// Derivative of a symmetric matrix field, differentiating the upper
/// triangle only.
fn sym_derivative(grid: &CircleGrid, values: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    let n = values[0].nrows();
    let mut out = vec![DMatrix::zeros(n, n); values.len()];
    let mut line = vec![0.0; values.len()];
    for i in 0..n {
        for j in i..n {
            for (l, m) in line.iter_mut().zip(values) {
                *l = m[(i, j)];
            }
            let d = grid.derivative(&line).expect("grid and field sizes agree");
            for (o, v) in out.iter_mut().zip(d) {
                o[(i, j)] = v;
                o[(j, i)] = v;
            }
        }
    }
    out
}

struct Rates {
    g: Vec<DMatrix<f64>>,
    pi: Vec<DMatrix<f64>>,
    bound: f64,
}

/// `G_s = Π`, `Π_s = ΠG⁻¹Π + e^{−2s}(G_yy − G_yG⁻¹G_y)` and the bound
/// integrand `e^{−2s}∮Tr(B²)dy`.
fn rates(grid: &CircleGrid, s: f64, g: &[DMatrix<f64>], pi: &[DMatrix<f64>]) -> Result<Rates> {
    let gy = sym_derivative(grid, g);
    let gyy = sym_derivative(grid, &gy);
    let damp = (-2.0 * s).exp();
    let per_point: Vec<Result<(DMatrix<f64>, f64)>> = g
        .par_iter()
        .zip(pi.par_iter())
        .zip(gy.par_iter().zip(gyy.par_iter()))
        .enumerate()
        .map(|(i, ((g, p), (gy, gyy)))| {
            let chol = g.clone().cholesky().ok_or_else(|| Error::PositivityLost {
                min_eigenvalue: f64::NAN,
                threshold: 0.0,
                location: Some(format!("s = {s}, y = {}", i as f64 * grid.spacing())),
            })?;
            let ginv_pi = chol.solve(p);
            let b = chol.solve(gy);
            let ps = p * &ginv_pi + (gyy - gy * &b) * damp;
            Ok((symmetrize(&ps), (&b * &b).trace()))
        })
        .collect();
    let mut pis = Vec::with_capacity(g.len());
    let mut b2 = Vec::with_capacity(g.len());
    for r in per_point {
        let (p, t) = r?;
        pis.push(p);
        b2.push(t);
    }
    Ok(Rates { g: pi.to_vec(), pi: pis, bound: damp * grid.integrate(&b2) })
}

fn axpy(base: &[DMatrix<f64>], h: f64, rate: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    base.iter().zip(rate).map(|(b, r)| b + r * h).collect()
}

/// Evolve to `s_end` with outputs spaced by about `Δy`.
pub fn evolve(state: &GowdyState, s_end: f64, cfl: f64) -> Result<Trajectory> {
    evolve_with(state, &EvolveOptions::uniform(state.grid(), state.s(), s_end, cfl))
}

/// Method-of-lines evolution with classical RK4 in `s`. Steps are chosen so
/// that each output time is hit exactly. After every step `G` is rescaled so
/// that `det G = e^{−2s}` holds pointwise and `Ã` is shifted by a multiple of
/// the identity so that `tr Ã = −2`; the fields are also filtered at a fixed
/// cadence when requested.
pub fn evolve_with(state: &GowdyState, opts: &EvolveOptions) -> Result<Trajectory> {
    let grid = state.grid().clone();
    let limit = cfl_limit(grid.scheme());
    if !(opts.cfl > 0.0) || opts.cfl > limit {
        return Err(Error::Cfl { step: opts.cfl, limit });
    }
    let s_end = *opts.outputs.last().ok_or(Error::InsufficientSamples { needed: 1, got: 0 })?;
    let dir = (s_end - state.s()).signum();
    if dir == 0.0 {
        return Err(Error::InvalidInput("end time equals start time".into()));
    }
    let mut prev = state.s();
    for &o in &opts.outputs {
        if !((o - prev) * dir > 0.0) {
            return Err(Error::InvalidInput("output times must move monotonically away from the start".into()));
        }
        prev = o;
    }
    let dy = grid.spacing();
    let ds_max = opts.ds_max.unwrap_or((0.5 * dy).min(DEFAULT_DS_CAP));
    let n = state.dim() as f64;

    let mut s = state.s();
    let mut g = state.g().to_vec();
    let mut pi = state.lowered_velocity().to_vec();
    let mut bound = 0.0;
    let mut states = vec![state.clone()];
    let mut bound_integral = vec![0.0];
    let mut steps = 0usize;
    let mut max_corr = 0.0f64;
    let mut max_trace = 0.0f64;
    let mut since_filter = 0.0f64;

    for &target in &opts.outputs {
        let gap = target - s;
        // the step bound is evaluated at the earlier end of the interval, where
        // the characteristic speed e^{−s} is largest
        let s_lo = s.min(target);
        let allowed = (opts.cfl * dy * s_lo.exp()).min(ds_max);
        let count = (gap.abs() / allowed).ceil().max(1.0) as usize;
        let h = gap / count as f64;
        for k in 0..count {
            let k1 = rates(&grid, s, &g, &pi)?;
            let k2 = rates(&grid, s + 0.5 * h, &axpy(&g, 0.5 * h, &k1.g), &axpy(&pi, 0.5 * h, &k1.pi))?;
            let k3 = rates(&grid, s + 0.5 * h, &axpy(&g, 0.5 * h, &k2.g), &axpy(&pi, 0.5 * h, &k2.pi))?;
            let k4 = rates(&grid, s + h, &axpy(&g, h, &k3.g), &axpy(&pi, h, &k3.pi))?;
            for i in 0..g.len() {
                g[i] += (&k1.g[i] + &k2.g[i] * 2.0 + &k3.g[i] * 2.0 + &k4.g[i]) * (h / 6.0);
                pi[i] += (&k1.pi[i] + &k2.pi[i] * 2.0 + &k3.pi[i] * 2.0 + &k4.pi[i]) * (h / 6.0);
            }
            bound += (k1.bound + 2.0 * k2.bound + 2.0 * k3.bound + k4.bound) * (h / 6.0);
            s = if k + 1 == count { target } else { s + h };
            steps += 1;
            // filtering on a fixed cadence in s keeps its damping per unit
            // time independent of the step size
            since_filter += h.abs();
            if opts.filter && since_filter >= FILTER_INTERVAL * dy * (1.0 - 1e-9) {
                sym_filter(&grid, &mut g);
                sym_filter(&grid, &mut pi);
                since_filter = 0.0;
            }

            let det_target = (-2.0 * s).exp();
            for (i, (gm, pm)) in g.iter_mut().zip(pi.iter_mut()).enumerate() {
                let det = gm.determinant();
                if !(det > 0.0) {
                    return Err(Error::PositivityLost {
                        min_eigenvalue: f64::NAN,
                        threshold: 0.0,
                        location: Some(format!("s = {s}, y = {}", i as f64 * dy)),
                    });
                }
                let c = (det_target / det).powf(1.0 / n);
                let corr = (c - 1.0).abs();
                if corr > MAX_DET_CORRECTION {
                    return Err(Error::DeterminantDrift { correction: corr, s });
                }
                max_corr = max_corr.max(corr);
                *gm = symmetrize(gm) * c;
                *pm = symmetrize(pm) * c;
                // tr Ã = ∂_s ln det G = −2. The error is fed by the discrete
                // tr(G⁻¹G_y), so it measures spatial resolution rather than
                // the step and is logged but never fatal.
                let excess = ((spd_inverse(gm) * &*pm).trace() + 2.0) / n;
                max_trace = max_trace.max(excess.abs());
                *pm -= &*gm * excess;
            }
        }
        let out = GowdyState::from_parts_unchecked(grid.clone(), s, g.clone(), pi.clone());
        // full positivity test at every output
        out.metric().map_err(|e| match e {
            Error::PositivityLost { min_eigenvalue, threshold, location } => Error::PositivityLost {
                min_eigenvalue,
                threshold,
                location: Some(format!("s = {s}, {}", location.unwrap_or_default())),
            },
            other => other,
        })?;
        states.push(out);
        bound_integral.push(bound);
    }
    Ok(Trajectory { states, bound_integral, steps, max_det_correction: max_corr, max_trace_correction: max_trace })
}
