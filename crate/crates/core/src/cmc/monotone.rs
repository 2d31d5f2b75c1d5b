use super::{CmcTrajectory, FlowSource, MultiWarpedFlow, Rescaled};
use crate::quad::{sampled_derivative, GaussLegendre};
use crate::{Certificate, Error, Result, Verdict};

/// Relative slack allowed between adjacent samples of a monotone quantity.
pub const MONOTONE_TOL: f64 = 1e-10;
/// `R` counts as nonpositive up to this multiple of `H²`.
pub const CURVATURE_SIGN_TOL: f64 = 1e-14;
/// A Richardson-extrapolated `dvol₀` below this fraction of the first sample
/// is reported as zero.
pub const DVOL0_ZERO_TOL: f64 = 1e-6;
/// Rescaling-limit integrals below this count as vanished.
pub const KASNER_LIMIT_TOL: f64 = 1e-8;

fn nonpositive_curvature(f: &MultiWarpedFlow) -> bool {
    let h = f.mean_curvature();
    f.scalar_curvature() <= CURVATURE_SIGN_TOL * h * h
}

/// `V_n = (−H)ⁿvol` and `V_1 = (−H)vol` along a trajectory, with their
/// identities `dV_n/dt = −n(−H)^{n−1}∫|K⁰|²L dvol` and
/// `dV_1/dt = −∫LR dvol` checked by five-point differences.
///
/// `V_n` must be nonincreasing. `V_1` must be nondecreasing when `R ≤ 0` at
/// every sample; otherwise that part is vacuous. Identity residuals are
/// measured against `V/t` and must stay below `residual_tol`.
pub fn monotone_quantities(trajectory: &CmcTrajectory, residual_tol: f64) -> Result<Certificate> {
    if trajectory.len() < 5 {
        return Err(Error::InsufficientSamples { needed: 5, got: trajectory.len() });
    }
    let tr = trajectory.increasing();
    let flows = tr.flows();
    let n = flows[0].dim() as f64;
    let t = tr.times();
    let vn: Vec<f64> = flows.iter().map(MultiWarpedFlow::v_n).collect();
    let v1: Vec<f64> = flows.iter().map(MultiWarpedFlow::v_1).collect();
    let rhs_n: Vec<f64> = flows
        .iter()
        .map(|f| -n * (-f.mean_curvature()).powi(n as i32 - 1) * f.traceless_squared() * f.lapse() * f.volume())
        .collect();
    let rhs_1: Vec<f64> = flows.iter().map(|f| -f.lapse() * f.scalar_curvature() * f.volume()).collect();
    let dn = sampled_derivative(&t, &vn, 5);
    let d1 = sampled_derivative(&t, &v1, 5);
    let residual = |d: &[f64], rhs: &[f64], v: &[f64]| {
        (0..t.len()).map(|i| (d[i] - rhs[i]).abs() * t[i] / v[i].abs().max(f64::MIN_POSITIVE)).fold(0.0, f64::max)
    };
    let vn_residual = residual(&dn, &rhs_n, &vn);
    let v1_residual = residual(&d1, &rhs_1, &v1);
    let vn_increase = vn.windows(2).map(|w| (w[1] - w[0]) / w[0].abs()).fold(f64::NEG_INFINITY, f64::max);
    let v1_decrease = v1.windows(2).map(|w| (w[0] - w[1]) / w[0].abs()).fold(f64::NEG_INFINITY, f64::max);
    let variation = |v: &[f64]| {
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)));
        (hi - lo) / hi.abs()
    };
    let curvature_nonpositive = flows.iter().all(nonpositive_curvature);
    let vn_ok = vn_increase <= MONOTONE_TOL;
    let v1_ok = !curvature_nonpositive || v1_decrease <= MONOTONE_TOL;
    let residual_ok = vn_residual <= residual_tol && (!curvature_nonpositive || v1_residual <= residual_tol);
    let r_max = flows.iter().map(|f| f.scalar_curvature()).fold(f64::NEG_INFINITY, f64::max);
    let mut cert = Certificate::new("cmc-monotone", Verdict::from_bool(vn_ok && v1_ok && residual_ok))
        .with_tolerance(residual_tol)
        .with_metric("vn_variation", variation(&vn))
        .with_metric("v1_variation", variation(&v1))
        .with_metric("vn_max_increase", vn_increase)
        .with_metric("v1_max_decrease", v1_decrease)
        .with_metric("vn_residual", vn_residual)
        .with_metric("v1_residual", v1_residual)
        .with_metric("r_max", r_max)
        .with_metric("v1_applies", if curvature_nonpositive { 1.0 } else { 0.0 })
        .with_samples("t", t)
        .with_samples("V_n", vn)
        .with_samples("V_1", v1)
        .with_samples("dV_n_rhs", rhs_n)
        .with_samples("dV_1_rhs", rhs_1)
        .with_samples("L", flows.iter().map(MultiWarpedFlow::lapse).collect())
        .with_samples("R", flows.iter().map(MultiWarpedFlow::scalar_curvature).collect());
    if !curvature_nonpositive {
        cert = cert.with_note("R > 0 somewhere: V_1 monotonicity not asserted");
    }
    Ok(cert)
}

/// `L ≤ 1` at every sample and `L ≥ 1/n` at every sample with `R ≤ 0`, up
/// to `tol`.
///
/// For homogeneous data both bounds are algebraic: `L ≤ n²/(t²H²)` by
/// Cauchy–Schwarz and `L ≥ 1/n` iff `|K|² ≤ H²`. Violations on an evolved
/// trajectory therefore measure its Hubble-gauge error, and `tol` should be
/// chosen above that.
pub fn lapse_bounds(flows: &[MultiWarpedFlow], tol: f64) -> Certificate {
    let mut upper = 0.0f64;
    let mut lower = 0.0f64;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut checked_lower = 0usize;
    for f in flows {
        let l = f.lapse();
        lo = lo.min(l);
        hi = hi.max(l);
        upper = upper.max(l - 1.0);
        if nonpositive_curvature(f) {
            checked_lower += 1;
            lower = lower.max(1.0 / f.dim() as f64 - l);
        }
    }
    Certificate::new("cmc-lapse-bounds", Verdict::from_bool(upper <= tol && lower <= tol))
        .with_tolerance(tol)
        .with_metric("lapse_min", lo)
        .with_metric("lapse_max", hi)
        .with_metric("upper_violation", upper)
        .with_metric("lower_violation", lower)
        .with_metric("lower_bound_samples", checked_lower as f64)
}

/// Compares `∫(−t²R)L(vol/t)dt/t` over the trajectory with the change of
/// `V_1` between its ends, relative to `max |V_1|`. The integral uses
/// four-point Gauss–Legendre in `ln t` on each step of the interpolated
/// trajectory.
pub fn v1_integral_identity(trajectory: &CmcTrajectory, tol: f64) -> Result<Certificate> {
    let tr = trajectory.increasing();
    let gl = GaussLegendre::new(4);
    let integrand = |s: f64| -> Result<f64> {
        let t = s.exp();
        let f = tr.flow_at(t.clamp(tr.first().t, tr.last().t))?;
        Ok(-t * t * f.scalar_curvature() * f.lapse() * f.volume() / t)
    };
    let mut total = 0.0;
    for w in tr.flows().windows(2) {
        let (a, b) = (w[0].t.ln(), w[1].t.ln());
        let mut err = None;
        total += gl.integrate(a, b, 1, |s| {
            integrand(s).unwrap_or_else(|e| {
                err = Some(e);
                0.0
            })
        });
        if let Some(e) = err {
            return Err(e);
        }
    }
    let dv = tr.last().v_1() - tr.first().v_1();
    let scale = tr.flows().iter().map(|f| f.v_1().abs()).fold(0.0, f64::max);
    let rel = (total - dv).abs() / scale.max(f64::MIN_POSITIVE);
    Ok(Certificate::new("cmc-v1-integral", Verdict::from_bool(rel <= tol))
        .with_tolerance(tol)
        .with_metric("integral", total)
        .with_metric("v1_change", dv)
        .with_metric("relative_mismatch", rel))
}

/// `dvol₀` mass from Richardson extrapolation of `(−H)vol` on `t_k = t₀2^{−k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dvol0 {
    pub value: f64,
    pub zero: bool,
    pub times: Vec<f64>,
    pub masses: Vec<f64>,
}

/// Samples `(−H)vol` at `t₀2^{−k}` for `k = 0..=levels` and extrapolates to
/// `t → 0` with first-order Richardson. Needs `R ≤ 0` at every sample and
/// `t₀2^{−levels} ≤ 10⁻⁴t₀`; a sample sequence that increases toward `t → 0`
/// contradicts pointwise monotonicity and is returned as an error.
pub fn dvol0_limit(source: &impl FlowSource, t0: f64, levels: usize) -> Result<Dvol0> {
    if levels < 14 {
        return Err(Error::InvalidInput(format!("dvol0 needs at least 14 halvings, got {levels}")));
    }
    let mut times = Vec::with_capacity(levels + 1);
    let mut masses = Vec::with_capacity(levels + 1);
    for k in 0..=levels {
        let t = t0 * 0.5f64.powi(k as i32);
        let f = source.flow_at(t)?;
        if !nonpositive_curvature(&f) {
            return Err(Error::Hypothesis(format!("R = {} > 0 at t = {t}; dvol0 needs R ≤ 0", f.scalar_curvature())));
        }
        times.push(t);
        masses.push(f.volume_density() * f.reference_volume());
    }
    if let Some(k) = masses.windows(2).position(|w| w[1] > w[0] * (1.0 + MONOTONE_TOL)) {
        return Err(Error::Hypothesis(format!(
            "(−H)vol increases toward t → 0 between t = {} and {}: not monotone",
            times[k],
            times[k + 1]
        )));
    }
    let m = masses.len();
    let value = 2.0 * masses[m - 1] - masses[m - 2];
    let zero = value.abs() <= DVOL0_ZERO_TOL * masses[0];
    Ok(Dvol0 { value: if zero { 0.0 } else { value }, zero, times, masses })
}

/// `∫_{Λ⁻¹}^{Λ} |L_s − 1/n| du`, `∫ ||K_s|² − n²/u²| du` and `∫ |R_s| du`,
/// each times `mass`.
pub fn kasner_limit_integrals(source: &impl FlowSource, lambda: f64, s: f64, mass: f64) -> Result<[f64; 3]> {
    if !(lambda > 1.0) {
        return Err(Error::InvalidInput(format!("Λ must exceed 1, got {lambda}")));
    }
    let rescaled = Rescaled::new(source, s)?;
    let gl = GaussLegendre::new(8);
    let mut out = [0.0; 3];
    let mut err = None;
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = mass
            * gl.integrate(1.0 / lambda, lambda, 16, |u| match rescaled.flow_at(u) {
                Ok(f) => {
                    let n = f.dim() as f64;
                    match k {
                        0 => (f.lapse() - 1.0 / n).abs(),
                        1 => (f.k_squared() - n * n / (u * u)).abs(),
                        _ => f.scalar_curvature().abs(),
                    }
                }
                Err(e) => {
                    err = Some(e);
                    0.0
                }
            });
    }
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// Evaluates the three rescaling-limit integrals for each scale in `scales`
/// (taken as decreasing). With `dvol0 = 0` they carry no information and the
/// verdict is vacuous.
pub fn kasner_limit_check(source: &impl FlowSource, dvol0: f64, lambda: f64, scales: &[f64]) -> Result<Certificate> {
    if scales.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    for &s in scales {
        for u in [1.0 / lambda, 1.0, lambda] {
            let f = Rescaled::new(source, s)?.flow_at(u)?;
            if !nonpositive_curvature(&f) {
                return Err(Error::Hypothesis(format!("R > 0 at t = {}", s * u)));
            }
        }
    }
    let mass = if dvol0 > 0.0 { dvol0 } else { 1.0 };
    let mut series = [Vec::new(), Vec::new(), Vec::new()];
    for &s in scales {
        let v = kasner_limit_integrals(source, lambda, s, mass)?;
        for k in 0..3 {
            series[k].push(v[k]);
        }
    }
    let verdict = if dvol0 <= 0.0 {
        Verdict::Vacuous
    } else if series.iter().all(|v| *v.last().unwrap() <= KASNER_LIMIT_TOL) {
        Verdict::Pass
    } else if series.iter().all(|v| v.windows(2).all(|w| w[1] <= w[0]) && *v.last().unwrap() <= 0.1 * v[0]) {
        Verdict::ConvergentSoFar
    } else {
        Verdict::Fail
    };
    let [l, k, r] = series;
    let mut cert = Certificate::new("cmc-kasner-limit", verdict)
        .with_tolerance(KASNER_LIMIT_TOL)
        .with_metric("dvol0", dvol0)
        .with_metric("lambda", lambda)
        .with_metric("lapse_integral", *l.last().unwrap())
        .with_metric("k_integral", *k.last().unwrap())
        .with_metric("r_integral", *r.last().unwrap())
        .with_samples("s", scales.to_vec())
        .with_samples("lapse_integral", l)
        .with_samples("k_integral", k)
        .with_samples("r_integral", r);
    if dvol0 <= 0.0 {
        cert = cert.with_note("dvol0 = 0: integrals evaluated against unit mass, no limit asserted");
    }
    Ok(cert)
}
