use super::{FlowSource, MultiWarpedFlow};
use crate::{Error, Result};

/// Initial data must satisfy the Hamiltonian constraint to this tolerance,
/// relative to `H²`.
pub const INITIAL_CONSTRAINT_TOL: f64 = 1e-9;
/// Initial `H` must equal `−n/t` to this relative tolerance.
pub const INITIAL_HUBBLE_TOL: f64 = 1e-10;
/// Evolution aborts when the constraint drifts past this, relative to `H²`.
pub const MAX_CONSTRAINT_DRIFT: f64 = 1e-6;

/// Flows at every step of an evolution, in the order they were computed.
#[derive(Debug, Clone, PartialEq)]
pub struct CmcTrajectory {
    flows: Vec<MultiWarpedFlow>,
}

impl CmcTrajectory {
    /// Trajectory from flows sampled at strictly monotone times.
    pub fn new(flows: Vec<MultiWarpedFlow>) -> Result<Self> {
        if flows.len() < 2 {
            return Err(Error::InsufficientSamples { needed: 2, got: flows.len() });
        }
        let shape = |f: &MultiWarpedFlow| f.blocks.iter().map(|b| (b.dim, b.epsilon)).collect::<Vec<_>>();
        if flows.iter().any(|f| shape(f) != shape(&flows[0])) {
            return Err(Error::Shape("all flows in a trajectory need the same blocks".into()));
        }
        let up = flows[1].t > flows[0].t;
        if !flows.windows(2).all(|w| (w[1].t > w[0].t) == up && w[1].t != w[0].t) {
            return Err(Error::InvalidInput("trajectory times must be strictly monotone".into()));
        }
        Ok(Self { flows })
    }

    pub fn flows(&self) -> &[MultiWarpedFlow] {
        &self.flows
    }

    pub fn len(&self) -> usize {
        self.flows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flows.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.flows.iter().map(|f| f.t).collect()
    }

    pub fn first(&self) -> &MultiWarpedFlow {
        &self.flows[0]
    }

    pub fn last(&self) -> &MultiWarpedFlow {
        self.flows.last().expect("trajectories are nonempty")
    }

    /// The same samples ordered by increasing `t`.
    pub fn increasing(&self) -> Self {
        let mut flows = self.flows.clone();
        if flows[0].t > flows[1].t {
            flows.reverse();
        }
        Self { flows }
    }

    pub fn max_constraint_drift(&self) -> f64 {
        self.flows.iter().map(MultiWarpedFlow::constraint_drift).fold(0.0, f64::max)
    }

    pub fn max_hubble_drift(&self) -> f64 {
        self.flows.iter().map(MultiWarpedFlow::hubble_drift).fold(0.0, f64::max)
    }
}

/// Cubic Hermite interpolation in `ln t`, using the evolution equations for
/// the slopes.
impl FlowSource for CmcTrajectory {
    fn flow_at(&self, t: f64) -> Result<MultiWarpedFlow> {
        self.check_domain(t)?;
        let inc = self.flows[0].t < self.flows[1].t;
        let pos = if inc {
            self.flows.partition_point(|f| f.t < t)
        } else {
            self.flows.partition_point(|f| f.t > t)
        };
        if pos < self.flows.len() && self.flows[pos].t == t {
            return Ok(self.flows[pos].clone());
        }
        let (i, j) = if inc { (pos - 1, pos) } else { (pos, pos - 1) };
        let (f0, f1) = (&self.flows[i], &self.flows[j]);
        let (s0, s1) = (f0.t.ln(), f1.t.ln());
        let h = s1 - s0;
        let x = (t.ln() - s0) / h;
        let (h00, h10, h01, h11) =
            (2.0 * x.powi(3) - 3.0 * x * x + 1.0, x.powi(3) - 2.0 * x * x + x, -2.0 * x.powi(3) + 3.0 * x * x, x.powi(3) - x * x);
        let (r0, r1) = (f0.rates(), f1.rates());
        let blocks = f0
            .blocks
            .iter()
            .zip(&f1.blocks)
            .enumerate()
            .map(|(k, (b0, b1))| {
                let (da0, dk0) = (r0[k].0 * f0.t, r0[k].1 * f0.t);
                let (da1, dk1) = (r1[k].0 * f1.t, r1[k].1 * f1.t);
                let mut b = *b0;
                b.scale = h00 * b0.scale + h10 * h * da0 + h01 * b1.scale + h11 * h * da1;
                b.kappa = h00 * b0.kappa + h10 * h * dk0 + h01 * b1.kappa + h11 * h * dk1;
                b
            })
            .collect();
        MultiWarpedFlow::new(blocks, t)
    }

    fn domain(&self) -> (f64, f64) {
        let (a, b) = (self.first().t, self.last().t);
        (a.min(b), a.max(b))
    }
}

/// Integrates `aᵢ′ = −Lκᵢaᵢ`, `κᵢ′ = LHκᵢ + Lεᵢ(nᵢ−1)/aᵢ²` with the
/// Hubble-CMC lapse from `flow.t` to `t_end` by classical RK4, in `steps`
/// equal steps of `ln t`.
///
/// `H = −n/t` is not imposed; it holds because `H′ = L(H² + R) = L|K|² = n/t²`
/// on the constraint surface, so the recorded Hubble drift doubles as a check
/// of the lapse.
///
/// No constraint projection is applied. Off the constraint surface the cone
/// has a mode growing like `t^{−(n+1)}` toward `t → 0`, so truncation errors
/// are amplified by about `10^{n+1}` per decade; the cone needs roughly 2000
/// steps per decade for `10⁻⁸`.
pub fn evolve_cmc(flow: &MultiWarpedFlow, t_end: f64, steps: usize) -> Result<CmcTrajectory> {
    if steps == 0 || !(t_end > 0.0) || t_end == flow.t {
        return Err(Error::InvalidInput(format!("need steps ≥ 1 and t_end > 0 distinct from {}", flow.t)));
    }
    let drift = flow.constraint_drift();
    if drift > INITIAL_CONSTRAINT_TOL {
        return Err(Error::Hypothesis(format!("initial Hamiltonian constraint violated by {drift:.3e}·H²")));
    }
    if flow.hubble_drift() > INITIAL_HUBBLE_TOL {
        return Err(Error::Hypothesis(format!(
            "initial data not in Hubble gauge: H = {}, −n/t = {}",
            flow.mean_curvature(),
            -(flow.dim() as f64) / flow.t
        )));
    }
    let nb = flow.blocks.len();
    let rebuild = |y: &[f64], t: f64| -> Result<MultiWarpedFlow> {
        let mut f = flow.clone();
        f.t = t;
        for (k, b) in f.blocks.iter_mut().enumerate() {
            b.scale = y[k];
            b.kappa = y[nb + k];
            if !(b.scale > 0.0 && b.scale.is_finite() && b.kappa.is_finite()) {
                return Err(Error::ScaleCollapse { block: k, t });
            }
        }
        Ok(f)
    };
    // d/d(ln t) of (a, κ)
    let rhs = |y: &[f64], t: f64| -> Result<Vec<f64>> {
        let f = rebuild(y, t)?;
        let r = f.rates();
        let mut out = vec![0.0; 2 * nb];
        for k in 0..nb {
            out[k] = t * r[k].0;
            out[nb + k] = t * r[k].1;
        }
        Ok(out)
    };
    let s0 = flow.t.ln();
    let h = (t_end.ln() - s0) / steps as f64;
    let mut y: Vec<f64> = flow.blocks.iter().map(|b| b.scale).chain(flow.blocks.iter().map(|b| b.kappa)).collect();
    let mut flows = Vec::with_capacity(steps + 1);
    flows.push(flow.clone());
    let axpy = |y: &[f64], k: &[f64], c: f64| -> Vec<f64> { y.iter().zip(k).map(|(a, b)| a + c * b).collect() };
    for i in 0..steps {
        let s = s0 + h * i as f64;
        let t = s.exp();
        let tm = (s + 0.5 * h).exp();
        let t1 = if i + 1 == steps { t_end } else { (s0 + h * (i + 1) as f64).exp() };
        let k1 = rhs(&y, t)?;
        let k2 = rhs(&axpy(&y, &k1, 0.5 * h), tm)?;
        let k3 = rhs(&axpy(&y, &k2, 0.5 * h), tm)?;
        let k4 = rhs(&axpy(&y, &k3, h), t1)?;
        for j in 0..y.len() {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        let f = rebuild(&y, t1)?;
        let drift = f.constraint_drift();
        if !(drift <= MAX_CONSTRAINT_DRIFT) {
            return Err(Error::ConstraintDrift { drift, t: t1 });
        }
        flows.push(f);
    }
    CmcTrajectory::new(flows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmc::{make_family, FamilySpec};

    #[test]
    fn cone_stays_self_similar() {
        let fam = make_family(&FamilySpec::Cone { dim: 3, vol0: 1.0 }).unwrap();
        let tr = evolve_cmc(&fam.flow_at(1.0).unwrap(), 0.1, 2000).unwrap();
        for f in tr.flows() {
            assert!((f.blocks[0].scale - f.t).abs() < 1e-8 * f.t);
            assert!((f.lapse() - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn hermite_interpolation_tracks_kasner() {
        let fam = make_family(&FamilySpec::Kasner { m: None, exponents: Some(vec![2.0 / 3.0, 2.0 / 3.0, -1.0 / 3.0]) }).unwrap();
        let tr = evolve_cmc(&fam.flow_at(1.0).unwrap(), 0.01, 400).unwrap();
        let t = 0.0377;
        let a = tr.flow_at(t).unwrap();
        let b = fam.flow_at(t).unwrap();
        for (x, y) in a.blocks.iter().zip(&b.blocks) {
            assert!((x.scale - y.scale).abs() < 1e-8 * y.scale);
        }
        assert!(tr.flow_at(2.0).is_err());
    }

    #[test]
    fn off_constraint_data_is_rejected() {
        let mut f = make_family(&FamilySpec::Cone { dim: 3, vol0: 1.0 }).unwrap().flow_at(1.0).unwrap();
        f.blocks[0].scale *= 1.01;
        assert!(matches!(evolve_cmc(&f, 0.5, 10), Err(Error::Hypothesis(_))));
    }
}
