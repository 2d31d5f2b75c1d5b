use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{Block, MatrixFlow, MultiWarpedFlow};
use crate::{Error, Result};

/// Anything that yields a homogeneous flow at a Hubble time.
pub trait FlowSource {
    fn flow_at(&self, t: f64) -> Result<MultiWarpedFlow>;

    /// Open or closed range of Hubble times on which `flow_at` is defined.
    fn domain(&self) -> (f64, f64);

    fn check_domain(&self, t: f64) -> Result<()> {
        let (lo, hi) = self.domain();
        if t >= lo && t <= hi && t > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("t = {t} outside the domain [{lo}, {hi}]")))
        }
    }
}

/// Parameters of the closed-form families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    /// `−dt² + t²ĥ` over a hyperbolic space form of dimension `dim ≥ 2`.
    Cone {
        dim: usize,
        #[serde(default = "unit")]
        vol0: f64,
    },
    /// Cone of dimension `cone_dim` times a flat torus of dimension
    /// `flat_dim`.
    ConeTorus {
        cone_dim: usize,
        flat_dim: usize,
        #[serde(default = "unit")]
        cone_vol0: f64,
        #[serde(default = "unit")]
        flat_vol0: f64,
    },
    /// Schwarzschild interior with mass `m`, quotiented along `r` with the
    /// given period.
    KantowskiSachs {
        mass: f64,
        #[serde(default = "two_pi")]
        period: f64,
    },
    /// `−dt²/n² + dxᵀt^{2M}dx`; give either `m` or its `exponents`.
    Kasner {
        #[serde(default)]
        m: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        exponents: Option<Vec<f64>>,
    },
}

fn unit() -> f64 {
    1.0
}

fn two_pi() -> f64 {
    2.0 * PI
}

/// Tolerance on `TrM = TrM² = 1` when building a Kasner family.
pub const KASNER_PARAM_TOL: f64 = 1e-10;

/// A validated closed-form family, evaluated in Hubble time.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Cone { dim: usize, vol0: f64 },
    ConeTorus { cone_dim: usize, flat_dim: usize, cone_vol0: f64, flat_vol0: f64 },
    KantowskiSachs { mass: f64, period: f64 },
    Kasner { m: DMatrix<f64>, exponents: Vec<f64>, frame: DMatrix<f64> },
}

pub fn make_family(spec: &FamilySpec) -> Result<Family> {
    let positive = |name: &str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::InvalidInput(format!("{name} must be positive, got {v}")))
        }
    };
    match spec {
        FamilySpec::Cone { dim, vol0 } => {
            if *dim < 2 {
                return Err(Error::InvalidInput("cone dimension must be at least 2".into()));
            }
            Ok(Family::Cone { dim: *dim, vol0: positive("vol0", *vol0)? })
        }
        FamilySpec::ConeTorus { cone_dim, flat_dim, cone_vol0, flat_vol0 } => {
            if *cone_dim < 2 || *flat_dim < 1 {
                return Err(Error::InvalidInput("cone_dim ≥ 2 and flat_dim ≥ 1 required".into()));
            }
            Ok(Family::ConeTorus {
                cone_dim: *cone_dim,
                flat_dim: *flat_dim,
                cone_vol0: positive("cone_vol0", *cone_vol0)?,
                flat_vol0: positive("flat_vol0", *flat_vol0)?,
            })
        }
        FamilySpec::KantowskiSachs { mass, period } => {
            Ok(Family::KantowskiSachs { mass: positive("mass", *mass)?, period: positive("period", *period)? })
        }
        FamilySpec::Kasner { m, exponents } => {
            let m = match (m, exponents) {
                (Some(rows), None) => {
                    let n = rows.len();
                    if n == 0 || rows.iter().any(|r| r.len() != n) {
                        return Err(Error::Shape("Kasner M must be a nonempty square matrix".into()));
                    }
                    DMatrix::from_fn(n, n, |i, j| rows[i][j])
                }
                (None, Some(p)) if !p.is_empty() => DMatrix::from_diagonal(&p.clone().into()),
                _ => return Err(Error::InvalidInput("give exactly one of `m` and `exponents`".into())),
            };
            kasner(m)
        }
    }
}

fn kasner(m: DMatrix<f64>) -> Result<Family> {
    let asym = (&m - m.transpose()).abs().max();
    if asym > 1e-12 {
        return Err(Error::InvalidInput(format!("Kasner M is not symmetric (defect {asym:.3e})")));
    }
    let tr = m.trace();
    let tr2 = (&m * &m).trace();
    if (tr - 1.0).abs() > KASNER_PARAM_TOL || (tr2 - 1.0).abs() > KASNER_PARAM_TOL {
        return Err(Error::InvalidInput(format!("Kasner constraint violated: TrM = {tr}, TrM² = {tr2}")));
    }
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let exponents = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let frame = DMatrix::from_fn(m.nrows(), m.nrows(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(Family::Kasner { m, exponents, frame })
}

impl Family {
    pub fn dim(&self) -> usize {
        match self {
            Family::Cone { dim, .. } => *dim,
            Family::ConeTorus { cone_dim, flat_dim, .. } => cone_dim + flat_dim,
            Family::KantowskiSachs { .. } => 3,
            Family::Kasner { exponents, .. } => exponents.len(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Cone { .. } => "cone",
            Family::ConeTorus { .. } => "cone_torus",
            Family::KantowskiSachs { .. } => "kantowski_sachs",
            Family::Kasner { .. } => "kasner",
        }
    }

    /// Closed-form `dvol₀` mass, where the family has `R ≤ 0`.
    pub fn dvol0(&self) -> Option<f64> {
        match self {
            Family::Cone { .. } | Family::ConeTorus { .. } => Some(0.0),
            Family::KantowskiSachs { .. } => None,
            Family::Kasner { exponents, .. } => Some(exponents.len() as f64),
        }
    }

    /// `h` and `K` of the Kasner family: `h = t^{2M}`, `K = −(n/t)hM`.
    pub fn matrix_at(&self, t: f64) -> Result<MatrixFlow> {
        match self {
            Family::Kasner { m, exponents, frame } => {
                let d = DMatrix::from_diagonal(&exponents.iter().map(|p| t.powf(2.0 * p)).collect::<Vec<_>>().into());
                let h = frame * d * frame.transpose();
                let k = &h * m * (-(exponents.len() as f64) / t);
                MatrixFlow::new(h, k, t)
            }
            _ => MatrixFlow::from_blocks(&self.flow_at(t)?),
        }
    }

    /// Schwarzschild time `τ ∈ (0, 3m/2)` at Hubble time `t`, found by
    /// bisection on the monotone map `τ ↦ −3/H(τ)`.
    pub fn ks_schwarzschild_time(mass: f64, t: f64) -> f64 {
        let hubble = |tau: f64| 3.0 * tau.powf(1.5) * (2.0 * mass - tau).sqrt() / (3.0 * mass - 2.0 * tau);
        let mut hi = 1.5 * mass;
        let mut lo = hi;
        while hubble(lo) > t && lo > f64::MIN_POSITIVE {
            hi = lo;
            lo *= 0.5;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if hubble(mid) < t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

impl FlowSource for Family {
    fn flow_at(&self, t: f64) -> Result<MultiWarpedFlow> {
        self.check_domain(t)?;
        let blocks = match self {
            Family::Cone { dim, vol0 } => vec![Block::new(*dim, -1, t, -1.0 / t, *vol0)],
            Family::ConeTorus { cone_dim, flat_dim, cone_vol0, flat_vol0 } => {
                // proper time of the cone is (cone_dim/n)·t
                let ratio = *cone_dim as f64 / (cone_dim + flat_dim) as f64;
                let a = ratio * t;
                vec![Block::new(*cone_dim, -1, a, -1.0 / a, *cone_vol0), Block::new(*flat_dim, 0, 1.0, 0.0, *flat_vol0)]
            }
            Family::KantowskiSachs { mass, period } => {
                let m = *mass;
                let tau = Self::ks_schwarzschild_time(m, t);
                let root = (2.0 * m - tau).sqrt();
                let t32 = tau.powf(1.5);
                vec![
                    Block::new(1, 0, (2.0 * m / tau - 1.0).sqrt(), m / (t32 * root), *period),
                    Block::new(2, 1, tau, -root / t32, 4.0 * PI),
                ]
            }
            Family::Kasner { exponents, .. } => {
                let n = exponents.len() as f64;
                exponents.iter().map(|p| Block::new(1, 0, t.powf(*p), -n * p / t, 1.0)).collect()
            }
        };
        MultiWarpedFlow::new(blocks, t)
    }

    fn domain(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }
}

/// The rescaled flow `u ↦ (L(su), s⁻²h(su), s⁻¹K(su))` of a source.
#[derive(Debug, Clone)]
pub struct Rescaled<S> {
    pub source: S,
    pub s: f64,
}

impl<S: FlowSource> Rescaled<S> {
    pub fn new(source: S, s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidInput(format!("rescaling factor must be positive, got {s}")));
        }
        Ok(Self { source, s })
    }
}

impl<S: FlowSource> FlowSource for Rescaled<S> {
    fn flow_at(&self, u: f64) -> Result<MultiWarpedFlow> {
        self.source.flow_at(self.s * u)?.rescale(self.s)
    }

    fn domain(&self) -> (f64, f64) {
        let (lo, hi) = self.source.domain();
        (lo / self.s, hi / self.s)
    }
}

impl<S: FlowSource + ?Sized> FlowSource for &S {
    fn flow_at(&self, t: f64) -> Result<MultiWarpedFlow> {
        (**self).flow_at(t)
    }

    fn domain(&self) -> (f64, f64) {
        (**self).domain()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kasner_matches_the_closed_form_values() {
        let f = make_family(&FamilySpec::Kasner { m: None, exponents: Some(vec![2.0 / 3.0, 2.0 / 3.0, -1.0 / 3.0]) }).unwrap();
        let flow = f.flow_at(0.3).unwrap();
        assert!((flow.lapse() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(flow.scalar_curvature(), 0.0);
        assert!((flow.k_squared() - 9.0 / 0.09).abs() < 1e-12);
        assert!((flow.mean_curvature() + 10.0).abs() < 1e-12);
    }

    #[test]
    fn kasner_parameters_are_validated() {
        let bad = FamilySpec::Kasner { m: None, exponents: Some(vec![0.5, 0.5, 0.0]) };
        assert!(make_family(&bad).is_err());
        let both = FamilySpec::Kasner { m: Some(vec![vec![1.0]]), exponents: Some(vec![1.0]) };
        assert!(make_family(&both).is_err());
    }

    #[test]
    fn kantowski_sachs_hubble_time_is_monotone_and_inverted() {
        let m = 1.3;
        let mut prev = 0.0;
        for k in 0..40 {
            let t = 1e-6 * 1.5f64.powi(k);
            let tau = Family::ks_schwarzschild_time(m, t);
            assert!(tau > prev);
            prev = tau;
            let back = 3.0 * tau.powf(1.5) * (2.0 * m - tau).sqrt() / (3.0 * m - 2.0 * tau);
            assert!((back - t).abs() < 1e-12 * t, "{back} vs {t}");
        }
    }

    #[test]
    fn families_satisfy_the_constraints() {
        let specs = [
            FamilySpec::Cone { dim: 3, vol0: 1.0 },
            FamilySpec::ConeTorus { cone_dim: 2, flat_dim: 1, cone_vol0: 1.0, flat_vol0: 1.0 },
            FamilySpec::KantowskiSachs { mass: 1.0, period: 1.0 },
            FamilySpec::Kasner { m: None, exponents: Some(vec![1.0, 0.0, 0.0]) },
        ];
        for spec in specs {
            let f = make_family(&spec).unwrap();
            for t in [1e-3, 0.1, 2.0] {
                let flow = f.flow_at(t).unwrap();
                assert!(flow.constraint_drift() < 1e-12, "{spec:?} at {t}: {}", flow.constraint_drift());
                assert!(flow.hubble_drift() < 1e-12);
            }
        }
    }

    #[test]
    fn specs_reject_unknown_keys() {
        let ok: FamilySpec = serde_json::from_str(r#"{"kind":"cone","dim":3}"#).unwrap();
        assert_eq!(ok, FamilySpec::Cone { dim: 3, vol0: 1.0 });
        assert!(serde_json::from_str::<FamilySpec>(r#"{"kind":"cone","dim":3,"extra":1}"#).is_err());
    }
}
