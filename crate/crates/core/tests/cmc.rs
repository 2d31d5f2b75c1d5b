use cosmolab::cmc::*;
use cosmolab::{Error, Verdict};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn family(spec: FamilySpec) -> Family {
    make_family(&spec).unwrap()
}

fn kasner(p: &[f64]) -> Family {
    family(FamilySpec::Kasner { m: None, exponents: Some(p.to_vec()) })
}

fn cone(dim: usize) -> Family {
    family(FamilySpec::Cone { dim, vol0: 1.0 })
}

fn cone_torus(cone_dim: usize, flat_dim: usize) -> Family {
    family(FamilySpec::ConeTorus { cone_dim, flat_dim, cone_vol0: 1.0, flat_vol0: 1.0 })
}

fn ks(mass: f64) -> Family {
    family(FamilySpec::KantowskiSachs { mass, period: 1.0 })
}

const KS_EXPONENTS: [f64; 3] = [2.0 / 3.0, 2.0 / 3.0, -1.0 / 3.0];

/// Closed-form samples at `count` geometric times in `[lo, hi]`, increasing.
fn sampled(fam: &Family, lo: f64, hi: f64, count: usize) -> CmcTrajectory {
    let r = (hi / lo).ln() / (count - 1) as f64;
    CmcTrajectory::new((0..count).map(|i| fam.flow_at(lo * (r * i as f64).exp()).unwrap()).collect()).unwrap()
}

fn relative_state_error(a: &MultiWarpedFlow, b: &MultiWarpedFlow) -> f64 {
    a.blocks
        .iter()
        .zip(&b.blocks)
        .map(|(x, y)| ((x.scale - y.scale) / y.scale).abs().max(((x.kappa - y.kappa) / y.kappa.abs().max(1e-300)).abs()))
        .fold(0.0, f64::max)
}

#[test]
fn kasner_family_matches_its_defining_values() {
    // non-diagonal M: rotate diag(p) in the (x, y) plane
    let p = KS_EXPONENTS;
    let (c, s) = (0.6f64, 0.8f64);
    let rot = DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]);
    let m = &rot * DMatrix::from_diagonal(&p.to_vec().into()) * rot.transpose();
    let rows = (0..3).map(|i| (0..3).map(|j| m[(i, j)]).collect()).collect();
    let fam = family(FamilySpec::Kasner { m: Some(rows), exponents: None });
    for t in [0.01, 0.5, 3.0] {
        let mf = fam.matrix_at(t).unwrap();
        assert!((mf.lapse() - 1.0 / 3.0).abs() < 1e-13);
        assert!((mf.mean_curvature() + 3.0 / t).abs() < 1e-12 / t);
        assert!((mf.k_squared() - 9.0 / (t * t)).abs() < 1e-12 / (t * t));
        let f = fam.flow_at(t).unwrap();
        assert_eq!(f.scalar_curvature(), 0.0);
    }
}

#[test]
fn kantowski_sachs_lapse_agrees_with_schwarzschild_time() {
    let m = 1.0;
    let fam = ks(m);
    let hubble = |tau: f64| 3.0 * tau.powf(1.5) * (2.0 * m - tau).sqrt() / (3.0 * m - 2.0 * tau);
    for t in [1e-3, 0.05, 0.8] {
        let tau = Family::ks_schwarzschild_time(m, t);
        let d = 1e-5 * tau;
        let dt_dtau = (hubble(tau + d) - hubble(tau - d)) / (2.0 * d);
        let proper = 1.0 / (2.0 * m / tau - 1.0).sqrt();
        let expected = proper / dt_dtau;
        let l = fam.flow_at(t).unwrap().lapse();
        assert!((l - expected).abs() < 1e-8 * expected, "t = {t}: {l} vs {expected}");
    }
}

#[test]
fn evolution_reproduces_closed_forms() {
    let cases = [(cone(3), 4000), (cone_torus(2, 1), 1000), (ks(1.0), 500), (kasner(&KS_EXPONENTS), 500)];
    for (fam, steps) in cases {
        let tr = evolve_cmc(&fam.flow_at(1.0).unwrap(), 0.1, steps).unwrap();
        let err = tr.flows().iter().map(|f| relative_state_error(f, &fam.flow_at(f.t).unwrap())).fold(0.0, f64::max);
        assert!(err < 1e-7, "{}: {err:.3e}", fam.name());
    }
}

#[test]
fn kantowski_sachs_evolution_agrees_at_two_resolutions() {
    let fam = ks(1.0);
    let t1 = 0.4;
    let end = |steps| evolve_cmc(&fam.flow_at(t1).unwrap(), t1 / 10.0, steps).unwrap().last().clone();
    let exact = fam.flow_at(t1 / 10.0).unwrap();
    let (coarse, fine) = (end(300), end(600));
    assert!(relative_state_error(&coarse, &exact) < 1e-7);
    assert!(relative_state_error(&fine, &exact) < 1e-7);
    assert!(relative_state_error(&coarse, &fine) < 1e-7);
}

#[test]
fn hubble_gauge_is_kept_over_a_decade() {
    for (fam, steps) in [(cone(3), 8000), (cone_torus(2, 2), 2000), (ks(0.7), 1000), (kasner(&KS_EXPONENTS), 1000)] {
        let tr = evolve_cmc(&fam.flow_at(2.0).unwrap(), 0.2, steps).unwrap();
        assert!(tr.max_hubble_drift() < 1e-10, "{}: {:.3e}", fam.name(), tr.max_hubble_drift());
    }
}

#[test]
fn constraint_drift_shrinks_at_fourth_order() {
    let fam = cone_torus(3, 1);
    let drift = |steps| evolve_cmc(&fam.flow_at(1.0).unwrap(), 0.1, steps).unwrap().max_constraint_drift();
    let (a, b) = (drift(1000), drift(2000));
    assert!(a / b > 12.0, "{a:.3e} / {b:.3e}");
}

#[test]
fn cone_volume_is_constant_and_traceless_part_vanishes() {
    let tr = sampled(&cone(3), 0.1, 1.0, 41);
    let cert = monotone_quantities(&tr, 1e-6).unwrap();
    assert_eq!(cert.verdict, Verdict::Pass, "{cert}");
    assert!(cert.metric("vn_variation") < 1e-10);
    assert!(tr.flows().iter().all(|f| f.traceless_squared() < 1e-14 * f.k_squared()));

    let evolved = evolve_cmc(&cone(3).flow_at(1.0).unwrap(), 0.1, 8000).unwrap();
    let cert = monotone_quantities(&evolved, 1e-6).unwrap();
    assert!(cert.metric("vn_variation") < 1e-10, "{}", cert.metric("vn_variation"));
}

#[test]
fn kasner_volumes_follow_the_rigidity_chain() {
    let tr = sampled(&kasner(&KS_EXPONENTS), 0.1, 1.0, 401);
    let cert = monotone_quantities(&tr, 1e-6).unwrap();
    assert_eq!(cert.verdict, Verdict::Pass, "{cert}");
    assert!(cert.metric("v1_variation") < 1e-13);
    // V_n strictly decreasing in t
    assert!(cert.samples["V_n"].windows(2).all(|w| w[1] < w[0]));
    // equal V_1 with R ≤ 0 forces R = 0 and |K|² = H²
    for f in tr.flows() {
        assert_eq!(f.scalar_curvature(), 0.0);
        let h = f.mean_curvature();
        assert!((f.k_squared() - h * h).abs() < 1e-12 * h * h);
    }
}

#[test]
fn cone_torus_volume_increases_with_matching_derivative() {
    let fam = cone_torus(2, 1);
    let tr = evolve_cmc(&fam.flow_at(1.0).unwrap(), 0.1, 1000).unwrap();
    let cert = monotone_quantities(&tr, 1e-6).unwrap();
    assert_eq!(cert.verdict, Verdict::Pass, "{cert}");
    assert!(cert.samples["V_1"].windows(2).all(|w| w[1] > w[0]));
    assert!(cert.metric("v1_residual") < 1e-6);
    // V_1 = (n/t)(mt/n)^m, so dV_1/dt = (m − 1)V_1/t
    let (m, n) = (2.0f64, 3.0f64);
    for (t, rhs) in cert.samples["t"].iter().zip(&cert.samples["dV_1_rhs"]) {
        let v1 = n / t * (m * t / n).powf(m);
        let exact = (m - 1.0) * v1 / t;
        assert!((rhs - exact).abs() < 1e-6 * exact, "{rhs} vs {exact}");
    }
}

#[test]
fn lapse_bounds_hold_on_nonpositive_curvature() {
    for fam in [cone(3), cone_torus(2, 1), cone_torus(4, 3), kasner(&[1.0, 0.0, 0.0]), kasner(&KS_EXPONENTS)] {
        let tr = evolve_cmc(&fam.flow_at(1.0).unwrap(), 0.1, 8000).unwrap();
        let cert = lapse_bounds(tr.flows(), 1e-9);
        assert_eq!(cert.verdict, Verdict::Pass, "{}: {cert}", fam.name());
        assert_eq!(cert.metric("lower_bound_samples"), tr.len() as f64);
    }
    // R > 0 for Kantowski–Sachs: only the upper bound applies
    let cert = lapse_bounds(sampled(&ks(1.0), 0.01, 1.0, 30).flows(), 1e-12);
    assert_eq!(cert.verdict, Verdict::Pass);
    assert_eq!(cert.metric("lower_bound_samples"), 0.0);
    // a flow out of Hubble gauge breaks the upper bound
    let mut off = cone(3).flow_at(1.0).unwrap();
    off.t = 0.5;
    assert_eq!(lapse_bounds(&[off], 1e-9).verdict, Verdict::Fail);
}

#[test]
fn curvature_integral_matches_volume_change() {
    for (fam, steps) in [(cone_torus(2, 1), 1000), (cone_torus(3, 2), 1000), (cone(3), 4000)] {
        let tr = evolve_cmc(&fam.flow_at(1.0).unwrap(), 0.1, steps).unwrap();
        let cert = v1_integral_identity(&tr, 1e-8).unwrap();
        assert_eq!(cert.verdict, Verdict::Pass, "{}: {cert}", fam.name());
    }
}

#[test]
fn dvol0_extrapolation_matches_closed_forms() {
    let k = dvol0_limit(&kasner(&KS_EXPONENTS), 1.0, 16).unwrap();
    assert!(!k.zero);
    // a_i = t^{p_i}: (−H)Πa_i = (3/t)·t = 3
    assert!((k.value - 3.0).abs() < 1e-12);
    for fam in [cone(2), cone(3), cone_torus(2, 1)] {
        let d = dvol0_limit(&fam, 1.0, 16).unwrap();
        assert!(d.zero, "{}: {}", fam.name(), d.value);
        assert_eq!(Some(d.value), fam.dvol0());
    }
    assert!(matches!(dvol0_limit(&ks(1.0), 1.0, 16), Err(Error::Hypothesis(_))));
    assert!(dvol0_limit(&cone(3), 1.0, 5).is_err());

    let tr = evolve_cmc(&kasner(&KS_EXPONENTS).flow_at(1.0).unwrap(), 1e-5, 2000).unwrap();
    let d = dvol0_limit(&tr, 1.0, 16).unwrap();
    assert!((d.value - 3.0).abs() < 1e-8, "{}", d.value);
}

#[test]
fn rescaling_fixes_cones_and_keeps_kasner_exponents() {
    let c = cone(3);
    for s in [1e-3, 0.5, 7.0] {
        let r = Rescaled::new(&c, s).unwrap();
        for u in [0.3, 1.0, 2.5] {
            assert!(relative_state_error(&r.flow_at(u).unwrap(), &c.flow_at(u).unwrap()) < 1e-14);
        }
    }
    let k = kasner(&KS_EXPONENTS);
    let r = Rescaled::new(&k, 1e-3).unwrap();
    let history: Vec<MatrixFlow> = [0.5, 1.0, 2.0].iter().map(|&u| MatrixFlow::from_blocks(&r.flow_at(u).unwrap()).unwrap()).collect();
    let rec = kasner_reconstruct(&history, 1e-9).unwrap();
    let expected = DMatrix::from_diagonal(&KS_EXPONENTS.to_vec().into());
    assert!((rec.m - expected).norm() < 1e-12);
}

#[test]
fn kantowski_sachs_rescales_to_the_kasner_limit() {
    let r = Rescaled::new(ks(1.0), 1e-4).unwrap();
    let f = r.flow_at(1.0).unwrap();
    let l = f.lapse();
    // block exponents p_i = d ln a_i / d ln u = −Lκ_i u
    let p: Vec<f64> = f.blocks.iter().map(|b| -l * b.kappa * f.t).collect();
    assert!((p[0] + 1.0 / 3.0).abs() < 1e-3, "{p:?}");
    assert!((p[1] - 2.0 / 3.0).abs() < 1e-3, "{p:?}");
    let q: Vec<f64> = Rescaled::new(ks(1.0), 1e-2).unwrap().flow_at(1.0).map(|f| {
        let l = f.lapse();
        f.blocks.iter().map(|b| -l * b.kappa).collect()
    }).unwrap();
    assert!((q[1] - 2.0 / 3.0).abs() > (p[1] - 2.0 / 3.0).abs(), "the limit is approached from coarser scales");
}

fn kasner_history(m: &DMatrix<f64>, h_hat: &DMatrix<f64>, times: &[f64]) -> Vec<MatrixFlow> {
    let n = m.nrows() as f64;
    times
        .iter()
        .map(|&t| {
            let minus_h: f64 = n / t;
            let eig = nalgebra::SymmetricEigen::new(m.clone());
            let pow = &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues.map(|p| minus_h.powf(-2.0 * p))) * eig.eigenvectors.transpose();
            let h = h_hat * &pow;
            let h = (&h + h.transpose()) * 0.5;
            let k = &h * m * (-minus_h);
            MatrixFlow::new(h, k, t).unwrap()
        })
        .collect()
}

#[test]
fn kasner_reconstruction_recovers_m() {
    let (c, s) = (0.28f64, 0.96f64);
    let rot = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c]);
    // exponents with TrM = TrM² = 1: p = (1 + 2cos φ_k)/3
    let phi = 0.7f64;
    let p: Vec<f64> = (0..3).map(|k| (1.0 + 2.0 * (phi + 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos()) / 3.0).collect();
    let m = &rot * DMatrix::from_diagonal(&p.clone().into()) * rot.transpose();
    let history = kasner_history(&m, &DMatrix::identity(3, 3), &[0.01, 0.1, 0.4, 1.0]);
    let rec = kasner_reconstruct(&history, 1e-9).unwrap();
    assert_eq!(rec.certificate.verdict, Verdict::Pass, "{}", rec.certificate);
    assert!((&rec.m - &m).norm() < 1e-10);
    assert!(rec.certificate.metric("trace_error") < 1e-9);
    assert!(rec.certificate.metric("trace_square_error") < 1e-9);
    assert!(rec.certificate.metric("h_residual") < 1e-10);
}

#[test]
fn non_diagonal_reference_metric_round_trips() {
    let m = DMatrix::from_diagonal(&KS_EXPONENTS.to_vec().into());
    let h_hat = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 3.0]);
    let history = kasner_history(&m, &h_hat, &[0.05, 0.2, 1.0]);
    let rec = kasner_reconstruct(&history, 1e-9).unwrap();
    assert!((&rec.h_hat - &h_hat).norm() < 1e-12 * h_hat.norm());
    assert!((&rec.m - &m).norm() < 1e-12);
}

#[test]
fn noisy_histories_are_flagged() {
    let m = DMatrix::from_diagonal(&KS_EXPONENTS.to_vec().into());
    let mut history = kasner_history(&m, &DMatrix::identity(3, 3), &[0.05, 0.1, 0.2, 0.4, 0.8]);
    let noise = [0.7, -0.4, 0.9, -1.0, 0.2];
    for (k, f) in history.iter_mut().enumerate() {
        let h = f.h.clone();
        f.h = DMatrix::from_fn(3, 3, |i, j| h[(i, j)] * (1.0 + 1e-3 * noise[(k + i + j) % 5]));
    }
    let rec = kasner_reconstruct(&history, 1e-9).unwrap();
    assert_eq!(rec.certificate.verdict, Verdict::Fail);
    let v = rec.certificate.metric("m_variation");
    // M = h⁻¹K/H moves by the relative noise in h
    assert!(v > 1e-4 && v < 1e-2, "{v}");
}

#[test]
fn curved_blocks_are_not_reconstructed() {
    assert!(MatrixFlow::from_blocks(&cone(3).flow_at(1.0).unwrap()).is_err());
}

/// `t²|Rm|_T` of a vacuum Kasner spacetime from its Kretschmann scalar
/// `−16p₁p₂p₃/τ⁴` in proper time `τ = t/n`.
fn kasner_curvature_oracle(p: [f64; 3]) -> f64 {
    9.0 * (-16.0 * p[0] * p[1] * p[2]).sqrt()
}

#[test]
fn curvature_of_kasner_and_cone() {
    let flat = curvature_report(&kasner(&[1.0, 0.0, 0.0]), &[0.1, 0.5, 2.0]).unwrap();
    assert!(flat.type_i_constant < 1e-8, "{}", flat.type_i_constant);

    let rep = curvature_report(&kasner(&KS_EXPONENTS), &[0.01, 0.3, 2.0]).unwrap();
    let expected = kasner_curvature_oracle(KS_EXPONENTS);
    for v in &rep.scaled_norm {
        assert!((v - expected).abs() < 1e-6 * expected, "{v} vs {expected}");
    }
    assert!((rep.scaled_norm[0] - rep.scaled_norm[2]).abs() < 1e-6 * expected);

    let c = curvature_report(&cone(3), &[0.05, 1.0, 20.0]).unwrap();
    assert!((c.scaled_norm[0] - c.scaled_norm[2]).abs() < 1e-8 * (1.0 + c.scaled_norm[0]));
}

#[test]
fn curvature_needs_room_for_differences() {
    let tr = evolve_cmc(&cone(3).flow_at(1.0).unwrap(), 0.5, 100).unwrap();
    assert!(curvature_report(&tr, &[0.5]).is_err());
    assert!(curvature_report(&tr, &[0.7]).is_ok());
}

#[test]
fn kasner_causal_radii_match_closed_forms() {
    let exps = KS_EXPONENTS;
    let fam = kasner(&exps);
    let n = 3.0;
    for (i, pi) in exps.iter().enumerate() {
        let (lo, hi) = (0.02, 1.5);
        let exact = |a: f64, b: f64| (b.powf(1.0 - pi) - a.powf(1.0 - pi)) / (n * (1.0 - pi));
        let r = causal_radius(&fam, i, lo, hi).unwrap();
        assert!((r.radius - exact(lo, hi)).abs() < 1e-10 * exact(lo, hi), "block {i}");
        let r0 = causal_radius(&fam, i, 0.0, hi).unwrap();
        assert!((r0.radius - exact(0.0, hi)).abs() < 1e-10 * exact(0.0, hi), "block {i} from 0");
        assert!((r0.exponent.unwrap() - (1.0 - pi)).abs() < 1e-8);
        // the diameter bound dominates the radius measured at t_high
        let a_top = fam.flow_at(hi).unwrap().blocks[i].scale;
        assert!(a_top * r0.radius <= r0.diameter_bound * (1.0 + 1e-12));
    }
}

#[test]
fn unit_exponent_diverges_logarithmically() {
    let fam = kasner(&[1.0, 0.0, 0.0]);
    let r = causal_radius(&fam, 0, 0.0, 1.0).unwrap();
    assert!(r.radius.is_infinite());
    assert!(r.exponent.unwrap().abs() < 1e-9);
    assert!(r.diameter_bound.is_infinite());
    let finite = causal_radius(&fam, 1, 0.0, 1.0).unwrap();
    assert!((finite.radius - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn self_similar_radii_scale_with_t() {
    let fam = cone_torus(2, 1);
    let lambda = 4.0;
    let unit = causal_radius(&fam, 1, 1.0 / lambda, 1.0).unwrap().radius;
    for t in [1e-3, 0.2, 5.0] {
        let r = causal_radius(&fam, 1, t / lambda, t).unwrap().radius;
        assert!((r - t * unit).abs() < 1e-10 * t * unit, "t = {t}");
    }
    // the flat block shrinks like t, so points separated by more than 2r decouple
    let t = 0.01;
    let r = causal_radius(&fam, 1, t / lambda, t).unwrap().radius;
    assert!(disjointness(&fam, 1, 2.5 * r, lambda, t).unwrap());
    assert!(!disjointness(&fam, 1, 1.5 * r, lambda, t).unwrap());
}

#[test]
fn kasner_limit_integrands_vanish_on_kasner() {
    let fam = kasner(&KS_EXPONENTS);
    let cert = kasner_limit_check(&fam, fam.dvol0().unwrap(), 4.0, &[1.0, 0.1, 1e-3]).unwrap();
    assert_eq!(cert.verdict, Verdict::Pass);
    for key in ["lapse_integral", "k_integral", "r_integral"] {
        assert!(cert.samples[key].iter().all(|v| *v < 1e-10), "{key}: {:?}", cert.samples[key]);
    }
}

#[test]
fn collapsed_families_leave_the_limit_check_vacuous() {
    for fam in [cone(3), cone_torus(2, 1)] {
        let cert = kasner_limit_check(&fam, fam.dvol0().unwrap(), 4.0, &[1.0, 0.1, 0.01]).unwrap();
        assert_eq!(cert.verdict, Verdict::Vacuous);
    }
    // with a synthetic unit measure the cone block's lapse never approaches 1/n
    let (lambda, n, m) = (4.0, 3.0, 2.0);
    let expected = (m - 1.0) / n * (lambda - 1.0 / lambda);
    for s in [1.0, 1e-2, 1e-4] {
        let [l, _, r] = kasner_limit_integrals(&cone_torus(2, 1), lambda, s, 1.0).unwrap();
        assert!((l - expected).abs() < 1e-12, "{l} vs {expected}");
        assert!(r > 0.0);
    }
    assert!(matches!(kasner_limit_check(&ks(1.0), 1.0, 2.0, &[0.1]), Err(Error::Hypothesis(_))));
}

proptest! {
    #[test]
    fn rescalings_compose(s1 in 1e-3f64..1e3, s2 in 1e-3f64..1e3, t in 0.1f64..10.0) {
        let f = ks(1.0).flow_at(t).unwrap();
        let twice = f.rescale(s1).unwrap().rescale(s2).unwrap();
        let once = f.rescale(s1 * s2).unwrap();
        prop_assert!((twice.t - once.t).abs() <= 4.0 * f64::EPSILON * once.t);
        for (a, b) in twice.blocks.iter().zip(&once.blocks) {
            prop_assert!((a.scale - b.scale).abs() <= 4.0 * f64::EPSILON * b.scale);
            prop_assert!((a.kappa - b.kappa).abs() <= 4.0 * f64::EPSILON * b.kappa.abs());
        }
    }

    #[test]
    fn lapse_stays_within_bounds_on_kasner(phi in 0.0f64..6.3, t in 1e-3f64..10.0) {
        let p: Vec<f64> = (0..3).map(|k| (1.0 + 2.0 * (phi + 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos()) / 3.0).collect();
        let f = kasner(&p).flow_at(t).unwrap();
        prop_assert!((f.lapse() - 1.0 / 3.0).abs() < 1e-12);
    }
}
