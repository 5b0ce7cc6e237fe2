use std::f64::consts::SQRT_2;
use std::sync::OnceLock;
use std::time::Instant;

use proptest::prelude::*;
use ricci_core::asymptotics::{self as asy, AsymptoticsError, KappaModel, LocalJet, MatchedAnsatz, Region};
use ricci_core::bryant::{self, BryantProfile};
use ricci_core::flow::{self, Side};

fn soliton() -> &'static BryantProfile {
    static B: OnceLock<BryantProfile> = OnceLock::new();
    B.get_or_init(|| bryant::solve_bryant(40.0, 1e-10).unwrap())
}

#[test]
fn parabolic_sample_values() {
    assert!((asy::parabolic_ansatz(0.0, -100.0) - SQRT_2 * 1.0025).abs() < 1e-14);
    assert!((asy::parabolic_ansatz(0.0, -100.0) - 1.417749).abs() < 1e-6);
    for tau in [-10.0, -123.0, -1e5] {
        assert!((asy::parabolic_ansatz(SQRT_2, tau) - SQRT_2).abs() < 1e-15);
    }
    assert!((asy::parabolic_ansatz(2.0, -100.0) - 1.410678).abs() < 1e-6);
}

#[test]
fn intermediate_sample_values() {
    assert_eq!(asy::intermediate_profile(0.0).unwrap(), SQRT_2);
    assert_eq!(asy::intermediate_profile(2.0).unwrap(), 0.0);
    assert!((asy::intermediate_profile(1.0).unwrap() - 1.224745).abs() < 1e-6);
    assert!(matches!(asy::intermediate_profile(2.01), Err(AsymptoticsError::OutOfDomain(_))));
    assert!(asy::intermediate_profile(f64::NAN).is_err());
}

#[test]
fn intermediate_profile_solves_the_transport_equation() {
    let worst = (0..1000)
        .map(|k| -1.9 + 3.8 * (k as f64 + 0.5) / 1000.0)
        .map(|z| asy::intermediate_transport_residual(z).unwrap().abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-10, "{worst}");
}

#[test]
fn cylinder_has_zero_residual() {
    let cyl = LocalJet { u: SQRT_2, u_s: 0.0, u_ss: 0.0, u_t: 0.0 };
    for sigma in [-7.0, 0.0, 0.3, 12.0] {
        assert!(asy::equation_residual(sigma, &cyl, 0.0).abs() < 1e-15);
    }
}

/// Central differences in σ and τ of the glued profile against its jets.
#[test]
fn jets_match_finite_differences() {
    let tau = -300.0;
    let a = MatchedAnsatz::new(tau);
    let dt = 1e-3;
    let (g, gp, gm) = (
        a.build(soliton()).unwrap(),
        MatchedAnsatz { tau: tau + dt, ..a }.build(soliton()).unwrap(),
        MatchedAnsatz { tau: tau - dt, ..a }.build(soliton()).unwrap(),
    );
    // parabolic, parabolic seam, intermediate, tip seam, tip
    for sigma in [1.7, 6.1, 20.0, 0.5 * (a.intermediate_sigma(0.75) + a.intermediate_sigma(0.5)), g.sigma_plus - 0.05] {
        for s in [sigma, -sigma] {
            let j = g.jet(s).unwrap();
            let h = 1e-4;
            let (up, um) = (g.jet(s + h).unwrap().u, g.jet(s - h).unwrap().u);
            let d1 = (up - um) / (2.0 * h);
            let d2 = (up - 2.0 * j.u + um) / (h * h);
            let dtau = (gp.jet(s).unwrap().u - gm.jet(s).unwrap().u) / (2.0 * dt);
            let scale = 1.0 + j.u_ss.abs();
            assert!((d1 - j.u_s).abs() < 1e-6, "sigma = {s}: u_s {d1} vs {}", j.u_s);
            assert!((d2 - j.u_ss).abs() < 1e-4 * scale, "sigma = {s}: u_ss {d2} vs {}", j.u_ss);
            assert!((dtau - j.u_t).abs() < 1e-6, "sigma = {s}: u_t {dtau} vs {}", j.u_t);
        }
    }
}

#[test]
fn parabolic_residual_decays_like_tau_squared() {
    let start = Instant::now();
    let rep = asy::residual_ladder(&MatchedAnsatz::new(-100.0), &asy::DEFAULT_LADDER, soliton()).unwrap();
    assert!(start.elapsed().as_secs_f64() < 30.0);
    let p = rep.exponent(Region::Parabolic);
    assert!(p >= 1.7, "exponent {p}");
    assert!((p - 2.0).abs() < 0.1, "exponent {p}");
    // at fixed z = 1 only the O(1/|τ|) transport terms survive
    assert!((rep.unit_z_exponent - 1.0).abs() < 0.1, "{}", rep.unit_z_exponent);
    assert!(rep.samples.windows(2).all(|w| w[1].at_unit_z.abs() < w[0].at_unit_z.abs()));
    assert!(rep.to_csv().starts_with("tau,parabolic,intermediate,tip,unit_z\n"));
}

#[test]
fn ladder_needs_two_rungs() {
    assert!(asy::residual_ladder(&MatchedAnsatz::new(-100.0), &[-100.0], soliton()).is_err());
    assert!(asy::residual_ladder(&MatchedAnsatz::new(-100.0), &[-100.0, -5.0], soliton()).is_err());
}

#[test]
fn tip_is_consistent_at_tau_400() {
    let tc = asy::tip_consistency(&MatchedAnsatz::new(-400.0), soliton()).unwrap();
    assert!(tc.passed(), "{tc:#?}");
    assert!((tc.j_ratio + 1.0).abs() < 0.15);
    assert!((0.9..=1.1).contains(&tc.diameter_ratio));
    assert!((tc.tip_slope + 1.0).abs() < 0.05);
    assert!((tc.m_delta - 10f64.sqrt()).abs() < 1e-12);
    // the tip is a Bryant soliton of curvature κ
    assert!((tc.kappa_measured / tc.kappa_model - 1.0).abs() < 1e-3, "{}", tc.kappa_measured);
}

#[test]
fn j_ratio_improves_down_the_ladder() {
    let gap = |tau: f64| (asy::tip_consistency(&MatchedAnsatz::new(tau), soliton()).unwrap().j_ratio + 1.0).abs();
    assert!(gap(-800.0) < gap(-100.0));
}

#[test]
fn tight_tolerances_report_failures() {
    let tol = asy::ConsistencyTolerances { j_epsilon: 1e-6, diameter: 1e-6, ..Default::default() };
    let tc = asy::tip_consistency_with(&MatchedAnsatz::new(-400.0), soliton(), &tol).unwrap();
    let failed: Vec<&str> = tc.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    assert_eq!(failed, ["j_tip", "diameter"]);
}

#[test]
fn glued_profile_is_closed_and_symmetric() {
    let g = MatchedAnsatz::new(-400.0).build(soliton()).unwrap();
    let (s, u) = (g.profile.sigma(), g.profile.u());
    let n = s.len();
    assert_eq!(u[0], 0.0);
    assert_eq!(u[n - 1], 0.0);
    for i in 0..n / 2 {
        assert_eq!(s[i], -s[n - 1 - i]);
        assert_eq!(u[i], u[n - 1 - i]);
    }
    assert!((flow::tip_slope(&g.profile, Side::Plus) + 1.0).abs() < 0.05);
    assert!((flow::tip_slope(&g.profile, Side::Minus) - 1.0).abs() < 0.05);
    // no jumps between neighbouring nodes beyond the slope bound |u_σ| ≤ 1
    assert!(s.windows(2).zip(u.windows(2)).all(|(s, u)| (u[1] - u[0]).abs() <= (s[1] - s[0]) * (1.0 + 1e-9)));
    assert!(g.to_csv().starts_with("sigma,u\n"));
}

#[test]
fn parabolic_seam_agrees_to_order_one_over_tau() {
    let tau = -400.0;
    let jump = (asy::parabolic_ansatz(5.0, tau) - asy::intermediate_profile(5.0 / tau.abs().sqrt()).unwrap()).abs();
    assert!(jump < 1.0 / tau.abs(), "{jump}");
    let g = MatchedAnsatz::new(tau).build(soliton()).unwrap();
    assert!(g.seams[0].jump < 1.0 / tau.abs());
}

#[test]
fn region_agreement_is_bounded_down_the_ladder() {
    let c: Vec<f64> = asy::DEFAULT_LADDER.iter().map(|&t| asy::region_agreement(t, 5.0)).collect();
    assert!(c.iter().all(|&c| c < 2.0), "{c:?}");
    assert!(c.windows(2).all(|w| w[1] < w[0]));
    // both pieces differ by √2/(4|τ|) at leading order
    assert!((asy::region_agreement(-1e7, 5.0) - SQRT_2 / 4.0).abs() < 1e-3);
}

#[test]
fn seam_tolerance_is_enforced() {
    let a = MatchedAnsatz { seam_tolerance: 1e-4, ..MatchedAnsatz::new(-400.0) };
    match a.build(soliton()) {
        Err(AsymptoticsError::SeamJump { jump, .. }) => assert!(jump > 1e-4),
        other => panic!("{other:?}"),
    }
}

#[test]
fn invalid_ansatz_is_rejected() {
    let base = MatchedAnsatz::new(-400.0);
    for bad in [
        MatchedAnsatz { tau: -5.0, ..base },
        MatchedAnsatz { theta: 1.0, ..base },
        MatchedAnsatz { parabolic_l: 30.0, ..base },
        MatchedAnsatz { overlap: 0.0, ..base },
        MatchedAnsatz { spacing: Some(-1.0), ..base },
    ] {
        assert!(matches!(bad.build(soliton()), Err(AsymptoticsError::InvalidParameter { .. })), "{bad:?}");
    }
}

#[test]
fn short_bryant_profile_is_reported() {
    let short = bryant::solve_bryant(10.0, 1e-8).unwrap();
    assert!(matches!(
        MatchedAnsatz::new(-800.0).build(&short),
        Err(AsymptoticsError::BryantTooShort { .. })
    ));
}

#[test]
fn log_kappa_model_moves_the_tip_scale() {
    let a = MatchedAnsatz { kappa_model: KappaModel::Log { c: 1.0 }, ..MatchedAnsatz::new(-400.0) };
    let tc = asy::tip_consistency(&a, soliton()).unwrap();
    assert!((tc.kappa_model - (400.0 + 400f64.ln())).abs() < 1e-9);
    assert!((tc.kappa_measured / tc.kappa_model - 1.0).abs() < 1e-3);
    assert!(tc.passed(), "{tc:#?}");
}

#[test]
fn alpha_of_the_parabolic_ansatz() {
    let tau = -1e4;
    let p = asy::parabolic_alpha(tau).unwrap();
    let expected = -1.0 / (8.0 * tau.abs());
    assert!((p.alpha / expected - 1.0).abs() < 1e-4, "{}", p.alpha);
    assert!(p.plus_coeff.abs() < 1e-12 && p.minus_norm < 1e-12);
}

#[test]
fn prediction_sample_values() {
    let p = asy::predictions(-1e6).unwrap();
    assert!((p.k - 1.38155e-5).abs() < 1e-10);
    // 4√(10⁶ ln 10⁶) = 14867.689
    assert!((p.d - 14867.689).abs() < 1e-3, "{}", p.d);
    assert!(p.kappa_gap.abs() < 1e-15);
    assert!(asy::predictions(-7.0).is_err());
    assert!(asy::predictions(f64::NAN).is_err());
}

#[test]
fn region_names_round_trip() {
    for r in Region::ALL {
        assert_eq!(r.name().parse::<Region>().unwrap(), r);
    }
    assert!("collar".parse::<Region>().is_err());
}

proptest! {
    #[test]
    fn predicted_diameter_grows(a in 7.5f64..1e12, f in 1.0001f64..10.0) {
        let (d1, d2) = (asy::predictions(-a).unwrap().d, asy::predictions(-a * f).unwrap().d);
        prop_assert!(d2 > d1);
    }

    #[test]
    fn transport_identity_holds(z in -1.99f64..1.99) {
        prop_assert!(asy::intermediate_transport_residual(z).unwrap().abs() < 1e-12);
    }
}
