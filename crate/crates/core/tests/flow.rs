use std::f64::consts::{FRAC_PI_2, SQRT_2};
use std::sync::OnceLock;

use proptest::prelude::*;
use ricci_core::flow::{self, Boundary, FlowConfig, FlowError, FlowRun, RescaledProfile, RmaxLocation, Side, StopReason};
use ricci_core::geometry::{self, Fixture, ProfileGrid};
use ricci_core::numerics::lerp_at;
use ricci_core::spectral;

fn sphere_run(n: usize) -> flow::ExtinctionRun {
    let p0 = Fixture::Sphere { radius: 1.0, n }.build().unwrap();
    flow::run_to_extinction(&p0, flow::DEFAULT_CFL, false, usize::MAX).unwrap()
}

fn dumbbell_run() -> &'static FlowRun {
    static RUN: OnceLock<FlowRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let mut cfg = FlowConfig::new(Fixture::Dumbbell { neck: 0.8, bulb: 1.0, n: 161 });
        cfg.output_every = 200;
        flow::run_flow(&cfg).unwrap()
    })
}

fn rescaled_sphere(n: usize) -> RescaledProfile {
    let p = Fixture::Sphere { radius: 1.0, n }.build().unwrap();
    RescaledProfile::from_profile(&p, 0.25).unwrap()
}

fn cylinder(m: usize, half: f64) -> RescaledProfile {
    let sigma: Vec<f64> = (0..m).map(|i| -half + 2.0 * half * i as f64 / (m - 1) as f64).collect();
    RescaledProfile::new(sigma, vec![SQRT_2; m], -10.0, Boundary::Neumann).unwrap()
}

/// `cos s + ε cos³ s` on the unit sphere grid, ends pinned to zero.
fn perturbed_sphere(n: usize, eps: f64) -> ProfileGrid {
    let base = Fixture::Sphere { radius: 1.0, n }.build().unwrap();
    let s = base.s().to_vec();
    let mut psi: Vec<f64> = s.iter().map(|x| x.cos() + eps * x.cos().powi(3)).collect();
    psi[0] = 0.0;
    psi[n - 1] = 0.0;
    ProfileGrid::new(s, psi, 0.0).unwrap()
}

fn step_to(mut p: ProfileGrid, t: f64) -> ProfileGrid {
    while p.t() < t {
        let h = p.s()[1] - p.s()[0];
        let dt = (0.25 * h * h).min(t - p.t());
        p = flow::step_unrescaled(&p, dt).unwrap();
    }
    p
}

#[test]
fn round_sphere_shrinks_by_the_exact_law() {
    // radius 2: ψ_max² = 4 − 4t on [0, ½]
    let mut p = Fixture::Sphere { radius: 2.0, n: 161 }.build().unwrap();
    while p.t() < 0.5 {
        let h = p.s()[1] - p.s()[0];
        p = flow::step_unrescaled(&p, 0.25 * h * h).unwrap();
        let exact = 4.0 - 4.0 * p.t();
        assert!((p.psi_max().powi(2) / exact - 1.0).abs() < 1e-3, "t = {}", p.t());
    }
}

#[test]
fn extinction_time_converges_at_second_order() {
    let runs: Vec<_> = [41, 81, 161].into_iter().map(sphere_run).collect();
    let err: Vec<f64> = runs.iter().map(|r| (r.t_estimate - 0.25).abs()).collect();
    for w in err.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 2.0).abs() < 0.3, "errors {err:?}");
    }
    let t = flow::richardson(runs[1].t_estimate, runs[2].t_estimate, 2.0);
    assert!((t - 0.25).abs() < 0.2 * err[2], "{t}");
    for r in &runs {
        // through half the extinction time
        for &(t, a) in r.psi_max_sq.iter().filter(|(t, _)| *t <= 0.125) {
            assert!((a / (1.0 - 4.0 * t) - 1.0).abs() < 2e-3, "t = {t}");
        }
        assert!(!r.neckpinch);
    }
}

#[test]
fn maximum_radius_decays_at_least_like_the_barrier() {
    assert!(sphere_run(81).psi_rate_excess <= 1e-3);
    let prelude = dumbbell_run().prelude.as_ref().unwrap();
    assert!(prelude.psi_rate_excess <= 1e-3, "{}", prelude.psi_rate_excess);
}

#[test]
fn sphere_has_unit_q_throughout() {
    let r = sphere_run(161);
    assert!(r.q_max.iter().all(|&q| (q - 1.0).abs() < 1e-3));
}

#[test]
fn dumbbell_keeps_q_below_one_and_peak_curvature_at_the_tips() {
    let run = dumbbell_run();
    assert!(!run.prelude.as_ref().unwrap().neckpinch);
    assert_eq!(run.stop, StopReason::Extinction);
    assert!(run.q_max_overall() <= 1.0 + 1e-3, "{}", run.q_max_overall());
    assert!(run.snapshots.len() > 5);
    for s in &run.snapshots {
        assert_eq!(s.monitors.r_max_location, RmaxLocation::Tip, "tau = {}", s.monitors.tau);
    }
}

#[test]
fn dumbbell_becomes_and_stays_concave() {
    let snaps = &dumbbell_run().snapshots;
    assert!(snaps[0].monitors.max_u_ss > 0.1);
    let first = snaps.iter().position(|s| s.monitors.max_u_ss <= 1e-8).expect("never concave");
    assert!(snaps[first..].iter().all(|s| s.monitors.max_u_ss <= 1e-8));
    let q_min = |s: &flow::Snapshot| s.profile.curvatures().q.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(snaps[first..].windows(2).all(|w| q_min(&w[1]) >= q_min(&w[0])));
}

#[test]
fn tangential_curvature_increases_towards_the_tip() {
    let run = dumbbell_run();
    for s in &run.snapshots {
        let c = s.profile.curvatures();
        let u = s.profile.u();
        // from the widest point on the right to the tip, where u_σ ≤ 0
        let cut = (s.profile.anchor()..u.len()).max_by(|&a, &b| u[a].total_cmp(&u[b])).unwrap();
        let k1 = &c.k1[cut..];
        let scale = k1.iter().copied().fold(0.0, f64::max);
        // Q ≤ 1 holds up to discretisation slack, so does the monotonicity
        assert!(k1.windows(2).all(|w| w[1] >= w[0] - 1e-3 * scale), "tau = {}", s.monitors.tau);
    }
}

#[test]
fn cylinder_is_a_fixed_point() {
    let mut r = cylinder(401, 10.0);
    for _ in 0..1000 {
        let next = flow::step_rescaled(&r, 1e-4).unwrap();
        let step = next.u().iter().zip(r.u()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(step <= 1e-12, "{step:e}");
        r = next;
    }
    assert!(r.u().iter().all(|u| (u - SQRT_2).abs() <= 1e-12));
    assert!(flow::j_field(&r).unwrap().iter().all(|j| j.abs() < 1e-10));
    let chart = flow::to_tip_chart(&r, Side::Plus).unwrap();
    assert!(chart.y.iter().all(|&y| y.abs() < 1e-20));
}

#[test]
fn unstable_mode_grows_and_neutral_mode_stays() {
    let eps = 1e-3;
    let m = 1201;
    let base = cylinder(m, 12.0);
    let u: Vec<f64> = base.sigma().iter().map(|s| SQRT_2 * (1.0 + eps * (s * s - 1.0))).collect();
    let mut r = RescaledProfile::new(base.sigma().to_vec(), u, -5.0, Boundary::Neumann).unwrap();
    let dtau = 1e-4;
    for _ in 0..5000 {
        r = flow::step_rescaled(&r, dtau).unwrap();
    }
    let v: Vec<f64> = r.u().iter().map(|u| u / SQRT_2 - 1.0).collect();
    let p = spectral::project(r.sigma(), &v).unwrap();
    let grown = eps * 0.5f64.exp();
    assert!((p.plus_coeff / grown - 1.0).abs() < 0.02, "{}", p.plus_coeff / grown);
    assert!((p.alpha / eps - 1.0).abs() < 0.02, "{}", p.alpha / eps);
}

#[test]
fn rescaled_and_unrescaled_flows_commute() {
    for (fixture, t_ext) in [
        (Fixture::Sphere { radius: 1.0, n: 161 }, 0.25),
        (Fixture::Dumbbell { neck: 0.8, bulb: 1.0, n: 161 }, 0.36),
    ] {
        let p0 = fixture.build().unwrap();
        let a = RescaledProfile::from_profile(&step_to(p0.clone(), 0.4 * t_ext), t_ext).unwrap();
        let mut b = RescaledProfile::from_profile(&p0, t_ext).unwrap();
        while b.tau() < a.tau() {
            let h = b.sigma()[1] - b.sigma()[0];
            b = flow::step_rescaled(&b, (0.25 * h * h).min(a.tau() - b.tau())).unwrap();
        }
        let reach = b.sigma_tips().1.min(a.sigma_tips().1);
        let gap = a
            .sigma()
            .iter()
            .zip(a.u())
            .filter(|(s, _)| s.abs() <= reach)
            .map(|(s, u)| (u - lerp_at(b.sigma(), b.u(), *s)).abs())
            .fold(0.0, f64::max);
        assert!(gap < 2e-3, "{fixture:?}: {gap:e}");
    }
}

#[test]
fn rescaled_sphere_is_stationary() {
    let mut r = rescaled_sphere(161);
    let h = r.sigma()[1] - r.sigma()[0];
    for _ in 0..200 {
        r = flow::step_rescaled(&r, 0.25 * h * h).unwrap();
    }
    let err = r.sigma().iter().zip(r.u()).map(|(s, u)| (u - 2.0 * (s / 2.0).cos()).abs()).fold(0.0, f64::max);
    assert!(err < 1e-4, "{err:e}");
    // the tips do not move: σ₊/2 + J(σ₊) = 0
    let plus = flow::tip_ode_rhs(&r, Side::Plus).unwrap();
    let minus = flow::tip_ode_rhs(&r, Side::Minus).unwrap();
    assert!(plus.abs() < 1e-3, "{plus}");
    assert!((plus + minus).abs() < 1e-10);
}

#[test]
fn tip_chart_of_the_sphere_is_closed_form() {
    let r = rescaled_sphere(161);
    let u_max = r.u_max();
    for side in [Side::Plus, Side::Minus] {
        let chart = flow::to_tip_chart(&r, side).unwrap();
        assert!(chart.u.windows(2).all(|w| w[1] > w[0]));
        for (u, y) in chart.u.iter().zip(&chart.y) {
            assert!((y - (1.0 - u * u / (u_max * u_max))).abs() < 1e-6, "u = {u}");
        }
        // the stationary sphere solves the chart equation
        let rhs = chart.rhs();
        let interior = &rhs[3..rhs.len() - 3];
        assert!(interior.iter().all(|v| v.abs() < 1e-3), "{:?}", interior.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    }
}

#[test]
fn chart_equation_tracks_the_flow() {
    let run = dumbbell_run();
    let r0 = &run.snapshots[run.snapshots.len() / 2].profile;
    let h = r0.sigma()[1] - r0.sigma()[0];
    let mut r1 = r0.clone();
    for _ in 0..20 {
        r1 = flow::step_rescaled(&r1, 0.25 * h * h).unwrap();
    }
    let (c0, c1) = (flow::to_tip_chart(r0, Side::Plus).unwrap(), flow::to_tip_chart(&r1, Side::Plus).unwrap());
    let rhs = c0.rhs();
    let dt = c1.tau - c0.tau;
    // closer to the tip the chart derivatives carry an O(h²) error of the same size as the rate
    let window = |y: &f64| (0.2..0.8).contains(y);
    let scale = c0.y.iter().zip(&rhs).filter(|(y, _)| window(y)).fold(0.0f64, |a, (_, f)| a.max(f.abs()));
    let mut checked = 0;
    for ((u, y), f) in c0.u.iter().zip(&c0.y).zip(&rhs) {
        if window(y) {
            let rate = (c1.eval(*u).unwrap() - y) / dt;
            assert!((rate - f).abs() < 0.1 * scale, "u = {u}: {rate} vs {f}");
            checked += 1;
        }
    }
    assert!(checked > 20);
}

#[test]
fn capped_cylinder_has_no_drift_along_the_barrel() {
    let p = Fixture::CappedCylinder { radius: 1.0, length: 6.0, n: 241 }.build().unwrap();
    let r = RescaledProfile::from_profile(&p, 0.5).unwrap();
    let j = flow::j_field(&r).unwrap();
    let barrel = 3.0 / 0.5f64.sqrt();
    for (s, j) in r.sigma().iter().zip(&j) {
        if s.abs() < 0.9 * barrel {
            assert!(j.abs() < 1e-3, "sigma = {s}: {j}");
        }
    }
    // J(σ₊) collects only the cap
    let rhs = flow::tip_ode_rhs(&r, Side::Plus).unwrap();
    let cap = -FRAC_PI_2 * 2.0 / (1.0 / 0.5f64.sqrt());
    assert!((rhs - (r.sigma_tips().1 / 2.0 + cap)).abs() < 1e-2, "{rhs}");
}

#[test]
fn thin_neck_pinches() {
    let p0 = Fixture::Dumbbell { neck: 0.3, bulb: 1.0, n: 161 }.build().unwrap();
    let run = flow::run_to_extinction(&p0, flow::DEFAULT_CFL, true, usize::MAX).unwrap();
    assert!(run.neckpinch);
    assert!(run.t_estimate > run.t_last && run.t_estimate < run.t_last + 0.05);
}

#[test]
fn invalid_steps_are_rejected() {
    let p = Fixture::Sphere { radius: 1.0, n: 41 }.build().unwrap();
    assert!(matches!(flow::step_unrescaled(&p, 1.0), Err(FlowError::Unstable { .. })));
    assert!(RescaledProfile::from_profile(&p, 0.0).is_err());

    // a cone angle defect at the poles
    let s = p.s().to_vec();
    let psi: Vec<f64> = p.psi().iter().map(|w| 1.1 * w).collect();
    let cone = ProfileGrid::new(s, psi, 0.0).unwrap();
    assert!(matches!(flow::step_unrescaled(&cone, 1e-4), Err(FlowError::Closing { .. })));

    let r = rescaled_sphere(41);
    assert!(flow::compute_j(&r, 10.0).is_err());
    assert!(flow::tip_ode_rhs(&cylinder(41, 5.0), Side::Plus).is_err());
}

#[test]
fn run_flow_validates_its_config() {
    let mut cfg = FlowConfig::new(Fixture::Sphere { radius: 1.0, n: 41 });
    cfg.output_every = 0;
    assert!(flow::run_flow(&cfg).is_err());
    cfg.output_every = 10;
    cfg.t_extinction = Some(0.25);
    cfg.tau_end = Some(-10.0);
    assert!(flow::run_flow(&cfg).is_err());
    cfg.tau_end = Some(1.6);
    let run = flow::run_flow(&cfg).unwrap();
    assert_eq!(run.stop, StopReason::TauEnd);
    assert!((run.snapshots.last().unwrap().profile.tau() - 1.6).abs() < 1e-12);
    assert!(run.snapshots.first().unwrap().profile.to_csv().starts_with("sigma,u\n"));
}

#[test]
fn curvatures_of_a_concave_profile_are_positive() {
    let r = rescaled_sphere(81);
    let (_, d2) = r.derivatives();
    assert!(d2.iter().all(|&v| v <= 1e-12));
    let c = r.curvatures();
    assert!(c.k0.iter().chain(&c.k1).all(|&k| k > 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn steps_preserve_reflection_symmetry(eps in -0.2f64..0.2, cfl in 0.05f64..0.5) {
        let n = 61;
        let p = perturbed_sphere(n, eps);
        let h = p.s()[1] - p.s()[0];
        let next = flow::step_unrescaled(&p, cfl * h * h).unwrap();
        for i in 0..n {
            prop_assert!((next.psi()[i] - next.psi()[n - 1 - i]).abs() < 1e-12);
            prop_assert!((next.s()[i] + next.s()[n - 1 - i]).abs() < 1e-12);
        }
        let closing = geometry::closing_residual(&next);
        prop_assert!(closing.slope_minus < 1e-10 && closing.slope_plus < 1e-10);
    }

    #[test]
    fn concave_profiles_have_positive_curvatures(eps in -0.15f64..0.15) {
        // cos s + ε cos³ s is concave with K₀ = 1 − 6ε at the poles
        let c = geometry::curvatures(&perturbed_sphere(81, eps)).unwrap();
        prop_assert!(c.k0.iter().chain(&c.k1).all(|&k| k > 0.0));
    }
}
