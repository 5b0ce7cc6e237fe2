//! One pipeline per subcommand.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;
use std::fmt::Write as _;

use ricci_core::asymptotics::{self, KappaModel, MatchedAnsatz, Region};
use ricci_core::barriers::{self, BarrierCurve};
use ricci_core::bryant::{self, BryantProfile};
use ricci_core::flow::{self, FlowConfig, RmaxLocation, StopReason};
use ricci_core::geometry::Fixture;
use ricci_core::numerics::loglog_slope;
use ricci_core::spectral;
use serde_json::json;

use crate::args::{BarrierArgs, BryantArgs, FlowArgs, PredictArgs, ResidualArgs, SpectralArgs};
use crate::error::CliError;
use crate::report::{to_value, CheckLine, Outcome};
use crate::settings::Settings;

/// Default neck radius of the flow command's dumbbell.
const DUMBBELL_NECK: f64 = 0.8;

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(config_error(format!("`{name}` must be positive, got {v}")))
    }
}

fn solve_soliton(rho_max: f64, tol: f64) -> Result<BryantProfile, CliError> {
    Ok(bryant::solve_bryant(positive("rho_max", rho_max)?, positive("tol", tol)?)?)
}

pub fn bryant(args: BryantArgs, s: &mut Settings) -> Result<Outcome, CliError> {
    let rho_max = s.get("rho_max", args.rho_max, 50.0)?;
    let tol = s.get("tol", args.tol, 1e-10)?;
    let b = solve_soliton(rho_max, tol)?;

    let c0 = bryant::compute_c0(&b)?;
    let consts = bryant::constants(&b)?;
    let origin_gap = (0..=200)
        .map(|k| 0.2 * k as f64 / 200.0)
        .map(|f| Ok((b.eval(f)?.0 - (1.0 + bryant::B0 * f * f)).abs()))
        .collect::<Result<Vec<_>, CliError>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let divergence = bryant::divergence_residual(&b).sup();
    let near_origin = bryant::boundary_functional(&b, 0.01)?;

    let mut checks = vec![
        CheckLine::at_most("c0", (c0.value + 1.0).abs(), 1e-3),
        CheckLine::at_most("origin_expansion", origin_gap, 1e-4),
        CheckLine::at_most("divergence_identity", divergence, 1e-4),
        CheckLine::at_most("boundary_origin", near_origin.abs(), 1e-2),
    ];
    let mut far = serde_json::Value::Null;
    if rho_max >= 30.0 {
        let r2z = b.rho2z(30.0)?;
        let far_value = bryant::boundary_functional(&b, 30.0)?;
        checks.push(CheckLine::new("rho2_z_at_30", (0.995..=1.005).contains(&r2z), format!("{r2z:.6}")));
        checks.push(CheckLine::at_most("boundary_infinity", (far_value + 1.0).abs(), 1e-2));
        far = json!({ "rho2_z_at_30": r2z, "boundary_functional_at_30": far_value });
    }
    Ok(Outcome {
        command: "bryant",
        config: json!({ "rho_max": rho_max, "tol": tol }),
        results: json!({
            "C0": c0.value,
            "c0_report": to_value(&c0),
            "constants": to_value(&consts),
            "origin_expansion_gap": origin_gap,
            "divergence_sup": divergence,
            "boundary_functional_at_0_01": near_origin,
            "far_field": far,
        }),
        checks,
        files: vec![("bryant.csv".into(), b.to_csv())],
    })
}

pub fn barrier(args: BarrierArgs, s: &mut Settings) -> Result<Outcome, CliError> {
    let a_values = s.list("a", args.a, &[30.0, 50.0, 100.0])?;
    let eta = positive("eta", s.get("eta", args.eta, 0.1)?)?;
    let rho_max = s.get("rho_max", args.rho_max, 40.0)?;
    let soliton = solve_soliton(rho_max, 1e-11)?;

    let curves: Vec<BarrierCurve> = std::thread::scope(|scope| {
        let handles: Vec<_> =
            a_values.iter().map(|&a| {
            let soliton = &soliton;
            scope.spawn(move || barriers::build_barrier(a, soliton))
        }).collect();
        handles.into_iter().map(|h| h.join().expect("barrier worker panicked")).collect::<Result<Vec<_>, _>>()
    })?;

    let mut checks = Vec::new();
    let mut per_a = Vec::new();
    let mut files = Vec::new();
    let mut remainders = Vec::new();
    for b in &curves {
        let r = barriers::supersolution_residual(b, eta);
        checks.push(CheckLine::new(
            format!("residual_negative_a{}", b.a),
            r.negative,
            format!("sup {:.6e} at u = {:.4}", r.sup, r.sup_at),
        ));
        let remainder = b
            .u
            .iter()
            .zip(&b.ya)
            .filter(|(u, _)| (SQRT_2 - 0.1..=SQRT_2 + 0.1).contains(*u))
            .map(|(u, y)| (y - (2.0 / (u * u) - 1.0) / (b.a * b.a)).abs())
            .fold(0.0, f64::max);
        remainders.push(remainder);
        per_a.push(json!({
            "a": b.a, "lambda": b.lambda, "u_join": b.u_join, "window": r.window,
            "residual_sup": r.sup, "residual_sup_at": r.sup_at, "leading_term_remainder": remainder,
        }));
        files.push((format!("barrier_a{}.csv", b.a), b.to_csv()));
        files.push((format!("residual_a{}.csv", b.a), r.to_csv()));
    }
    let mut exponent = None;
    if curves.len() >= 2 {
        let p = -loglog_slope(&a_values, &remainders);
        checks.push(CheckLine::new("remainder_order_four", (p - 4.0).abs() < 0.2, format!("fitted exponent {p:.4}")));
        exponent = Some(p);
    }
    Ok(Outcome {
        command: "barrier",
        config: json!({ "a": a_values, "eta": eta, "rho_max": rho_max }),
        results: json!({ "barriers": per_a, "remainder_exponent": exponent }),
        checks,
        files,
    })
}

pub fn spectral(args: SpectralArgs, s: &mut Settings) -> Result<Outcome, CliError> {
    let taus = s.list_opt("tau", args.tau)?;
    let identities = s.switch("identities", args.identities)? || taus.is_empty();
    let mut checks = Vec::new();
    let mut report = serde_json::Map::new();
    if identities {
        let r = spectral::hermite_identities();
        checks.push(CheckLine::new("square_identity", r.square_identity, "h2^2 = h4 + 8 h2 + 8 h0"));
        checks.push(CheckLine::new("derivative_identity", r.derivative_identity, "(h2')^2 = 4 h2 + 8 h0"));
        checks.push(CheckLine::new("eigen_exact", r.eigen_exact, "L h_2k = (1 - k) h_2k"));
        checks.push(CheckLine::at_most("orthogonality", r.orthogonality, 1e-10));
        checks.push(CheckLine::at_most("eigen_relation", r.eigen_relation, 1e-10));
        checks.push(CheckLine::at_most("cubic_integral", r.cubic_rel_error, 1e-8));
        report.insert("identities".into(), to_value(&r));
    }
    let mut projections = Vec::new();
    for &tau in &taus {
        let tau = -tau.abs();
        let p = asymptotics::parabolic_alpha(tau)?;
        let expected = -1.0 / (8.0 * tau.abs());
        checks.push(CheckLine::at_most(format!("alpha_tau{tau}"), (p.alpha / expected - 1.0).abs(), 1e-4));
        projections.push(json!({
            "tau": tau, "alpha": p.alpha, "alpha_raw": p.alpha_raw, "alpha_expected": expected,
            "plus": p.plus_coeff, "minus_norm": p.minus_norm,
        }));
    }
    report.insert("projections".into(), json!(projections));
    Ok(Outcome {
        command: "spectral",
        config: json!({ "identities": identities, "tau": taus }),
        results: serde_json::Value::Object(report),
        checks,
        files: Vec::new(),
    })
}

pub fn flow(args: FlowArgs, s: &mut Settings) -> Result<Outcome, CliError> {
    let kind: String = s.get("fixture", args.fixture, "dumbbell".to_string())?;
    let mut params = BTreeMap::new();
    for (key, flag) in [("radius", args.radius), ("length", args.length), ("neck", args.neck), ("bulb", args.bulb)] {
        if let Some(v) = s.opt(key, flag)? {
            params.insert(key.to_string(), v);
        }
    }
    if let Some(n) = s.opt::<usize>("n_sigma", args.n_sigma)? {
        params.insert("n".into(), n as f64);
    }
    // a thinner neck pinches before the caps shrink
    if kind == "dumbbell" {
        params.entry("neck".into()).or_insert(DUMBBELL_NECK);
    }
    let fixture = Fixture::from_params(&kind, &params)?;
    let defaults = FlowConfig::new(fixture);
    let cfg = FlowConfig {
        fixture,
        dtau: s.get("dtau", args.dtau, defaults.dtau)?,
        tau_end: s.opt("tau_end", args.tau_end)?,
        symmetry: s.get("symmetry", args.symmetry, defaults.symmetry)?,
        output_every: s.get("output_every", args.output_every, defaults.output_every)?,
        t_extinction: s.opt("t_extinction", args.t_extinction)?,
        cfl: s.get("cfl", args.cfl, defaults.cfl)?,
        max_steps: s.get("max_steps", args.max_steps, defaults.max_steps)?,
    };
    if !(cfg.cfl > 0.0 && cfg.cfl <= flow::STABILITY) {
        return Err(config_error(format!("`cfl` must lie in (0, {}], got {}", flow::STABILITY, cfg.cfl)));
    }
    let run = flow::run_flow(&cfg)?;

    let q_max = run.q_max_overall();
    let tips = run.snapshots.iter().filter(|s| s.monitors.r_max_location == RmaxLocation::Tip).count();
    let mut checks = vec![
        CheckLine::at_most("q_max", q_max, 1.0 + 1e-3),
        CheckLine::new(
            "r_max_at_tips",
            tips == run.snapshots.len(),
            format!("{tips} of {} outputs", run.snapshots.len()),
        ),
    ];
    if let StopReason::Failed(msg) = &run.stop {
        checks.push(CheckLine::new("completed", false, msg.clone()));
    }

    let mut files = Vec::new();
    let mut log = String::new();
    for (k, snap) in run.snapshots.iter().enumerate() {
        files.push((format!("snapshot_{k:04}.csv"), snap.profile.to_csv()));
        log.push_str(&serde_json::to_string(&snap.monitors).expect("monitors serialise"));
        log.push('\n');
    }
    files.push(("monitors.jsonl".into(), log));
    let mut q_csv = String::from("step,q_max\n");
    for (i, q) in run.q_max.iter().enumerate() {
        let _ = writeln!(q_csv, "{},{q:.12e}", i + 1);
    }
    files.push(("q_max.csv".into(), q_csv));

    let prelude = run.prelude.as_ref().map(|p| {
        json!({ "t_last": p.t_last, "t_estimate": p.t_estimate, "steps": p.steps, "neckpinch": p.neckpinch })
    });
    Ok(Outcome {
        command: "flow",
        config: to_value(&cfg),
        results: json!({
            "t_extinction": run.t_extinction,
            "extinction_estimated": run.extinction_estimated,
            "prelude": prelude,
            "steps": run.steps,
            "stop": to_value(&run.stop),
            "q_max_overall": q_max,
            "snapshots": run.snapshots.len(),
            "final": run.snapshots.last().map(|s| to_value(&s.monitors)),
        }),
        checks,
        files,
    })
}

pub fn residual(args: ResidualArgs, s: &mut Settings) -> Result<Outcome, CliError> {
    let region: Region = s.get("region", args.region, Region::Parabolic.name().to_string())?.parse()?;
    let ladder: Vec<f64> = s.list("tau_ladder", args.tau_ladder, &[100.0, 200.0, 400.0, 800.0])?.iter().map(|t| -t.abs()).collect();
    let mut base = MatchedAnsatz::new(ladder[0]);
    base.parabolic_l = s.get("l", args.l, base.parabolic_l)?;
    base.theta = s.get("theta", args.theta, base.theta)?;
    base.overlap = s.get("overlap", args.overlap, base.overlap)?;
    base.seam_tolerance = s.get("seam_tolerance", args.seam_tolerance, base.seam_tolerance)?;
    base.spacing = s.opt("spacing", args.spacing)?;
    if let Some(c) = s.opt("kappa_log", args.kappa_log)? {
        base.kappa_model = KappaModel::Log { c };
    }
    let default_min = (region == Region::Parabolic).then_some(1.7);
    let min_exponent = s.opt("min_exponent", args.min_exponent)?.or(default_min);
    let tip_tau = s.opt("tip_tau", args.tip_tau)?.map(|t: f64| -t.abs());
    let rho_max = s.get("rho_max", args.rho_max, 40.0)?;
    let soliton = solve_soliton(rho_max, 1e-10)?;

    let report = asymptotics::residual_ladder(&base, &ladder, &soliton)?;
    let exponent = report.exponent(region);
    let mut checks = Vec::new();
    if let Some(min) = min_exponent {
        checks.push(CheckLine::at_least(format!("{}_exponent", region.name()), exponent, min));
    }
    let deepest = ladder.iter().copied().fold(f64::INFINITY, f64::min);
    let glued = MatchedAnsatz { tau: deepest, ..base }.build(&soliton)?;
    let mut files = vec![
        ("ladder.csv".to_string(), report.to_csv()),
        (format!("profile_tau{}.csv", deepest.abs()), glued.to_csv()),
    ];
    let mut tip = serde_json::Value::Null;
    if let Some(tau) = tip_tau {
        let tc = asymptotics::tip_consistency(&MatchedAnsatz { tau, ..base }, &soliton)?;
        for c in &tc.checks {
            checks.push(CheckLine::new(
                c.name,
                c.passed,
                format!("{:.6e} <= {:.3e} at {:.4}", c.value, c.limit, c.at),
            ));
        }
        files.push((format!("tip_profile_tau{}.csv", tau.abs()), MatchedAnsatz { tau, ..base }.build(&soliton)?.to_csv()));
        tip = to_value(&tc);
    }
    Ok(Outcome {
        command: "residual",
        config: json!({
            "region": region, "tau_ladder": ladder, "ansatz": to_value(&base), "min_exponent": min_exponent,
            "tip_tau": tip_tau, "rho_max": rho_max,
        }),
        results: json!({
            "region": region,
            "exponent": exponent,
            "ladder": to_value(&report),
            "tip_consistency": tip,
        }),
        checks,
        files,
    })
}

pub fn predict(args: PredictArgs, s: &mut Settings) -> Result<Outcome, CliError> {
    let times = s.list("t", args.t, &[-1e6])?;
    let predictions = times.iter().map(|&t| asymptotics::predictions(t)).collect::<Result<Vec<_>, _>>()?;
    let mut csv = String::from("t,k,d\n");
    for p in &predictions {
        let _ = writeln!(csv, "{:e},{:.12e},{:.12e}", p.t, p.k, p.d);
    }
    Ok(Outcome {
        command: "predict",
        config: json!({ "t": times }),
        results: json!({ "predictions": to_value(&predictions) }),
        checks: Vec::new(),
        files: vec![("predictions.csv".into(), csv)],
    })
}
