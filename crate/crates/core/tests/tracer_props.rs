use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::sync::Arc;

use tradeoff::lagrange::{assemble_in, rates_in, Form};
use tradeoff::linalg::{dot, norm};
use tradeoff::problem::{Example1Problem, Example2Problem, Expression, ObjectivePair};
use tradeoff::tracer::{
    bootstrap_chain, trace, trace_stepwise, EventKind, PathPoint, Sense, TraceConfig, TradeoffPath,
};

struct Run {
    name: &'static str,
    pair: ObjectivePair,
    cfg: TraceConfig,
    path: TradeoffPath,
    /// `F` is bounded in the direction of travel, so the walk must reach `λ = 0`.
    terminates: bool,
}

fn synthetic3() -> ObjectivePair {
    let vars: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
    let f = "sin(2*x)*cos(y) + 0.5*z^2 + 0.05*(x^2+y^2) + 0.3*x*z";
    let h = "(x-0.5)^2 + (y-0.2)^2 + z^2";
    ObjectivePair::new(
        "synthetic3",
        Arc::new(Expression::parse(f, &vars).unwrap()),
        Arc::new(Expression::parse(h, &vars).unwrap()),
    )
    .unwrap()
}

fn runs() -> Vec<Run> {
    let ex1 = Example1Problem::new(2.0, 1.0, 1.0, 1.0);
    let ex2 = Example2Problem::new(1.0, 1.0, 2.0, 3.0);
    let base = TraceConfig::default();
    let syn_cfg = TraceConfig {
        sense: Sense::Maximize,
        max_arc_length: 30.0,
        ..TraceConfig::default()
    };
    let line = vec![FRAC_PI_4, -FRAC_PI_2];
    let syn = vec![0.5, 0.2, 0.0];
    let cases: Vec<(&'static str, ObjectivePair, Vec<f64>, TraceConfig, bool, bool)> = vec![
        ("example1/trace", ex1.pair(), ex1.h_cio(), base.clone(), false, true),
        ("example1/stepwise", ex1.pair(), ex1.h_cio(), base.clone(), true, true),
        ("example2 line/trace", ex2.pair(), line.clone(), base.clone(), false, true),
        ("example2 line/stepwise", ex2.pair(), line, base.clone(), true, true),
        ("synthetic3 min/trace", synthetic3(), syn.clone(), base.clone(), false, true),
        ("synthetic3 min/stepwise", synthetic3(), syn.clone(), base, true, true),
        ("synthetic3 max/trace", synthetic3(), syn.clone(), syn_cfg.clone(), false, false),
        ("synthetic3 max/stepwise", synthetic3(), syn, syn_cfg, true, false),
    ];
    cases
        .into_iter()
        .map(|(name, pair, start, cfg, stepwise, terminates)| {
            let path = if stepwise {
                trace_stepwise(&pair, &start, &cfg)
            } else {
                trace(&pair, &start, &cfg)
            }
            .unwrap_or_else(|e| panic!("{name}: {e}"));
            Run {
                name,
                pair,
                cfg,
                path,
                terminates,
            }
        })
        .collect()
}

fn param(p: &PathPoint, form: Form) -> Option<f64> {
    match form {
        Form::Lambda => p.lambda.finite(),
        Form::Mu => p.mu.finite(),
    }
}

fn chord(a: &PathPoint, b: &PathPoint) -> Vec<f64> {
    b.k.iter().zip(&a.k).map(|(x, y)| x - y).collect()
}

#[test]
fn paths_stay_on_the_manifold() {
    for run in runs() {
        for p in &run.path.points {
            assert!(p.residual < run.cfg.polish_tol, "{}: residual {:e} at s = {}", run.name, p.residual, p.s);
        }
    }
}

#[test]
fn arc_length_is_monotone_and_steps_are_bounded() {
    for run in runs() {
        for w in run.path.points.windows(2) {
            assert!(w[1].s > w[0].s, "{}: s not increasing at {}", run.name, w[0].s);
            let gap = norm(&chord(&w[0], &w[1]));
            assert!(gap <= 1.5 * run.cfg.max_step, "{}: jump {gap} at s = {}", run.name, w[0].s);
            assert!(gap <= 1.5 * (w[1].s - w[0].s) + 1e-15, "{}: chord exceeds arc at s = {}", run.name, w[0].s);
        }
    }
}

#[test]
fn direction_never_flips() {
    for run in runs() {
        let pts = &run.path.points;
        let mut checked = 0;
        for i in 1..pts.len() - 1 {
            let (back, ahead) = (chord(&pts[i - 1], &pts[i]), chord(&pts[i], &pts[i + 1]));
            assert!(dot(&back, &ahead) > 0.0, "{}: chords reverse at s = {}", run.name, pts[i].s);
            let form = pts[i].form;
            let Some(t) = param(&pts[i], form) else { continue };
            let state = assemble_in(&run.pair, &pts[i].k, form, t).unwrap();
            // the tangent is undefined where it passes through zero
            let Ok(rates) = rates_in(&state, form) else { continue };
            let (a, b) = (dot(&rates.direction, &back), dot(&rates.direction, &ahead));
            assert!(a * b > 0.0, "{}: tangent flips at s = {}", run.name, pts[i].s);
            checked += 1;
        }
        assert!(checked * 10 > pts.len() * 9, "{}: only {checked} of {} checked", run.name, pts.len());
    }
}

#[test]
fn terminated_paths_end_at_a_stationary_point_of_f() {
    for run in runs() {
        if !run.terminates {
            assert_eq!(run.path.last_event().unwrap().kind, EventKind::StepLimit, "{}", run.name);
            continue;
        }
        assert!(run.path.terminated(), "{}: {:?}", run.name, run.path.event_kinds());
        let end = run.path.end().unwrap();
        let lambda = end.lambda.finite().unwrap();
        assert!(lambda.abs() < run.cfg.lambda_stop_tol, "{}: λ = {lambda}", run.name);
        let jet = run.pair.eval_f(&end.k).unwrap();
        let bound = 10.0 * run.cfg.polish_tol * (1.0 + jet.hess.max_abs() * norm(&end.k));
        assert!(norm(&jet.grad) < bound, "{}: |∇F| = {:e}", run.name, norm(&jet.grad));
        assert_eq!(run.path.last_event().unwrap().kind, EventKind::Termination);
    }
}

#[test]
fn secant_slope_matches_multiplier() {
    for run in runs() {
        let mut agree = 0;
        let mut total = 0;
        for w in run.path.points.windows(2) {
            let dh = w[1].h - w[0].h;
            if dh.abs() <= 1e-9 {
                continue;
            }
            let mid = match (w[0].form, w[1].form) {
                (Form::Mu, Form::Mu) => match (w[0].mu.finite(), w[1].mu.finite()) {
                    (Some(a), Some(b)) if a + b != 0.0 => 2.0 / (a + b),
                    _ => continue,
                },
                _ => match (w[0].lambda.finite(), w[1].lambda.finite()) {
                    (Some(a), Some(b)) => 0.5 * (a + b),
                    _ => continue,
                },
            };
            let slope = (w[1].f - w[0].f) / dh;
            total += 1;
            if (slope - mid).abs() <= 1e-3 * mid.abs().max(1e-3) {
                agree += 1;
            }
        }
        assert!(total > 50 && agree * 100 >= total * 95, "{}: {agree}/{total}", run.name);
    }
}

#[test]
fn switch_band_does_not_move_the_curve() {
    let ex = Example1Problem::new(2.0, 1.0, 1.0, 1.0);
    let pair = ex.pair();
    for band in [[0.5, 2.0], [0.9, 1.1]] {
        let cfg = TraceConfig {
            switch_band: band,
            ..TraceConfig::default()
        };
        let path = trace(&pair, &ex.h_cio(), &cfg).unwrap();
        assert!(path.terminated());
        assert!(path.events_of(EventKind::ParamSwitch).count() >= 1);
        for p in &path.points {
            let want = match (p.lambda.finite(), p.mu.finite()) {
                (Some(l), _) if l.abs() <= 1.0 => ex.curve_at(l),
                (_, Some(m)) => ex.curve_at_mu(m),
                (Some(l), None) => ex.curve_at(l),
                (None, None) => unreachable!(),
            };
            let d = ((p.k[0] - want[0]).powi(2) + (p.k[1] - want[1]).powi(2)).sqrt();
            assert!(d < 1e-7, "band {band:?}: {d:e} off the curve at s = {}", p.s);
        }
    }
}

#[test]
fn refined_inflections_are_bracketed() {
    let mut found = 0;
    for run in runs() {
        for event in run.path.events_of(EventKind::Inflection) {
            assert!(
                event.value.abs() <= run.cfg.event_refine_tol * event.scale || event.low_precision,
                "{}: det {:e} at s = {}",
                run.name,
                event.value,
                event.s
            );
            let pts = &run.path.points;
            let i = pts.iter().position(|p| p.s == event.s).expect("event point is on the path");
            let det_at = |p: &PathPoint| {
                let t = param(p, event.form).unwrap();
                assemble_in(&run.pair, &p.k, event.form, t)
                    .unwrap()
                    .quantities(event.form)
                    .unwrap()
                    .det
            };
            let (before, after) = (det_at(&pts[i - 1]), det_at(&pts[i + 1]));
            assert!(before * after < 0.0, "{}: det {before:e} and {after:e} around s = {}", run.name, event.s);
            found += 1;
        }
    }
    assert!(found >= 3, "only {found} inflections across all runs");
}

#[test]
fn chaining_through_the_true_constraint_is_a_plain_trace() {
    let pair = synthetic3();
    let cfg = TraceConfig::default();
    let start = [0.5, 0.2, 0.0];
    let plain = trace(&pair, &start, &cfg).unwrap();
    let chained = bootstrap_chain(&pair, pair.h().clone(), &start, &cfg).unwrap();
    assert_eq!(plain.points.len(), chained.artificial.points.len());
    for (a, b) in plain.points.iter().zip(&chained.artificial.points) {
        let d = norm(&chord(a, b));
        assert!(d < 1e-9 && (a.s - b.s).abs() < 1e-9);
    }
    assert_eq!(plain.event_kinds(), chained.artificial.event_kinds());
    let end = chained.link.end().unwrap();
    let grad = norm(&pair.eval_h(&end.k).unwrap().grad);
    assert!(chained.link.terminated() && grad < 1e-8, "|∇H| = {grad:e}");
}
