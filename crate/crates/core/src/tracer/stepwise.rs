//! Continuation by repeated root solves in small increments.
//!
//! Each step pins either the multiplier or one objective value, predicts along
//! the tangent and lets Newton land on the curve. Pinning the multiplier breaks
//! down where it turns around (an inflection), pinning an objective where the
//! objectives turn around (an extremum), so a failed step switches pins and
//! only shrinks the increment when both fail.

use log::debug;

use crate::lagrange::{assemble_in, rates_in, Form, LagrangeError};
use crate::linalg::{dot, norm};
use crate::problem::ObjectivePair;

use super::engine::{begin, Begin};
use super::events::{band_switch, make_point, oriented_direction, Flow, PathBuilder, Probe};
use super::polish::{polish, Pin};
use super::{EventKind, TraceConfig, TraceError, TradeoffPath};

/// A converged step may land at most this fraction of the increment away from the prediction.
const MAX_JUMP: f64 = 0.25;
const MIN_TURN_COS: f64 = 0.7;
/// The increment may shrink to this fraction of `max_step` before giving up.
const MIN_INCREMENT_RATIO: f64 = 1e-9;
/// Below this fraction of `max_step` a full-length step along the heading is tried first.
const BRIDGE_RATIO: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    /// Multiplier of the form held at each step's target.
    Param(Form),
    /// `h` held (λ-form) or `f` held (μ-form).
    Objective(Form),
}

impl Mode {
    fn form(self) -> Form {
        match self {
            Mode::Param(f) | Mode::Objective(f) => f,
        }
    }

    fn complement(self) -> Mode {
        match self {
            Mode::Param(f) => Mode::Objective(f),
            Mode::Objective(f) => Mode::Param(f),
        }
    }

    fn with_form(self, form: Form) -> Mode {
        match self {
            Mode::Param(_) => Mode::Param(form),
            Mode::Objective(_) => Mode::Objective(form),
        }
    }
}

enum Step {
    Ok { probe: Probe, dir: Vec<f64> },
    Zero { probe: Probe },
    Failed,
}

fn increment(
    pair: &ObjectivePair,
    cfg: &TraceConfig,
    mode: Mode,
    here: &Probe,
    dir: &[f64],
    heading: &[f64],
    len: f64,
) -> Step {
    let form = mode.form();
    let Ok(rates) = rates_in(&here.state, form) else {
        return Step::Failed;
    };
    let Some(t0) = here.state.param(form) else {
        return Step::Failed;
    };
    let rates = if dot(&rates.direction, dir) < 0.0 { rates.negated() } else { rates };
    let predicted: Vec<f64> = here.state.k.iter().zip(&rates.direction).map(|(k, d)| k + len * d).collect();
    let t_pred = t0 + len * rates.dparam_ds;
    let (pin, t_start) = match mode {
        Mode::Param(_) => (Pin::Param, t_pred),
        Mode::Objective(Form::Lambda) => (Pin::FixedH(here.state.h + len * rates.dh_ds), t_pred),
        Mode::Objective(Form::Mu) => (Pin::FixedF(here.state.f + len * rates.df_ds), t_pred),
    };
    let Ok(out) = polish(pair, &predicted, t_start, form, &pin, cfg.polish_tol) else {
        return Step::Failed;
    };
    let jump = norm(&out.k.iter().zip(&predicted).map(|(a, b)| a - b).collect::<Vec<_>>());
    let chord: Vec<f64> = out.k.iter().zip(&here.state.k).map(|(a, b)| a - b).collect();
    let chord_len = norm(&chord);
    // near a branch point the local tangent is unreliable, so the incoming direction is checked too
    let turned = |v: &[f64], scale: f64| {
        [&rates.direction[..], dir, heading].iter().any(|d| dot(v, d) < MIN_TURN_COS * scale)
    };
    if jump > MAX_JUMP * len || !(chord_len > 0.0) || turned(&chord, chord_len) {
        return Step::Failed;
    }
    let Ok(state) = assemble_in(pair, &out.k, form, out.t) else {
        return Step::Failed;
    };
    let probe = Probe {
        state,
        s: here.s + chord_len,
    };
    match oriented_direction(&probe.state, form, &rates.direction) {
        Ok(next) if !turned(&next, 1.0) => Step::Ok { probe, dir: next },
        Ok(_) => Step::Failed,
        Err(LagrangeError::ZeroDirection { .. }) => Step::Zero { probe },
        Err(_) => Step::Failed,
    }
}

/// Full-length step along `heading`, corrected on the hyperplane orthogonal to it.
///
/// Used where both pins stall, typically beside a point where another branch
/// of the curve crosses and the local tangent is unreliable.
fn bridge(pair: &ObjectivePair, cfg: &TraceConfig, form: Form, here: &Probe, heading: &[f64], len: f64) -> Step {
    let Some(t0) = here.state.param(form) else {
        return Step::Failed;
    };
    let predicted: Vec<f64> = here.state.k.iter().zip(heading).map(|(k, d)| k + len * d).collect();
    let pin = Pin::Hyperplane {
        point: predicted.clone(),
        normal: heading.to_vec(),
    };
    let Ok(out) = polish(pair, &predicted, t0, form, &pin, cfg.polish_tol) else {
        return Step::Failed;
    };
    let jump = norm(&out.k.iter().zip(&predicted).map(|(a, b)| a - b).collect::<Vec<_>>());
    if jump > MAX_JUMP * len {
        return Step::Failed;
    }
    let chord_len = norm(&out.k.iter().zip(&here.state.k).map(|(a, b)| a - b).collect::<Vec<_>>());
    let Ok(state) = assemble_in(pair, &out.k, form, out.t) else {
        return Step::Failed;
    };
    let probe = Probe {
        state,
        s: here.s + chord_len,
    };
    match oriented_direction(&probe.state, form, heading) {
        Ok(next) if dot(&next, heading) >= MIN_TURN_COS => Step::Ok { probe, dir: next },
        _ => Step::Failed,
    }
}

/// Point on the curve where the hyperplane at fraction `theta` of the chord crosses it.
fn chord_probe(
    pair: &ObjectivePair,
    cfg: &TraceConfig,
    form: Form,
    a: &Probe,
    b: &Probe,
    theta: f64,
) -> Result<Probe, TraceError> {
    let chord: Vec<f64> = b.state.k.iter().zip(&a.state.k).map(|(x, y)| x - y).collect();
    let len = norm(&chord);
    let normal: Vec<f64> = chord.iter().map(|c| c / len).collect();
    let point: Vec<f64> = a.state.k.iter().zip(&chord).map(|(k, c)| k + theta * c).collect();
    let (ta, tb) = (
        a.state.param(form).unwrap_or(0.0),
        b.state.param(form).unwrap_or(0.0),
    );
    let out = polish(
        pair,
        &point,
        ta + theta * (tb - ta),
        form,
        &Pin::Hyperplane { point: point.clone(), normal },
        cfg.polish_tol,
    )
    .map_err(|_| TraceError::PolishDiverged {
        last: Box::new(make_point(&a.state, a.s, form)),
    })?;
    Ok(Probe {
        state: assemble_in(pair, &out.k, form, out.t)?,
        s: a.s + theta * (b.s - a.s),
    })
}

/// Follows the curve from a stationary point of `H` by increments of the
/// multiplier, switching to fixed-objective increments where those fail.
///
/// Produces the same kinds of events as [`super::trace`]; arc length is
/// accumulated from chord lengths.
pub fn trace_stepwise(pair: &ObjectivePair, start: &[f64], cfg: &TraceConfig) -> Result<TradeoffPath, TraceError> {
    let (mut here, mut dir, mut path): (Probe, Vec<f64>, PathBuilder) = match begin(pair, start, cfg)? {
        Begin::Walk { here, dir, path } => (here, dir, path),
        Begin::Done(path) => return Ok(path),
    };
    let target = cfg.max_step;
    let mut len = target;
    let mut mode = Mode::Param(Form::Mu);
    let mut swapped = false;
    let mut steps = 0usize;
    // direction of travel, refreshed only after half a full increment so that
    // a run of tiny steps cannot rotate onto a crossing branch
    let mut heading = (dir.clone(), here.s);
    loop {
        let remaining = cfg.max_arc_length - here.s;
        if remaining <= 0.0 || steps >= cfg.max_steps {
            let value = here.state.param(mode.form()).unwrap_or(f64::NAN);
            path.mark_last(EventKind::StepLimit, mode.form(), value);
            return Ok(path.finish(pair, cfg));
        }
        let form = mode.form();
        let mut outcome = increment(pair, cfg, mode, &here, &dir, &heading.0, len.min(remaining));
        if matches!(outcome, Step::Failed) && len < BRIDGE_RATIO * target {
            outcome = bridge(pair, cfg, form, &here, &heading.0, target.min(remaining));
            if !matches!(outcome, Step::Failed) {
                debug!("bridged a stall at s = {}", here.s);
                len = target;
            }
        }
        match outcome {
            Step::Failed => {
                mode = mode.complement();
                if swapped {
                    len *= 0.5;
                    if len < MIN_INCREMENT_RATIO * target {
                        return Err(TraceError::StuckAtCorner {
                            s: here.s,
                            last: Box::new(make_point(&here.state, here.s, form)),
                        });
                    }
                }
                swapped = !swapped;
            }
            Step::Zero { probe } => {
                let prev = here.clone();
                let end = probe.clone();
                let flow = path.accept_step(pair, cfg, form, &dir, &prev, &probe, |theta| {
                    chord_probe(pair, cfg, form, &prev, &end, theta)
                })?;
                if let Flow::Continue = flow {
                    let value = probe.state.param(form).unwrap_or(f64::NAN);
                    path.mark_last(EventKind::ZeroDirection, form, value);
                }
                return Ok(path.finish(pair, cfg));
            }
            Step::Ok { probe, dir: next_dir } => {
                steps += 1;
                swapped = false;
                let prev = here.clone();
                let end = probe.clone();
                let before = path.events.len();
                let flow = path.accept_step(pair, cfg, form, &dir, &prev, &probe, |theta| {
                    chord_probe(pair, cfg, form, &prev, &end, theta)
                })?;
                if let Flow::Stop = flow {
                    return Ok(path.finish(pair, cfg));
                }
                for event in &path.events[before..] {
                    let next_mode = match (event.kind, mode) {
                        (EventKind::Extremum, Mode::Objective(f)) => Mode::Param(f),
                        (EventKind::Inflection, Mode::Param(f)) => Mode::Objective(f),
                        _ => mode,
                    };
                    if next_mode != mode {
                        debug!("stepwise pin {mode:?} -> {next_mode:?} at s = {}", event.s);
                        mode = next_mode;
                    }
                }
                here = probe;
                dir = next_dir;
                if here.s - heading.1 >= 0.5 * target {
                    heading = (dir.clone(), here.s);
                }
                len = (2.0 * len).min(target);
                if let Some(next_form) = band_switch(&here.state, form, cfg) {
                    dir = oriented_direction(&here.state, next_form, &dir)?;
                    heading.0 = oriented_direction(&here.state, next_form, &heading.0)?;
                    mode = mode.with_form(next_form);
                    let value = here.state.param(next_form).unwrap_or(f64::NAN);
                    path.mark_last(EventKind::ParamSwitch, next_form, value);
                }
            }
        }
    }
}
