//! Adaptive arc-length integration with a pseudo-arclength corrector.

use log::{debug, trace as log_trace};

use crate::lagrange::{assemble, assemble_conjugate, assemble_in, rates_in, Form, LagrangeError};
use crate::linalg::{determinant, dot, norm};
use crate::problem::ObjectivePair;

use super::events::{band_switch, make_point, oriented_direction, Flow, PathBuilder, Probe};
use super::polish::{polish, Pin};
use super::rk::rk_step;
use super::{EventKind, Sense, TraceConfig, TraceError, TradeoffPath};

const MIN_STEP: f64 = 1e-14;
/// The corrector may move the predicted point by at most this fraction of the step.
const MAX_CORRECTION: f64 = 0.1;
/// Minimum cosine between consecutive tangents (and between tangent and chord).
const MIN_TURN_COS: f64 = 0.5;

/// Predicts with one RK step of length `len` from `from` and corrects on the
/// hyperplane through the prediction, orthogonal to the chord.
fn advance(
    pair: &ObjectivePair,
    cfg: &TraceConfig,
    form: Form,
    from: &Probe,
    dir: &[f64],
    len: f64,
) -> Result<(Probe, f64, f64, Vec<f64>), TraceError> {
    let rk = rk_step(pair, &from.state, form, len, dir, cfg.rk_rel_tol, cfg.rk_abs_tol)?;
    let chord: Vec<f64> = rk.k.iter().zip(&from.state.k).map(|(a, b)| a - b).collect();
    let chord_len = norm(&chord);
    if !(chord_len > 0.0) {
        return Err(LagrangeError::ZeroDirection { norm: chord_len }.into());
    }
    let normal: Vec<f64> = chord.iter().map(|c| c / chord_len).collect();
    let pin = Pin::Hyperplane {
        point: rk.k.clone(),
        normal: normal.clone(),
    };
    let out = polish(pair, &rk.k, rk.t, form, &pin, cfg.polish_tol).map_err(|e| {
        debug!("corrector failed at s = {}: {e}", from.s + len);
        TraceError::PolishDiverged {
            last: Box::new(make_point(&from.state, from.s, form)),
        }
    })?;
    let moved = norm(&out.k.iter().zip(&rk.k).map(|(a, b)| a - b).collect::<Vec<_>>());
    let state = assemble_in(pair, &out.k, form, out.t)?;
    Ok((
        Probe {
            state,
            s: from.s + len,
        },
        rk.error_norm,
        moved,
        normal,
    ))
}

enum Attempt {
    Accepted { probe: Probe, error: f64, dir: Vec<f64> },
    Rejected { retry: f64, cause: Option<TraceError> },
    ZeroDirection { probe: Probe },
}

struct Walker<'a> {
    pair: &'a ObjectivePair,
    cfg: &'a TraceConfig,
    form: Form,
    here: Probe,
    /// Unit tangent at `here`, oriented along the direction of travel.
    dir: Vec<f64>,
    h: f64,
    steps: usize,
    path: PathBuilder,
}

impl<'a> Walker<'a> {
    fn attempt(&self, step: f64) -> Attempt {
        let (probe, error, moved, chord) = match advance(self.pair, self.cfg, self.form, &self.here, &self.dir, step) {
            Ok(v) => v,
            Err(e) => {
                return Attempt::Rejected {
                    retry: step * 0.25,
                    cause: Some(e),
                }
            }
        };
        if !(error <= 1.0) {
            let factor = if error.is_finite() { (0.9 * error.powf(-0.2)).max(0.2) } else { 0.2 };
            return Attempt::Rejected {
                retry: step * factor,
                cause: None,
            };
        }
        if moved > MAX_CORRECTION * step || dot(&chord, &self.dir) < MIN_TURN_COS {
            return Attempt::Rejected {
                retry: step * 0.25,
                cause: None,
            };
        }
        match oriented_direction(&probe.state, self.form, &self.dir) {
            Ok(dir) if dot(&dir, &self.dir) >= MIN_TURN_COS => Attempt::Accepted { probe, error, dir },
            Ok(_) => Attempt::Rejected {
                retry: step * 0.25,
                cause: None,
            },
            Err(LagrangeError::ZeroDirection { .. }) => Attempt::ZeroDirection { probe },
            Err(e) => Attempt::Rejected {
                retry: step * 0.25,
                cause: Some(e.into()),
            },
        }
    }

    fn param_value(&self) -> f64 {
        self.here.state.param(self.form).unwrap_or(f64::NAN)
    }

    fn run(mut self) -> Result<TradeoffPath, TraceError> {
        let (pair, cfg) = (self.pair, self.cfg);
        loop {
            let remaining = cfg.max_arc_length - self.here.s;
            if remaining <= MIN_STEP || self.steps >= cfg.max_steps {
                debug!("step limit at s = {}", self.here.s);
                let value = self.param_value();
                self.path.mark_last(EventKind::StepLimit, self.form, value);
                return Ok(self.path.finish(pair, cfg));
            }
            let step = self.h.min(cfg.max_step).min(remaining);
            match self.attempt(step) {
                Attempt::Rejected { retry, cause } => {
                    log_trace!("rejected step {step:e} at s = {}", self.here.s);
                    if retry < MIN_STEP {
                        return Err(match cause {
                            Some(e @ TraceError::Lagrange(LagrangeError::Eval(_))) => e,
                            _ => TraceError::StepUnderflow {
                                s: self.here.s,
                                last: Box::new(make_point(&self.here.state, self.here.s, self.form)),
                            },
                        });
                    }
                    self.h = retry;
                }
                Attempt::ZeroDirection { probe } => {
                    let prev = self.here.clone();
                    let (form, dir) = (self.form, self.dir.clone());
                    let flow = self.path.accept_step(pair, cfg, form, &dir, &prev, &probe, |theta| {
                        advance(pair, cfg, form, &prev, &dir, theta * step).map(|v| v.0)
                    })?;
                    if let Flow::Continue = flow {
                        let value = probe.state.param(form).unwrap_or(f64::NAN);
                        self.path.mark_last(EventKind::ZeroDirection, form, value);
                    }
                    return Ok(self.path.finish(pair, cfg));
                }
                Attempt::Accepted { probe, error, dir } => {
                    self.steps += 1;
                    let prev = self.here.clone();
                    let (form, prev_dir) = (self.form, self.dir.clone());
                    let flow = self.path.accept_step(pair, cfg, form, &prev_dir, &prev, &probe, |theta| {
                        advance(pair, cfg, form, &prev, &prev_dir, theta * step).map(|v| v.0)
                    })?;
                    if let Flow::Stop = flow {
                        return Ok(self.path.finish(pair, cfg));
                    }
                    self.here = probe;
                    self.dir = dir;
                    let grow = if error > 0.0 { 0.9 * error.powf(-0.2) } else { 5.0 };
                    self.h = step * grow.clamp(0.2, 5.0);
                    if let Some(next_form) = band_switch(&self.here.state, self.form, cfg) {
                        self.dir = oriented_direction(&self.here.state, next_form, &self.dir)?;
                        self.form = next_form;
                        let value = self.param_value();
                        debug!("switching to {next_form:?} at s = {}", self.here.s);
                        self.path.mark_last(EventKind::ParamSwitch, next_form, value);
                    }
                }
            }
        }
    }
}

/// Traces the curve from a nondegenerate stationary point of `H` until `λ = 0`.
///
/// The first step is taken in the direction that decreases `F` (or increases
/// it for [`Sense::Maximize`]). A vanishing direction or an exhausted arc-length
/// budget ends the path with a `ZeroDirection` or `StepLimit` event rather
/// than an error. With `beyond_zero` set the walk continues past `λ = 0`.
pub fn trace(pair: &ObjectivePair, start: &[f64], cfg: &TraceConfig) -> Result<TradeoffPath, TraceError> {
    let (here, dir, path) = match begin(pair, start, cfg)? {
        Begin::Walk { here, dir, path } => (here, dir, path),
        Begin::Done(path) => return Ok(path),
    };
    Walker {
        pair,
        cfg,
        form: Form::Mu,
        here,
        dir,
        h: cfg.initial_step,
        steps: 0,
        path,
    }
    .run()
}

pub(super) enum Begin {
    Walk { here: Probe, dir: Vec<f64>, path: PathBuilder },
    /// No direction to move in at the start.
    Done(TradeoffPath),
}

/// Validates the start point and picks the initial μ-form tangent.
pub(super) fn begin(pair: &ObjectivePair, start: &[f64], cfg: &TraceConfig) -> Result<Begin, TraceError> {
    cfg.validate()?;
    let jh = pair.eval_h(start)?;
    let hess_scale = jh.hess.max_abs().max(1.0);
    let grad_norm = norm(&jh.grad);
    if grad_norm > cfg.cio_tol * hess_scale {
        return Err(TraceError::StartNotCio { grad_norm });
    }
    let det = determinant(&jh.hess);
    if det.abs() <= 1e-12 * hess_scale.powi(pair.dim() as i32) {
        return Err(TraceError::SingularStart { det });
    }
    let state = assemble_conjugate(pair, start, 0.0)?;
    let mut path = PathBuilder {
        beyond: cfg.beyond_zero,
        ..PathBuilder::default()
    };
    path.push_point(make_point(&state, 0.0, Form::Mu));
    let rates = match rates_in(&state, Form::Mu) {
        Ok(r) => r,
        Err(LagrangeError::ZeroDirection { .. }) => {
            path.mark_last(EventKind::ZeroDirection, Form::Mu, 0.0);
            return Ok(Begin::Done(path.finish(pair, cfg)));
        }
        Err(e) => return Err(e.into()),
    };
    let flip = match cfg.sense {
        Sense::Minimize => rates.df_ds > 0.0,
        Sense::Maximize => rates.df_ds < 0.0,
    };
    let dir = if flip { rates.negated().direction } else { rates.direction };
    Ok(Begin::Walk {
        here: Probe { state, s: 0.0 },
        dir,
        path,
    })
}

/// Continues a terminated path through its final `λ = 0`.
///
/// Every later zero of `λ` is recorded as a `SaddleCross` event carrying the
/// classification of the stationary point of `F` found there. The walk ends
/// when the arc-length budget runs out.
pub fn trace_beyond_zero(
    pair: &ObjectivePair,
    path: &TradeoffPath,
    cfg: &TraceConfig,
) -> Result<TradeoffPath, TraceError> {
    cfg.validate()?;
    if !cfg.beyond_zero {
        return Err(TraceError::BeyondZeroDisabled);
    }
    if !path.terminated() {
        return Err(TraceError::NotTerminated {
            last: path.last_event().map(|e| e.kind),
        });
    }
    let end = path.points.last().expect("terminated path has points");
    let state = assemble(pair, &end.k, 0.0)?;
    let reference: Vec<f64> = match path.points.len() {
        0 | 1 => rates_in(&state, Form::Lambda)?.direction,
        n => end.k.iter().zip(&path.points[n - 2].k).map(|(a, b)| a - b).collect(),
    };
    let dir = oriented_direction(&state, Form::Lambda, &reference)?;
    let mut events = path.events.clone();
    // the previous run may have closed with bookkeeping after the termination
    while events.last().is_some_and(|e| e.kind != EventKind::Termination) {
        events.pop();
    }
    let builder = PathBuilder {
        points: path.points.clone(),
        events,
        past_zero: true,
        beyond: true,
    };
    Walker {
        pair,
        cfg,
        form: Form::Lambda,
        here: Probe { state, s: end.s },
        dir,
        h: cfg.initial_step,
        steps: 0,
        path: builder,
    }
    .run()
}
