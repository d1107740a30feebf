//! Sign-change detection, refinement and bookkeeping shared by both engines.

use crate::analysis::classify_hessian;
use crate::lagrange::{assemble_in, tangency_residual, BorderedState, Form, LagrangeError};
use crate::linalg::{dot, norm};
use crate::problem::ObjectivePair;

use super::polish::{polish, Pin};
use super::{CioPoint, EventKind, PathPoint, TraceConfig, TraceError, TraceEvent};

/// Events refined closer than this in arc length are reported as one.
pub(super) const MERGE_DISTANCE: f64 = 1e-8;
/// Smallest bracket (in arc length) the refinement bisects down to.
const MIN_BRACKET: f64 = 1e-13;
const MAX_REFINE_ITERATIONS: usize = 100;

/// A polished curve point and its arc length.
#[derive(Debug, Clone)]
pub(super) struct Probe {
    pub state: BorderedState,
    pub s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) enum Monitor {
    Det,
    Quad,
    Param,
    /// Unnormalized direction projected on the incoming tangent; changes
    /// sign where the direction vector passes through zero.
    Branch,
}

const MONITORS: [Monitor; 4] = [Monitor::Det, Monitor::Quad, Monitor::Param, Monitor::Branch];

/// Det and quadratic-form zeros this close to a branch point belong to it.
const BRANCH_ABSORB: f64 = 1e-3;

impl Monitor {
    pub fn value(self, state: &BorderedState, form: Form, reference: &[f64]) -> Option<f64> {
        match self {
            Monitor::Det => state.quantities(form).map(|q| q.det),
            Monitor::Quad => state.quantities(form).map(|q| q.quad),
            Monitor::Param => state.param(form),
            Monitor::Branch => state.quantities(form).map(|q| dot(&q.direction, reference)),
        }
    }

    fn scale(self, state: &BorderedState, form: Form) -> f64 {
        match self {
            Monitor::Det => state.det_scale(form),
            Monitor::Quad => state.quad_scale(form),
            Monitor::Param => 1.0,
            Monitor::Branch => {
                let n = state.dim() as i32;
                let a = state.quantities(form).map_or(1.0, |q| q.matrix.max_abs()).max(1.0);
                a.powi(n - 1) * norm(state.border(form)).max(1.0)
            }
        }
    }

    fn tol(self, state: &BorderedState, form: Form, cfg: &TraceConfig) -> f64 {
        match self {
            Monitor::Det | Monitor::Quad | Monitor::Branch => cfg.event_refine_tol * self.scale(state, form),
            Monitor::Param => cfg.lambda_stop_tol,
        }
    }
}

fn crossed(a: f64, b: f64) -> bool {
    (a < 0.0 && b > 0.0) || (a > 0.0 && b < 0.0) || (a != 0.0 && b == 0.0)
}

pub(super) fn make_point(state: &BorderedState, s: f64, form: Form) -> PathPoint {
    PathPoint {
        s,
        k: state.k.clone(),
        lambda: state.lambda,
        mu: state.mu,
        f: state.f,
        h: state.h,
        det_m: state.det_m(),
        quad_m: state.quad_m(),
        residual: tangency_residual(state),
        form,
        event: None,
    }
}

pub(super) fn cio_at(state: &BorderedState, s: f64) -> Option<CioPoint> {
    let (class, inertia) = classify_hessian(&state.hess_f).ok()?;
    Some(CioPoint {
        k: state.k.clone(),
        s,
        f: state.f,
        grad_norm: norm(&state.grad_f),
        class,
        inertia,
    })
}

/// Whether the multiplier of `form` should hand over to the other one.
pub(super) fn band_switch(state: &BorderedState, form: Form, cfg: &TraceConfig) -> Option<Form> {
    let [lo, hi] = cfg.switch_band;
    match form {
        Form::Lambda => match state.lambda.finite() {
            Some(l) if l.abs() > hi && state.mu.is_finite() => Some(Form::Mu),
            _ => None,
        },
        Form::Mu => match state.lambda.finite() {
            Some(l) if l.abs() < lo => Some(Form::Lambda),
            _ => None,
        },
    }
}

struct Candidate {
    monitor: Monitor,
    probe: Probe,
    value: f64,
    low_precision: bool,
}

/// Illinois false position on the step fraction `θ ∈ [0, 1]`.
#[allow(clippy::too_many_arguments)]
fn refine<F>(
    monitor: Monitor,
    form: Form,
    reference: &[f64],
    prev: &Probe,
    next: &Probe,
    step_len: f64,
    tol: f64,
    at: &mut F,
) -> Result<Candidate, TraceError>
where
    F: FnMut(f64) -> Result<Probe, TraceError>,
{
    let value = |p: &Probe| monitor.value(&p.state, form, reference).unwrap_or(f64::NAN);
    let (mut a, mut ga) = (0.0f64, value(prev));
    let (mut b, mut gb) = (1.0f64, value(next));
    let mut best = if ga.abs() < gb.abs() { (prev.clone(), ga) } else { (next.clone(), gb) };
    let mut side = 0i8;
    for _ in 0..MAX_REFINE_ITERATIONS {
        if best.1.abs() <= tol {
            return Ok(Candidate { monitor, probe: best.0, value: best.1, low_precision: false });
        }
        if (b - a).abs() * step_len < MIN_BRACKET {
            break;
        }
        let mut c = (a * gb - b * ga) / (gb - ga);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        if !(c > lo && c < hi) {
            c = 0.5 * (a + b);
        }
        let probe = match at(c) {
            Ok(p) => p,
            Err(_) => {
                // fall back to plain bisection once if the regula-falsi point fails
                let mid = 0.5 * (a + b);
                if mid == c {
                    break;
                }
                c = mid;
                match at(c) {
                    Ok(p) => p,
                    Err(_) => break,
                }
            }
        };
        let gc = value(&probe);
        if !gc.is_finite() {
            break;
        }
        if gc.abs() < best.1.abs() {
            best = (probe.clone(), gc);
        }
        if gc * gb < 0.0 {
            a = b;
            ga = gb;
            side = 0;
        } else {
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        }
        b = c;
        gb = gc;
    }
    let low_precision = best.1.abs() > tol;
    Ok(Candidate { monitor, probe: best.0, value: best.1, low_precision })
}

/// Accumulates points and events; decides what a multiplier zero means.
#[derive(Debug, Default)]
pub(super) struct PathBuilder {
    pub points: Vec<PathPoint>,
    pub events: Vec<TraceEvent>,
    /// The first `λ = 0` has already been recorded.
    pub past_zero: bool,
    /// Carry on through `λ = 0` instead of stopping.
    pub beyond: bool,
}

pub(super) enum Flow {
    Continue,
    Stop,
}

impl PathBuilder {
    pub fn push_point(&mut self, point: PathPoint) {
        self.points.push(point);
    }

    /// Records a bookkeeping event (switch, limits) at the last point.
    pub fn mark_last(&mut self, kind: EventKind, form: Form, value: f64) {
        let Some(last) = self.points.last_mut() else { return };
        if last.event.is_none() {
            last.event = Some(kind);
        }
        let point = last.clone();
        self.events.push(TraceEvent {
            kind,
            s: point.s,
            point,
            form,
            value,
            companion: None,
            scale: 1.0,
            companion_scale: 1.0,
            low_precision: false,
            merged_with: None,
            cio: None,
        });
    }

    /// Looks for sign changes between two accepted points, refines them with
    /// `at`, records them, and appends `next` unless the path ends first.
    pub fn accept_step<F>(
        &mut self,
        pair: &ObjectivePair,
        cfg: &TraceConfig,
        form: Form,
        reference: &[f64],
        prev: &Probe,
        next: &Probe,
        mut at: F,
    ) -> Result<Flow, TraceError>
    where
        F: FnMut(f64) -> Result<Probe, TraceError>,
    {
        let step_len = (next.s - prev.s).abs().max(f64::MIN_POSITIVE);
        let mut found = Vec::new();
        for monitor in MONITORS {
            let (Some(g0), Some(g1)) = (
                monitor.value(&prev.state, form, reference),
                monitor.value(&next.state, form, reference),
            ) else {
                continue;
            };
            if crossed(g0, g1) {
                let tol = monitor.tol(&next.state, form, cfg);
                found.push(refine(monitor, form, reference, prev, next, step_len, tol, &mut at)?);
            } else if monitor == Monitor::Param && form == Form::Lambda && !self.past_zero && g1 != 0.0
                && g1.abs() <= cfg.lambda_stop_tol
            {
                found.push(Candidate { monitor, probe: next.clone(), value: g1, low_precision: false });
            }
        }
        let earlier = self.events.iter().rev().find(|e| e.kind == EventKind::BranchPoint).map(|e| e.s);
        let branches: Vec<f64> = found
            .iter()
            .filter(|c| c.monitor == Monitor::Branch)
            .map(|c| c.probe.s)
            .chain(earlier)
            .collect();
        let mut absorbed: Vec<Monitor> = Vec::new();
        found.retain(|c| {
            let near = matches!(c.monitor, Monitor::Det | Monitor::Quad)
                && branches.iter().any(|s| (s - c.probe.s).abs() < BRANCH_ABSORB);
            if near {
                absorbed.push(c.monitor);
            }
            !near
        });
        // zeros recorded in the previous step may belong to a branch point found only now
        let fresh: Vec<f64> = found.iter().filter(|c| c.monitor == Monitor::Branch).map(|c| c.probe.s).collect();
        let stale = |e: &TraceEvent| {
            matches!(e.kind, EventKind::Inflection | EventKind::Extremum)
                && fresh.iter().any(|s| (s - e.s).abs() < BRANCH_ABSORB)
        };
        for event in self.events.iter().filter(|e| stale(e)) {
            absorbed.push(if event.kind == EventKind::Inflection { Monitor::Det } else { Monitor::Quad });
            if let Some(p) = self.points.iter_mut().rev().find(|p| p.s == event.s && p.event == Some(event.kind)) {
                p.event = None;
            }
        }
        self.events.retain(|e| !stale(e));
        found.sort_by(|x, y| x.probe.s.total_cmp(&y.probe.s));

        let mut flow = Flow::Continue;
        let mut recorded: Vec<TraceEvent> = Vec::new();
        for cand in found {
            let mut probe = cand.probe;
            let mut value = cand.value;
            let mut low_precision = cand.low_precision;
            if cand.monitor == Monitor::Param {
                // land exactly on the zero of the multiplier
                match polish(pair, &probe.state.k, 0.0, form, &Pin::Param, cfg.polish_tol) {
                    Ok(out) => {
                        probe.state = assemble_in(pair, &out.k, form, 0.0)?;
                        value = 0.0;
                        low_precision = false;
                    }
                    Err(_) => low_precision = true,
                }
            }
            let kind = match (cand.monitor, form) {
                (Monitor::Det, _) => EventKind::Inflection,
                (Monitor::Quad, _) => EventKind::Extremum,
                (Monitor::Param, Form::Mu) => EventKind::SaddleCross,
                (Monitor::Param, Form::Lambda) if !self.past_zero => EventKind::Termination,
                (Monitor::Param, Form::Lambda) => EventKind::SaddleCross,
                (Monitor::Branch, _) => EventKind::BranchPoint,
            };
            let (companion, companion_scale) = match cand.monitor {
                Monitor::Det => (Monitor::Quad.value(&probe.state, form, reference), Monitor::Quad.scale(&probe.state, form)),
                Monitor::Quad => (Monitor::Det.value(&probe.state, form, reference), Monitor::Det.scale(&probe.state, form)),
                Monitor::Param | Monitor::Branch => (None, 1.0),
            };
            let cio = (cand.monitor == Monitor::Param && form == Form::Lambda).then(|| cio_at(&probe.state, probe.s)).flatten();
            let mut point = make_point(&probe.state, probe.s, form);
            point.event = Some(kind);
            let event = TraceEvent {
                kind,
                s: probe.s,
                point,
                form,
                value,
                companion,
                scale: cand.monitor.scale(&probe.state, form),
                companion_scale,
                low_precision,
                merged_with: match (cand.monitor, absorbed.first()) {
                    (Monitor::Branch, Some(Monitor::Det)) => Some(EventKind::Inflection),
                    (Monitor::Branch, Some(Monitor::Quad)) => Some(EventKind::Extremum),
                    _ => None,
                },
                cio,
            };
            match recorded.last_mut() {
                Some(last) if (event.s - last.s).abs() < MERGE_DISTANCE && last.merged_with.is_none() => {
                    if event.kind == EventKind::Termination {
                        let earlier = last.kind;
                        *last = event;
                        last.merged_with = Some(earlier);
                    } else {
                        last.merged_with = Some(event.kind);
                    }
                }
                _ => recorded.push(event),
            }
            if kind == EventKind::Termination {
                self.past_zero = true;
                if !self.beyond {
                    flow = Flow::Stop;
                    break;
                }
            }
        }
        for event in recorded {
            self.points.push(event.point.clone());
            self.events.push(event);
        }
        if let Flow::Continue = flow {
            self.points.push(make_point(&next.state, next.s, form));
        }
        Ok(flow)
    }

    pub fn finish(self, pair: &ObjectivePair, cfg: &TraceConfig) -> super::TradeoffPath {
        super::TradeoffPath {
            problem: pair.name().to_string(),
            config: cfg.clone(),
            points: self.points,
            events: self.events,
        }
    }
}

/// `rates_in` with the branch chosen to agree with `reference`.
pub(super) fn oriented_direction(
    state: &BorderedState,
    form: Form,
    reference: &[f64],
) -> Result<Vec<f64>, LagrangeError> {
    let rates = crate::lagrange::rates_in(state, form)?;
    let sign = if crate::linalg::dot(&rates.direction, reference) < 0.0 { -1.0 } else { 1.0 };
    Ok(rates.direction.iter().map(|d| sign * d).collect())
}
