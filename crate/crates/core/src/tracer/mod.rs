//! Continuation engines for the tradeoff curve.
//!
//! [`trace`] integrates the arc-length system with an adaptive Dormand–Prince
//! 5(4) pair, starting in the μ-form at a stationary point of `H` and
//! switching to the λ-form once `|λ|` drops inside the switch band. Each
//! accepted step is Newton-polished back onto `∇F = λ∇H`, and sign changes of
//! `det`, the adjugate quadratic form and the multiplier are refined into
//! [`TraceEvent`]s.
//!
//! [`trace_stepwise`] follows the same curve by repeated root solves in small
//! increments of `λ`/`μ`, falling back to fixed-`h`/fixed-`f` increments where
//! the multiplier turns around.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lagrange::{Form, LagrangeError, Multiplier};
use crate::linalg::Inertia;
use crate::analysis::CioClass;

mod chain;
mod engine;
mod events;
mod polish;
mod rk;
mod stepwise;

pub use chain::{bootstrap_chain, reverse_trace, BootstrapResult};
pub use engine::{trace, trace_beyond_zero};
pub use polish::{polish, Pin, PolishError, PolishOutcome};
pub use rk::{rk_step, RkStep};
pub use stepwise::trace_stepwise;

/// Which way the first step moves `F`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    #[default]
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    pub rk_rel_tol: f64,
    pub rk_abs_tol: f64,
    /// Longest arc-length step; also the increment target of the stepwise engine.
    pub max_step: f64,
    pub initial_step: f64,
    pub polish_tol: f64,
    pub event_refine_tol: f64,
    /// `[λ_lo, λ_hi]`: the μ-form hands over to λ once `|λ| < λ_lo`, and back once `|λ| > λ_hi`.
    pub switch_band: [f64; 2],
    pub max_arc_length: f64,
    pub lambda_stop_tol: f64,
    /// Keep integrating past the first `λ = 0`.
    pub beyond_zero: bool,
    pub sense: Sense,
    /// Start-point stationarity tolerance, relative to `max(1, ‖∇²H‖)`.
    pub cio_tol: f64,
    pub max_steps: usize,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            rk_rel_tol: 1e-8,
            rk_abs_tol: 1e-10,
            max_step: 0.005,
            initial_step: 1e-3,
            polish_tol: 1e-10,
            event_refine_tol: 1e-9,
            switch_band: [0.8, 1.25],
            max_arc_length: 100.0,
            lambda_stop_tol: 1e-9,
            beyond_zero: false,
            sense: Sense::Minimize,
            cio_tol: 1e-8,
            max_steps: 1_000_000,
        }
    }
}

impl TraceConfig {
    pub fn validate(&self) -> Result<(), TraceError> {
        let positive = [
            ("rk_rel_tol", self.rk_rel_tol),
            ("rk_abs_tol", self.rk_abs_tol),
            ("max_step", self.max_step),
            ("initial_step", self.initial_step),
            ("polish_tol", self.polish_tol),
            ("event_refine_tol", self.event_refine_tol),
            ("max_arc_length", self.max_arc_length),
            ("lambda_stop_tol", self.lambda_stop_tol),
            ("cio_tol", self.cio_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(TraceError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        let [lo, hi] = self.switch_band;
        if !(lo > 0.0 && lo < 1.0 && hi > 1.0 && hi.is_finite()) {
            return Err(TraceError::InvalidConfig(format!(
                "switch_band must satisfy 0 < lo < 1 < hi, got [{lo}, {hi}]"
            )));
        }
        if self.max_steps == 0 {
            return Err(TraceError::InvalidConfig("max_steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    /// `det(M) = 0`: inflection of the f–h tradeoff, turning point of λ.
    Inflection,
    /// `Rᵀ·Adj(M)·R = 0`: turning point of both `f` and `h`.
    Extremum,
    /// The integration variable changed between λ and μ.
    ParamSwitch,
    /// A multiplier changed sign mid-path and the trace carried on through it:
    /// `μ` crossing zero (a stationary point of `H`), or `λ` crossing zero
    /// after the first termination when continuing past it.
    SaddleCross,
    /// `λ = 0`: a stationary point of `F`, the end of the curve.
    Termination,
    /// The direction vector passed through zero: another branch of
    /// solutions crosses here. The trace carries straight on.
    BranchPoint,
    ZeroDirection,
    StepLimit,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Inflection => "Inflection",
            EventKind::Extremum => "Extremum",
            EventKind::ParamSwitch => "ParamSwitch",
            EventKind::SaddleCross => "SaddleCross",
            EventKind::Termination => "Termination",
            EventKind::BranchPoint => "BranchPoint",
            EventKind::ZeroDirection => "ZeroDirection",
            EventKind::StepLimit => "StepLimit",
        }
    }

    /// Events tied to the geometry of the curve rather than to engine bookkeeping.
    pub fn is_structural(self) -> bool {
        matches!(
            self,
            EventKind::Inflection
                | EventKind::Extremum
                | EventKind::SaddleCross
                | EventKind::Termination
                | EventKind::BranchPoint
        )
    }
}

/// One accepted sample of the curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    /// Arc length from the start, measured in `k`-space.
    pub s: f64,
    pub k: Vec<f64>,
    pub lambda: Multiplier,
    pub mu: Multiplier,
    pub f: f64,
    pub h: f64,
    /// `det(M)`; absent where λ is infinite.
    pub det_m: Option<f64>,
    /// `Rᵀ·Adj(M)·R`; absent where λ is infinite.
    pub quad_m: Option<f64>,
    pub residual: f64,
    /// Parametrization the engine was using when this point was accepted.
    pub form: Form,
    pub event: Option<EventKind>,
}

impl PathPoint {
    pub fn lambda_value(&self) -> Option<f64> {
        self.lambda.finite()
    }
}

/// Stationary point of `F` met while continuing past `λ = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CioPoint {
    pub k: Vec<f64>,
    pub s: f64,
    pub f: f64,
    pub grad_norm: f64,
    pub class: CioClass,
    pub inertia: Inertia,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub kind: EventKind,
    pub s: f64,
    pub point: PathPoint,
    /// Parametrization in which the event function was monitored.
    pub form: Form,
    /// Event function value after refinement (`det`, quadratic form or multiplier).
    pub value: f64,
    /// For inflections the quadratic form, for extrema the determinant, at the event point.
    pub companion: Option<f64>,
    /// Scale the event tolerance was relative to.
    pub scale: f64,
    pub companion_scale: f64,
    /// Refinement stopped on bracket width before reaching the tolerance.
    pub low_precision: bool,
    /// A second event refined to within the minimum bracket width of this one.
    pub merged_with: Option<EventKind>,
    pub cio: Option<CioPoint>,
}

/// The traced curve and everything found along it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPath {
    pub problem: String,
    pub config: TraceConfig,
    pub points: Vec<PathPoint>,
    pub events: Vec<TraceEvent>,
}

impl TradeoffPath {
    pub fn last_event(&self) -> Option<&TraceEvent> {
        self.events.last()
    }

    pub fn terminated(&self) -> bool {
        self.events.iter().any(|e| e.kind == EventKind::Termination)
    }

    pub fn end(&self) -> Option<&PathPoint> {
        self.points.last()
    }

    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    pub fn event_kinds(&self) -> Vec<EventKind> {
        self.events.iter().map(|e| e.kind).collect()
    }

    pub fn structural_event_kinds(&self) -> Vec<EventKind> {
        self.events.iter().map(|e| e.kind).filter(|k| k.is_structural()).collect()
    }

    pub fn positions(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|p| p.k.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceError {
    #[error("invalid trace configuration: {0}")]
    InvalidConfig(String),
    #[error("start point is not stationary for H (|∇H| = {grad_norm:e})")]
    StartNotCio { grad_norm: f64 },
    #[error("Hessian of H is singular at the start point (det = {det:e})")]
    SingularStart { det: f64 },
    #[error(transparent)]
    Lagrange(#[from] LagrangeError),
    #[error(transparent)]
    Dimension(#[from] crate::problem::DimensionConflict),
    #[error("step size underflow at s = {s} (stiff or singular point)")]
    StepUnderflow { s: f64, last: Box<PathPoint> },
    #[error("Newton polish diverged near s = {}", last.s)]
    PolishDiverged { last: Box<PathPoint> },
    #[error("stepwise engine stuck: both parametrizations fail at s = {s}")]
    StuckAtCorner { s: f64, last: Box<PathPoint> },
    #[error("path did not reach λ = 0 (last event {last:?})")]
    NotTerminated { last: Option<EventKind> },
    #[error("continuation past λ = 0 is disabled (set beyond_zero)")]
    BeyondZeroDisabled,
}

impl From<crate::problem::EvalError> for TraceError {
    fn from(e: crate::problem::EvalError) -> Self {
        TraceError::Lagrange(e.into())
    }
}
