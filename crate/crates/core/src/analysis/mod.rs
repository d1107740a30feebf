//! Post-processing of traced curves: stationary points, Pareto fronts and
//! inflection classification.

use thiserror::Error;

use crate::linalg::LinalgError;
use crate::problem::EvalError;
use crate::tracer::PolishError;

mod cio;
mod distance;
mod pareto;
mod report;

pub use cio::{classify_cio, classify_hessian, find_cio, scan_stationary_points, CioClass, CioReport, GridSpec};
pub use distance::{hausdorff_distance, point_polyline_distance};
pub use pareto::{
    extract_pareto, pareto_indices, refine_splice, refine_splices, ParetoFront, ParetoSegment, ParetoSense,
    RefinedSplice, SplicePoint,
};
pub use report::{diminished_return_report, InflectionReport, ReturnKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("point is not stationary (|∇| = {grad_norm:e})")]
    NotStationary { grad_norm: f64 },
    #[error("Newton search for a stationary point did not converge (|∇| = {grad_norm:e})")]
    NoConvergence { grad_norm: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Polish(#[from] PolishError),
    #[error("splice refinement did not converge (|Δh| = {gap:e})")]
    SpliceNoConvergence { gap: f64 },
}
