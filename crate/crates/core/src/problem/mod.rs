//! Two-objective problem definitions.
//!
//! A problem is a pair of smooth scalar fields `F` and `H` over the same `N`
//! variables. Each field reports its value, gradient and Hessian through
//! [`ScalarField::jet`]. Fields come from three places: hand-coded analytic
//! builtins, parsed expressions (differentiated exactly by second-order
//! forward-mode dual numbers), and value-only closures backed by central
//! finite differences.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::linalg::SquareMatrix;

mod builtin;
mod config;
mod dual;
mod expr;
mod fd;

pub use builtin::{Example1Problem, Example2Problem, QuadraticDeviationConstraint, SineSum, WeightedSquares};
pub use config::{parse_problem_config, BuiltinSpec, ExpressionSpec, ProblemConfig, ProblemError};
pub use expr::{eval_with_derivatives, parse_expression, BinaryOp, ExprAst, Expression, ParseError, UnaryFn};
pub use fd::{fd_check, FdReport, FiniteDifferenceField};

/// Value, gradient and Hessian of a scalar field at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: SquareMatrix,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error in `{subexpression}`: {reason}")]
    Domain { subexpression: String, reason: String },
    #[error("expected {expected} variables, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value in `{field}` at the requested point")]
    NonFinite { field: String },
}

/// A twice-differentiable scalar field over `dim()` variables.
pub trait ScalarField: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn value(&self, k: &[f64]) -> Result<f64, EvalError>;

    fn jet(&self, k: &[f64]) -> Result<Jet, EvalError>;

    /// Human-readable description used in reports.
    fn label(&self) -> String;

    fn check_dim(&self, k: &[f64]) -> Result<(), EvalError> {
        if k.len() == self.dim() {
            Ok(())
        } else {
            Err(EvalError::DimensionMismatch {
                expected: self.dim(),
                got: k.len(),
            })
        }
    }
}

/// The two competing objectives `F` and `H`.
///
/// Cloning is cheap; both fields are shared.
#[derive(Clone)]
pub struct ObjectivePair {
    name: String,
    f: Arc<dyn ScalarField>,
    h: Arc<dyn ScalarField>,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("objective dimensions differ: F has {f_dim}, H has {h_dim}")]
pub struct DimensionConflict {
    pub f_dim: usize,
    pub h_dim: usize,
}

impl ObjectivePair {
    pub fn new(
        name: impl Into<String>,
        f: Arc<dyn ScalarField>,
        h: Arc<dyn ScalarField>,
    ) -> Result<Self, DimensionConflict> {
        if f.dim() != h.dim() || f.dim() == 0 {
            return Err(DimensionConflict {
                f_dim: f.dim(),
                h_dim: h.dim(),
            });
        }
        Ok(Self {
            name: name.into(),
            f,
            h,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.f.dim()
    }

    pub fn f(&self) -> &Arc<dyn ScalarField> {
        &self.f
    }

    pub fn h(&self) -> &Arc<dyn ScalarField> {
        &self.h
    }

    /// Same fields with the roles of `F` and `H` exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            name: format!("{} (swapped)", self.name),
            f: Arc::clone(&self.h),
            h: Arc::clone(&self.f),
        }
    }

    /// Replaces `H`, keeping `F`.
    pub fn with_h(&self, h: Arc<dyn ScalarField>, name: impl Into<String>) -> Result<Self, DimensionConflict> {
        Self::new(name, Arc::clone(&self.f), h)
    }

    pub fn eval_f(&self, k: &[f64]) -> Result<Jet, EvalError> {
        self.f.jet(k)
    }

    pub fn eval_h(&self, k: &[f64]) -> Result<Jet, EvalError> {
        self.h.jet(k)
    }
}

impl fmt::Debug for ObjectivePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObjectivePair")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("F", &self.f.label())
            .field("H", &self.h.label())
            .finish()
    }
}

pub(crate) fn finite_or(value: f64, field: &dyn ScalarField) -> Result<f64, EvalError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(EvalError::NonFinite { field: field.label() })
    }
}
