//! JSON problem documents.
//!
//! Two shapes are accepted:
//!
//! ```json
//! { "dim": 2, "variables": ["x", "y"], "F": "(x-1)^2 + (y-1)^2", "H": "x^2/4 + y^2" }
//! { "builtin": "example1", "params": { "a": 2, "b": 1, "x0": 1, "y0": 1 } }
//! ```

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::expr::{Expression, ParseError};
use super::{Example1Problem, Example2Problem, ObjectivePair};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpressionSpec {
    pub dim: usize,
    pub variables: Vec<String>,
    #[serde(rename = "F")]
    pub f: String,
    #[serde(rename = "H")]
    pub h: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Optional start point (a stationary point of `H`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuiltinSpec {
    pub builtin: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ProblemConfig {
    Expression(ExpressionSpec),
    Builtin(BuiltinSpec),
}

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("invalid problem JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("problem JSON must be an object")]
    NotAnObject,
    #[error("in expression `{field}`: {source}")]
    Expression {
        field: &'static str,
        #[source]
        source: ParseError,
    },
    #[error("`dim` is {dim} but {count} variables were listed")]
    DimMismatch { dim: usize, count: usize },
    #[error("duplicate or empty variable name `{0}`")]
    BadVariable(String),
    #[error("unknown builtin `{0}` (expected example1 or example2)")]
    UnknownBuiltin(String),
    #[error("builtin `{builtin}` is missing parameter `{param}`")]
    MissingParam { builtin: String, param: &'static str },
    #[error("builtin `{builtin}` does not take parameter `{param}`")]
    UnexpectedParam { builtin: String, param: String },
    #[error("start point has {got} entries, problem has {expected} variables")]
    StartDim { expected: usize, got: usize },
}

/// Parses a problem document, reporting missing fields by name.
pub fn parse_problem_config(text: &str) -> Result<ProblemConfig, ProblemError> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let obj = value.as_object().ok_or(ProblemError::NotAnObject)?;
    if obj.contains_key("builtin") {
        Ok(ProblemConfig::Builtin(serde_json::from_value(value)?))
    } else {
        Ok(ProblemConfig::Expression(serde_json::from_value(value)?))
    }
}

impl BuiltinSpec {
    fn param(&self, name: &'static str) -> Result<f64, ProblemError> {
        self.params.get(name).copied().ok_or_else(|| ProblemError::MissingParam {
            builtin: self.builtin.clone(),
            param: name,
        })
    }

    fn only(&self, allowed: &[&str]) -> Result<(), ProblemError> {
        match self.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(extra) => Err(ProblemError::UnexpectedParam {
                builtin: self.builtin.clone(),
                param: extra.clone(),
            }),
            None => Ok(()),
        }
    }
}

impl ProblemConfig {
    /// Builds the objective pair together with its natural start point, if known.
    pub fn build(&self) -> Result<(ObjectivePair, Option<Vec<f64>>), ProblemError> {
        match self {
            ProblemConfig::Builtin(spec) => match spec.builtin.as_str() {
                "example1" => {
                    spec.only(&["a", "b", "x0", "y0"])?;
                    let ex = Example1Problem::new(
                        spec.param("a")?,
                        spec.param("b")?,
                        spec.param("x0")?,
                        spec.param("y0")?,
                    );
                    Ok((ex.pair(), Some(ex.h_cio())))
                }
                "example2" => {
                    spec.only(&["p", "q", "r", "t"])?;
                    let ex = Example2Problem::new(
                        spec.param("p")?,
                        spec.param("q")?,
                        spec.param("r")?,
                        spec.param("t")?,
                    );
                    Ok((ex.pair(), Some(ex.h_minimum())))
                }
                other => Err(ProblemError::UnknownBuiltin(other.to_string())),
            },
            ProblemConfig::Expression(spec) => {
                if spec.dim != spec.variables.len() {
                    return Err(ProblemError::DimMismatch {
                        dim: spec.dim,
                        count: spec.variables.len(),
                    });
                }
                for (i, v) in spec.variables.iter().enumerate() {
                    if v.is_empty() || spec.variables[..i].contains(v) {
                        return Err(ProblemError::BadVariable(v.clone()));
                    }
                }
                let f = Expression::parse(&spec.f, &spec.variables)
                    .map_err(|source| ProblemError::Expression { field: "F", source })?;
                let h = Expression::parse(&spec.h, &spec.variables)
                    .map_err(|source| ProblemError::Expression { field: "H", source })?;
                if let Some(start) = &spec.start {
                    if start.len() != spec.dim {
                        return Err(ProblemError::StartDim {
                            expected: spec.dim,
                            got: start.len(),
                        });
                    }
                }
                let name = spec.name.clone().unwrap_or_else(|| "expression".to_string());
                let pair = ObjectivePair::new(name, Arc::new(f), Arc::new(h)).map_err(|_| {
                    ProblemError::DimMismatch {
                        dim: spec.dim,
                        count: spec.variables.len(),
                    }
                })?;
                Ok((pair, spec.start.clone()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expression_document_builds() {
        let cfg = parse_problem_config(
            r#"{ "dim": 2, "variables": ["x","y"], "F": "(x-1)^2+(y-1)^2", "H": "x^2/4 + y^2" }"#,
        )
        .unwrap();
        let (pair, start) = cfg.build().unwrap();
        assert_eq!(pair.dim(), 2);
        assert!(start.is_none());
        assert_eq!(pair.eval_h(&[2.0, 1.0]).unwrap().value, 2.0);
    }

    #[test]
    fn builtin_document_builds() {
        let cfg = parse_problem_config(
            r#"{ "builtin": "example1", "params": {"a":2,"b":1,"x0":1,"y0":1} }"#,
        )
        .unwrap();
        let (pair, start) = cfg.build().unwrap();
        assert_eq!(start, Some(vec![0.0, 0.0]));
        assert_eq!(pair.eval_f(&[1.0, 1.0]).unwrap().value, 0.0);
    }

    #[test]
    fn missing_h_names_the_field() {
        let err = parse_problem_config(r#"{ "dim": 1, "variables": ["x"], "F": "x^2" }"#).unwrap_err();
        assert!(err.to_string().contains("`H`"), "{err}");
    }

    #[test]
    fn bad_documents_are_rejected() {
        let err = parse_problem_config(r#"{ "builtin": "example1", "params": {"a":2} }"#)
            .unwrap()
            .build()
            .unwrap_err();
        assert!(matches!(err, ProblemError::MissingParam { param: "b", .. }));
        let err = parse_problem_config(r#"{ "builtin": "nope" }"#).unwrap().build().unwrap_err();
        assert!(matches!(err, ProblemError::UnknownBuiltin(_)));
        let err = parse_problem_config(r#"{ "dim": 2, "variables": ["x"], "F": "x", "H": "x" }"#)
            .unwrap()
            .build()
            .unwrap_err();
        assert!(matches!(err, ProblemError::DimMismatch { .. }));
        let err = parse_problem_config(r#"{ "dim": 1, "variables": ["x"], "F": "x^", "H": "x" }"#)
            .unwrap()
            .build()
            .unwrap_err();
        assert!(matches!(err, ProblemError::Expression { field: "F", .. }));
        assert!(parse_problem_config("[1,2]").is_err());
        assert!(parse_problem_config("{ \"dim\": ").is_err());
    }
}
