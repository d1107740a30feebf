//! Run manifests: what to trace, how, and where the artifacts go.
//!
//! A manifest is either assembled from command-line flags or read from a JSON
//! file of the shape
//!
//! ```json
//! {
//!   "problem": { "builtin": "example1", "params": { "a": 2, "b": 1, "x0": 1, "y0": 1 } },
//!   "mode": "trace",
//!   "start": [0, 0],
//!   "config": { "max_step": 0.01 },
//!   "out_dir": "out/example1",
//!   "pareto": { "f": "minimize", "h": "minimize" },
//!   "plot": true
//! }
//! ```
//!
//! `problem` may also be a path to a problem document, resolved relative to
//! the manifest.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use tradeoff::analysis::ParetoSense;
use tradeoff::problem::{parse_problem_config, BuiltinSpec, ObjectivePair, ProblemConfig, ProblemError};
use tradeoff::tracer::{Sense, TraceConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Trace,
    Stepwise,
    Bootstrap,
    BeyondZero,
    Reverse,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Mode::Trace => "trace",
            Mode::Stepwise => "stepwise",
            Mode::Bootstrap => "bootstrap",
            Mode::BeyondZero => "beyond-zero",
            Mode::Reverse => "reverse",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ProblemSource {
    File(PathBuf),
    Inline(Value),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub problem: ProblemSource,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub start: Option<Vec<f64>>,
    /// Overrides of individual trace settings.
    #[serde(default)]
    pub config: Map<String, Value>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub pareto: Option<ParetoSense>,
    #[serde(default)]
    pub plot: bool,
    /// Center of the quadratic artificial constraint used by `bootstrap`.
    #[serde(default)]
    pub artificial_center: Option<Vec<f64>>,
}

#[derive(Debug, Error)]
pub enum InputError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{origin}: {source}")]
    Problem {
        origin: String,
        #[source]
        source: ProblemError,
    },
    #[error("{0}")]
    Usage(String),
    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("mode {mode} needs {what}")]
    Missing { mode: Mode, what: &'static str },
    #[error("{what} has {got} entries, the problem has {expected} variables")]
    Dim {
        what: &'static str,
        expected: usize,
        got: usize,
    },
}

/// A manifest with every reference resolved and every setting checked.
#[derive(Debug, Clone)]
pub struct Job {
    pub pair: ObjectivePair,
    pub start: Vec<f64>,
    pub mode: Mode,
    pub config: TraceConfig,
    pub out_dir: PathBuf,
    pub pareto: Option<ParetoSense>,
    pub plot: bool,
    pub artificial_center: Option<Vec<f64>>,
}

fn read(path: &Path) -> Result<String, InputError> {
    std::fs::read_to_string(path).map_err(|source| InputError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Comma-separated numbers, as given to `--start` and `--artificial-center`.
pub fn parse_vector(flag: &str, text: &str) -> Result<Vec<f64>, InputError> {
    text.split(',')
        .enumerate()
        .map(|(i, part)| {
            part.trim()
                .parse::<f64>()
                .map_err(|_| InputError::Usage(format!("{flag}: entry {} `{}` is not a number", i + 1, part.trim())))
        })
        .collect()
}

/// `name=value` pairs separated by commas, as given to `--params`.
pub fn parse_params(text: &str) -> Result<BTreeMap<String, f64>, InputError> {
    text.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|pair| {
            let (name, value) = pair
                .split_once('=')
                .ok_or_else(|| InputError::Usage(format!("--params: `{pair}` is not of the form name=value")))?;
            let v = value
                .trim()
                .parse::<f64>()
                .map_err(|_| InputError::Usage(format!("--params: value of `{}` is not a number", name.trim())))?;
            Ok((name.trim().to_string(), v))
        })
        .collect()
}

/// `f,h` senses such as `min,max`.
pub fn parse_pareto(text: &str) -> Result<ParetoSense, InputError> {
    let sense = |s: &str| match s.trim() {
        "min" | "minimize" => Ok(Sense::Minimize),
        "max" | "maximize" => Ok(Sense::Maximize),
        other => Err(InputError::Usage(format!("--pareto: unknown sense `{other}` (min or max)"))),
    };
    let (f, h) = text
        .split_once(',')
        .ok_or_else(|| InputError::Usage("--pareto expects two senses, e.g. min,min".into()))?;
    Ok(ParetoSense::new(sense(f)?, sense(h)?))
}

/// `key=value`; the value is read as JSON when it parses, as a string otherwise.
pub fn parse_override(text: &str) -> Result<(String, Value), InputError> {
    let (key, value) = text
        .split_once('=')
        .ok_or_else(|| InputError::Usage(format!("--set: `{text}` is not of the form key=value")))?;
    let value = serde_json::from_str(value.trim()).unwrap_or_else(|_| Value::String(value.trim().to_string()));
    Ok((key.trim().to_string(), value))
}

/// Applies overrides one at a time so that a bad value is reported by name.
pub fn build_config(layers: &[Map<String, Value>]) -> Result<TraceConfig, InputError> {
    let Value::Object(mut merged) = serde_json::to_value(TraceConfig::default()).expect("config serializes") else {
        unreachable!("config serializes to an object")
    };
    for layer in layers {
        for (key, value) in layer {
            if !merged.contains_key(key) {
                return Err(InputError::Config {
                    field: key.clone(),
                    message: "unknown setting".into(),
                });
            }
            let mut trial = merged.clone();
            trial.insert(key.clone(), value.clone());
            serde_json::from_value::<TraceConfig>(Value::Object(trial.clone())).map_err(|e| InputError::Config {
                field: key.clone(),
                message: e.to_string(),
            })?;
            merged = trial;
        }
    }
    let config: TraceConfig = serde_json::from_value(Value::Object(merged)).expect("every layer was checked");
    config.validate().map_err(|e| InputError::Config {
        field: "config".into(),
        message: e.to_string(),
    })?;
    Ok(config)
}

pub fn load_problem(source: &ProblemSource, base: &Path) -> Result<(ObjectivePair, Option<Vec<f64>>), InputError> {
    let (origin, doc) = match source {
        ProblemSource::File(rel) => {
            let path = base.join(rel);
            (path.display().to_string(), read(&path)?)
        }
        ProblemSource::Inline(value) => ("problem".to_string(), value.to_string()),
    };
    let problem = |source| InputError::Problem {
        origin: origin.clone(),
        source,
    };
    parse_problem_config(&doc).and_then(|c| c.build()).map_err(problem)
}

/// Builds the problem named by `--builtin`/`--params`.
pub fn builtin_problem(name: &str, params: BTreeMap<String, f64>) -> Result<(ObjectivePair, Option<Vec<f64>>), InputError> {
    ProblemConfig::Builtin(BuiltinSpec {
        builtin: name.to_string(),
        params,
    })
    .build()
    .map_err(|source| InputError::Problem {
        origin: "--builtin".into(),
        source,
    })
}

impl RunManifest {
    pub fn from_file(path: &Path) -> Result<Self, InputError> {
        serde_json::from_str(&read(path)?).map_err(|source| InputError::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Resolves the manifest; relative paths are taken from `base`.
    pub fn resolve(&self, base: &Path, default_out: &Path) -> Result<Job, InputError> {
        let (pair, natural_start) = load_problem(&self.problem, base)?;
        let config = build_config(std::slice::from_ref(&self.config))?;
        let out_dir = self.out_dir.as_ref().map_or_else(|| default_out.to_path_buf(), |d| base.join(d));
        Job::new(
            pair,
            natural_start,
            JobSettings {
                mode: self.mode,
                start: self.start.clone(),
                config,
                out_dir,
                pareto: self.pareto,
                plot: self.plot,
                artificial_center: self.artificial_center.clone(),
            },
        )
    }
}

pub struct JobSettings {
    pub mode: Mode,
    pub start: Option<Vec<f64>>,
    pub config: TraceConfig,
    pub out_dir: PathBuf,
    pub pareto: Option<ParetoSense>,
    pub plot: bool,
    pub artificial_center: Option<Vec<f64>>,
}

impl Job {
    /// Checks that the mode has what it needs. The natural start of a problem
    /// is a stationary point of `H`, so it serves every mode except `reverse`.
    pub fn new(pair: ObjectivePair, natural_start: Option<Vec<f64>>, s: JobSettings) -> Result<Job, InputError> {
        let dim = pair.dim();
        let start = match (s.mode, s.start) {
            (_, Some(start)) => start,
            (Mode::Reverse, None) => {
                return Err(InputError::Missing {
                    mode: s.mode,
                    what: "a start point at a stationary point of F (--start)",
                })
            }
            (Mode::Bootstrap, None) => s.artificial_center.clone().ok_or(InputError::Missing {
                mode: s.mode,
                what: "an artificial constraint center (--artificial-center)",
            })?,
            (_, None) => natural_start.ok_or(InputError::Missing {
                mode: s.mode,
                what: "a start point (--start or \"start\" in the problem document)",
            })?,
        };
        if start.len() != dim {
            return Err(InputError::Dim {
                what: "start point",
                expected: dim,
                got: start.len(),
            });
        }
        if s.mode == Mode::Bootstrap {
            let center = s.artificial_center.as_ref().ok_or(InputError::Missing {
                mode: s.mode,
                what: "an artificial constraint center (--artificial-center)",
            })?;
            if center.len() != dim {
                return Err(InputError::Dim {
                    what: "artificial constraint center",
                    expected: dim,
                    got: center.len(),
                });
            }
        }
        Ok(Job {
            pair,
            start,
            mode: s.mode,
            config: s.config,
            out_dir: s.out_dir,
            pareto: s.pareto,
            plot: s.plot,
            artificial_center: s.artificial_center,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_are_checked_by_name() {
        let (k, v) = parse_override("max_step=0.01").unwrap();
        let cfg = build_config(&[Map::from_iter([(k, v)])]).unwrap();
        assert_eq!(cfg.max_step, 0.01);
        let (k, v) = parse_override("sense=maximize").unwrap();
        assert_eq!(build_config(&[Map::from_iter([(k, v)])]).unwrap().sense, Sense::Maximize);
        let (k, v) = parse_override("max_step=fast").unwrap();
        let err = build_config(&[Map::from_iter([(k, v)])]).unwrap_err();
        assert!(err.to_string().contains("`max_step`"), "{err}");
        let err = build_config(&[Map::from_iter([("nope".to_string(), Value::Bool(true))])]).unwrap_err();
        assert!(err.to_string().contains("`nope`"));
        let bad_band = Map::from_iter([("switch_band".to_string(), serde_json::json!([1.5, 2.0]))]);
        assert!(build_config(&[bad_band]).is_err());
    }

    #[test]
    fn vectors_and_params() {
        assert_eq!(parse_vector("--start", "0.5, -1e-3").unwrap(), vec![0.5, -1e-3]);
        assert!(parse_vector("--start", "1,x").unwrap_err().to_string().contains("entry 2"));
        let p = parse_params("a=2,b=1").unwrap();
        assert_eq!(p["a"], 2.0);
        assert!(parse_params("a2").is_err());
        assert_eq!(parse_pareto("min,max").unwrap(), ParetoSense::new(Sense::Minimize, Sense::Maximize));
    }

    #[test]
    fn reverse_needs_a_start() {
        let (pair, start) = builtin_problem("example1", parse_params("a=2,b=1,x0=1,y0=1").unwrap()).unwrap();
        let settings = |mode| JobSettings {
            mode,
            start: None,
            config: TraceConfig::default(),
            out_dir: PathBuf::from("out"),
            pareto: None,
            plot: false,
            artificial_center: None,
        };
        assert!(Job::new(pair.clone(), start.clone(), settings(Mode::Trace)).is_ok());
        let err = Job::new(pair.clone(), start.clone(), settings(Mode::Reverse)).unwrap_err();
        assert!(err.to_string().contains("--start"));
        let err = Job::new(pair, start, settings(Mode::Bootstrap)).unwrap_err();
        assert!(err.to_string().contains("--artificial-center"));
    }
}
