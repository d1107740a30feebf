//! Batch execution with an optional rayon backend.
//!
//! With the `parallel` feature disabled, [`Exec::Parallel`] runs sequentially.

use serde::{Deserialize, Serialize};

use crate::problem::ObjectivePair;
use crate::tracer::{trace, TraceConfig, TraceError, TradeoffPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// Applies `f` to every item, preserving order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                items.par_iter().map(f).collect()
            }
            _ => items.iter().map(f).collect(),
        }
    }
}

/// One independent trace.
#[derive(Debug, Clone)]
pub struct TraceJob {
    pub pair: ObjectivePair,
    pub start: Vec<f64>,
    pub config: TraceConfig,
}

/// Runs every job; each trace itself is sequential.
pub fn trace_batch(jobs: &[TraceJob], exec: Exec) -> Vec<Result<TradeoffPath, TraceError>> {
    exec.map(jobs, |job| trace(&job.pair, &job.start, &job.config))
}
