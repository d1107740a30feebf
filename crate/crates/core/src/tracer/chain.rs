//! Compositions of traces: role reversal and the two-phase bootstrap.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::problem::{ObjectivePair, ScalarField};

use super::{trace, TraceConfig, TraceError, TradeoffPath};

/// Traces with the roles of `F` and `H` exchanged, starting at a stationary point of `F`.
pub fn reverse_trace(pair: &ObjectivePair, start: &[f64], cfg: &TraceConfig) -> Result<TradeoffPath, TraceError> {
    trace(&pair.swapped(), start, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    /// `F` against the artificial constraint, ending at a stationary point of `F`.
    pub artificial: TradeoffPath,
    /// Stationary point of `F` reached by the first phase.
    pub f_cio: Vec<f64>,
    /// The true pair traced in reverse from `f_cio` towards a stationary point of `H`.
    pub link: TradeoffPath,
}

/// Reaches a stationary point of `F` through an artificial constraint with a
/// known stationary point `start`, then follows the true curve from there.
///
/// The second phase runs on the swapped pair, so its `λ` is the reciprocal of
/// the original multiplier.
pub fn bootstrap_chain(
    pair: &ObjectivePair,
    artificial: Arc<dyn ScalarField>,
    start: &[f64],
    cfg: &TraceConfig,
) -> Result<BootstrapResult, TraceError> {
    let aux = pair.with_h(artificial, format!("{} (artificial)", pair.name()))?;
    let mut first_cfg = cfg.clone();
    first_cfg.beyond_zero = false;
    let first = trace(&aux, start, &first_cfg)?;
    if !first.terminated() {
        return Err(TraceError::NotTerminated {
            last: first.last_event().map(|e| e.kind),
        });
    }
    let f_cio = first.end().expect("terminated path has points").k.clone();
    let link = reverse_trace(pair, &f_cio, cfg)?;
    Ok(BootstrapResult {
        artificial: first,
        f_cio,
        link,
    })
}
