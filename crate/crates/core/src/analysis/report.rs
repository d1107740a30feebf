//! Classification of inflections by the change of `dλ/dh` across them.

use serde::{Deserialize, Serialize};

use crate::tracer::{EventKind, PathPoint, TradeoffPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReturnKind {
    /// `dλ/dh` goes from negative to positive with increasing `h`.
    Diminished,
    /// `dλ/dh` goes from positive to negative with increasing `h`.
    Enhanced,
    /// No sign change could be read from the neighbouring samples.
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InflectionReport {
    pub s: f64,
    pub k: Vec<f64>,
    pub f: f64,
    pub h: f64,
    pub lambda: Option<f64>,
    pub kind: ReturnKind,
    /// `dλ/dh = det(M)/quadM` on the lower-`h` side.
    pub below: Option<f64>,
    /// `dλ/dh` on the higher-`h` side.
    pub above: Option<f64>,
}

fn slope(p: &PathPoint) -> Option<f64> {
    let (det, quad) = (p.det_m?, p.quad_m?);
    (quad != 0.0).then(|| det / quad)
}

/// Nearest sample in `range` (walked in order) that is not itself an event
/// point and has a defined `dλ/dh`.
fn neighbour(points: &[PathPoint], range: impl Iterator<Item = usize>) -> Option<&PathPoint> {
    range
        .map(|i| &points[i])
        .find(|p| p.event.is_none() && slope(p).is_some_and(|v| v != 0.0))
}

/// One entry per inflection event, in path order.
pub fn diminished_return_report(path: &TradeoffPath) -> Vec<InflectionReport> {
    let points = &path.points;
    path.events_of(EventKind::Inflection)
        .map(|event| {
            let at = points
                .iter()
                .position(|p| p.s == event.s && p.event == Some(EventKind::Inflection))
                .unwrap_or_else(|| points.partition_point(|p| p.s < event.s));
            let before = neighbour(points, (0..at).rev());
            let after = neighbour(points, at + 1..points.len());
            let (below, above) = match (before, after) {
                (Some(b), Some(a)) if b.h <= a.h => (Some(b), Some(a)),
                (Some(b), Some(a)) => (Some(a), Some(b)),
                _ => (None, None),
            };
            let (below, above) = (below.and_then(slope), above.and_then(slope));
            let kind = match (below, above) {
                (Some(lo), Some(hi)) if lo < 0.0 && hi > 0.0 => ReturnKind::Diminished,
                (Some(lo), Some(hi)) if lo > 0.0 && hi < 0.0 => ReturnKind::Enhanced,
                _ => ReturnKind::Undetermined,
            };
            InflectionReport {
                s: event.s,
                k: event.point.k.clone(),
                f: event.point.f,
                h: event.point.h,
                lambda: event.point.lambda.finite(),
                kind,
                below,
                above,
            }
        })
        .collect()
}
