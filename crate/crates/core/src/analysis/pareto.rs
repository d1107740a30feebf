//! Non-dominated portions of a traced curve in the (f, h) plane.

use serde::{Deserialize, Serialize};

use crate::lagrange::Form;
use crate::problem::ObjectivePair;
use crate::tracer::{polish, Pin, Sense, TradeoffPath};

use super::AnalysisError;

/// Preferred direction of each objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ParetoSense {
    pub f: Sense,
    pub h: Sense,
}

impl ParetoSense {
    pub fn new(f: Sense, h: Sense) -> Self {
        Self { f, h }
    }

    /// Maps a value pair so that smaller is better in both coordinates.
    fn orient(self, (f, h): (f64, f64)) -> (f64, f64) {
        let flip = |s: Sense, v: f64| if s == Sense::Maximize { -v } else { v };
        (flip(self.f, f), flip(self.h, h))
    }
}

/// Maximal run of consecutive path indices on the front (inclusive).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParetoSegment {
    pub start: usize,
    pub end: usize,
}

/// Where the front jumps between two segments: the self-intersection of the
/// (f, h) polyline joining them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplicePoint {
    /// Positions in [`ParetoFront::segments`].
    pub segments: [usize; 2],
    /// Path index of the first vertex of each crossing edge, in segment order.
    pub edges: [usize; 2],
    pub f: f64,
    pub h: f64,
}

/// A splice moved onto the curve: both branches solved at one common `f`,
/// with that `f` adjusted until their `h` agree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedSplice {
    pub segments: [usize; 2],
    pub f: f64,
    pub h: f64,
    /// Curve points on the two branches.
    pub k: [Vec<f64>; 2],
    /// Remaining `|h₁ − h₂|`.
    pub h_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    /// Path indices of non-dominated points, ascending.
    pub indices: Vec<usize>,
    pub segments: Vec<ParetoSegment>,
    pub splices: Vec<SplicePoint>,
}

impl ParetoFront {
    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }
}

/// Indices of the non-dominated pairs, ascending.
///
/// `q` dominates `p` when it is no worse in both objectives and strictly better
/// in one; identical pairs do not dominate each other. Non-finite pairs are
/// never on the front.
pub fn pareto_indices(values: &[(f64, f64)], sense: ParetoSense) -> Vec<usize> {
    let mut order: Vec<(usize, (f64, f64))> = values
        .iter()
        .enumerate()
        .filter(|(_, (f, h))| f.is_finite() && h.is_finite())
        .map(|(i, v)| (i, sense.orient(*v)))
        .collect();
    order.sort_by(|a, b| a.1 .0.total_cmp(&b.1 .0).then(a.1 .1.total_cmp(&b.1 .1)));
    let mut front = Vec::new();
    let mut best_h = f64::INFINITY;
    let mut i = 0;
    while i < order.len() {
        let f = order[i].1 .0;
        let mut j = i;
        while j < order.len() && order[j].1 .0 == f {
            j += 1;
        }
        // sorted by h within the group, so the group minimum comes first
        let group_min = order[i].1 .1;
        if group_min < best_h {
            front.extend(order[i..j].iter().take_while(|(_, v)| v.1 == group_min).map(|(idx, _)| *idx));
            best_h = group_min;
        }
        i = j;
    }
    front.sort_unstable();
    front
}

fn segments_of(indices: &[usize]) -> Vec<ParetoSegment> {
    let mut out: Vec<ParetoSegment> = Vec::new();
    for &i in indices {
        match out.last_mut() {
            Some(seg) if seg.end + 1 == i => seg.end = i,
            _ => out.push(ParetoSegment { start: i, end: i }),
        }
    }
    out
}

fn intersect(p1: (f64, f64), p2: (f64, f64), q1: (f64, f64), q2: (f64, f64)) -> Option<(f64, f64)> {
    let r = (p2.0 - p1.0, p2.1 - p1.1);
    let s = (q2.0 - q1.0, q2.1 - q1.1);
    let denom = r.0 * s.1 - r.1 * s.0;
    if denom == 0.0 {
        return None;
    }
    let qp = (q1.0 - p1.0, q1.1 - p1.1);
    let a = (qp.0 * s.1 - qp.1 * s.0) / denom;
    let b = (qp.0 * r.1 - qp.1 * r.0) / denom;
    ((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b)).then_some((p1.0 + a * r.0, p1.1 + a * r.1))
}

fn splices_of(values: &[(f64, f64)], segments: &[ParetoSegment], sense: ParetoSense) -> Vec<SplicePoint> {
    let n = values.len();
    let f_range = |seg: &ParetoSegment| {
        (seg.start..=seg.end)
            .map(|i| sense.orient(values[i]).0)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), f| (lo.min(f), hi.max(f)))
    };
    let mut by_f: Vec<usize> = (0..segments.len()).collect();
    by_f.sort_by(|&a, &b| f_range(&segments[a]).0.total_cmp(&f_range(&segments[b]).0));
    let edges_near = |seg: &ParetoSegment| -> Vec<usize> {
        [seg.start.checked_sub(1), Some(seg.start), seg.end.checked_sub(1), Some(seg.end)]
            .into_iter()
            .flatten()
            .filter(|&e| e + 1 < n)
            .collect()
    };
    let mut out = Vec::new();
    for pair in by_f.windows(2) {
        let (a, b) = (&segments[pair[0]], &segments[pair[1]]);
        let target = 0.5 * (f_range(a).1 + f_range(b).0);
        let mut best: Option<(f64, (f64, f64), [usize; 2])> = None;
        for ea in edges_near(a) {
            for eb in edges_near(b) {
                // neighbouring edges share a vertex and always meet there
                if ea.abs_diff(eb) <= 1 {
                    continue;
                }
                if let Some(x) = intersect(values[ea], values[ea + 1], values[eb], values[eb + 1]) {
                    let gap = (sense.orient(x).0 - target).abs();
                    if best.is_none_or(|(g, _, _)| gap < g) {
                        best = Some((gap, x, [ea, eb]));
                    }
                }
            }
        }
        if let Some((_, (f, h), edges)) = best {
            out.push(SplicePoint {
                segments: [pair[0], pair[1]],
                edges,
                f,
                h,
            });
        }
    }
    out
}

/// Non-dominated points of a path, grouped into segments and joined by splices.
pub fn extract_pareto(path: &TradeoffPath, sense: ParetoSense) -> ParetoFront {
    let values: Vec<(f64, f64)> = path.points.iter().map(|p| (p.f, p.h)).collect();
    let indices = pareto_indices(&values, sense);
    let segments = segments_of(&indices);
    let splices = splices_of(&values, &segments, sense);
    ParetoFront {
        indices,
        segments,
        splices,
    }
}

const SPLICE_ITERATIONS: usize = 40;

/// Curve point on the edge starting at path index `edge`, solved at `f = target`.
struct Branch {
    k: Vec<f64>,
    form: Form,
    t: f64,
}

impl Branch {
    fn seed(path: &TradeoffPath, edge: usize, target: f64) -> Self {
        let (a, b) = (&path.points[edge], &path.points[edge + 1]);
        let theta = if b.f != a.f { ((target - a.f) / (b.f - a.f)).clamp(0.0, 1.0) } else { 0.5 };
        let lerp = |x: f64, y: f64| x + theta * (y - x);
        let k = a.k.iter().zip(&b.k).map(|(x, y)| lerp(*x, *y)).collect();
        match (a.lambda.finite(), b.lambda.finite(), a.mu.finite(), b.mu.finite()) {
            (Some(la), Some(lb), _, _) if la.abs().max(lb.abs()) <= 1.0 => Branch { k, form: Form::Lambda, t: lerp(la, lb) },
            (_, _, Some(ma), Some(mb)) => Branch { k, form: Form::Mu, t: lerp(ma, mb) },
            (la, lb, _, _) => Branch {
                k,
                form: Form::Lambda,
                t: lerp(la.unwrap_or(0.0), lb.unwrap_or(0.0)),
            },
        }
    }

    /// Moves onto the curve at `f = target` and returns `h` there.
    fn land(&mut self, pair: &ObjectivePair, target: f64, tol: f64) -> Result<f64, AnalysisError> {
        let out = polish(pair, &self.k, self.t, self.form, &Pin::FixedF(target), tol)?;
        self.k = out.k;
        self.t = out.t;
        Ok(pair.eval_h(&self.k)?.value)
    }
}

/// Refines a splice so that both branches meet at the same `f` and `h`.
///
/// Each trial `f` is imposed on both branches with a fixed-`f` Newton solve;
/// a secant iteration on `f` closes the gap in `h`.
pub fn refine_splice(
    pair: &ObjectivePair,
    path: &TradeoffPath,
    splice: &SplicePoint,
    tol: f64,
) -> Result<RefinedSplice, AnalysisError> {
    let mut branches = splice.edges.map(|e| Branch::seed(path, e, splice.f));
    let gap_at = |f: f64, branches: &mut [Branch; 2]| -> Result<(f64, f64), AnalysisError> {
        let h0 = branches[0].land(pair, f, tol)?;
        let h1 = branches[1].land(pair, f, tol)?;
        Ok((h0 - h1, 0.5 * (h0 + h1)))
    };
    let edge = splice.edges[0];
    let span = (path.points[edge + 1].f - path.points[edge].f).abs();
    let mut f_prev = splice.f;
    let (mut g_prev, _) = gap_at(f_prev, &mut branches)?;
    let mut f = splice.f + 0.1 * span.max(1e-9 * (1.0 + splice.f.abs()));
    for _ in 0..SPLICE_ITERATIONS {
        let (g, h) = gap_at(f, &mut branches)?;
        if g.abs() <= tol * (1.0 + h.abs()) {
            let [a, b] = branches;
            return Ok(RefinedSplice {
                segments: splice.segments,
                f,
                h,
                k: [a.k, b.k],
                h_gap: g.abs(),
            });
        }
        if g == g_prev {
            return Err(AnalysisError::SpliceNoConvergence { gap: g.abs() });
        }
        let next = f - g * (f - f_prev) / (g - g_prev);
        (f_prev, g_prev, f) = (f, g, next);
    }
    Err(AnalysisError::SpliceNoConvergence { gap: g_prev.abs() })
}

/// [`refine_splice`] for every splice of `front`.
pub fn refine_splices(
    pair: &ObjectivePair,
    path: &TradeoffPath,
    front: &ParetoFront,
    tol: f64,
) -> Result<Vec<RefinedSplice>, AnalysisError> {
    front.splices.iter().map(|s| refine_splice(pair, path, s, tol)).collect()
}
