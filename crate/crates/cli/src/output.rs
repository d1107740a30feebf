//! CSV and JSON artifacts.
//!
//! Numbers are written with 17 significant digits so that every value reads
//! back to the same double. Infinite multipliers are empty CSV cells and JSON
//! nulls.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use tradeoff::analysis::{CioClass, ParetoFront, ParetoSense, RefinedSplice};
use tradeoff::lagrange::{assemble, tangency_residual, Form, Multiplier};
use tradeoff::linalg::Inertia;
use tradeoff::problem::ObjectivePair;
use tradeoff::tracer::{EventKind, PathPoint, TraceConfig, TraceEvent, TradeoffPath};

pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        String::new()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, num)
}

/// One path sample in the orientation of the user's problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub s: f64,
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    pub f: f64,
    pub h: f64,
    #[serde(rename = "detM")]
    pub det_m: Option<f64>,
    #[serde(rename = "quadM")]
    pub quad_m: Option<f64>,
    pub residual: f64,
    pub k: Vec<f64>,
    pub event: Option<EventKind>,
}

impl Row {
    /// `swapped` marks a point traced with the roles of `F` and `H` exchanged
    /// (reverse mode); its quantities are recomputed for the original pair.
    pub fn new(p: &PathPoint, pair: &ObjectivePair, swapped: bool) -> Row {
        if !swapped {
            return Row {
                s: p.s,
                lambda: p.lambda.finite(),
                mu: p.mu.finite(),
                f: p.f,
                h: p.h,
                det_m: p.det_m,
                quad_m: p.quad_m,
                residual: p.residual,
                k: p.k.clone(),
                event: p.event,
            };
        }
        // ∇H = λ'∇F on the swapped pair, so the original λ is 1/λ' = μ'
        let (lambda, mu) = (p.mu, p.lambda);
        let (det_m, quad_m, residual) = match lambda {
            Multiplier::Finite(l) => match assemble(pair, &p.k, l) {
                Ok(state) => (state.det_m(), state.quad_m(), tangency_residual(&state)),
                Err(_) => (None, None, p.residual),
            },
            Multiplier::Infinite => (None, None, p.residual),
        };
        Row {
            s: p.s,
            lambda: lambda.finite(),
            mu: mu.finite(),
            f: p.h,
            h: p.f,
            det_m,
            quad_m,
            residual,
            k: p.k.clone(),
            event: p.event,
        }
    }
}

pub fn rows(path: &TradeoffPath, pair: &ObjectivePair, swapped: bool) -> Vec<Row> {
    path.points.iter().map(|p| Row::new(p, pair, swapped)).collect()
}

fn create(path: &Path) -> std::io::Result<csv::Writer<File>> {
    Ok(csv::Writer::from_writer(File::create(path)?))
}

fn k_header(dim: usize) -> impl Iterator<Item = String> {
    (1..=dim).map(|i| format!("k_{i}"))
}

/// `s,lambda,mu,f,h,detM,quadM,residual,k_1..k_N,event`
pub fn write_path_csv(file: &Path, rows: &[Row], dim: usize) -> std::io::Result<()> {
    let mut w = create(file)?;
    let mut header: Vec<String> = ["s", "lambda", "mu", "f", "h", "detM", "quadM", "residual"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(k_header(dim));
    header.push("event".into());
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            num(r.s),
            opt(r.lambda),
            opt(r.mu),
            num(r.f),
            num(r.h),
            opt(r.det_m),
            opt(r.quad_m),
            num(r.residual),
        ];
        rec.extend(r.k.iter().map(|&x| num(x)));
        rec.push(r.event.map_or_else(String::new, |e| e.as_str().to_string()));
        w.write_record(&rec)?;
    }
    w.flush()
}

/// `lambda_f.csv` (`s,lambda,f`) and `h_f.csv` (`s,h,f,lambda`).
pub fn write_plot_csvs(dir: &Path, rows: &[Row]) -> std::io::Result<()> {
    let mut lf = create(&dir.join("lambda_f.csv"))?;
    lf.write_record(["s", "lambda", "f"])?;
    let mut hf = create(&dir.join("h_f.csv"))?;
    hf.write_record(["s", "h", "f", "lambda"])?;
    for r in rows {
        lf.write_record([num(r.s), opt(r.lambda), num(r.f)])?;
        hf.write_record([num(r.s), num(r.h), num(r.f), opt(r.lambda)])?;
    }
    lf.flush()?;
    hf.flush()
}

/// The front in the user's orientation.
#[derive(Debug, Clone, Serialize)]
pub struct FrontReport {
    pub sense: ParetoSense,
    pub points: usize,
    pub segments: Vec<SegmentReport>,
    pub splices: Vec<SpliceReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SegmentReport {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpliceReport {
    pub segments: [usize; 2],
    pub f: f64,
    pub h: f64,
    /// Whether both branches were solved onto the curve at the common point.
    pub refined: bool,
    pub h_gap: Option<f64>,
    pub k: Option<[Vec<f64>; 2]>,
}

impl FrontReport {
    /// `swapped` fronts were computed on the role-exchanged path.
    pub fn new(
        sense: ParetoSense,
        front: &ParetoFront,
        refined: Option<&[RefinedSplice]>,
        swapped: bool,
    ) -> FrontReport {
        let orient = |f: f64, h: f64| if swapped { (h, f) } else { (f, h) };
        let splices = front
            .splices
            .iter()
            .enumerate()
            .map(|(i, raw)| match refined.and_then(|r| r.get(i)) {
                Some(r) => {
                    let (f, h) = orient(r.f, r.h);
                    SpliceReport {
                        segments: r.segments,
                        f,
                        h,
                        refined: true,
                        h_gap: Some(r.h_gap),
                        k: Some(r.k.clone()),
                    }
                }
                None => {
                    let (f, h) = orient(raw.f, raw.h);
                    SpliceReport {
                        segments: raw.segments,
                        f,
                        h,
                        refined: false,
                        h_gap: None,
                        k: None,
                    }
                }
            })
            .collect();
        FrontReport {
            sense,
            points: front.indices.len(),
            segments: front
                .segments
                .iter()
                .map(|s| SegmentReport {
                    start: s.start,
                    end: s.end,
                })
                .collect(),
            splices,
        }
    }
}

/// `kind,segment,index,s,f,h,k_1..k_N`: front points segment by segment, then
/// one `splice` row per splice (on the first branch).
pub fn write_pareto_csv(file: &Path, report: &FrontReport, rows: &[Row], dim: usize) -> std::io::Result<()> {
    let mut w = create(file)?;
    let mut header: Vec<String> = ["kind", "segment", "index", "s", "f", "h"].iter().map(|s| s.to_string()).collect();
    header.extend(k_header(dim));
    w.write_record(&header)?;
    for (seg_id, seg) in report.segments.iter().enumerate() {
        for (i, r) in rows.iter().enumerate().take(seg.end + 1).skip(seg.start) {
            let mut rec = vec![
                "point".to_string(),
                seg_id.to_string(),
                i.to_string(),
                num(r.s),
                num(r.f),
                num(r.h),
            ];
            rec.extend(r.k.iter().map(|&x| num(x)));
            w.write_record(&rec)?;
        }
    }
    for sp in &report.splices {
        let mut rec = vec![
            "splice".to_string(),
            format!("{}-{}", sp.segments[0], sp.segments[1]),
            String::new(),
            String::new(),
            num(sp.f),
            num(sp.h),
        ];
        match &sp.k {
            Some([k, _]) => rec.extend(k.iter().map(|&x| num(x))),
            None => rec.extend(std::iter::repeat_n(String::new(), dim)),
        }
        w.write_record(&rec)?;
    }
    w.flush()
}

#[derive(Debug, Clone, Serialize)]
pub struct PointReport {
    pub s: f64,
    pub k: Vec<f64>,
    pub f: f64,
    pub h: f64,
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
}

impl From<&Row> for PointReport {
    fn from(r: &Row) -> Self {
        PointReport {
            s: r.s,
            k: r.k.clone(),
            f: r.f,
            h: r.h,
            lambda: r.lambda,
            mu: r.mu,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EventReport {
    pub kind: EventKind,
    pub s: f64,
    pub k: Vec<f64>,
    pub f: f64,
    pub h: f64,
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    /// Parametrization the event was monitored in, for the traced orientation.
    pub form: Form,
    pub value: f64,
    pub merged_with: Option<EventKind>,
    pub low_precision: bool,
}

impl EventReport {
    pub fn new(e: &TraceEvent, pair: &ObjectivePair, swapped: bool) -> EventReport {
        let r = Row::new(&e.point, pair, swapped);
        EventReport {
            kind: e.kind,
            s: e.s,
            k: r.k,
            f: r.f,
            h: r.h,
            lambda: r.lambda,
            mu: r.mu,
            form: e.form,
            value: e.value,
            merged_with: e.merged_with,
            low_precision: e.low_precision,
        }
    }
}

/// A stationary point of `F` or `H` met by the run.
#[derive(Debug, Clone, Serialize)]
pub struct CioEntry {
    /// `"F"` or `"H"`.
    pub field: &'static str,
    /// `start`, `end`, `crossing` or `bootstrap`.
    pub role: &'static str,
    pub k: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub class: CioClass,
    pub inertia: Inertia,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub problem: String,
    pub mode: String,
    pub dim: usize,
    /// `terminated`, `step_limit`, `zero_direction` or `failed`.
    pub status: String,
    pub exit_code: u8,
    pub error: Option<String>,
    pub points: usize,
    pub start: Option<PointReport>,
    pub end: Option<PointReport>,
    pub cios: Vec<CioEntry>,
    pub events: Vec<EventReport>,
    pub pareto: Option<FrontReport>,
    pub config: TraceConfig,
    pub wall_time_seconds: f64,
}

pub fn write_summary(file: &Path, summary: &Summary) -> std::io::Result<()> {
    let mut out = File::create(file)?;
    serde_json::to_writer_pretty(&mut out, summary)?;
    out.write_all(b"\n")
}
