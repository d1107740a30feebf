//! Executes one resolved job and writes its artifacts.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use log::{info, warn};
use thiserror::Error;

use tradeoff::analysis::{classify_cio, extract_pareto, refine_splices, ParetoSense};
use tradeoff::problem::{ObjectivePair, QuadraticDeviationConstraint, ScalarField};
use tradeoff::tracer::{
    bootstrap_chain, reverse_trace, trace, trace_beyond_zero, trace_stepwise, EventKind, TraceError, TradeoffPath,
};

use crate::manifest::{Job, Mode};
use crate::output::{
    rows, write_pareto_csv, write_path_csv, write_plot_csvs, write_summary, CioEntry, EventReport, FrontReport,
    PointReport, Row, Summary,
};

/// Looser than the trace tolerances: end points are stationary to polish accuracy.
const CIO_CLASSIFY_TOL: f64 = 1e-6;
const SPLICE_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// The start point does not meet the tracer's preconditions.
    #[error("{0}")]
    BadStart(TraceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outcome {
    pub exit_code: u8,
}

struct Traced {
    /// Main path, as traced.
    path: TradeoffPath,
    /// The path was traced with `F` and `H` exchanged.
    swapped: bool,
    /// Bootstrap only: the phase against the artificial constraint.
    artificial: Option<(ObjectivePair, TradeoffPath)>,
}

fn execute(job: &Job) -> Result<Traced, TraceError> {
    let cfg = &job.config;
    let plain = |path| Traced {
        path,
        swapped: false,
        artificial: None,
    };
    match job.mode {
        Mode::Trace => trace(&job.pair, &job.start, cfg).map(plain),
        Mode::Stepwise => trace_stepwise(&job.pair, &job.start, cfg).map(plain),
        Mode::BeyondZero => {
            let mut first = cfg.clone();
            first.beyond_zero = false;
            let path = trace(&job.pair, &job.start, &first)?;
            if !path.terminated() {
                return Ok(plain(path));
            }
            let mut beyond = cfg.clone();
            beyond.beyond_zero = true;
            trace_beyond_zero(&job.pair, &path, &beyond).map(plain)
        }
        Mode::Reverse => reverse_trace(&job.pair, &job.start, cfg).map(|path| Traced {
            path,
            swapped: true,
            artificial: None,
        }),
        Mode::Bootstrap => {
            let center = job.artificial_center.clone().expect("checked when the job was built");
            let artificial: Arc<dyn ScalarField> = Arc::new(QuadraticDeviationConstraint::new(center));
            let aux = job
                .pair
                .with_h(artificial.clone(), format!("{} (artificial)", job.pair.name()))?;
            let out = bootstrap_chain(&job.pair, artificial, &job.start, cfg)?;
            Ok(Traced {
                path: out.link,
                swapped: true,
                artificial: Some((aux, out.artificial)),
            })
        }
    }
}

fn status(path: &TradeoffPath) -> &'static str {
    match path.last_event().map(|e| e.kind) {
        _ if path.terminated() => "terminated",
        Some(EventKind::ZeroDirection) => "zero_direction",
        _ => "step_limit",
    }
}

fn cio_entry(field_name: &'static str, role: &'static str, field: &dyn ScalarField, k: &[f64]) -> Option<CioEntry> {
    match classify_cio(field, k, CIO_CLASSIFY_TOL) {
        Ok(r) => Some(CioEntry {
            field: field_name,
            role,
            k: r.k,
            value: r.value,
            grad_norm: r.grad_norm,
            class: r.class,
            inertia: r.inertia,
        }),
        Err(e) => {
            warn!("{field_name} at {k:?} not classified: {e}");
            None
        }
    }
}

fn cios(job: &Job, traced: &Traced) -> Vec<CioEntry> {
    let (f, h) = (job.pair.f().as_ref(), job.pair.h().as_ref());
    // the traced pair starts at a stationary point of its H and ends at one of its F
    let (start_field, end_field) = if traced.swapped { (("F", f), ("H", h)) } else { (("H", h), ("F", f)) };
    let mut out = Vec::new();
    if let Some((aux, art)) = &traced.artificial {
        if let Some(first) = art.points.first() {
            out.extend(cio_entry("artificial", "start", aux.h().as_ref(), &first.k));
        }
    }
    let path = &traced.path;
    if let Some(first) = path.points.first() {
        let (start_name, start_field) = start_field;
        let role = if traced.artificial.is_some() { "bootstrap" } else { "start" };
        out.extend(cio_entry(start_name, role, start_field, &first.k));
    }
    for e in &path.events {
        match (e.kind, &e.cio) {
            (EventKind::Termination, _) => out.extend(cio_entry(end_field.0, "end", end_field.1, &e.point.k)),
            (EventKind::SaddleCross, Some(c)) => out.push(CioEntry {
                field: end_field.0,
                role: "crossing",
                k: c.k.clone(),
                value: c.f,
                grad_norm: c.grad_norm,
                class: c.class,
                inertia: c.inertia,
            }),
            _ => {}
        }
    }
    out
}

fn front(job: &Job, traced: &Traced, sense: ParetoSense) -> FrontReport {
    let (pair, traced_sense) = if traced.swapped {
        (job.pair.swapped(), ParetoSense::new(sense.h, sense.f))
    } else {
        (job.pair.clone(), sense)
    };
    let front = extract_pareto(&traced.path, traced_sense);
    let refined = match refine_splices(&pair, &traced.path, &front, SPLICE_TOL) {
        Ok(r) => Some(r),
        Err(e) => {
            warn!("splice refinement failed, reporting polyline crossings: {e}");
            None
        }
    };
    FrontReport::new(sense, &front, refined.as_deref(), traced.swapped)
}

/// Runs `job` and writes its artifacts. Returns exit code 0 when the curve
/// reached a stationary point of `F`, 2 otherwise.
pub fn run_job(job: &Job) -> Result<Outcome, RunError> {
    let io = |path: PathBuf| move |source| RunError::Io { path, source };
    std::fs::create_dir_all(&job.out_dir).map_err(io(job.out_dir.clone()))?;
    let clock = Instant::now();
    let result = execute(job);
    let dim = job.pair.dim();
    let mut summary = Summary {
        problem: job.pair.name().to_string(),
        mode: job.mode.to_string(),
        dim,
        status: "failed".into(),
        exit_code: 2,
        error: None,
        points: 0,
        start: None,
        end: None,
        cios: Vec::new(),
        events: Vec::new(),
        pareto: None,
        config: job.config.clone(),
        wall_time_seconds: 0.0,
    };
    let summary_file = job.out_dir.join("summary.json");
    let traced = match result {
        Ok(t) => t,
        Err(e @ (TraceError::StartNotCio { .. } | TraceError::SingularStart { .. } | TraceError::Dimension(_))) => {
            return Err(RunError::BadStart(e));
        }
        Err(e) => {
            warn!("trace failed: {e}");
            summary.error = Some(e.to_string());
            summary.wall_time_seconds = clock.elapsed().as_secs_f64();
            write_summary(&summary_file, &summary).map_err(io(summary_file.clone()))?;
            return Ok(Outcome { exit_code: 2 });
        }
    };
    let table: Vec<Row> = rows(&traced.path, &job.pair, traced.swapped);
    let path_file = job.out_dir.join("path.csv");
    write_path_csv(&path_file, &table, dim).map_err(io(path_file))?;
    if let Some((aux, art)) = &traced.artificial {
        let file = job.out_dir.join("artificial_path.csv");
        write_path_csv(&file, &rows(art, aux, false), dim).map_err(io(file))?;
    }
    if job.plot {
        write_plot_csvs(&job.out_dir, &table).map_err(io(job.out_dir.clone()))?;
    }
    if let Some(sense) = job.pareto {
        let report = front(job, &traced, sense);
        let file = job.out_dir.join("pareto.csv");
        write_pareto_csv(&file, &report, &table, dim).map_err(io(file))?;
        summary.pareto = Some(report);
    }
    let exit_code = if traced.path.terminated() { 0 } else { 2 };
    summary.status = status(&traced.path).into();
    summary.exit_code = exit_code;
    summary.points = table.len();
    summary.start = table.first().map(PointReport::from);
    summary.end = table.last().map(PointReport::from);
    summary.cios = cios(job, &traced);
    summary.events = traced
        .path
        .events
        .iter()
        .map(|e| EventReport::new(e, &job.pair, traced.swapped))
        .collect();
    summary.wall_time_seconds = clock.elapsed().as_secs_f64();
    write_summary(&summary_file, &summary).map_err(io(summary_file))?;
    info!(
        "{}: {} after {} points, {} events",
        job.out_dir.display(),
        summary.status,
        summary.points,
        summary.events.len()
    );
    Ok(Outcome { exit_code })
}
