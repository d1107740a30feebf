//! `tradeoff`: traces the optimal tradeoff curve of a two-objective problem
//! and writes it as CSV and JSON.
//!
//! Exit status: 0 when every run reached a stationary point of `F`, 2 when a
//! run stopped early (step limit, vanishing direction, solver failure), 1 on
//! bad input.

mod manifest;
mod output;
mod run;

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{Map, Value};

use manifest::{
    build_config, builtin_problem, parse_override, parse_pareto, parse_params, parse_vector, InputError, Job,
    JobSettings, Mode, RunManifest,
};
use run::{run_job, RunError};

#[derive(Parser)]
#[command(name = "tradeoff", version, about = "Trace optimal tradeoff curves between two objectives")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Trace one problem given by flags, or every problem in a set of manifests.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Built-in problem: example1 or example2.
    #[arg(long, conflicts_with = "problem")]
    builtin: Option<String>,
    /// Built-in parameters, e.g. a=2,b=1,x0=1,y0=1.
    #[arg(long, requires = "builtin")]
    params: Option<String>,
    /// Problem document (JSON).
    #[arg(long)]
    problem: Option<PathBuf>,
    /// Run manifest (JSON); repeatable. Excludes the per-run flags.
    #[arg(long, conflicts_with_all = ["builtin", "problem"])]
    manifest: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Trace)]
    mode: Mode,
    /// Start point, comma separated. Defaults to the problem's own start.
    #[arg(long, allow_hyphen_values = true)]
    start: Option<String>,
    /// Output directory.
    #[arg(long, default_value = "tradeoff-out")]
    out_dir: PathBuf,
    /// Trace settings (JSON object with any subset of the settings).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Single setting override, e.g. max_step=0.01; repeatable, applied after --config.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Write the Pareto front for the given senses of f and h, e.g. min,min.
    #[arg(long, value_name = "F,H")]
    pareto: Option<String>,
    /// Write lambda_f.csv and h_f.csv.
    #[arg(long)]
    plot: bool,
    /// Center of the quadratic artificial constraint (bootstrap mode).
    #[arg(long, allow_hyphen_values = true)]
    artificial_center: Option<String>,
    /// Manifests run concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn read_object(path: &Path) -> Result<Map<String, Value>, InputError> {
    let text = std::fs::read_to_string(path).map_err(|source| InputError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let json = |source| InputError::Json {
        path: path.to_path_buf(),
        source,
    };
    match serde_json::from_str::<Value>(&text).map_err(json)? {
        Value::Object(map) => Ok(map),
        _ => Err(InputError::Usage(format!("{}: expected a JSON object", path.display()))),
    }
}

fn flag_job(args: &RunArgs) -> Result<Job, InputError> {
    let (pair, natural_start) = match (&args.builtin, &args.problem) {
        (Some(name), _) => builtin_problem(name, parse_params(args.params.as_deref().unwrap_or(""))?)?,
        (None, Some(file)) => manifest::load_problem(&manifest::ProblemSource::File(file.clone()), Path::new(""))?,
        (None, None) => {
            return Err(InputError::Usage(
                "no problem given: use --builtin, --problem or --manifest".into(),
            ))
        }
    };
    let mut layers = Vec::new();
    if let Some(file) = &args.config {
        layers.push(read_object(file)?);
    }
    let overrides = args.set.iter().map(|s| parse_override(s)).collect::<Result<Map<_, _>, _>>()?;
    layers.push(overrides);
    Job::new(
        pair,
        natural_start,
        JobSettings {
            mode: args.mode,
            start: args.start.as_deref().map(|s| parse_vector("--start", s)).transpose()?,
            config: build_config(&layers)?,
            out_dir: args.out_dir.clone(),
            pareto: args.pareto.as_deref().map(parse_pareto).transpose()?,
            plot: args.plot,
            artificial_center: args
                .artificial_center
                .as_deref()
                .map(|s| parse_vector("--artificial-center", s))
                .transpose()?,
        },
    )
}

fn manifest_jobs(args: &RunArgs) -> Result<Vec<Job>, InputError> {
    let multiple = args.manifest.len() > 1;
    let jobs = args
        .manifest
        .iter()
        .enumerate()
        .map(|(i, file)| {
            let base = file.parent().unwrap_or(Path::new(""));
            let default_out = if multiple { args.out_dir.join(format!("run{}", i + 1)) } else { args.out_dir.clone() };
            RunManifest::from_file(file)?.resolve(base, &default_out)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut seen = HashSet::new();
    for job in &jobs {
        if !seen.insert(job.out_dir.clone()) {
            return Err(InputError::Usage(format!(
                "two manifests write to the same directory {}",
                job.out_dir.display()
            )));
        }
    }
    Ok(jobs)
}

fn run(args: RunArgs) -> Result<u8, String> {
    let jobs = if args.manifest.is_empty() {
        vec![flag_job(&args).map_err(|e| e.to_string())?]
    } else {
        manifest_jobs(&args).map_err(|e| e.to_string())?
    };
    let results: Vec<Result<run::Outcome, RunError>> = if args.jobs > 1 && jobs.len() > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(args.jobs)
            .build()
            .map_err(|e| e.to_string())?;
        pool.install(|| {
            use rayon::prelude::*;
            jobs.par_iter().map(run_job).collect()
        })
    } else {
        jobs.iter().map(run_job).collect()
    };
    let mut code = 0;
    for r in results {
        match r {
            Ok(outcome) => code = code.max(outcome.exit_code),
            Err(e @ RunError::BadStart(_)) => return Err(e.to_string()),
            Err(e) => {
                eprintln!("error: {e}");
                code = code.max(2);
            }
        }
    }
    Ok(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("TRACER_LOG", "warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => match run(args) {
            Ok(code) => ExitCode::from(code),
            Err(message) => {
                eprintln!("error: {message}");
                ExitCode::from(1)
            }
        },
    }
}
