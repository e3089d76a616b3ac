//! `aveas`: batch front end for the scenario pipeline.
//!
//! Machine-readable output goes to stdout as canonical JSON; prose goes to
//! stderr. Exit codes are listed in [`ExitStatus`].

mod error;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aveas_core::calibration::{calibrate, ObjectiveSpec, Recorded};
use aveas_core::metrics::annotate_scenario;
use aveas_core::model::{validate_scenario, AcquisitionMethod, Area, EventType, Origin, Severity, Violation};
use aveas_core::openlabel::{self, metadata_to_value, schema_check, to_canonical_line};
use aveas_core::sampler::{emit_samples, sweep, VariationSpec};
use aveas_core::sim::{simulate, trace_to_scenario, ModelParams, SimConfig};
use aveas_core::store::{QueryFilter, RangePredicate, ScenarioStore};
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use error::{CliError, ExitStatus};

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "aveas", version, about = "Traffic scenario format, metrics, store, simulation and sampling")]
struct Cli {
    /// Worker threads for parallel stages; results do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a scenario document and print the violation report.
    Validate { file: PathBuf },
    /// Add scenario documents to a store; prints one line per file.
    Ingest {
        #[arg(long)]
        store: PathBuf,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Recompute criticality measures for a stored scenario and print it.
    Metrics {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        id: String,
        /// Prediction horizon for gTTC (s).
        #[arg(long, default_value_t = 20.0)]
        horizon: f64,
        /// Persist the annotated scenario back into the store.
        #[arg(long)]
        write: bool,
    },
    /// Print ids and metadata of matching scenarios as JSON lines.
    Query {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        area: Vec<Area>,
        #[arg(long)]
        method: Vec<AcquisitionMethod>,
        #[arg(long)]
        origin: Vec<Origin>,
        #[arg(long)]
        event: Vec<EventType>,
        /// Inclusive duration bounds in seconds.
        #[arg(long, value_name = "LO:HI", value_parser = parse_interval)]
        duration: Option<(f64, f64)>,
        /// Dynamic range overlapping an interval, e.g. `speed:20:30`.
        #[arg(long, value_name = "QUANTITY:LO:HI", value_parser = parse_range)]
        range: Vec<RangePredicate>,
        /// Case-insensitive substring of the data use restrictions.
        #[arg(long)]
        text: Option<String>,
    },
    /// Run the traffic simulator and write the trace as a scenario document.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Model parameters; defaults when absent.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Scenario id; `sim-<seed>` when absent.
        #[arg(long)]
        id: Option<String>,
    },
    /// Fit model parameters to recorded data and write the result.
    Calibrate {
        #[arg(long)]
        spec: PathBuf,
        /// Scenario document, JSON array of observations, or a stored id.
        #[arg(long)]
        data: String,
        #[arg(long)]
        out: PathBuf,
        /// Store to resolve `--data` ids in.
        #[arg(long)]
        store: Option<PathBuf>,
        /// Starting parameters; defaults when absent.
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Sweep cut-in variations of a stored scenario and emit critical ones.
    Sample {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        store: PathBuf,
        /// CSV file receiving one row per grid point.
        #[arg(long)]
        report: PathBuf,
        /// Emit and store variations with at least this required deceleration.
        #[arg(long, value_name = "A_REQ")]
        threshold: Option<f64>,
    },
    /// Rebuild a store index from the files on disk.
    Reindex {
        #[arg(long)]
        store: PathBuf,
    },
}

fn parse_interval(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or("expected LO:HI")?;
    let lo: f64 = lo.parse().map_err(|e| format!("bad lower bound: {e}"))?;
    let hi: f64 = hi.parse().map_err(|e| format!("bad upper bound: {e}"))?;
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return Err(format!("empty interval {lo}:{hi}"));
    }
    Ok((lo, hi))
}

fn parse_range(s: &str) -> std::result::Result<RangePredicate, String> {
    let (quantity, rest) = s.split_once(':').ok_or("expected QUANTITY:LO:HI")?;
    if quantity.is_empty() {
        return Err("empty quantity name".into());
    }
    let (lo, hi) = parse_interval(rest)?;
    Ok(RangePredicate {
        quantity: quantity.to_string(),
        lo,
        hi,
    })
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_slice(&read(path)?).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn emit<T: Serialize>(v: &T) -> Result<()> {
    let line = to_canonical_line(v).map_err(|e| CliError::new(ExitStatus::Computation, e.to_string()))?;
    println!("{line}");
    Ok(())
}

fn load_params(path: Option<&Path>) -> Result<ModelParams> {
    let params = match path {
        Some(p) => read_json(p)?,
        None => ModelParams::default(),
    };
    params.validate()?;
    Ok(params)
}

fn split_report(violations: &[Violation]) -> (Vec<&Violation>, Vec<&Violation>) {
    violations.iter().partition(|v| v.severity == Severity::Error)
}

fn emit_report(violations: &[Violation]) -> Result<()> {
    let (errors, warnings) = split_report(violations);
    emit(&json!({ "valid": errors.is_empty(), "errors": errors, "warnings": warnings }))
}

fn cmd_validate(file: &Path) -> Result<ExitStatus> {
    let bytes = read(file)?;
    let mut report = schema_check(&bytes);
    if report.is_valid() {
        let s = openlabel::parse_unchecked(&bytes).map_err(|e| CliError::new(ExitStatus::Computation, e.to_string()))?;
        report = validate_scenario(&s);
    }
    emit_report(&report.violations)?;
    if report.is_valid() {
        Ok(ExitStatus::Success)
    } else {
        eprintln!("{}: {} error(s)", file.display(), report.error_count());
        Ok(ExitStatus::Validation)
    }
}

fn cmd_ingest(root: &Path, files: &[PathBuf]) -> Result<ExitStatus> {
    let mut store = ScenarioStore::open_or_create(root)?;
    let mut status = ExitStatus::Success;
    for file in files {
        let outcome = read(file).and_then(|b| store.ingest(&b).map_err(CliError::from));
        match outcome {
            Ok(id) => emit(&json!({ "file": file, "id": id }))?,
            Err(e) => {
                eprintln!("{}: {e}", file.display());
                let violations = e.report.map(|r| r.violations).unwrap_or_default();
                emit(&json!({ "file": file, "error": e.message, "violations": violations }))?;
                // The first failure decides the exit code.
                if status == ExitStatus::Success {
                    status = e.status;
                }
            }
        }
    }
    Ok(status)
}

fn cmd_metrics(root: &Path, id: &str, horizon: f64, persist: bool) -> Result<ExitStatus> {
    let mut store = ScenarioStore::open(root)?;
    let annotated = annotate_scenario(&store.fetch(id)?, horizon)?;
    let bytes = openlabel::serialize(&annotated).map_err(|e| CliError::new(ExitStatus::Computation, e.to_string()))?;
    if persist {
        store.update(&annotated)?;
    }
    std::io::stdout()
        .write_all(&bytes)
        .map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
    Ok(ExitStatus::Success)
}

fn cmd_query(root: &Path, filter: &QueryFilter) -> Result<ExitStatus> {
    let store = ScenarioStore::open(root)?;
    for (id, meta) in store.query(filter) {
        let metadata = metadata_to_value(&meta).map_err(|e| CliError::new(ExitStatus::Computation, e.to_string()))?;
        emit(&json!({ "id": id, "metadata": metadata }))?;
    }
    Ok(ExitStatus::Success)
}

fn cmd_simulate(config: &Path, out: &Path, params: Option<&Path>, id: Option<String>) -> Result<ExitStatus> {
    let cfg: SimConfig = read_json(config)?;
    let params = load_params(params)?;
    let trace = simulate(&cfg, &params)?;
    let id = id.unwrap_or_else(|| format!("sim-{}", cfg.seed));
    let scenario = trace_to_scenario(&trace, &id);
    let bytes = openlabel::serialize(&scenario).map_err(|e| CliError::new(ExitStatus::Computation, e.to_string()))?;
    write(out, &bytes)?;
    if !trace.collisions.is_empty() {
        eprintln!("warning: {} collision(s) in the simulated trace", trace.collisions.len());
    }
    emit(&json!({
        "scenario_id": id,
        "out": out,
        "frames": scenario.frames.len(),
        "participants": scenario.participants.len(),
        "lane_changes": trace.lane_changes.len(),
        "collisions": trace.collisions.len(),
    }))?;
    Ok(ExitStatus::Success)
}

fn load_recorded(data: &str, store: Option<&Path>) -> Result<Recorded> {
    let path = Path::new(data);
    if path.is_file() {
        let bytes = read(path)?;
        if let Ok(sample) = serde_json::from_slice::<Vec<f64>>(&bytes) {
            return Ok(Recorded::Sample(sample));
        }
        return openlabel::parse(&bytes)
            .map(Recorded::Scenario)
            .map_err(|e| CliError::validation(format!("{data}: {e}"), e.report()));
    }
    match store {
        Some(root) => Ok(Recorded::Scenario(ScenarioStore::open(root)?.fetch(data)?)),
        None => Err(CliError::usage(format!(
            "'{data}' is not a file; pass --store to read a stored scenario"
        ))),
    }
}

fn cmd_calibrate(spec: &Path, data: &str, out: &Path, store: Option<&Path>, params: Option<&Path>) -> Result<ExitStatus> {
    let spec: ObjectiveSpec = read_json(spec)?;
    let params0 = load_params(params)?;
    let recorded = load_recorded(data, store)?;
    let result = calibrate(&spec, &recorded, &params0)?;
    let mut value = serde_json::to_value(&result).map_err(|e| CliError::new(ExitStatus::Computation, e.to_string()))?;
    value["params"] = json!(result.params());
    let bytes = openlabel::to_canonical(&value).map_err(|e| CliError::new(ExitStatus::Computation, e.to_string()))?;
    write(out, &bytes)?;
    if !result.converged {
        eprintln!("warning: evaluation budget exhausted before convergence");
    }
    emit(&value)?;
    Ok(ExitStatus::Success)
}

#[derive(Serialize)]
struct SampleRow {
    index: usize,
    cut_in_gap: f64,
    approach_speed_delta: f64,
    a_req: f64,
    crashed: bool,
    min_gap: f64,
    min_ttc: Option<f64>,
}

fn cmd_sample(spec: &Path, root: &Path, report: &Path, threshold: Option<f64>) -> Result<ExitStatus> {
    let spec: VariationSpec = read_json(spec)?;
    if threshold.is_some_and(f64::is_nan) {
        return Err(CliError::usage("threshold must be a number"));
    }
    let mut store = ScenarioStore::open(root)?;
    let base = store.fetch(&spec.base_scenario_id)?;
    let sw = sweep(&spec, &base)?;

    let csv_err = |e: csv::Error| CliError::io(report, e);
    let mut w = csv::Writer::from_path(report).map_err(csv_err)?;
    for (index, o) in sw.outcomes.iter().enumerate() {
        w.serialize(SampleRow {
            index,
            cut_in_gap: o.cut_in_gap,
            approach_speed_delta: o.approach_speed_delta,
            a_req: o.a_req,
            crashed: o.crashed,
            min_gap: o.min_gap,
            min_ttc: o.min_ttc,
        })
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::io(report, e))?;

    // Re-running a sweep replaces the samples it emitted before.
    let mut emitted = Vec::new();
    for (_, s) in emit_samples(&sw, threshold.unwrap_or(f64::INFINITY)) {
        if store.contains(&s.scenario_id) {
            store.update(&s)?;
        } else {
            let bytes = openlabel::serialize(&s).map_err(|e| CliError::new(ExitStatus::Computation, e.to_string()))?;
            store.ingest(&bytes)?;
        }
        emitted.push(s.scenario_id);
    }
    let crashes = sw.outcomes.iter().filter(|o| o.crashed).count();
    eprintln!("{} variations, {crashes} crash(es), {} emitted", sw.outcomes.len(), emitted.len());
    emit(&json!({
        "base_scenario_id": sw.base_scenario_id,
        "event_id": sw.start.event_id,
        "cutter": sw.start.cutter,
        "approacher": sw.start.approacher,
        "recorded_cut_in_gap": sw.start.cut_in_gap,
        "recorded_approach_speed_delta": sw.start.approach_speed_delta,
        "approacher_max_decel": sw.approacher_max_decel,
        "variations": sw.outcomes.len(),
        "crashes": crashes,
        "emitted": emitted,
    }))?;
    Ok(ExitStatus::Success)
}

fn cmd_reindex(root: &Path) -> Result<ExitStatus> {
    let mut store = ScenarioStore::open(root)?;
    let (index, skipped) = store.reindex()?;
    for s in &skipped {
        eprintln!("skipped {}: {}", s.path.display(), s.reason);
    }
    let skipped: Vec<_> = skipped
        .iter()
        .map(|s| json!({ "path": s.path.strip_prefix(root).unwrap_or(&s.path), "reason": s.reason }))
        .collect();
    emit(&json!({ "entries": index.entries.len(), "skipped": skipped }))?;
    Ok(ExitStatus::Success)
}

fn run(cli: Cli) -> Result<ExitStatus> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::new(ExitStatus::Computation, e.to_string()))?;
    }
    match cli.command {
        Command::Validate { file } => cmd_validate(&file),
        Command::Ingest { store, files } => cmd_ingest(&store, &files),
        Command::Metrics {
            store,
            id,
            horizon,
            write,
        } => cmd_metrics(&store, &id, horizon, write),
        Command::Query {
            store,
            area,
            method,
            origin,
            event,
            duration,
            range,
            text,
        } => {
            let filter = QueryFilter {
                areas: area.into_iter().collect(),
                acquisition_methods: method.into_iter().collect(),
                origins: origin.into_iter().collect(),
                event_types: event.into_iter().collect(),
                duration,
                ranges: range,
                text,
            };
            cmd_query(&store, &filter)
        }
        Command::Simulate { config, out, params, id } => cmd_simulate(&config, &out, params.as_deref(), id),
        Command::Calibrate {
            spec,
            data,
            out,
            store,
            params,
        } => cmd_calibrate(&spec, &data, &out, store.as_deref(), params.as_deref()),
        Command::Sample {
            spec,
            store,
            report,
            threshold,
        } => cmd_sample(&spec, &store, &report, threshold),
        Command::Reindex { store } => cmd_reindex(&store),
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors and 0 for --help.
    let cli = Cli::parse();
    match run(cli) {
        Ok(status) => ExitCode::from(status.code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            if let Some(report) = &e.report {
                if emit_report(&report.violations).is_err() {
                    eprintln!("error: could not print the violation report");
                }
            }
            ExitCode::from(e.status.code() as u8)
        }
    }
}
