//! Command-line front end: scenario loading, key-path overrides, trace and
//! summary serialization, and the run/compare drivers.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use skyhaul_core::scenario::ScenarioConfig;
use skyhaul_core::sim::{run_closed_loop, SimRun, SimTrace};
use skyhaul_core::CoreError;
use thiserror::Error;

/// Environment variable naming the default output root (`--out` wins).
pub const OUT_ENV: &str = "SKYHAUL_OUT";

#[derive(Debug, Error)]
pub enum CliError {
    /// Anything wrong with the scenario before it runs: unreadable file,
    /// syntax errors, unknown keys, violated preconditions, bad overrides.
    #[error("configuration: {0}")]
    Config(String),
    /// The simulation started but had to stop, or an output could not be
    /// written.
    #[error("runtime: {0}")]
    Runtime(String),
    /// The optimizer exhausted its configured fallback budget.
    #[error("fallback budget: {0}")]
    Budget(String),
}

impl CliError {
    /// Process exit code: configuration 2, runtime 3, exhausted budget 4.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
            CliError::Budget(_) => 4,
        }
    }
}

fn config_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Config(e.to_string())
}

fn io_err(what: &str, path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{what} {}: {e}", path.display()))
}

/// Loads a scenario from TOML. An empty (or whitespace-only) file is the
/// reference scenario; syntax and unknown-key errors carry the location the
/// parser reports.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

/// Parses scenario TOML; empty input yields the reference scenario.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, CliError> {
    if text.trim().is_empty() {
        return Ok(ScenarioConfig::default());
    }
    toml::from_str(text).map_err(config_err)
}

/// Applies `key.path=value` overrides on top of a parsed scenario.
///
/// The left side is a dotted path into the TOML tree (`optimizer.enabled`,
/// `timing.duration`); the right side is parsed as a TOML value, so strings,
/// numbers, booleans, arrays and inline tables all work. Unknown keys are
/// rejected when the patched tree is decoded back into the scenario type.
pub fn apply_overrides(
    config: &ScenarioConfig,
    overrides: &[String],
) -> Result<ScenarioConfig, CliError> {
    if overrides.is_empty() {
        return Ok(config.clone());
    }
    let mut tree = toml::Value::try_from(config).map_err(config_err)?;
    for entry in overrides {
        let (path, raw_value) = entry.split_once('=').ok_or_else(|| {
            CliError::Config(format!(
                "override '{entry}' is not of the form key.path=value"
            ))
        })?;
        let path = path.trim();
        if path.is_empty() {
            return Err(CliError::Config(format!(
                "override '{entry}' has an empty key"
            )));
        }
        let value: toml::Value = toml::from_str(&format!("v = {}", raw_value.trim()))
            .map(|t: toml::Table| t["v"].clone())
            .or_else(|_| {
                // Bare words read as strings: --override trajectory.kind=hold.
                toml::from_str(&format!("v = \"{}\"", raw_value.trim()))
                    .map(|t: toml::Table| t["v"].clone())
            })
            .map_err(|e| CliError::Config(format!("override '{entry}': bad value: {e}")))?;

        let segments: Vec<&str> = path.split('.').collect();
        insert_at(&mut tree, &segments, 0, value, entry)?;
    }
    tree.try_into().map_err(config_err)
}

/// Descends `segments[depth..]` through TOML tables (creating them as
/// needed) and stores `value` at the leaf.
fn insert_at(
    node: &mut toml::Value,
    segments: &[&str],
    depth: usize,
    value: toml::Value,
    entry: &str,
) -> Result<(), CliError> {
    let table = node.as_table_mut().ok_or_else(|| {
        CliError::Config(format!(
            "override '{entry}': '{}' is not a table",
            segments[..depth].join(".")
        ))
    })?;
    let segment = segments[depth].to_string();
    if depth + 1 == segments.len() {
        table.insert(segment, value);
        Ok(())
    } else {
        let child = table
            .entry(segment)
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        insert_at(child, segments, depth + 1, value, entry)
    }
}

/// Scalar summary of one run, computed from the trace.
#[derive(Debug, Clone, Serialize)]
pub struct Metrics {
    pub rows: usize,
    pub mean_position_error: f64,
    pub max_position_error: f64,
    pub final_position_error: f64,
    pub mean_attitude_error: f64,
    pub max_attitude_error: f64,
    /// Smallest commanded carrier speed across all carriers and ticks.
    pub min_desired_speed: f64,
    pub min_desired_speed_carrier: usize,
    pub min_desired_speed_time: f64,
    pub min_realized_speed: f64,
    pub min_realized_tension: f64,
    pub max_realized_tension: f64,
    pub frequency_range: [f64; 2],
    pub amplitude_range: [f64; 2],
    pub optimizer_invocations: u64,
    pub fallback_count: u64,
    pub wall_seconds: f64,
}

impl Metrics {
    pub fn from_run(run: &SimRun, wall_seconds: f64) -> Metrics {
        let rows = &run.trace.rows;
        let count = rows.len().max(1) as f64;
        let mut m = Metrics {
            rows: rows.len(),
            mean_position_error: 0.0,
            max_position_error: 0.0,
            final_position_error: rows.last().map_or(0.0, |r| r.position_error.norm()),
            mean_attitude_error: 0.0,
            max_attitude_error: 0.0,
            min_desired_speed: f64::INFINITY,
            min_desired_speed_carrier: 0,
            min_desired_speed_time: 0.0,
            min_realized_speed: f64::INFINITY,
            min_realized_tension: f64::INFINITY,
            max_realized_tension: f64::NEG_INFINITY,
            frequency_range: [f64::INFINITY, f64::NEG_INFINITY],
            amplitude_range: [f64::INFINITY, f64::NEG_INFINITY],
            optimizer_invocations: run.stats.optimizer_invocations,
            fallback_count: run.stats.fallback_count,
            wall_seconds,
        };
        for row in rows {
            let ep = row.position_error.norm();
            let er = row.attitude_error.norm();
            m.mean_position_error += ep / count;
            m.max_position_error = m.max_position_error.max(ep);
            m.mean_attitude_error += er / count;
            m.max_attitude_error = m.max_attitude_error.max(er);
            m.frequency_range = [
                m.frequency_range[0].min(row.frequency),
                m.frequency_range[1].max(row.frequency),
            ];
            m.amplitude_range = [
                m.amplitude_range[0].min(row.amplitude),
                m.amplitude_range[1].max(row.amplitude),
            ];
            for (i, carrier) in row.carriers.iter().enumerate() {
                if carrier.desired_speed < m.min_desired_speed {
                    m.min_desired_speed = carrier.desired_speed;
                    m.min_desired_speed_carrier = i;
                    m.min_desired_speed_time = row.time;
                }
                m.min_realized_speed = m.min_realized_speed.min(carrier.speed);
                m.min_realized_tension = m.min_realized_tension.min(carrier.tension);
                m.max_realized_tension = m.max_realized_tension.max(carrier.tension);
            }
        }
        m
    }
}

/// Everything `summary.json` carries.
#[derive(Debug, Serialize)]
pub struct Summary {
    pub scenario: ScenarioSummary,
    pub outcome: Outcome,
    pub metrics: Metrics,
}

#[derive(Debug, Serialize)]
pub struct ScenarioSummary {
    pub carriers: usize,
    pub optimizer_enabled: bool,
    pub epsilon: f64,
    pub duration: f64,
    pub control_dt: f64,
    pub physics_dt: f64,
}

#[derive(Debug, Serialize)]
pub struct Outcome {
    pub complete: bool,
    pub failure: Option<String>,
}

impl Summary {
    pub fn new(config: &ScenarioConfig, run: &SimRun, wall_seconds: f64) -> Summary {
        Summary {
            scenario: ScenarioSummary {
                carriers: config.carriers.count,
                optimizer_enabled: config.optimizer.enabled,
                epsilon: config.optimizer.epsilon,
                duration: config.timing.duration,
                control_dt: config.timing.control_dt,
                physics_dt: config.timing.physics_dt,
            },
            outcome: Outcome {
                complete: run.is_complete(),
                failure: run.failure.as_ref().map(|e| e.to_string()),
            },
            metrics: Metrics::from_run(run, wall_seconds),
        }
    }
}

fn push_float(line: &mut String, value: f64) {
    if !line.is_empty() {
        line.push(',');
    }
    write!(line, "{value:.8e}").expect("formatting into a String cannot fail");
}

/// Renders the full trace as CSV text. One row per control tick; floats carry
/// nine significant digits, so re-rendering a replayed run is byte-identical
/// exactly when the runs are.
pub fn render_trace_csv(trace: &SimTrace) -> String {
    let n = trace.n();
    let mut header = String::from(
        "time,ep_x,ep_y,ep_z,er_x,er_y,er_z,load_x,load_y,load_z,roll,pitch,yaw,\
         vel_x,vel_y,vel_z,omega_x,omega_y,omega_z,ref_x,ref_y,ref_z,\
         ref_vx,ref_vy,ref_vz,wrench_fx,wrench_fy,wrench_fz,wrench_tx,wrench_ty,wrench_tz,\
         xi,amplitude",
    );
    for i in 0..n {
        write!(
            header,
            ",c{i}_x,c{i}_y,c{i}_z,c{i}_vx,c{i}_vy,c{i}_vz,c{i}_speed,c{i}_desired_speed,\
             c{i}_tension,c{i}_desired_tension,c{i}_margin"
        )
        .expect("formatting into a String cannot fail");
    }
    let mut out = header;
    out.push('\n');
    for row in &trace.rows {
        let mut line = String::new();
        push_float(&mut line, row.time);
        for v in [
            row.position_error,
            row.attitude_error,
            row.load_position,
            row.load_rpy,
            row.load_velocity,
            row.load_angular_velocity,
            row.desired_position,
            row.desired_velocity,
        ] {
            for e in v.iter() {
                push_float(&mut line, *e);
            }
        }
        for e in row.wrench.iter() {
            push_float(&mut line, *e);
        }
        push_float(&mut line, row.frequency);
        push_float(&mut line, row.amplitude);
        for carrier in &row.carriers {
            for e in carrier.position.iter() {
                push_float(&mut line, *e);
            }
            for e in carrier.velocity.iter() {
                push_float(&mut line, *e);
            }
            push_float(&mut line, carrier.speed);
            push_float(&mut line, carrier.desired_speed);
            push_float(&mut line, carrier.tension);
            push_float(&mut line, carrier.desired_tension);
            push_float(&mut line, carrier.margin);
        }
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Column-oriented extracts sized for plotting, one file per figure family.
fn render_plotdata(trace: &SimTrace) -> Vec<(&'static str, String)> {
    let n = trace.n();
    let mut trajectory = String::from("time,ref_x,ref_y,ref_z,ref_vx,ref_vy,ref_vz\n");
    let mut errors = String::from("time,position_error,attitude_error,xi,amplitude\n");
    let mut paths = {
        let mut h = String::from("time");
        for i in 0..n {
            write!(h, ",c{i}_x,c{i}_y,c{i}_z").expect("string write");
        }
        h.push('\n');
        h
    };
    let mut speeds = {
        let mut h = String::from("time");
        for i in 0..n {
            write!(h, ",c{i}_speed,c{i}_desired_speed,c{i}_margin").expect("string write");
        }
        h.push('\n');
        h
    };
    let mut tensions = {
        let mut h = String::from("time");
        for i in 0..n {
            write!(h, ",c{i}_tension,c{i}_desired_tension").expect("string write");
        }
        h.push('\n');
        h
    };
    for row in &trace.rows {
        let mut t_line = String::new();
        push_float(&mut t_line, row.time);
        let time = t_line.clone();

        for v in [row.desired_position, row.desired_velocity] {
            for e in v.iter() {
                push_float(&mut t_line, *e);
            }
        }
        trajectory.push_str(&t_line);
        trajectory.push('\n');

        let mut e_line = time.clone();
        push_float(&mut e_line, row.position_error.norm());
        push_float(&mut e_line, row.attitude_error.norm());
        push_float(&mut e_line, row.frequency);
        push_float(&mut e_line, row.amplitude);
        errors.push_str(&e_line);
        errors.push('\n');

        let mut p_line = time.clone();
        let mut s_line = time.clone();
        let mut n_line = time.clone();
        for carrier in &row.carriers {
            for e in carrier.position.iter() {
                push_float(&mut p_line, *e);
            }
            push_float(&mut s_line, carrier.speed);
            push_float(&mut s_line, carrier.desired_speed);
            push_float(&mut s_line, carrier.margin);
            push_float(&mut n_line, carrier.tension);
            push_float(&mut n_line, carrier.desired_tension);
        }
        paths.push_str(&p_line);
        paths.push('\n');
        speeds.push_str(&s_line);
        speeds.push('\n');
        tensions.push_str(&n_line);
        tensions.push('\n');
    }
    vec![
        ("desired_trajectory.csv", trajectory),
        ("tracking_errors.csv", errors),
        ("carrier_paths.csv", paths),
        ("carrier_speeds.csv", speeds),
        ("tensions.csv", tensions),
    ]
}

/// Result of one `run` invocation.
pub struct RunArtifacts {
    pub run: SimRun,
    pub summary: Summary,
    pub out_dir: PathBuf,
}

/// Converts a completed-or-failed run into the caller-facing error, keeping
/// the budget case distinguishable.
fn failure_to_error(failure: &CoreError) -> CliError {
    match failure {
        CoreError::FallbackBudgetExceeded { .. } => CliError::Budget(failure.to_string()),
        other => CliError::Runtime(other.to_string()),
    }
}

/// Runs one scenario and writes trace, summary, plot extracts, and the
/// effective scenario into `out_dir`.
///
/// `seed_check` replays the scenario and byte-compares the rendered traces
/// before anything is written; any divergence is a runtime error.
pub fn run_scenario(
    config: &ScenarioConfig,
    out_dir: &Path,
    seed_check: bool,
) -> Result<RunArtifacts, CliError> {
    config.validate().map_err(config_err)?;
    let started = Instant::now();
    let run = run_closed_loop(config).map_err(config_err)?;
    let wall = started.elapsed().as_secs_f64();
    let trace_csv = render_trace_csv(&run.trace);

    if seed_check {
        let replay = run_closed_loop(config).map_err(config_err)?;
        let replay_csv = render_trace_csv(&replay.trace);
        if replay_csv != trace_csv {
            return Err(CliError::Runtime(
                "seed check failed: replayed trace differs from the first run".into(),
            ));
        }
    }

    fs::create_dir_all(out_dir).map_err(|e| io_err("cannot create", out_dir, e))?;
    let write = |name: &str, contents: &str| -> Result<(), CliError> {
        let path = out_dir.join(name);
        fs::write(&path, contents).map_err(|e| io_err("cannot write", &path, e))
    };
    write("trace.csv", &trace_csv)?;
    let summary = Summary::new(config, &run, wall);
    let summary_json =
        serde_json::to_string_pretty(&summary).map_err(|e| CliError::Runtime(e.to_string()))?;
    write("summary.json", &summary_json)?;
    let scenario_toml =
        toml::to_string_pretty(config).map_err(|e| CliError::Runtime(e.to_string()))?;
    write("scenario.toml", &scenario_toml)?;

    let plot_dir = out_dir.join("plotdata");
    fs::create_dir_all(&plot_dir).map_err(|e| io_err("cannot create", &plot_dir, e))?;
    for (name, contents) in render_plotdata(&run.trace) {
        let path = plot_dir.join(name);
        fs::write(&path, contents).map_err(|e| io_err("cannot write", &path, e))?;
    }

    if let Some(failure) = &run.failure {
        return Err(failure_to_error(failure));
    }
    Ok(RunArtifacts {
        summary,
        run,
        out_dir: out_dir.to_path_buf(),
    })
}

/// Side-by-side comparison written by `compare`.
#[derive(Debug, Serialize)]
pub struct Comparison {
    pub optimized: Metrics,
    pub baseline: Metrics,
    /// Smallest commanded speed stays above this only in the optimized run.
    pub epsilon: f64,
    /// True when the baseline stagnates (some carrier's commanded speed
    /// collapses) while the optimized run keeps every carrier moving.
    pub optimizer_prevents_stagnation: bool,
}

/// Runs the scenario twice — optimizer on and off — and writes both runs plus
/// `comparison.json` under `out_dir`.
pub fn compare_scenarios(config: &ScenarioConfig, out_dir: &Path) -> Result<Comparison, CliError> {
    let mut optimized_config = config.clone();
    optimized_config.optimizer.enabled = true;
    let mut baseline_config = config.clone();
    baseline_config.optimizer.enabled = false;

    let optimized = run_scenario(&optimized_config, &out_dir.join("optimized"), false)?;
    let baseline = run_scenario(&baseline_config, &out_dir.join("baseline"), false)?;

    let comparison = Comparison {
        optimizer_prevents_stagnation: optimized.summary.metrics.min_desired_speed
            > config.optimizer.epsilon * 0.5
            && baseline.summary.metrics.min_desired_speed
                < optimized.summary.metrics.min_desired_speed,
        epsilon: config.optimizer.epsilon,
        optimized: optimized.summary.metrics,
        baseline: baseline.summary.metrics,
    };
    let path = out_dir.join("comparison.json");
    let text =
        serde_json::to_string_pretty(&comparison).map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(&path, text).map_err(|e| io_err("cannot write", &path, e))?;
    Ok(comparison)
}
