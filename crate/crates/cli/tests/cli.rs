//! Behavior of the `skyhaul` binary: exit codes, artifact layout, and the
//! file formats downstream tooling parses.

use std::path::PathBuf;
use std::process::{Command, Output};

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_skyhaul"))
}

/// Self-cleaning temp directory, one per test.
struct Workspace {
    dir: PathBuf,
}

impl Workspace {
    fn new(tag: &str) -> Workspace {
        let dir = std::env::temp_dir().join(format!("skyhaul-cli-{tag}-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).expect("temp dir is writable");
        Workspace { dir }
    }

    fn config(&self, text: &str) -> PathBuf {
        let path = self.dir.join("scenario.toml");
        std::fs::write(&path, text).expect("config is writable");
        path
    }

    fn out(&self) -> PathBuf {
        self.dir.join("out")
    }
}

impl Drop for Workspace {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.dir);
    }
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn read(path: PathBuf) -> String {
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("cannot read {path:?}: {e}"))
}

// ---------------------------------------------------------------------------
// Exit codes: configuration problems are code 2 and name the offending field.

#[test]
fn missing_config_file_is_a_config_error() {
    let output = binary()
        .args(["run", "/nonexistent/skyhaul.toml"])
        .output()
        .expect("binary runs");
    assert_eq!(output.status.code(), Some(2), "{}", stderr_of(&output));
    assert!(stderr_of(&output).contains("error:"));
}

#[test]
fn too_few_carriers_is_a_config_error() {
    let ws = Workspace::new("few-carriers");
    let config = ws.config("[carriers]\ncount = 2\n");
    let output = binary()
        .args(["run"])
        .arg(&config)
        .args(["--out"])
        .arg(ws.out())
        .output()
        .expect("binary runs");
    assert_eq!(output.status.code(), Some(2));
    let err = stderr_of(&output);
    assert!(
        err.contains("carrier") && err.contains('3'),
        "error should explain the minimum carrier count, got: {err}"
    );
}

#[test]
fn unknown_keys_are_named_in_the_error() {
    let ws = Workspace::new("unknown-key");
    let config = ws.config("[load]\nmas = 1.5\n");
    let output = binary()
        .args(["run"])
        .arg(&config)
        .args(["--out"])
        .arg(ws.out())
        .output()
        .expect("binary runs");
    assert_eq!(output.status.code(), Some(2));
    assert!(
        stderr_of(&output).contains("mas"),
        "error should quote the misspelled key, got: {}",
        stderr_of(&output)
    );
}

#[test]
fn malformed_overrides_are_config_errors() {
    let ws = Workspace::new("bad-override");
    let config = ws.config("");
    for (flag, needle) in [
        ("timing.duration", "="),         // no assignment
        ("cables.turbo=1", "turbo"),      // unknown key
        ("timing.duration=fast", "dura"), // unparseable value for a float field
    ] {
        let output = binary()
            .args(["run"])
            .arg(&config)
            .args(["--out"])
            .arg(ws.out())
            .args(["--override", flag])
            .output()
            .expect("binary runs");
        assert_eq!(
            output.status.code(),
            Some(2),
            "override {flag:?} should be rejected"
        );
        assert!(
            stderr_of(&output).contains(needle),
            "override {flag:?}: error should mention {needle:?}, got: {}",
            stderr_of(&output)
        );
    }
}

#[test]
fn invalid_values_fail_validation_with_the_field_name() {
    let ws = Workspace::new("bad-value");
    let config = ws.config("");
    let output = binary()
        .args(["run"])
        .arg(&config)
        .args(["--out"])
        .arg(ws.out())
        .args(["--override", "cables.stiffness=-50.0"])
        .output()
        .expect("binary runs");
    assert_eq!(output.status.code(), Some(2));
    assert!(
        stderr_of(&output).contains("stiffness"),
        "got: {}",
        stderr_of(&output)
    );
}

// ---------------------------------------------------------------------------
// Successful runs: artifact set, trace format, summary schema.

#[test]
fn run_writes_the_full_artifact_set() {
    let ws = Workspace::new("artifacts");
    let config = ws.config("");
    let output = binary()
        .args(["run"])
        .arg(&config)
        .args(["--out"])
        .arg(ws.out())
        .args(["--override", "timing.duration=0.5"])
        .output()
        .expect("binary runs");
    assert_eq!(output.status.code(), Some(0), "{}", stderr_of(&output));

    for name in ["trace.csv", "summary.json", "scenario.toml"] {
        assert!(ws.out().join(name).is_file(), "{name} is missing");
    }
    for name in [
        "desired_trajectory.csv",
        "tracking_errors.csv",
        "carrier_paths.csv",
        "carrier_speeds.csv",
        "tensions.csv",
    ] {
        assert!(
            ws.out().join("plotdata").join(name).is_file(),
            "plotdata/{name} is missing"
        );
    }

    // The effective scenario records the override.
    let scenario = read(ws.out().join("scenario.toml"));
    assert!(scenario.contains("duration = 0.5"), "got: {scenario}");

    // 0.5 s at a 5 ms control period = 101 sampled ticks plus the header.
    let trace = read(ws.out().join("trace.csv"));
    assert_eq!(trace.lines().count(), 102);
}

/// Every float in the trace uses the fixed `d.dddddddde[-]d+` rendering; this
/// is what makes byte-comparison of replayed traces meaningful.
fn is_trace_float(field: &str) -> bool {
    let rest = field.strip_prefix('-').unwrap_or(field);
    let Some((mantissa, exponent)) = rest.split_once('e') else {
        return false;
    };
    let Some((int, frac)) = mantissa.split_once('.') else {
        return false;
    };
    let digits = |s: &str| !s.is_empty() && s.chars().all(|c| c.is_ascii_digit());
    int.len() == 1
        && digits(int)
        && frac.len() == 8
        && digits(frac)
        && digits(exponent.strip_prefix('-').unwrap_or(exponent))
}

#[test]
fn trace_layout_matches_the_documented_columns() {
    let ws = Workspace::new("trace-layout");
    let config = ws.config("");
    let output = binary()
        .args(["run"])
        .arg(&config)
        .args(["--out"])
        .arg(ws.out())
        .args(["--override", "timing.duration=0.1"])
        .output()
        .expect("binary runs");
    assert_eq!(output.status.code(), Some(0), "{}", stderr_of(&output));

    let trace = read(ws.out().join("trace.csv"));
    let mut lines = trace.lines();
    let mut expected_header = String::from(
        "time,ep_x,ep_y,ep_z,er_x,er_y,er_z,load_x,load_y,load_z,roll,pitch,yaw,\
         vel_x,vel_y,vel_z,omega_x,omega_y,omega_z,ref_x,ref_y,ref_z,\
         ref_vx,ref_vy,ref_vz,wrench_fx,wrench_fy,wrench_fz,wrench_tx,wrench_ty,wrench_tz,\
         xi,amplitude",
    );
    for i in 0..4 {
        expected_header.push_str(&format!(
            ",c{i}_x,c{i}_y,c{i}_z,c{i}_vx,c{i}_vy,c{i}_vz,c{i}_speed,c{i}_desired_speed,\
             c{i}_tension,c{i}_desired_tension,c{i}_margin"
        ));
    }
    let header = lines.next().expect("trace has a header");
    assert_eq!(header, expected_header);

    let columns = header.split(',').count();
    for (row_index, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(
            fields.len(),
            columns,
            "row {row_index} has {} fields, header has {columns}",
            fields.len()
        );
        for field in fields {
            assert!(
                is_trace_float(field),
                "row {row_index}: field {field:?} is not in trace float format"
            );
        }
    }
}

// ---------------------------------------------------------------------------
// summary.json obeys the shipped JSON schema (subset validator below).

fn json_type_name(value: &serde_json::Value) -> &'static str {
    match value {
        serde_json::Value::Null => "null",
        serde_json::Value::Bool(_) => "boolean",
        serde_json::Value::Number(n) if n.is_i64() || n.is_u64() => "integer",
        serde_json::Value::Number(_) => "number",
        serde_json::Value::String(_) => "string",
        serde_json::Value::Array(_) => "array",
        serde_json::Value::Object(_) => "object",
    }
}

/// Checks the subset of JSON Schema the shipped schema uses: `type` (single or
/// list, integer counts as number), `properties` + `required` +
/// `additionalProperties: false`, and `items` + `minItems`/`maxItems`.
fn check_schema(
    value: &serde_json::Value,
    schema: &serde_json::Value,
    path: &str,
    errors: &mut Vec<String>,
) {
    if let Some(expected) = schema.get("type") {
        let allowed: Vec<&str> = match expected {
            serde_json::Value::String(s) => vec![s.as_str()],
            serde_json::Value::Array(list) => list.iter().filter_map(|v| v.as_str()).collect(),
            _ => vec![],
        };
        let actual = json_type_name(value);
        let ok = allowed
            .iter()
            .any(|t| *t == actual || (*t == "number" && actual == "integer"));
        if !ok {
            errors.push(format!("{path}: type {actual} not allowed by {allowed:?}"));
        }
    }
    if let Some(object) = value.as_object() {
        let empty = serde_json::Map::new();
        let properties = schema
            .get("properties")
            .and_then(|p| p.as_object())
            .unwrap_or(&empty);
        for (key, subschema) in properties {
            if let Some(sub) = object.get(key) {
                check_schema(sub, subschema, &format!("{path}.{key}"), errors);
            }
        }
        if let Some(required) = schema.get("required").and_then(|r| r.as_array()) {
            for key in required.iter().filter_map(|k| k.as_str()) {
                if !object.contains_key(key) {
                    errors.push(format!("{path}: missing required property {key:?}"));
                }
            }
        }
        if schema.get("additionalProperties") == Some(&serde_json::Value::Bool(false)) {
            for key in object.keys() {
                if !properties.contains_key(key) {
                    errors.push(format!("{path}: property {key:?} not in the schema"));
                }
            }
        }
    }
    if let Some(array) = value.as_array() {
        if let Some(min) = schema.get("minItems").and_then(|m| m.as_u64()) {
            if (array.len() as u64) < min {
                errors.push(format!("{path}: {} items, minimum {min}", array.len()));
            }
        }
        if let Some(max) = schema.get("maxItems").and_then(|m| m.as_u64()) {
            if (array.len() as u64) > max {
                errors.push(format!("{path}: {} items, maximum {max}", array.len()));
            }
        }
        if let Some(items) = schema.get("items") {
            for (i, element) in array.iter().enumerate() {
                check_schema(element, items, &format!("{path}[{i}]"), errors);
            }
        }
    }
}

#[test]
fn summary_validates_against_the_shipped_schema() {
    let ws = Workspace::new("schema");
    let config = ws.config("");
    let output = binary()
        .args(["run"])
        .arg(&config)
        .args(["--out"])
        .arg(ws.out())
        .args(["--override", "timing.duration=0.5"])
        .output()
        .expect("binary runs");
    assert_eq!(output.status.code(), Some(0), "{}", stderr_of(&output));

    let summary: serde_json::Value =
        serde_json::from_str(&read(ws.out().join("summary.json"))).expect("summary parses");
    let schema_path =
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs/summary.schema.json");
    let schema: serde_json::Value =
        serde_json::from_str(&read(schema_path)).expect("schema parses");

    let mut errors = Vec::new();
    check_schema(&summary, &schema, "summary", &mut errors);
    assert!(
        errors.is_empty(),
        "schema violations:\n{}",
        errors.join("\n")
    );

    // Spot checks on values the schema cannot express.
    assert_eq!(summary["scenario"]["carriers"], 4);
    assert_eq!(summary["outcome"]["complete"], true);
    assert_eq!(summary["metrics"]["rows"], 101);
}

// ---------------------------------------------------------------------------
// Output root selection and seed checking.

#[test]
fn environment_variable_sets_the_output_root() {
    let ws = Workspace::new("env-root");
    let config = ws.config("");
    let root = ws.dir.join("env-selected");
    let output = binary()
        .env("SKYHAUL_OUT", &root)
        .args(["run"])
        .arg(&config)
        .args(["--override", "timing.duration=0.1"])
        .output()
        .expect("binary runs");
    assert_eq!(output.status.code(), Some(0), "{}", stderr_of(&output));
    assert!(root.join("trace.csv").is_file());
    assert!(root.join("summary.json").is_file());
}

#[test]
fn seed_check_confirms_replays() {
    let ws = Workspace::new("seed-check");
    let config = ws.config("");
    let output = binary()
        .args(["run"])
        .arg(&config)
        .args(["--out"])
        .arg(ws.out())
        .args(["--seed-check", "--override", "timing.duration=0.5"])
        .output()
        .expect("binary runs");
    assert_eq!(output.status.code(), Some(0), "{}", stderr_of(&output));
    assert!(
        stdout_of(&output).contains("byte-identical"),
        "got: {}",
        stdout_of(&output)
    );
}

// ---------------------------------------------------------------------------
// The compare subcommand.

#[test]
fn compare_writes_both_runs_and_the_comparison() {
    let ws = Workspace::new("compare");
    let config = ws.config("");
    let output = binary()
        .args(["compare"])
        .arg(&config)
        .args(["--out"])
        .arg(ws.out())
        .args(["--override", "timing.duration=1.0"])
        .output()
        .expect("binary runs");
    assert_eq!(output.status.code(), Some(0), "{}", stderr_of(&output));

    for side in ["optimized", "baseline"] {
        for name in ["trace.csv", "summary.json", "scenario.toml"] {
            assert!(
                ws.out().join(side).join(name).is_file(),
                "{side}/{name} is missing"
            );
        }
    }
    let comparison: serde_json::Value =
        serde_json::from_str(&read(ws.out().join("comparison.json"))).expect("comparison parses");
    assert_eq!(comparison["optimized"]["rows"], 201);
    assert_eq!(comparison["baseline"]["rows"], 201);
    assert!(comparison["epsilon"].is_number());
    assert!(comparison["optimizer_prevents_stagnation"].is_boolean());
    assert!(
        stdout_of(&output).contains("optimizer prevents stagnation"),
        "got: {}",
        stdout_of(&output)
    );
}
