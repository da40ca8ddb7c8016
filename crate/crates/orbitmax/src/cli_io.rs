//! Problem-file ingestion and the command surface behind the `orbitmax`
//! binary.
//!
//! Problems are small JSON documents:
//!
//! ```json
//! {
//!   "group": {"family": "SU", "n": 2},
//!   "F": [1.0, -1.0],
//!   "A": [0.0, 0.0],
//!   "epsilon": 1e-6
//! }
//! ```
//!
//! `F` labels the orbit; `A` is the target mean (needed by `solve` and
//! `membership`); `Y` is a dual vector (used by `integrate`, `gradient`,
//! and `validate`, defaulting to zero). Unknown fields are rejected so a
//! typo cannot silently change a run.
//!
//! Every command prints one JSON envelope carrying the command name, the
//! library version, an FNV-1a hash of the input bytes, and the result.
//! Floats are serialized with 17 significant digits, so outputs are
//! byte-stable across runs and reparse to the exact same values; map keys
//! are emitted in sorted order for the same reason.
//!
//! Failures print `CODE: message` on stderr and exit nonzero: 2 for
//! problem-definition errors, 3 for infeasible instances, 4 for numeric
//! overflow, 5 for I/O trouble.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::lie_core::{CartanVector, Family, GroupSpec};
use crate::solver::{self, ProblemInstance};
use crate::{hc_oracle, mc_validate};
use crate::{geometry, Error};

pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_MC_SAMPLES: usize = 100_000;

/// Commands accepted by [`run_command`].
pub const COMMANDS: [&str; 6] =
    ["solve", "integrate", "gradient", "membership", "validate", "sample-orbit"];

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GroupField {
    pub family: String,
    pub n: usize,
}

/// A parsed problem file with defaults applied.
#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub group: GroupField,
    #[serde(rename = "F")]
    pub f: Vec<f64>,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    #[serde(rename = "Y", default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}
fn default_mc_samples() -> usize {
    DEFAULT_MC_SAMPLES
}

/// A failure with its machine-readable code and process exit status.
#[derive(Clone, Debug)]
pub struct CliFailure {
    pub code: String,
    pub message: String,
    pub exit_code: i32,
}

impl CliFailure {
    fn new(code: &str, message: impl Into<String>, exit_code: i32) -> Self {
        CliFailure { code: code.to_string(), message: message.into(), exit_code }
    }
}

impl From<Error> for CliFailure {
    fn from(e: Error) -> Self {
        CliFailure { code: e.code().to_string(), message: e.to_string(), exit_code: e.exit_code() }
    }
}

impl std::fmt::Display for CliFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

/// Parse and validate a problem document (defaults applied; structure only —
/// family and coordinate checks happen when a command consumes the file).
pub fn parse_problem(text: &str) -> Result<ProblemFile, CliFailure> {
    serde_json::from_str(text).map_err(|e| {
        let msg = e.to_string();
        if msg.contains("unknown field") {
            CliFailure::new("UNKNOWN_FIELD", msg, 2)
        } else {
            CliFailure::new("MALFORMED_JSON", msg, 2)
        }
    })
}

/// Inverse of [`parse_problem`] (modulo defaults, which serialize
/// explicitly).
pub fn serialize_problem(p: &ProblemFile) -> String {
    serde_json::to_string(p).expect("problem files always serialize")
}

/// 64-bit FNV-1a of the raw input, as fixed-width hex.
pub fn input_hash(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

fn spec_of(p: &ProblemFile) -> Result<GroupSpec, CliFailure> {
    let family = match p.group.family.as_str() {
        "U" => Family::U,
        "SU" => Family::SU,
        "SOodd" => Family::SOodd,
        "SOeven" => Family::SOeven,
        "Oeven" => Family::Oeven,
        "USp" => Family::USp,
        other => {
            return Err(CliFailure::new(
                "UNKNOWN_FAMILY",
                format!("unknown group family {other:?} (expected U, SU, SOodd, SOeven, Oeven, or USp)"),
                2,
            ))
        }
    };
    Ok(GroupSpec::new(family, p.group.n)?)
}

fn coords(spec: &GroupSpec, raw: &[f64]) -> Result<CartanVector, CliFailure> {
    Ok(spec.cartan(raw.to_vec())?)
}

fn required<'v>(field: Option<&'v Vec<f64>>, name: &str, command: &str) -> Result<&'v Vec<f64>, CliFailure> {
    field.ok_or_else(|| {
        CliFailure::new("MISSING_FIELD", format!("command {command:?} requires field {name:?}"), 2)
    })
}

fn cartan_json(v: &CartanVector) -> Value {
    Value::from(v.coords().to_vec())
}

fn oracle_json(r: &hc_oracle::OracleResult) -> Value {
    json!({
        "log_value": r.log_value,
        "gradient": cartan_json(&r.gradient),
        "confluent": r.confluent,
        "condition_estimate": r.condition_estimate,
    })
}

fn result_value(command: &str, p: &ProblemFile) -> Result<Value, CliFailure> {
    let spec = spec_of(p)?;
    let f = coords(&spec, &p.f)?;
    let zero = vec![0.0; spec.coord_len()];
    match command {
        "integrate" | "gradient" => {
            let y = coords(&spec, p.y.as_ref().unwrap_or(&zero))?;
            let r = hc_oracle::log_integral(&spec, &f, &y)?;
            Ok(oracle_json(&r))
        }
        "membership" => {
            let a = coords(&spec, required(p.a.as_ref(), "A", command)?)?;
            let report = geometry::membership(&spec, &f, &a)?;
            let certificate = match &report.certificate {
                geometry::Certificate::Weights(w) => {
                    let entries: Vec<Value> =
                        w.iter().map(|&(i, x)| json!([i, x])).collect();
                    json!({"type": "weights", "weights": entries})
                }
                geometry::Certificate::Separator(c) => {
                    json!({"type": "separator", "vector": cartan_json(c)})
                }
            };
            Ok(json!({
                "status": report.status.as_str(),
                "margin": report.margin,
                "certificate": certificate,
            }))
        }
        "solve" => {
            let a = coords(&spec, required(p.a.as_ref(), "A", command)?)?;
            let inst = ProblemInstance::new(spec, f, a, p.eta, p.epsilon)?;
            let sol = solver::solve(&inst)?;
            let density = solver::density_report(&inst, &sol)?;
            Ok(json!({
                "y_opt": cartan_json(&sol.y_opt),
                "f_value": sol.f_value,
                "grad_norm": sol.grad_norm,
                "iterations": sol.iterations,
                "r_used": sol.r_used,
                "density": {
                    "log_partition": density.log_partition,
                    "mean": cartan_json(&density.mean),
                    "mean_deviation": density.mean_deviation,
                },
            }))
        }
        "validate" => {
            let y = coords(&spec, p.y.as_ref().unwrap_or(&zero))?;
            let analytic = hc_oracle::log_integral(&spec, &f, &y)?;
            let mc_value = mc_validate::mc_log_integral(&spec, &f, &y, p.mc_samples, p.seed)?;
            let mc_mean = mc_validate::mc_orbit_mean(&spec, &f, &y, p.mc_samples, p.seed)?;
            // 3σ with a hair of absolute slack for coordinates the sampler
            // reproduces exactly (pinned directions have zero variance).
            let slack = |scale: f64| 1e-12 * (1.0 + scale.abs());
            let value_pass = (analytic.log_value - mc_value.mean).abs()
                <= 3.0 * mc_value.stderr + slack(analytic.log_value);
            let mean_pass = (0..spec.coord_len()).all(|j| {
                let target = -analytic.gradient.coords()[j];
                (target - mc_mean.mean.coords()[j]).abs()
                    <= 3.0 * mc_mean.stderr[j] + slack(target)
            });
            Ok(json!({
                "analytic": oracle_json(&analytic),
                "monte_carlo": {
                    "log_mean": mc_value.mean,
                    "log_stderr": mc_value.stderr,
                    "orbit_mean": cartan_json(&mc_mean.mean),
                    "orbit_mean_stderr": Value::from(mc_mean.stderr.clone()),
                    "effective_samples": mc_mean.effective_samples,
                    "low_ess": mc_mean.low_ess,
                },
                "value_pass": value_pass,
                "mean_pass": mean_pass,
                "pass": value_pass && mean_pass,
                "n_samples": p.mc_samples,
                "seed": p.seed,
            }))
        }
        "sample-orbit" => {
            let projections =
                mc_validate::sample_orbit_projections(&spec, &f, p.mc_samples, p.seed)?;
            let rows: Vec<Value> = projections.iter().map(cartan_json).collect();
            Ok(json!({
                "projections": rows,
                "n_samples": p.mc_samples,
                "seed": p.seed,
            }))
        }
        other => Err(CliFailure::new(
            "BAD_COMMAND",
            format!("unknown command {other:?} (expected one of {COMMANDS:?})"),
            2,
        )),
    }
}

/// Run one command against a parsed problem, returning the rendered output
/// envelope. `raw_input` is hashed into the envelope for provenance.
pub fn run_command(
    command: &str,
    problem: &ProblemFile,
    raw_input: &str,
) -> Result<String, CliFailure> {
    let result = result_value(command, problem)?;
    let envelope = json!({
        "command": command,
        "library_version": env!("CARGO_PKG_VERSION"),
        "input_hash": input_hash(raw_input.as_bytes()),
        "result": result,
    });
    Ok(render_json(&envelope))
}

/// Serialize with 17-significant-digit floats (and sorted keys, which is
/// the map default): deterministic bytes, bit-faithful reparses.
pub fn render_json(value: &Value) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SciFormatter);
    value.serialize(&mut ser).expect("JSON values always serialize");
    String::from_utf8(out).expect("serializer emits UTF-8")
}

struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(text: &str) -> ProblemFile {
        parse_problem(text).expect("valid problem text")
    }

    #[test]
    fn defaults_are_applied_on_parse() {
        let p = problem(r#"{"group":{"family":"SU","n":2},"F":[1,-1],"A":[0,0]}"#);
        assert_eq!(p.epsilon, DEFAULT_EPSILON);
        assert_eq!(p.seed, DEFAULT_SEED);
        assert_eq!(p.mc_samples, DEFAULT_MC_SAMPLES);
        assert_eq!(p.a.as_deref(), Some([0.0, 0.0].as_slice()));
        assert!(p.y.is_none() && p.eta.is_none());
    }

    #[test]
    fn parse_failures_carry_distinct_codes() {
        let cases = [
            ("{not json", "MALFORMED_JSON"),
            (r#"{"group":{"family":"U","n":2},"F":[1,0],"extra":1}"#, "UNKNOWN_FIELD"),
            (r#"{"group":{"family":"U","n":2,"rank":2},"F":[1,0]}"#, "UNKNOWN_FIELD"),
            (r#"{"group":{"family":"U"},"F":[1,0]}"#, "MALFORMED_JSON"),
        ];
        for (text, code) in cases {
            let err = parse_problem(text).unwrap_err();
            assert_eq!(err.code, code, "for input {text}");
            assert_eq!(err.exit_code, 2);
        }
    }

    #[test]
    fn family_and_coordinate_failures_carry_module_codes() {
        let cases = [
            (r#"{"group":{"family":"SP","n":2},"F":[1,0]}"#, "UNKNOWN_FAMILY", 2),
            (r#"{"group":{"family":"SOeven","n":1},"F":[1]}"#, "DEGENERATE_FAMILY", 2),
            (r#"{"group":{"family":"U","n":2},"F":[1,0,3]}"#, "LENGTH_MISMATCH", 2),
            (r#"{"group":{"family":"SU","n":2},"F":[1,-0.5]}"#, "SU_SUM_NONZERO", 2),
        ];
        for (text, code, exit) in cases {
            let err = run_command("integrate", &problem(text), text).unwrap_err();
            assert_eq!(err.code, code, "for input {text}");
            assert_eq!(err.exit_code, exit, "for input {text}");
        }
    }

    #[test]
    fn command_dispatch_rejects_unknown_and_incomplete_requests() {
        let text = r#"{"group":{"family":"U","n":2},"F":[1,0]}"#;
        let err = run_command("optimize", &problem(text), text).unwrap_err();
        assert_eq!(err.code, "BAD_COMMAND");
        let err = run_command("solve", &problem(text), text).unwrap_err();
        assert_eq!(err.code, "MISSING_FIELD");
        let err = run_command("membership", &problem(text), text).unwrap_err();
        assert_eq!(err.code, "MISSING_FIELD");
    }

    #[test]
    fn parse_serialize_round_trip() {
        let mut state = 99u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for k in 0..100 {
            let n = 1 + k % 4;
            let f: Vec<f64> = (0..n).map(|_| 4.0 * next() - 2.0).collect();
            let p = ProblemFile {
                group: GroupField { family: "U".into(), n },
                f,
                a: if k % 2 == 0 { Some(vec![0.25; n]) } else { None },
                y: if k % 3 == 0 { Some(vec![next(); n]) } else { None },
                eta: if k % 5 == 0 { Some(next()) } else { None },
                epsilon: 10f64.powi(-((k % 8) as i32 + 1)),
                seed: k as u64,
                mc_samples: 1000 + k,
            };
            let round = problem(&serialize_problem(&p));
            assert_eq!(p, round, "round-trip changed the problem at k = {k}");
        }
    }

    #[test]
    fn integrate_envelope_is_stable_and_exact() {
        let text = r#"{"group":{"family":"U","n":1},"F":[2.0],"Y":[3.0]}"#;
        let p = problem(text);
        let out = run_command("integrate", &p, text).unwrap();
        // U(1): E(Y) = −y·f exactly, gradient −f, no cancellation.
        let expected_result = concat!(
            "\"result\":{",
            "\"condition_estimate\":0.0000000000000000e0,",
            "\"confluent\":false,",
            "\"gradient\":[-2.0000000000000000e0],",
            "\"log_value\":-6.0000000000000000e0}"
        );
        assert!(
            out.contains(expected_result),
            "envelope lacks the frozen result block:\n{out}"
        );
        assert!(out.contains(&format!("\"input_hash\":\"{}\"", input_hash(text.as_bytes()))));
        assert!(out.contains(&format!("\"library_version\":\"{}\"", env!("CARGO_PKG_VERSION"))));
        let again = run_command("integrate", &p, text).unwrap();
        assert_eq!(out, again, "same input must produce identical bytes");
        // The scientific format must reparse to the exact same values.
        let parsed: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(parsed["result"]["log_value"].as_f64(), Some(-6.0));
    }

    #[test]
    fn integrate_at_zero_y_prints_exact_zero() {
        let text = r#"{"group":{"family":"USp","n":2},"F":[0.4,1.3]}"#;
        let out = run_command("integrate", &problem(text), text).unwrap();
        assert!(
            out.contains("\"log_value\":0.0000000000000000e0"),
            "normalization must be bit-exact in the output:\n{out}"
        );
    }

    #[test]
    fn solve_output_solves_the_symmetric_instance() {
        let text = r#"{"group":{"family":"SU","n":2},"F":[1,-1],"A":[0,0]}"#;
        let out = run_command("solve", &problem(text), text).unwrap();
        let parsed: Value = serde_json::from_str(&out).unwrap();
        let y = parsed["result"]["y_opt"].as_array().unwrap();
        for c in y {
            assert!(c.as_f64().unwrap().abs() <= 1e-4);
        }
        assert!(parsed["result"]["f_value"].as_f64().unwrap() <= 1e-6);
        assert!(parsed["result"]["density"]["mean_deviation"].as_f64().unwrap() <= 1e-4);
    }

    #[test]
    fn membership_reports_both_certificate_shapes() {
        let interior = r#"{"group":{"family":"U","n":2},"F":[1,0],"A":[0.5,0.5]}"#;
        let out = run_command("membership", &problem(interior), interior).unwrap();
        let parsed: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(parsed["result"]["status"], "interior");
        assert_eq!(parsed["result"]["certificate"]["type"], "weights");
        let margin = parsed["result"]["margin"].as_f64().unwrap();
        assert!((margin - 0.5f64.sqrt()).abs() < 1e-9);

        let outside = r#"{"group":{"family":"U","n":2},"F":[1,0],"A":[1.2,-0.2]}"#;
        let out = run_command("membership", &problem(outside), outside).unwrap();
        let parsed: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(parsed["result"]["status"], "outside");
        assert_eq!(parsed["result"]["certificate"]["type"], "separator");
    }

    #[test]
    fn validate_passes_on_a_small_unitary_instance() {
        let text = r#"{"group":{"family":"U","n":2},"F":[1.0,0.0],"Y":[0.6,-0.2],"mc_samples":5000,"seed":7}"#;
        let out = run_command("validate", &problem(text), text).unwrap();
        let parsed: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(parsed["result"]["pass"], Value::Bool(true), "3σ validation failed:\n{out}");
        assert_eq!(parsed["result"]["n_samples"].as_u64(), Some(5000));
    }

    #[test]
    fn sample_orbit_emits_the_requested_projections() {
        let text = r#"{"group":{"family":"SOodd","n":2},"F":[1.0,0.5],"mc_samples":8,"seed":3}"#;
        let out = run_command("sample-orbit", &problem(text), text).unwrap();
        let parsed: Value = serde_json::from_str(&out).unwrap();
        let rows = parsed["result"]["projections"].as_array().unwrap();
        assert_eq!(rows.len(), 8);
        for row in rows {
            assert_eq!(row.as_array().unwrap().len(), 2);
        }
        let again = run_command("sample-orbit", &problem(text), text).unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn module_errors_map_to_documented_exit_codes() {
        let infeasible = r#"{"group":{"family":"U","n":2},"F":[1,0],"A":[1.2,-0.2]}"#;
        let err = run_command("solve", &problem(infeasible), infeasible).unwrap_err();
        assert_eq!((err.code.as_str(), err.exit_code), ("INFEASIBLE", 3));

        let disconnected = r#"{"group":{"family":"Oeven","n":2},"F":[1,0.5],"A":[1,0.5]}"#;
        let err = run_command("solve", &problem(disconnected), disconnected).unwrap_err();
        assert_eq!((err.code.as_str(), err.exit_code), ("INTEGRATION_ONLY", 2));

        let overflow = CliFailure::from(Error::NumericOverflow { magnitude: 40.0, scale: 1.0 });
        assert_eq!((overflow.code.as_str(), overflow.exit_code), ("NUMERIC_OVERFLOW", 4));
    }

    #[test]
    fn hash_is_fnv1a_of_the_raw_bytes() {
        // Reference values for the 64-bit FNV-1a test vectors.
        assert_eq!(input_hash(b""), "cbf29ce484222325");
        assert_eq!(input_hash(b"a"), "af63dc4c8601ec8c");
        assert_ne!(input_hash(b"{}"), input_hash(b"{} "));
    }
}
