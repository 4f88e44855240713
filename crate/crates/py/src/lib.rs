//! Python bindings: lint, hierarchy checking, simulation, the reference PWM
//! model, and prompt/extraction helpers, exposed as plain functions plus a
//! stepping `PwmModel` class.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use pyo3::IntoPyObjectExt;

use hdlv_core::diag::to_json_value;
use hdlv_core::hierarchy::{check, load_manifest};
use hdlv_core::lint::{build_drive_map, lint as lint_design, LintConfig};
use hdlv_core::orchestrator::{build_prompt as core_build_prompt, RoleConfig};
use hdlv_core::parser::{parse_text, ParseResult};
use hdlv_core::pwm::{
    compare_traces, pwm_outputs, pwm_step, run_golden, DutySchedule, PwmConfig, PwmInputs,
    PwmState,
};
use hdlv_core::sim::{all_signals, elaborate, run, Stimulus, Trace};
use hdlv_core::vcd::{read_vcd, write_vcd};
use hdlv_core::SourceMap;

fn json_to_py<'py>(py: Python<'py>, v: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    match v {
        serde_json::Value::Null => py.None().into_bound_py_any(py),
        serde_json::Value::Bool(b) => b.into_bound_py_any(py),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_bound_py_any(py)
            } else if let Some(u) = n.as_u64() {
                u.into_bound_py_any(py)
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_bound_py_any(py)
            }
        }
        serde_json::Value::String(s) => s.into_bound_py_any(py),
        serde_json::Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_bound_py_any(py)
        }
        serde_json::Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, val) in map {
                dict.set_item(k, json_to_py(py, val)?)?;
            }
            dict.into_bound_py_any(py)
        }
    }
}

fn parse_sources(sources: Vec<(String, String)>) -> (SourceMap, Vec<ParseResult>) {
    let mut sm = SourceMap::new();
    let parsed = sources
        .into_iter()
        .map(|(name, text)| parse_text(&mut sm, &name, &text))
        .collect();
    (sm, parsed)
}

fn trace_to_py<'py>(py: Python<'py>, trace: &Trace) -> PyResult<Bound<'py, PyDict>> {
    let dict = PyDict::new(py);
    for s in trace.signals() {
        dict.set_item(&s.name, s.values.clone())?;
    }
    Ok(dict)
}

/// Lints one or more sources as a single design; returns diagnostics as a
/// list of dicts (rule, severity, file, start/end, message, hint, related).
#[pyfunction]
#[pyo3(signature = (sources, deny_warnings = false))]
fn lint<'py>(
    py: Python<'py>,
    sources: Vec<(String, String)>,
    deny_warnings: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let (sm, parsed) = parse_sources(sources);
    let refs: Vec<&ParseResult> = parsed.iter().collect();
    let map = build_drive_map(&refs);
    let mut config = LintConfig::new();
    config.deny_warnings = deny_warnings;
    let diags = lint_design(&refs, &map, &config);
    let json = serde_json::Value::Array(diags.iter().map(|d| to_json_value(d, &sm)).collect());
    json_to_py(py, &json)
}

/// Parses and re-emits normalized source text.
#[pyfunction]
fn pretty_print(source: &str) -> PyResult<String> {
    let mut sm = SourceMap::new();
    let pr = parse_text(&mut sm, "<python>", source);
    if pr.has_errors() {
        return Err(PyValueError::new_err("source has parse errors"));
    }
    hdlv_core::pretty_print(&pr.ast).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Checks sources against a manifest JSON document. Returns
/// `{"pass": bool, "diagnostics": [...]}`.
#[pyfunction]
fn hier_check<'py>(
    py: Python<'py>,
    manifest_json: &str,
    sources: Vec<(String, String)>,
) -> PyResult<Bound<'py, PyAny>> {
    let manifest = load_manifest(manifest_json.as_bytes())
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let (sm, parsed) = parse_sources(sources);
    let refs: Vec<&ParseResult> = parsed.iter().collect();
    let report = check(&manifest, &refs, &sm);
    let json = serde_json::json!({
        "pass": report.pass,
        "diagnostics": report.diagnostics.iter().map(|d| to_json_value(d, &sm)).collect::<Vec<_>>(),
    });
    json_to_py(py, &json)
}

/// Simulates `top` for `cycles` cycles; returns `{signal: [value per cycle]}`.
#[pyfunction]
#[pyo3(signature = (sources, top, cycles, stimulus_json = None, record = None))]
fn simulate<'py>(
    py: Python<'py>,
    sources: Vec<(String, String)>,
    top: &str,
    cycles: u64,
    stimulus_json: Option<&str>,
    record: Option<Vec<String>>,
) -> PyResult<Bound<'py, PyDict>> {
    let (_, parsed) = parse_sources(sources);
    let refs: Vec<&ParseResult> = parsed.iter().collect();
    let design = elaborate(&refs, top).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let stimulus = match stimulus_json {
        Some(s) => Stimulus::from_json(s.as_bytes())
            .map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => Stimulus::default(),
    };
    let record = record.unwrap_or_else(|| all_signals(&design));
    let trace = run(&design, &stimulus, cycles, &record)
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    trace_to_py(py, &trace)
}

/// Reference PWM trace at a constant duty.
#[pyfunction]
#[pyo3(signature = (duty, cycles = 2048, reset_cycles = 4))]
fn golden_trace<'py>(
    py: Python<'py>,
    duty: u32,
    cycles: u64,
    reset_cycles: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let config = PwmConfig::default();
    let trace = run_golden(&config, &DutySchedule::constant(duty), reset_cycles, cycles)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    trace_to_py(py, &trace)
}

/// Simulates a PWM design and compares outputs (and optionally counters)
/// against the reference model. Returns a list of mismatch dicts; empty
/// means bit-exact.
#[pyfunction]
#[pyo3(signature = (sources, duties, cycles = 2048, reset_cycles = 4, top = "pwm_top", counter_map = None))]
fn verify_pwm<'py>(
    py: Python<'py>,
    sources: Vec<(String, String)>,
    duties: Vec<u32>,
    cycles: u64,
    reset_cycles: u64,
    top: &str,
    counter_map: Option<Vec<(String, String)>>,
) -> PyResult<Bound<'py, PyAny>> {
    let (_, parsed) = parse_sources(sources);
    let refs: Vec<&ParseResult> = parsed.iter().collect();
    let design = elaborate(&refs, top).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let config = PwmConfig::default();
    let mut map: Vec<(String, String)> =
        vec![("pwm".into(), "pwm".into()), ("pwm_n".into(), "pwm_n".into())];
    map.extend(counter_map.unwrap_or_default());
    let record: Vec<String> = map.iter().map(|(_, a)| a.clone()).collect();
    let mut mismatches = Vec::new();
    for duty in duties {
        config.check_duty(duty).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let stimulus = Stimulus { reset_cycles, ..Stimulus::default() }
            .write("en", 0, 1)
            .write("duty", 0, duty as u64);
        let trace = run(&design, &stimulus, cycles, &record)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        let golden = run_golden(&config, &DutySchedule::constant(duty), reset_cycles, cycles)
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        let report = compare_traces(&golden, &trace, &map)
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        for m in report.entries {
            mismatches.push(serde_json::json!({
                "duty": duty,
                "signal": m.signal,
                "first_cycle": m.first_cycle,
                "expected": m.expected,
                "actual": m.actual,
            }));
        }
    }
    json_to_py(py, &serde_json::Value::Array(mismatches))
}

/// Extracts Verilog source units from a chat response.
#[pyfunction]
fn extract_code(response: &str) -> Vec<String> {
    hdlv_core::orchestrator::extract_code(response)
}

/// Renders the generation prompt for one manifest module, optionally with
/// feedback lines from a previous attempt.
#[pyfunction]
#[pyo3(signature = (manifest_json, target, feedback = None))]
fn build_prompt(
    manifest_json: &str,
    target: &str,
    feedback: Option<Vec<String>>,
) -> PyResult<String> {
    let manifest = load_manifest(manifest_json.as_bytes())
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let prompt = core_build_prompt(
        &manifest,
        target,
        &RoleConfig::default(),
        &feedback.unwrap_or_default(),
    )
    .map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(prompt.render())
}

/// Renders named per-cycle value vectors as a VCD document.
#[pyfunction]
#[pyo3(signature = (signals, widths, top = "dut"))]
fn to_vcd(signals: Vec<(String, Vec<u64>)>, widths: Vec<u32>, top: &str) -> PyResult<String> {
    if signals.len() != widths.len() {
        return Err(PyValueError::new_err("one width per signal"));
    }
    let mut trace = Trace::new(0);
    for ((name, _), w) in signals.iter().zip(&widths) {
        trace.add_signal(name, *w);
    }
    let rows = signals.first().map(|(_, v)| v.len()).unwrap_or(0);
    for t in 0..rows {
        let row: Vec<u64> = signals.iter().map(|(_, v)| v[t]).collect();
        trace.push_row(&row);
    }
    write_vcd(&trace, top).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Parses a VCD document back into `{signal: [values]}`.
#[pyfunction]
fn from_vcd<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyDict>> {
    let trace = read_vcd(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
    trace_to_py(py, &trace)
}

/// The three-phase PWM reference model as a stepping object.
#[pyclass]
struct PwmModel {
    config: PwmConfig,
    state: PwmState,
}

#[pymethods]
impl PwmModel {
    #[new]
    #[pyo3(signature = (dead_cycles = 4, phase_threshold = 85))]
    fn new(dead_cycles: u32, phase_threshold: u32) -> PyResult<Self> {
        let config = PwmConfig { counter_width: 8, dead_cycles, phase_threshold };
        config.validate().map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(PwmModel { config, state: PwmState::default() })
    }

    /// Advances one clock edge; returns (pwm bits, pwm_n bits) sampled after
    /// the edge.
    #[pyo3(signature = (duty, rstn = true, enable = true))]
    fn step(&mut self, duty: u32, rstn: bool, enable: bool) -> PyResult<(Vec<bool>, Vec<bool>)> {
        self.config.check_duty(duty).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let inputs = PwmInputs { rstn, enable, duty };
        let (next, _) = pwm_step(&self.state, &inputs, &self.config);
        self.state = next;
        let out = pwm_outputs(&self.state, &inputs, &self.config);
        Ok((out.pwm.to_vec(), out.pwm_n.to_vec()))
    }

    fn reset(&mut self) {
        self.state = PwmState::default();
    }

    /// Current counter values (c1, c2, c3).
    fn counters(&self) -> (u32, u32, u32) {
        let c = self.state.counters;
        (c[0], c[1], c[2])
    }

    fn __repr__(&self) -> String {
        format!(
            "PwmModel(counters={:?}, dead_cycles={}, phase_threshold={})",
            self.state.counters, self.config.dead_cycles, self.config.phase_threshold
        )
    }
}

#[pymodule]
fn hdlv_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(lint, m)?)?;
    m.add_function(wrap_pyfunction!(pretty_print, m)?)?;
    m.add_function(wrap_pyfunction!(hier_check, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(golden_trace, m)?)?;
    m.add_function(wrap_pyfunction!(verify_pwm, m)?)?;
    m.add_function(wrap_pyfunction!(extract_code, m)?)?;
    m.add_function(wrap_pyfunction!(build_prompt, m)?)?;
    m.add_function(wrap_pyfunction!(to_vcd, m)?)?;
    m.add_function(wrap_pyfunction!(from_vcd, m)?)?;
    m.add_class::<PwmModel>()?;
    Ok(())
}
