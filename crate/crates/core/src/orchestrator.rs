//! The generate → check → feedback loop.
//!
//! One session walks the manifest children-first; per module it builds a
//! role-scoped prompt, asks the backend for Verilog, extracts the code, runs
//! parse + lint + hierarchy checks (plus a golden simulation check at the
//! top), and iterates with the diagnostics rendered back into the next
//! prompt until the module is clean or the iteration budget runs out. Every
//! attempt's prompt, response, sources, and diagnostics are persisted under
//! the session's output directory.

use std::collections::BTreeMap;
use std::io::Write as IoWrite;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diag::{render_line, to_json_value, Diagnostic, RuleCode};
use crate::hierarchy::{check_module_scoped, load_manifest, DesignManifest, ModuleSpec};
use crate::lint::{build_drive_map, lint, LintConfig};
use crate::parser::{parse_text, ParseResult};
use crate::pwm::{compare_traces, run_golden, DutySchedule, PwmConfig};
use crate::sim::{elaborate, run, Stimulus};
use crate::source::SourceMap;

// ---------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendSpec {
    /// Scripted responses consumed in order; for tests and replays.
    Mock { script: Vec<PathBuf> },
    /// External command: the prompt goes to stdin, the completion is read
    /// from stdout.
    Command { cmd: String, timeout_s: u64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoleConfig {
    #[serde(default = "default_preamble")]
    pub preamble: String,
    #[serde(default = "default_style_rules")]
    pub style_rules: Vec<String>,
}

impl Default for RoleConfig {
    fn default() -> RoleConfig {
        RoleConfig { preamble: default_preamble(), style_rules: default_style_rules() }
    }
}

fn default_preamble() -> String {
    "You are a senior integrated circuit (IC) design engineer, a specialist in \
     synthesizable Verilog-2001 RTL for ASIC tapeout."
        .to_string()
}

fn default_style_rules() -> Vec<String> {
    [
        "Write exactly one Verilog-2001 module with the interface given below; \
         respond with a single fenced code block.",
        "Use ANSI-style port declarations.",
        "Close every begin with end, every case with endcase, and every module with endmodule.",
        "Drive each signal from exactly one always block or continuous assignment.",
        "Use nonblocking assignments (<=) in clocked blocks and blocking assignments (=) \
         in combinational blocks.",
        "Sequential logic uses the clock and reset conventions given below, with the reset \
         guard as the only top-level statement of the block.",
        "Combinational always blocks use @(*) and assign every output on every path; \
         give every case a default arm.",
        "Do not use initial blocks, delays, or x/z literals.",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GoldenCheck {
    pub duty: Vec<u32>,
    pub cycles: u64,
    #[serde(default = "default_golden_reset")]
    pub reset_cycles: u64,
}

fn default_golden_reset() -> u64 {
    4
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionConfig {
    pub manifest: PathBuf,
    pub backend: BackendSpec,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: u32,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub role: RoleConfig,
    /// Modules to generate; defaults to every manifest module.
    #[serde(default)]
    pub targets: Option<Vec<String>>,
    #[serde(default)]
    pub golden_check: Option<GoldenCheck>,
}

fn default_max_iterations() -> u32 {
    5
}

impl SessionConfig {
    pub fn from_json(bytes: &[u8]) -> Result<SessionConfig, SessionError> {
        serde_json::from_slice(bytes).map_err(|e| SessionError::Config(e.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("invalid session config: {0}")]
    Config(String),
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("unknown module `{0}`")]
    UnknownModule(String),
    #[error("role preamble must not be empty")]
    EmptyPreamble,
    #[error("mock backend needs a non-empty script")]
    EmptyScript,
    #[error("backend timeout must be positive")]
    ZeroTimeout,
    #[error("max_iterations must be at least 1")]
    ZeroIterations,
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SessionError + '_ {
    move |source| SessionError::Io { path: path.to_path_buf(), source }
}

// ---------------------------------------------------------------------
// Prompt building
// ---------------------------------------------------------------------

/// The prompt sections, in the order they are rendered.
#[derive(Debug, Clone, Serialize)]
pub struct RolePrompt {
    pub preamble: String,
    pub style_rules: Vec<String>,
    pub interface: String,
    pub conventions: String,
    pub task: String,
    pub feedback: Option<String>,
}

impl RolePrompt {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.preamble);
        out.push_str("\n\nCoding style contract:\n");
        for rule in &self.style_rules {
            out.push_str("- ");
            out.push_str(rule);
            out.push('\n');
        }
        out.push_str("\nModule interface:\n");
        out.push_str(&self.interface);
        out.push('\n');
        out.push_str(&self.conventions);
        out.push_str("\n\nTask:\n");
        out.push_str(&self.task);
        out.push('\n');
        if let Some(fb) = &self.feedback {
            out.push_str("\nFeedback on your previous attempt. Correct every finding and \
                          regenerate the complete module:\n");
            out.push_str(fb);
        }
        out
    }
}

fn interface_block(spec: &ModuleSpec) -> String {
    let mut out = format!("  module {} with ports:\n", spec.name);
    for p in &spec.ports {
        let width = if p.width == 1 {
            "1 bit".to_string()
        } else {
            format!("{} bits, [{}:0]", p.width, p.width - 1)
        };
        out.push_str(&format!("    {} {} ({})\n", p.dir, p.name, width));
    }
    if !spec.children.is_empty() {
        out.push_str("  it must instantiate:\n");
        for c in &spec.children {
            out.push_str(&format!("    {} as instance {}\n", c.module, c.instance));
        }
    }
    out
}

/// Builds the prompt for one target module, appending rendered diagnostics
/// from the previous attempt when present.
pub fn build_prompt(
    manifest: &DesignManifest,
    target: &str,
    role: &RoleConfig,
    prior_feedback: &[String],
) -> Result<RolePrompt, SessionError> {
    if role.preamble.trim().is_empty() {
        return Err(SessionError::EmptyPreamble);
    }
    let spec = manifest
        .module(target)
        .ok_or_else(|| SessionError::UnknownModule(target.to_string()))?;
    let conventions = format!(
        "Clock and reset conventions: clock `{}` (rising edge); reset `{}`, active-{}, {}.",
        manifest.clock.name,
        manifest.reset.name,
        match manifest.reset.active {
            crate::hierarchy::ActiveLevel::Low => "low",
            crate::hierarchy::ActiveLevel::High => "high",
        },
        if manifest.reset.is_async { "asynchronous" } else { "synchronous" }
    );
    let task = format!(
        "Write the complete synthesizable Verilog-2001 source of module `{}` exactly \
         matching the interface above.",
        spec.name
    );
    let feedback = if prior_feedback.is_empty() {
        None
    } else {
        let mut fb = String::new();
        for line in prior_feedback {
            fb.push_str("- ");
            fb.push_str(line);
            fb.push('\n');
        }
        Some(fb)
    };
    Ok(RolePrompt {
        preamble: role.preamble.clone(),
        style_rules: role.style_rules.clone(),
        interface: interface_block(spec),
        conventions,
        task,
        feedback,
    })
}

// ---------------------------------------------------------------------
// Code extraction
// ---------------------------------------------------------------------

/// Pulls Verilog source units out of a chat response. Primary: fenced code
/// blocks labeled as Verilog (or unlabeled ones containing a `module`
/// keyword). Fallback: bare `module`..`endmodule` spans. Returns an empty
/// vector when neither strategy finds anything.
pub fn extract_code(response: &str) -> Vec<String> {
    let fence = Regex::new(r"(?ms)^[ \t]*```[ \t]*([A-Za-z0-9_+-]*)[ \t]*\r?\n(.*?)^[ \t]*```")
        .expect("static regex");
    let module_kw = Regex::new(r"\bmodule\b").expect("static regex");
    let mut units = Vec::new();
    for cap in fence.captures_iter(response) {
        let label = cap.get(1).map(|m| m.as_str().to_ascii_lowercase()).unwrap_or_default();
        let body = cap.get(2).map(|m| m.as_str()).unwrap_or_default();
        let labeled_verilog = matches!(label.as_str(), "verilog" | "systemverilog" | "v");
        if labeled_verilog || (label.is_empty() && module_kw.is_match(body)) {
            units.push(body.trim_end().to_string() + "\n");
        }
    }
    if !units.is_empty() {
        return units;
    }
    // Fallback: maximal module..endmodule spans in plain text.
    let span_re = Regex::new(r"(?s)\bmodule\b.*?\bendmodule\b").expect("static regex");
    for m in span_re.find_iter(response) {
        units.push(m.as_str().to_string() + "\n");
    }
    units
}

// ---------------------------------------------------------------------
// Backends
// ---------------------------------------------------------------------

enum Backend {
    Mock { responses: std::collections::VecDeque<String> },
    Command { cmd: String, timeout: Duration },
}

impl Backend {
    fn from_spec(spec: &BackendSpec) -> Result<Backend, SessionError> {
        match spec {
            BackendSpec::Mock { script } => {
                if script.is_empty() {
                    return Err(SessionError::EmptyScript);
                }
                let mut responses = std::collections::VecDeque::new();
                for path in script {
                    let text =
                        std::fs::read_to_string(path).map_err(io_err(path))?;
                    responses.push_back(text);
                }
                Ok(Backend::Mock { responses })
            }
            BackendSpec::Command { cmd, timeout_s } => {
                if *timeout_s == 0 {
                    return Err(SessionError::ZeroTimeout);
                }
                Ok(Backend::Command { cmd: cmd.clone(), timeout: Duration::from_secs(*timeout_s) })
            }
        }
    }

    /// One completion. `Err` is a backend failure (timeout, nonzero exit,
    /// exhausted script), recorded as a failed attempt rather than aborting
    /// the session.
    fn invoke(&mut self, prompt: &str) -> Result<String, String> {
        match self {
            Backend::Mock { responses } => {
                responses.pop_front().ok_or_else(|| "mock script exhausted".to_string())
            }
            Backend::Command { cmd, timeout } => run_command(cmd, prompt, *timeout),
        }
    }
}

fn run_command(cmd: &str, prompt: &str, timeout: Duration) -> Result<String, String> {
    use std::process::{Command, Stdio};
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(cmd)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| format!("spawn failed: {e}"))?;

    // Feed the prompt from a helper thread so a non-reading child cannot
    // deadlock us.
    let mut stdin = child.stdin.take().expect("piped stdin");
    let prompt_owned = prompt.to_string();
    let writer = std::thread::spawn(move || {
        let _ = stdin.write_all(prompt_owned.as_bytes());
    });

    let deadline = Instant::now() + timeout;
    loop {
        match child.try_wait() {
            Ok(Some(status)) => {
                let _ = writer.join();
                let out = child.wait_with_output().map_err(|e| e.to_string())?;
                if !status.success() {
                    return Err(format!(
                        "backend exited with {status}: {}",
                        String::from_utf8_lossy(&out.stderr).trim()
                    ));
                }
                return Ok(String::from_utf8_lossy(&out.stdout).into_owned());
            }
            Ok(None) => {
                if Instant::now() >= deadline {
                    let _ = child.kill();
                    let _ = child.wait();
                    let _ = writer.join();
                    return Err(format!("backend timed out after {}s", timeout.as_secs()));
                }
                std::thread::sleep(Duration::from_millis(20));
            }
            Err(e) => return Err(format!("wait failed: {e}")),
        }
    }
}

// ---------------------------------------------------------------------
// Session log
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Clean,
    Dirty,
    ExtractionFailed,
    BackendFailure,
}

#[derive(Debug, Clone, Serialize)]
pub struct Attempt {
    pub module: String,
    pub iteration: u32,
    pub prompt: String,
    pub response: Option<String>,
    pub sources: Vec<String>,
    /// Rendered diagnostic lines (`file:line:col: severity[CODE] message`).
    pub diagnostics: Vec<String>,
    pub diagnostics_json: serde_json::Value,
    pub verdict: Verdict,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FinalVerdict {
    Converged,
    BudgetExhausted,
    BackendFailure,
}

#[derive(Debug, Clone, Serialize)]
pub struct SessionLog {
    pub config: serde_json::Value,
    pub attempts: Vec<Attempt>,
    pub final_verdict: FinalVerdict,
}

impl SessionLog {
    /// Serialization with wall-clock zeroed, for reproducibility checks.
    pub fn normalized_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("session log json");
        if let Some(attempts) = v.get_mut("attempts").and_then(|a| a.as_array_mut()) {
            for a in attempts {
                if let Some(w) = a.get_mut("wall_ms") {
                    *w = serde_json::Value::from(0u64);
                }
            }
        }
        v
    }
}

// ---------------------------------------------------------------------
// Session driver
// ---------------------------------------------------------------------

/// Runs the full generate/check/feedback session described by `config`.
pub fn run_session(config: &SessionConfig) -> Result<SessionLog, SessionError> {
    if config.max_iterations == 0 {
        return Err(SessionError::ZeroIterations);
    }
    if config.role.preamble.trim().is_empty() {
        return Err(SessionError::EmptyPreamble);
    }
    let manifest_bytes =
        std::fs::read(&config.manifest).map_err(io_err(&config.manifest))?;
    let manifest = load_manifest(&manifest_bytes).map_err(|e| SessionError::Manifest(e.to_string()))?;
    let mut backend = Backend::from_spec(&config.backend)?;
    std::fs::create_dir_all(&config.out_dir).map_err(io_err(&config.out_dir))?;

    // Children first, so parents are checked against real children.
    let targets: Vec<String> = match &config.targets {
        Some(list) => {
            for t in list {
                if manifest.module(t).is_none() {
                    return Err(SessionError::UnknownModule(t.clone()));
                }
            }
            manifest.topo_order().into_iter().filter(|m| list.contains(m)).collect()
        }
        None => manifest.topo_order(),
    };

    let mut accepted: BTreeMap<String, String> = BTreeMap::new();
    let mut attempts: Vec<Attempt> = Vec::new();
    let mut final_verdict = FinalVerdict::Converged;

    'modules: for target in &targets {
        let module_dir = config.out_dir.join(target);
        std::fs::create_dir_all(&module_dir).map_err(io_err(&module_dir))?;
        let mut feedback: Vec<String> = Vec::new();
        let mut last_verdict = Verdict::Dirty;

        for iteration in 1..=config.max_iterations {
            let started = Instant::now();
            let prompt = build_prompt(&manifest, target, &config.role, &feedback)?;
            let prompt_text = prompt.render();
            write_artifact(&module_dir, &format!("prompt-{iteration}.txt"), &prompt_text)?;

            let response = match backend.invoke(&prompt_text) {
                Ok(r) => r,
                Err(reason) => {
                    write_artifact(
                        &module_dir,
                        &format!("response-{iteration}.txt"),
                        &format!("<backend failure: {reason}>\n"),
                    )?;
                    last_verdict = Verdict::BackendFailure;
                    attempts.push(Attempt {
                        module: target.clone(),
                        iteration,
                        prompt: prompt_text,
                        response: None,
                        sources: Vec::new(),
                        diagnostics: vec![format!("backend failure: {reason}")],
                        diagnostics_json: serde_json::Value::Array(Vec::new()),
                        verdict: Verdict::BackendFailure,
                        wall_ms: started.elapsed().as_millis() as u64,
                    });
                    continue;
                }
            };
            write_artifact(&module_dir, &format!("response-{iteration}.txt"), &response)?;

            let units = extract_code(&response);
            let src_dir = module_dir.join(format!("src-{iteration}"));
            std::fs::create_dir_all(&src_dir).map_err(io_err(&src_dir))?;
            for (i, unit) in units.iter().enumerate() {
                write_artifact(&src_dir, &format!("unit-{i}.v"), unit)?;
            }

            if units.is_empty() {
                last_verdict = Verdict::ExtractionFailed;
                feedback = vec![
                    "the response contained no Verilog code; respond with one fenced \
                     code block holding the complete module"
                        .to_string(),
                ];
                attempts.push(Attempt {
                    module: target.clone(),
                    iteration,
                    prompt: prompt_text,
                    response: Some(response),
                    sources: Vec::new(),
                    diagnostics: feedback.clone(),
                    diagnostics_json: serde_json::Value::Array(Vec::new()),
                    verdict: Verdict::ExtractionFailed,
                    wall_ms: started.elapsed().as_millis() as u64,
                });
                continue;
            }

            let checks = check_attempt(&manifest, &accepted, &units, target, config);
            write_artifact(
                &module_dir,
                &format!("diags-{iteration}.json"),
                &(serde_json::to_string_pretty(&checks.json).expect("diag json") + "\n"),
            )?;

            let verdict = if checks.clean { Verdict::Clean } else { Verdict::Dirty };
            last_verdict = verdict;
            attempts.push(Attempt {
                module: target.clone(),
                iteration,
                prompt: prompt_text,
                response: Some(response),
                sources: units.clone(),
                diagnostics: checks.lines,
                diagnostics_json: checks.json,
                verdict,
                wall_ms: started.elapsed().as_millis() as u64,
            });

            if checks.clean {
                if let Some(unit) = checks.target_unit {
                    accepted.insert(target.clone(), unit);
                }
                continue 'modules;
            }
            feedback = checks.feedback;
        }

        // Budget exhausted for this module; the session stops here.
        final_verdict = if last_verdict == Verdict::BackendFailure {
            FinalVerdict::BackendFailure
        } else {
            FinalVerdict::BudgetExhausted
        };
        break;
    }

    let log = SessionLog {
        config: serde_json::to_value(config).expect("config json"),
        attempts,
        final_verdict,
    };
    let rendered = serde_json::to_string_pretty(&log).expect("log json") + "\n";
    write_artifact(&config.out_dir, "session.json", &rendered)?;
    Ok(log)
}

struct AttemptChecks {
    /// Rendered diagnostic lines (`file:line:col: severity[CODE] message`).
    lines: Vec<String>,
    /// The same lines with hints appended, for the next prompt.
    feedback: Vec<String>,
    json: serde_json::Value,
    clean: bool,
    /// The source unit declaring the target, for the accepted store.
    target_unit: Option<String>,
}

/// Static checks plus the optional golden simulation check.
fn check_attempt(
    manifest: &DesignManifest,
    accepted: &BTreeMap<String, String>,
    units: &[String],
    target: &str,
    config: &SessionConfig,
) -> AttemptChecks {
    let mut sm = SourceMap::new();
    let mut parsed: Vec<ParseResult> = Vec::new();
    for (name, text) in accepted {
        parsed.push(parse_text(&mut sm, &format!("accepted/{name}.v"), text));
    }
    let mut unit_files: Vec<crate::source::FileId> = Vec::new();
    for (i, unit) in units.iter().enumerate() {
        let pr = parse_text(&mut sm, &format!("attempt/unit-{i}.v"), unit);
        unit_files.push(pr.file);
        parsed.push(pr);
    }
    let refs: Vec<&ParseResult> = parsed.iter().collect();

    let mut diags: Vec<Diagnostic> = Vec::new();
    let map = build_drive_map(&refs);
    diags.extend(lint(&refs, &map, &LintConfig::new()));
    let hier = check_module_scoped(manifest, &refs, target, &sm);
    diags.extend(hier.diagnostics);

    let mut clean = !diags.iter().any(|d| d.is_error());

    // Golden check: once everything is statically clean and the whole design
    // is assembled (the target is the top), simulate against the reference.
    if clean && target == manifest.top {
        if let Some(golden) = &config.golden_check {
            match golden_check_diags(&refs, manifest, golden, &sm) {
                Ok(extra) => {
                    if !extra.is_empty() {
                        clean = false;
                        diags.extend(extra);
                    }
                }
                Err(msg) => {
                    clean = false;
                    diags.push(Diagnostic::new(
                        RuleCode::Sim001,
                        sm.span(parsed.last().unwrap().file, 0, 0),
                        format!("simulation failed: {msg}"),
                    ));
                }
            }
        }
    }

    crate::diag::sort_diagnostics(&mut diags);
    let lines: Vec<String> = diags.iter().map(|d| render_line(d, &sm)).collect();
    let feedback: Vec<String> = diags
        .iter()
        .zip(&lines)
        .map(|(d, line)| match &d.hint {
            Some(hint) => format!("{line} (hint: {hint})"),
            None => line.clone(),
        })
        .collect();
    let json =
        serde_json::Value::Array(diags.iter().map(|d| to_json_value(d, &sm)).collect());

    let target_unit = units
        .iter()
        .enumerate()
        .find(|(i, _)| {
            parsed
                .iter()
                .find(|p| p.file == unit_files[*i])
                .is_some_and(|p| p.ast.modules.iter().any(|m| m.name == target))
        })
        .map(|(_, u)| u.clone());

    AttemptChecks { lines, feedback, json, clean, target_unit }
}

fn golden_check_diags(
    refs: &[&ParseResult],
    manifest: &DesignManifest,
    golden: &GoldenCheck,
    sm: &SourceMap,
) -> Result<Vec<Diagnostic>, String> {
    let design = elaborate(refs, &manifest.top).map_err(|e| e.to_string())?;
    let config = PwmConfig::default();
    let mut out = Vec::new();
    for &duty in &golden.duty {
        let stim = Stimulus::default()
            .write("en", 0, 1)
            .write("duty", 0, duty as u64);
        let record: Vec<String> = vec!["pwm".into(), "pwm_n".into()];
        let trace =
            run(&design, &stim, golden.cycles, &record).map_err(|e| e.to_string())?;
        let reference = run_golden(
            &config,
            &DutySchedule::constant(duty),
            golden.reset_cycles,
            golden.cycles,
        )
        .map_err(|e| e.to_string())?;
        let map: Vec<(String, String)> =
            vec![("pwm".into(), "pwm".into()), ("pwm_n".into(), "pwm_n".into())];
        let report = compare_traces(&reference, &trace, &map).map_err(|e| e.to_string())?;
        for m in report.entries {
            out.push(Diagnostic::new(
                RuleCode::Sim001,
                sm.span(refs.last().unwrap().file, 0, 0),
                format!(
                    "duty {duty}: signal `{}` first differs from the reference at cycle {} \
                     (expected {}, got {})",
                    m.signal, m.first_cycle, m.expected, m.actual
                ),
            ));
        }
    }
    Ok(out)
}

fn write_artifact(dir: &Path, name: &str, content: &str) -> Result<(), SessionError> {
    let path = dir.join(name);
    std::fs::write(&path, content).map_err(io_err(&path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus_path(rel: &str) -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(rel)
    }

    fn pwm_manifest() -> DesignManifest {
        load_manifest(&std::fs::read(corpus_path("pwm/pwm.manifest.json")).unwrap()).unwrap()
    }

    #[test]
    fn prompt_has_role_line_and_four_port_interface() {
        let manifest = pwm_manifest();
        let prompt = build_prompt(&manifest, "up_counter", &RoleConfig::default(), &[]).unwrap();
        let text = prompt.render();
        assert!(text.contains("IC"));
        for port in ["clk", "rstn", "en", "count"] {
            assert!(text.contains(port), "missing {port} in\n{text}");
        }
        assert_eq!(prompt.interface.matches("input").count() + prompt.interface.matches("output").count(), 4);
        assert!(text.contains("active-low"));
        assert!(prompt.feedback.is_none());
    }

    #[test]
    fn prompt_includes_prior_diagnostics_verbatim() {
        let manifest = pwm_manifest();
        let line = "attempt/unit-0.v:12:5: error[LLM001] begin block closed with `}` instead of `end`";
        let prompt =
            build_prompt(&manifest, "up_counter", &RoleConfig::default(), &[line.to_string()])
                .unwrap();
        let text = prompt.render();
        assert!(text.contains("LLM001"));
        assert!(text.contains(line));
    }

    #[test]
    fn empty_preamble_is_a_config_error() {
        let manifest = pwm_manifest();
        let role = RoleConfig { preamble: "  ".into(), ..RoleConfig::default() };
        assert!(matches!(
            build_prompt(&manifest, "up_counter", &role, &[]),
            Err(SessionError::EmptyPreamble)
        ));
    }

    #[test]
    fn unknown_module_is_an_error() {
        let manifest = pwm_manifest();
        assert!(matches!(
            build_prompt(&manifest, "nonesuch", &RoleConfig::default(), &[]),
            Err(SessionError::UnknownModule(_))
        ));
    }

    #[test]
    fn extract_single_fence() {
        let units = extract_code("text\n```verilog\nmodule m; endmodule\n```\nmore");
        assert_eq!(units.len(), 1);
        assert!(units[0].contains("module m"));
    }

    #[test]
    fn extract_prose_only_fails() {
        assert!(extract_code("I could not produce the code, sorry.").is_empty());
    }

    #[test]
    fn extract_two_fences_in_order() {
        let units = extract_code(
            "```verilog\nmodule a; endmodule\n```\nand its testbench\n```verilog\nmodule a_tb; endmodule\n```\n",
        );
        assert_eq!(units.len(), 2);
        assert!(units[0].contains("module a;"));
        assert!(units[1].contains("module a_tb;"));
    }

    #[test]
    fn extract_unlabeled_fence_requires_module_keyword() {
        assert!(extract_code("```\njust text\n```").is_empty());
        let units = extract_code("```\nmodule m; endmodule\n```");
        assert_eq!(units.len(), 1);
    }

    #[test]
    fn extract_bare_module_span_fallback() {
        let units = extract_code("here you go: module m(input wire a); endmodule thanks");
        assert_eq!(units.len(), 1);
        assert!(units[0].starts_with("module"));
        assert!(units[0].trim_end().ends_with("endmodule"));
    }

    fn mock_config(script: &[&str], max_iterations: u32, out: &Path) -> SessionConfig {
        SessionConfig {
            manifest: corpus_path("mock/up_counter.manifest.json"),
            backend: BackendSpec::Mock {
                script: script.iter().map(|s| corpus_path(&format!("mock/{s}"))).collect(),
            },
            max_iterations,
            out_dir: out.to_path_buf(),
            role: RoleConfig::default(),
            targets: None,
            golden_check: None,
        }
    }

    #[test]
    fn broken_then_fixed_converges_in_two() {
        let tmp = tempfile::tempdir().unwrap();
        let config = mock_config(
            &["up_counter_broken.txt", "up_counter_fixed.txt"],
            5,
            tmp.path(),
        );
        let log = run_session(&config).unwrap();
        assert_eq!(log.final_verdict, FinalVerdict::Converged);
        assert_eq!(log.attempts.len(), 2);
        assert_eq!(log.attempts[0].verdict, Verdict::Dirty);
        assert!(log.attempts[0].diagnostics.iter().any(|d| d.contains("LLM001")));
        assert_eq!(log.attempts[1].verdict, Verdict::Clean);
        // Every error line of attempt 1 appears verbatim in prompt 2.
        for line in &log.attempts[0].diagnostics {
            if line.contains("error[") {
                assert!(
                    log.attempts[1].prompt.contains(line),
                    "missing feedback line {line}"
                );
            }
        }
        // Artifacts exist.
        for name in ["prompt-1.txt", "response-1.txt", "diags-1.json", "prompt-2.txt"] {
            assert!(tmp.path().join("up_counter").join(name).exists(), "{name}");
        }
        assert!(tmp.path().join("up_counter/src-1/unit-0.v").exists());
        assert!(tmp.path().join("session.json").exists());
    }

    #[test]
    fn always_broken_exhausts_budget() {
        let tmp = tempfile::tempdir().unwrap();
        let config = mock_config(
            &["up_counter_broken.txt", "up_counter_broken.txt", "up_counter_broken.txt"],
            3,
            tmp.path(),
        );
        let log = run_session(&config).unwrap();
        assert_eq!(log.final_verdict, FinalVerdict::BudgetExhausted);
        assert_eq!(log.attempts.len(), 3);
        assert!(log.attempts.iter().all(|a| a.verdict == Verdict::Dirty));
    }

    #[test]
    fn script_exhaustion_is_backend_failure() {
        let tmp = tempfile::tempdir().unwrap();
        let config = mock_config(&["up_counter_broken.txt"], 3, tmp.path());
        let log = run_session(&config).unwrap();
        assert_eq!(log.final_verdict, FinalVerdict::BackendFailure);
        assert_eq!(log.attempts.len(), 3);
        assert_eq!(log.attempts[1].verdict, Verdict::BackendFailure);
    }

    #[test]
    fn mock_sessions_are_reproducible() {
        let tmp_a = tempfile::tempdir().unwrap();
        let tmp_b = tempfile::tempdir().unwrap();
        let a = run_session(&mock_config(
            &["up_counter_broken.txt", "up_counter_fixed.txt"],
            5,
            tmp_a.path(),
        ))
        .unwrap();
        let b = run_session(&mock_config(
            &["up_counter_broken.txt", "up_counter_fixed.txt"],
            5,
            tmp_b.path(),
        ))
        .unwrap();
        let mut ja = a.normalized_json();
        let mut jb = b.normalized_json();
        // The configs differ only in out_dir.
        ja.as_object_mut().unwrap().remove("config");
        jb.as_object_mut().unwrap().remove("config");
        assert_eq!(ja, jb);
    }

    #[test]
    fn command_backend_runs_and_times_out() {
        let tmp = tempfile::tempdir().unwrap();
        let fixed = corpus_path("mock/up_counter_fixed.txt");
        let config = SessionConfig {
            manifest: corpus_path("mock/up_counter.manifest.json"),
            backend: BackendSpec::Command {
                cmd: format!("cat {} >/dev/null; cat {}", "-", fixed.display()),
                timeout_s: 30,
            },
            max_iterations: 2,
            out_dir: tmp.path().to_path_buf(),
            role: RoleConfig::default(),
            targets: None,
            golden_check: None,
        };
        let log = run_session(&config).unwrap();
        assert_eq!(log.final_verdict, FinalVerdict::Converged);
        assert_eq!(log.attempts.len(), 1);

        let slow = SessionConfig {
            backend: BackendSpec::Command { cmd: "sleep 5".into(), timeout_s: 1 },
            out_dir: tmp.path().join("slow"),
            max_iterations: 1,
            ..config
        };
        let log = run_session(&slow).unwrap();
        assert_eq!(log.final_verdict, FinalVerdict::BackendFailure);
        assert!(log.attempts[0].diagnostics[0].contains("timed out"));
    }

    #[test]
    fn config_json_roundtrip() {
        let json = br#"{
          "manifest": "m.json",
          "backend": {"kind": "command", "cmd": "my-model", "timeout_s": 120},
          "max_iterations": 5,
          "out_dir": "out"
        }"#;
        let config = SessionConfig::from_json(json).unwrap();
        assert_eq!(config.max_iterations, 5);
        assert!(matches!(config.backend, BackendSpec::Command { .. }));
        assert!(SessionConfig::from_json(b"{").is_err());
    }


    /// Script that answers each module request with the corpus source,
    /// wrapped in a fence, in manifest topological order.
    fn corpus_verbatim_script(dir: &Path) -> Vec<PathBuf> {
        let manifest = pwm_manifest();
        let mut paths = Vec::new();
        for (i, module) in manifest.topo_order().iter().enumerate() {
            let src = std::fs::read_to_string(corpus_path(&format!("pwm/{module}.v"))).unwrap();
            let path = dir.join(format!("script-{i}.txt"));
            std::fs::write(&path, format!("```verilog\n{src}```\n")).unwrap();
            paths.push(path);
        }
        paths
    }

    #[test]
    fn corpus_verbatim_with_golden_check_converges_first_try() {
        let tmp = tempfile::tempdir().unwrap();
        let script = corpus_verbatim_script(tmp.path());
        let config = SessionConfig {
            manifest: corpus_path("pwm/pwm.manifest.json"),
            backend: BackendSpec::Mock { script },
            max_iterations: 2,
            out_dir: tmp.path().join("out"),
            role: RoleConfig::default(),
            targets: None,
            golden_check: Some(GoldenCheck { duty: vec![0, 64], cycles: 512, reset_cycles: 4 }),
        };
        let log = run_session(&config).unwrap();
        assert_eq!(log.final_verdict, FinalVerdict::Converged, "{:#?}", log.attempts.iter().map(|a| (&a.module, a.verdict, &a.diagnostics)).collect::<Vec<_>>());
        assert_eq!(log.attempts.len(), 7);
        assert!(log.attempts.iter().all(|a| a.verdict == Verdict::Clean && a.iteration == 1));
        assert!(log.attempts.iter().all(|a| a.diagnostics.is_empty()));
    }

    #[test]
    fn golden_check_catches_behavioral_mutation() {
        let tmp = tempfile::tempdir().unwrap();
        let manifest = pwm_manifest();
        let mut paths = Vec::new();
        for (i, module) in manifest.topo_order().iter().enumerate() {
            let mut src = std::fs::read_to_string(corpus_path(&format!("pwm/{module}.v"))).unwrap();
            if module == "dead_time" {
                // Bypass the delay tap: statically clean, behaviorally wrong.
                src = src.replace("assign delayed = sr[3];", "assign delayed = q_in;");
            }
            let path = tmp.path().join(format!("script-{i}.txt"));
            std::fs::write(&path, format!("```verilog\n{src}```\n")).unwrap();
            paths.push(path);
        }
        let config = SessionConfig {
            manifest: corpus_path("pwm/pwm.manifest.json"),
            backend: BackendSpec::Mock { script: paths },
            max_iterations: 1,
            out_dir: tmp.path().join("out"),
            role: RoleConfig::default(),
            targets: None,
            golden_check: Some(GoldenCheck { duty: vec![64], cycles: 512, reset_cycles: 4 }),
        };
        let log = run_session(&config).unwrap();
        assert_eq!(log.final_verdict, FinalVerdict::BudgetExhausted);
        let last = log.attempts.last().unwrap();
        assert_eq!(last.module, "pwm_top");
        assert!(last.diagnostics.iter().any(|d| d.contains("SIM001")), "{:?}", last.diagnostics);
    }

    #[test]
    fn explicit_targets_limit_the_session() {
        let tmp = tempfile::tempdir().unwrap();
        let config = SessionConfig {
            manifest: corpus_path("pwm/pwm.manifest.json"),
            backend: BackendSpec::Mock {
                script: vec![corpus_path("mock/up_counter_fixed.txt")],
            },
            max_iterations: 3,
            out_dir: tmp.path().to_path_buf(),
            role: RoleConfig::default(),
            targets: Some(vec!["up_counter".to_string()]),
            golden_check: None,
        };
        let log = run_session(&config).unwrap();
        assert_eq!(log.final_verdict, FinalVerdict::Converged);
        assert_eq!(log.attempts.len(), 1);
        assert_eq!(log.attempts[0].module, "up_counter");

        let bad = SessionConfig {
            targets: Some(vec!["nonesuch".to_string()]),
            out_dir: tmp.path().join("x"),
            ..config
        };
        assert!(matches!(run_session(&bad), Err(SessionError::UnknownModule(_))));
    }

    #[test]
    fn zero_timeout_and_empty_script_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let mut config = mock_config(&[], 3, tmp.path());
        assert!(matches!(run_session(&config), Err(SessionError::EmptyScript)));
        config.backend = BackendSpec::Command { cmd: "cat".into(), timeout_s: 0 };
        assert!(matches!(run_session(&config), Err(SessionError::ZeroTimeout)));
    }
}
