//! `hdlv`: lint, hierarchy-check, simulate, and verify generated Verilog,
//! drive the generate/check/feedback pipeline, and dump reference PWM
//! traces.
//!
//! Exit codes: 0 clean/success, 1 findings (diagnostics or mismatches),
//! 2 usage/IO/configuration error, 3 internal error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};

use hdlv_core::diag::{render_diagnostics, RenderFormat, Severity};
use hdlv_core::hierarchy::{check, load_manifest};
use hdlv_core::lint::{build_drive_map, lint, LintConfig};
use hdlv_core::orchestrator::{run_session, SessionConfig};
use hdlv_core::parser::{parse_source, ParseResult};
use hdlv_core::preprocess::MacroTable;
use hdlv_core::pwm::{compare_traces, run_golden, DutySchedule, PwmConfig};
use hdlv_core::sim::{all_signals, elaborate, run, SimError, Stimulus, Trace};
use hdlv_core::token::tokenize;
use hdlv_core::vcd::write_vcd;
use hdlv_core::SourceMap;

#[derive(Parser)]
#[command(name = "hdlv", version, about = "Verilog lint, hierarchy, and simulation toolchain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and lint Verilog sources as one design.
    Lint {
        /// Source files (.v), analyzed together.
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Output format.
        #[arg(long, default_value = "text", value_parser = ["text", "json"])]
        format: String,
        /// Treat warnings as errors.
        #[arg(long, action = ArgAction::SetTrue)]
        deny_warnings: bool,
        /// Per-rule override, e.g. --rule LLM003=off (repeatable).
        #[arg(long = "rule")]
        rules: Vec<String>,
        /// Preprocessor define, e.g. --define WIDTH=8 (repeatable).
        #[arg(long = "define")]
        defines: Vec<String>,
    },
    /// Check sources against a design manifest.
    HierCheck {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Simulate a design and optionally dump a VCD.
    Sim {
        #[arg(long)]
        top: String,
        #[arg(long)]
        cycles: u64,
        /// Stimulus JSON (reset protocol + input writes).
        #[arg(long)]
        stimulus: Option<PathBuf>,
        /// Write the trace as VCD to this path.
        #[arg(long)]
        vcd: Option<PathBuf>,
        /// Record only these signals (repeatable; default: all).
        #[arg(long = "record")]
        record: Vec<String>,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Dump reference PWM generator traces.
    PwmGolden {
        /// Constant duty (0..=255).
        #[arg(long, conflicts_with = "sweep")]
        duty: Option<u32>,
        /// Four-step duty sweep over the run (0%, 25%, 50%, 75%).
        #[arg(long, action = ArgAction::SetTrue)]
        sweep: bool,
        #[arg(long, default_value_t = 2048)]
        cycles: u64,
        #[arg(long, default_value_t = 4)]
        reset_cycles: u64,
        /// Write the trace as VCD to this path.
        #[arg(long)]
        vcd: Option<PathBuf>,
        /// Write the trace as CSV to this path (stdout if no output chosen).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Simulate a PWM design and compare it against the reference model.
    VerifyPwm {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, default_value = "pwm_top")]
        top: String,
        #[arg(long, default_value_t = 2048)]
        cycles: u64,
        /// Comma-separated duty values.
        #[arg(long, default_value = "0,64,128,192")]
        duties: String,
        #[arg(long, default_value_t = 4)]
        reset_cycles: u64,
        /// reference=design counter pairs; empty string disables counter
        /// comparison.
        #[arg(long, default_value = "c1=u_cnt1.count,c2=u_cnt2.count,c3=u_cnt3.count")]
        counter_map: String,
    },
    /// Run a generate/check/feedback session from a config file.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
    },
}

enum CliError {
    /// Usage, IO, or configuration problem (exit 2).
    Usage(String),
    /// Internal error (exit 3).
    Internal(String),
}

impl CliError {
    fn usage(msg: impl Into<String>) -> CliError {
        CliError::Usage(msg.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn dispatch(command: Command) -> Result<u8, CliError> {
    match command {
        Command::Lint { files, format, deny_warnings, rules, defines } => {
            cmd_lint(files, &format, deny_warnings, rules, defines)
        }
        Command::HierCheck { manifest, files } => cmd_hier_check(manifest, files),
        Command::Sim { top, cycles, stimulus, vcd, record, files } => {
            cmd_sim(&top, cycles, stimulus, vcd, record, files)
        }
        Command::PwmGolden { duty, sweep, cycles, reset_cycles, vcd, csv } => {
            cmd_pwm_golden(duty, sweep, cycles, reset_cycles, vcd, csv)
        }
        Command::VerifyPwm { files, top, cycles, duties, reset_cycles, counter_map } => {
            cmd_verify_pwm(files, &top, cycles, &duties, reset_cycles, &counter_map)
        }
        Command::Pipeline { config } => cmd_pipeline(config),
    }
}

fn read_file(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))
}

fn parse_all(
    files: &[PathBuf],
    defines: &[String],
) -> Result<(SourceMap, Vec<ParseResult>), CliError> {
    let mut sm = SourceMap::new();
    let mut table = MacroTable::default();
    for d in defines {
        let (name, value) = match d.split_once('=') {
            Some((n, v)) => (n.to_string(), v.to_string()),
            None => (d.clone(), String::new()),
        };
        if name.is_empty() {
            return Err(CliError::usage(format!("bad define `{d}`")));
        }
        let fid = sm.add_file(format!("<define:{name}>"), value);
        let toks = tokenize(&sm, fid);
        if !toks.diagnostics.is_empty() {
            return Err(CliError::usage(format!("define `{name}` does not tokenize")));
        }
        table.define(name, toks.tokens);
    }
    let mut parsed = Vec::new();
    for path in files {
        let text = read_file(path)?;
        let fid = sm.add_file(path.display().to_string(), text);
        parsed.push(parse_source(&sm, fid, &table));
    }
    Ok((sm, parsed))
}

fn cmd_lint(
    files: Vec<PathBuf>,
    format: &str,
    deny_warnings: bool,
    rules: Vec<String>,
    defines: Vec<String>,
) -> Result<u8, CliError> {
    let mut config = LintConfig::new();
    config.deny_warnings = deny_warnings;
    for r in &rules {
        config.parse_rule_arg(r).map_err(CliError::Usage)?;
    }
    let (sm, parsed) = parse_all(&files, &defines)?;
    let refs: Vec<&ParseResult> = parsed.iter().collect();
    let map = build_drive_map(&refs);
    let diags = lint(&refs, &map, &config);
    let fmt = if format == "json" { RenderFormat::Json } else { RenderFormat::Text };
    print_bytes(&render_diagnostics(&diags, &sm, fmt))?;
    Ok(if diags.iter().any(|d| d.severity == Severity::Error) { 1 } else { 0 })
}

fn cmd_hier_check(manifest_path: PathBuf, files: Vec<PathBuf>) -> Result<u8, CliError> {
    let bytes = std::fs::read(&manifest_path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", manifest_path.display())))?;
    let manifest = load_manifest(&bytes).map_err(|e| CliError::usage(e.to_string()))?;
    let (sm, parsed) = parse_all(&files, &[])?;
    let refs: Vec<&ParseResult> = parsed.iter().collect();
    let report = check(&manifest, &refs, &sm);
    print_bytes(&render_diagnostics(&report.diagnostics, &sm, RenderFormat::Text))?;
    println!("{}", if report.pass { "PASS" } else { "FAIL" });
    Ok(if report.pass { 0 } else { 1 })
}

fn map_sim_error(e: SimError) -> Result<u8, CliError> {
    match e {
        // Design findings: report and exit 1.
        SimError::CombinationalCycle(_)
        | SimError::Instability
        | SimError::MultiClock(_)
        | SimError::AmbiguousClock(_)
        | SimError::ClockNotTopInput(_)
        | SimError::UnresolvedInstance { .. }
        | SimError::PortCountMismatch { .. }
        | SimError::UnknownPort { .. }
        | SimError::InoutUnsupported(_)
        | SimError::OutputConnNotLValue { .. }
        | SimError::DuplicateModule(_)
        | SimError::UnknownIdent(_, _)
        | SimError::NonConstWidth(_)
        | SimError::WidthTooLarge(_, _) => {
            eprintln!("error: {e}");
            Ok(1)
        }
        // Everything else is a usage/configuration problem.
        other => Err(CliError::usage(other.to_string())),
    }
}

fn cmd_sim(
    top: &str,
    cycles: u64,
    stimulus_path: Option<PathBuf>,
    vcd_path: Option<PathBuf>,
    record: Vec<String>,
    files: Vec<PathBuf>,
) -> Result<u8, CliError> {
    if cycles == 0 {
        return Err(CliError::usage("--cycles must be at least 1"));
    }
    let (sm, parsed) = parse_all(&files, &[])?;
    let refs: Vec<&ParseResult> = parsed.iter().collect();
    if refs.iter().any(|p| p.has_errors()) {
        let diags: Vec<_> = refs.iter().flat_map(|p| p.diagnostics.iter().cloned()).collect();
        print_bytes(&render_diagnostics(&diags, &sm, RenderFormat::Text))?;
        eprintln!("error: sources have parse errors");
        return Ok(1);
    }
    let design = match elaborate(&refs, top) {
        Ok(d) => d,
        Err(SimError::UnknownTop(t)) => {
            return Err(CliError::usage(format!("top module `{t}` not found")))
        }
        Err(e) => return map_sim_error(e),
    };
    for w in &design.warnings {
        eprintln!("warning: {}", w.message);
    }
    let stimulus = match stimulus_path {
        Some(path) => {
            let bytes = std::fs::read(&path)
                .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
            Stimulus::from_json(&bytes).map_err(|e| CliError::usage(e.to_string()))?
        }
        None => Stimulus::default(),
    };
    let record = if record.is_empty() { all_signals(&design) } else { record };
    let trace = match run(&design, &stimulus, cycles, &record) {
        Ok(t) => t,
        Err(e @ SimError::Instability) => return map_sim_error(e),
        Err(e) => return Err(CliError::usage(e.to_string())),
    };
    println!("simulated `{top}` for {cycles} cycles ({} signals recorded)", record.len());
    if let Some(path) = vcd_path {
        let text = write_vcd(&trace, top).map_err(|e| CliError::Internal(e.to_string()))?;
        std::fs::write(&path, text)
            .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))?;
        println!("wrote {}", path.display());
    }
    Ok(0)
}

fn cmd_pwm_golden(
    duty: Option<u32>,
    sweep: bool,
    cycles: u64,
    reset_cycles: u64,
    vcd_path: Option<PathBuf>,
    csv_path: Option<PathBuf>,
) -> Result<u8, CliError> {
    if cycles == 0 {
        return Err(CliError::usage("--cycles must be at least 1"));
    }
    let config = PwmConfig::default();
    let schedule = match (duty, sweep) {
        (Some(d), false) => {
            config.check_duty(d).map_err(|e| CliError::usage(e.to_string()))?;
            DutySchedule::constant(d)
        }
        (None, true) => DutySchedule::sweep(&config, cycles),
        (None, false) => return Err(CliError::usage("choose --duty D or --sweep")),
        (Some(_), true) => unreachable!("clap conflict"),
    };
    let trace = run_golden(&config, &schedule, reset_cycles, cycles)
        .map_err(|e| CliError::usage(e.to_string()))?;
    write_trace_outputs(&trace, "pwm_golden", vcd_path, csv_path)
}

fn write_trace_outputs(
    trace: &Trace,
    top: &str,
    vcd_path: Option<PathBuf>,
    csv_path: Option<PathBuf>,
) -> Result<u8, CliError> {
    let mut wrote = false;
    if let Some(path) = &vcd_path {
        let text = write_vcd(trace, top).map_err(|e| CliError::Internal(e.to_string()))?;
        std::fs::write(path, text)
            .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))?;
        println!("wrote {}", path.display());
        wrote = true;
    }
    if let Some(path) = &csv_path {
        std::fs::write(path, trace.to_csv())
            .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))?;
        println!("wrote {}", path.display());
        wrote = true;
    }
    if !wrote {
        print!("{}", trace.to_csv());
    }
    Ok(0)
}

fn cmd_verify_pwm(
    files: Vec<PathBuf>,
    top: &str,
    cycles: u64,
    duties: &str,
    reset_cycles: u64,
    counter_map: &str,
) -> Result<u8, CliError> {
    if cycles == 0 {
        return Err(CliError::usage("--cycles must be at least 1"));
    }
    let duties: Vec<u32> = duties
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<u32>().map_err(|_| CliError::usage(format!("bad duty `{s}`"))))
        .collect::<Result<_, _>>()?;
    if duties.is_empty() {
        return Err(CliError::usage("--duties needs at least one value"));
    }
    let config = PwmConfig::default();
    for &d in &duties {
        config.check_duty(d).map_err(|e| CliError::usage(e.to_string()))?;
    }

    let (sm, parsed) = parse_all(&files, &[])?;
    let refs: Vec<&ParseResult> = parsed.iter().collect();
    if refs.iter().any(|p| p.has_errors()) {
        let diags: Vec<_> = refs.iter().flat_map(|p| p.diagnostics.iter().cloned()).collect();
        print_bytes(&render_diagnostics(&diags, &sm, RenderFormat::Text))?;
        eprintln!("error: sources have parse errors");
        return Ok(1);
    }
    let design = match elaborate(&refs, top) {
        Ok(d) => d,
        Err(SimError::UnknownTop(t)) => {
            return Err(CliError::usage(format!("top module `{t}` not found")))
        }
        Err(e) => return map_sim_error(e),
    };

    let mut map: Vec<(String, String)> =
        vec![("pwm".into(), "pwm".into()), ("pwm_n".into(), "pwm_n".into())];
    for pair in counter_map.split(',').filter(|s| !s.trim().is_empty()) {
        let (golden, actual) = pair
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("bad counter-map entry `{pair}`")))?;
        map.push((golden.trim().to_string(), actual.trim().to_string()));
    }
    let record: Vec<String> = map.iter().map(|(_, a)| a.clone()).collect();

    let mut failures = 0usize;
    for &duty in &duties {
        let stimulus = Stimulus { reset_cycles, ..Stimulus::default() }
            .write("en", 0, 1)
            .write("duty", 0, duty as u64);
        let trace = match run(&design, &stimulus, cycles, &record) {
            Ok(t) => t,
            Err(e @ SimError::Instability) => return map_sim_error(e),
            Err(e) => return Err(CliError::usage(e.to_string())),
        };
        let golden = run_golden(&config, &DutySchedule::constant(duty), reset_cycles, cycles)
            .map_err(|e| CliError::usage(e.to_string()))?;
        let report =
            compare_traces(&golden, &trace, &map).map_err(|e| CliError::usage(e.to_string()))?;
        if report.is_empty() {
            println!("duty {duty:3}: PASS ({} signals x {cycles} cycles)", map.len());
        } else {
            failures += 1;
            println!("duty {duty:3}: FAIL ({} mismatched samples)", report.total_mismatches);
            for m in &report.entries {
                println!(
                    "  signal `{}` first differs at cycle {} (reference {}, design {})",
                    m.signal, m.first_cycle, m.expected, m.actual
                );
            }
        }
    }
    Ok(if failures == 0 { 0 } else { 1 })
}

fn cmd_pipeline(config_path: PathBuf) -> Result<u8, CliError> {
    let bytes = std::fs::read(&config_path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", config_path.display())))?;
    let config = SessionConfig::from_json(&bytes).map_err(|e| CliError::usage(e.to_string()))?;
    let log = run_session(&config).map_err(|e| CliError::usage(e.to_string()))?;
    for a in &log.attempts {
        println!(
            "{} iteration {}: {:?} ({} diagnostics)",
            a.module,
            a.iteration,
            a.verdict,
            a.diagnostics.len()
        );
    }
    use hdlv_core::orchestrator::FinalVerdict;
    println!("session: {:?}", log.final_verdict);
    Ok(match log.final_verdict {
        FinalVerdict::Converged => 0,
        _ => 1,
    })
}

fn print_bytes(bytes: &[u8]) -> Result<(), CliError> {
    use std::io::Write;
    std::io::stdout()
        .write_all(bytes)
        .map_err(|e| CliError::Internal(format!("stdout: {e}")))
}
