//! Toolchain for working with machine-generated Verilog: a recovering
//! frontend, lint rules targeting the usual generation mistakes, design
//! hierarchy conformance checks, a cycle-accurate two-state simulator, a
//! three-phase PWM reference model, and a generate/check/feedback session
//! driver.

pub mod ast;
pub mod diag;
pub mod hierarchy;
pub mod lint;
pub mod orchestrator;
pub mod parser;
pub mod pretty;
pub mod preprocess;
pub mod pwm;
pub mod sim;
pub mod source;
pub mod token;
pub mod vcd;

pub use ast::{structural_eq, Ast};
pub use hierarchy::{check as hier_check, load_manifest, DesignManifest, HierReport, ManifestError};
pub use lint::{build_drive_map, lint, DriveMap, LintConfig, RuleSetting};
pub use diag::{render_diagnostics, Diagnostic, RenderFormat, RuleCode, Severity};
pub use orchestrator::{build_prompt, extract_code, run_session, RoleConfig, SessionConfig, SessionError, SessionLog};
pub use parser::{parse_source, parse_text, ParseResult};
pub use pretty::{pretty_print, PrettyError};
pub use preprocess::MacroTable;
pub use pwm::{compare_traces, pwm_outputs, pwm_step, run_golden, DutySchedule, MismatchReport, PwmConfig, PwmInputs, PwmOutputs, PwmState};
pub use sim::{elaborate, run, ElaboratedDesign, SimError, Stimulus, Trace, TraceSignal};
pub use source::{FileId, SourceMap, Span};
pub use vcd::{read_vcd, write_vcd, VcdError};
