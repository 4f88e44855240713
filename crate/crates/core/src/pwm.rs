//! Behavioral model of the three-phase complementary PWM generator and the
//! trace comparison used to check simulated designs against it.
//!
//! Per phase: a free-running 8-bit counter, a comparator against the
//! inverted duty (`threshold = resolution - duty`, computed one bit wider so
//! duty 0 never fires), an output register, and a dead-time stage (shift
//! register plus output gates). Phases 2 and 3 start when the previous
//! phase's counter reaches one third of the period, held by a set-dominant
//! latch that is transparent in the set cycle.

use thiserror::Error;

use crate::sim::{Trace, TraceSignal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PwmConfig {
    /// Counter width in bits; the resolution is `2^width`.
    pub counter_width: u32,
    /// Dead cycles inserted on each output transition.
    pub dead_cycles: u32,
    /// Counter value at which the next phase starts (one third of the
    /// period, rounded down).
    pub phase_threshold: u32,
}

impl Default for PwmConfig {
    fn default() -> PwmConfig {
        PwmConfig { counter_width: 8, dead_cycles: 4, phase_threshold: 85 }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PwmError {
    #[error("counter width {0} out of range (1..=16)")]
    WidthOutOfRange(u32),
    #[error("phase threshold {0} must lie strictly inside the period")]
    BadPhaseThreshold(u32),
    #[error("dead cycles {0} out of range (max {1})")]
    BadDeadCycles(u32, u32),
    #[error("duty {0} exceeds the resolution {1}")]
    DutyOutOfRange(u32, u32),
}

impl PwmConfig {
    pub fn resolution(&self) -> u32 {
        1 << self.counter_width
    }

    pub fn validate(&self) -> Result<(), PwmError> {
        if self.counter_width == 0 || self.counter_width > 16 {
            return Err(PwmError::WidthOutOfRange(self.counter_width));
        }
        if self.phase_threshold == 0 || self.phase_threshold >= self.resolution() {
            return Err(PwmError::BadPhaseThreshold(self.phase_threshold));
        }
        let max_dead = 63.min(self.resolution() - 1);
        if self.dead_cycles > max_dead {
            return Err(PwmError::BadDeadCycles(self.dead_cycles, max_dead));
        }
        Ok(())
    }

    pub fn check_duty(&self, duty: u32) -> Result<(), PwmError> {
        if duty >= self.resolution() {
            return Err(PwmError::DutyOutOfRange(duty, self.resolution()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PwmInputs {
    /// Active-low reset: `false` resets the generator.
    pub rstn: bool,
    pub enable: bool,
    pub duty: u32,
}

/// Registered state: three counters, the two phase latches, the three
/// output registers, and the three dead-time shift registers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PwmState {
    pub counters: [u32; 3],
    pub phase_latch: [bool; 2],
    pub q: [bool; 3],
    pub shift: [u64; 3],
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PwmOutputs {
    pub pwm: [bool; 3],
    pub pwm_n: [bool; 3],
}

/// Combinational values for the current state and inputs.
#[derive(Debug, Clone, Copy)]
struct Comb {
    raw: [bool; 3],
    run: [bool; 3],
    delayed: [bool; 3],
    gate: bool,
}

fn comb(state: &PwmState, inputs: &PwmInputs, config: &PwmConfig) -> Comb {
    // One bit wider than the counters so duty = 0 yields a comparison the
    // counters can never satisfy.
    let threshold = config.resolution() - inputs.duty;
    let raw = [
        state.counters[0] >= threshold,
        state.counters[1] >= threshold,
        state.counters[2] >= threshold,
    ];
    // Set-dominant latches, transparent in the set cycle: the phase starts
    // counting the same edge its one-third comparator fires.
    let set2 = state.counters[0] == config.phase_threshold;
    let set3 = state.counters[1] == config.phase_threshold;
    let run = [
        true,
        state.phase_latch[0] || set2,
        state.phase_latch[1] || set3,
    ];
    let d = config.dead_cycles;
    let delayed = if d == 0 {
        state.q
    } else {
        [
            state.shift[0] >> (d - 1) & 1 == 1,
            state.shift[1] >> (d - 1) & 1 == 1,
            state.shift[2] >> (d - 1) & 1 == 1,
        ]
    };
    // Outputs park low whenever the generator is reset or disabled.
    let gate = inputs.rstn && inputs.enable;
    Comb { raw, run, delayed, gate }
}

/// Output equations. `pwm` is the registered wave ANDed with its delayed
/// copy; `pwm_n` is the same with both inverted, so the pair cannot be high
/// together by construction.
pub fn pwm_outputs(state: &PwmState, inputs: &PwmInputs, config: &PwmConfig) -> PwmOutputs {
    let c = comb(state, inputs, config);
    let mut out = PwmOutputs::default();
    for k in 0..3 {
        out.pwm[k] = state.q[k] && c.delayed[k] && c.gate;
        out.pwm_n[k] = !state.q[k] && !c.delayed[k] && c.gate;
    }
    out
}

/// Advances one clock edge. Returns the next state and the outputs seen
/// during the evaluated cycle (pre-edge combinational values).
pub fn pwm_step(
    state: &PwmState,
    inputs: &PwmInputs,
    config: &PwmConfig,
) -> (PwmState, PwmOutputs) {
    let outputs = pwm_outputs(state, inputs, config);
    if !inputs.rstn {
        return (PwmState::default(), outputs);
    }
    if !inputs.enable {
        // Counters and latches freeze; registers and shift stages clear so
        // the outputs stay low.
        let mut next = *state;
        next.q = [false; 3];
        next.shift = [0; 3];
        return (next, outputs);
    }
    let c = comb(state, inputs, config);
    let mask = config.resolution() - 1;
    let shift_mask = if config.dead_cycles == 0 { 0 } else { (1u64 << config.dead_cycles) - 1 };
    let mut next = PwmState::default();
    for k in 0..3 {
        next.counters[k] = if c.run[k] { (state.counters[k] + 1) & mask } else { 0 };
        next.q[k] = c.raw[k];
        next.shift[k] = ((state.shift[k] << 1) | state.q[k] as u64) & shift_mask;
    }
    next.phase_latch = [c.run[1], c.run[2]];
    (next, outputs)
}

/// Piecewise-constant duty schedule: (start cycle, duty), first entry at
/// cycle 0.
#[derive(Debug, Clone)]
pub struct DutySchedule {
    steps: Vec<(u64, u32)>,
}

impl DutySchedule {
    pub fn constant(duty: u32) -> DutySchedule {
        DutySchedule { steps: vec![(0, duty)] }
    }

    pub fn new(mut steps: Vec<(u64, u32)>) -> Result<DutySchedule, PwmError> {
        steps.sort_by_key(|s| s.0);
        if steps.first().map(|s| s.0) != Some(0) {
            steps.insert(0, (0, 0));
        }
        Ok(DutySchedule { steps })
    }

    /// The canonical four-step sweep: 0%, 25%, 50%, 75% of the period,
    /// switching every quarter of the run.
    pub fn sweep(config: &PwmConfig, cycles: u64) -> DutySchedule {
        let res = config.resolution();
        let quarter = cycles / 4;
        DutySchedule {
            steps: vec![
                (0, 0),
                (quarter, res / 4),
                (2 * quarter, res / 2),
                (3 * quarter, 3 * res / 4),
            ],
        }
    }

    pub fn duty_at(&self, cycle: u64) -> u32 {
        let mut current = self.steps[0].1;
        for (start, duty) in &self.steps {
            if *start <= cycle {
                current = *duty;
            } else {
                break;
            }
        }
        current
    }

    pub fn max_duty(&self) -> u32 {
        self.steps.iter().map(|s| s.1).max().unwrap_or(0)
    }
}

/// Runs the model and records every state field and both output vectors,
/// sampled after each clock edge like the simulator does.
pub fn run_golden(
    config: &PwmConfig,
    schedule: &DutySchedule,
    reset_cycles: u64,
    cycles: u64,
) -> Result<Trace, PwmError> {
    config.validate()?;
    config.check_duty(schedule.max_duty())?;

    let w = config.counter_width;
    let d = config.dead_cycles.max(1);
    let mut trace = Trace::new(cycles as usize);
    let names: Vec<(String, u32)> = vec![
        ("c1".into(), w),
        ("c2".into(), w),
        ("c3".into(), w),
        ("en2".into(), 1),
        ("en3".into(), 1),
        ("q1".into(), 1),
        ("q2".into(), 1),
        ("q3".into(), 1),
        ("s1".into(), d),
        ("s2".into(), d),
        ("s3".into(), d),
        ("pwm".into(), 3),
        ("pwm_n".into(), 3),
    ];
    for (name, width) in &names {
        trace.add_signal(name, *width);
    }

    let mut state = PwmState::default();
    for t in 0..cycles {
        let inputs = PwmInputs {
            rstn: t >= reset_cycles,
            enable: true,
            duty: schedule.duty_at(t),
        };
        let (next, _) = pwm_step(&state, &inputs, config);
        state = next;
        // Sample after the edge, before the next one: outputs recomputed
        // from the committed state.
        let out = pwm_outputs(&state, &inputs, config);
        let pack = |bits: [bool; 3]| -> u64 {
            bits.iter().enumerate().map(|(i, b)| (*b as u64) << i).sum()
        };
        let row: Vec<u64> = vec![
            state.counters[0] as u64,
            state.counters[1] as u64,
            state.counters[2] as u64,
            state.phase_latch[0] as u64,
            state.phase_latch[1] as u64,
            state.q[0] as u64,
            state.q[1] as u64,
            state.q[2] as u64,
            state.shift[0],
            state.shift[1],
            state.shift[2],
            pack(out.pwm),
            pack(out.pwm_n),
        ];
        trace.push_row(&row);
        let _ = t;
    }
    Ok(trace)
}

// ---------------------------------------------------------------------
// Trace comparison
// ---------------------------------------------------------------------

#[derive(Debug, Error, PartialEq)]
pub enum CompareError {
    #[error("signal `{0}` missing from the {1} trace")]
    MissingSignal(String, &'static str),
    #[error("signal `{expected_name}` width mismatch: expected {expected}, actual {actual}")]
    WidthMismatch { expected_name: String, expected: u32, actual: u32 },
    #[error("trace length mismatch: expected {expected} cycles, actual {actual}")]
    LengthMismatch { expected: usize, actual: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub signal: String,
    pub first_cycle: usize,
    pub expected: u64,
    pub actual: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MismatchReport {
    pub entries: Vec<Mismatch>,
    pub total_mismatches: usize,
}

impl MismatchReport {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Compares mapped signals cycle by cycle. `map` pairs names in the
/// expected trace with names in the actual trace. Structural problems
/// (missing signals, width or length differences) are errors, not
/// mismatches.
pub fn compare_traces(
    expected: &Trace,
    actual: &Trace,
    map: &[(String, String)],
) -> Result<MismatchReport, CompareError> {
    if expected.cycles() != actual.cycles() {
        return Err(CompareError::LengthMismatch {
            expected: expected.cycles(),
            actual: actual.cycles(),
        });
    }
    let mut report = MismatchReport::default();
    for (ename, aname) in map {
        let e: &TraceSignal = expected
            .signal(ename)
            .ok_or_else(|| CompareError::MissingSignal(ename.clone(), "expected"))?;
        let a: &TraceSignal = actual
            .signal(aname)
            .ok_or_else(|| CompareError::MissingSignal(aname.clone(), "actual"))?;
        if e.width != a.width {
            return Err(CompareError::WidthMismatch {
                expected_name: ename.clone(),
                expected: e.width,
                actual: a.width,
            });
        }
        let mut first: Option<usize> = None;
        let mut count = 0usize;
        for t in 0..expected.cycles() {
            if e.values[t] != a.values[t] {
                count += 1;
                if first.is_none() {
                    first = Some(t);
                }
            }
        }
        if let Some(t) = first {
            report.entries.push(Mismatch {
                signal: ename.clone(),
                first_cycle: t,
                expected: e.values[t],
                actual: a.values[t],
            });
            report.total_mismatches += count;
        }
    }
    Ok(report)
}
