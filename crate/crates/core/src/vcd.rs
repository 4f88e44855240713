//! Value Change Dump emission and parsing for [`Trace`]s.
//!
//! The writer emits one timestamp unit per cycle, initial values under
//! `$dumpvars`, and value changes only when a signal differs from its
//! previous sample; dotted signal names become nested scopes. The reader
//! accepts everything the writer produces (plus `$date`/`$comment`
//! sections), reconstructing the per-cycle trace by carrying values
//! forward — the round-trip is exact.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::sim::Trace;

#[derive(Debug, Error, PartialEq)]
pub enum VcdError {
    #[error("cannot write a VCD for an empty trace")]
    EmptyTrace,
    #[error("malformed VCD: {0}")]
    Malformed(String),
}

fn id_code(mut index: usize) -> String {
    // Printable identifier codes, '!'..='~'.
    let mut out = String::new();
    loop {
        out.push(((index % 94) as u8 + b'!') as char);
        index /= 94;
        if index == 0 {
            break;
        }
    }
    out
}

/// Emits `$var` declarations in trace order, opening and closing `$scope`
/// sections as the dotted path changes. Re-entering a scope is legal VCD and
/// keeps declaration order identical to the trace's signal order, which is
/// what makes the read-back exact.
fn write_vars(out: &mut String, trace: &Trace) {
    let mut current: Vec<String> = Vec::new();
    for (i, s) in trace.signals().iter().enumerate() {
        let parts: Vec<&str> = s.name.split('.').collect();
        let (leaf, path) = parts.split_last().expect("non-empty name");
        let shared = current
            .iter()
            .zip(path.iter())
            .take_while(|(a, b)| a.as_str() == **b)
            .count();
        while current.len() > shared {
            current.pop();
            out.push_str("$upscope $end\n");
        }
        for name in &path[shared..] {
            current.push((*name).to_string());
            out.push_str(&format!("$scope module {name} $end\n"));
        }
        out.push_str(&format!("$var wire {} {} {} $end\n", s.width, id_code(i), leaf));
    }
    while current.pop().is_some() {
        out.push_str("$upscope $end\n");
    }
}

fn format_value(value: u64, width: u32, code: &str) -> String {
    if width == 1 {
        format!("{value}{code}")
    } else {
        format!("b{value:b} {code}")
    }
}

/// Serializes a trace. `top` names the outermost scope.
pub fn write_vcd(trace: &Trace, top: &str) -> Result<String, VcdError> {
    if trace.cycles() == 0 || trace.signals().is_empty() {
        return Err(VcdError::EmptyTrace);
    }
    let mut out = String::new();
    out.push_str("$version hdlv sim $end\n");
    out.push_str("$timescale 1ns $end\n");
    out.push_str(&format!("$scope module {top} $end\n"));
    write_vars(&mut out, trace);
    out.push_str("$upscope $end\n");
    out.push_str("$enddefinitions $end\n");

    out.push_str("$dumpvars\n");
    for (i, s) in trace.signals().iter().enumerate() {
        out.push_str(&format_value(s.values[0], s.width, &id_code(i)));
        out.push('\n');
    }
    out.push_str("$end\n");

    let mut last_emitted = 0u64;
    for t in 1..trace.cycles() {
        let mut changes = String::new();
        for (i, s) in trace.signals().iter().enumerate() {
            if s.values[t] != s.values[t - 1] {
                changes.push_str(&format_value(s.values[t], s.width, &id_code(i)));
                changes.push('\n');
            }
        }
        if !changes.is_empty() {
            out.push_str(&format!("#{t}\n"));
            out.push_str(&changes);
            last_emitted = t as u64;
        }
    }
    // A final timestamp pins the trace length even when the tail is quiet.
    let final_t = trace.cycles() as u64 - 1;
    if last_emitted < final_t {
        out.push_str(&format!("#{final_t}\n"));
    }
    Ok(out)
}

/// Parses a VCD produced by [`write_vcd`] back into a trace.
pub fn read_vcd(text: &str) -> Result<Trace, VcdError> {
    let mut tokens = text.split_ascii_whitespace().peekable();
    let mut ids: Vec<(String, String, u32)> = Vec::new(); // (code, full name, width)
    let mut scope_stack: Vec<String> = Vec::new();

    // Header.
    loop {
        let tok = tokens
            .next()
            .ok_or_else(|| VcdError::Malformed("missing $enddefinitions".to_string()))?;
        match tok {
            "$version" | "$date" | "$comment" | "$timescale" => {
                for t in tokens.by_ref() {
                    if t == "$end" {
                        break;
                    }
                }
            }
            "$scope" => {
                let _kind = tokens.next();
                let name = tokens
                    .next()
                    .ok_or_else(|| VcdError::Malformed("scope without a name".to_string()))?;
                scope_stack.push(name.to_string());
                for t in tokens.by_ref() {
                    if t == "$end" {
                        break;
                    }
                }
            }
            "$upscope" => {
                scope_stack.pop();
                for t in tokens.by_ref() {
                    if t == "$end" {
                        break;
                    }
                }
            }
            "$var" => {
                let _ty = tokens.next();
                let width: u32 = tokens
                    .next()
                    .and_then(|w| w.parse().ok())
                    .ok_or_else(|| VcdError::Malformed("bad var width".to_string()))?;
                let code = tokens
                    .next()
                    .ok_or_else(|| VcdError::Malformed("var without id".to_string()))?
                    .to_string();
                let leaf = tokens
                    .next()
                    .ok_or_else(|| VcdError::Malformed("var without name".to_string()))?
                    .to_string();
                for t in tokens.by_ref() {
                    if t == "$end" {
                        break;
                    }
                }
                // Scope depth 1 is the top wrapper, deeper scopes join with
                // dots.
                let name = if scope_stack.len() <= 1 {
                    leaf
                } else {
                    format!("{}.{}", scope_stack[1..].join("."), leaf)
                };
                ids.push((code, name, width));
            }
            "$enddefinitions" => {
                for t in tokens.by_ref() {
                    if t == "$end" {
                        break;
                    }
                }
                break;
            }
            other => {
                return Err(VcdError::Malformed(format!("unexpected header token `{other}`")));
            }
        }
    }

    let index_of: BTreeMap<&str, usize> =
        ids.iter().enumerate().map(|(i, (code, _, _))| (code.as_str(), i)).collect();
    let mut current: Vec<u64> = vec![0; ids.len()];
    let mut rows: Vec<Vec<u64>> = Vec::new();
    let mut now: u64 = 0;

    let flush_until = |t: u64, rows: &mut Vec<Vec<u64>>, current: &[u64]| {
        while (rows.len() as u64) < t {
            rows.push(current.to_vec());
        }
    };

    let apply = |tok: &str, tokens: &mut std::iter::Peekable<std::str::SplitAsciiWhitespace>,
                     current: &mut Vec<u64>|
     -> Result<(), VcdError> {
        if let Some(rest) = tok.strip_prefix('b') {
            let value = u64::from_str_radix(rest, 2)
                .map_err(|_| VcdError::Malformed(format!("bad vector value `{tok}`")))?;
            let code = tokens
                .next()
                .ok_or_else(|| VcdError::Malformed("vector change without id".to_string()))?;
            let idx = *index_of
                .get(code)
                .ok_or_else(|| VcdError::Malformed(format!("unknown id `{code}`")))?;
            current[idx] = value;
        } else {
            let value = match tok.as_bytes()[0] {
                b'0' => 0u64,
                b'1' => 1u64,
                c => return Err(VcdError::Malformed(format!("unsupported value `{}`", c as char))),
            };
            let code = &tok[1..];
            let idx = *index_of
                .get(code)
                .ok_or_else(|| VcdError::Malformed(format!("unknown id `{code}`")))?;
            current[idx] = value;
        }
        Ok(())
    };

    while let Some(tok) = tokens.next() {
        if let Some(ts) = tok.strip_prefix('#') {
            let t: u64 = ts
                .parse()
                .map_err(|_| VcdError::Malformed(format!("bad timestamp `{tok}`")))?;
            flush_until(t, &mut rows, &current);
            now = t;
        } else if tok == "$dumpvars" {
            // Initial values apply at time 0.
        } else if tok == "$end" {
            // End of a dump section.
        } else {
            apply(tok, &mut tokens, &mut current)?;
        }
    }
    flush_until(now + 1, &mut rows, &current);

    let mut trace = Trace::new(rows.len());
    for (_, name, width) in &ids {
        trace.add_signal(name, *width);
    }
    for row in rows {
        trace.push_row(&row);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_trace() -> Trace {
        let mut t = Trace::new(10);
        t.add_signal("clk_q", 1);
        t.add_signal("u_sub.count", 8);
        t.add_signal("steady", 4);
        for i in 0..10u64 {
            t.push_row(&[i % 2, (i * 3) % 256, 7]);
        }
        t
    }

    #[test]
    fn constant_signal_has_one_value_entry() {
        let mut t = Trace::new(10);
        t.add_signal("steady", 4);
        for _ in 0..10 {
            t.push_row(&[9]);
        }
        let text = write_vcd(&t, "top").unwrap();
        let entries = text.matches("b1001 !").count();
        assert_eq!(entries, 1, "{text}");
        // The trailing timestamp pins the length.
        assert!(text.contains("#9"));
    }

    #[test]
    fn toggler_changes_every_cycle() {
        let mut t = Trace::new(5);
        t.add_signal("q", 1);
        for i in 0..5u64 {
            t.push_row(&[i % 2]);
        }
        let text = write_vcd(&t, "top").unwrap();
        for ts in 1..5 {
            assert!(text.contains(&format!("#{ts}\n")), "{text}");
        }
    }

    #[test]
    fn roundtrip_toy() {
        let t = toy_trace();
        let text = write_vcd(&t, "top").unwrap();
        let back = read_vcd(&text).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn scopes_nest_by_dotted_name() {
        let t = toy_trace();
        let text = write_vcd(&t, "pwm_top").unwrap();
        assert!(text.contains("$scope module pwm_top $end"));
        assert!(text.contains("$scope module u_sub $end"));
        assert!(text.contains("$var wire 8 "));
    }

    #[test]
    fn empty_trace_refused() {
        let t = Trace::new(0);
        assert_eq!(write_vcd(&t, "top"), Err(VcdError::EmptyTrace));
    }

    #[test]
    fn golden_trace_roundtrips() {
        let config = crate::pwm::PwmConfig::default();
        let sched = crate::pwm::DutySchedule::sweep(&config, 2048);
        let t = crate::pwm::run_golden(&config, &sched, 4, 2048).unwrap();
        let text = write_vcd(&t, "pwm").unwrap();
        let back = read_vcd(&text).unwrap();
        assert_eq!(t, back);
    }
}
