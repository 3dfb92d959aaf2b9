//! Trace events recorded per task execution.

use std::io::{self, Write};

/// One executed task: worker, task id, codelet, wall-clock interval in
/// microseconds since engine start. Intervals are half-open [start, end).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TraceEvent {
    pub worker: usize,
    pub task: u32,
    pub codelet: u32,
    pub start_us: u64,
    pub end_us: u64,
}

/// Write `worker task codelet start end` lines sorted by start time
/// (ties broken by task id, so re-export of the same trace is identical).
pub fn export_trace<W: Write>(
    w: &mut W,
    events: &[TraceEvent],
    codelet_names: &[String],
) -> io::Result<()> {
    let mut sorted: Vec<&TraceEvent> = events.iter().collect();
    sorted.sort_by_key(|e| (e.start_us, e.task));
    for e in sorted {
        writeln!(
            w,
            "{} {} {} {} {}",
            e.worker, e.task, codelet_names[e.codelet as usize], e.start_us, e.end_us
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn export_sorts_by_start_time() {
        let names = vec!["a".to_string(), "b".to_string()];
        let events = vec![
            TraceEvent {
                worker: 1,
                task: 2,
                codelet: 1,
                start_us: 50,
                end_us: 60,
            },
            TraceEvent {
                worker: 0,
                task: 0,
                codelet: 0,
                start_us: 0,
                end_us: 10,
            },
            TraceEvent {
                worker: 0,
                task: 1,
                codelet: 0,
                start_us: 10,
                end_us: 45,
            },
        ];
        let mut out = Vec::new();
        export_trace(&mut out, &events, &names).unwrap();
        let text = String::from_utf8(out.clone()).unwrap();
        assert_eq!(text, "0 0 a 0 10\n0 1 a 10 45\n1 2 b 50 60\n");
        let mut out2 = Vec::new();
        export_trace(&mut out2, &events, &names).unwrap();
        assert_eq!(out, out2);
    }

    #[test]
    fn empty_trace_exports_empty() {
        let mut out = Vec::new();
        export_trace(&mut out, &[], &[]).unwrap();
        assert!(out.is_empty());
    }
}
