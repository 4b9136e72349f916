use std::io::{BufRead, Write};
use std::path::Path;

use super::{CostConfig, CostDetector, CostSignal};
use crate::action::{HorizontalAction, Move};
use crate::error::{Error, Result};

pub const TRACE_HEADER: &str = "step,move,rotate";
pub const COST_REPORT_HEADER: &str = "step,shaking,spin_count,combined";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceStep {
    pub step: u64,
    pub mv: Move,
    pub rotate: HorizontalAction,
}

/// A recorded sequence of (move, rotate) actions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ActionTrace {
    pub steps: Vec<TraceStep>,
}

impl ActionTrace {
    pub fn from_actions(actions: impl IntoIterator<Item = (Move, HorizontalAction)>) -> Self {
        ActionTrace {
            steps: actions
                .into_iter()
                .enumerate()
                .map(|(i, (mv, rotate))| TraceStep {
                    step: i as u64,
                    mv,
                    rotate,
                })
                .collect(),
        }
    }

    pub fn from_rotations(rotations: &[HorizontalAction]) -> Self {
        Self::from_actions(rotations.iter().map(|&r| (Move::NoMove, r)))
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(std::io::BufReader::new(file), path)
    }

    /// Parses the `step,move,rotate` format. `origin` only labels errors.
    pub fn parse(reader: impl BufRead, origin: &Path) -> Result<Self> {
        let parse_err = |line: usize, reason: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            reason,
        };
        let mut lines = reader.lines().enumerate();
        match lines.next() {
            Some((_, Ok(header))) if header.trim() == TRACE_HEADER => {}
            Some((_, Ok(header))) => {
                return Err(parse_err(
                    1,
                    format!("expected header `{TRACE_HEADER}`, found `{}`", header.trim()),
                ))
            }
            Some((_, Err(e))) => return Err(Error::io(origin, e)),
            None => return Err(parse_err(1, "missing header line".into())),
        }

        let mut steps: Vec<TraceStep> = Vec::new();
        for (i, line) in lines {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::io(origin, e))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let [step, mv, rotate] = fields[..] else {
                return Err(parse_err(
                    lineno,
                    format!("expected 3 fields, found {}", fields.len()),
                ));
            };
            let step: u64 = step
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad step index `{step}`")))?;
            let mv = Move::from_symbol(mv)
                .ok_or_else(|| parse_err(lineno, format!("bad move `{mv}` (expected F, B or N)")))?;
            let rotate = HorizontalAction::from_symbol(rotate).ok_or_else(|| {
                parse_err(lineno, format!("bad rotate `{rotate}` (expected L, R or N)"))
            })?;
            if let Some(prev) = steps.last() {
                if step <= prev.step {
                    return Err(parse_err(
                        lineno,
                        format!("step {step} does not follow step {}", prev.step),
                    ));
                }
            }
            steps.push(TraceStep { step, mv, rotate });
        }
        Ok(ActionTrace { steps })
    }

    pub fn write(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "{TRACE_HEADER}")?;
        for s in &self.steps {
            writeln!(out, "{},{},{}", s.step, s.mv.symbol(), s.rotate.symbol())?;
        }
        Ok(())
    }
}

/// Runs the streaming detectors over a whole trace, one signal per step.
pub fn trace_costs(trace: &ActionTrace, config: &CostConfig) -> Result<Vec<CostSignal>> {
    let mut detector = CostDetector::new(config)?;
    Ok(trace
        .steps
        .iter()
        .map(|s| detector.step(s.mv, s.rotate))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostSummary {
    pub steps: usize,
    pub mean_shaking: f64,
    pub total_spins: u64,
    pub mean_combined: f64,
}

pub fn summarize(signals: &[CostSignal]) -> CostSummary {
    let n = signals.len();
    let (shaking, spins, combined) = signals.iter().fold((0.0, 0u64, 0.0), |acc, s| {
        (
            acc.0 + s.shaking.value(),
            acc.1 + u64::from(s.spinning),
            acc.2 + s.combined,
        )
    });
    let mean = |total: f64| if n == 0 { 0.0 } else { total / n as f64 };
    CostSummary {
        steps: n,
        mean_shaking: mean(shaking),
        total_spins: spins,
        mean_combined: mean(combined),
    }
}

/// Writes the per-step `step,shaking,spin_count,combined` CSV.
pub fn write_cost_report(
    mut out: impl Write,
    trace: &ActionTrace,
    signals: &[CostSignal],
) -> std::io::Result<()> {
    writeln!(out, "{COST_REPORT_HEADER}")?;
    for (step, signal) in trace.steps.iter().zip(signals) {
        writeln!(
            out,
            "{},{},{},{}",
            step.step,
            signal.shaking.value(),
            signal.spinning,
            signal.combined
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use HorizontalAction::{NoOp as N, TurnLeft as L, TurnRight as R};

    fn parse(text: &str) -> Result<ActionTrace> {
        ActionTrace::parse(text.as_bytes(), Path::new("trace.csv"))
    }

    #[test]
    fn warmup_steps_emit_zero_shaking() {
        let trace = ActionTrace::from_rotations(&[L, R, L, R, L, R, L, R]);
        let signals = trace_costs(&trace, &CostConfig::default()).unwrap();
        assert!(signals[..7].iter().all(|s| s.shaking.reversals == 0));
        assert_eq!(signals[7].shaking.reversals, 7);
    }

    #[test]
    fn noop_trace_is_free() {
        let trace = ActionTrace::from_rotations(&[N; 7]);
        let signals = trace_costs(&trace, &CostConfig::default()).unwrap();
        assert_eq!(signals.len(), 7);
        assert!(signals.iter().all(|s| s.combined == 0.0));
    }

    #[test]
    fn empty_trace_gives_no_signals() {
        let signals = trace_costs(&ActionTrace::default(), &CostConfig::default()).unwrap();
        assert!(signals.is_empty());
        assert_eq!(summarize(&signals).mean_shaking, 0.0);
    }

    #[test]
    fn left_then_right_revolutions() {
        let mut rot = vec![L; 5];
        rot.extend([R; 5]);
        let signals = trace_costs(&ActionTrace::from_rotations(&rot), &CostConfig::default()).unwrap();
        let spins: Vec<u32> = signals.iter().map(|s| s.spinning).collect();
        assert_eq!(spins, vec![0, 0, 0, 0, 1, 0, 0, 0, 0, 1]);
    }

    #[test]
    fn parses_well_formed_trace() {
        let t = parse("step,move,rotate\n0,F,L\n1,N,N\n2,B,R\n\n").unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.steps[2].mv, Move::Backward);
        assert_eq!(t.steps[2].rotate, R);
    }

    #[test]
    fn reports_line_of_bad_record() {
        let err = parse("step,move,rotate\n0,F,L\n1,X,N\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let err = parse("step,move,rotate\n0,F\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn header_is_required() {
        assert!(matches!(parse("0,F,L\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse(""), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn steps_must_increase() {
        assert!(matches!(
            parse("step,move,rotate\n3,F,L\n3,N,N\n"),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn write_then_parse() {
        let t = ActionTrace::from_actions([(Move::Forward, L), (Move::NoMove, N), (Move::Backward, R)]);
        let mut buf = Vec::new();
        t.write(&mut buf).unwrap();
        assert_eq!(parse(std::str::from_utf8(&buf).unwrap()).unwrap(), t);
    }
}
