//! MiniLang: a line-oriented imperative toy language with a tree-walking
//! interpreter that records per-line coverage and observation traces.
//!
//! ```text
//! x = <expr>          if <expr> {        } else {        }
//! while <expr> {      print <expr>       # comment       (blank)
//! ```
//!
//! Values are 64-bit signed integers. Comparisons and logical operators
//! yield 1 or 0, and any nonzero value is true in a condition.

mod interp;
mod program;
pub mod syntax;

use thiserror::Error;

pub use interp::{
    run, run_source, ExecutionResult, Inputs, Observation, Observed, RunStatus, Trajectory, DEFAULT_STEP_BUDGET,
    PRINT_CHANNEL,
};
pub use program::{LineKind, ParseError, Program, SourceLine, SYNTHETIC_INDEX};

use crate::slicer::CriterionMode;
use crate::suite::{TestCase, Verdict};

/// Runs one test: it passes iff execution finishes normally and prints
/// exactly the expected lines.
pub fn run_test(program: &Program, test: &TestCase, step_budget: u64) -> (Verdict, ExecutionResult) {
    let result = run(program, &test.inputs, step_budget);
    let verdict = if result.status == RunStatus::Ok && result.printed == test.expected_output {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    (verdict, result)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstrumentError {
    #[error("slicing criterion names line {0}, which is not in the program")]
    UnknownLine(usize),
}

/// Adds the observation probe for a slicing criterion.
///
/// In variable mode an `observe` line is inserted immediately before the
/// criterion line; it carries [`SYNTHETIC_INDEX`] and records values under
/// the criterion line's index. In output mode the text is unchanged and every
/// `print` is mirrored into the trajectory instead.
pub fn instrument(program: &Program, mode: &CriterionMode) -> Result<Program, InstrumentError> {
    match mode {
        CriterionMode::Output => {
            let mut p = program.clone();
            p.set_mirror_prints(true);
            Ok(p)
        }
        CriterionMode::Variable { name, line } => {
            let pos = program.position_of(*line).ok_or(InstrumentError::UnknownLine(*line))?;
            let indent: String = program.lines()[pos].text.chars().take_while(|c| c.is_whitespace()).collect();
            let probe = (SYNTHETIC_INDEX, format!("{indent}observe {name}"));
            // Inserting a simple statement before an existing line cannot
            // unbalance the block structure.
            Ok(program.insert(pos, probe).expect("probe insertion preserves structure"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::suite::TestCase;

    fn doubling() -> Program {
        Program::parse("x = in1\ny = x * 2\nprint y").unwrap()
    }

    #[test]
    fn run_test_verdicts() {
        let p = doubling();
        let pass = TestCase::new("t", [("in1", 3)], ["6"]);
        assert_eq!(run_test(&p, &pass, 100).0, Verdict::Pass);
        let wrong = TestCase::new("t", [("in1", 3)], ["7"]);
        assert_eq!(run_test(&p, &wrong, 100).0, Verdict::Fail);
        let buggy = Program::parse("x = in1\ny = x + 2\nprint y").unwrap();
        let (v, r) = run_test(&buggy, &pass, 100);
        assert_eq!(v, Verdict::Fail);
        assert_eq!(r.printed, ["5"]);
    }

    #[test]
    fn variable_probe_goes_before_the_line() {
        let p = instrument(&doubling(), &CriterionMode::Variable { name: "y".into(), line: 3 }).unwrap();
        let idx: Vec<_> = p.lines().iter().map(|l| l.index).collect();
        assert_eq!(idx, [1, 2, 0, 3]);
        assert_eq!(p.lines()[2].kind, LineKind::Observe);
        let r = run(&p, &[("in1".to_string(), 3)].into(), 100);
        assert_eq!(r.observations.entries, [Observation { line: 3, name: "y".into(), value: Observed::Value(6) }]);
        assert_eq!(r.covered_lines, [1, 2, 3].into());
    }

    #[test]
    fn output_mode_mirrors_prints() {
        let p = instrument(&doubling(), &CriterionMode::Output).unwrap();
        assert_eq!(p.source(), doubling().source());
        let r = run(&p, &[("in1".to_string(), 3)].into(), 100);
        assert_eq!(
            r.observations.entries,
            [Observation { line: 3, name: PRINT_CHANNEL.into(), value: Observed::Value(6) }]
        );
    }

    #[test]
    fn unknown_line_is_rejected() {
        let e = instrument(&doubling(), &CriterionMode::Variable { name: "y".into(), line: 99 });
        assert_eq!(e.unwrap_err(), InstrumentError::UnknownLine(99));
    }

    #[test]
    fn observing_an_unbound_variable_records_a_sentinel() {
        let p = Program::parse("x = 1\nprint x").unwrap();
        let p = instrument(&p, &CriterionMode::Variable { name: "q".into(), line: 2 }).unwrap();
        let r = run(&p, &Inputs::new(), 100);
        assert_eq!(r.status, RunStatus::Ok);
        assert_eq!(r.observations.entries[0].value, Observed::Unbound);
    }
}
