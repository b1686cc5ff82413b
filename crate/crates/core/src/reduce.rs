//! Slice-driven test-suite reduction.
//!
//! Failing tests are always kept. A passing test is kept iff, on the original
//! program, it executes at least one assignment or print that survives in the
//! slice. Branch and loop headers are not counted: a test that only evaluates
//! a guard of the sliced code and then skips its body exercises none of the
//! sliced computation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::{run_test, Program};
use crate::slicer::{surviving_statements, SliceReport};
use crate::suite::{TestSuite, Verdict};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub kept: Vec<String>,
    pub dropped: Vec<String>,
    pub kept_failing: usize,
    pub kept_passing: usize,
    pub reduction_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReduceError {
    #[error("slice was taken from a {slice}-line program, but this program has {program} lines")]
    MismatchedSlice { slice: usize, program: usize },
    #[error("the suite has no failing test on this program")]
    NoFailingTests,
}

/// Drops the tests that exercise nothing the slice kept.
pub fn reduce_suite(
    program: &Program,
    suite: &TestSuite,
    slice: &SliceReport,
    step_budget: u64,
) -> Result<(TestSuite, ReductionReport), ReduceError> {
    if slice.original_size != program.len() {
        return Err(ReduceError::MismatchedSlice { slice: slice.original_size, program: program.len() });
    }
    let relevant = surviving_statements(program, slice);
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    let mut kept_failing = 0;
    for t in suite {
        let (verdict, r) = run_test(program, t, step_budget);
        let keep = verdict == Verdict::Fail || !r.covered_lines.is_disjoint(&relevant);
        if keep {
            kept_failing += usize::from(verdict == Verdict::Fail);
            kept.push(t.name.clone());
        } else {
            dropped.push(t.name.clone());
        }
    }
    if kept_failing == 0 {
        return Err(ReduceError::NoFailingTests);
    }
    let reduced = suite.filter(|t| kept.contains(&t.name));
    let mut report =
        ReductionReport { kept_passing: kept.len() - kept_failing, kept, dropped, kept_failing, reduction_rate: 0.0 };
    report.reduction_rate = reduction_rate(&report);
    Ok((reduced, report))
}

/// `|kept| / |original|`.
pub fn reduction_rate(report: &ReductionReport) -> f64 {
    let original = report.kept.len() + report.dropped.len();
    assert!(original > 0, "reduction rate of an empty suite is undefined");
    report.kept.len() as f64 / original as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::DEFAULT_STEP_BUDGET;
    use crate::slicer::{orbs_slice, SlicingCriterion};
    use crate::suite::TestCase;
    use std::collections::BTreeSet;

    fn rate(kept: usize, total: usize) -> f64 {
        reduction_rate(&ReductionReport {
            kept: (0..kept).map(|i| i.to_string()).collect(),
            dropped: (kept..total).map(|i| i.to_string()).collect(),
            kept_failing: 1,
            kept_passing: kept - 1,
            reduction_rate: 0.0,
        })
    }

    #[test]
    fn rate_examples() {
        assert!((rate(52, 2198) - 0.0237).abs() < 5e-5);
        assert_eq!(rate(7, 7), 1.0);
        assert_eq!(rate(13, 52), 0.25);
    }

    fn two_features() -> (Program, TestSuite) {
        let src = "\
if op == 1 {
  r = a + b
  print r
}
if op == 2 {
  r = a - b
  print r
}";
        // Feature 1 is correct; feature 2 should subtract but the fixture
        // asks for a + b on op 1 only, so make op 1's expectation wrong.
        let p = Program::parse(src).unwrap();
        let s = TestSuite::new(vec![
            TestCase::new("add_bad", [("op", 1), ("a", 2), ("b", 2)], ["5"]),
            TestCase::new("add_ok", [("op", 1), ("a", 1), ("b", 2)], ["3"]),
            TestCase::new("sub_1", [("op", 2), ("a", 5), ("b", 2)], ["3"]),
            TestCase::new("sub_2", [("op", 2), ("a", 1), ("b", 1)], ["0"]),
        ])
        .unwrap()
        .classified(&p, DEFAULT_STEP_BUDGET);
        (p, s)
    }

    #[test]
    fn tests_of_sliced_away_code_are_dropped() {
        let (p, s) = two_features();
        let failing: Vec<_> = s.failing().cloned().collect();
        let slice = orbs_slice(&p, &SlicingCriterion::output(failing, 3, DEFAULT_STEP_BUDGET)).unwrap();
        // The first block's `}` and the second block minus its `}` go; the
        // surviving `}` closes the first block.
        assert_eq!(slice.deleted_lines, BTreeSet::from([4, 5, 6, 7]));
        let (reduced, report) = reduce_suite(&p, &s, &slice.report(), DEFAULT_STEP_BUDGET).unwrap();
        assert_eq!(report.kept, ["add_bad", "add_ok"]);
        assert_eq!(report.dropped, ["sub_1", "sub_2"]);
        assert_eq!((report.kept_failing, report.kept_passing), (1, 1));
        assert_eq!(report.reduction_rate, 0.5);
        assert_eq!(reduced.names(), report.kept);
    }

    #[test]
    fn failing_tests_are_kept_regardless_of_coverage() {
        let (p, s) = two_features();
        // A slice report that deletes every statement line.
        let everything = SliceReport {
            deleted_lines: p.indices(),
            oracle_calls: 0,
            accepted_deletions: 0,
            slice_size: 0,
            original_size: p.len(),
        };
        let (_, report) = reduce_suite(&p, &s, &everything, DEFAULT_STEP_BUDGET).unwrap();
        assert_eq!(report.kept, ["add_bad"]);
    }

    #[test]
    fn mismatched_slice_is_rejected() {
        let (p, s) = two_features();
        let wrong = SliceReport {
            deleted_lines: BTreeSet::new(),
            oracle_calls: 0,
            accepted_deletions: 0,
            slice_size: 3,
            original_size: 3,
        };
        assert_eq!(
            reduce_suite(&p, &s, &wrong, DEFAULT_STEP_BUDGET).unwrap_err(),
            ReduceError::MismatchedSlice { slice: 3, program: 8 }
        );
    }
}
