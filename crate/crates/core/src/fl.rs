//! Spectrum-based fault localization with the Ochiai coefficient.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::{run_test, Program};
use crate::slicer::SliceReport;
use crate::suite::{TestSuite, Verdict};

/// Per-test line coverage together with each test's verdict.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CoverageMatrix {
    pub tests: Vec<(String, Verdict)>,
    pub rows: BTreeMap<usize, BTreeSet<String>>,
}

impl CoverageMatrix {
    pub fn total_failing(&self) -> usize {
        self.tests.iter().filter(|(_, v)| *v == Verdict::Fail).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    FullSuite,
    ReducedSuite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suspicious {
    pub line: usize,
    pub score: f64,
}

/// Lines ranked by descending score, ties broken by ascending line index.
/// Zero-score lines never appear.
#[derive(Debug, Clone, PartialEq)]
pub struct SuspiciousList {
    pub entries: Vec<Suspicious>,
    pub provenance: Provenance,
    pub filtered_by_slice: bool,
}

impl SuspiciousList {
    /// 1-based rank of `line`, if present.
    pub fn rank_of(&self, line: usize) -> Option<usize> {
        self.entries.iter().position(|e| e.line == line).map(|p| p + 1)
    }

    pub fn lines(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.line).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// JSON array of `{"line", "score"}` objects in rank order.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("suspicious lists always serialize")
    }

    /// Reads a list written by [`SuspiciousList::to_json`] and re-establishes
    /// the ordering invariant.
    pub fn from_json(text: &str, provenance: Provenance) -> Result<SuspiciousList, serde_json::Error> {
        let mut entries: Vec<Suspicious> = serde_json::from_str(text)?;
        entries.retain(|e| e.score > 0.0);
        sort_entries(&mut entries);
        Ok(SuspiciousList { entries, provenance, filtered_by_slice: false })
    }
}

fn sort_entries(entries: &mut [Suspicious]) {
    entries.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.line.cmp(&b.line)));
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FlError {
    #[error("invalid spectrum counts: e_f={e_f}, e_p={e_p}, total_f={total_f}")]
    InvalidCounts { e_f: usize, e_p: usize, total_f: usize },
    #[error("the suite has no failing test on this program")]
    NoFailingTests,
}

/// Runs every test and records its verdict and covered lines.
pub fn build_spectrum(program: &Program, suite: &TestSuite, step_budget: u64) -> CoverageMatrix {
    let mut m = CoverageMatrix::default();
    for t in suite {
        let (verdict, r) = run_test(program, t, step_budget);
        m.tests.push((t.name.clone(), verdict));
        for line in r.covered_lines {
            m.rows.entry(line).or_default().insert(t.name.clone());
        }
    }
    m
}

/// `e_f / sqrt(total_f * (e_f + e_p))`, or 0 when no failing test covers
/// the line.
pub fn ochiai_score(e_f: usize, e_p: usize, total_f: usize) -> Result<f64, FlError> {
    if total_f == 0 || e_f > total_f {
        return Err(FlError::InvalidCounts { e_f, e_p, total_f });
    }
    if e_f == 0 {
        return Ok(0.0);
    }
    Ok(e_f as f64 / ((total_f * (e_f + e_p)) as f64).sqrt())
}

/// Ranks the executable lines of `program` by Ochiai suspiciousness over
/// `suite`. With `slice_filter`, lines the slice deleted are dropped.
pub fn localize(
    program: &Program,
    suite: &TestSuite,
    slice_filter: Option<&SliceReport>,
    step_budget: u64,
    provenance: Provenance,
) -> Result<SuspiciousList, FlError> {
    let spectrum = build_spectrum(program, suite, step_budget);
    let total_f = spectrum.total_failing();
    if total_f == 0 {
        return Err(FlError::NoFailingTests);
    }
    let failing: BTreeSet<&str> =
        spectrum.tests.iter().filter(|(_, v)| *v == Verdict::Fail).map(|(n, _)| n.as_str()).collect();
    let mut entries = Vec::new();
    for (&line, covering) in &spectrum.rows {
        if slice_filter.is_some_and(|s| s.deleted_lines.contains(&line)) {
            continue;
        }
        let e_f = covering.iter().filter(|n| failing.contains(n.as_str())).count();
        let e_p = covering.len() - e_f;
        let score = ochiai_score(e_f, e_p, total_f)?;
        if score > 0.0 {
            entries.push(Suspicious { line, score });
        }
    }
    sort_entries(&mut entries);
    Ok(SuspiciousList { entries, provenance, filtered_by_slice: slice_filter.is_some() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::DEFAULT_STEP_BUDGET;
    use crate::suite::TestCase;

    #[test]
    fn ochiai_examples() {
        assert_eq!(ochiai_score(1, 0, 1).unwrap(), 1.0);
        assert_eq!(ochiai_score(0, 5, 1).unwrap(), 0.0);
        assert_eq!(ochiai_score(1, 3, 1).unwrap(), 0.5);
        assert_eq!(ochiai_score(0, 0, 2).unwrap(), 0.0);
        assert!(ochiai_score(1, 0, 0).is_err());
        assert!(ochiai_score(3, 0, 2).is_err());
    }

    #[test]
    fn spectrum_rows() {
        let p = Program::parse("x = in1\nprint x").unwrap();
        let s = TestSuite::new(vec![TestCase::new("t", [("in1", 1)], ["1"])]).unwrap();
        let m = build_spectrum(&p, &s, DEFAULT_STEP_BUDGET);
        assert_eq!(m.rows.len(), 2);
        assert_eq!(m.rows[&1], BTreeSet::from(["t".to_string()]));
        assert_eq!(m.tests, [("t".to_string(), Verdict::Pass)]);
        assert_eq!(build_spectrum(&p, &TestSuite::default(), 10), CoverageMatrix::default());
    }

    fn abs_fixture() -> (Program, TestSuite) {
        // Line 3 should be `y = 0 - x`.
        let p = Program::parse("y = in1\nif in1 < 0 {\ny = 0 + in1\n}\nprint y").unwrap();
        let s = TestSuite::new(vec![
            TestCase::new("neg", [("in1", -2)], ["2"]),
            TestCase::new("pos", [("in1", 2)], ["2"]),
            TestCase::new("zero", [("in1", 0)], ["0"]),
        ])
        .unwrap();
        (p, s)
    }

    #[test]
    fn fault_covered_only_by_failing_ranks_first() {
        let (p, s) = abs_fixture();
        let sl = localize(&p, &s, None, DEFAULT_STEP_BUDGET, Provenance::FullSuite).unwrap();
        assert_eq!(sl.entries[0], Suspicious { line: 3, score: 1.0 });
        assert_eq!(sl.rank_of(3), Some(1));
        // Lines 1, 2, 5 tie at 1/sqrt(3) and fall back to index order.
        assert_eq!(sl.lines(), [3, 1, 2, 5]);
    }

    #[test]
    fn slice_filter_drops_deleted_lines_and_keeps_order() {
        let (p, s) = abs_fixture();
        let full = localize(&p, &s, None, DEFAULT_STEP_BUDGET, Provenance::FullSuite).unwrap();
        let report = SliceReport {
            deleted_lines: BTreeSet::from([3]),
            oracle_calls: 0,
            accepted_deletions: 1,
            slice_size: 4,
            original_size: 5,
        };
        let f = localize(&p, &s, Some(&report), DEFAULT_STEP_BUDGET, Provenance::FullSuite).unwrap();
        let expected: Vec<_> = full.entries.iter().filter(|e| e.line != 3).cloned().collect();
        assert_eq!(f.entries, expected);
        assert!(f.filtered_by_slice);
    }

    #[test]
    fn no_failing_tests_is_an_error() {
        let p = Program::parse("print 1").unwrap();
        let s = TestSuite::new(vec![TestCase::new("a", [], ["1"])]).unwrap();
        assert_eq!(localize(&p, &s, None, 100, Provenance::FullSuite), Err(FlError::NoFailingTests));
    }

    #[test]
    fn json_round_trip() {
        let (p, s) = abs_fixture();
        let sl = localize(&p, &s, None, DEFAULT_STEP_BUDGET, Provenance::FullSuite).unwrap();
        let back = SuspiciousList::from_json(&sl.to_json(), Provenance::FullSuite).unwrap();
        assert_eq!(back.entries, sl.entries);
    }
}
