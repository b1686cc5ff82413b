use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::fl::{localize, Provenance, SuspiciousList};
use crate::lang::Program;
use crate::pipeline::{check_on_full_suite, slice_inputs, FullSuiteCheck};
use crate::project::SliceInputs;
use crate::reduce::reduce_suite;
use crate::repair::{repair, PatchCandidate, RepairConfig, RepairOutcome, Setup};
use crate::slicer::{orbs_slice, SlicingCriterion, DEFAULT_WINDOW};
use crate::suite::TestSuite;

use super::seed::BugInstance;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub window: usize,
    pub repair: RepairConfig,
    pub slice_inputs: SliceInputs,
    /// Drop sliced-away lines from SL_R.
    pub filter_sl_by_slice: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            window: DEFAULT_WINDOW,
            repair: RepairConfig::default(),
            slice_inputs: SliceInputs::FailingOnly,
            filter_sl_by_slice: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatchAudit {
    IdenticalToBaseline,
    DifferentButValid,
    InvalidOnFullSuite,
    NoPatch,
}

impl PatchAudit {
    pub const ALL: [PatchAudit; 4] = [
        PatchAudit::IdenticalToBaseline,
        PatchAudit::DifferentButValid,
        PatchAudit::InvalidOnFullSuite,
        PatchAudit::NoPatch,
    ];

    pub fn label(self) -> &'static str {
        match self {
            PatchAudit::IdenticalToBaseline => "identical-to-baseline",
            PatchAudit::DifferentButValid => "different-but-valid",
            PatchAudit::InvalidOnFullSuite => "invalid-on-full-suite",
            PatchAudit::NoPatch => "no-patch",
        }
    }

    pub fn is_acceptable(self) -> bool {
        matches!(self, PatchAudit::IdenticalToBaseline | PatchAudit::DifferentButValid)
    }
}

/// Classifies a patch against the baseline patch and the full suite on the
/// original program. A patch whose location is missing from the original is
/// invalid.
pub fn audit_setup(
    patch: &PatchCandidate,
    baseline: Option<&PatchCandidate>,
    original: &Program,
    full_suite: &TestSuite,
    step_budget: u64,
) -> PatchAudit {
    if baseline.is_some_and(|b| b.same_edit(patch)) {
        return PatchAudit::IdenticalToBaseline;
    }
    match check_on_full_suite(patch, original, full_suite, step_budget) {
        FullSuiteCheck::Valid => PatchAudit::DifferentButValid,
        FullSuiteCheck::Invalid | FullSuiteCheck::Inapplicable => PatchAudit::InvalidOnFullSuite,
    }
}

#[derive(Debug, Clone)]
pub struct SetupComparison {
    pub bug_id: String,
    pub fixture: String,
    pub dead_feature: bool,
    pub ground_truth_line: usize,
    pub seed_template: String,
    pub screened_out: usize,
    pub outcomes: BTreeMap<Setup, RepairOutcome>,
    pub audits: BTreeMap<Setup, PatchAudit>,
    pub sl: SuspiciousList,
    pub sl_reduced: SuspiciousList,
    pub fl_rank_full: Option<usize>,
    pub fl_rank_reduced: Option<usize>,
    pub suite_size: usize,
    pub failing: usize,
    pub reduced_suite_size: usize,
    pub reduced_failing: usize,
    pub reduction_rate: f64,
    pub program_size: usize,
    pub slice_size: usize,
    pub slice_oracle_calls: usize,
    pub fault_in_slice: bool,
}

impl SetupComparison {
    pub fn outcome(&self, setup: Setup) -> &RepairOutcome {
        &self.outcomes[&setup]
    }

    /// Lines ranked strictly above the fault, in order.
    fn prefix(list: &SuspiciousList, line: usize) -> Option<Vec<usize>> {
        let rank = list.rank_of(line)?;
        Some(list.entries[..rank - 1].iter().map(|e| e.line).collect())
    }

    /// The fault moved up in SL_R and everything still above it was above
    /// it in SL, in the same relative order.
    pub fn rank_improved_with_unchanged_prefix(&self) -> bool {
        let (Some(full), Some(reduced)) = (self.fl_rank_full, self.fl_rank_reduced) else { return false };
        if reduced >= full {
            return false;
        }
        let (Some(p), Some(q)) =
            (Self::prefix(&self.sl, self.ground_truth_line), Self::prefix(&self.sl_reduced, self.ground_truth_line))
        else {
            return false;
        };
        let mut it = p.iter();
        q.iter().all(|x| it.any(|y| y == x))
    }

    /// R(P,T,SL) patched the ground-truth line rather than stopping at a
    /// plausible edit ranked above it.
    pub fn baseline_patches_fault(&self) -> bool {
        self.outcome(Setup::Full).patch.as_ref().is_some_and(|p| p.location == self.ground_truth_line)
    }

    /// Bugs on which the SL_R ordering must strictly cut NPC.
    pub fn npc_improvement_expected(&self) -> bool {
        self.rank_improved_with_unchanged_prefix() && self.baseline_patches_fault()
    }
}

/// Runs the four phases once and repairs under all five setups.
pub fn run_all_setups(bug: &BugInstance, config: &BenchConfig) -> SetupComparison {
    let p = &bug.buggy_program;
    let t = &bug.suite;
    let budget = bug.step_budget;
    let repair_config = RepairConfig { step_budget: budget, ..config.repair };
    let criterion = SlicingCriterion::output(slice_inputs(t, config.slice_inputs), config.window, budget);
    let slice = orbs_slice(p, &criterion).expect("seeded bugs have failing tests and parse");
    let report = slice.report();
    let (t_r, reduction) = reduce_suite(p, t, &report, budget).expect("slice report matches its program");
    let sl = localize(p, t, None, budget, Provenance::FullSuite).expect("seeded bugs have failing tests");
    let filter = config.filter_sl_by_slice.then_some(&report);
    let sl_r = localize(p, &t_r, filter, budget, Provenance::ReducedSuite).expect("reduction keeps failing tests");

    let mut outcomes = BTreeMap::new();
    for setup in Setup::ALL {
        let program = if setup.uses_slice() { &slice.slice } else { p };
        let suite = if setup.uses_reduced_suite() { &t_r } else { t };
        let list = if setup.uses_reduced_sl() { &sl_r } else { &sl };
        outcomes.insert(setup, repair(program, suite, list, &repair_config, setup));
    }
    let baseline = outcomes[&Setup::Full].patch.clone();
    let audits = outcomes
        .iter()
        .map(|(&s, o)| {
            let a = match &o.patch {
                None => PatchAudit::NoPatch,
                Some(patch) => audit_setup(patch, baseline.as_ref(), p, t, budget),
            };
            (s, a)
        })
        .collect();

    SetupComparison {
        bug_id: bug.id.clone(),
        fixture: bug.fixture.clone(),
        dead_feature: bug.dead_feature,
        ground_truth_line: bug.ground_truth_line,
        seed_template: bug.seed_mutation.template.name().to_string(),
        screened_out: bug.screened_out,
        outcomes,
        audits,
        fl_rank_full: sl.rank_of(bug.ground_truth_line),
        fl_rank_reduced: sl_r.rank_of(bug.ground_truth_line),
        sl,
        sl_reduced: sl_r,
        suite_size: t.len(),
        failing: t.failing_count(),
        reduced_suite_size: t_r.len(),
        reduced_failing: t_r.failing_count(),
        reduction_rate: reduction.reduction_rate,
        program_size: p.len(),
        slice_size: slice.slice.len(),
        slice_oracle_calls: slice.oracle_calls,
        fault_in_slice: !slice.deleted_lines.contains(&bug.ground_truth_line),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::corpus::CuratedBug;
    use crate::bench::seed::{curated_bug, SeedTarget};
    use crate::lang::DEFAULT_STEP_BUDGET;
    use crate::repair::TemplateId;
    use crate::slicer::DEFAULT_WINDOW;
    use crate::suite::TestCase;

    fn bug(src: &str, tests: Vec<TestCase>, line: usize, text: &str, template: TemplateId) -> BugInstance {
        let p = Program::parse(src).unwrap();
        let s = TestSuite::new(tests).unwrap();
        let target = SeedTarget {
            id: "b".into(),
            fixture: "f",
            correct: &p,
            suite: &s,
            dead_feature: false,
            step_budget: DEFAULT_STEP_BUDGET,
            window: DEFAULT_WINDOW,
            frozen: &[],
        };
        curated_bug(&target, &CuratedBug { line, text: text.into(), template }).unwrap()
    }

    #[test]
    fn rank_one_bug_gives_identical_patches_with_one_candidate() {
        let src = "\
if op == 1 {
  print a + b
}
if op == 2 {
  r = b - a
  if a > b {
    r = r + b
  }
  print r
}";
        let b = bug(
            src,
            vec![
                TestCase::new("add1", [("op", 1), ("a", 2), ("b", 2)], ["4"]),
                TestCase::new("sub_gt", [("op", 2), ("a", 5), ("b", 2)], ["-1"]),
                TestCase::new("sub_le", [("op", 2), ("a", 1), ("b", 5)], ["4"]),
            ],
            7,
            "    r = r * b",
            TemplateId::OpArithSwap,
        );
        let c = run_all_setups(&b, &BenchConfig::default());
        // Only the failing test reaches line 7, and the reduced suite keeps
        // `sub_le`, which reaches the enclosing guards but not line 7.
        assert_eq!(c.fl_rank_full, Some(1));
        assert_eq!(c.fl_rank_reduced, Some(1));
        assert_eq!((c.reduced_suite_size, c.reduced_failing), (2, 1));
        for s in Setup::ALL {
            assert_eq!(c.outcome(s).npc, 1, "{s}");
            assert_eq!(c.audits[&s], PatchAudit::IdenticalToBaseline, "{s}");
        }
        assert!(c.fault_in_slice);
        assert!(c.baseline_patches_fault());
        assert!(!c.npc_improvement_expected());
    }

    #[test]
    fn enclosing_guard_ties_with_the_fault_when_only_failing_tests_remain() {
        let src = "if op == 1 {\n  r = a + b\n  print r\n}\nif op == 2 {\n  r = a - b\n  print r\n}";
        let b = bug(
            src,
            vec![
                TestCase::new("add1", [("op", 1), ("a", 2), ("b", 2)], ["4"]),
                TestCase::new("sub1", [("op", 2), ("a", 5), ("b", 1)], ["4"]),
            ],
            6,
            "  r = a + b",
            TemplateId::OpArithSwap,
        );
        let c = run_all_setups(&b, &BenchConfig::default());
        assert_eq!(c.fl_rank_full, Some(1));
        assert_eq!(c.sl_reduced.lines(), [5, 6, 7]);
        assert_eq!(c.fl_rank_reduced, Some(2));
        assert!(c.audits[&Setup::ReducedSl].is_acceptable());
    }

    #[test]
    fn audit_detects_patches_a_dropped_test_rejects() {
        // Known negative for the reducer: `t_op3` only evaluates the guard,
        // so it is dropped, yet it is the one test that rules out `op > 1`.
        let b = bug(
            "if op == 2 {\n  print a\n}",
            vec![
                TestCase::new("t_op1", [("op", 1), ("a", 4)], []),
                TestCase::new("t_op2", [("op", 2), ("a", 5)], ["5"]),
                TestCase::new("t_op3", [("op", 3), ("a", 1)], []),
            ],
            1,
            "if op == 1 {",
            TemplateId::ConstShift,
        );
        let c = run_all_setups(&b, &BenchConfig::default());
        assert_eq!(c.reduced_suite_size, 2);
        let full = c.outcome(Setup::Full).patch.clone().unwrap();
        assert_eq!(full.replacement[0].1, "if op == 2 {");
        let reduced = c.outcome(Setup::ReducedSuite).patch.clone().unwrap();
        assert_eq!(reduced.replacement[0].1, "if op > 1 {");
        assert_eq!(c.audits[&Setup::ReducedSuite], PatchAudit::InvalidOnFullSuite);
        assert_eq!(c.audits[&Setup::Full], PatchAudit::IdenticalToBaseline);
    }

    #[test]
    fn prefix_rule() {
        use crate::fl::Suspicious;
        let list = |ls: &[usize]| SuspiciousList {
            entries: ls.iter().map(|&line| Suspicious { line, score: 1.0 }).collect(),
            provenance: Provenance::FullSuite,
            filtered_by_slice: false,
        };
        let mut c = SetupComparison {
            bug_id: String::new(),
            fixture: String::new(),
            dead_feature: false,
            ground_truth_line: 9,
            seed_template: String::new(),
            screened_out: 0,
            outcomes: BTreeMap::new(),
            audits: BTreeMap::new(),
            sl: list(&[3, 4, 5, 9]),
            sl_reduced: list(&[3, 5, 9]),
            fl_rank_full: Some(4),
            fl_rank_reduced: Some(3),
            suite_size: 0,
            failing: 0,
            reduced_suite_size: 0,
            reduced_failing: 0,
            reduction_rate: 1.0,
            program_size: 0,
            slice_size: 0,
            slice_oracle_calls: 0,
            fault_in_slice: true,
        };
        assert!(c.rank_improved_with_unchanged_prefix());
        c.sl_reduced = list(&[5, 3, 9]);
        assert!(!c.rank_improved_with_unchanged_prefix());
        c.sl_reduced = list(&[3, 7, 9]);
        assert!(!c.rank_improved_with_unchanged_prefix());
    }
}
