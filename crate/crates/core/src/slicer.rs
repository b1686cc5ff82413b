//! Observation-based slicing.
//!
//! The slicer instruments the program with a probe for the criterion, records
//! a baseline trajectory per input, then greedily deletes windows of one to
//! `window` consecutive lines. A candidate is kept only if it still parses
//! and every input reproduces its baseline trajectory and run status. Passes
//! over the current slice repeat until one accepts nothing.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::{instrument, run, InstrumentError, Program, RunStatus, Trajectory, SYNTHETIC_INDEX};
use crate::suite::TestCase;

/// What the slice must preserve.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum CriterionMode {
    /// Every printed value, tagged with its print line.
    Output,
    /// The value of `name` immediately before `line`.
    Variable { name: String, line: usize },
}

pub const DEFAULT_WINDOW: usize = 3;

#[derive(Debug, Clone)]
pub struct SlicingCriterion {
    pub mode: CriterionMode,
    pub inputs: Vec<TestCase>,
    pub window: usize,
    pub step_budget: u64,
}

impl SlicingCriterion {
    pub fn output(inputs: Vec<TestCase>, window: usize, step_budget: u64) -> SlicingCriterion {
        SlicingCriterion { mode: CriterionMode::Output, inputs, window, step_budget }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SliceError {
    #[error("invalid slicing criterion: {0}")]
    InvalidCriterion(String),
    #[error("baseline run of `{0}` did not parse")]
    BaselineParseFailure(String),
    #[error(transparent)]
    Instrument(#[from] InstrumentError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineRun {
    pub status: RunStatus,
    pub trajectory: Trajectory,
}

pub type Baseline = BTreeMap<String, BaselineRun>;

#[derive(Debug, Clone)]
pub struct SliceResult {
    pub slice: Program,
    pub deleted_lines: BTreeSet<usize>,
    pub oracle_calls: usize,
    pub accepted_deletions: usize,
    pub baseline: Baseline,
    pub original_size: usize,
}

impl SliceResult {
    pub fn baseline_trajectories(&self) -> BTreeMap<String, Trajectory> {
        self.baseline.iter().map(|(k, v)| (k.clone(), v.trajectory.clone())).collect()
    }

    pub fn report(&self) -> SliceReport {
        SliceReport {
            deleted_lines: self.deleted_lines.clone(),
            oracle_calls: self.oracle_calls,
            accepted_deletions: self.accepted_deletions,
            slice_size: self.slice.len(),
            original_size: self.original_size,
        }
    }
}

/// The serialisable summary of a slice; enough to filter suspicious lists
/// and reduce suites without the slice program itself.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceReport {
    pub deleted_lines: BTreeSet<usize>,
    pub oracle_calls: usize,
    pub accepted_deletions: usize,
    pub slice_size: usize,
    pub original_size: usize,
}

fn check_criterion(program: &Program, criterion: &SlicingCriterion) -> Result<(), SliceError> {
    if criterion.inputs.is_empty() {
        return Err(SliceError::InvalidCriterion("the input set is empty".into()));
    }
    if criterion.window == 0 {
        return Err(SliceError::InvalidCriterion("window size must be at least 1".into()));
    }
    if let CriterionMode::Variable { name, line } = &criterion.mode {
        let Some(l) = program.line(*line) else {
            return Err(SliceError::Instrument(InstrumentError::UnknownLine(*line)));
        };
        if !l.kind.is_executable() {
            return Err(SliceError::InvalidCriterion(format!("line {line} is not executable")));
        }
        if !program.identifiers().contains(name) {
            return Err(SliceError::InvalidCriterion(format!("`{name}` does not occur in the program")));
        }
    }
    Ok(())
}

fn observe(instrumented: &Program, criterion: &SlicingCriterion) -> Baseline {
    criterion
        .inputs
        .iter()
        .map(|t| {
            let r = run(instrumented, &t.inputs, criterion.step_budget);
            (t.name.clone(), BaselineRun { status: r.status, trajectory: r.observations })
        })
        .collect()
}

/// Runs every criterion input on the instrumented program.
pub fn baseline(program: &Program, criterion: &SlicingCriterion) -> Result<Baseline, SliceError> {
    check_criterion(program, criterion)?;
    let instrumented = instrument(program, &criterion.mode)?;
    let base = observe(&instrumented, criterion);
    if let Some((name, _)) = base.iter().find(|(_, b)| b.status == RunStatus::ParseError) {
        return Err(SliceError::BaselineParseFailure(name.clone()));
    }
    Ok(base)
}

/// Whether `candidate` (already instrumented) reproduces the baseline on
/// every input. Runs that exceed the step budget never match.
fn reproduces(candidate: &Program, criterion: &SlicingCriterion, base: &Baseline) -> bool {
    criterion.inputs.iter().all(|t| {
        let expected = &base[&t.name];
        let r = run(candidate, &t.inputs, criterion.step_budget);
        r.status != RunStatus::StepBudgetExceeded
            && r.status == expected.status
            && r.observations == expected.trajectory
    })
}

/// Slices `program` with respect to `criterion`.
pub fn orbs_slice(program: &Program, criterion: &SlicingCriterion) -> Result<SliceResult, SliceError> {
    let base = baseline(program, criterion)?;
    let mut current = instrument(program, &criterion.mode)?;
    let protected_line = match &criterion.mode {
        CriterionMode::Variable { line, .. } => Some(*line),
        CriterionMode::Output => None,
    };
    let is_protected = |index: usize| index == SYNTHETIC_INDEX || Some(index) == protected_line;
    // A baseline that already overruns the budget can never be matched.
    let sliceable = base.values().all(|b| b.status != RunStatus::StepBudgetExceeded);

    let mut verdicts: HashMap<Vec<usize>, bool> = HashMap::new();
    let mut oracle_calls = 0;
    let mut accepted_deletions = 0;

    let mut changed = sliceable;
    while changed {
        changed = false;
        let mut i = 0;
        while i < current.len() {
            let mut accepted = false;
            for w in 1..=criterion.window {
                if i + w > current.len() {
                    break;
                }
                if current.lines()[i..i + w].iter().any(|l| is_protected(l.index)) {
                    break;
                }
                let key: Vec<usize> = current
                    .lines()
                    .iter()
                    .enumerate()
                    .filter(|(pos, _)| *pos < i || *pos >= i + w)
                    .map(|(_, l)| l.index)
                    .collect();
                let candidate = current.retain(|pos, _| pos < i || pos >= i + w);
                let ok = match verdicts.get(&key) {
                    Some(&v) => v,
                    None => {
                        let v = match &candidate {
                            Ok(c) => {
                                oracle_calls += 1;
                                reproduces(c, criterion, &base)
                            }
                            Err(_) => false,
                        };
                        verdicts.insert(key, v);
                        v
                    }
                };
                if ok {
                    current = candidate.expect("accepted candidates parse");
                    accepted_deletions += 1;
                    changed = true;
                    accepted = true;
                    break;
                }
            }
            if !accepted {
                i += 1;
            }
        }
    }

    let surviving = current.indices();
    let deleted_lines: BTreeSet<usize> = program.indices().difference(&surviving).copied().collect();
    let slice = program.without(&deleted_lines).expect("slice parses once its probe is removed");
    debug_assert!(verify_slice(&slice, criterion, &base).is_ok());
    Ok(SliceResult {
        slice,
        deleted_lines,
        oracle_calls,
        accepted_deletions,
        baseline: base,
        original_size: program.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SliceViolation {
    pub test: String,
    pub expected: BaselineRun,
    pub actual: BaselineRun,
}

/// Re-runs every criterion input on `slice` and reports the first test whose
/// trajectory or status differs from `base`.
pub fn verify_slice(slice: &Program, criterion: &SlicingCriterion, base: &Baseline) -> Result<(), SliceViolation> {
    let instrumented = match instrument(slice, &criterion.mode) {
        Ok(p) => p,
        Err(_) => {
            let t = criterion.inputs.first().map(|t| t.name.clone()).unwrap_or_default();
            let expected = base
                .get(&t)
                .cloned()
                .unwrap_or(BaselineRun { status: RunStatus::Ok, trajectory: Trajectory::default() });
            return Err(SliceViolation {
                test: t,
                expected,
                actual: BaselineRun { status: RunStatus::ParseError, trajectory: Trajectory::default() },
            });
        }
    };
    for t in &criterion.inputs {
        let r = run(&instrumented, &t.inputs, criterion.step_budget);
        let actual = BaselineRun { status: r.status, trajectory: r.observations };
        let expected = base.get(&t.name);
        if expected != Some(&actual) {
            return Err(SliceViolation {
                test: t.name.clone(),
                expected: expected
                    .cloned()
                    .unwrap_or(BaselineRun { status: RunStatus::ParseError, trajectory: Trajectory::default() }),
                actual,
            });
        }
    }
    Ok(())
}

/// Statement lines (assignments and prints) that survive in the slice.
pub fn surviving_statements(program: &Program, report: &SliceReport) -> BTreeSet<usize> {
    program
        .lines()
        .iter()
        .filter(|l| l.kind.is_effectful() && !report.deleted_lines.contains(&l.index))
        .map(|l| l.index)
        .collect()
}
