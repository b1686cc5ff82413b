//! The four repair phases run back to back on one project.

use serde::Serialize;
use thiserror::Error;

use crate::fl::{localize, FlError, Provenance, SuspiciousList};
use crate::lang::{run_test, Program};
use crate::project::{ConfigError, PipelineConfig, SliceInputs};
use crate::reduce::{reduce_suite, ReduceError, ReductionReport};
use crate::repair::{repair, RepairOutcome, TransplantError};
use crate::slicer::{orbs_slice, SliceError, SliceResult, SlicingCriterion};
use crate::suite::{TestCase, TestSuite, Verdict};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("the suite has no failing test on this program")]
    NoFailingTests,
    #[error(transparent)]
    Slice(#[from] SliceError),
    #[error(transparent)]
    Reduce(#[from] ReduceError),
    #[error(transparent)]
    Localize(#[from] FlError),
}

/// Inputs fed to the slicer under `mode`.
pub fn slice_inputs(suite: &TestSuite, mode: SliceInputs) -> Vec<TestCase> {
    match mode {
        SliceInputs::FailingOnly => suite.failing().cloned().collect(),
        SliceInputs::AllTests => suite.tests().to_vec(),
    }
}

pub fn slice_project(
    program: &Program,
    suite: &TestSuite,
    config: &PipelineConfig,
) -> Result<SliceResult, PipelineError> {
    let criterion = SlicingCriterion {
        mode: config.criterion.clone(),
        inputs: slice_inputs(suite, config.slice_inputs),
        window: config.window,
        step_budget: config.step_budget,
    };
    Ok(orbs_slice(program, &criterion)?)
}

/// Outcome of re-running a patch from a reduced setup on the full suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FullSuiteCheck {
    Valid,
    Invalid,
    Inapplicable,
}

/// Transplants `patched` edits onto `original` and runs all of `suite`.
pub fn check_on_full_suite(
    patch: &crate::repair::PatchCandidate,
    original: &Program,
    suite: &TestSuite,
    step_budget: u64,
) -> FullSuiteCheck {
    match patch.transplant(original) {
        Err(TransplantError::Inapplicable(_)) | Err(TransplantError::Parse(_)) => FullSuiteCheck::Inapplicable,
        Ok(p) => {
            if suite.iter().all(|t| run_test(&p, t, step_budget).0 == Verdict::Pass) {
                FullSuiteCheck::Valid
            } else {
                FullSuiteCheck::Invalid
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub slice: SliceResult,
    pub reduced_suite: TestSuite,
    pub reduction: ReductionReport,
    /// The list the selected setup repaired against.
    pub suspicious: SuspiciousList,
    pub outcome: RepairOutcome,
    /// Present for reduced setups that produced a patch.
    pub full_suite_check: Option<FullSuiteCheck>,
}

impl PipelineRun {
    pub fn succeeded(&self) -> bool {
        self.outcome.patch.is_some() && self.full_suite_check.is_none_or(|c| c == FullSuiteCheck::Valid)
    }
}

/// The suspicious list a setup repairs against.
pub fn suspicious_list_for(
    program: &Program,
    suite: &TestSuite,
    reduced: &TestSuite,
    slice: &SliceResult,
    config: &PipelineConfig,
) -> Result<SuspiciousList, FlError> {
    if config.setup.uses_reduced_sl() {
        let filter = config.filter_sl_by_slice.then(|| slice.report());
        localize(program, reduced, filter.as_ref(), config.step_budget, Provenance::ReducedSuite)
    } else {
        localize(program, suite, None, config.step_budget, Provenance::FullSuite)
    }
}

pub fn run_pipeline(
    program: &Program,
    suite: &TestSuite,
    config: &PipelineConfig,
) -> Result<PipelineRun, PipelineError> {
    config.validate()?;
    if suite.failing_count() == 0 {
        return Err(PipelineError::NoFailingTests);
    }
    let slice = slice_project(program, suite, config)?;
    let (reduced_suite, reduction) = reduce_suite(program, suite, &slice.report(), config.step_budget)?;
    let suspicious = suspicious_list_for(program, suite, &reduced_suite, &slice, config)?;
    let setup = config.setup;
    let repair_program = if setup.uses_slice() { &slice.slice } else { program };
    let repair_suite = if setup.uses_reduced_suite() { &reduced_suite } else { suite };
    let outcome = repair(repair_program, repair_suite, &suspicious, &config.repair_config(), setup);
    let full_suite_check = match &outcome.patch {
        Some(p) if setup != crate::repair::Setup::Full => {
            Some(check_on_full_suite(p, program, suite, config.step_budget))
        }
        _ => None,
    };
    Ok(PipelineRun { slice, reduced_suite, reduction, suspicious, outcome, full_suite_check })
}
