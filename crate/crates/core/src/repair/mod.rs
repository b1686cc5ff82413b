//! Template-based generate-and-validate repair.
//!
//! [`repair`] walks the suspicious list in rank order, every template in
//! [`TemplateId::ORDER`] for each location, and every donor for each
//! template, validating candidates one at a time until one passes the whole
//! suite. NPC is the number of candidates validated, including the plausible
//! one.

mod templates;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fl::SuspiciousList;
use crate::lang::{run_test, ParseError, Program, DEFAULT_STEP_BUDGET};
use crate::suite::{TestCase, TestSuite, Verdict};

pub use templates::{generate_candidates, search_donor_code, Donor, TemplateError, TemplateId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchCandidate {
    pub location: usize,
    pub template: TemplateId,
    pub description: String,
    /// Lines that replace the one at `location`, as (index, text) pairs.
    pub replacement: Vec<(usize, String)>,
    pub patched_program: Program,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransplantError {
    #[error("patch location {0} is not present in the target program")]
    Inapplicable(usize),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

impl PatchCandidate {
    /// Applies the same edit to another program that contains `location`.
    pub fn transplant(&self, target: &Program) -> Result<Program, TransplantError> {
        let pos = target.position_of(self.location).ok_or(TransplantError::Inapplicable(self.location))?;
        Ok(target.splice(pos, &self.replacement)?)
    }

    /// Whether two patches make the same textual edit.
    pub fn same_edit(&self, other: &PatchCandidate) -> bool {
        self.location == other.location && self.replacement == other.replacement
    }

    pub fn summary(&self) -> PatchSummary {
        PatchSummary {
            line: self.location,
            template: self.template.name().to_string(),
            description: self.description.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchSummary {
    pub line: usize,
    pub template: String,
    pub description: String,
}

/// The five repair setups, named after which of program, suite and
/// suspicious list are reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Setup {
    /// P, T, SL: the standard setup every other one is compared against.
    #[serde(rename = "P·T·SL")]
    Full,
    #[serde(rename = "P·T_R·SL")]
    ReducedSuite,
    #[serde(rename = "P·T·SL_R")]
    ReducedSl,
    #[serde(rename = "P·T_R·SL_R")]
    ReducedBoth,
    #[serde(rename = "P_S·T_R·SL_R")]
    SlicedProgram,
}

impl Setup {
    pub const ALL: [Setup; 5] =
        [Setup::Full, Setup::ReducedSuite, Setup::ReducedSl, Setup::ReducedBoth, Setup::SlicedProgram];

    pub fn label(self) -> &'static str {
        match self {
            Setup::Full => "P·T·SL",
            Setup::ReducedSuite => "P·T_R·SL",
            Setup::ReducedSl => "P·T·SL_R",
            Setup::ReducedBoth => "P·T_R·SL_R",
            Setup::SlicedProgram => "P_S·T_R·SL_R",
        }
    }

    /// Command-line spelling.
    pub fn cli_name(self) -> &'static str {
        match self {
            Setup::Full => "full",
            Setup::ReducedSuite => "reduced-suite",
            Setup::ReducedSl => "reduced-sl",
            Setup::ReducedBoth => "reduced-both",
            Setup::SlicedProgram => "sliced-program",
        }
    }

    pub fn uses_reduced_suite(self) -> bool {
        !matches!(self, Setup::Full | Setup::ReducedSl)
    }

    pub fn uses_reduced_sl(self) -> bool {
        matches!(self, Setup::ReducedSl | Setup::ReducedBoth | Setup::SlicedProgram)
    }

    pub fn uses_slice(self) -> bool {
        self == Setup::SlicedProgram
    }
}

impl fmt::Display for Setup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Setup {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Setup::ALL
            .into_iter()
            .find(|x| x.cli_name() == s || x.label() == s)
            .ok_or_else(|| format!("unknown setup `{s}`"))
    }
}

pub const DEFAULT_CANDIDATE_BUDGET: usize = 50_000;
pub const DEFAULT_TIME_BUDGET_MS: u64 = 600_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairConfig {
    pub max_candidates: usize,
    pub max_time_ms: u64,
    pub step_budget: u64,
}

impl Default for RepairConfig {
    fn default() -> Self {
        RepairConfig {
            max_candidates: DEFAULT_CANDIDATE_BUDGET,
            max_time_ms: DEFAULT_TIME_BUDGET_MS,
            step_budget: DEFAULT_STEP_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Validation {
    Plausible,
    Rejected { first_failing: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub verdict: Validation,
    pub executions: usize,
}

/// Failing tests (by name) first, then the rest in suite order.
fn validation_order(suite: &TestSuite) -> Vec<&TestCase> {
    let mut failing: Vec<&TestCase> = suite.failing().collect();
    failing.sort_by(|a, b| a.name.cmp(&b.name));
    failing.extend(suite.passing());
    failing
}

fn validate_ordered(candidate: &PatchCandidate, order: &[&TestCase], step_budget: u64) -> ValidationReport {
    let mut executions = 0;
    for t in order {
        executions += 1;
        if run_test(&candidate.patched_program, t, step_budget).0 == Verdict::Fail {
            return ValidationReport { verdict: Validation::Rejected { first_failing: t.name.clone() }, executions };
        }
    }
    ValidationReport { verdict: Validation::Plausible, executions }
}

/// Runs the suite on the patched program, stopping at the first failure.
pub fn validate(candidate: &PatchCandidate, suite: &TestSuite, step_budget: u64) -> ValidationReport {
    validate_ordered(candidate, &validation_order(suite), step_budget)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepairOutcome {
    pub patch: Option<PatchCandidate>,
    pub npc: usize,
    pub repair_time_ms: u64,
    pub validations_run: usize,
    pub setup: Setup,
    /// Set when the search stopped on a budget rather than by running out of
    /// candidates.
    pub budget_exhausted: bool,
}

impl RepairOutcome {
    pub fn to_json(&self) -> OutcomeJson {
        OutcomeJson {
            patched: self.patch.is_some(),
            patch: self.patch.as_ref().map(PatchCandidate::summary),
            npc: self.npc,
            rt_ms: self.repair_time_ms,
            validations: self.validations_run,
            setup: self.setup.label().to_string(),
        }
    }
}

/// On-disk form of a [`RepairOutcome`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeJson {
    pub patched: bool,
    pub patch: Option<PatchSummary>,
    pub npc: usize,
    pub rt_ms: u64,
    pub validations: usize,
    pub setup: String,
}

/// Searches for the first plausible patch.
///
/// Locations absent from `program` (for instance lines a slice deleted) are
/// skipped without cost.
pub fn repair(
    program: &Program,
    suite: &TestSuite,
    sl: &SuspiciousList,
    config: &RepairConfig,
    setup: Setup,
) -> RepairOutcome {
    let start = Instant::now();
    let deadline = Duration::from_millis(config.max_time_ms);
    let order = validation_order(suite);
    let mut npc = 0;
    let mut validations_run = 0;
    let finish = |patch, npc, validations_run, budget_exhausted| RepairOutcome {
        patch,
        npc,
        repair_time_ms: start.elapsed().as_millis() as u64,
        validations_run,
        setup,
        budget_exhausted,
    };
    for entry in &sl.entries {
        if program.line(entry.line).is_none() {
            continue;
        }
        for template in TemplateId::ORDER {
            let donors = search_donor_code(program, entry.line, template);
            let Ok(candidates) = generate_candidates(program, entry.line, template, &donors) else {
                continue;
            };
            for candidate in candidates {
                if npc >= config.max_candidates || start.elapsed() >= deadline {
                    return finish(None, npc, validations_run, true);
                }
                npc += 1;
                let report = validate_ordered(&candidate, &order, config.step_budget);
                validations_run += report.executions;
                if report.verdict == Validation::Plausible {
                    return finish(Some(candidate), npc, validations_run, false);
                }
            }
        }
    }
    finish(None, npc, validations_run, false)
}
