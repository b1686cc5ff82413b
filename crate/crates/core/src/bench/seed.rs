use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::{run_test, Program, RunStatus};
use crate::repair::{generate_candidates, search_donor_code, TemplateId};
use crate::slicer::{orbs_slice, SlicingCriterion};
use crate::suite::{TestSuite, Verdict};

use super::corpus::CuratedBug;

/// Templates whose mutations the catalog can undo textually.
pub const SEED_TEMPLATES: [TemplateId; 4] =
    [TemplateId::OpRelSwap, TemplateId::OpArithSwap, TemplateId::ConstShift, TemplateId::VarReplace];

pub const MAX_SEED_ATTEMPTS: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedMutation {
    pub template: TemplateId,
    pub description: String,
}

#[derive(Debug, Clone)]
pub struct BugInstance {
    pub id: String,
    pub fixture: String,
    pub correct_program: Program,
    pub buggy_program: Program,
    pub ground_truth_line: usize,
    pub seed_mutation: SeedMutation,
    /// Classified against `buggy_program`.
    pub suite: TestSuite,
    pub dead_feature: bool,
    pub step_budget: u64,
    /// Observable mutations rejected because slicing deleted their line.
    pub screened_out: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SeedError {
    #[error("test `{0}` fails on the correct program")]
    FailingOnCorrect(String),
    #[error("no invertible mutation made a test fail within {0} attempts")]
    Unseedable(usize),
    #[error("no invertible mutation made a test fail and survived slicing within {attempts} attempts ({screened} screened out)")]
    Infeasible { attempts: usize, screened: usize },
    #[error("curated bug at line {line}: {message}")]
    Curated { line: usize, message: String },
}

/// Whether one edit of `template` at `line` of `mutant` restores `original`.
fn invertible(mutant: &Program, line: usize, template: TemplateId, original: &str) -> bool {
    let donors = search_donor_code(mutant, line, template);
    generate_candidates(mutant, line, template, &donors)
        .map(|cs| cs.iter().any(|c| c.replacement.len() == 1 && c.replacement[0].1 == original))
        .unwrap_or(false)
}

/// Classifies `suite` on `buggy` and checks that the bug is observable and
/// that every run stays within budget.
fn admissible(buggy: &Program, suite: &TestSuite, step_budget: u64) -> Option<TestSuite> {
    let mut failing = 0;
    for t in suite {
        let (v, r) = run_test(buggy, t, step_budget);
        if r.status == RunStatus::StepBudgetExceeded {
            return None;
        }
        failing += usize::from(v == Verdict::Fail);
    }
    (failing > 0).then(|| suite.clone().classified(buggy, step_budget))
}

/// Whether the faulty line survives an output slice over the failing tests.
fn survives_slicing(buggy: &Program, suite: &TestSuite, line: usize, window: usize, step_budget: u64) -> bool {
    let criterion = SlicingCriterion::output(suite.failing().cloned().collect(), window, step_budget);
    orbs_slice(buggy, &criterion).is_ok_and(|s| !s.deleted_lines.contains(&line))
}

fn check_correct(correct: &Program, suite: &TestSuite, step_budget: u64) -> Result<(), SeedError> {
    match suite.iter().find(|t| run_test(correct, t, step_budget).0 == Verdict::Fail) {
        Some(t) => Err(SeedError::FailingOnCorrect(t.name.clone())),
        None => Ok(()),
    }
}

pub struct SeedTarget<'a> {
    pub id: String,
    pub fixture: &'a str,
    pub correct: &'a Program,
    pub suite: &'a TestSuite,
    pub dead_feature: bool,
    pub step_budget: u64,
    pub window: usize,
    pub frozen: &'a [usize],
}

/// Applies one random invertible mutation that makes at least one test fail
/// and whose line an output slice over the failing tests keeps.
pub fn seed_bug(target: &SeedTarget<'_>, rng_seed: u64) -> Result<BugInstance, SeedError> {
    check_correct(target.correct, target.suite, target.step_budget)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let lines: Vec<usize> =
        target.correct.executable_indices().into_iter().filter(|l| !target.frozen.contains(l)).collect();
    let mut screened_out = 0;
    for _ in 0..MAX_SEED_ATTEMPTS {
        let Some(&line) = lines.choose(&mut rng) else { break };
        let original = target.correct.line(line).expect("executable index").text.clone();
        let Some(&template) = SEED_TEMPLATES.choose(&mut rng) else { break };
        let donors = search_donor_code(target.correct, line, template);
        let Ok(candidates) = generate_candidates(target.correct, line, template, &donors) else { continue };
        let Some(mutation) = candidates.choose(&mut rng) else { continue };
        if !invertible(&mutation.patched_program, line, template, &original) {
            continue;
        }
        let Some(suite) = admissible(&mutation.patched_program, target.suite, target.step_budget) else {
            continue;
        };
        if !survives_slicing(&mutation.patched_program, &suite, line, target.window, target.step_budget) {
            screened_out += 1;
            continue;
        }
        return Ok(BugInstance {
            id: target.id.clone(),
            fixture: target.fixture.to_string(),
            correct_program: target.correct.clone(),
            buggy_program: mutation.patched_program.clone(),
            ground_truth_line: line,
            seed_mutation: SeedMutation { template, description: mutation.description.clone() },
            suite,
            dead_feature: target.dead_feature,
            step_budget: target.step_budget,
            screened_out,
        });
    }
    if screened_out > 0 {
        return Err(SeedError::Infeasible { attempts: MAX_SEED_ATTEMPTS, screened: screened_out });
    }
    Err(SeedError::Unseedable(MAX_SEED_ATTEMPTS))
}

/// Builds the instance for a hand-placed bug.
pub fn curated_bug(target: &SeedTarget<'_>, bug: &CuratedBug) -> Result<BugInstance, SeedError> {
    check_correct(target.correct, target.suite, target.step_budget)?;
    let err = |message: &str| SeedError::Curated { line: bug.line, message: message.to_string() };
    let pos = target.correct.position_of(bug.line).ok_or_else(|| err("no such line"))?;
    let original = target.correct.lines()[pos].text.clone();
    let buggy = target.correct.splice(pos, &[(bug.line, bug.text.clone())]).map_err(|e| err(&e.message))?;
    if !invertible(&buggy, bug.line, bug.template, &original) {
        return Err(err("the template cannot undo the edit"));
    }
    let suite = admissible(&buggy, target.suite, target.step_budget).ok_or_else(|| err("no test fails"))?;
    if !survives_slicing(&buggy, &suite, bug.line, target.window, target.step_budget) {
        return Err(err("the slice deletes the faulty line"));
    }
    Ok(BugInstance {
        id: target.id.clone(),
        fixture: target.fixture.to_string(),
        correct_program: target.correct.clone(),
        buggy_program: buggy,
        ground_truth_line: bug.line,
        seed_mutation: SeedMutation { template: bug.template, description: format!("curated: {}", bug.text.trim()) },
        suite,
        dead_feature: target.dead_feature,
        step_budget: target.step_budget,
        screened_out: 0,
    })
}
