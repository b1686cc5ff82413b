//! Seeded-bug benchmark comparing the five repair setups.

mod corpus;
mod report;
mod seed;
mod setups;

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

pub use corpus::{load_corpus, load_fixture, CorpusError, CuratedBug, Fixture, FixtureMeta};
pub use report::{
    emit_report, median, normalize_csv, normalize_json, summary, table1, table2, table3, table4, ReportError,
    REPORT_FILES,
};
pub use seed::{
    curated_bug, seed_bug, BugInstance, SeedError, SeedMutation, SeedTarget, MAX_SEED_ATTEMPTS, SEED_TEMPLATES,
};
pub use setups::{audit_setup, run_all_setups, BenchConfig, PatchAudit, SetupComparison};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedBug {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct BenchRun {
    /// The bugs compared, parallel to `comparisons`.
    pub bugs: Vec<BugInstance>,
    pub comparisons: Vec<SetupComparison>,
    pub skipped: Vec<SkippedBug>,
}

/// One bug to build: a fixture's curated bug, or a seeded one.
#[derive(Debug, Clone, Copy)]
enum Job {
    Curated(usize),
    Seeded { fixture: usize, k: usize, seed: u64 },
}

fn jobs(fixtures: &[Fixture], seeds: usize, rng_seed: u64) -> Vec<Job> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut out = Vec::new();
    for (i, f) in fixtures.iter().enumerate() {
        if f.curated.is_some() {
            out.push(Job::Curated(i));
        }
        for k in 0..seeds {
            out.push(Job::Seeded { fixture: i, k, seed: rng.gen() });
        }
    }
    out
}

fn build(fixtures: &[Fixture], job: Job, config: &BenchConfig) -> Result<BugInstance, SkippedBug> {
    let (i, id) = match job {
        Job::Curated(i) => (i, format!("{}-curated", fixtures[i].name)),
        Job::Seeded { fixture, k, .. } => (fixture, format!("{}-s{k}", fixtures[fixture].name)),
    };
    let f = &fixtures[i];
    let target = SeedTarget {
        id: id.clone(),
        fixture: &f.name,
        correct: &f.program,
        suite: &f.suite,
        dead_feature: f.meta.dead_feature,
        step_budget: f.step_budget(),
        window: config.window,
        frozen: &f.meta.frozen_lines,
    };
    let built = match job {
        Job::Curated(_) => curated_bug(&target, f.curated.as_ref().expect("curated job")),
        Job::Seeded { seed, .. } => seed_bug(&target, seed),
    };
    built.map_err(|e| SkippedBug { id, reason: e.to_string() })
}

/// Builds each fixture's curated bug and `seeds` seeded bugs, in corpus
/// order, skipping duplicates and unseedable draws.
pub fn build_bugs(
    fixtures: &[Fixture],
    seeds: usize,
    rng_seed: u64,
    config: &BenchConfig,
) -> (Vec<BugInstance>, Vec<SkippedBug>) {
    let built: Vec<Result<BugInstance, SkippedBug>> =
        jobs(fixtures, seeds, rng_seed).into_par_iter().map(|j| build(fixtures, j, config)).collect();
    let mut seen = BTreeSet::new();
    let mut bugs = Vec::new();
    let mut skipped = Vec::new();
    for b in built {
        match b {
            Ok(bug) => {
                if seen.insert((bug.fixture.clone(), bug.buggy_program.source())) {
                    bugs.push(bug);
                } else {
                    skipped.push(SkippedBug { id: bug.id, reason: "duplicate of an earlier bug".into() });
                }
            }
            Err(s) => skipped.push(s),
        }
    }
    (bugs, skipped)
}

/// Seeds bugs with [`build_bugs`] and compares the setups on every one.
/// Bugs run in parallel; results keep corpus order.
pub fn run_bench(fixtures: &[Fixture], seeds: usize, rng_seed: u64, config: &BenchConfig) -> BenchRun {
    let (bugs, skipped) = build_bugs(fixtures, seeds, rng_seed, config);
    let comparisons = bugs.par_iter().map(|b| run_all_setups(b, config)).collect();
    BenchRun { bugs, comparisons, skipped }
}
