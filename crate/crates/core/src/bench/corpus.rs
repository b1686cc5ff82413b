use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::{run_test, Program, DEFAULT_STEP_BUDGET};
use crate::project::{load_program, load_suite, ProjectError};
use crate::repair::TemplateId;
use crate::suite::{TestSuite, Verdict};

/// Optional per-fixture settings read from `manifest.json`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureMeta {
    #[serde(default)]
    pub step_budget: Option<u64>,
    /// The fixture holds feature code that most tests never reach.
    #[serde(default)]
    pub dead_feature: bool,
    /// Lines seeding never mutates.
    #[serde(default)]
    pub frozen_lines: Vec<usize>,
}

/// A hand-placed bug read from `bug.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CuratedBug {
    pub line: usize,
    /// Full replacement text of the line, indentation included.
    pub text: String,
    pub template: TemplateId,
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    pub dir: PathBuf,
    pub program: Program,
    pub suite: TestSuite,
    pub meta: FixtureMeta,
    pub curated: Option<CuratedBug>,
}

impl Fixture {
    pub fn step_budget(&self) -> u64 {
        self.meta.step_budget.unwrap_or(DEFAULT_STEP_BUDGET)
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Project(#[from] ProjectError),
    #[error("{path}: {message}")]
    Json { path: PathBuf, message: String },
    #[error("fixture `{fixture}`: test `{test}` fails on the correct program")]
    FailingTest { fixture: String, test: String },
    #[error("corpus directory {0} holds no fixtures")]
    Empty(PathBuf),
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Option<T>, CorpusError> {
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| CorpusError::Json { path: path.to_path_buf(), message: e.to_string() })
}

pub fn load_fixture(dir: &Path) -> Result<Fixture, CorpusError> {
    let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let meta: FixtureMeta = read_json(&dir.join("manifest.json"))?.unwrap_or_default();
    let curated: Option<CuratedBug> = read_json(&dir.join("bug.json"))?;
    let program = load_program(&dir.join("program.mini"))?;
    let suite = load_suite(&dir.join("tests.json"))?;
    let budget = meta.step_budget.unwrap_or(DEFAULT_STEP_BUDGET);
    if let Some(t) = suite.iter().find(|t| run_test(&program, t, budget).0 == Verdict::Fail) {
        return Err(CorpusError::FailingTest { fixture: name, test: t.name.clone() });
    }
    let suite = suite.classified(&program, budget);
    Ok(Fixture { name, dir: dir.to_path_buf(), program, suite, meta, curated })
}

/// Loads every subdirectory holding a `program.mini`, sorted by name.
pub fn load_corpus(dir: &Path) -> Result<Vec<Fixture>, CorpusError> {
    let entries = fs::read_dir(dir).map_err(|source| CorpusError::Io { path: dir.to_path_buf(), source })?;
    let mut dirs = Vec::new();
    for e in entries {
        let e = e.map_err(|source| CorpusError::Io { path: dir.to_path_buf(), source })?;
        if e.path().join("program.mini").is_file() {
            dirs.push(e.path());
        }
    }
    dirs.sort();
    if dirs.is_empty() {
        return Err(CorpusError::Empty(dir.to_path_buf()));
    }
    dirs.iter().map(|d| load_fixture(d)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_fixture(root: &Path, name: &str, expected: &str) -> PathBuf {
        let d = root.join(name);
        fs::create_dir_all(&d).unwrap();
        fs::write(d.join("program.mini"), "x = in1 * 2\nprint x\n").unwrap();
        fs::write(
            d.join("tests.json"),
            format!(r#"[{{"name": "t", "inputs": {{"in1": 2}}, "expected_output": ["{expected}"]}}]"#),
        )
        .unwrap();
        d
    }

    #[test]
    fn fixtures_load_in_name_order() {
        let root = tempfile::tempdir().unwrap();
        write_fixture(root.path(), "b", "4");
        let a = write_fixture(root.path(), "a", "4");
        fs::write(a.join("manifest.json"), r#"{"dead_feature": true}"#).unwrap();
        fs::write(a.join("bug.json"), r#"{"line": 1, "text": "x = in1 + 2", "template": "OpArithSwap"}"#).unwrap();
        fs::create_dir(root.path().join("not-a-fixture")).unwrap();
        let corpus = load_corpus(root.path()).unwrap();
        let names: Vec<_> = corpus.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, ["a", "b"]);
        assert!(corpus[0].meta.dead_feature);
        assert_eq!(corpus[0].curated.as_ref().unwrap().template, TemplateId::OpArithSwap);
        assert!(!corpus[1].meta.dead_feature);
    }

    #[test]
    fn correct_programs_must_pass_their_tests() {
        let root = tempfile::tempdir().unwrap();
        write_fixture(root.path(), "a", "5");
        assert!(matches!(load_corpus(root.path()), Err(CorpusError::FailingTest { .. })));
    }

    #[test]
    fn empty_corpus() {
        let root = tempfile::tempdir().unwrap();
        assert!(matches!(load_corpus(root.path()), Err(CorpusError::Empty(_))));
    }
}
