//! Project manifests and the effective pipeline configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::{ParseError, Program, DEFAULT_STEP_BUDGET};
use crate::repair::{RepairConfig, Setup, DEFAULT_CANDIDATE_BUDGET, DEFAULT_TIME_BUDGET_MS};
use crate::slicer::{CriterionMode, DEFAULT_WINDOW};
use crate::suite::{SuiteError, TestSuite};

/// On-disk manifest: paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub program: PathBuf,
    pub tests: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_budget: Option<u64>,
}

#[derive(Debug, Error)]
pub enum ProjectError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid manifest: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{path}: {source}")]
    Suite {
        path: PathBuf,
        #[source]
        source: SuiteError,
    },
}

fn read(path: &Path) -> Result<String, ProjectError> {
    fs::read_to_string(path).map_err(|source| ProjectError::Io { path: path.to_path_buf(), source })
}

#[derive(Debug, Clone)]
pub struct Project {
    pub manifest_path: PathBuf,
    pub program: Program,
    /// Classified against `program` with the manifest's step budget.
    pub suite: TestSuite,
    pub step_budget: Option<u64>,
}

impl Project {
    /// Recomputes every test's verdict under a different step budget.
    pub fn reclassify(&mut self, step_budget: u64) {
        self.suite.classify(&self.program, step_budget);
    }
}

pub fn load_program(path: &Path) -> Result<Program, ProjectError> {
    Ok(Program::parse_named(&path.display().to_string(), &read(path)?)?)
}

pub fn load_suite(path: &Path) -> Result<TestSuite, ProjectError> {
    TestSuite::from_json(&read(path)?).map_err(|source| ProjectError::Suite { path: path.to_path_buf(), source })
}

/// Loads program and tests named by a manifest and classifies every test on
/// the program.
pub fn load_manifest(path: &Path) -> Result<Project, ProjectError> {
    let text = read(path)?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| ProjectError::Manifest { path: path.to_path_buf(), message: e.to_string() })?;
    if manifest.step_budget == Some(0) {
        return Err(ProjectError::Manifest {
            path: path.to_path_buf(),
            message: "step_budget must be positive".into(),
        });
    }
    let dir = path.parent().unwrap_or(Path::new("."));
    let program = load_program(&dir.join(&manifest.program))?;
    let suite = load_suite(&dir.join(&manifest.tests))?
        .classified(&program, manifest.step_budget.unwrap_or(DEFAULT_STEP_BUDGET));
    Ok(Project { manifest_path: path.to_path_buf(), program, suite, step_budget: manifest.step_budget })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SliceInputs {
    #[default]
    FailingOnly,
    AllTests,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid configuration: {0}")]
pub struct ConfigError(pub String);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub window: usize,
    pub step_budget: u64,
    pub candidate_budget: usize,
    pub time_budget_ms: u64,
    pub criterion: CriterionMode,
    pub slice_inputs: SliceInputs,
    pub filter_sl_by_slice: bool,
    pub setup: Setup,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            window: DEFAULT_WINDOW,
            step_budget: DEFAULT_STEP_BUDGET,
            candidate_budget: DEFAULT_CANDIDATE_BUDGET,
            time_budget_ms: DEFAULT_TIME_BUDGET_MS,
            criterion: CriterionMode::Output,
            slice_inputs: SliceInputs::FailingOnly,
            filter_sl_by_slice: false,
            setup: Setup::Full,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.window == 0 {
            return Err(ConfigError("window must be at least 1".into()));
        }
        if self.step_budget == 0 || self.candidate_budget == 0 || self.time_budget_ms == 0 {
            return Err(ConfigError("budgets must be positive".into()));
        }
        if let CriterionMode::Variable { name, line } = &self.criterion {
            if name.is_empty() || *line == 0 {
                return Err(ConfigError("variable criterion needs a name and a line".into()));
            }
        }
        Ok(())
    }

    pub fn repair_config(&self) -> RepairConfig {
        RepairConfig {
            max_candidates: self.candidate_budget,
            max_time_ms: self.time_budget_ms,
            step_budget: self.step_budget,
        }
    }
}

/// Parses `output` or `var:<name>@<line>`.
pub fn parse_criterion(text: &str) -> Result<CriterionMode, ConfigError> {
    if text == "output" {
        return Ok(CriterionMode::Output);
    }
    let bad = || ConfigError(format!("criterion `{text}` is neither `output` nor `var:<name>@<line>`"));
    let rest = text.strip_prefix("var:").ok_or_else(bad)?;
    let (name, line) = rest.split_once('@').ok_or_else(bad)?;
    let line: usize = line.parse().map_err(|_| bad())?;
    if name.is_empty() || line == 0 {
        return Err(bad());
    }
    Ok(CriterionMode::Variable { name: name.to_string(), line })
}
