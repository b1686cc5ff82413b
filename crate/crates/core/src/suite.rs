//! Test cases and suites.
//!
//! On disk a suite is a JSON array of `{"name", "inputs", "expected_output"}`
//! objects. Verdicts are never read from disk: they are recomputed against
//! the program under repair with [`TestSuite::classify`].

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::{run_test, Inputs, Program};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub name: String,
    pub inputs: Inputs,
    pub expected_output: Vec<String>,
    /// Verdict on the program the suite was classified against.
    #[serde(skip)]
    pub verdict_on_original: Option<Verdict>,
}

impl TestCase {
    pub fn new<'a>(
        name: &str,
        inputs: impl IntoIterator<Item = (&'a str, i64)>,
        expected: impl IntoIterator<Item = &'a str>,
    ) -> TestCase {
        TestCase {
            name: name.to_string(),
            inputs: inputs.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            expected_output: expected.into_iter().map(str::to_string).collect(),
            verdict_on_original: None,
        }
    }

    pub fn is_failing(&self) -> bool {
        self.verdict_on_original == Some(Verdict::Fail)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SuiteError {
    #[error("malformed test suite: {0}")]
    Malformed(String),
    #[error("duplicate test name `{0}`")]
    DuplicateName(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TestSuite {
    tests: Vec<TestCase>,
}

impl TestSuite {
    pub fn new(tests: Vec<TestCase>) -> Result<TestSuite, SuiteError> {
        let mut seen = BTreeSet::new();
        for t in &tests {
            if !seen.insert(t.name.as_str()) {
                return Err(SuiteError::DuplicateName(t.name.clone()));
            }
        }
        Ok(TestSuite { tests })
    }

    pub fn from_json(text: &str) -> Result<TestSuite, SuiteError> {
        let tests: Vec<TestCase> = serde_json::from_str(text).map_err(|e| SuiteError::Malformed(e.to_string()))?;
        TestSuite::new(tests)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.tests).expect("test suites always serialize")
    }

    /// Recomputes every test's verdict against `program`.
    pub fn classify(&mut self, program: &Program, step_budget: u64) {
        for t in &mut self.tests {
            t.verdict_on_original = Some(run_test(program, t, step_budget).0);
        }
    }

    pub fn classified(mut self, program: &Program, step_budget: u64) -> TestSuite {
        self.classify(program, step_budget);
        self
    }

    pub fn tests(&self) -> &[TestCase] {
        &self.tests
    }

    pub fn iter(&self) -> std::slice::Iter<'_, TestCase> {
        self.tests.iter()
    }

    pub fn len(&self) -> usize {
        self.tests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tests.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&TestCase> {
        self.tests.iter().find(|t| t.name == name)
    }

    pub fn names(&self) -> Vec<String> {
        self.tests.iter().map(|t| t.name.clone()).collect()
    }

    pub fn failing(&self) -> impl Iterator<Item = &TestCase> {
        self.tests.iter().filter(|t| t.is_failing())
    }

    pub fn passing(&self) -> impl Iterator<Item = &TestCase> {
        self.tests.iter().filter(|t| !t.is_failing())
    }

    pub fn failing_count(&self) -> usize {
        self.failing().count()
    }

    /// The sub-suite of tests whose names satisfy `keep`, in suite order.
    pub fn filter(&self, mut keep: impl FnMut(&TestCase) -> bool) -> TestSuite {
        TestSuite { tests: self.tests.iter().filter(|t| keep(t)).cloned().collect() }
    }
}

impl<'a> IntoIterator for &'a TestSuite {
    type Item = &'a TestCase;
    type IntoIter = std::slice::Iter<'a, TestCase>;

    fn into_iter(self) -> Self::IntoIter {
        self.tests.iter()
    }
}
