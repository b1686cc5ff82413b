use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::program::{Program, Stmt, SYNTHETIC_INDEX};
use super::syntax::{BinOp, Expr, UnOp};

/// Initial variable bindings for one execution.
pub type Inputs = BTreeMap<String, i64>;

/// Default per-execution step budget.
pub const DEFAULT_STEP_BUDGET: u64 = 100_000;

/// Channel name used for print statements mirrored into a trajectory.
/// `print` is a keyword, so it can never collide with a variable.
pub const PRINT_CHANNEL: &str = "print";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Ok,
    RuntimeFault,
    StepBudgetExceeded,
    ParseError,
}

/// An observed value. `Unbound` marks an `observe` of a variable that had no
/// binding at that point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Observed {
    Value(i64),
    Unbound,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Observation {
    pub line: usize,
    pub name: String,
    pub value: Observed,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Trajectory {
    pub entries: Vec<Observation>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionResult {
    pub status: RunStatus,
    pub printed: Vec<String>,
    pub observations: Trajectory,
    pub covered_lines: BTreeSet<usize>,
    pub steps: u64,
}

impl ExecutionResult {
    fn parse_error() -> ExecutionResult {
        ExecutionResult {
            status: RunStatus::ParseError,
            printed: Vec::new(),
            observations: Trajectory::default(),
            covered_lines: BTreeSet::new(),
            steps: 0,
        }
    }
}

enum Halt {
    Fault,
    Budget,
}

struct Machine {
    env: HashMap<String, i64>,
    printed: Vec<String>,
    trajectory: Vec<Observation>,
    covered: BTreeSet<usize>,
    steps: u64,
    budget: u64,
    mirror: bool,
}

impl Machine {
    fn tick(&mut self, line: usize) -> Result<(), Halt> {
        if self.steps >= self.budget {
            return Err(Halt::Budget);
        }
        self.steps += 1;
        if line != SYNTHETIC_INDEX {
            self.covered.insert(line);
        }
        Ok(())
    }

    fn block(&mut self, stmts: &[Stmt]) -> Result<(), Halt> {
        stmts.iter().try_for_each(|s| self.stmt(s))
    }

    fn stmt(&mut self, stmt: &Stmt) -> Result<(), Halt> {
        match stmt {
            Stmt::Assign { line, target, value } => {
                self.tick(*line)?;
                let v = self.eval(value)?;
                self.env.insert(target.clone(), v);
            }
            Stmt::Print { line, value } => {
                self.tick(*line)?;
                let v = self.eval(value)?;
                self.printed.push(v.to_string());
                if self.mirror {
                    self.trajectory.push(Observation {
                        line: *line,
                        name: PRINT_CHANNEL.to_string(),
                        value: Observed::Value(v),
                    });
                }
            }
            Stmt::Observe { at, var } => {
                let value = self.env.get(var).map_or(Observed::Unbound, |&v| Observed::Value(v));
                self.trajectory.push(Observation { line: *at, name: var.clone(), value });
            }
            Stmt::If { line, cond, then_body, else_body } => {
                self.tick(*line)?;
                if self.eval(cond)? != 0 {
                    self.block(then_body)?;
                } else {
                    self.block(else_body)?;
                }
            }
            Stmt::While { line, cond, body } => loop {
                self.tick(*line)?;
                if self.eval(cond)? == 0 {
                    break;
                }
                self.block(body)?;
            },
        }
        Ok(())
    }

    fn eval(&self, e: &Expr) -> Result<i64, Halt> {
        match e {
            Expr::Lit(v) => Ok(*v),
            Expr::Var(name) => self.env.get(name).copied().ok_or(Halt::Fault),
            Expr::Unary(UnOp::Neg, inner) => self.eval(inner)?.checked_neg().ok_or(Halt::Fault),
            Expr::Unary(UnOp::Not, inner) => Ok(i64::from(self.eval(inner)? == 0)),
            Expr::Binary(BinOp::And, l, r) => Ok(i64::from(self.eval(l)? != 0 && self.eval(r)? != 0)),
            Expr::Binary(BinOp::Or, l, r) => Ok(i64::from(self.eval(l)? != 0 || self.eval(r)? != 0)),
            Expr::Binary(op, l, r) => {
                let a = self.eval(l)?;
                let b = self.eval(r)?;
                let v = match op {
                    BinOp::Add => a.checked_add(b),
                    BinOp::Sub => a.checked_sub(b),
                    BinOp::Mul => a.checked_mul(b),
                    BinOp::Div => a.checked_div(b),
                    BinOp::Rem => a.checked_rem(b),
                    BinOp::Lt => Some(i64::from(a < b)),
                    BinOp::Le => Some(i64::from(a <= b)),
                    BinOp::Gt => Some(i64::from(a > b)),
                    BinOp::Ge => Some(i64::from(a >= b)),
                    BinOp::Eq => Some(i64::from(a == b)),
                    BinOp::Ne => Some(i64::from(a != b)),
                    BinOp::And | BinOp::Or => unreachable!("short-circuit operators handled above"),
                };
                v.ok_or(Halt::Fault)
            }
        }
    }
}

/// Interprets `program` with `inputs` pre-bound.
///
/// Division or remainder by zero, reading an unbound variable and signed
/// 64-bit overflow stop execution with [`RunStatus::RuntimeFault`]; output and
/// observations produced up to that point are kept.
pub fn run(program: &Program, inputs: &Inputs, step_budget: u64) -> ExecutionResult {
    let mut m = Machine {
        env: inputs.iter().map(|(k, v)| (k.clone(), *v)).collect(),
        printed: Vec::new(),
        trajectory: Vec::new(),
        covered: BTreeSet::new(),
        steps: 0,
        budget: step_budget,
        mirror: program.mirrors_prints(),
    };
    let status = match m.block(program.body()) {
        Ok(()) => RunStatus::Ok,
        Err(Halt::Fault) => RunStatus::RuntimeFault,
        Err(Halt::Budget) => RunStatus::StepBudgetExceeded,
    };
    ExecutionResult {
        status,
        printed: m.printed,
        observations: Trajectory { entries: m.trajectory },
        covered_lines: m.covered,
        steps: m.steps,
    }
}

/// Parses and runs raw source; a parse failure becomes a
/// [`RunStatus::ParseError`] result with every other field empty.
pub fn run_source(source: &str, inputs: &Inputs, step_budget: u64) -> ExecutionResult {
    match Program::parse(source) {
        Ok(p) => run(&p, inputs, step_budget),
        Err(_) => ExecutionResult::parse_error(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs(pairs: &[(&str, i64)]) -> Inputs {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn exec(src: &str, pairs: &[(&str, i64)]) -> ExecutionResult {
        run(&Program::parse(src).unwrap(), &inputs(pairs), DEFAULT_STEP_BUDGET)
    }

    #[test]
    fn parenthesised_arithmetic() {
        let r = exec("x = (1 + 2) * 3\nprint x", &[]);
        assert_eq!(r.status, RunStatus::Ok);
        assert_eq!(r.printed, ["9"]);
    }

    #[test]
    fn division_by_zero_faults_before_printing() {
        let r = exec("x = in1 / in2\nprint x", &[("in1", 6), ("in2", 0)]);
        assert_eq!(r.status, RunStatus::RuntimeFault);
        assert!(r.printed.is_empty());
    }

    #[test]
    fn non_termination_hits_the_budget() {
        let p = Program::parse("while 1 > 0 {\n}").unwrap();
        let r = run(&p, &Inputs::new(), 1000);
        assert_eq!(r.status, RunStatus::StepBudgetExceeded);
        assert_eq!(r.steps, 1000);
    }

    #[test]
    fn straight_line_trace() {
        let r = exec("x = in1\ny = x * 2\nprint y", &[("in1", 3)]);
        assert_eq!(r.status, RunStatus::Ok);
        assert_eq!(r.printed, ["6"]);
        assert_eq!(r.covered_lines, BTreeSet::from([1, 2, 3]));
        assert_eq!(r.steps, 3);
    }

    #[test]
    fn overflow_and_unbound_use_fault() {
        assert_eq!(exec("x = a * a", &[("a", i64::MAX)]).status, RunStatus::RuntimeFault);
        assert_eq!(exec("x = -a", &[("a", i64::MIN)]).status, RunStatus::RuntimeFault);
        assert_eq!(exec("x = a / -1", &[("a", i64::MIN)]).status, RunStatus::RuntimeFault);
        let r = exec("print 1\nprint zz\nprint 2", &[]);
        assert_eq!(r.status, RunStatus::RuntimeFault);
        assert_eq!(r.printed, ["1"]);
    }

    #[test]
    fn truth_values_and_short_circuit() {
        let r = exec("print 3 < 4\nprint !5\nprint 0 && zz\nprint 1 || zz\nprint -7 % 3", &[]);
        assert_eq!(r.status, RunStatus::Ok);
        assert_eq!(r.printed, ["1", "0", "0", "1", "-1"]);
    }

    #[test]
    fn coverage_skips_structure_and_comments() {
        let src = "# c\nif a > 0 {\nx = 1\n} else {\nx = 2\n}\n\nprint x";
        let r = exec(src, &[("a", 1)]);
        assert_eq!(r.covered_lines, BTreeSet::from([2, 3, 8]));
    }

    #[test]
    fn loops_count_every_condition_check() {
        let r = exec("i = 0\nwhile i < 3 {\ni = i + 1\n}\nprint i", &[]);
        assert_eq!(r.printed, ["3"]);
        assert_eq!(r.steps, 1 + 4 + 3 + 1);
    }

    #[test]
    fn parse_errors_yield_empty_results() {
        let r = run_source("if 1 {", &Inputs::new(), 10);
        assert_eq!(r.status, RunStatus::ParseError);
        assert!(r.printed.is_empty() && r.covered_lines.is_empty() && r.steps == 0);
    }
}
