use std::collections::BTreeSet;

use proptest::prelude::*;

use slicemend::bench::{seed_bug, SeedTarget};
use slicemend::fl::{localize, ochiai_score, Provenance};
use slicemend::lang::{instrument, run, run_test, Program};
use slicemend::reduce::reduce_suite;
use slicemend::repair::{repair, RepairConfig, Setup};
use slicemend::slicer::{orbs_slice, verify_slice, CriterionMode, SliceReport, SlicingCriterion};
use slicemend::suite::{TestCase, TestSuite, Verdict};

const BUDGET: u64 = 5_000;
const VARS: [&str; 3] = ["x", "y", "z"];

#[derive(Debug, Clone)]
enum Stmt {
    Assign(usize, String),
    Print(String),
    If(String, Vec<Stmt>),
    Loop(Vec<Stmt>),
}

fn operand() -> impl Strategy<Value = String> {
    prop_oneof![
        (0..VARS.len()).prop_map(|i| VARS[i].to_string()),
        Just("a".to_string()),
        Just("b".to_string()),
        (0i64..5).prop_map(|c| c.to_string()),
    ]
}

fn expr() -> impl Strategy<Value = String> {
    (operand(), prop::sample::select(vec!["+", "-", "*", "%"]), operand()).prop_map(|(l, op, r)| {
        if op == "%" {
            format!("{l} % 3")
        } else {
            format!("{l} {op} {r}")
        }
    })
}

fn simple() -> impl Strategy<Value = Stmt> {
    prop_oneof![
        3 => ((0..VARS.len()), expr()).prop_map(|(v, e)| Stmt::Assign(v, e)),
        1 => expr().prop_map(Stmt::Print),
    ]
}

fn stmt() -> impl Strategy<Value = Stmt> {
    prop_oneof![
        6 => simple(),
        1 => (operand(), prop::sample::select(vec!["<", ">", "==", "!="]), operand(), prop::collection::vec(simple(), 1..3))
            .prop_map(|(l, op, r, body)| Stmt::If(format!("{l} {op} {r}"), body)),
        1 => prop::collection::vec(simple(), 1..3).prop_map(Stmt::Loop),
    ]
}

fn render(stmts: &[Stmt]) -> String {
    let mut out = vec!["x = a".to_string(), "y = b".to_string(), "z = 0".to_string()];
    for s in stmts {
        match s {
            Stmt::Assign(v, e) => out.push(format!("{} = {e}", VARS[*v])),
            Stmt::Print(e) => out.push(format!("print {e}")),
            Stmt::If(c, body) => {
                out.push(format!("if {c} {{"));
                out.extend(body.iter().map(|b| format!("  {}", render_simple(b))));
                out.push("}".into());
            }
            Stmt::Loop(body) => {
                out.push("k = 0".into());
                out.push("while k < 3 {".into());
                out.extend(body.iter().map(|b| format!("  {}", render_simple(b))));
                out.push("  k = k + 1".into());
                out.push("}".into());
            }
        }
    }
    out.push("print x + y".into());
    out.join("\n")
}

fn render_simple(s: &Stmt) -> String {
    match s {
        Stmt::Assign(v, e) => format!("{} = {e}", VARS[*v]),
        Stmt::Print(e) => format!("print {e}"),
        _ => unreachable!("bodies hold simple statements"),
    }
}

fn program() -> impl Strategy<Value = Program> {
    prop::collection::vec(stmt(), 1..6).prop_map(|s| Program::parse(&render(&s)).expect("generated programs parse"))
}

fn inputs() -> impl Strategy<Value = Vec<(i64, i64)>> {
    prop::collection::vec((-3i64..6, -3i64..6), 1..4)
}

fn tests_for(p: &Program, ins: &[(i64, i64)]) -> Vec<TestCase> {
    ins.iter()
        .enumerate()
        .map(|(i, &(a, b))| {
            let mut t = TestCase::new(&format!("t{i}"), [("a", a), ("b", b)], []);
            t.expected_output = run(p, &t.inputs, BUDGET).printed;
            t
        })
        .collect()
}

/// A suite whose first test fails on `p`.
fn suite_with_failure(p: &Program, ins: &[(i64, i64)]) -> TestSuite {
    let mut tests = tests_for(p, ins);
    tests[0].expected_output.push("999999".into());
    TestSuite::new(tests).unwrap().classified(p, BUDGET)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn runs_are_deterministic(p in program(), a in -5i64..5, b in -5i64..5) {
        let ins = [("a".to_string(), a), ("b".to_string(), b)].into();
        prop_assert_eq!(run(&p, &ins, BUDGET), run(&p, &ins, BUDGET));
    }

    #[test]
    fn coverage_only_names_statements(p in program(), a in -5i64..5, b in -5i64..5) {
        let r = run(&p, &[("a".to_string(), a), ("b".to_string(), b)].into(), BUDGET);
        let exec = p.executable_indices();
        prop_assert!(r.covered_lines.is_subset(&exec));
    }

    #[test]
    fn passing_means_matching_output(p in program(), ins in inputs()) {
        for t in tests_for(&p, &ins) {
            let (v, r) = run_test(&p, &t, BUDGET);
            if v == Verdict::Pass {
                prop_assert_eq!(run(&p, &t.inputs, BUDGET).printed, t.expected_output.clone());
                prop_assert_eq!(r.printed, t.expected_output);
            }
        }
    }

    #[test]
    fn deletion_keeps_survivor_indices(p in program(), mask in prop::collection::vec(any::<bool>(), 40)) {
        let deleted: BTreeSet<usize> =
            p.lines().iter().enumerate().filter(|(i, _)| mask[i % mask.len()]).map(|(_, l)| l.index).collect();
        if let Ok(q) = p.without(&deleted) {
            let expected: BTreeSet<usize> = p.indices().difference(&deleted).copied().collect();
            prop_assert_eq!(q.indices(), expected);
            for l in q.lines() {
                prop_assert_eq!(&p.line(l.index).unwrap().text, &l.text);
            }
        }
    }

    #[test]
    fn slices_preserve_and_are_one_minimal(p in program(), ins in inputs(), window in 1usize..4) {
        let tests = tests_for(&p, &ins);
        let criterion = SlicingCriterion::output(tests.clone(), window, BUDGET);
        let s = orbs_slice(&p, &criterion).unwrap();
        prop_assert!(s.slice.len() <= p.len());
        prop_assert!(verify_slice(&s.slice, &criterion, &s.baseline).is_ok());
        let inst = instrument(&s.slice, &CriterionMode::Output).unwrap();
        for i in 0..inst.len() {
            for w in 1..=window.min(inst.len() - i) {
                if let Ok(c) = inst.retain(|pos, _| pos < i || pos >= i + w) {
                    let same = tests.iter().all(|t| {
                        let r = run(&c, &t.inputs, BUDGET);
                        let b = &s.baseline[&t.name];
                        r.status == b.status && r.observations == b.trajectory
                    });
                    prop_assert!(!same, "window {}+{} still removable", i, w);
                }
            }
        }
    }

    #[test]
    fn reduction_is_idempotent_and_monotone(
        p in program(),
        ins in inputs(),
        keep in prop::collection::vec(any::<bool>(), 40),
    ) {
        let suite = suite_with_failure(&p, &ins);
        let failing: Vec<TestCase> = suite.failing().cloned().collect();
        let s = orbs_slice(&p, &SlicingCriterion::output(failing, 3, BUDGET)).unwrap();
        for t in suite.failing() {
            prop_assert_eq!(run_test(&s.slice, t, BUDGET).0, Verdict::Fail);
        }
        let report = s.report();
        let (reduced, r1) = reduce_suite(&p, &suite, &report, BUDGET).unwrap();
        let (_, r2) = reduce_suite(&p, &reduced, &report, BUDGET).unwrap();
        prop_assert_eq!(&r2.kept, &r1.kept);
        prop_assert!(r2.dropped.is_empty());
        prop_assert_eq!(r1.kept_failing, suite.failing_count());

        let fewer: BTreeSet<usize> =
            report.deleted_lines.iter().enumerate().filter(|(i, _)| keep[i % keep.len()]).map(|(_, &l)| l).collect();
        let larger = SliceReport { deleted_lines: fewer, ..report.clone() };
        let (_, r3) = reduce_suite(&p, &suite, &larger, BUDGET).unwrap();
        let kept3: BTreeSet<&String> = r3.kept.iter().collect();
        prop_assert!(r1.kept.iter().all(|n| kept3.contains(n)));
    }

    #[test]
    fn ochiai_scores_are_bounded(p in program(), ins in inputs()) {
        let suite = suite_with_failure(&p, &ins);
        let sl = localize(&p, &suite, None, BUDGET, Provenance::FullSuite).unwrap();
        let again = localize(&p, &suite, None, BUDGET, Provenance::FullSuite).unwrap();
        prop_assert_eq!(&sl, &again);
        for e in &sl.entries {
            prop_assert!(e.score > 0.0 && e.score <= 1.0);
        }
        for w in sl.entries.windows(2) {
            prop_assert!(w[0].score > w[1].score || (w[0].score == w[1].score && w[0].line < w[1].line));
        }
        let runs: Vec<_> = suite.iter().map(|t| run_test(&p, t, BUDGET)).collect();
        for e in &sl.entries {
            let only_failing = runs.iter().all(|(v, r)| r.covered_lines.contains(&e.line) == (*v == Verdict::Fail));
            if only_failing {
                prop_assert_eq!(e.score, 1.0);
            }
        }
    }

    #[test]
    fn ochiai_formula_bounds(total_f in 1usize..50, e_f in 0usize..50, e_p in 0usize..50) {
        let e_f = e_f.min(total_f);
        let s = ochiai_score(e_f, e_p, total_f).unwrap();
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert_eq!(s == 0.0, e_f == 0);
        if e_f == total_f && e_p == 0 {
            prop_assert_eq!(s, 1.0);
        }
    }

    #[test]
    fn repair_is_deterministic(p in program(), ins in inputs()) {
        let suite = suite_with_failure(&p, &ins);
        let sl = localize(&p, &suite, None, BUDGET, Provenance::FullSuite).unwrap();
        let config = RepairConfig { max_candidates: 200, max_time_ms: 600_000, step_budget: BUDGET };
        let a = repair(&p, &suite, &sl, &config, Setup::Full);
        let b = repair(&p, &suite, &sl, &config, Setup::Full);
        prop_assert_eq!(a.npc, b.npc);
        prop_assert_eq!(a.validations_run, b.validations_run);
        prop_assert_eq!(a.patch.as_ref().map(|x| x.summary()), b.patch.as_ref().map(|x| x.summary()));
        if let Some(patch) = &a.patch {
            prop_assert!(suite.iter().all(|t| run_test(&patch.patched_program, t, BUDGET).0 == Verdict::Pass));
        }
    }

    #[test]
    fn seeding_is_deterministic(p in program(), ins in inputs(), seed in any::<u64>()) {
        let suite = TestSuite::new(tests_for(&p, &ins)).unwrap().classified(&p, BUDGET);
        let target = SeedTarget {
            id: "p".into(),
            fixture: "p",
            correct: &p,
            suite: &suite,
            dead_feature: false,
            step_budget: BUDGET,
            window: 3,
            frozen: &[],
        };
        let a = seed_bug(&target, seed);
        let b = seed_bug(&target, seed);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.buggy_program.source(), b.buggy_program.source());
                prop_assert_eq!(a.ground_truth_line, b.ground_truth_line);
                prop_assert!(a.suite.failing_count() > 0);
            }
            (Err(a), Err(b)) => prop_assert_eq!(a, b),
            _ => prop_assert!(false, "seeding diverged"),
        }
    }
}
