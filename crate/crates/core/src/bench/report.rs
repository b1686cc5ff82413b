use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::repair::Setup;

use super::setups::{PatchAudit, SetupComparison};
use super::BenchRun;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub const REPORT_FILES: [&str; 5] = ["table1.csv", "table2.csv", "table3.csv", "table4.csv", "summary.json"];

fn opt(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn rate(x: f64) -> String {
    format!("{x:.4}")
}

fn table(header: Vec<String>, rows: Vec<Vec<String>>) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// Suite sizes before and after reduction.
pub fn table1(cs: &[SetupComparison]) -> Result<String, csv::Error> {
    let header = strings(&[
        "bug",
        "fixture",
        "tests",
        "failing",
        "reduced_tests",
        "reduced_failing",
        "reduction_rate",
        "program_lines",
        "slice_lines",
    ]);
    let rows = cs
        .iter()
        .map(|c| {
            vec![
                c.bug_id.clone(),
                c.fixture.clone(),
                c.suite_size.to_string(),
                c.failing.to_string(),
                c.reduced_suite_size.to_string(),
                c.reduced_failing.to_string(),
                rate(c.reduction_rate),
                c.program_size.to_string(),
                c.slice_size.to_string(),
            ]
        })
        .collect();
    table(header, rows)
}

/// Suspicious list sizes and the fault's rank in SL and SL_R.
pub fn table2(cs: &[SetupComparison]) -> Result<String, csv::Error> {
    let header =
        strings(&["bug", "fault_line", "sl_size", "fault_rank", "sl_r_size", "fault_rank_reduced", "rank_delta"]);
    let rows = cs
        .iter()
        .map(|c| {
            let delta = match (c.fl_rank_full, c.fl_rank_reduced) {
                (Some(a), Some(b)) => (a as i64 - b as i64).to_string(),
                _ => String::new(),
            };
            vec![
                c.bug_id.clone(),
                c.ground_truth_line.to_string(),
                c.sl.len().to_string(),
                opt(c.fl_rank_full),
                c.sl_reduced.len().to_string(),
                opt(c.fl_rank_reduced),
                delta,
            ]
        })
        .collect();
    table(header, rows)
}

/// NPC under every setup, with the SL vs SL_R reduction value.
pub fn table3(cs: &[SetupComparison]) -> Result<String, csv::Error> {
    let mut header = strings(&["bug", "original_npc", "reduced_npc", "reduction_value"]);
    for s in Setup::ALL {
        header.push(format!("npc_{}", s.cli_name()));
        header.push(format!("audit_{}", s.cli_name()));
    }
    let rows = cs
        .iter()
        .map(|c| {
            let original = c.outcome(Setup::Full).npc;
            let reduced = c.outcome(Setup::ReducedSl).npc;
            let mut row = vec![
                c.bug_id.clone(),
                original.to_string(),
                reduced.to_string(),
                (original as i64 - reduced as i64).to_string(),
            ];
            for s in Setup::ALL {
                row.push(c.outcome(s).npc.to_string());
                row.push(c.audits[&s].label().to_string());
            }
            row
        })
        .collect();
    table(header, rows)
}

/// Repair time and test executions, full suite vs reduced suite.
pub fn table4(cs: &[SetupComparison]) -> Result<String, csv::Error> {
    let mut header = strings(&["bug", "original_validations", "reduced_validations", "validation_reduction"]);
    for s in Setup::ALL {
        header.push(format!("validations_{}", s.cli_name()));
    }
    for s in Setup::ALL {
        header.push(format!("rt_ms_{}", s.cli_name()));
    }
    let rows = cs
        .iter()
        .map(|c| {
            let original = c.outcome(Setup::Full).validations_run;
            let reduced = c.outcome(Setup::ReducedSuite).validations_run;
            let mut row = vec![
                c.bug_id.clone(),
                original.to_string(),
                reduced.to_string(),
                (original as i64 - reduced as i64).to_string(),
            ];
            row.extend(Setup::ALL.iter().map(|&s| c.outcome(s).validations_run.to_string()));
            row.extend(Setup::ALL.iter().map(|&s| c.outcome(s).repair_time_ms.to_string()));
            row
        })
        .collect();
    table(header, rows)
}

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

#[derive(Debug, Clone, Serialize)]
struct Row<'a> {
    bug: &'a str,
    fixture: &'a str,
    dead_feature: bool,
    fault_line: usize,
    seed_template: &'a str,
    screened_out: usize,
    tests: usize,
    failing: usize,
    reduced_tests: usize,
    reduced_failing: usize,
    reduction_rate: f64,
    program_lines: usize,
    slice_lines: usize,
    slice_oracle_calls: usize,
    fault_in_slice: bool,
    fault_rank: Option<usize>,
    fault_rank_reduced: Option<usize>,
    npc: Value,
    validations: Value,
    audit: Value,
    patched: Value,
    rt_ms: Value,
}

fn per_setup<T: Serialize>(f: impl Fn(Setup) -> T) -> Value {
    Value::Object(Setup::ALL.iter().map(|&s| (s.label().to_string(), json!(f(s)))).collect())
}

/// Corpus aggregates, per-bug rows and the configuration that produced them.
pub fn summary(run: &BenchRun, config: Value) -> Value {
    let cs = &run.comparisons;
    let ranks_full: Vec<f64> = cs.iter().filter_map(|c| c.fl_rank_full).map(|r| r as f64).collect();
    let ranks_reduced: Vec<f64> = cs.iter().filter_map(|c| c.fl_rank_reduced).map(|r| r as f64).collect();
    let deltas: Vec<f64> = cs.iter().filter_map(|c| Some(c.fl_rank_full? as f64 - c.fl_rank_reduced? as f64)).collect();
    let rates: Vec<f64> = cs.iter().map(|c| c.reduction_rate).collect();
    let npc_total = |s: Setup| cs.iter().map(|c| c.outcome(s).npc).sum::<usize>();
    let validations_total = |s: Setup| cs.iter().map(|c| c.outcome(s).validations_run).sum::<usize>();
    let audit_counts = per_setup(|s| {
        PatchAudit::ALL
            .iter()
            .map(|&a| (a.label().to_string(), json!(cs.iter().filter(|c| c.audits[&s] == a).count())))
            .collect::<serde_json::Map<_, _>>()
    });
    let rows: Vec<Row> = cs
        .iter()
        .map(|c| Row {
            bug: &c.bug_id,
            fixture: &c.fixture,
            dead_feature: c.dead_feature,
            fault_line: c.ground_truth_line,
            seed_template: &c.seed_template,
            screened_out: c.screened_out,
            tests: c.suite_size,
            failing: c.failing,
            reduced_tests: c.reduced_suite_size,
            reduced_failing: c.reduced_failing,
            reduction_rate: c.reduction_rate,
            program_lines: c.program_size,
            slice_lines: c.slice_size,
            slice_oracle_calls: c.slice_oracle_calls,
            fault_in_slice: c.fault_in_slice,
            fault_rank: c.fl_rank_full,
            fault_rank_reduced: c.fl_rank_reduced,
            npc: per_setup(|s| c.outcome(s).npc),
            validations: per_setup(|s| c.outcome(s).validations_run),
            audit: per_setup(|s| c.audits[&s].label()),
            patched: per_setup(|s| c.outcome(s).patch.is_some()),
            rt_ms: per_setup(|s| c.outcome(s).repair_time_ms),
        })
        .collect();
    json!({
        "config": config,
        "bugs": cs.len(),
        "aggregates": {
            "screened_out": cs.iter().map(|c| c.screened_out).sum::<usize>(),
            "failing_preserved": cs.iter().filter(|c| c.failing == c.reduced_failing).count(),
            "fault_in_slice": cs.iter().filter(|c| c.fault_in_slice).count(),
            "fault_in_sl_r": cs.iter().filter(|c| c.fl_rank_reduced.is_some()).count(),
            "median_rank_full": median(&ranks_full),
            "median_rank_reduced": median(&ranks_reduced),
            "median_rank_delta": median(&deltas),
            "rank_improved": deltas.iter().filter(|d| **d > 0.0).count(),
            "rank_regressed": deltas.iter().filter(|d| **d < 0.0).count(),
            "npc_improvement_expected": cs.iter().filter(|c| c.npc_improvement_expected()).count(),
            "npc_improved": cs
                .iter()
                .filter(|c| c.outcome(Setup::ReducedSl).npc < c.outcome(Setup::Full).npc)
                .count(),
            "total_tests": cs.iter().map(|c| c.suite_size).sum::<usize>(),
            "total_reduced_tests": cs.iter().map(|c| c.reduced_suite_size).sum::<usize>(),
            "median_reduction_rate": median(&rates),
            "npc_total": per_setup(npc_total),
            "npc_reduction_total": npc_total(Setup::Full) as i64 - npc_total(Setup::ReducedSl) as i64,
            "validations_total": per_setup(validations_total),
            "rt_ms_total": per_setup(|s| cs.iter().map(|c| c.outcome(s).repair_time_ms).sum::<u64>()),
            "audits": audit_counts,
        },
        "rows": rows,
        "skipped": run.skipped,
    })
}

/// Writes the four tables and `summary.json` into `out`.
pub fn emit_report(run: &BenchRun, config: Value, out: &Path) -> Result<(), ReportError> {
    let cs = &run.comparisons;
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| ReportError::Io { path, source }
    };
    fs::create_dir_all(out).map_err(io(out))?;
    let files = [
        ("table1.csv", table1(cs)?),
        ("table2.csv", table2(cs)?),
        ("table3.csv", table3(cs)?),
        ("table4.csv", table4(cs)?),
        ("summary.json", serde_json::to_string_pretty(&summary(run, config)).expect("summary serializes") + "\n"),
    ];
    for (name, text) in files {
        let path = out.join(name);
        fs::write(&path, text).map_err(io(&path))?;
    }
    Ok(())
}

/// Drops every CSV column whose header starts with `rt_`.
pub fn normalize_csv(text: &str) -> Result<String, csv::Error> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers()?.clone();
    let keep: Vec<usize> = (0..headers.len()).filter(|&i| !headers[i].starts_with("rt_")).collect();
    let header = keep.iter().map(|&i| headers[i].to_string()).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        rows.push(keep.iter().map(|&i| rec[i].to_string()).collect());
    }
    table(header, rows)
}

/// Removes every object key starting with `rt_`, at any depth.
pub fn normalize_json(value: &mut Value) {
    match value {
        Value::Object(m) => {
            m.retain(|k, _| !k.starts_with("rt_"));
            m.values_mut().for_each(normalize_json);
        }
        Value::Array(a) => a.iter_mut().for_each(normalize_json),
        _ => {}
    }
}
