//! `slicemend`: slicing, fault localization, test reduction and template
//! repair over MiniLang project manifests.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use slicemend::bench::{emit_report, load_corpus, run_bench, BenchConfig};
use slicemend::fl::{localize, FlError, Provenance, SuspiciousList};
use slicemend::lang::{Program, DEFAULT_STEP_BUDGET};
use slicemend::pipeline::{check_on_full_suite, run_pipeline, slice_project, FullSuiteCheck, PipelineError};
use slicemend::project::{load_manifest, load_suite, parse_criterion, PipelineConfig, Project, SliceInputs};
use slicemend::reduce::{reduce_suite, ReduceError, ReductionReport};
use slicemend::repair::{repair, RepairOutcome, Setup};
use slicemend::slicer::{SliceError, SliceReport, SliceResult};
use slicemend::suite::TestSuite;

const STEP_BUDGET_ENV: &str = "SLICEMEND_STEP_BUDGET";

#[derive(Parser)]
#[command(name = "slicemend", version, about = "Slicing-assisted template repair for MiniLang programs")]
struct Cli {
    /// Worker threads for module-internal parallelism.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Slice the program with ORBS and write the slice and its report.
    Slice {
        #[command(flatten)]
        opts: PipelineOpts,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Rank suspicious lines with Ochiai.
    Localize {
        #[command(flatten)]
        opts: PipelineOpts,
        /// Localize over this suite instead of the project's.
        #[arg(long)]
        suite: Option<PathBuf>,
        /// Drop lines deleted by this slice.
        #[arg(long)]
        slice_report: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Drop tests that exercise nothing the slice kept.
    ReduceTests {
        #[command(flatten)]
        opts: PipelineOpts,
        #[arg(long)]
        slice_report: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Search template patches in suspicious-list order.
    Repair {
        #[command(flatten)]
        opts: PipelineOpts,
        #[arg(long)]
        suspicious: PathBuf,
        #[arg(long)]
        suite: Option<PathBuf>,
        /// Repair this program (a slice) instead of the project's.
        #[arg(long)]
        program: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Seed bugs into a fixture corpus and compare the five setups.
    Bench {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 4)]
        seeds: usize,
        #[arg(long, default_value_t = 0)]
        rng: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = slicemend::slicer::DEFAULT_WINDOW)]
        window: usize,
    },
    /// Slice, reduce, localize and repair in one go.
    RunPipeline {
        #[command(flatten)]
        opts: PipelineOpts,
        /// Output directory for the artifacts.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SliceInputsArg {
    Failing,
    All,
}

#[derive(Args, Clone)]
struct PipelineOpts {
    #[arg(long)]
    project: PathBuf,
    #[arg(long, default_value_t = slicemend::slicer::DEFAULT_WINDOW)]
    window: usize,
    #[arg(long, default_value = "full")]
    setup: Setup,
    /// `output` or `var:<name>@<line>`.
    #[arg(long, default_value = "output")]
    criterion: String,
    #[arg(long, value_enum, default_value = "failing")]
    slice_inputs: SliceInputsArg,
    #[arg(long)]
    filter_sl_by_slice: bool,
    #[arg(long, default_value_t = slicemend::repair::DEFAULT_CANDIDATE_BUDGET)]
    candidate_budget: usize,
    #[arg(long, default_value_t = slicemend::repair::DEFAULT_TIME_BUDGET_MS)]
    time_budget_ms: u64,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl Failure {
    fn input(message: impl ToString) -> Failure {
        Failure { code: 2, kind: "input", message: message.to_string() }
    }

    fn no_failing(message: impl ToString) -> Failure {
        Failure { code: 3, kind: "no-failing-tests", message: message.to_string() }
    }

    fn output(path: &Path, e: impl std::fmt::Display) -> Failure {
        Failure { code: 1, kind: "output", message: format!("{}: {e}", path.display()) }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Failure {
        match e {
            PipelineError::NoFailingTests
            | PipelineError::Reduce(ReduceError::NoFailingTests)
            | PipelineError::Localize(FlError::NoFailingTests) => Failure::no_failing(e),
            _ => Failure::input(e),
        }
    }
}

impl From<SliceError> for Failure {
    fn from(e: SliceError) -> Failure {
        Failure::input(e)
    }
}

impl From<ReduceError> for Failure {
    fn from(e: ReduceError) -> Failure {
        PipelineError::from(e).into()
    }
}

impl From<FlError> for Failure {
    fn from(e: FlError) -> Failure {
        PipelineError::from(e).into()
    }
}

fn env_step_budget() -> Result<Option<u64>, Failure> {
    match std::env::var(STEP_BUDGET_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<u64>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Failure::input(format!("{STEP_BUDGET_ENV}=`{v}` is not a positive integer"))),
        },
    }
}

/// Loads the project and builds the effective configuration. The step budget
/// comes from the environment, then the manifest, then the default.
fn load(opts: &PipelineOpts) -> Result<(Project, PipelineConfig), Failure> {
    let mut project = load_manifest(&opts.project).map_err(Failure::input)?;
    let step_budget = env_step_budget()?.or(project.step_budget).unwrap_or(DEFAULT_STEP_BUDGET);
    if Some(step_budget) != project.step_budget {
        project.reclassify(step_budget);
    }
    let config = PipelineConfig {
        window: opts.window,
        step_budget,
        candidate_budget: opts.candidate_budget,
        time_budget_ms: opts.time_budget_ms,
        criterion: parse_criterion(&opts.criterion).map_err(Failure::input)?,
        slice_inputs: match opts.slice_inputs {
            SliceInputsArg::Failing => SliceInputs::FailingOnly,
            SliceInputsArg::All => SliceInputs::AllTests,
        },
        filter_sl_by_slice: opts.filter_sl_by_slice,
        setup: opts.setup,
    };
    config.validate().map_err(Failure::input)?;
    Ok((project, config))
}

fn with_config<T: serde::Serialize>(value: &T, config: &PipelineConfig) -> Value {
    let mut v = serde_json::to_value(value).expect("artifacts serialize");
    if let Value::Object(map) = &mut v {
        map.insert("config".into(), serde_json::to_value(config).expect("config serializes"));
    }
    v
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::output(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Failure::output(path, e))
}

fn write_json(path: &Path, value: &Value) -> Result<(), Failure> {
    write(path, &format!("{}\n", serde_json::to_string_pretty(value).expect("json serializes")))
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn read_slice_report(path: &Path) -> Result<SliceReport, Failure> {
    serde_json::from_str(&read(path)?).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn read_suite(path: &Path, project: &Project, config: &PipelineConfig) -> Result<TestSuite, Failure> {
    let suite = load_suite(path).map_err(Failure::input)?;
    Ok(suite.classified(&project.program, config.step_budget))
}

fn require_failing(suite: &TestSuite) -> Result<(), Failure> {
    if suite.failing_count() == 0 {
        return Err(PipelineError::NoFailingTests.into());
    }
    Ok(())
}

fn slice_text(slice: &SliceResult) -> String {
    slice.slice.source_preserving_indices().unwrap_or_else(|| slice.slice.source())
}

fn outcome_json(outcome: &RepairOutcome, check: Option<FullSuiteCheck>, config: &PipelineConfig) -> Value {
    let mut v = with_config(&outcome.to_json(), config);
    v["full_suite_check"] = serde_json::to_value(check).expect("check serializes");
    v
}

fn full_suite_check(outcome: &RepairOutcome, project: &Project, config: &PipelineConfig) -> Option<FullSuiteCheck> {
    let patch = outcome.patch.as_ref()?;
    (config.setup != Setup::Full)
        .then(|| check_on_full_suite(patch, &project.program, &project.suite, config.step_budget))
}

fn verdict(outcome: &RepairOutcome, check: Option<FullSuiteCheck>) -> Result<(), Failure> {
    match (&outcome.patch, check) {
        (None, _) => Err(Failure {
            code: 4,
            kind: "no-patch",
            message: format!("no plausible patch after {} candidates", outcome.npc),
        }),
        (Some(_), Some(c)) if c != FullSuiteCheck::Valid => Err(Failure {
            code: 5,
            kind: "invalid-on-full-suite",
            message: "the patch does not pass the full test suite".into(),
        }),
        _ => Ok(()),
    }
}

fn cmd_slice(opts: &PipelineOpts, out: &Path, report: &Path) -> Result<(), Failure> {
    let (project, config) = load(opts)?;
    require_failing(&project.suite)?;
    let slice = slice_project(&project.program, &project.suite, &config)?;
    write(out, &slice_text(&slice))?;
    write_json(report, &with_config(&slice.report(), &config))
}

fn cmd_localize(
    opts: &PipelineOpts,
    suite: Option<&Path>,
    slice_report: Option<&Path>,
    out: &Path,
) -> Result<(), Failure> {
    let (project, config) = load(opts)?;
    let (suite, provenance) = match suite {
        Some(p) => (read_suite(p, &project, &config)?, Provenance::ReducedSuite),
        None => (project.suite.clone(), Provenance::FullSuite),
    };
    let filter = slice_report.map(read_slice_report).transpose()?;
    let sl = localize(&project.program, &suite, filter.as_ref(), config.step_budget, provenance)?;
    write(out, &format!("{}\n", sl.to_json()))
}

fn cmd_reduce(opts: &PipelineOpts, slice_report: &Path, out: &Path, report: &Path) -> Result<(), Failure> {
    let (project, config) = load(opts)?;
    let slice = read_slice_report(slice_report)?;
    let (reduced, rep): (TestSuite, ReductionReport) =
        reduce_suite(&project.program, &project.suite, &slice, config.step_budget)?;
    write(out, &format!("{}\n", reduced.to_json()))?;
    write_json(report, &with_config(&rep, &config))
}

fn cmd_repair(
    opts: &PipelineOpts,
    suspicious: &Path,
    suite: Option<&Path>,
    program: Option<&Path>,
    out: &Path,
) -> Result<(), Failure> {
    let (project, config) = load(opts)?;
    let provenance = if suite.is_some() { Provenance::ReducedSuite } else { Provenance::FullSuite };
    let sl = SuspiciousList::from_json(&read(suspicious)?, provenance)
        .map_err(|e| Failure::input(format!("{}: {e}", suspicious.display())))?;
    let repair_suite = match suite {
        Some(p) => read_suite(p, &project, &config)?,
        None => project.suite.clone(),
    };
    require_failing(&repair_suite)?;
    let repair_program = match program {
        Some(p) => Program::parse_named(&p.display().to_string(), &read(p)?).map_err(Failure::input)?,
        None => project.program.clone(),
    };
    let outcome = repair(&repair_program, &repair_suite, &sl, &config.repair_config(), config.setup);
    let check = full_suite_check(&outcome, &project, &config);
    write_json(out, &outcome_json(&outcome, check, &config))?;
    verdict(&outcome, check)
}

fn cmd_run_pipeline(opts: &PipelineOpts, out: &Path) -> Result<(), Failure> {
    let (project, config) = load(opts)?;
    let run = run_pipeline(&project.program, &project.suite, &config)?;
    write(&out.join("slice.mini"), &slice_text(&run.slice))?;
    write_json(&out.join("slice_report.json"), &with_config(&run.slice.report(), &config))?;
    write(&out.join("reduced_tests.json"), &format!("{}\n", run.reduced_suite.to_json()))?;
    write_json(&out.join("reduction_report.json"), &with_config(&run.reduction, &config))?;
    write(&out.join("suspicious.json"), &format!("{}\n", run.suspicious.to_json()))?;
    write_json(&out.join("outcome.json"), &outcome_json(&run.outcome, run.full_suite_check, &config))?;
    verdict(&run.outcome, run.full_suite_check)
}

fn cmd_bench(corpus: &Path, seeds: usize, rng: u64, out: &Path, window: usize) -> Result<(), Failure> {
    if window == 0 {
        return Err(Failure::input("window must be at least 1"));
    }
    let fixtures = load_corpus(corpus).map_err(Failure::input)?;
    let config = BenchConfig { window, ..BenchConfig::default() };
    let run = run_bench(&fixtures, seeds, rng, &config);
    let echo = json!({
        "corpus": corpus.display().to_string(),
        "seeds": seeds,
        "rng": rng,
        "window": config.window,
        "candidate_budget": config.repair.max_candidates,
        "time_budget_ms": config.repair.max_time_ms,
        "step_budget": config.repair.step_budget,
        "slice_inputs": config.slice_inputs,
        "filter_sl_by_slice": config.filter_sl_by_slice,
    });
    emit_report(&run, echo, out).map_err(|e| Failure::output(out, e))
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Failure::input("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::input(format!("cannot size the thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Slice { opts, out, report } => cmd_slice(opts, out, report),
        Command::Localize { opts, suite, slice_report, out } => {
            cmd_localize(opts, suite.as_deref(), slice_report.as_deref(), out)
        }
        Command::ReduceTests { opts, slice_report, out, report } => cmd_reduce(opts, slice_report, out, report),
        Command::Repair { opts, suspicious, suite, program, out } => {
            cmd_repair(opts, suspicious, suite.as_deref(), program.as_deref(), out)
        }
        Command::Bench { corpus, seeds, rng, out, window } => cmd_bench(corpus, *seeds, *rng, out, *window),
        Command::RunPipeline { opts, out } => cmd_run_pipeline(opts, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let msg = json!({"error": "usage", "exit_code": 2, "message": e.to_string().trim_end()});
            eprintln!("{msg}");
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", json!({"error": f.kind, "exit_code": f.code, "message": f.message}));
            ExitCode::from(f.code)
        }
    }
}
