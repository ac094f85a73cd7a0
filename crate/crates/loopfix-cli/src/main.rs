//! Command-line driver for the loop repair pipeline. Each stage is its own
//! subcommand so the intermediate artifacts (hang reports, clamp records,
//! pair files) can be inspected or fed to external tooling; `repair` runs
//! the whole pipeline end to end.

use std::fmt::Display;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use loopfix_core::angelic::{find_angelic_records, idempotence_probe, ProbeStrategy};
use loopfix_core::collect::{build_specification, parse_pairs, write_pairs};
use loopfix_core::detect::{detect_infinite_loops, HangingReport};
use loopfix_core::instrument::instrument;
use loopfix_core::lang::{load_program, LoopId, Program};
use loopfix_core::repair::{repair, RepairConfig, RepairError, RepairReport};
use loopfix_core::synth::{
    encode, synthesize, Backend, SolverCmd, SynthConfig, SynthError,
};
use loopfix_core::DEFAULT_GLOBAL_CAP;

// Exit codes are part of the contract: scripts branch on them.
const EXIT_INTERNAL: u8 = 1;
const EXIT_INPUT: u8 = 2; // also clap's own code for bad usage
const EXIT_NO_HANG: u8 = 3;
const EXIT_MINING: u8 = 4;
const EXIT_EMPTY_SPEC: u8 = 5;
const EXIT_SYNTH: u8 = 6;
const EXIT_VALIDATION: u8 = 7;
const EXIT_TARGETING: u8 = 8;
const EXIT_SOLVER: u8 = 9;
const EXIT_CORPUS: u8 = 10;

#[derive(Parser)]
#[command(
    name = "loopfix",
    about = "Test-suite-driven repair of infinite loops",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Find loops that hit the iteration cap under the test suite
    Detect {
        /// Program file
        file: PathBuf,
        #[command(flatten)]
        run: RunOpts,
        #[command(flatten)]
        format: FormatOpt,
    },
    /// Mine the smallest forced-break count that lets each hanging test pass
    Mine {
        file: PathBuf,
        #[command(flatten)]
        run: RunOpts,
        #[command(flatten)]
        mine: MineOpts,
        #[command(flatten)]
        format: FormatOpt,
    },
    /// Gather guard-decision pairs from clamped runs into a pair file
    Collect {
        file: PathBuf,
        #[command(flatten)]
        run: RunOpts,
        #[command(flatten)]
        mine: MineOpts,
        /// Write the pair file here instead of stdout
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        #[command(flatten)]
        format: FormatOpt,
    },
    /// Synthesize a guard from a pair file
    Synth {
        /// Pair file produced by `collect`
        file: PathBuf,
        #[command(flatten)]
        synth: SynthOpts,
        /// Print the SMT-LIB2 encoding of the `--max-stage` formulation and
        /// stop without solving
        #[arg(long)]
        emit_smtlib: bool,
        /// Include search time in the output
        #[arg(long)]
        timings: bool,
        #[command(flatten)]
        format: FormatOpt,
    },
    /// Run the whole pipeline and validate the patch
    Repair {
        file: PathBuf,
        #[command(flatten)]
        run: RunOpts,
        #[command(flatten)]
        mine: MineOpts,
        #[command(flatten)]
        synth: SynthOpts,
        /// Refuse to pick a loop when several hang
        #[arg(long)]
        fix_all: bool,
        /// Print the report even when validation fails (exit code stays 7)
        #[arg(long)]
        emit_unvalidated: bool,
        /// Include per-phase wall-clock times in the report
        #[arg(long)]
        timings: bool,
        /// Write the patched program here
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        #[command(flatten)]
        format: FormatOpt,
    },
    /// Repair every program in a corpus directory and grade the results
    /// against its manifest
    Corpus {
        /// Directory containing manifest.toml and the program files
        dir: PathBuf,
        #[command(flatten)]
        format: FormatOpt,
    },
}

#[derive(Args)]
struct RunOpts {
    /// Iterations at which a loop counts as infinite
    #[arg(long, value_name = "N", default_value_t = DEFAULT_GLOBAL_CAP)]
    max_iterations: u64,
    /// Work on this loop (`decl#index`) instead of the first hanging one
    #[arg(long = "loop", value_name = "DECL#INDEX")]
    target: Option<String>,
}

#[derive(Args)]
struct MineOpts {
    #[arg(long, value_enum, default_value_t = Probe::Linear)]
    probe_strategy: Probe,
    /// Wall-clock budget for clamp probing, in seconds
    #[arg(long, value_name = "SECONDS")]
    mining_budget: Option<f64>,
}

#[derive(Args)]
struct SynthOpts {
    /// Highest operator bundle to try (0-5)
    #[arg(long, value_name = "N", default_value_t = 5, value_parser = clap::value_parser!(u32).range(0..=5))]
    max_stage: u32,
    /// Instances allowed per operator in one candidate
    #[arg(long, value_name = "N", default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..))]
    component_multiplicity: u8,
    /// Wall-clock budget for the guard search, in seconds
    #[arg(long, value_name = "SECONDS")]
    synth_budget: Option<f64>,
    /// External SMT solver command, e.g. "z3 -smt2" (SMT file path is
    /// appended); LOOPFIX_SOLVER_CMD is read when the flag is absent
    #[arg(long, value_name = "CMD")]
    solver_cmd: Option<String>,
}

#[derive(Args)]
struct FormatOpt {
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Probe {
    /// Try clamps 0, 1, 2, ... in order; always finds the minimum
    Linear,
    /// Grow then bisect; exact only when larger clamps cannot break a
    /// passing test
    Exp,
}

impl Probe {
    fn strategy(self) -> ProbeStrategy {
        match self {
            Probe::Linear => ProbeStrategy::Linear,
            Probe::Exp => ProbeStrategy::ExponentialBisect,
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

type CmdResult = Result<(), Failure>;

fn fail(code: u8, err: impl Display) -> Failure {
    Failure { code, message: err.to_string() }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Detect { file, run, format } => cmd_detect(&file, &run, format.format),
        Cmd::Mine { file, run, mine, format } => cmd_mine(&file, &run, &mine, format.format),
        Cmd::Collect { file, run, mine, out, format } => {
            cmd_collect(&file, &run, &mine, out.as_deref(), format.format)
        }
        Cmd::Synth { file, synth, emit_smtlib, timings, format } => {
            cmd_synth(&file, &synth, emit_smtlib, timings, format.format)
        }
        Cmd::Repair {
            file,
            run,
            mine,
            synth,
            fix_all,
            emit_unvalidated,
            timings,
            out,
            format,
        } => cmd_repair(
            &file,
            &run,
            &mine,
            &synth,
            fix_all,
            emit_unvalidated,
            timings,
            out.as_deref(),
            format.format,
        ),
        Cmd::Corpus { dir, format } => cmd_corpus(&dir, format.format),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn read_to_string(path: &std::path::Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| fail(EXIT_INPUT, format!("cannot read {}: {e}", path.display())))
}

fn load(path: &std::path::Path) -> Result<Program, Failure> {
    let source = read_to_string(path)?;
    load_program(&source).map_err(|e| fail(EXIT_INPUT, e))
}

fn budget(seconds: Option<f64>) -> Result<Option<Duration>, Failure> {
    match seconds {
        None => Ok(None),
        Some(s) if s >= 0.0 && s.is_finite() => Ok(Some(Duration::from_secs_f64(s))),
        Some(s) => Err(fail(EXIT_INPUT, format!("budget must be a non-negative number, got {s}"))),
    }
}

fn parse_target(text: &str) -> Result<LoopId, Failure> {
    LoopId::parse(text)
        .ok_or_else(|| fail(EXIT_INPUT, format!("`{text}` is not a loop id (want `decl#index`)")))
}

/// Mirrors the pipeline's choice: an explicit target must actually hang;
/// otherwise take the first hanging loop in report order.
fn select_target(
    program: &Program,
    report: &HangingReport,
    requested: &Option<String>,
) -> Result<LoopId, Failure> {
    match requested {
        Some(text) => {
            let id = parse_target(text)?;
            if report.loops().contains(&id) {
                Ok(id)
            } else if program.find_loop(&id).is_some() {
                Err(fail(EXIT_TARGETING, format!("loop {id} does not hang at this cap")))
            } else {
                Err(fail(EXIT_TARGETING, format!("program has no loop {id}")))
            }
        }
        None => Ok(report.loops()[0].clone()),
    }
}

fn print_json(value: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("report serializes"));
}

fn repair_exit_code(err: &RepairError) -> u8 {
    match err {
        RepairError::Language(_) => EXIT_INPUT,
        RepairError::NoInfiniteLoop { .. } => EXIT_NO_HANG,
        RepairError::TargetNotHanging(_)
        | RepairError::UnknownTarget(_)
        | RepairError::MultipleHanging(_) => EXIT_TARGETING,
        RepairError::Mining(_) => EXIT_MINING,
        RepairError::Collect(_) => EXIT_EMPTY_SPEC,
        RepairError::Synth(SynthError::Solver(_)) => EXIT_SOLVER,
        RepairError::Synth(SynthError::EmptyPairSet) => EXIT_EMPTY_SPEC,
        RepairError::Synth(_) => EXIT_SYNTH,
        RepairError::Validation { .. } => EXIT_VALIDATION,
        RepairError::Internal(_) => EXIT_INTERNAL,
    }
}

// --- detect -----------------------------------------------------------------

fn cmd_detect(path: &std::path::Path, run: &RunOpts, format: Format) -> CmdResult {
    let program = instrument(&load(path)?);
    let detection = detect_infinite_loops(&program, run.max_iterations);
    let report = &detection.report;
    match format {
        Format::Json => print_json(report),
        Format::Text => {
            if report.is_empty() {
                println!("no loop reaches {} iterations under the test suite", report.cap);
            } else {
                println!("cap {}", report.cap);
                for e in &report.entries {
                    println!("test {} hangs in {} (invocation {})", e.test, e.loop_id, e.rank);
                }
            }
        }
    }
    Ok(())
}

// --- mine -------------------------------------------------------------------

#[derive(serde::Serialize)]
struct ProbeOut {
    test: String,
    passes_at_cap: bool,
}

#[derive(serde::Serialize)]
struct MineOut {
    target: String,
    records: Vec<loopfix_core::angelic::AngelicRecord>,
    idempotence: Vec<ProbeOut>,
}

fn mine_records(
    path: &std::path::Path,
    run: &RunOpts,
    mine: &MineOpts,
) -> Result<(Program, loopfix_core::detect::Detection, LoopId, MineOut), Failure> {
    let program = instrument(&load(path)?);
    let detection = detect_infinite_loops(&program, run.max_iterations);
    if detection.report.is_empty() {
        return Err(fail(
            EXIT_NO_HANG,
            format!("no loop reaches {} iterations under the test suite", run.max_iterations),
        ));
    }
    let target = select_target(&program, &detection.report, &run.target)?;
    let records = find_angelic_records(
        &program,
        &target,
        &detection.report,
        mine.probe_strategy.strategy(),
        budget(mine.mining_budget)?,
    )
    .map_err(|e| fail(EXIT_MINING, e))?;
    let idempotence = idempotence_probe(&program, &target, &detection.report)
        .into_iter()
        .map(|(test, passes_at_cap)| ProbeOut { test, passes_at_cap })
        .collect();
    let out = MineOut { target: target.to_string(), records, idempotence };
    Ok((program, detection, target, out))
}

fn cmd_mine(path: &std::path::Path, run: &RunOpts, mine: &MineOpts, format: Format) -> CmdResult {
    let (_, _, _, out) = mine_records(path, run, mine)?;
    match format {
        Format::Json => print_json(&out),
        Format::Text => {
            println!("target {}", out.target);
            for r in &out.records {
                let probe = out
                    .idempotence
                    .iter()
                    .find(|p| p.test == r.test)
                    .map(|p| if p.passes_at_cap { "yes" } else { "no" })
                    .unwrap_or("?");
                println!(
                    "test {} (invocation {}): minimal clamp {}, passes at cap: {}",
                    r.test, r.rank, r.chi, probe
                );
            }
        }
    }
    Ok(())
}

// --- collect ------------------------------------------------------------------

#[derive(serde::Serialize)]
struct CollectOut {
    target: String,
    pair_file: String,
    rows: usize,
    columns: usize,
    raw_rows: usize,
    pruned_columns: Vec<String>,
    contributing_tests: Vec<String>,
}

fn cmd_collect(
    path: &std::path::Path,
    run: &RunOpts,
    mine: &MineOpts,
    out: Option<&std::path::Path>,
    format: Format,
) -> CmdResult {
    let (program, detection, target, mined) = mine_records(path, run, mine)?;
    let build = build_specification(
        &program,
        &target,
        &detection,
        &mined.records,
        run.max_iterations,
    )
    .map_err(|e| fail(EXIT_EMPTY_SPEC, e))?;
    let text = write_pairs(&build.pair_set);
    if let Some(dest) = out {
        std::fs::write(dest, &text)
            .map_err(|e| fail(EXIT_INTERNAL, format!("cannot write {}: {e}", dest.display())))?;
    }
    match format {
        Format::Json => print_json(&CollectOut {
            target: target.to_string(),
            pair_file: text,
            rows: build.pair_set.pairs.len(),
            columns: build.pair_set.columns.len(),
            raw_rows: build.raw_rows,
            pruned_columns: build.pruned.clone(),
            contributing_tests: build.contributing_tests.clone(),
        }),
        Format::Text => {
            if out.is_none() {
                print!("{text}");
            }
        }
    }
    Ok(())
}

// --- synth --------------------------------------------------------------------

#[derive(serde::Serialize)]
struct SynthOut {
    guard: String,
    formulations: u32,
    components: u32,
    component_types: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    search_millis: Option<u128>,
}

fn synth_config(opts: &SynthOpts) -> Result<SynthConfig, Failure> {
    let solver = opts
        .solver_cmd
        .clone()
        .or_else(|| std::env::var("LOOPFIX_SOLVER_CMD").ok().filter(|s| !s.trim().is_empty()));
    let backend = match solver {
        Some(text) => Backend::External(
            SolverCmd::parse(&text)
                .ok_or_else(|| fail(EXIT_INPUT, "solver command must not be empty"))?,
        ),
        None => Backend::Internal,
    };
    Ok(SynthConfig {
        max_stage: opts.max_stage,
        multiplicity: opts.component_multiplicity,
        budget: budget(opts.synth_budget)?,
        backend,
    })
}

fn cmd_synth(
    path: &std::path::Path,
    opts: &SynthOpts,
    emit_smtlib: bool,
    timings: bool,
    format: Format,
) -> CmdResult {
    let set = parse_pairs(&read_to_string(path)?).map_err(|e| fail(EXIT_INPUT, e))?;
    if emit_smtlib {
        let enc = encode(&set, opts.max_stage, opts.component_multiplicity);
        print!("{}", enc.text);
        return Ok(());
    }
    let config = synth_config(opts)?;
    let synthesis = synthesize(&set, &config).map_err(|e| {
        let code = match &e {
            SynthError::Solver(_) => EXIT_SOLVER,
            SynthError::EmptyPairSet => EXIT_EMPTY_SPEC,
            _ => EXIT_SYNTH,
        };
        fail(code, e)
    })?;
    let guard = loopfix_core::synth::render(&synthesis.term, &set.columns);
    match format {
        Format::Json => print_json(&SynthOut {
            guard,
            formulations: synthesis.stats.formulations,
            components: synthesis.stats.components,
            component_types: synthesis.stats.component_types,
            search_millis: timings.then_some(synthesis.stats.search_millis),
        }),
        Format::Text => {
            println!("guard: {guard}");
            println!(
                "formulations {}, components {}, component types {}",
                synthesis.stats.formulations,
                synthesis.stats.components,
                synthesis.stats.component_types
            );
        }
    }
    Ok(())
}

// --- repair ---------------------------------------------------------------------

fn print_repair_text(report: &RepairReport) {
    println!("loop {} (cap {})", report.loop_id, report.cap);
    for e in &report.hanging {
        let chi = report
            .angelic
            .iter()
            .find(|r| r.test == e.test)
            .map(|r| r.chi.to_string())
            .unwrap_or_else(|| "?".into());
        let probe = report
            .idempotence
            .iter()
            .find(|p| p.test == e.test)
            .map(|p| if p.passes_at_cap { "yes" } else { "no" })
            .unwrap_or("?");
        println!(
            "hanging test {} (invocation {}): minimal clamp {}, passes at cap: {}",
            e.test, e.rank, chi, probe
        );
    }
    println!(
        "pairs: {} rows x {} columns from {} test(s)",
        report.context_items,
        report.context_size.saturating_sub(1),
        report.contributing_tests.len()
    );
    println!(
        "synthesis: formulations {}, components {}, component types {}",
        report.stats.formulations, report.stats.components, report.stats.component_types
    );
    print!("{}", report.diff);
    match &report.validation {
        loopfix_core::repair::ValidationVerdict::Passed { tests } => {
            println!("validation: passed ({tests} tests)");
        }
        loopfix_core::repair::ValidationVerdict::Failed { tests, failures } => {
            println!("validation: FAILED ({} of {tests} tests)", failures.len());
            for f in failures {
                println!("  {}: {}", f.test, f.outcome);
            }
        }
    }
    if let Some(t) = &report.times {
        println!(
            "times (ms): instrumentation {}, compilation {}, test suite {}, hanging tests {}, \
             mining {}, collection {}, search {}, total {}",
            t.instrumentation,
            t.compilation,
            t.test_suite,
            t.hanging_tests,
            t.angelic_mining,
            t.value_collection,
            t.smt_solving,
            t.total
        );
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_repair(
    path: &std::path::Path,
    run: &RunOpts,
    mine: &MineOpts,
    synth: &SynthOpts,
    fix_all: bool,
    emit_unvalidated: bool,
    timings: bool,
    out: Option<&std::path::Path>,
    format: Format,
) -> CmdResult {
    let source = read_to_string(path)?;
    let target = match &run.target {
        Some(text) => Some(parse_target(text)?),
        None => None,
    };
    let config = RepairConfig {
        cap: run.max_iterations,
        target,
        fix_all,
        probe: mine.probe_strategy.strategy(),
        mining_budget: budget(mine.mining_budget)?,
        synth: synth_config(synth)?,
    };
    let (mut report, failure) = match repair(&source, &config) {
        Ok(report) => (report, None),
        Err(RepairError::Validation { report }) if emit_unvalidated => {
            (*report, Some(fail(EXIT_VALIDATION, "the patch does not pass the test suite")))
        }
        Err(e) => return Err(fail(repair_exit_code(&e), e)),
    };
    if !timings {
        report.times = None;
    }
    if let Some(dest) = out {
        std::fs::write(dest, &report.patched_source)
            .map_err(|e| fail(EXIT_INTERNAL, format!("cannot write {}: {e}", dest.display())))?;
    }
    match format {
        Format::Json => print_json(&report),
        Format::Text => print_repair_text(&report),
    }
    match failure {
        Some(f) => Err(f),
        None => Ok(()),
    }
}

// --- corpus ---------------------------------------------------------------------

#[derive(serde::Serialize)]
struct CorpusCheckOut {
    ok: bool,
    detail: String,
}

#[derive(serde::Serialize)]
struct CorpusCaseOut {
    name: String,
    passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    patched_guard: Option<String>,
    checks: Vec<CorpusCheckOut>,
}

fn cmd_corpus(dir: &std::path::Path, format: Format) -> CmdResult {
    let outcome = loopfix_core::corpus::run_corpus(dir).map_err(|e| fail(EXIT_INPUT, e))?;
    let all_passed = outcome.all_passed();
    match format {
        Format::Json => {
            let cases: Vec<CorpusCaseOut> = outcome
                .outcomes
                .iter()
                .map(|o| CorpusCaseOut {
                    name: o.name.clone(),
                    passed: o.passed(),
                    patched_guard: o.report.as_ref().map(|r| r.patched_guard.clone()),
                    checks: o
                        .checks
                        .iter()
                        .map(|c| CorpusCheckOut { ok: c.ok, detail: c.detail.clone() })
                        .collect(),
                })
                .collect();
            print_json(&cases);
        }
        Format::Text => {
            for o in &outcome.outcomes {
                if o.passed() {
                    let guard = o
                        .report
                        .as_ref()
                        .map(|r| format!(" (patched `{}`)", r.patched_guard))
                        .unwrap_or_default();
                    println!("ok   {}{}", o.name, guard);
                } else {
                    println!("FAIL {}", o.name);
                    for c in o.checks.iter().filter(|c| !c.ok) {
                        println!("     {}", c.detail);
                    }
                }
            }
            let passed = outcome.outcomes.iter().filter(|o| o.passed()).count();
            println!("{passed}/{} cases pass", outcome.outcomes.len());
        }
    }
    if all_passed {
        Ok(())
    } else {
        Err(fail(EXIT_CORPUS, "corpus expectations not met"))
    }
}
