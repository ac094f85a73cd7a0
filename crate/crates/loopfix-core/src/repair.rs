//! The end-to-end repair driver: instrument, detect, mine angelic records,
//! collect pairs, synthesize a guard, splice it into the source, and re-run
//! the suite on the patched program.
//!
//! The patch is textual. The parser records exact byte spans, so the new
//! guard is spliced into the original (un-instrumented) source and every
//! other byte of the program survives unchanged. The spliced source is then
//! parsed and type-checked again before validation, so a report always
//! describes a well-formed program.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::angelic::{
    find_angelic_records, idempotence_probe, AngelicError, AngelicRecord, ProbeStrategy,
};
use crate::collect::{build_specification, CollectError};
use crate::detect::{Detection, HangingEntry};
use crate::instrument::instrument;
use crate::interp::{run_suite, run_test, MonitorConfig, DEFAULT_GLOBAL_CAP};
use crate::lang::ast::LoopId;
use crate::lang::{expr_to_string, load_program, LangError};
use crate::synth::{synthesize, term_to_guard, SynthConfig, SynthError, SynthesisStats};

#[derive(Debug, Clone)]
pub struct RepairConfig {
    /// Iteration cap used for detection, mining, and the safety cap during
    /// validation.
    pub cap: u64,
    /// Repair this loop instead of the first hanging one. It must actually
    /// hang; asking for a healthy loop is an error, not a no-op.
    pub target: Option<LoopId>,
    /// Refuse to proceed when more than one loop hangs. Without this flag the
    /// driver repairs the first loop in report order and leaves the rest for
    /// a later run on the patched program.
    pub fix_all: bool,
    pub probe: ProbeStrategy,
    /// Wall-clock budget for angelic record mining.
    pub mining_budget: Option<Duration>,
    pub synth: SynthConfig,
}

impl Default for RepairConfig {
    fn default() -> Self {
        RepairConfig {
            cap: DEFAULT_GLOBAL_CAP,
            target: None,
            fix_all: false,
            probe: ProbeStrategy::default(),
            mining_budget: None,
            synth: SynthConfig::default(),
        }
    }
}

/// Result of clamping a hanging test at the cap itself: if it passes, the
/// looping guard was sound and only the iteration count was wrong.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IdempotenceProbe {
    pub test: String,
    pub passes_at_cap: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TestFailure {
    pub test: String,
    pub outcome: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ValidationVerdict {
    Passed { tests: usize },
    Failed { tests: usize, failures: Vec<TestFailure> },
}

impl ValidationVerdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, ValidationVerdict::Passed { .. })
    }
}

/// Wall-clock milliseconds per pipeline phase. `test_suite` covers both the
/// initial monitored run and the validation re-run; `hanging_tests` is the
/// share of the initial run spent inside tests that hit the cap on the
/// repaired loop. `smt_solving` is the guard search regardless of backend.
/// `total` is the sum of the other seven.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PhaseTimes {
    pub instrumentation: u128,
    pub compilation: u128,
    pub test_suite: u128,
    pub hanging_tests: u128,
    pub angelic_mining: u128,
    pub value_collection: u128,
    pub smt_solving: u128,
    pub total: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepairReport {
    pub loop_id: LoopId,
    /// Iteration cap in force during detection and validation.
    pub cap: u64,
    /// Guard text exactly as it appears in the original source.
    pub original_guard: String,
    pub patched_guard: String,
    /// Hanging observations for the repaired loop.
    pub hanging: Vec<HangingEntry>,
    pub angelic: Vec<AngelicRecord>,
    pub idempotence: Vec<IdempotenceProbe>,
    /// Tests that contributed pairs, in declaration order.
    pub contributing_tests: Vec<String>,
    /// Deduplicated (input, output) pairs in the specification.
    pub context_items: usize,
    /// Values per pair: inputs plus one output.
    pub context_size: usize,
    /// Rows observed before deduplication.
    pub raw_rows: usize,
    /// Constant columns dropped before synthesis.
    pub pruned_columns: Vec<String>,
    pub stats: SynthesisStats,
    pub validation: ValidationVerdict,
    pub patched_source: String,
    /// Line diff between the original and patched source.
    pub diff: String,
    /// Set to `None` to keep serialized reports stable across runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub times: Option<PhaseTimes>,
}

#[derive(Debug, thiserror::Error)]
pub enum RepairError {
    #[error(transparent)]
    Language(#[from] LangError),
    #[error("every test finished within {cap} iterations; there is no infinite loop to repair")]
    NoInfiniteLoop { cap: u64 },
    #[error("loop {0} exists but no test hangs in it")]
    TargetNotHanging(LoopId),
    #[error("no loop {0} in the program")]
    UnknownTarget(LoopId),
    #[error("{} loops hang ({}); repair them one at a time", .0.len(), render_ids(.0))]
    MultipleHanging(Vec<LoopId>),
    #[error(transparent)]
    Mining(#[from] AngelicError),
    #[error(transparent)]
    Collect(#[from] CollectError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("patched guard `{}` does not make the whole suite pass", report.patched_guard)]
    Validation { report: Box<RepairReport> },
    #[error("internal error: {0}")]
    Internal(String),
}

fn render_ids(ids: &[LoopId]) -> String {
    let parts: Vec<String> = ids.iter().map(|id| id.to_string()).collect();
    parts.join(", ")
}

/// Minimal line diff: one hunk covering the lines that differ.
fn line_diff(original: &str, patched: &str) -> String {
    let a: Vec<&str> = original.lines().collect();
    let b: Vec<&str> = patched.lines().collect();
    let mut lo = 0;
    while lo < a.len() && lo < b.len() && a[lo] == b[lo] {
        lo += 1;
    }
    let (mut a_hi, mut b_hi) = (a.len(), b.len());
    while a_hi > lo && b_hi > lo && a[a_hi - 1] == b[b_hi - 1] {
        a_hi -= 1;
        b_hi -= 1;
    }
    if lo == a_hi && lo == b_hi {
        return "(no textual change)".to_string();
    }
    let mut out = String::new();
    let _ = writeln!(out, "@@ line {} @@", lo + 1);
    for line in &a[lo..a_hi] {
        let _ = writeln!(out, "-{line}");
    }
    for line in &b[lo..b_hi] {
        let _ = writeln!(out, "+{line}");
    }
    out
}

/// Repairs one infinite loop in `source` and returns the full report. When
/// the suite still fails on the patched program the report rides along in
/// [`RepairError::Validation`] so callers can inspect (or emit) the candidate
/// patch anyway.
pub fn repair(source: &str, config: &RepairConfig) -> Result<RepairReport, RepairError> {
    let overall = Instant::now();

    // Parse and type-check the original program.
    let compile_start = Instant::now();
    let original = load_program(source)?;
    let mut compilation = compile_start.elapsed();

    let instrument_start = Instant::now();
    let monitored = instrument(&original);
    let instrumentation = instrument_start.elapsed();

    // Run the suite under the cap, timing each test so the hanging share can
    // be reported separately.
    let monitor = MonitorConfig::with_cap(config.cap);
    let mut runs = Vec::new();
    let mut durations = Vec::new();
    for test in monitored.tests() {
        let start = Instant::now();
        let run = run_test(&monitored, &test.name, &monitor)
            .map_err(|e| RepairError::Internal(e.to_string()))?;
        durations.push((test.name.clone(), start.elapsed()));
        runs.push((test.name.clone(), run));
    }
    let test_suite: Duration = durations.iter().map(|(_, d)| *d).sum();
    let detection = Detection::from_runs(&monitored, config.cap, runs);

    if detection.report.is_empty() {
        return Err(RepairError::NoInfiniteLoop { cap: config.cap });
    }
    let hanging_loops = detection.report.loops();
    if config.fix_all && hanging_loops.len() > 1 {
        return Err(RepairError::MultipleHanging(hanging_loops));
    }
    let target = match &config.target {
        Some(id) => {
            if hanging_loops.contains(id) {
                id.clone()
            } else if original.find_loop(id).is_some() {
                return Err(RepairError::TargetNotHanging(id.clone()));
            } else {
                return Err(RepairError::UnknownTarget(id.clone()));
            }
        }
        None => hanging_loops[0].clone(),
    };
    let hanging: Vec<HangingEntry> =
        detection.report.entries_for(&target).cloned().collect();
    let hanging_tests: Duration = durations
        .iter()
        .filter(|(name, _)| hanging.iter().any(|e| &e.test == name))
        .map(|(_, d)| *d)
        .sum();

    let mining_start = Instant::now();
    let angelic = find_angelic_records(
        &monitored,
        &target,
        &detection.report,
        config.probe,
        config.mining_budget,
    )?;
    let idempotence: Vec<IdempotenceProbe> =
        idempotence_probe(&monitored, &target, &detection.report)
            .into_iter()
            .map(|(test, passes_at_cap)| IdempotenceProbe { test, passes_at_cap })
            .collect();
    let angelic_mining = mining_start.elapsed();

    let collect_start = Instant::now();
    let spec = build_specification(&monitored, &target, &detection, &angelic, config.cap)?;
    let value_collection = collect_start.elapsed();

    let synth_start = Instant::now();
    let synthesis = synthesize(&spec.pair_set, &config.synth)?;
    let smt_solving = synth_start.elapsed();

    let guard_expr = term_to_guard(&synthesis.term, &spec.pair_set.columns)
        .map_err(|e| RepairError::Internal(format!("guard decode failed: {e}")))?;
    let patched_guard = expr_to_string(&guard_expr);

    // Splice the new guard over the old one's byte span in the original
    // source. Instrumentation never touches spans, so the monitored AST's
    // guard span indexes the original text.
    let span = original
        .find_loop(&target)
        .ok_or_else(|| RepairError::Internal(format!("loop {target} vanished")))?
        .guard
        .span;
    let original_guard = source[span.start..span.end].to_string();
    let mut patched_source = String::with_capacity(source.len());
    patched_source.push_str(&source[..span.start]);
    patched_source.push_str(&patched_guard);
    patched_source.push_str(&source[span.end..]);

    // The spliced text must parse and type-check like any other program.
    let recompile_start = Instant::now();
    let patched = load_program(&patched_source)
        .map_err(|e| RepairError::Internal(format!("patched source does not compile: {e}")))?;
    compilation += recompile_start.elapsed();

    // Validate on the patched program as-is: no monitors, just the safety cap
    // that turns any remaining infinite loop into a runtime error.
    let validate_start = Instant::now();
    let validation_runs = run_suite(&patched, &MonitorConfig::with_cap(config.cap));
    let validate_time = validate_start.elapsed();
    let failures: Vec<TestFailure> = validation_runs
        .iter()
        .filter(|(_, r)| !r.outcome.is_pass())
        .map(|(test, r)| TestFailure { test: test.clone(), outcome: r.outcome.summary() })
        .collect();
    let validation = if failures.is_empty() {
        ValidationVerdict::Passed { tests: validation_runs.len() }
    } else {
        ValidationVerdict::Failed { tests: validation_runs.len(), failures }
    };

    let times = PhaseTimes {
        instrumentation: instrumentation.as_millis(),
        compilation: compilation.as_millis(),
        test_suite: (test_suite + validate_time).as_millis(),
        hanging_tests: hanging_tests.as_millis(),
        angelic_mining: angelic_mining.as_millis(),
        value_collection: value_collection.as_millis(),
        smt_solving: smt_solving.as_millis(),
        total: overall.elapsed().as_millis(),
    };

    let report = RepairReport {
        loop_id: target,
        cap: config.cap,
        original_guard,
        patched_guard,
        hanging,
        angelic,
        idempotence,
        contributing_tests: spec.contributing_tests,
        context_items: spec.pair_set.pairs.len(),
        context_size: spec.pair_set.columns.len() + 1,
        raw_rows: spec.raw_rows,
        pruned_columns: spec.pruned,
        stats: synthesis.stats,
        validation,
        diff: line_diff(source, &patched_source),
        patched_source,
        times: Some(times),
    };
    if report.validation.is_pass() {
        Ok(report)
    } else {
        Err(RepairError::Validation { report: Box::new(report) })
    }
}
