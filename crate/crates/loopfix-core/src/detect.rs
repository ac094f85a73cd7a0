//! Runs the suite under the iteration cap and reports which (test, loop,
//! invocation) triples were forced past it.

use serde::{Deserialize, Serialize};

use crate::interp::{run_suite, MonitorConfig, RunResult};
use crate::lang::ast::{LoopId, Program};

/// One hanging observation: in `test`, the `rank`-th invocation of `loop_id`
/// was still going at the cap. A test lists each loop at most once (only the
/// first exceeding invocation per loop is recorded).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HangingEntry {
    pub test: String,
    pub loop_id: LoopId,
    pub rank: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HangingReport {
    pub cap: u64,
    /// Entries in (test declaration, loop table) order.
    pub entries: Vec<HangingEntry>,
}

impl HangingReport {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Distinct hanging loops, in first-seen order.
    pub fn loops(&self) -> Vec<LoopId> {
        let mut out: Vec<LoopId> = Vec::new();
        for e in &self.entries {
            if !out.contains(&e.loop_id) {
                out.push(e.loop_id.clone());
            }
        }
        out
    }

    pub fn entries_for<'a>(&'a self, id: &LoopId) -> impl Iterator<Item = &'a HangingEntry> {
        let id = id.clone();
        self.entries.iter().filter(move |e| e.loop_id == id)
    }
}

/// Detection output: the report plus every run, so later stages can see
/// which tests exercised which loops without re-running the suite.
#[derive(Debug)]
pub struct Detection {
    pub report: HangingReport,
    pub runs: Vec<(String, RunResult)>,
}

impl Detection {
    /// Builds the report from runs obtained elsewhere (e.g. when the caller
    /// wants to time each test individually). `runs` must come from the same
    /// instrumented program with the same cap and no clamps.
    pub fn from_runs(program: &Program, cap: u64, runs: Vec<(String, RunResult)>) -> Detection {
        let table = program.loop_table();
        let mut entries = Vec::new();
        for (test, run) in &runs {
            // collect the first exceeding execution per loop, in loop-table order
            for (idx, id) in table.iter().enumerate() {
                let first_forced = run
                    .executions_of(idx as u32)
                    .find(|e| e.exit == crate::interp::ExitNature::Forced && e.record >= cap);
                // only executions forced at the *global cap* count; clamped ones
                // never appear here because detection sets no clamps
                if let Some(exec) = first_forced {
                    entries.push(HangingEntry {
                        test: test.clone(),
                        loop_id: id.clone(),
                        rank: exec.rank,
                    });
                }
            }
        }
        Detection { report: HangingReport { cap, entries }, runs }
    }

    /// Tests (declaration order) whose run executed the given loop at least
    /// once, hanging or not.
    pub fn tests_reaching(&self, program: &Program, id: &LoopId) -> Vec<String> {
        let Some(idx) = program.loop_table().iter().position(|l| l == id) else {
            return Vec::new();
        };
        self.runs
            .iter()
            .filter(|(_, r)| r.executions_of(idx as u32).next().is_some())
            .map(|(name, _)| name.clone())
            .collect()
    }

    pub fn run_of(&self, test: &str) -> Option<&RunResult> {
        self.runs.iter().find(|(name, _)| name == test).map(|(_, r)| r)
    }
}

/// Runs every test on the instrumented program with the global cap and no
/// clamps or collection. Pure observation: outcomes other than cap-exceeded
/// are kept in `runs` but produce no entries.
pub fn detect_infinite_loops(program: &Program, cap: u64) -> Detection {
    let config = MonitorConfig::with_cap(cap);
    let runs = run_suite(program, &config);
    Detection::from_runs(program, cap, runs)
}
