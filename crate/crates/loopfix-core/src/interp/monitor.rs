//! Run-time knobs and the record types produced by monitored runs.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::lang::ast::LoopId;

pub const DEFAULT_GLOBAL_CAP: u64 = 1_000_000;
pub const DEFAULT_CALL_DEPTH_CAP: u32 = 10_000;

/// Configuration for one test run.
///
/// `per_invocation_limit` clamps a single invocation (1-based rank) of a
/// single loop; every other invocation runs under `global_cap`. A forced
/// break is recorded as an *exceeding execution* only when the limit in
/// force came from the global cap — a clamped invocation that gets forced
/// is the clamp doing its job, not evidence of a hang. That distinction is
/// what lets a probe run with `limit == global_cap` observe a pass.
#[derive(Debug, Clone)]
pub struct MonitorConfig {
    pub global_cap: u64,
    pub per_invocation_limit: HashMap<(LoopId, u32), u64>,
    pub collection_enabled: bool,
    pub collection_target: Option<LoopId>,
    pub call_depth_cap: u32,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig {
            global_cap: DEFAULT_GLOBAL_CAP,
            per_invocation_limit: HashMap::new(),
            collection_enabled: false,
            collection_target: None,
            call_depth_cap: DEFAULT_CALL_DEPTH_CAP,
        }
    }
}

impl MonitorConfig {
    pub fn with_cap(cap: u64) -> Self {
        MonitorConfig { global_cap: cap, ..Default::default() }
    }

    pub fn clamp(mut self, id: &LoopId, rank: u32, limit: u64) -> Self {
        self.per_invocation_limit.insert((id.clone(), rank), limit);
        self
    }

    pub fn collecting(mut self, id: &LoopId) -> Self {
        self.collection_enabled = true;
        self.collection_target = Some(id.clone());
        self
    }
}

/// Why a particular loop execution ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExitNature {
    /// The guard evaluated to false.
    Conditional,
    /// A `break` in the body.
    Break,
    /// A `return` in the body, or an abort (runtime error / failed assert)
    /// that unwound through the loop.
    Return,
    /// The monitor forced the break at the iteration limit.
    Forced,
}

/// One execution (invocation) of one loop. `record` is the number of times
/// the guard evaluated to true, i.e. the number of iterations entered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoopExecution {
    /// Index into the program's loop table (see `Program::loop_table`).
    pub loop_index: u32,
    /// 1-based invocation rank within the run.
    pub rank: u32,
    pub record: u64,
    pub exit: ExitNature,
}

/// How a test run ended. `CapExceeded` wins over an abort that happened
/// later in the same run; aborts win over a plain assert failure ordering
/// is irrelevant since a run stops at the first abort.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TestOutcome {
    Pass,
    AssertionFailure { message: String },
    RuntimeError { message: String },
    CapExceeded { loop_id: LoopId, rank: u32 },
}

impl TestOutcome {
    pub fn is_pass(&self) -> bool {
        matches!(self, TestOutcome::Pass)
    }

    pub fn summary(&self) -> String {
        match self {
            TestOutcome::Pass => "pass".to_string(),
            TestOutcome::AssertionFailure { message } => format!("assertion failure: {message}"),
            TestOutcome::RuntimeError { message } => format!("runtime error: {message}"),
            TestOutcome::CapExceeded { loop_id, rank } => {
                format!("iteration cap exceeded in {loop_id} (invocation {rank})")
            }
        }
    }
}

/// A scalar captured in a snapshot column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PairVal {
    Int(i64),
    Bool(bool),
}

impl PairVal {
    /// The integer payload. Panics on a bool column; callers index a typed
    /// schema, so a mismatch is a bug rather than a data condition.
    pub fn as_int(&self) -> i64 {
        match self {
            PairVal::Int(n) => *n,
            PairVal::Bool(_) => panic!("expected an int column"),
        }
    }

    /// The boolean payload. Panics on an int column.
    pub fn as_bool(&self) -> bool {
        match self {
            PairVal::Bool(b) => *b,
            PairVal::Int(_) => panic!("expected a bool column"),
        }
    }
}

impl std::fmt::Display for PairVal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PairVal::Int(n) => write!(f, "{n}"),
            PairVal::Bool(b) => write!(f, "{b}"),
        }
    }
}

/// Snapshot rows gathered from one invocation of the collection target.
#[derive(Debug, Clone, PartialEq)]
pub struct CollectedInvocation {
    pub rank: u32,
    /// `(snapshot, stay)` per guard decision, in decision order. The final
    /// decision of a conditional or forced exit is included (stay = false);
    /// a `break`/`return` exit simply stops producing rows.
    pub rows: Vec<(Vec<PairVal>, bool)>,
}

/// Everything a single test run produces.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub outcome: TestOutcome,
    pub trace: Vec<LoopExecution>,
    pub collected: Vec<CollectedInvocation>,
}

impl RunResult {
    /// Executions of the loop at `loop_index`, in invocation order.
    pub fn executions_of(&self, loop_index: u32) -> impl Iterator<Item = &LoopExecution> {
        self.trace.iter().filter(move |e| e.loop_index == loop_index)
    }
}
