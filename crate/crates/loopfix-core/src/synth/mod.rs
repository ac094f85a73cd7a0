//! Guard synthesis: find a boolean expression over the pair-set schema that
//! reproduces the monitor's stay/break decision on every pair.
//!
//! Operators escalate in bundles — comparison, then logic, then linear
//! arithmetic, then if-then-else, then multiplication — and each bundle
//! fails completely before the next is admitted, so the winning guard uses
//! the weakest vocabulary that works. Each formulation allows one instance
//! of each active operator unless the multiplicity is raised.
//!
//! Two interchangeable backends: a built-in bottom-up enumerator (default,
//! fully deterministic), and an external SMT solver subprocess fed the
//! SMT-LIB2 encoding of the same stage. Whatever the backend claims, the
//! result is re-checked against every pair before it is accepted.

pub mod enumerative;
pub mod smtlib;
pub mod solver;
pub mod term;

use std::time::{Duration, Instant};

use crate::collect::PairSet;

pub use enumerative::enumerate_stage;
pub use smtlib::{encode, Encoding};
pub use solver::{run_solver, SolverCmd, SolverError, SolverVerdict};
pub use term::{
    check_candidate, render, term_to_guard, Category, Op, Term, MAX_STAGE,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Backend {
    Internal,
    External(SolverCmd),
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    /// Highest bundle stage to try (0..=5).
    pub max_stage: u32,
    /// Instances allowed per operator within one candidate.
    pub multiplicity: u8,
    /// Wall-clock budget across all stages.
    pub budget: Option<Duration>,
    pub backend: Backend,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            max_stage: MAX_STAGE,
            multiplicity: 1,
            budget: None,
            backend: Backend::Internal,
        }
    }
}

/// The metrics a repair report carries for its synthesis phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SynthesisStats {
    /// Stages attempted; the successful stage is `formulations - 1`.
    pub formulations: u32,
    /// Operator instances in the winning guard.
    pub components: u32,
    /// Distinct operator categories in the winning guard.
    pub component_types: u32,
    /// Time spent inside backend searches, in milliseconds.
    pub search_millis: u128,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Synthesis {
    pub term: Term,
    pub stats: SynthesisStats,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SynthError {
    #[error("no guard over any component bundle matches the pairs ({stages_tried} formulations tried)")]
    Exhausted { stages_tried: u32 },
    #[error("synthesis time budget exceeded during formulation {formulation}")]
    Timeout { formulation: u32 },
    #[error("pair set is empty")]
    EmptyPairSet,
    #[error("solver: {0}")]
    Solver(SolverError),
    #[error("backend produced an invalid candidate at formulation {formulation}: {detail}")]
    Inconsistent { formulation: u32, detail: String },
}

pub fn synthesize(set: &PairSet, config: &SynthConfig) -> Result<Synthesis, SynthError> {
    if set.pairs.is_empty() {
        return Err(SynthError::EmptyPairSet);
    }
    let deadline = config.budget.map(|b| Instant::now() + b);
    let mut search_time = Duration::ZERO;
    let max_stage = config.max_stage.min(MAX_STAGE);

    for stage in 0..=max_stage {
        let formulation = stage + 1;
        if let Some(d) = deadline {
            if Instant::now() > d {
                return Err(SynthError::Timeout { formulation });
            }
        }
        let begin = Instant::now();
        let found: Option<Term> = match &config.backend {
            Backend::Internal => {
                enumerative::enumerate_stage(set, stage, config.multiplicity, deadline)
                    .map_err(|_| SynthError::Timeout { formulation })?
            }
            Backend::External(cmd) => {
                let enc = smtlib::encode(set, stage, config.multiplicity);
                match solver::run_solver(cmd, &enc.text).map_err(SynthError::Solver)? {
                    SolverVerdict::Unsat => None,
                    SolverVerdict::Sat(model) => Some(
                        smtlib::decode_model(&enc.layout, &model).map_err(|e| {
                            SynthError::Inconsistent { formulation, detail: e.to_string() }
                        })?,
                    ),
                }
            }
        };
        search_time += begin.elapsed();

        if let Some(term) = found {
            // never trust the backend: re-check against every pair
            match check_candidate(&term, set) {
                Ok(true) => {}
                Ok(false) => {
                    return Err(SynthError::Inconsistent {
                        formulation,
                        detail: format!(
                            "candidate {} disagrees with a pair",
                            render(&term, &set.columns)
                        ),
                    })
                }
                Err(e) => {
                    return Err(SynthError::Inconsistent { formulation, detail: e.to_string() })
                }
            }
            return Ok(Synthesis {
                stats: SynthesisStats {
                    formulations: formulation,
                    components: term.components(),
                    component_types: term.categories().len() as u32,
                    search_millis: search_time.as_millis(),
                },
                term,
            });
        }
    }
    Err(SynthError::Exhausted { stages_tried: max_stage + 1 })
}
