//! Finds, per hanging test, the smallest forced iteration count that makes
//! the test pass — the angelic record χ. A clamp at χ is what the collection
//! stage later replays, so χ doubles as the loop's intended iteration count
//! for that invocation.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::detect::HangingReport;
use crate::interp::{run_test, MonitorConfig};
use crate::lang::ast::{LoopId, Program};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AngelicRecord {
    pub test: String,
    pub rank: u32,
    pub chi: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProbeStrategy {
    /// Probe 0, 1, 2, … in order; the first passing clamp is minimal.
    #[default]
    Linear,
    /// Probe 0, 1, 2, 4, 8, …, then bisect between the last failing power
    /// and the first passing one. Faster when χ is large, but it assumes
    /// that clamps above χ keep passing (true for loops whose extra
    /// iterations do nothing); on non-monotone tests it can miss a χ that
    /// linear probing would find, or return a passing-but-not-minimal one.
    ExponentialBisect,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AngelicError {
    #[error("no forced-break count in 0..={cap} makes test `{test}` pass")]
    NoAngelicRecord { test: String, cap: u64 },
    #[error("angelic mining exceeded its time budget while probing test `{test}`")]
    BudgetExceeded { test: String },
}

/// Probes every hanging entry of `target` in the report.
/// `budget` bounds total wall-clock time across all probes.
pub fn find_angelic_records(
    program: &Program,
    target: &LoopId,
    report: &HangingReport,
    strategy: ProbeStrategy,
    budget: Option<Duration>,
) -> Result<Vec<AngelicRecord>, AngelicError> {
    let started = Instant::now();
    let mut out = Vec::new();
    for entry in report.entries_for(target) {
        let mut probe = |limit: u64| -> Result<bool, AngelicError> {
            if let Some(b) = budget {
                if started.elapsed() > b {
                    return Err(AngelicError::BudgetExceeded { test: entry.test.clone() });
                }
            }
            let config = MonitorConfig::with_cap(report.cap)
                .clamp(target, entry.rank, limit);
            let run = run_test(program, &entry.test, &config)
                .expect("hanging test exists in program");
            Ok(run.outcome.is_pass())
        };
        let chi = match strategy {
            ProbeStrategy::Linear => {
                let mut found = None;
                for i in 0..=report.cap {
                    if probe(i)? {
                        found = Some(i);
                        break;
                    }
                }
                found
            }
            ProbeStrategy::ExponentialBisect => {
                exponential_bisect(report.cap, &mut probe)?
            }
        };
        match chi {
            Some(chi) => out.push(AngelicRecord {
                test: entry.test.clone(),
                rank: entry.rank,
                chi,
            }),
            None => {
                return Err(AngelicError::NoAngelicRecord {
                    test: entry.test.clone(),
                    cap: report.cap,
                })
            }
        }
    }
    Ok(out)
}

fn exponential_bisect(
    cap: u64,
    probe: &mut impl FnMut(u64) -> Result<bool, AngelicError>,
) -> Result<Option<u64>, AngelicError> {
    // grow until a probe passes
    let mut last_fail: Option<u64> = None;
    let mut passing: Option<u64> = None;
    let mut i: u64 = 0;
    loop {
        if probe(i)? {
            passing = Some(i);
            break;
        }
        last_fail = Some(i);
        if i >= cap {
            break;
        }
        i = if i == 0 { 1 } else { (i * 2).min(cap) };
    }
    let Some(hi) = passing else { return Ok(None) };
    let mut lo = match last_fail {
        // last_fail may exceed the passing point's predecessor only when the
        // growth overshot; it never does, since failures precede the pass
        Some(f) if f < hi => f + 1,
        _ => 0,
    };
    let mut hi = hi;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if probe(mid)? {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(Some(hi))
}

/// Clamps each hanging invocation at the cap itself and asks whether the
/// test passes anyway — i.e. whether the spare iterations were harmless.
/// Because the limit is a clamp (not the cap), the forced break is not
/// counted as an exceeding execution and the run can genuinely pass.
pub fn idempotence_probe(
    program: &Program,
    target: &LoopId,
    report: &HangingReport,
) -> Vec<(String, bool)> {
    report
        .entries_for(target)
        .map(|entry| {
            let config = MonitorConfig::with_cap(report.cap)
                .clamp(target, entry.rank, report.cap);
            let run = run_test(program, &entry.test, &config)
                .expect("hanging test exists in program");
            (entry.test.clone(), run.outcome.is_pass())
        })
        .collect()
}
