//! The release gate: one test per acceptance criterion, each printing a
//! single PASS/FAIL line (visible with `-- --nocapture`). Run with
//!
//! ```text
//! cargo test -p loopfix-core --test acceptance -- --test-threads=1 --nocapture
//! ```

mod common;

use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use loopfix_core::corpus::{run_corpus, CaseOutcome, CorpusRun};
use loopfix_core::detect::detect_infinite_loops;
use loopfix_core::instrument::instrument;
use loopfix_core::interp::{run_suite, run_test, MonitorConfig};
use loopfix_core::lang::{load_program, program_to_string, LoopId};
use loopfix_core::repair::{repair, RepairConfig, RepairError};
use loopfix_core::synth::{enumerate_stage, synthesize, SynthConfig, SynthError};

use common::{exhaustive_pairs, random_terminating_program, Domain};

fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

struct CorpusData {
    run: CorpusRun,
    elapsed: Duration,
}

fn corpus() -> &'static CorpusData {
    static DATA: OnceLock<CorpusData> = OnceLock::new();
    DATA.get_or_init(|| {
        let started = Instant::now();
        let run = run_corpus(&corpus_dir()).expect("corpus directory is readable");
        CorpusData { run, elapsed: started.elapsed() }
    })
}

fn case<'a>(data: &'a CorpusData, name: &str) -> &'a CaseOutcome {
    data.run
        .outcomes
        .iter()
        .find(|o| o.name == name)
        .unwrap_or_else(|| panic!("corpus has a case named {name}"))
}

fn verdict(criterion: &str, ok: bool, detail: &str) {
    println!("{}: {criterion}{detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "{criterion} -- {detail}");
}

#[test]
fn repair_success_rate_across_the_corpus() {
    let data = corpus();
    let mut failures = Vec::new();
    for outcome in &data.run.outcomes {
        if !outcome.passed() {
            let bad: Vec<&str> = outcome
                .checks
                .iter()
                .filter(|c| !c.ok)
                .map(|c| c.detail.as_str())
                .collect();
            failures.push(format!("{}: {bad:?}", outcome.name));
        }
    }
    let enough = data.run.outcomes.len() >= 7;
    let in_time = data.elapsed < Duration::from_secs(60);
    verdict(
        "repair success rate: every corpus case repaired, all tests passing",
        failures.is_empty() && enough && in_time,
        &format!(
            " ({} cases in {:?}{})",
            data.run.outcomes.len(),
            data.elapsed,
            if failures.is_empty() { String::new() } else { format!("; {failures:?}") }
        ),
    );
}

#[test]
fn detection_boundary_at_the_cap() {
    // cap - 1 iterations must stay silent, cap + 1 must be flagged, and the
    // flag must carry the invocation rank at which the loop overran
    let cap = 50u64;
    let program = |bound: i64| {
        format!(
            "fn burn(k: int) -> int {{
                var i: int = 0;
                while (i < k) {{ i = i + 1; }}
                return i;
            }}
            test warmup {{ assert(burn(10) == 10); }}
            test long {{
                assert(burn(7) == 7);
                assert(burn({bound}) == {bound});
            }}"
        )
    };

    let under = instrument(&load_program(&program(cap as i64 - 1)).unwrap());
    let silent = detect_infinite_loops(&under, cap).report.is_empty();

    let over = instrument(&load_program(&program(cap as i64 + 1)).unwrap());
    let report = detect_infinite_loops(&over, cap).report;
    let flagged = report.entries.len() == 1
        && report.entries[0].test == "long"
        && report.entries[0].loop_id == LoopId::new("burn", 0)
        && report.entries[0].rank == 2; // rank 1 was the finite burn(7) call

    // zero false positives: every corpus detection names exactly the loop and
    // tests the manifest expects
    let dir = corpus_dir();
    let cases = loopfix_core::corpus::load_manifest(&dir.join("manifest.toml")).unwrap();
    let mut clean = true;
    for case in &cases {
        let source = std::fs::read_to_string(dir.join(&case.file)).unwrap();
        let prog = instrument(&load_program(&source).unwrap());
        let found = detect_infinite_loops(&prog, case.cap).report;
        let mut expected: Vec<(String, String)> = case
            .hanging
            .iter()
            .map(|h| (h.test.clone(), case.loop_id.clone()))
            .collect();
        let mut actual: Vec<(String, String)> = found
            .entries
            .iter()
            .map(|e| (e.test.clone(), e.loop_id.to_string()))
            .collect();
        expected.sort();
        actual.sort();
        if expected != actual {
            clean = false;
        }
    }
    verdict(
        "detection boundary: cap-1 silent, cap+1 flagged with correct rank, no false positives",
        silent && flagged && clean,
        "",
    );
}

#[test]
fn minimal_clamp_really_is_minimal() {
    // for every mined chi > 0: clamping one lower must fail, chi itself must
    // pass; the precondition case must mine chi == 0
    let dir = corpus_dir();
    let cases = loopfix_core::corpus::load_manifest(&dir.join("manifest.toml")).unwrap();
    let data = corpus();
    let mut ok = true;
    let mut detail = String::new();
    for case in &cases {
        let outcome = self::case(data, &case.name);
        let Some(report) = &outcome.report else {
            ok = false;
            continue;
        };
        let source = std::fs::read_to_string(dir.join(&case.file)).unwrap();
        let prog = instrument(&load_program(&source).unwrap());
        for record in &report.angelic {
            let entry = report
                .hanging
                .iter()
                .find(|e| e.test == record.test)
                .expect("angelic record belongs to a hanging test");
            let clamp = |limit: u64| {
                let config = MonitorConfig::with_cap(case.cap)
                    .clamp(&report.loop_id, entry.rank, limit);
                run_test(&prog, &record.test, &config).unwrap().outcome.is_pass()
            };
            if !clamp(record.chi) {
                ok = false;
                detail = format!(" ({}: chi {} does not pass)", record.test, record.chi);
            }
            if record.chi > 0 && clamp(record.chi - 1) {
                ok = false;
                detail = format!(" ({}: chi-1 also passes)", record.test);
            }
        }
    }
    let precondition = self::case(data, "precondition")
        .report
        .as_ref()
        .map(|r| r.angelic.iter().any(|a| a.chi == 0))
        .unwrap_or(false);
    verdict(
        "minimal clamp: chi passes, chi-1 fails, precondition case mines chi 0",
        ok && precondition,
        &detail,
    );
}

#[test]
fn synthesis_stats_on_the_flag_and_comparison_cases() {
    let data = corpus();
    let flag = case(data, "flag_guard").report.as_ref().map(|r| {
        (r.stats.formulations, r.stats.components, r.stats.component_types)
    });
    let comparison = case(data, "countdown").report.as_ref().map(|r| {
        (r.stats.formulations, r.stats.components, r.stats.component_types)
    });
    verdict(
        "synthesis stats: flag case 1 formulation 0 components; comparison case 2/1/1",
        flag == Some((1, 0, 0)) && comparison == Some((2, 1, 1)),
        &format!(" (flag {flag:?}, comparison {comparison:?})"),
    );
}

#[test]
fn instrumentation_transparency_on_randomized_programs() {
    let cap = 100_000u64;
    let mut ok = true;
    let mut detail = String::new();
    for seed in 0..100 {
        let source = random_terminating_program(seed);
        let program = match load_program(&source) {
            Ok(p) => p,
            Err(e) => {
                ok = false;
                detail = format!(" (seed {seed} failed to compile: {e})\n{source}");
                break;
            }
        };
        let monitored = instrument(&program);
        let plain = run_suite(&program, &MonitorConfig::with_cap(cap));
        let first = run_suite(&monitored, &MonitorConfig::with_cap(cap));
        let second = run_suite(&monitored, &MonitorConfig::with_cap(cap));

        // outcomes must survive instrumentation, records must be stable
        for ((name, p), (_, m)) in plain.iter().zip(&first) {
            if p.outcome != m.outcome {
                ok = false;
                detail = format!(
                    " (seed {seed} test {name}: plain {} vs monitored {})",
                    p.outcome.summary(),
                    m.outcome.summary()
                );
            }
        }
        for ((name, a), (_, b)) in first.iter().zip(&second) {
            if a.trace != b.trace {
                ok = false;
                detail = format!(" (seed {seed} test {name}: trace not reproducible)");
            }
        }
        // the monitors must be the only difference
        if program_to_string(&loopfix_core::instrument::strip(&monitored))
            != program_to_string(&program)
        {
            ok = false;
            detail = format!(" (seed {seed}: strip(instrument(p)) != p)");
        }
        if !ok {
            break;
        }
    }
    verdict(
        "instrumentation transparency on 100 randomized terminating programs",
        ok,
        &detail,
    );
}

#[test]
fn guard_recovery_against_known_oracles() {
    let int = |name, lo: i64, hi: i64| Domain::Int(name, (lo..=hi).collect());
    let config = SynthConfig::default();
    let mut ok = true;
    let mut detail = String::new();

    // (label, pair set, winning stage, components)
    let cases: Vec<(&str, loopfix_core::collect::PairSet, u32, u32)> = vec![
        (
            "bool passthrough",
            exhaustive_pairs(&[Domain::Bool("p"), int("x", -4, 3)], |v| v[0].as_bool()),
            0,
            0,
        ),
        (
            "x > y",
            exhaustive_pairs(&[int("x", -4, 3), int("y", -4, 3)], |v| {
                v[0].as_int() > v[1].as_int()
            }),
            1,
            1,
        ),
        (
            "x > y && p",
            exhaustive_pairs(
                &[int("x", -2, 1), int("y", -2, 1), Domain::Bool("p")],
                |v| v[0].as_int() > v[1].as_int() && v[2].as_bool(),
            ),
            2,
            2,
        ),
        (
            "x + y > z",
            exhaustive_pairs(
                &[int("x", -2, 1), int("y", -2, 1), int("z", -2, 1)],
                |v| v[0].as_int() + v[1].as_int() > v[2].as_int(),
            ),
            3,
            2,
        ),
        (
            "x * x > y",
            exhaustive_pairs(&[int("x", -2, 2), int("y", -2, 2)], |v| {
                v[0].as_int() * v[0].as_int() > v[1].as_int()
            }),
            5,
            2,
        ),
    ];

    for (label, set, stage, components) in &cases {
        match synthesize(set, &config) {
            Ok(s) => {
                // synthesize re-checks every candidate against all pairs, so
                // success means agreement with the oracle on the whole table;
                // still assert the reported shape
                if s.stats.formulations != stage + 1 || s.stats.components != *components {
                    ok = false;
                    detail = format!(
                        " ({label}: formulations {} components {}, expected {}/{})",
                        s.stats.formulations,
                        s.stats.components,
                        stage + 1,
                        components
                    );
                    break;
                }
                // exhaustive search one bundle below the winner must come up
                // empty, proving the escalation stopped at the minimal stage
                if *stage > 0 {
                    match enumerate_stage(set, stage - 1, 1, None) {
                        Ok(None) => {}
                        other => {
                            ok = false;
                            detail =
                                format!(" ({label}: stage {} unexpectedly {other:?})", stage - 1);
                            break;
                        }
                    }
                }
            }
            Err(e) => {
                ok = false;
                detail = format!(" ({label}: {e})");
                break;
            }
        }
    }

    // a contradictory table must exhaust every bundle
    if ok {
        let mut contradiction = exhaustive_pairs(&[int("x", 0, 0)], |_| true);
        contradiction.pairs.push((contradiction.pairs[0].0.clone(), false));
        match synthesize(&contradiction, &config) {
            Err(SynthError::Exhausted { stages_tried: 6 }) => {}
            other => {
                ok = false;
                detail = format!(" (contradiction: {other:?})");
            }
        }
    }

    verdict(
        "guard recovery against known oracles with minimal-stage proof",
        ok,
        &detail,
    );
}

#[test]
fn synthesis_success_implies_validation_success() {
    // corpus side: every synthesized patch validated (repair() only returns
    // Ok after the whole suite passes, and the runner already failed any
    // case that validated badly)
    let data = corpus();
    let corpus_ok = data
        .run
        .outcomes
        .iter()
        .all(|o| o.report.as_ref().map(|r| r.validation.is_pass()).unwrap_or(false));

    // randomized side: terminating programs must never reach synthesis at
    // all, let alone fail validation
    let mut random_ok = true;
    for seed in 0..100 {
        let source = random_terminating_program(seed);
        match repair(&source, &RepairConfig { cap: 100_000, ..RepairConfig::default() }) {
            Err(RepairError::NoInfiniteLoop { .. }) => {}
            Err(RepairError::Validation { .. }) => {
                random_ok = false;
                break;
            }
            other => {
                // a seeded program has no infinite loop by construction
                let _ = other;
                random_ok = false;
                break;
            }
        }
    }
    verdict(
        "synthesis success implies validation success (no validation failures anywhere)",
        corpus_ok && random_ok,
        "",
    );
}

#[test]
fn idempotence_split_between_binary_search_and_countdown() {
    let data = corpus();
    let probe = |name: &str| {
        case(data, name)
            .report
            .as_ref()
            .map(|r| {
                !r.idempotence.is_empty()
                    && r.idempotence.iter().all(|p| p.passes_at_cap)
            })
            .unwrap_or(false)
    };
    let binary_search_idempotent = probe("binary_search");
    let countdown_report = case(data, "countdown").report.as_ref();
    let countdown_not = countdown_report
        .map(|r| {
            !r.idempotence.is_empty() && r.idempotence.iter().all(|p| !p.passes_at_cap)
        })
        .unwrap_or(false);
    verdict(
        "idempotence probe: binary search survives over-iteration, countdown does not",
        binary_search_idempotent && countdown_not,
        "",
    );
}
