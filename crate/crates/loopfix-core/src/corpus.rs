//! Seeded-bug fixtures: a directory of mini-language programs with a
//! manifest describing how each repair is expected to go.
//!
//! The manifest (`manifest.toml`) holds one `[[case]]` table per program:
//!
//! ```toml
//! [[case]]
//! name = "countdown"            # case label, used in reports
//! file = "countdown.lp"        # program, relative to the manifest
//! loop = "countdown_by_two#0"  # loop expected to hang (decl#index)
//! cap = 10000                   # iteration cap for the whole pipeline
//! hanging = [{ test = "odd_start", chi = 4 }]
//! idempotent = false            # expected outcome of every clamp-at-cap probe
//! formulations = 2              # stages attempted, including the winner
//! components = 1                # operator instances in the patched guard
//! component_types = 1           # distinct operator categories in the patch
//! matcher = { kind = "comparison", leaves = ["b", "0", "1"] }
//! ```
//!
//! Matchers are structural, not textual: the patched guard is parsed and its
//! shape inspected, so any semantically equivalent guard built from the
//! listed leaves passes. `leaves` entries are expression texts as a leaf
//! would render (`"n"`, `"len(cells)"`, `"0"`, `"-1"`).

use std::path::Path;

use serde::Deserialize;

use crate::lang::ast::{BinOp, Expr, ExprKind};
use crate::lang::{expr_to_string, parse_expr_text};
use crate::repair::{repair, RepairConfig, RepairError, RepairReport};

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct HangingExpectation {
    pub test: String,
    /// Minimal per-invocation limit that lets the test pass.
    pub chi: u64,
}

/// Structural pattern for a patched guard.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GuardMatcher {
    /// A bare boolean variable drawn from `leaves`.
    BoolInput { leaves: Vec<String> },
    /// One comparison (`>`, `>=`, `==`, `!=`) whose operands are all leaves.
    Comparison { leaves: Vec<String> },
    /// `original && c` (either order) where `c` is a comparison over leaves.
    GuardAndComparison { leaves: Vec<String> },
    /// Anything; the case is checked through its stats and validation only.
    Any,
}

fn renders_as_leaf(e: &Expr, leaves: &[String]) -> bool {
    let text = expr_to_string(e);
    leaves.iter().any(|l| *l == text)
}

fn as_comparison(e: &Expr) -> Option<(&Expr, &Expr)> {
    match &e.node {
        ExprKind::Binary(BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne, l, r) => Some((l, r)),
        _ => None,
    }
}

fn comparison_over(e: &Expr, leaves: &[String]) -> bool {
    as_comparison(e)
        .map(|(l, r)| renders_as_leaf(l, leaves) && renders_as_leaf(r, leaves))
        .unwrap_or(false)
}

impl GuardMatcher {
    /// Checks `patched` (guard source text) against the pattern.
    /// `original` is the guard the program shipped with, used by
    /// [`GuardMatcher::GuardAndComparison`].
    pub fn matches(&self, patched: &str, original: &str) -> bool {
        let Ok(guard) = parse_expr_text(patched) else { return false };
        match self {
            GuardMatcher::Any => true,
            GuardMatcher::BoolInput { leaves } => renders_as_leaf(&guard, leaves),
            GuardMatcher::Comparison { leaves } => comparison_over(&guard, leaves),
            GuardMatcher::GuardAndComparison { leaves } => {
                let Ok(orig) = parse_expr_text(original) else { return false };
                let orig_text = expr_to_string(&orig);
                match &guard.node {
                    ExprKind::Binary(BinOp::And, l, r) => {
                        let (l, r) = (l.as_ref(), r.as_ref());
                        (expr_to_string(l) == orig_text && comparison_over(r, leaves))
                            || (expr_to_string(r) == orig_text && comparison_over(l, leaves))
                    }
                    _ => false,
                }
            }
        }
    }
}

fn default_cap() -> u64 {
    10_000
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct CorpusCase {
    pub name: String,
    pub file: String,
    #[serde(rename = "loop")]
    pub loop_id: String,
    #[serde(default = "default_cap")]
    pub cap: u64,
    pub hanging: Vec<HangingExpectation>,
    pub idempotent: bool,
    pub formulations: u32,
    pub components: u32,
    pub component_types: u32,
    pub matcher: GuardMatcher,
}

#[derive(Debug, Deserialize)]
struct ManifestDoc {
    case: Vec<CorpusCase>,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest error: {0}")]
    Manifest(#[from] toml::de::Error),
}

/// One expectation compared against the actual run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub ok: bool,
    pub detail: String,
}

impl Check {
    fn new(ok: bool, detail: impl Into<String>) -> Check {
        Check { ok, detail: detail.into() }
    }
}

#[derive(Debug)]
pub struct CaseOutcome {
    pub name: String,
    pub checks: Vec<Check>,
    /// Present when the pipeline got far enough to produce a report.
    pub report: Option<RepairReport>,
}

impl CaseOutcome {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.ok)
    }
}

#[derive(Debug)]
pub struct CorpusRun {
    pub outcomes: Vec<CaseOutcome>,
}

impl CorpusRun {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed())
    }
}

/// Runs one case against its source text and grades every expectation.
pub fn run_case(case: &CorpusCase, source: &str) -> CaseOutcome {
    let config = RepairConfig { cap: case.cap, ..RepairConfig::default() };
    let report = match repair(source, &config) {
        Ok(report) => report,
        Err(RepairError::Validation { report }) => {
            let mut outcome = grade(case, *report);
            outcome.checks.insert(0, Check::new(false, "patched program fails the suite"));
            return outcome;
        }
        Err(e) => {
            return CaseOutcome {
                name: case.name.clone(),
                checks: vec![Check::new(false, format!("repair failed: {e}"))],
                report: None,
            };
        }
    };
    let mut outcome = grade(case, report);
    outcome
        .checks
        .insert(0, Check::new(true, "repaired; all tests pass on the patched program"));
    outcome
}

fn grade(case: &CorpusCase, report: RepairReport) -> CaseOutcome {
    let mut checks = Vec::new();

    checks.push(Check::new(
        report.loop_id.to_string() == case.loop_id,
        format!("hanging loop {} (expected {})", report.loop_id, case.loop_id),
    ));

    let mut actual_hanging: Vec<&str> =
        report.hanging.iter().map(|e| e.test.as_str()).collect();
    let mut expected_hanging: Vec<&str> =
        case.hanging.iter().map(|e| e.test.as_str()).collect();
    actual_hanging.sort_unstable();
    expected_hanging.sort_unstable();
    checks.push(Check::new(
        actual_hanging == expected_hanging,
        format!("hanging tests {actual_hanging:?} (expected {expected_hanging:?})"),
    ));

    for expect in &case.hanging {
        let found = report.angelic.iter().find(|r| r.test == expect.test);
        match found {
            Some(record) => checks.push(Check::new(
                record.chi == expect.chi,
                format!(
                    "angelic record for {}: {} (expected {})",
                    expect.test, record.chi, expect.chi
                ),
            )),
            None => checks.push(Check::new(
                false,
                format!("no angelic record mined for {}", expect.test),
            )),
        }
    }

    // every case must also exercise the loop from a test that terminates
    let finite: Vec<&str> = report
        .contributing_tests
        .iter()
        .map(|t| t.as_str())
        .filter(|t| !report.hanging.iter().any(|e| e.test == *t))
        .collect();
    checks.push(Check::new(
        !finite.is_empty(),
        format!("finite tests exercising the loop: {finite:?}"),
    ));

    let uniform = report.idempotence.iter().all(|p| p.passes_at_cap == case.idempotent);
    checks.push(Check::new(
        uniform && !report.idempotence.is_empty(),
        format!(
            "idempotence probes {:?} (expected all {})",
            report.idempotence.iter().map(|p| p.passes_at_cap).collect::<Vec<_>>(),
            case.idempotent
        ),
    ));

    let stats = (
        report.stats.formulations,
        report.stats.components,
        report.stats.component_types,
    );
    let expected_stats = (case.formulations, case.components, case.component_types);
    checks.push(Check::new(
        stats == expected_stats,
        format!(
            "formulations/components/types {}/{}/{} (expected {}/{}/{})",
            stats.0, stats.1, stats.2, expected_stats.0, expected_stats.1, expected_stats.2
        ),
    ));

    let shape_ok = case.matcher.matches(&report.patched_guard, &report.original_guard);
    checks.push(Check::new(
        shape_ok,
        format!(
            "patched guard `{}` {} the expected shape",
            report.patched_guard,
            if shape_ok { "fits" } else { "does not fit" }
        ),
    ));

    CaseOutcome { name: case.name.clone(), checks, report: Some(report) }
}

pub fn load_manifest(path: &Path) -> Result<Vec<CorpusCase>, CorpusError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| CorpusError::Io { path: path.display().to_string(), source })?;
    let doc: ManifestDoc = toml::from_str(&text)?;
    Ok(doc.case)
}

/// Loads `dir/manifest.toml` and runs every case, in manifest order.
pub fn run_corpus(dir: &Path) -> Result<CorpusRun, CorpusError> {
    let cases = load_manifest(&dir.join("manifest.toml"))?;
    let mut outcomes = Vec::new();
    for case in &cases {
        let path = dir.join(&case.file);
        let source = std::fs::read_to_string(&path)
            .map_err(|source| CorpusError::Io { path: path.display().to_string(), source })?;
        outcomes.push(run_case(case, &source));
    }
    Ok(CorpusRun { outcomes })
}
