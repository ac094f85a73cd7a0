//! Builds the synthesis specification: input/output context pairs.
//!
//! Every test that executed the target loop during detection is re-run with
//! collection on. Hanging tests run with their invocation clamped at χ — and
//! must pass that way, otherwise the mined record was wrong. Each guard
//! decision contributes one pair: the snapshot as inputs, the stay/break
//! decision as output. Forced breaks contribute a `break` pair at the state
//! where the loop should have stopped; `break`/`return` exits simply stop
//! contributing.
//!
//! After collection the set is deduplicated, columns that are constant
//! across every pair are pruned, and constant columns −1, 0, 1 are appended
//! so comparisons against small literals need no luck.

use std::collections::HashSet;
use std::fmt;

use crate::angelic::AngelicRecord;
use crate::detect::Detection;
use crate::interp::{run_test, MonitorConfig, PairVal};
use crate::lang::ast::{LoopId, Program, Type};
use crate::lang::{expr_to_string, parse_expr_text};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColTy {
    Int,
    Bool,
}

impl fmt::Display for ColTy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColTy::Int => write!(f, "int"),
            ColTy::Bool => write!(f, "bool"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairColumn {
    pub name: String,
    pub ty: ColTy,
    /// Source text of the expression that reproduces this column's value in
    /// the loop's scope (`len(queue)` for `len$queue`, the guard text for
    /// `guard$orig`, the literal for constants).
    pub decode: String,
}

/// One input/output context pair: a snapshot plus the decision taken.
pub type Pair = (Vec<PairVal>, bool);

#[derive(Debug, Clone, PartialEq)]
pub struct PairSet {
    pub loop_id: LoopId,
    pub columns: Vec<PairColumn>,
    pub pairs: Vec<Pair>,
}

impl PairSet {
    pub fn bool_columns(&self) -> impl Iterator<Item = (usize, &PairColumn)> {
        self.columns.iter().enumerate().filter(|(_, c)| c.ty == ColTy::Bool)
    }

    pub fn outputs(&self) -> Vec<bool> {
        self.pairs.iter().map(|(_, o)| *o).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SpecBuild {
    pub pair_set: PairSet,
    /// Rows gathered before deduplication.
    pub raw_rows: usize,
    /// Names of pruned constant columns.
    pub pruned: Vec<String>,
    /// Tests that contributed pairs, in declaration order.
    pub contributing_tests: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CollectError {
    #[error("no test executes loop {0}; nothing to learn from")]
    EmptySpecification(LoopId),
    #[error("test `{test}` clamped at its angelic record did not pass ({outcome})")]
    ClampedRunFailed { test: String, outcome: String },
    #[error("loop {0} is not instrumented")]
    NotInstrumented(LoopId),
}

pub fn build_specification(
    program: &Program,
    target: &LoopId,
    detection: &Detection,
    records: &[AngelicRecord],
    cap: u64,
) -> Result<SpecBuild, CollectError> {
    let lp = program
        .find_loop(target)
        .ok_or_else(|| CollectError::EmptySpecification(target.clone()))?;
    let plan = lp
        .monitor
        .as_ref()
        .ok_or_else(|| CollectError::NotInstrumented(target.clone()))?;

    let columns: Vec<PairColumn> = plan
        .snapshot
        .iter()
        .map(|e| PairColumn {
            name: e.name.clone(),
            ty: match e.ty {
                Type::Bool => ColTy::Bool,
                _ => ColTy::Int,
            },
            decode: expr_to_string(&e.decode),
        })
        .collect();

    let tests = detection.tests_reaching(program, target);
    if tests.is_empty() {
        return Err(CollectError::EmptySpecification(target.clone()));
    }

    let mut raw: Vec<Pair> = Vec::new();
    for test in &tests {
        let mut config = MonitorConfig::with_cap(cap).collecting(target);
        let record = records.iter().find(|r| &r.test == test);
        if let Some(r) = record {
            config = config.clamp(target, r.rank, r.chi);
        }
        let run = run_test(program, test, &config).expect("test came from this program");
        if record.is_some() && !run.outcome.is_pass() {
            return Err(CollectError::ClampedRunFailed {
                test: test.clone(),
                outcome: run.outcome.summary(),
            });
        }
        for inv in &run.collected {
            raw.extend(inv.rows.iter().cloned());
        }
    }
    let raw_rows = raw.len();

    // dedupe, keeping first occurrences in order
    let mut seen: HashSet<(Vec<PairVal>, bool)> = HashSet::new();
    let mut pairs: Vec<Pair> = Vec::new();
    for p in raw {
        if seen.insert(p.clone()) {
            pairs.push(p);
        }
    }
    if pairs.is_empty() {
        return Err(CollectError::EmptySpecification(target.clone()));
    }

    // prune columns that never vary — they cannot distinguish anything
    let mut keep = vec![false; columns.len()];
    for (j, flag) in keep.iter_mut().enumerate() {
        let first = pairs[0].0[j];
        *flag = pairs.iter().any(|(row, _)| row[j] != first);
    }
    let pruned: Vec<String> = columns
        .iter()
        .zip(&keep)
        .filter(|(_, k)| !**k)
        .map(|(c, _)| c.name.clone())
        .collect();
    let mut columns: Vec<PairColumn> = columns
        .into_iter()
        .zip(&keep)
        .filter(|(_, k)| **k)
        .map(|(c, _)| c)
        .collect();
    for (row, _) in &mut pairs {
        let mut j = 0;
        row.retain(|_| {
            let k = keep[j];
            j += 1;
            k
        });
    }

    // append the constant columns after pruning, on purpose
    for c in [-1i64, 0, 1] {
        columns.push(PairColumn {
            name: format!("const${c}"),
            ty: ColTy::Int,
            decode: c.to_string(),
        });
        for (row, _) in &mut pairs {
            row.push(PairVal::Int(c));
        }
    }

    Ok(SpecBuild {
        pair_set: PairSet { loop_id: target.clone(), columns, pairs },
        raw_rows,
        pruned,
        contributing_tests: tests,
    })
}

// ---------------------------------------------------------------------------
// text format
//
//   # comment
//   !loop drain#0
//   !schema pending:int nonEmpty:bool guard$orig:bool
//   !decode guard$orig = pending > 0
//   pending=2 nonEmpty=true guard$orig=true -> stay
//   pending=0 nonEmpty=false guard$orig=true -> break
//
// A `!decode` line is present only when the decode text differs from the
// column name (plain scalars decode to themselves).
// ---------------------------------------------------------------------------

pub fn write_pairs(set: &PairSet) -> String {
    let mut out = String::new();
    out.push_str(&format!("!loop {}\n", set.loop_id));
    let schema: Vec<String> =
        set.columns.iter().map(|c| format!("{}:{}", c.name, c.ty)).collect();
    out.push_str(&format!("!schema {}\n", schema.join(" ")));
    for c in &set.columns {
        if c.decode != c.name {
            out.push_str(&format!("!decode {} = {}\n", c.name, c.decode));
        }
    }
    for (row, stay) in &set.pairs {
        let fields: Vec<String> = set
            .columns
            .iter()
            .zip(row)
            .map(|(c, v)| format!("{}={}", c.name, v))
            .collect();
        out.push_str(&format!(
            "{} -> {}\n",
            fields.join(" "),
            if *stay { "stay" } else { "break" }
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("pair file line {line}: {msg}")]
pub struct PairParseError {
    pub line: usize,
    pub msg: String,
}

pub fn parse_pairs(text: &str) -> Result<PairSet, PairParseError> {
    let mut loop_id: Option<LoopId> = None;
    let mut columns: Vec<PairColumn> = Vec::new();
    let mut pairs: Vec<Pair> = Vec::new();

    let fail = |line: usize, msg: String| PairParseError { line, msg };

    for (i, raw_line) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("!loop") {
            let id = LoopId::parse(rest.trim())
                .ok_or_else(|| fail(n, format!("bad loop id `{}`", rest.trim())))?;
            loop_id = Some(id);
        } else if let Some(rest) = line.strip_prefix("!schema") {
            if !columns.is_empty() {
                return Err(fail(n, "duplicate !schema line".into()));
            }
            for field in rest.split_whitespace() {
                let (name, ty) = field
                    .rsplit_once(':')
                    .ok_or_else(|| fail(n, format!("schema field `{field}` missing `:type`")))?;
                let ty = match ty {
                    "int" => ColTy::Int,
                    "bool" => ColTy::Bool,
                    other => return Err(fail(n, format!("unknown column type `{other}`"))),
                };
                columns.push(PairColumn {
                    name: name.to_string(),
                    ty,
                    decode: name.to_string(),
                });
            }
            if columns.is_empty() {
                return Err(fail(n, "schema has no columns".into()));
            }
        } else if let Some(rest) = line.strip_prefix("!decode") {
            let (name, text) = rest
                .split_once('=')
                .ok_or_else(|| fail(n, "decode line needs `name = expr`".into()))?;
            let name = name.trim();
            let col = columns
                .iter_mut()
                .find(|c| c.name == name)
                .ok_or_else(|| fail(n, format!("decode for unknown column `{name}`")))?;
            let text = text.trim().to_string();
            parse_expr_text(&text)
                .map_err(|e| fail(n, format!("decode for `{name}` does not parse: {e}")))?;
            col.decode = text;
        } else {
            // pair line
            if columns.is_empty() {
                return Err(fail(n, "pair line before !schema".into()));
            }
            let (inputs, decision) = line
                .rsplit_once("->")
                .ok_or_else(|| fail(n, "pair line missing `->`".into()))?;
            let stay = match decision.trim() {
                "stay" => true,
                "break" => false,
                other => return Err(fail(n, format!("decision must be stay|break, got `{other}`"))),
            };
            let fields: Vec<&str> = inputs.split_whitespace().collect();
            if fields.len() != columns.len() {
                return Err(fail(
                    n,
                    format!("expected {} fields, found {}", columns.len(), fields.len()),
                ));
            }
            let mut row = Vec::with_capacity(fields.len());
            for (field, col) in fields.iter().zip(&columns) {
                let (name, value) = field
                    .rsplit_once('=')
                    .ok_or_else(|| fail(n, format!("field `{field}` missing `=`")))?;
                if name != col.name {
                    return Err(fail(
                        n,
                        format!("field `{name}` out of order; expected `{}`", col.name),
                    ));
                }
                let v = match col.ty {
                    ColTy::Int => PairVal::Int(
                        value
                            .parse()
                            .map_err(|_| fail(n, format!("bad int `{value}`")))?,
                    ),
                    ColTy::Bool => match value {
                        "true" => PairVal::Bool(true),
                        "false" => PairVal::Bool(false),
                        other => return Err(fail(n, format!("bad bool `{other}`"))),
                    },
                };
                row.push(v);
            }
            pairs.push((row, stay));
        }
    }

    let loop_id = loop_id.ok_or_else(|| fail(0, "missing !loop line".into()))?;
    if pairs.is_empty() {
        return Err(fail(0, "no pairs in file".into()));
    }
    Ok(PairSet { loop_id, columns, pairs })
}
