//! Bottom-up exhaustive search over one escalation stage.
//!
//! The enumeration order is a documented contract (repair output must be
//! byte-stable across runs):
//!
//! 1. size 0: schema columns as leaves, in schema order;
//! 2. sizes ascending, where size = operator instances in the term;
//! 3. within a size, operators in `OP_ORDER`, restricted to the stage;
//! 4. operand size splits with the left split ascending, then operands in
//!    creation order, left-major.
//!
//! Commutative operators only build `lhs ≤ rhs` (by creation order), and a
//! candidate is dropped when an earlier term with the same outputs on every
//! pair *and* the same operator multiset already exists — a later context
//! could never distinguish them. Candidates whose arithmetic overflows on
//! some pair are dropped outright: such a guard would abort at runtime.

use std::collections::HashSet;
use std::time::Instant;

use crate::collect::{ColTy, PairSet};
use crate::interp::PairVal;

use super::term::{Op, OpCounts, Term, OP_ORDER};

/// Wall-clock budget ran out mid-search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimedOut;

/// Per-operator instance bounds for one stage.
pub fn stage_limits(stage: u32, multiplicity: u8) -> OpCounts {
    let mut limits = [0u8; OP_ORDER.len()];
    for op in OP_ORDER {
        if op.stage() <= stage {
            limits[op.index()] = multiplicity;
        }
    }
    limits
}

/// Packed (one bit per pair) or plain per-pair values of a term.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Vals {
    Bool(Vec<u64>),
    Int(Vec<i64>),
}

struct Entry {
    term: Term,
    vals: Vals,
    used: OpCounts,
}

struct Bits {
    n: usize,
}

impl Bits {
    fn blocks(&self) -> usize {
        self.n.div_ceil(64)
    }

    fn pack(&self, it: impl Iterator<Item = bool>) -> Vec<u64> {
        let mut out = vec![0u64; self.blocks()];
        for (i, b) in it.enumerate() {
            if b {
                out[i / 64] |= 1 << (i % 64);
            }
        }
        out
    }

    /// Masks the unused tail of the last block after a bitwise NOT.
    fn mask(&self, mut v: Vec<u64>) -> Vec<u64> {
        let tail = self.n % 64;
        if tail != 0 {
            if let Some(last) = v.last_mut() {
                *last &= (1u64 << tail) - 1;
            }
        }
        v
    }
}

/// Searches the stage exhaustively; `Ok(None)` means no term over the active
/// operators (within the instance bounds) matches every pair.
pub fn enumerate_stage(
    set: &PairSet,
    stage: u32,
    multiplicity: u8,
    deadline: Option<Instant>,
) -> Result<Option<Term>, TimedOut> {
    let limits = stage_limits(stage, multiplicity);
    let max_size: usize = limits.iter().map(|&c| c as usize).sum();
    let bits = Bits { n: set.pairs.len() };
    let target = bits.pack(set.pairs.iter().map(|(_, o)| *o));

    let mut entries: Vec<Entry> = Vec::new();
    let mut size_start: Vec<usize> = vec![0];
    let mut seen: HashSet<(Vals, OpCounts)> = HashSet::new();
    let mut ticks: u32 = 0;

    let admit = |entries: &mut Vec<Entry>,
                 seen: &mut HashSet<(Vals, OpCounts)>,
                 term: Term,
                 vals: Vals,
                 used: OpCounts|
     -> Option<Term> {
        if let Vals::Bool(b) = &vals {
            if *b == target {
                return Some(term);
            }
        }
        if seen.insert((vals.clone(), used)) {
            entries.push(Entry { term, vals, used });
        }
        None
    };

    // size 0: schema columns
    for (i, col) in set.columns.iter().enumerate() {
        let vals = match col.ty {
            ColTy::Bool => Vals::Bool(bits.pack(set.pairs.iter().map(|(row, _)| {
                matches!(row[i], PairVal::Bool(true))
            }))),
            ColTy::Int => Vals::Int(
                set.pairs
                    .iter()
                    .map(|(row, _)| match row[i] {
                        PairVal::Int(n) => n,
                        PairVal::Bool(_) => unreachable!("schema says int"),
                    })
                    .collect(),
            ),
        };
        if let Some(t) =
            admit(&mut entries, &mut seen, Term::Input(i), vals, [0; OP_ORDER.len()])
        {
            return Ok(Some(t));
        }
    }

    for size in 1..=max_size {
        size_start.push(entries.len());
        for op in OP_ORDER {
            if limits[op.index()] == 0 {
                continue;
            }
            let found = match op.arity() {
                1 => unary(op, size, &mut entries, &size_start, &mut seen, &limits, &bits, &target, deadline, &mut ticks)?,
                2 => binary(op, size, &mut entries, &size_start, &mut seen, &limits, &bits, &target, deadline, &mut ticks)?,
                _ => ternary(op, size, &mut entries, &size_start, &mut seen, &limits, &bits, &target, deadline, &mut ticks)?,
            };
            if let Some(t) = found {
                return Ok(Some(t));
            }
        }
    }
    Ok(None)
}

fn range_of(size_start: &[usize], size: usize, len: usize) -> std::ops::Range<usize> {
    let start = size_start[size];
    let end = size_start.get(size + 1).copied().unwrap_or(len);
    start..end
}

fn tick(deadline: Option<Instant>, ticks: &mut u32) -> Result<(), TimedOut> {
    *ticks = ticks.wrapping_add(1);
    if *ticks % 4096 == 0 {
        if let Some(d) = deadline {
            if Instant::now() > d {
                return Err(TimedOut);
            }
        }
    }
    Ok(())
}

fn merged_counts(op: Op, parts: &[&OpCounts], limits: &OpCounts) -> Option<OpCounts> {
    let mut out = [0u8; OP_ORDER.len()];
    for (i, slot) in out.iter_mut().enumerate() {
        let mut total: u16 = parts.iter().map(|p| p[i] as u16).sum();
        if i == op.index() {
            total += 1;
        }
        if total > limits[i] as u16 {
            return None;
        }
        *slot = total as u8;
    }
    Some(out)
}

fn is_bool(v: &Vals) -> bool {
    matches!(v, Vals::Bool(_))
}

#[allow(clippy::too_many_arguments)]
fn unary(
    op: Op,
    size: usize,
    entries: &mut Vec<Entry>,
    size_start: &[usize],
    seen: &mut HashSet<(Vals, OpCounts)>,
    limits: &OpCounts,
    bits: &Bits,
    target: &[u64],
    deadline: Option<Instant>,
    ticks: &mut u32,
) -> Result<Option<Term>, TimedOut> {
    debug_assert_eq!(op, Op::Not);
    let at = size_start[size];
    for i in range_of(size_start, size - 1, at) {
        tick(deadline, ticks)?;
        let Vals::Bool(v) = &entries[i].vals else { continue };
        let Some(used) = merged_counts(op, &[&entries[i].used], limits) else { continue };
        let vals = Vals::Bool(bits.mask(v.iter().map(|b| !b).collect()));
        let term = Term::apply(op, vec![entries[i].term.clone()]);
        if let Vals::Bool(b) = &vals {
            if b == target {
                return Ok(Some(term));
            }
        }
        if seen.insert((vals.clone(), used)) {
            entries.push(Entry { term, vals, used });
        }
    }
    Ok(None)
}

#[allow(clippy::too_many_arguments)]
fn binary(
    op: Op,
    size: usize,
    entries: &mut Vec<Entry>,
    size_start: &[usize],
    seen: &mut HashSet<(Vals, OpCounts)>,
    limits: &OpCounts,
    bits: &Bits,
    target: &[u64],
    deadline: Option<Instant>,
    ticks: &mut u32,
) -> Result<Option<Term>, TimedOut> {
    let created_before = size_start[size];
    let wants_bool = op.operand_is_bool(0);
    for s1 in 0..size {
        let s2 = size - 1 - s1;
        if op.commutative() && s1 > s2 {
            continue;
        }
        let lhs_range = range_of(size_start, s1, created_before);
        for i in lhs_range {
            if is_bool(&entries[i].vals) != wants_bool {
                continue;
            }
            let rhs_range = range_of(size_start, s2, created_before);
            let rhs_from = if op.commutative() && s1 == s2 { i } else { rhs_range.start };
            for j in rhs_from.max(rhs_range.start)..rhs_range.end {
                tick(deadline, ticks)?;
                if is_bool(&entries[j].vals) != wants_bool {
                    continue;
                }
                let Some(used) = merged_counts(op, &[&entries[i].used, &entries[j].used], limits)
                else {
                    continue;
                };
                let Some(vals) = eval_binary(op, &entries[i].vals, &entries[j].vals, bits) else {
                    continue;
                };
                let term =
                    Term::apply(op, vec![entries[i].term.clone(), entries[j].term.clone()]);
                if let Vals::Bool(b) = &vals {
                    if b == target {
                        return Ok(Some(term));
                    }
                }
                if seen.insert((vals.clone(), used)) {
                    entries.push(Entry { term, vals, used });
                }
            }
        }
    }
    Ok(None)
}

fn eval_binary(op: Op, lhs: &Vals, rhs: &Vals, bits: &Bits) -> Option<Vals> {
    match (op, lhs, rhs) {
        (Op::Or, Vals::Bool(a), Vals::Bool(b)) => {
            Some(Vals::Bool(a.iter().zip(b).map(|(x, y)| x | y).collect()))
        }
        (Op::And, Vals::Bool(a), Vals::Bool(b)) => {
            Some(Vals::Bool(a.iter().zip(b).map(|(x, y)| x & y).collect()))
        }
        (Op::Gt, Vals::Int(a), Vals::Int(b)) => {
            Some(Vals::Bool(bits.pack(a.iter().zip(b).map(|(x, y)| x > y))))
        }
        (Op::Ge, Vals::Int(a), Vals::Int(b)) => {
            Some(Vals::Bool(bits.pack(a.iter().zip(b).map(|(x, y)| x >= y))))
        }
        (Op::Eq, Vals::Int(a), Vals::Int(b)) => {
            Some(Vals::Bool(bits.pack(a.iter().zip(b).map(|(x, y)| x == y))))
        }
        (Op::Ne, Vals::Int(a), Vals::Int(b)) => {
            Some(Vals::Bool(bits.pack(a.iter().zip(b).map(|(x, y)| x != y))))
        }
        (Op::Add, Vals::Int(a), Vals::Int(b)) => int_zip(a, b, i64::checked_add),
        (Op::Sub, Vals::Int(a), Vals::Int(b)) => int_zip(a, b, i64::checked_sub),
        (Op::Mul, Vals::Int(a), Vals::Int(b)) => int_zip(a, b, i64::checked_mul),
        _ => None,
    }
}

fn int_zip(a: &[i64], b: &[i64], f: fn(i64, i64) -> Option<i64>) -> Option<Vals> {
    let mut out = Vec::with_capacity(a.len());
    for (x, y) in a.iter().zip(b) {
        out.push(f(*x, *y)?);
    }
    Some(Vals::Int(out))
}

#[allow(clippy::too_many_arguments)]
fn ternary(
    op: Op,
    size: usize,
    entries: &mut Vec<Entry>,
    size_start: &[usize],
    seen: &mut HashSet<(Vals, OpCounts)>,
    limits: &OpCounts,
    bits: &Bits,
    target: &[u64],
    deadline: Option<Instant>,
    ticks: &mut u32,
) -> Result<Option<Term>, TimedOut> {
    debug_assert_eq!(op, Op::Ite);
    let created_before = size_start[size];
    for s1 in 0..size {
        for s2 in 0..size - s1 {
            let s3 = size - 1 - s1 - s2;
            for i in range_of(size_start, s1, created_before) {
                let Vals::Bool(c) = &entries[i].vals else { continue };
                let c = c.clone();
                for j in range_of(size_start, s2, created_before) {
                    if !is_bool(&entries[j].vals) {
                        continue;
                    }
                    for k in range_of(size_start, s3, created_before) {
                        tick(deadline, ticks)?;
                        let Vals::Bool(e) = &entries[k].vals else { continue };
                        let Vals::Bool(t) = &entries[j].vals else { continue };
                        let Some(used) = merged_counts(
                            op,
                            &[&entries[i].used, &entries[j].used, &entries[k].used],
                            limits,
                        ) else {
                            continue;
                        };
                        let vals = Vals::Bool(
                            c.iter()
                                .zip(t.iter().zip(e))
                                .map(|(cb, (tb, eb))| (cb & tb) | (!cb & eb))
                                .collect(),
                        );
                        let vals = match vals {
                            Vals::Bool(v) => Vals::Bool(bits.mask(v)),
                            other => other,
                        };
                        let term = Term::apply(
                            op,
                            vec![
                                entries[i].term.clone(),
                                entries[j].term.clone(),
                                entries[k].term.clone(),
                            ],
                        );
                        if let Vals::Bool(b) = &vals {
                            if b == target {
                                return Ok(Some(term));
                            }
                        }
                        if seen.insert((vals.clone(), used)) {
                            entries.push(Entry { term, vals, used });
                        }
                    }
                }
            }
        }
    }
    Ok(None)
}
