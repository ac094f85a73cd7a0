//! Helpers shared by the integration suites: a seeded generator for
//! terminating programs and a builder for exhaustive oracle pair sets.

// each test target compiles this module separately and uses its own subset
#![allow(dead_code)]

use loopfix_core::collect::{ColTy, PairColumn, PairSet};
use loopfix_core::interp::PairVal;
use loopfix_core::lang::ast::LoopId;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Emits a program that provably terminates: every loop counts a fresh
/// variable up to a literal bound of at most 8, the counter is never
/// reassigned in the body, and nesting stops at depth 2. Array writes index
/// with the counter against a fixed 8-slot array, so they stay in bounds.
/// Assertions are allowed to fail; callers compare outcomes across runs, not
/// against expected values.
pub fn random_terminating_program(seed: u64) -> String {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut src = String::new();
    src.push_str("fn f(a: int, b: int) -> int {\n");
    src.push_str("    var acc: int = 0;\n");
    src.push_str("    var arr: int[] = [1, 2, 3, 4, 5, 6, 7, 8];\n");
    let mut label = 0;
    for _ in 0..rng.gen_range(1..=2) {
        emit_loop(&mut rng, &mut src, &mut label, 1);
    }
    src.push_str("    return acc + arr[0];\n");
    src.push_str("}\n\n");
    for t in 0..rng.gen_range(1..=2) {
        let a = rng.gen_range(-5..=5);
        let b = rng.gen_range(-5..=5);
        match rng.gen_range(0..3) {
            0 => {
                src.push_str(&format!(
                    "test t{t} {{\n    assert(f({a}, {b}) == f({a}, {b}));\n}}\n"
                ));
            }
            1 => {
                let guess = rng.gen_range(-3..=3);
                src.push_str(&format!(
                    "test t{t} {{\n    assert(f({a}, {b}) == {guess});\n}}\n"
                ));
            }
            _ => {
                src.push_str(&format!(
                    "test t{t} {{\n    var r: int = f({a}, {b});\n    assert(r >= r);\n}}\n"
                ));
            }
        }
    }
    src
}

fn emit_loop(rng: &mut StdRng, src: &mut String, label: &mut u32, depth: u32) {
    let pad = "    ".repeat(depth as usize);
    let i = format!("i{label}");
    *label += 1;
    let bound = rng.gen_range(0..=8);
    src.push_str(&format!("{pad}var {i}: int = 0;\n"));
    src.push_str(&format!("{pad}while ({i} < {bound}) {{\n"));
    for _ in 0..rng.gen_range(1..=2) {
        match rng.gen_range(0..5) {
            0 => src.push_str(&format!("{pad}    acc = acc + a;\n")),
            1 => src.push_str(&format!("{pad}    acc = acc + {i} * b;\n")),
            2 => src.push_str(&format!("{pad}    arr[{i}] = acc;\n")),
            3 => {
                if depth < 2 {
                    emit_loop(rng, src, label, depth + 1);
                } else {
                    src.push_str(&format!("{pad}    acc = acc - b;\n"));
                }
            }
            _ => {
                let t = rng.gen_range(-4..=12);
                src.push_str(&format!("{pad}    if (acc > {t}) {{\n{pad}        break;\n{pad}    }}\n"));
            }
        }
    }
    src.push_str(&format!("{pad}    {i} = {i} + 1;\n"));
    src.push_str(&format!("{pad}}}\n"));
}

/// A pair-set column for [`exhaustive_pairs`]: name, type, and every value
/// the variable ranges over.
pub enum Domain {
    Int(&'static str, Vec<i64>),
    Bool(&'static str),
}

/// Builds the full truth table of `guard` over the cartesian product of the
/// domains. Column decode texts are the variable names themselves.
pub fn exhaustive_pairs(domains: &[Domain], guard: impl Fn(&[PairVal]) -> bool) -> PairSet {
    let columns: Vec<PairColumn> = domains
        .iter()
        .map(|d| match d {
            Domain::Int(name, _) => PairColumn {
                name: (*name).to_string(),
                ty: ColTy::Int,
                decode: (*name).to_string(),
            },
            Domain::Bool(name) => PairColumn {
                name: (*name).to_string(),
                ty: ColTy::Bool,
                decode: (*name).to_string(),
            },
        })
        .collect();
    let mut pairs = Vec::new();
    let mut row: Vec<PairVal> = Vec::with_capacity(domains.len());
    fill(domains, &guard, &mut row, &mut pairs);
    PairSet { loop_id: LoopId::new("oracle", 0), columns, pairs }
}

fn fill(
    domains: &[Domain],
    guard: &impl Fn(&[PairVal]) -> bool,
    row: &mut Vec<PairVal>,
    out: &mut Vec<(Vec<PairVal>, bool)>,
) {
    if row.len() == domains.len() {
        out.push((row.clone(), guard(row)));
        return;
    }
    match &domains[row.len()] {
        Domain::Int(_, values) => {
            for &v in values {
                row.push(PairVal::Int(v));
                fill(domains, guard, row, out);
                row.pop();
            }
        }
        Domain::Bool(_) => {
            for v in [false, true] {
                row.push(PairVal::Bool(v));
                fill(domains, guard, row, out);
                row.pop();
            }
        }
    }
}
