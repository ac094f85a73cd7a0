//! Attaches a monitor plan to every `while` loop.
//!
//! The transformation leaves the program's structure untouched (same loops,
//! same ids, same guards); it only records, per loop, what a monitor should
//! snapshot at the top of each iteration:
//!
//! * every `int`/`bool` variable in scope at the loop head, in declaration
//!   order, parameters first;
//! * `len$a` for every array `a` in scope;
//! * `sub$k` guard subvalues: the two operands of a top-level comparison
//!   (skipping operands that are already bare variables), or the two
//!   immediate subpredicates of a top-level `&&`/`||`;
//! * `guard$orig`, the value of the original guard itself.
//!
//! Each entry carries the expression a synthesized guard should use to read
//! that column (`len(a)` for `len$a`, the captured subexpression for `sub$k`,
//! the whole original guard for `guard$orig`).

use std::collections::HashMap;

use crate::lang::ast::*;

/// Returns a copy of `program` with every loop carrying a monitor plan.
/// Instrumenting an already-instrumented program recomputes the plans.
pub fn instrument(program: &Program) -> Program {
    let sigs: HashMap<String, Option<Type>> =
        program.functions().map(|f| (f.name.clone(), f.ret)).collect();
    let mut out = program.clone();
    let mut next_index = 0u32;
    for item in &mut out.items {
        match item {
            Item::Function(f) => {
                let scope: Vec<(String, Type)> =
                    f.params.iter().map(|p| (p.name.clone(), p.ty)).collect();
                let name = f.name.clone();
                plan_block(&mut f.body, &name, scope, &mut 0, &mut next_index, &sigs);
            }
            Item::Test(t) => {
                let name = t.name.clone();
                plan_block(&mut t.body, &name, Vec::new(), &mut 0, &mut next_index, &sigs);
            }
        }
    }
    out
}

/// Removes all monitor plans, yielding the plain program.
pub fn strip(program: &Program) -> Program {
    let mut out = program.clone();
    for item in &mut out.items {
        let body = match item {
            Item::Function(f) => &mut f.body,
            Item::Test(t) => &mut t.body,
        };
        strip_block(body);
    }
    out
}

fn strip_block(block: &mut Block) {
    for stmt in block {
        match &mut stmt.node {
            StmtKind::While(w) => {
                w.monitor = None;
                strip_block(&mut w.body);
            }
            StmtKind::If { then_branch, else_branch, .. } => {
                strip_block(then_branch);
                if let Some(e) = else_branch {
                    strip_block(e);
                }
            }
            _ => {}
        }
    }
}

fn plan_block(
    block: &mut Block,
    decl: &str,
    mut scope: Vec<(String, Type)>,
    within: &mut u32,
    next_index: &mut u32,
    sigs: &HashMap<String, Option<Type>>,
) {
    for stmt in block {
        match &mut stmt.node {
            StmtKind::VarDecl { name, ty, .. } => {
                scope.push((name.clone(), *ty));
            }
            StmtKind::While(w) => {
                let id = LoopId::new(decl, *within);
                *within += 1;
                let plan = MonitorPlan {
                    id,
                    loop_index: *next_index,
                    snapshot: snapshot_plan(&scope, &w.guard, sigs),
                };
                *next_index += 1;
                w.monitor = Some(plan);
                plan_block(&mut w.body, decl, scope.clone(), within, next_index, sigs);
            }
            StmtKind::If { then_branch, else_branch, .. } => {
                plan_block(then_branch, decl, scope.clone(), within, next_index, sigs);
                if let Some(e) = else_branch {
                    plan_block(e, decl, scope.clone(), within, next_index, sigs);
                }
            }
            _ => {}
        }
    }
}

fn snapshot_plan(
    scope: &[(String, Type)],
    guard: &Expr,
    sigs: &HashMap<String, Option<Type>>,
) -> Vec<SnapshotEntry> {
    let mut entries = Vec::new();
    for (name, ty) in scope {
        match ty {
            Type::Int | Type::Bool => entries.push(SnapshotEntry {
                name: name.clone(),
                ty: *ty,
                source: SnapshotSource::Scalar(name.clone()),
                decode: var(name),
            }),
            Type::IntArray => {}
        }
    }
    for (name, ty) in scope {
        if *ty == Type::IntArray {
            entries.push(SnapshotEntry {
                name: format!("len${name}"),
                ty: Type::Int,
                source: SnapshotSource::ArrayLen(name.clone()),
                decode: Spanned::new(ExprKind::Len(Box::new(var(name))), Span::default()),
            });
        }
    }
    entries.extend(guard_subvalues(guard, scope, sigs));
    entries.push(SnapshotEntry {
        name: "guard$orig".to_string(),
        ty: Type::Bool,
        source: SnapshotSource::GuardValue,
        decode: guard.clone(),
    });
    entries
}

/// Subvalue columns for a guard. Only the top level of the guard is
/// decomposed; anything deeper is visible through `guard$orig` alone.
fn guard_subvalues(
    guard: &Expr,
    scope: &[(String, Type)],
    sigs: &HashMap<String, Option<Type>>,
) -> Vec<SnapshotEntry> {
    let mut out = Vec::new();
    match &guard.node {
        ExprKind::Binary(op, lhs, rhs) => match op {
            BinOp::And | BinOp::Or => {
                for (k, side) in [(0, lhs), (1, rhs)] {
                    out.push(sub_entry(k, side, Type::Bool));
                }
            }
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                for (k, side) in [(0, lhs), (1, rhs)] {
                    if !matches!(side.node, ExprKind::Var(_)) {
                        // == and != also accept bool operands, so the column
                        // type comes from a little inference pass
                        if let Some(ty @ (Type::Int | Type::Bool)) =
                            infer_type(side, scope, sigs)
                        {
                            out.push(sub_entry(k, side, ty));
                        }
                    }
                }
            }
            _ => {}
        },
        _ => {}
    }
    out
}

/// Expression type over an already-typechecked program; `None` never happens
/// in practice but keeps this total.
fn infer_type(
    e: &Expr,
    scope: &[(String, Type)],
    sigs: &HashMap<String, Option<Type>>,
) -> Option<Type> {
    match &e.node {
        ExprKind::IntLit(_) | ExprKind::Len(_) | ExprKind::Index(..) => Some(Type::Int),
        ExprKind::BoolLit(_) => Some(Type::Bool),
        ExprKind::Var(name) => {
            scope.iter().rev().find(|(n, _)| n == name).map(|(_, ty)| *ty)
        }
        ExprKind::ArrayLit(_) => Some(Type::IntArray),
        ExprKind::Unary(UnOp::Not, _) => Some(Type::Bool),
        ExprKind::Unary(UnOp::Neg, _) => Some(Type::Int),
        ExprKind::Binary(op, ..) => match op {
            BinOp::Add | BinOp::Sub | BinOp::Mul => Some(Type::Int),
            _ => Some(Type::Bool),
        },
        ExprKind::Call(name, _) => sigs.get(name).copied().flatten(),
    }
}

fn sub_entry(k: usize, side: &Expr, ty: Type) -> SnapshotEntry {
    SnapshotEntry {
        name: format!("sub${k}"),
        ty,
        source: SnapshotSource::GuardSub(k),
        decode: side.clone(),
    }
}

fn var(name: &str) -> Expr {
    Spanned::new(ExprKind::Var(name.to_string()), Span::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{expr_to_string, load_program};

    fn plan_names(src: &str, loop_idx: usize) -> (Program, Vec<String>) {
        let prog = instrument(&load_program(src).unwrap());
        let loops = prog.loops();
        let plan = loops[loop_idx].1.monitor.as_ref().unwrap();
        let names = plan.snapshot.iter().map(|e| e.name.clone()).collect();
        (prog.clone(), names)
    }

    #[test]
    fn instrumentation_preserves_structure() {
        let src = "fn f(n: int) -> int {
                       var i: int = 0;
                       while (i < n) { i = i + 1; }
                       return i;
                   }";
        let prog = load_program(src).unwrap();
        let inst = instrument(&prog);
        // structural equality ignores monitor plans by design
        assert_eq!(prog, inst);
        assert_eq!(prog.loop_table(), inst.loop_table());
        assert!(inst.loops()[0].1.monitor.is_some());
    }

    #[test]
    fn snapshot_lists_scalars_then_lens_then_guard() {
        let (_, names) = plan_names(
            "fn clear(a: int[]) {
                 var i: int = 0;
                 var n: int = len(a);
                 while (i < n) { a[i] = 0; i = i + 1; }
             }",
            0,
        );
        assert_eq!(names, vec!["i", "n", "len$a", "guard$orig"]);
    }

    #[test]
    fn comparison_operands_become_subvalues_unless_bare() {
        let (prog, names) = plan_names(
            "fn find(sorted: int[], e: int) -> int {
                 var low: int = 0;
                 while (sorted[low] < e) { low = low + 1; }
                 return low;
             }",
            0,
        );
        // e and low are scalars; sorted[low] is compound so it gets sub$0,
        // while the bare variable e does not get sub$1.
        assert_eq!(names, vec!["e", "low", "len$sorted", "sub$0", "guard$orig"]);
        let plan = prog.loops()[0].1.monitor.as_ref().unwrap().clone();
        let sub = plan.snapshot.iter().find(|s| s.name == "sub$0").unwrap();
        assert_eq!(expr_to_string(&sub.decode), "sorted[low]");
        assert_eq!(sub.ty, Type::Int);
    }

    #[test]
    fn conjunction_guards_capture_both_sides() {
        let (prog, names) = plan_names(
            "fn f(a: bool, n: int) {
                 var i: int = 0;
                 while (a && i < n) { i = i + 1; }
             }",
            0,
        );
        assert_eq!(names, vec!["a", "n", "i", "sub$0", "sub$1", "guard$orig"]);
        let plan = prog.loops()[0].1.monitor.as_ref().unwrap().clone();
        let sub1 = plan.snapshot.iter().find(|s| s.name == "sub$1").unwrap();
        assert_eq!(expr_to_string(&sub1.decode), "i < n");
        assert_eq!(sub1.ty, Type::Bool);
    }

    #[test]
    fn vars_declared_inside_the_loop_are_not_columns() {
        let (_, names) = plan_names(
            "fn f(n: int) {
                 var i: int = 0;
                 while (i != n) {
                     var step: int = 1;
                     i = i + step;
                 }
             }",
            0,
        );
        assert_eq!(names, vec!["n", "i", "guard$orig"]);
    }

    #[test]
    fn loop_indices_count_across_declarations() {
        let src = "fn f() { while (false) { while (false) { } } }
                   test t { while (false) { } }";
        let prog = instrument(&load_program(src).unwrap());
        let loops = prog.loops();
        let indices: Vec<u32> =
            loops.iter().map(|(_, w)| w.monitor.as_ref().unwrap().loop_index).collect();
        assert_eq!(indices, vec![0, 1, 2]);
        let ids: Vec<LoopId> =
            loops.iter().map(|(_, w)| w.monitor.as_ref().unwrap().id.clone()).collect();
        assert_eq!(ids, prog.loop_table());
    }
}
