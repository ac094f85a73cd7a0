//! Source renderer. For plain programs the output parses back to a
//! structurally identical AST. Instrumented loops render in a `decide`/
//! `collect` display form that is deliberately not part of the grammar —
//! it exists so people can read what the monitor sees.

use super::ast::*;

pub fn program_to_string(program: &Program) -> String {
    let mut out = String::new();
    for (i, item) in program.items.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        match item {
            Item::Function(f) => function_to_string(f, &mut out),
            Item::Test(t) => {
                out.push_str(&format!("test {} {{\n", t.name));
                block(&t.body, 1, &mut out);
                out.push_str("}\n");
            }
        }
    }
    out
}

fn function_to_string(f: &FunctionDecl, out: &mut String) {
    let params: Vec<String> =
        f.params.iter().map(|p| format!("{}: {}", p.name, p.ty)).collect();
    out.push_str(&format!("fn {}({})", f.name, params.join(", ")));
    if let Some(ret) = f.ret {
        out.push_str(&format!(" -> {ret}"));
    }
    out.push_str(" {\n");
    block(&f.body, 1, out);
    out.push_str("}\n");
}

fn indent(depth: usize, out: &mut String) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn block(stmts: &Block, depth: usize, out: &mut String) {
    for s in stmts {
        stmt(s, depth, out);
    }
}

fn stmt(s: &Stmt, depth: usize, out: &mut String) {
    indent(depth, out);
    match &s.node {
        StmtKind::VarDecl { name, ty, init } => {
            out.push_str(&format!("var {name}: {ty} = {};\n", expr_to_string(init)));
        }
        StmtKind::Assign { name, value } => {
            out.push_str(&format!("{name} = {};\n", expr_to_string(value)));
        }
        StmtKind::AssignElem { name, index, value } => {
            out.push_str(&format!(
                "{name}[{}] = {};\n",
                expr_to_string(index),
                expr_to_string(value)
            ));
        }
        StmtKind::If { cond, then_branch, else_branch } => {
            out.push_str(&format!("if ({}) {{\n", expr_to_string(cond)));
            block(then_branch, depth + 1, out);
            indent(depth, out);
            if let Some(e) = else_branch {
                out.push_str("} else {\n");
                block(e, depth + 1, out);
                indent(depth, out);
            }
            out.push_str("}\n");
        }
        StmtKind::While(w) => match &w.monitor {
            None => {
                out.push_str(&format!("while ({}) {{\n", expr_to_string(&w.guard)));
                block(&w.body, depth + 1, out);
                indent(depth, out);
                out.push_str("}\n");
            }
            Some(plan) => monitored_while(w, plan, depth, out),
        },
        StmtKind::Break => out.push_str("break;\n"),
        StmtKind::Return(None) => out.push_str("return;\n"),
        StmtKind::Return(Some(v)) => {
            out.push_str(&format!("return {};\n", expr_to_string(v)));
        }
        StmtKind::Assert(cond) => {
            out.push_str(&format!("assert({});\n", expr_to_string(cond)));
        }
        StmtKind::CallStmt(e) => {
            out.push_str(&format!("{};\n", expr_to_string(e)));
        }
    }
}

fn monitored_while(w: &WhileLoop, plan: &MonitorPlan, depth: usize, out: &mut String) {
    out.push_str("while (true) {\n");
    indent(depth + 1, out);
    out.push_str(&format!(
        "stay := decide[{}]({}, iters);\n",
        plan.id,
        expr_to_string(&w.guard)
    ));
    indent(depth + 1, out);
    let cols: Vec<&str> = plan.snapshot.iter().map(|e| e.name.as_str()).collect();
    out.push_str(&format!("collect[{}](stay, {});\n", plan.id, cols.join(", ")));
    indent(depth + 1, out);
    out.push_str("if (stay) {\n");
    block(&w.body, depth + 2, out);
    indent(depth + 1, out);
    out.push_str("} else {\n");
    indent(depth + 2, out);
    out.push_str("break;\n");
    indent(depth + 1, out);
    out.push_str("}\n");
    indent(depth, out);
    out.push_str("}\n");
}

pub fn expr_to_string(e: &Expr) -> String {
    let mut s = String::new();
    expr_prec(e, 0, &mut s);
    s
}

fn prec_of(e: &ExprKind) -> u8 {
    match e {
        ExprKind::Binary(op, ..) => match op {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul => 6,
        },
        ExprKind::Unary(..) => 7,
        ExprKind::Index(..) => 8,
        _ => 9,
    }
}

fn expr_prec(e: &Expr, min: u8, out: &mut String) {
    let prec = prec_of(&e.node);
    let paren = prec < min;
    if paren {
        out.push('(');
    }
    match &e.node {
        ExprKind::IntLit(n) => out.push_str(&n.to_string()),
        ExprKind::BoolLit(b) => out.push_str(if *b { "true" } else { "false" }),
        ExprKind::Var(name) => out.push_str(name),
        ExprKind::ArrayLit(elems) => {
            out.push('[');
            for (i, el) in elems.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                expr_prec(el, 0, out);
            }
            out.push(']');
        }
        ExprKind::Index(base, idx) => {
            expr_prec(base, 8, out);
            out.push('[');
            expr_prec(idx, 0, out);
            out.push(']');
        }
        ExprKind::Len(arg) => {
            out.push_str("len(");
            expr_prec(arg, 0, out);
            out.push(')');
        }
        ExprKind::Unary(op, inner) => {
            out.push_str(match op {
                UnOp::Not => "!",
                UnOp::Neg => "-",
            });
            expr_prec(inner, 7, out);
        }
        ExprKind::Binary(op, lhs, rhs) => {
            expr_prec(lhs, prec, out);
            out.push_str(&format!(" {} ", op.symbol()));
            expr_prec(rhs, prec + 1, out);
        }
        ExprKind::Call(name, args) => {
            out.push_str(name);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                expr_prec(a, 0, out);
            }
            out.push(')');
        }
    }
    if paren {
        out.push(')');
    }
}
