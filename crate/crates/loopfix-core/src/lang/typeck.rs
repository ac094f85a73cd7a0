//! Static checks run after parsing and again after guard replacement.
//!
//! Beyond ordinary type agreement this enforces the rules the rest of the
//! pipeline leans on: declaration names are unique program-wide, names are
//! never shadowed within a declaration (so snapshot column names are
//! unambiguous), `break` stays inside loops, and tests take no inputs and
//! return nothing. There is no return-path analysis; a typed function that
//! falls off the end is a runtime error instead.

use std::collections::{HashMap, HashSet};

use super::ast::*;
use super::lexer::line_col;
use super::LangError;

pub fn check(program: &Program, src: &str) -> Result<(), LangError> {
    let mut sigs: HashMap<&str, (&FunctionDecl, Vec<Type>)> = HashMap::new();
    let mut names: HashSet<&str> = HashSet::new();
    for item in &program.items {
        if !names.insert(item.name()) {
            let span = match item {
                Item::Function(f) => f.span,
                Item::Test(t) => t.span,
            };
            return err(src, span, format!("duplicate declaration `{}`", item.name()));
        }
        if let Item::Function(f) = item {
            sigs.insert(&f.name, (f, f.params.iter().map(|p| p.ty).collect()));
        }
    }

    for item in &program.items {
        match item {
            Item::Function(f) => {
                let mut cx = Cx {
                    src,
                    sigs: &sigs,
                    scopes: vec![HashMap::new()],
                    loop_depth: 0,
                    ret: RetPolicy::Function(f.ret),
                };
                for p in &f.params {
                    if cx.scopes[0].insert(p.name.clone(), p.ty).is_some() {
                        return err(src, f.span, format!("duplicate parameter `{}`", p.name));
                    }
                }
                cx.block(&f.body)?;
            }
            Item::Test(t) => {
                let mut cx = Cx {
                    src,
                    sigs: &sigs,
                    scopes: vec![HashMap::new()],
                    loop_depth: 0,
                    ret: RetPolicy::Test,
                };
                cx.block(&t.body)?;
            }
        }
    }
    Ok(())
}

enum RetPolicy {
    Function(Option<Type>),
    Test,
}

struct Cx<'a> {
    src: &'a str,
    sigs: &'a HashMap<&'a str, (&'a FunctionDecl, Vec<Type>)>,
    scopes: Vec<HashMap<String, Type>>,
    loop_depth: usize,
    ret: RetPolicy,
}

impl<'a> Cx<'a> {
    fn lookup(&self, name: &str) -> Option<Type> {
        self.scopes.iter().rev().find_map(|s| s.get(name).copied())
    }

    fn block(&mut self, stmts: &Block) -> Result<(), LangError> {
        self.scopes.push(HashMap::new());
        for s in stmts {
            self.stmt(s)?;
        }
        self.scopes.pop();
        Ok(())
    }

    fn stmt(&mut self, stmt: &Stmt) -> Result<(), LangError> {
        match &stmt.node {
            StmtKind::VarDecl { name, ty, init } => {
                if self.lookup(name).is_some() {
                    return err(
                        self.src,
                        stmt.span,
                        format!("`{name}` is already in scope; shadowing is not allowed"),
                    );
                }
                let got = self.expr(init)?;
                if got != *ty {
                    return err(
                        self.src,
                        init.span,
                        format!("initializer for `{name}` has type {got}, expected {ty}"),
                    );
                }
                self.scopes.last_mut().unwrap().insert(name.clone(), *ty);
            }
            StmtKind::Assign { name, value } => {
                let Some(ty) = self.lookup(name) else {
                    return err(self.src, stmt.span, format!("assignment to undeclared `{name}`"));
                };
                let got = self.expr(value)?;
                if got != ty {
                    return err(
                        self.src,
                        value.span,
                        format!("cannot assign {got} to `{name}` of type {ty}"),
                    );
                }
            }
            StmtKind::AssignElem { name, index, value } => {
                match self.lookup(name) {
                    Some(Type::IntArray) => {}
                    Some(other) => {
                        return err(self.src, stmt.span, format!("`{name}` has type {other}, not int[]"))
                    }
                    None => {
                        return err(self.src, stmt.span, format!("assignment to undeclared `{name}`"))
                    }
                }
                self.expect_ty(index, Type::Int, "array index")?;
                self.expect_ty(value, Type::Int, "array element")?;
            }
            StmtKind::If { cond, then_branch, else_branch } => {
                self.expect_ty(cond, Type::Bool, "if condition")?;
                self.block(then_branch)?;
                if let Some(e) = else_branch {
                    self.block(e)?;
                }
            }
            StmtKind::While(w) => {
                self.expect_ty(&w.guard, Type::Bool, "loop guard")?;
                self.loop_depth += 1;
                self.block(&w.body)?;
                self.loop_depth -= 1;
            }
            StmtKind::Break => {
                if self.loop_depth == 0 {
                    return err(self.src, stmt.span, "`break` outside of a loop".to_string());
                }
            }
            StmtKind::Return(value) => {
                let policy = match &self.ret {
                    RetPolicy::Test => None,
                    RetPolicy::Function(t) => Some(*t),
                };
                match (policy, value) {
                    (None, _) => {
                        return err(self.src, stmt.span, "tests cannot use `return`".to_string())
                    }
                    (Some(None), Some(v)) => {
                        return err(
                            self.src,
                            v.span,
                            "this function does not return a value".to_string(),
                        )
                    }
                    (Some(None), None) => {}
                    (Some(Some(want)), Some(v)) => {
                        let got = self.expr(v)?;
                        if got != want {
                            return err(
                                self.src,
                                v.span,
                                format!("return type mismatch: expected {want}, found {got}"),
                            );
                        }
                    }
                    (Some(Some(want)), None) => {
                        return err(
                            self.src,
                            stmt.span,
                            format!("`return;` in a function returning {want}"),
                        )
                    }
                }
            }
            StmtKind::Assert(cond) => {
                self.expect_ty(cond, Type::Bool, "assert condition")?;
            }
            StmtKind::CallStmt(e) => {
                // any signature is fine in statement position
                let ExprKind::Call(name, args) = &e.node else { unreachable!() };
                self.call(e, name, args)?;
            }
        }
        Ok(())
    }

    /// Checks a call and returns its return type (None for void).
    fn call(&mut self, at: &Expr, name: &str, args: &[Expr]) -> Result<Option<Type>, LangError> {
        let Some((decl, param_tys)) = self.sigs.get(name) else {
            return err(self.src, at.span, format!("call to unknown function `{name}`"));
        };
        if args.len() != param_tys.len() {
            return err(
                self.src,
                at.span,
                format!("`{name}` takes {} argument(s), got {}", param_tys.len(), args.len()),
            );
        }
        for (arg, want) in args.iter().zip(param_tys) {
            let got = self.expr(arg)?;
            if got != *want {
                return err(
                    self.src,
                    arg.span,
                    format!("argument type mismatch: expected {want}, found {got}"),
                );
            }
        }
        Ok(decl.ret)
    }

    fn expect_ty(&mut self, e: &Expr, want: Type, what: &str) -> Result<(), LangError> {
        let got = self.expr(e)?;
        if got != want {
            return err(self.src, e.span, format!("{what} must be {want}, found {got}"));
        }
        Ok(())
    }

    fn expr(&mut self, e: &Expr) -> Result<Type, LangError> {
        match &e.node {
            ExprKind::IntLit(_) => Ok(Type::Int),
            ExprKind::BoolLit(_) => Ok(Type::Bool),
            ExprKind::Var(name) => self
                .lookup(name)
                .ok_or_else(|| type_err(self.src, e.span, format!("undeclared variable `{name}`"))),
            ExprKind::ArrayLit(elems) => {
                for el in elems {
                    self.expect_ty(el, Type::Int, "array literal element")?;
                }
                Ok(Type::IntArray)
            }
            ExprKind::Index(base, idx) => {
                self.expect_ty(base, Type::IntArray, "indexed value")?;
                self.expect_ty(idx, Type::Int, "array index")?;
                Ok(Type::Int)
            }
            ExprKind::Len(arg) => {
                self.expect_ty(arg, Type::IntArray, "len() argument")?;
                Ok(Type::Int)
            }
            ExprKind::Unary(UnOp::Not, inner) => {
                self.expect_ty(inner, Type::Bool, "operand of `!`")?;
                Ok(Type::Bool)
            }
            ExprKind::Unary(UnOp::Neg, inner) => {
                self.expect_ty(inner, Type::Int, "operand of unary `-`")?;
                Ok(Type::Int)
            }
            ExprKind::Binary(op, lhs, rhs) => {
                let l = self.expr(lhs)?;
                let r = self.expr(rhs)?;
                let mismatch = |src: &str| {
                    type_err(src, e.span, format!("`{}` cannot combine {l} and {r}", op.symbol()))
                };
                match op {
                    BinOp::Add | BinOp::Sub | BinOp::Mul => {
                        if l == Type::Int && r == Type::Int {
                            Ok(Type::Int)
                        } else {
                            Err(mismatch(self.src))
                        }
                    }
                    BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                        if l == Type::Int && r == Type::Int {
                            Ok(Type::Bool)
                        } else {
                            Err(mismatch(self.src))
                        }
                    }
                    BinOp::Eq | BinOp::Ne => {
                        if l == r && l != Type::IntArray {
                            Ok(Type::Bool)
                        } else {
                            Err(mismatch(self.src))
                        }
                    }
                    BinOp::And | BinOp::Or => {
                        if l == Type::Bool && r == Type::Bool {
                            Ok(Type::Bool)
                        } else {
                            Err(mismatch(self.src))
                        }
                    }
                }
            }
            ExprKind::Call(name, args) => match self.call(e, name, args)? {
                Some(ty) => Ok(ty),
                None => err(
                    self.src,
                    e.span,
                    format!("`{name}` returns nothing and cannot be used in an expression"),
                ),
            },
        }
    }
}

fn err<T>(src: &str, span: Span, msg: String) -> Result<T, LangError> {
    Err(type_err(src, span, msg))
}

fn type_err(src: &str, span: Span, msg: String) -> LangError {
    let (line, col) = line_col(src, span.start);
    LangError::Type { line, col, msg }
}
