//! Tree-walking interpreter.
//!
//! Semantics worth calling out:
//! * `&&` and `||` evaluate both operands (no short-circuit), so guard
//!   subvalue capture always sees every operand.
//! * Arrays are fixed-length and passed by reference; `[...]` allocates.
//! * Arithmetic is checked; overflow, bad indexing, a missing return from a
//!   typed function, and call-depth exhaustion end the run as runtime errors.
//! * Plain (unmonitored) loops still count iterations against the global cap
//!   and end the run as a runtime error when they hit it, so a validation run
//!   can never hang. Monitored loops instead force a break and keep going —
//!   the monitor records what happened and the outcome is derived at the end.
//!
//! Outcome precedence: a recorded exceeding execution beats a runtime error,
//! which beats an assertion failure, which beats a pass.

pub mod monitor;

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use crate::lang::ast::*;
use crate::lang::expr_to_string;

pub use monitor::{
    CollectedInvocation, ExitNature, LoopExecution, MonitorConfig, PairVal, RunResult,
    TestOutcome, DEFAULT_CALL_DEPTH_CAP, DEFAULT_GLOBAL_CAP,
};

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum InterpError {
    #[error("no test named `{0}` in program")]
    UnknownTest(String),
}

#[derive(Debug, Clone)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Array(Rc<RefCell<Vec<i64>>>),
}

impl Value {
    fn type_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "int",
            Value::Bool(_) => "bool",
            Value::Array(_) => "int[]",
        }
    }

    pub fn render(&self) -> String {
        match self {
            Value::Int(n) => n.to_string(),
            Value::Bool(b) => b.to_string(),
            Value::Array(a) => {
                let items: Vec<String> =
                    a.borrow().iter().map(|n| n.to_string()).collect();
                format!("[{}]", items.join(", "))
            }
        }
    }
}

/// Stack reserved for the interpreter thread. The tree-walker burns a few
/// Rust frames per interpreted call, so the default call-depth cap of 10,000
/// needs far more than a test thread's 2 MiB.
const INTERP_STACK_BYTES: usize = 64 << 20;

/// Runs one test in a fresh environment.
pub fn run_test(
    program: &Program,
    test_name: &str,
    config: &MonitorConfig,
) -> Result<RunResult, InterpError> {
    if program.test(test_name).is_none() {
        return Err(InterpError::UnknownTest(test_name.to_string()));
    }
    let result = std::thread::scope(|scope| {
        std::thread::Builder::new()
            .name(format!("lp-test-{test_name}"))
            .stack_size(INTERP_STACK_BYTES)
            .spawn_scoped(scope, || run_test_inner(program, test_name, config))
            .expect("spawn interpreter thread")
            .join()
            .unwrap_or_else(|panic| std::panic::resume_unwind(panic))
    });
    Ok(result)
}

fn run_test_inner(program: &Program, test_name: &str, config: &MonitorConfig) -> RunResult {
    let test = program.test(test_name).expect("checked by run_test");
    let loop_table = program.loop_table();
    let mut limits: Vec<HashMap<u32, u64>> = vec![HashMap::new(); loop_table.len()];
    for ((id, rank), limit) in &config.per_invocation_limit {
        if let Some(idx) = loop_table.iter().position(|l| l == id) {
            limits[idx].insert(*rank, *limit);
        }
    }
    let collection_index = config
        .collection_target
        .as_ref()
        .and_then(|id| loop_table.iter().position(|l| l == id).map(|i| i as u32));

    let mut run = Run {
        program,
        config,
        limits,
        loop_states: vec![LoopState::default(); loop_table.len()],
        trace: Vec::new(),
        collected: Vec::new(),
        collection_index,
        seq: 0,
        depth: 0,
    };

    let mut env = Env::new();
    let result = run.exec_block(&test.body, &mut env);

    // Derive the outcome. An exceeding execution anywhere in the run takes
    // precedence regardless of how the run ended afterwards.
    let first_exceeding = run
        .loop_states
        .iter()
        .enumerate()
        .filter_map(|(idx, st)| st.exceeding.map(|(rank, seq)| (seq, idx, rank)))
        .min();
    let outcome = if let Some((_, idx, rank)) = first_exceeding {
        TestOutcome::CapExceeded { loop_id: loop_table[idx].clone(), rank }
    } else {
        match result {
            Ok(_) => TestOutcome::Pass,
            Err(Abort::Assertion(message)) => TestOutcome::AssertionFailure { message },
            Err(Abort::Runtime(message)) => TestOutcome::RuntimeError { message },
        }
    };
    RunResult { outcome, trace: run.trace, collected: run.collected }
}

/// Runs every test in declaration order, each in isolation.
pub fn run_suite(
    program: &Program,
    config: &MonitorConfig,
) -> Vec<(String, RunResult)> {
    program
        .tests()
        .map(|t| {
            let r = run_test(program, &t.name, config)
                .expect("test obtained from the program itself");
            (t.name.clone(), r)
        })
        .collect()
}

#[derive(Debug, Clone)]
enum Abort {
    Assertion(String),
    Runtime(String),
}

enum Flow {
    Normal,
    Break,
    Return(Option<Value>),
}

#[derive(Debug, Clone, Copy, Default)]
struct LoopState {
    invocations: u32,
    /// First exceeding execution: (rank, global event sequence).
    exceeding: Option<(u32, u64)>,
}

/// Variable environment for one function (or test) activation. Lookup is a
/// reverse linear scan; scopes in this language are tiny and this beats
/// hashing short strings.
struct Env {
    vars: Vec<(String, Value)>,
    marks: Vec<usize>,
}

impl Env {
    fn new() -> Self {
        Env { vars: Vec::new(), marks: Vec::new() }
    }

    fn push_scope(&mut self) {
        self.marks.push(self.vars.len());
    }

    fn pop_scope(&mut self) {
        let mark = self.marks.pop().expect("scope underflow");
        self.vars.truncate(mark);
    }

    fn declare(&mut self, name: &str, value: Value) {
        self.vars.push((name.to_string(), value));
    }

    fn get(&self, name: &str) -> &Value {
        self.vars
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v)
            .expect("typechecked variable lookup")
    }

    fn set(&mut self, name: &str, value: Value) {
        let slot = self
            .vars
            .iter_mut()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v)
            .expect("typechecked variable assignment");
        *slot = value;
    }
}

struct Run<'a> {
    program: &'a Program,
    config: &'a MonitorConfig,
    /// Per loop-index rank -> limit overrides.
    limits: Vec<HashMap<u32, u64>>,
    loop_states: Vec<LoopState>,
    trace: Vec<LoopExecution>,
    collected: Vec<CollectedInvocation>,
    collection_index: Option<u32>,
    seq: u64,
    depth: u32,
}

impl<'a> Run<'a> {
    fn exec_block(&mut self, block: &Block, env: &mut Env) -> Result<Flow, Abort> {
        env.push_scope();
        for stmt in block {
            match self.exec_stmt(stmt, env) {
                Ok(Flow::Normal) => {}
                other => {
                    env.pop_scope();
                    return other;
                }
            }
        }
        env.pop_scope();
        Ok(Flow::Normal)
    }

    fn exec_stmt(&mut self, stmt: &Stmt, env: &mut Env) -> Result<Flow, Abort> {
        match &stmt.node {
            StmtKind::VarDecl { name, init, .. } => {
                let v = self.eval(init, env)?;
                env.declare(name, v);
                Ok(Flow::Normal)
            }
            StmtKind::Assign { name, value } => {
                let v = self.eval(value, env)?;
                env.set(name, v);
                Ok(Flow::Normal)
            }
            StmtKind::AssignElem { name, index, value } => {
                let idx = self.eval_int(index, env)?;
                let val = self.eval_int(value, env)?;
                let arr = match env.get(name) {
                    Value::Array(a) => a.clone(),
                    other => unreachable!("typecheck lets only arrays here: {other:?}"),
                };
                let mut borrow = arr.borrow_mut();
                let len = borrow.len();
                let slot = usize::try_from(idx)
                    .ok()
                    .filter(|&i| i < len)
                    .ok_or_else(|| index_error(idx, len))?;
                borrow[slot] = val;
                Ok(Flow::Normal)
            }
            StmtKind::If { cond, then_branch, else_branch } => {
                if self.eval_bool(cond, env)? {
                    self.exec_block(then_branch, env)
                } else if let Some(e) = else_branch {
                    self.exec_block(e, env)
                } else {
                    Ok(Flow::Normal)
                }
            }
            StmtKind::While(w) => match &w.monitor {
                None => self.exec_plain_while(w, env),
                Some(plan) => self.exec_monitored_while(w, plan, env),
            },
            StmtKind::Break => Ok(Flow::Break),
            StmtKind::Return(None) => Ok(Flow::Return(None)),
            StmtKind::Return(Some(v)) => {
                let value = self.eval(v, env)?;
                Ok(Flow::Return(Some(value)))
            }
            StmtKind::Assert(cond) => {
                if self.eval_bool(cond, env)? {
                    Ok(Flow::Normal)
                } else {
                    Err(Abort::Assertion(format!("assert({})", expr_to_string(cond))))
                }
            }
            StmtKind::CallStmt(e) => {
                let ExprKind::Call(name, args) = &e.node else { unreachable!() };
                self.call(name, args, env)?;
                Ok(Flow::Normal)
            }
        }
    }

    fn exec_plain_while(&mut self, w: &WhileLoop, env: &mut Env) -> Result<Flow, Abort> {
        let mut iters: u64 = 0;
        loop {
            if !self.eval_bool(&w.guard, env)? {
                return Ok(Flow::Normal);
            }
            if iters >= self.config.global_cap {
                return Err(Abort::Runtime(format!(
                    "unmonitored loop ran {} iterations without terminating (safety cap)",
                    self.config.global_cap
                )));
            }
            iters += 1;
            match self.exec_block(&w.body, env)? {
                Flow::Normal => {}
                Flow::Break => return Ok(Flow::Normal),
                ret @ Flow::Return(_) => return Ok(ret),
            }
        }
    }

    fn exec_monitored_while(
        &mut self,
        w: &WhileLoop,
        plan: &MonitorPlan,
        env: &mut Env,
    ) -> Result<Flow, Abort> {
        let idx = plan.loop_index as usize;
        let rank = {
            let st = &mut self.loop_states[idx];
            st.invocations += 1;
            st.invocations
        };
        let (limit, limit_is_global_cap) = match self.limits[idx].get(&rank) {
            Some(&l) => (l, false),
            None => (self.config.global_cap, true),
        };
        let collecting = self.collection_index == Some(plan.loop_index);
        let mut rows: Vec<(Vec<PairVal>, bool)> = Vec::new();
        let mut iters: u64 = 0;

        let (exit, result) = loop {
            // decide: evaluate the original guard (capturing subvalues if
            // this loop is the collection target), then apply the limit.
            let (guard_val, captures) =
                match self.eval_guard(&w.guard, collecting, env) {
                    Ok(v) => v,
                    Err(abort) => break (ExitNature::Return, Err(abort)),
                };
            let stay = guard_val && iters < limit;
            let forced = guard_val && !stay;
            if forced && limit_is_global_cap {
                let st = &mut self.loop_states[idx];
                if st.exceeding.is_none() {
                    self.seq += 1;
                    st.exceeding = Some((rank, self.seq));
                }
            }
            // collect: snapshot the state the decision saw.
            if collecting {
                match self.snapshot(plan, &captures, guard_val, env) {
                    Ok(snap) => rows.push((snap, stay)),
                    Err(abort) => break (ExitNature::Return, Err(abort)),
                }
            }
            if !stay {
                let nature =
                    if forced { ExitNature::Forced } else { ExitNature::Conditional };
                break (nature, Ok(Flow::Normal));
            }
            iters += 1;
            match self.exec_block(&w.body, env) {
                Ok(Flow::Normal) => {}
                Ok(Flow::Break) => break (ExitNature::Break, Ok(Flow::Normal)),
                Ok(ret @ Flow::Return(_)) => break (ExitNature::Return, Ok(ret)),
                Err(abort) => break (ExitNature::Return, Err(abort)),
            }
        };

        self.trace.push(LoopExecution {
            loop_index: plan.loop_index,
            rank,
            record: iters,
            exit,
        });
        if collecting {
            self.collected.push(CollectedInvocation { rank, rows });
        }
        result
    }

    /// Evaluates a guard once, optionally capturing the subvalues the
    /// snapshot plan may reference. Only the top level is decomposed; both
    /// operands are always evaluated (no short-circuit), matching `eval`.
    fn eval_guard(
        &mut self,
        guard: &Expr,
        capture: bool,
        env: &mut Env,
    ) -> Result<(bool, [Option<PairVal>; 2]), Abort> {
        if !capture {
            return Ok((self.eval_bool(guard, env)?, [None, None]));
        }
        match &guard.node {
            ExprKind::Binary(op @ (BinOp::And | BinOp::Or), lhs, rhs) => {
                let l = self.eval_bool(lhs, env)?;
                let r = self.eval_bool(rhs, env)?;
                let v = if *op == BinOp::And { l && r } else { l || r };
                Ok((v, [Some(PairVal::Bool(l)), Some(PairVal::Bool(r))]))
            }
            ExprKind::Binary(
                op @ (BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge),
                lhs,
                rhs,
            ) => {
                // == / != may compare bools; the other comparisons are
                // int-only by typecheck
                let l = self.eval_comparable(lhs, env)?;
                let r = self.eval_comparable(rhs, env)?;
                let v = match (op, l, r) {
                    (BinOp::Eq, a, b) => a == b,
                    (BinOp::Ne, a, b) => a != b,
                    (BinOp::Lt, PairVal::Int(a), PairVal::Int(b)) => a < b,
                    (BinOp::Le, PairVal::Int(a), PairVal::Int(b)) => a <= b,
                    (BinOp::Gt, PairVal::Int(a), PairVal::Int(b)) => a > b,
                    (BinOp::Ge, PairVal::Int(a), PairVal::Int(b)) => a >= b,
                    _ => unreachable!("typechecked comparison"),
                };
                Ok((v, [Some(l), Some(r)]))
            }
            _ => Ok((self.eval_bool(guard, env)?, [None, None])),
        }
    }

    fn snapshot(
        &mut self,
        plan: &MonitorPlan,
        captures: &[Option<PairVal>; 2],
        guard_val: bool,
        env: &mut Env,
    ) -> Result<Vec<PairVal>, Abort> {
        let mut out = Vec::with_capacity(plan.snapshot.len());
        for entry in &plan.snapshot {
            let v = match &entry.source {
                SnapshotSource::Scalar(name) => match env.get(name) {
                    Value::Int(n) => PairVal::Int(*n),
                    Value::Bool(b) => PairVal::Bool(*b),
                    Value::Array(_) => unreachable!("arrays are never scalar columns"),
                },
                SnapshotSource::ArrayLen(name) => match env.get(name) {
                    Value::Array(a) => PairVal::Int(a.borrow().len() as i64),
                    other => unreachable!("len column over non-array {other:?}"),
                },
                SnapshotSource::GuardSub(k) => captures[*k]
                    .expect("guard capture present for planned subvalue"),
                SnapshotSource::GuardValue => PairVal::Bool(guard_val),
            };
            out.push(v);
        }
        Ok(out)
    }

    fn call(
        &mut self,
        name: &str,
        args: &[Expr],
        env: &mut Env,
    ) -> Result<Option<Value>, Abort> {
        let func = self
            .program
            .function(name)
            .unwrap_or_else(|| unreachable!("typechecked call to `{name}`"));
        if self.depth >= self.config.call_depth_cap {
            return Err(Abort::Runtime(format!(
                "call depth exceeded {} (unbounded recursion?)",
                self.config.call_depth_cap
            )));
        }
        let mut values = Vec::with_capacity(args.len());
        for a in args {
            values.push(self.eval(a, env)?);
        }
        let mut callee_env = Env::new();
        callee_env.push_scope();
        for (p, v) in func.params.iter().zip(values) {
            callee_env.declare(&p.name, v);
        }
        self.depth += 1;
        let flow = self.exec_block(&func.body, &mut callee_env);
        self.depth -= 1;
        match flow? {
            Flow::Return(v) => Ok(v),
            Flow::Normal => {
                if func.ret.is_some() {
                    Err(Abort::Runtime(format!(
                        "function `{name}` finished without returning a value"
                    )))
                } else {
                    Ok(None)
                }
            }
            Flow::Break => unreachable!("break cannot escape a function body"),
        }
    }

    fn eval_comparable(&mut self, e: &Expr, env: &mut Env) -> Result<PairVal, Abort> {
        match self.eval(e, env)? {
            Value::Int(n) => Ok(PairVal::Int(n)),
            Value::Bool(b) => Ok(PairVal::Bool(b)),
            other => unreachable!("comparison over {}", other.type_name()),
        }
    }

    fn eval_int(&mut self, e: &Expr, env: &mut Env) -> Result<i64, Abort> {
        match self.eval(e, env)? {
            Value::Int(n) => Ok(n),
            other => unreachable!("typechecked int expression yielded {}", other.type_name()),
        }
    }

    fn eval_bool(&mut self, e: &Expr, env: &mut Env) -> Result<bool, Abort> {
        match self.eval(e, env)? {
            Value::Bool(b) => Ok(b),
            other => unreachable!("typechecked bool expression yielded {}", other.type_name()),
        }
    }

    fn eval(&mut self, e: &Expr, env: &mut Env) -> Result<Value, Abort> {
        match &e.node {
            ExprKind::IntLit(n) => Ok(Value::Int(*n)),
            ExprKind::BoolLit(b) => Ok(Value::Bool(*b)),
            ExprKind::Var(name) => Ok(env.get(name).clone()),
            ExprKind::ArrayLit(elems) => {
                let mut items = Vec::with_capacity(elems.len());
                for el in elems {
                    items.push(self.eval_int(el, env)?);
                }
                Ok(Value::Array(Rc::new(RefCell::new(items))))
            }
            ExprKind::Index(base, idx) => {
                let arr = match self.eval(base, env)? {
                    Value::Array(a) => a,
                    other => unreachable!("indexing a {}", other.type_name()),
                };
                let i = self.eval_int(idx, env)?;
                let borrow = arr.borrow();
                let slot = usize::try_from(i)
                    .ok()
                    .filter(|&s| s < borrow.len())
                    .ok_or_else(|| index_error(i, borrow.len()))?;
                Ok(Value::Int(borrow[slot]))
            }
            ExprKind::Len(arg) => {
                let arr = match self.eval(arg, env)? {
                    Value::Array(a) => a,
                    other => unreachable!("len() of a {}", other.type_name()),
                };
                let n = arr.borrow().len();
                Ok(Value::Int(n as i64))
            }
            ExprKind::Unary(UnOp::Not, inner) => {
                Ok(Value::Bool(!self.eval_bool(inner, env)?))
            }
            ExprKind::Unary(UnOp::Neg, inner) => {
                let v = self.eval_int(inner, env)?;
                v.checked_neg()
                    .map(Value::Int)
                    .ok_or_else(|| overflow_error("-", v, None))
            }
            ExprKind::Binary(op, lhs, rhs) => {
                let l = self.eval(lhs, env)?;
                let r = self.eval(rhs, env)?;
                self.binop(*op, l, r)
            }
            ExprKind::Call(name, args) => match self.call(name, args, env)? {
                Some(v) => Ok(v),
                None => unreachable!("typecheck rejects void calls in expressions"),
            },
        }
    }

    fn binop(&mut self, op: BinOp, l: Value, r: Value) -> Result<Value, Abort> {
        use BinOp::*;
        match (op, l, r) {
            (Add, Value::Int(a), Value::Int(b)) => a
                .checked_add(b)
                .map(Value::Int)
                .ok_or_else(|| overflow_error("+", a, Some(b))),
            (Sub, Value::Int(a), Value::Int(b)) => a
                .checked_sub(b)
                .map(Value::Int)
                .ok_or_else(|| overflow_error("-", a, Some(b))),
            (Mul, Value::Int(a), Value::Int(b)) => a
                .checked_mul(b)
                .map(Value::Int)
                .ok_or_else(|| overflow_error("*", a, Some(b))),
            (Lt, Value::Int(a), Value::Int(b)) => Ok(Value::Bool(a < b)),
            (Le, Value::Int(a), Value::Int(b)) => Ok(Value::Bool(a <= b)),
            (Gt, Value::Int(a), Value::Int(b)) => Ok(Value::Bool(a > b)),
            (Ge, Value::Int(a), Value::Int(b)) => Ok(Value::Bool(a >= b)),
            (Eq, Value::Int(a), Value::Int(b)) => Ok(Value::Bool(a == b)),
            (Ne, Value::Int(a), Value::Int(b)) => Ok(Value::Bool(a != b)),
            (Eq, Value::Bool(a), Value::Bool(b)) => Ok(Value::Bool(a == b)),
            (Ne, Value::Bool(a), Value::Bool(b)) => Ok(Value::Bool(a != b)),
            // both operands are always evaluated before we get here
            (And, Value::Bool(a), Value::Bool(b)) => Ok(Value::Bool(a && b)),
            (Or, Value::Bool(a), Value::Bool(b)) => Ok(Value::Bool(a || b)),
            (op, l, r) => unreachable!(
                "typecheck admitted `{}` on {} and {}",
                op.symbol(),
                l.type_name(),
                r.type_name()
            ),
        }
    }
}

fn index_error(idx: i64, len: usize) -> Abort {
    Abort::Runtime(format!("index {idx} out of bounds for array of length {len}"))
}

fn overflow_error(op: &str, a: i64, b: Option<i64>) -> Abort {
    match b {
        Some(b) => Abort::Runtime(format!("integer overflow evaluating {a} {op} {b}")),
        None => Abort::Runtime(format!("integer overflow evaluating {op}{a}")),
    }
}
