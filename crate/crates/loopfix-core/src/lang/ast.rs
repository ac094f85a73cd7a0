//! Syntax tree for the `.lp` mini-language.
//!
//! Programs are a flat list of function and test declarations. Loops carry an
//! optional monitor plan once instrumented; the plan is ignored by structural
//! equality so an instrumented program still compares equal to its source
//! shape everywhere else.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Byte range into the original source, for diagnostics and patch splicing.
#[derive(Debug, Clone, Copy, Default)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn cover(self, other: Span) -> Span {
        Span::new(self.start.min(other.start), self.end.max(other.end))
    }
}

/// AST node plus its source span. Equality ignores the span so parse/print
/// round-trips compare structurally.
#[derive(Debug, Clone)]
pub struct Spanned<T> {
    pub node: T,
    pub span: Span,
}

impl<T> Spanned<T> {
    pub fn new(node: T, span: Span) -> Self {
        Spanned { node, span }
    }
}

impl<T: PartialEq> PartialEq for Spanned<T> {
    fn eq(&self, other: &Self) -> bool {
        self.node == other.node
    }
}

impl<T: Eq> Eq for Spanned<T> {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Type {
    Int,
    Bool,
    IntArray,
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Int => write!(f, "int"),
            Type::Bool => write!(f, "bool"),
            Type::IntArray => write!(f, "int[]"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    /// Logical negation `!`.
    Not,
    /// Arithmetic negation `-`.
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }
}

pub type Expr = Spanned<ExprKind>;

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    IntLit(i64),
    BoolLit(bool),
    Var(String),
    /// `[e1, e2, ...]` — allocates a fresh `int[]`.
    ArrayLit(Vec<Expr>),
    /// `a[i]`
    Index(Box<Expr>, Box<Expr>),
    /// `len(a)`
    Len(Box<Expr>),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
}

pub type Stmt = Spanned<StmtKind>;

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    VarDecl {
        name: String,
        ty: Type,
        init: Expr,
    },
    Assign {
        name: String,
        value: Expr,
    },
    /// `a[i] = e;`
    AssignElem {
        name: String,
        index: Expr,
        value: Expr,
    },
    If {
        cond: Expr,
        then_branch: Block,
        else_branch: Option<Block>,
    },
    While(WhileLoop),
    Break,
    Return(Option<Expr>),
    Assert(Expr),
    /// Call used as a statement; the value (if any) is discarded.
    CallStmt(Expr),
}

pub type Block = Vec<Stmt>;

/// A `while` loop. `monitor` is `None` in source programs and populated by
/// instrumentation; it never affects structural equality.
#[derive(Debug, Clone)]
pub struct WhileLoop {
    pub guard: Expr,
    pub body: Block,
    pub monitor: Option<MonitorPlan>,
}

impl PartialEq for WhileLoop {
    fn eq(&self, other: &Self) -> bool {
        self.guard == other.guard && self.body == other.body
    }
}

/// Identifies a loop by its enclosing declaration and 0-based pre-order
/// position within that declaration. Stable across instrumentation and guard
/// replacement because neither adds or removes loops. Serializes as the same
/// `decl#index` string the command line accepts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LoopId {
    pub decl: String,
    pub index: u32,
}

impl Serialize for LoopId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LoopId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        LoopId::parse(&text)
            .ok_or_else(|| serde::de::Error::custom(format!("`{text}` is not decl#index")))
    }
}

impl LoopId {
    pub fn new(decl: impl Into<String>, index: u32) -> Self {
        LoopId { decl: decl.into(), index }
    }

    /// Parses the `decl#index` form used on the command line.
    pub fn parse(text: &str) -> Option<LoopId> {
        let (decl, idx) = text.rsplit_once('#')?;
        if decl.is_empty() {
            return None;
        }
        Some(LoopId { decl: decl.to_string(), index: idx.parse().ok()? })
    }
}

impl fmt::Display for LoopId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.decl, self.index)
    }
}

/// Where one snapshot column comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum SnapshotSource {
    /// An `int` or `bool` variable in scope at the loop head.
    Scalar(String),
    /// Length of an array variable in scope; column named `len$<var>`.
    ArrayLen(String),
    /// Value of the k-th captured guard subexpression; column named `sub$k`.
    GuardSub(usize),
    /// Value of the whole original guard; column named `guard$orig`.
    GuardValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotEntry {
    pub name: String,
    pub ty: Type,
    pub source: SnapshotSource,
    /// Expression a synthesized guard should use for this column.
    pub decode: Expr,
}

/// Instrumentation data attached to a loop: its identity, its slot in the
/// program-wide loop table, and the snapshot layout collected before each
/// iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorPlan {
    pub id: LoopId,
    pub loop_index: u32,
    pub snapshot: Vec<SnapshotEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub ty: Type,
}

#[derive(Debug, Clone)]
pub struct FunctionDecl {
    pub name: String,
    pub params: Vec<Param>,
    pub ret: Option<Type>,
    pub body: Block,
    pub span: Span,
}

impl PartialEq for FunctionDecl {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.params == other.params
            && self.ret == other.ret
            && self.body == other.body
    }
}

#[derive(Debug, Clone)]
pub struct TestCase {
    pub name: String,
    pub body: Block,
    pub span: Span,
}

impl PartialEq for TestCase {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.body == other.body
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Function(FunctionDecl),
    Test(TestCase),
}

impl Item {
    pub fn name(&self) -> &str {
        match self {
            Item::Function(f) => &f.name,
            Item::Test(t) => &t.name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    pub items: Vec<Item>,
}

impl Program {
    pub fn functions(&self) -> impl Iterator<Item = &FunctionDecl> {
        self.items.iter().filter_map(|i| match i {
            Item::Function(f) => Some(f),
            _ => None,
        })
    }

    pub fn tests(&self) -> impl Iterator<Item = &TestCase> {
        self.items.iter().filter_map(|i| match i {
            Item::Test(t) => Some(t),
            _ => None,
        })
    }

    pub fn function(&self, name: &str) -> Option<&FunctionDecl> {
        self.functions().find(|f| f.name == name)
    }

    pub fn test(&self, name: &str) -> Option<&TestCase> {
        self.tests().find(|t| t.name == name)
    }

    /// All loops in declaration order, pre-order within each declaration.
    /// The position in this vector is the "loop index" used by traces.
    pub fn loops(&self) -> Vec<(LoopId, &WhileLoop)> {
        let mut out = Vec::new();
        for item in &self.items {
            let (name, body) = match item {
                Item::Function(f) => (f.name.as_str(), &f.body),
                Item::Test(t) => (t.name.as_str(), &t.body),
            };
            let mut within = 0u32;
            collect_loops(body, name, &mut within, &mut out);
        }
        out
    }

    pub fn loop_table(&self) -> Vec<LoopId> {
        self.loops().into_iter().map(|(id, _)| id).collect()
    }

    pub fn find_loop(&self, id: &LoopId) -> Option<&WhileLoop> {
        self.loops().into_iter().find(|(lid, _)| lid == id).map(|(_, l)| l)
    }
}

fn collect_loops<'a>(
    block: &'a Block,
    decl: &str,
    within: &mut u32,
    out: &mut Vec<(LoopId, &'a WhileLoop)>,
) {
    for stmt in block {
        match &stmt.node {
            StmtKind::While(w) => {
                out.push((LoopId::new(decl, *within), w));
                *within += 1;
                collect_loops(&w.body, decl, within, out);
            }
            StmtKind::If { then_branch, else_branch, .. } => {
                collect_loops(then_branch, decl, within, out);
                if let Some(e) = else_branch {
                    collect_loops(e, decl, within, out);
                }
            }
            _ => {}
        }
    }
}

/// Replaces the guard of `id` in place. Fails if the loop does not exist.
/// The caller is responsible for re-typechecking the result.
pub fn replace_guard(program: &mut Program, id: &LoopId, guard: Expr) -> Result<(), UnknownLoop> {
    for item in &mut program.items {
        let (name, body) = match item {
            Item::Function(f) => (f.name.clone(), &mut f.body),
            Item::Test(t) => (t.name.clone(), &mut t.body),
        };
        if name == id.decl {
            let mut within = 0u32;
            if replace_in_block(body, id.index, &mut within, &guard) {
                return Ok(());
            }
        }
    }
    Err(UnknownLoop(id.clone()))
}

fn replace_in_block(block: &mut Block, target: u32, within: &mut u32, guard: &Expr) -> bool {
    for stmt in block {
        match &mut stmt.node {
            StmtKind::While(w) => {
                let here = *within;
                *within += 1;
                if here == target {
                    w.guard = guard.clone();
                    return true;
                }
                if replace_in_block(&mut w.body, target, within, guard) {
                    return true;
                }
            }
            StmtKind::If { then_branch, else_branch, .. } => {
                if replace_in_block(then_branch, target, within, guard) {
                    return true;
                }
                if let Some(e) = else_branch {
                    if replace_in_block(e, target, within, guard) {
                        return true;
                    }
                }
            }
            _ => {}
        }
    }
    false
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("no loop named {0} in program")]
pub struct UnknownLoop(pub LoopId);
