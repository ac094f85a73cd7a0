//! Candidate guard expressions over pair-set columns.
//!
//! A `Term` is a boolean expression whose leaves are column indices into a
//! `PairSet` schema. Operators come in five escalation stages; a candidate
//! may use each operator a bounded number of times (one by default). The
//! comparison operators are int-typed on both sides — the surface language
//! also allows `==`/`!=` on bools, but synthesized guards never need that
//! form, and keeping comparisons int-typed keeps the two search backends
//! interchangeable. If-then-else is bool-typed in all three positions and
//! decodes to `(c && t) || (!c && e)` since the language has no conditional
//! expression.

use std::collections::BTreeSet;

use crate::collect::{ColTy, PairColumn, PairSet};
use crate::interp::PairVal;
use crate::lang::ast::{BinOp, Expr, ExprKind, Span, Spanned, UnOp};
use crate::lang::parse_expr_text;

/// Escalation stages: each stage adds a bundle of operators to everything
/// below it. Stage 0 is the empty bundle — a bare boolean input.
pub const MAX_STAGE: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    Gt,
    Ge,
    Eq,
    Ne,
    Not,
    Or,
    And,
    Add,
    Sub,
    Ite,
    Mul,
}

/// Fixed global operator order; the enumerator visits operators in this
/// order, so it is part of the determinism contract.
pub const OP_ORDER: [Op; 11] = [
    Op::Gt,
    Op::Ge,
    Op::Eq,
    Op::Ne,
    Op::Not,
    Op::Or,
    Op::And,
    Op::Add,
    Op::Sub,
    Op::Ite,
    Op::Mul,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    Comparison,
    Logic,
    LinearArithmetic,
    IfThenElse,
    Multiplication,
}

impl Op {
    pub fn index(self) -> usize {
        OP_ORDER.iter().position(|o| *o == self).unwrap()
    }

    /// First stage at which the operator becomes available.
    pub fn stage(self) -> u32 {
        match self {
            Op::Gt | Op::Ge | Op::Eq | Op::Ne => 1,
            Op::Not | Op::Or | Op::And => 2,
            Op::Add | Op::Sub => 3,
            Op::Ite => 4,
            Op::Mul => 5,
        }
    }

    pub fn category(self) -> Category {
        match self {
            Op::Gt | Op::Ge | Op::Eq | Op::Ne => Category::Comparison,
            Op::Not | Op::Or | Op::And => Category::Logic,
            Op::Add | Op::Sub => Category::LinearArithmetic,
            Op::Ite => Category::IfThenElse,
            Op::Mul => Category::Multiplication,
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Op::Not => 1,
            Op::Ite => 3,
            _ => 2,
        }
    }

    /// Operand order never matters for these, so the enumerator only builds
    /// one of each mirrored pair.
    pub fn commutative(self) -> bool {
        matches!(self, Op::Eq | Op::Ne | Op::Or | Op::And | Op::Add | Op::Mul)
    }

    /// true when the result is boolean (otherwise int).
    pub fn returns_bool(self) -> bool {
        !matches!(self, Op::Add | Op::Sub | Op::Mul)
    }

    /// Operand types: true = bool, false = int.
    pub fn operand_is_bool(self, k: usize) -> bool {
        match self {
            Op::Not | Op::Or | Op::And | Op::Ite => true,
            _ => {
                debug_assert!(k < 2);
                false
            }
        }
    }
}

/// Per-operator usage counts, indexed by `Op::index`.
pub type OpCounts = [u8; OP_ORDER.len()];

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Input(usize),
    Apply(Op, Vec<Term>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum V {
    Int(i64),
    Bool(bool),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    /// Checked arithmetic failed — the candidate would abort at runtime on
    /// this state, so it cannot be a valid guard.
    #[error("arithmetic overflow")]
    Overflow,
    #[error("operand type mismatch")]
    TypeMismatch,
    #[error("input column {0} out of range")]
    UnknownInput(usize),
}

impl Term {
    pub fn apply(op: Op, args: Vec<Term>) -> Term {
        debug_assert_eq!(op.arity(), args.len());
        Term::Apply(op, args)
    }

    pub fn eval(&self, row: &[PairVal]) -> Result<V, EvalError> {
        match self {
            Term::Input(i) => match row.get(*i) {
                Some(PairVal::Int(n)) => Ok(V::Int(*n)),
                Some(PairVal::Bool(b)) => Ok(V::Bool(*b)),
                None => Err(EvalError::UnknownInput(*i)),
            },
            Term::Apply(op, args) => {
                let mut vals = [V::Bool(false); 3];
                for (k, a) in args.iter().enumerate() {
                    vals[k] = a.eval(row)?;
                }
                apply_op(*op, &vals[..args.len()])
            }
        }
    }

    /// Number of operator instances — the "components" metric of a patch.
    pub fn components(&self) -> u32 {
        match self {
            Term::Input(_) => 0,
            Term::Apply(_, args) => 1 + args.iter().map(Term::components).sum::<u32>(),
        }
    }

    pub fn categories(&self) -> BTreeSet<Category> {
        let mut out = BTreeSet::new();
        self.visit_ops(&mut |op| {
            out.insert(op.category());
        });
        out
    }

    pub fn op_counts(&self) -> OpCounts {
        let mut counts = [0u8; OP_ORDER.len()];
        self.visit_ops(&mut |op| counts[op.index()] = counts[op.index()].saturating_add(1));
        counts
    }

    fn visit_ops(&self, f: &mut impl FnMut(Op)) {
        if let Term::Apply(op, args) = self {
            f(*op);
            for a in args {
                a.visit_ops(f);
            }
        }
    }

    pub fn inputs_used(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.collect_inputs(&mut out);
        out
    }

    fn collect_inputs(&self, out: &mut BTreeSet<usize>) {
        match self {
            Term::Input(i) => {
                out.insert(*i);
            }
            Term::Apply(_, args) => {
                for a in args {
                    a.collect_inputs(out);
                }
            }
        }
    }
}

fn apply_op(op: Op, vals: &[V]) -> Result<V, EvalError> {
    use EvalError::*;
    let int = |v: &V| match v {
        V::Int(n) => Ok(*n),
        V::Bool(_) => Err(TypeMismatch),
    };
    let boolean = |v: &V| match v {
        V::Bool(b) => Ok(*b),
        V::Int(_) => Err(TypeMismatch),
    };
    Ok(match op {
        Op::Gt => V::Bool(int(&vals[0])? > int(&vals[1])?),
        Op::Ge => V::Bool(int(&vals[0])? >= int(&vals[1])?),
        Op::Eq => V::Bool(int(&vals[0])? == int(&vals[1])?),
        Op::Ne => V::Bool(int(&vals[0])? != int(&vals[1])?),
        Op::Not => V::Bool(!boolean(&vals[0])?),
        Op::Or => V::Bool(boolean(&vals[0])? | boolean(&vals[1])?),
        Op::And => V::Bool(boolean(&vals[0])? & boolean(&vals[1])?),
        Op::Add => V::Int(int(&vals[0])?.checked_add(int(&vals[1])?).ok_or(Overflow)?),
        Op::Sub => V::Int(int(&vals[0])?.checked_sub(int(&vals[1])?).ok_or(Overflow)?),
        Op::Mul => V::Int(int(&vals[0])?.checked_mul(int(&vals[1])?).ok_or(Overflow)?),
        Op::Ite => {
            let c = boolean(&vals[0])?;
            // both branches type-checked even though only one is "taken"
            let t = boolean(&vals[1])?;
            let e = boolean(&vals[2])?;
            V::Bool(if c { t } else { e })
        }
    })
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CandidateError {
    #[error("candidate is not boolean-typed")]
    NotBoolean,
    #[error("candidate evaluation failed: {0}")]
    Eval(EvalError),
}

/// Does the candidate reproduce the recorded stay/break decision on every
/// pair? Arithmetic overflow on any pair means the guard would abort the
/// program there, so the candidate simply does not comply.
pub fn check_candidate(term: &Term, set: &PairSet) -> Result<bool, CandidateError> {
    for (row, stay) in &set.pairs {
        match term.eval(row) {
            Ok(V::Bool(b)) => {
                if b != *stay {
                    return Ok(false);
                }
            }
            Ok(V::Int(_)) => return Err(CandidateError::NotBoolean),
            Err(EvalError::Overflow) => return Ok(false),
            Err(e) => return Err(CandidateError::Eval(e)),
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("column {0} has no usable source expression: {1}")]
    BadColumn(String, String),
    #[error("input column {0} out of range")]
    UnknownInput(usize),
}

/// Rebuilds a source-language expression for the term: leaves decode through
/// their column's source expression (`len(a)` for `len$a`, the original
/// guard for `guard$orig`, literals for the enriched constants).
pub fn term_to_guard(term: &Term, columns: &[PairColumn]) -> Result<Expr, DecodeError> {
    let leaf = |i: usize| -> Result<Expr, DecodeError> {
        let col = columns.get(i).ok_or(DecodeError::UnknownInput(i))?;
        parse_expr_text(&col.decode)
            .map_err(|e| DecodeError::BadColumn(col.name.clone(), e.to_string()))
    };
    let e = |kind: ExprKind| Spanned::new(kind, Span::default());
    let bin = |op: BinOp, l: Expr, r: Expr| e(ExprKind::Binary(op, Box::new(l), Box::new(r)));
    Ok(match term {
        Term::Input(i) => leaf(*i)?,
        Term::Apply(op, args) => {
            let mut parts: Vec<Expr> = args
                .iter()
                .map(|a| term_to_guard(a, columns))
                .collect::<Result<_, _>>()?;
            match op {
                Op::Ite => {
                    let els = parts.pop().unwrap();
                    let then = parts.pop().unwrap();
                    let cond = parts.pop().unwrap();
                    let negated = e(ExprKind::Unary(UnOp::Not, Box::new(cond.clone())));
                    bin(
                        BinOp::Or,
                        bin(BinOp::And, cond, then),
                        bin(BinOp::And, negated, els),
                    )
                }
                Op::Not => {
                    e(ExprKind::Unary(UnOp::Not, Box::new(parts.pop().unwrap())))
                }
                _ => {
                    let rhs = parts.pop().unwrap();
                    let lhs = parts.pop().unwrap();
                    let b = match op {
                        Op::Gt => BinOp::Gt,
                        Op::Ge => BinOp::Ge,
                        Op::Eq => BinOp::Eq,
                        Op::Ne => BinOp::Ne,
                        Op::Or => BinOp::Or,
                        Op::And => BinOp::And,
                        Op::Add => BinOp::Add,
                        Op::Sub => BinOp::Sub,
                        Op::Mul => BinOp::Mul,
                        Op::Not | Op::Ite => unreachable!(),
                    };
                    bin(b, lhs, rhs)
                }
            }
        }
    })
}

/// Human-readable form of a term over its schema.
pub fn render(term: &Term, columns: &[PairColumn]) -> String {
    match term_to_guard(term, columns) {
        Ok(expr) => crate::lang::expr_to_string(&expr),
        Err(_) => format!("{term:?}"),
    }
}

/// Is the term well-typed over the given schema with a boolean result?
pub fn result_type(term: &Term, columns: &[PairColumn]) -> Option<ColTy> {
    match term {
        Term::Input(i) => columns.get(*i).map(|c| c.ty),
        Term::Apply(op, args) => {
            for (k, a) in args.iter().enumerate() {
                let want = if op.operand_is_bool(k) { ColTy::Bool } else { ColTy::Int };
                if result_type(a, columns)? != want {
                    return None;
                }
            }
            Some(if op.returns_bool() { ColTy::Bool } else { ColTy::Int })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cols(spec: &[(&str, ColTy)]) -> Vec<PairColumn> {
        spec.iter()
            .map(|(name, ty)| PairColumn {
                name: name.to_string(),
                ty: *ty,
                decode: name.to_string(),
            })
            .collect()
    }

    fn set(columns: Vec<PairColumn>, pairs: Vec<(Vec<PairVal>, bool)>) -> PairSet {
        PairSet { loop_id: crate::lang::ast::LoopId::new("f", 0), columns, pairs }
    }

    #[test]
    fn evaluation_matches_hand_results() {
        let row = vec![PairVal::Int(3), PairVal::Int(5), PairVal::Bool(true)];
        let gt = Term::apply(Op::Gt, vec![Term::Input(1), Term::Input(0)]);
        assert_eq!(gt.eval(&row), Ok(V::Bool(true)));
        let sum = Term::apply(Op::Add, vec![Term::Input(0), Term::Input(1)]);
        assert_eq!(sum.eval(&row), Ok(V::Int(8)));
        let ite = Term::apply(
            Op::Ite,
            vec![Term::Input(2), gt.clone(), Term::apply(Op::Not, vec![gt])],
        );
        assert_eq!(ite.eval(&row), Ok(V::Bool(true)));
    }

    #[test]
    fn overflow_is_reported_not_wrapped() {
        let row = vec![PairVal::Int(i64::MAX), PairVal::Int(1)];
        let sum = Term::apply(Op::Add, vec![Term::Input(0), Term::Input(1)]);
        assert_eq!(sum.eval(&row), Err(EvalError::Overflow));
    }

    #[test]
    fn type_mismatch_is_an_error() {
        let row = vec![PairVal::Bool(true), PairVal::Int(1)];
        let bad = Term::apply(Op::Gt, vec![Term::Input(0), Term::Input(1)]);
        assert_eq!(bad.eval(&row), Err(EvalError::TypeMismatch));
    }

    #[test]
    fn component_metrics_count_instances_and_categories() {
        // (x > y) && (x + 1 != y)  -> 4 components, 3 categories
        let x = || Term::Input(0);
        let y = || Term::Input(1);
        let one = || Term::Input(2);
        let t = Term::apply(
            Op::And,
            vec![
                Term::apply(Op::Gt, vec![x(), y()]),
                Term::apply(Op::Ne, vec![Term::apply(Op::Add, vec![x(), one()]), y()]),
            ],
        );
        assert_eq!(t.components(), 4);
        assert_eq!(
            t.categories().into_iter().collect::<Vec<_>>(),
            vec![Category::Comparison, Category::Logic, Category::LinearArithmetic]
        );
        let counts = t.op_counts();
        assert_eq!(counts[Op::And.index()], 1);
        assert_eq!(counts[Op::Ne.index()], 1);
        assert_eq!(counts[Op::Gt.index()], 1);
        assert_eq!(counts[Op::Add.index()], 1);
    }

    #[test]
    fn check_candidate_accepts_exact_and_rejects_offenders() {
        let columns = cols(&[("i", ColTy::Int), ("n", ColTy::Int)]);
        let pairs = vec![
            (vec![PairVal::Int(0), PairVal::Int(2)], true),
            (vec![PairVal::Int(1), PairVal::Int(2)], true),
            (vec![PairVal::Int(2), PairVal::Int(2)], false),
        ];
        let s = set(columns, pairs);
        let n_gt_i = Term::apply(Op::Gt, vec![Term::Input(1), Term::Input(0)]);
        assert_eq!(check_candidate(&n_gt_i, &s), Ok(true));
        let i_gt_n = Term::apply(Op::Gt, vec![Term::Input(0), Term::Input(1)]);
        assert_eq!(check_candidate(&i_gt_n, &s), Ok(false));
        // an int-typed "guard" is malformed, not merely wrong
        let malformed = Term::apply(Op::Add, vec![Term::Input(0), Term::Input(1)]);
        assert_eq!(check_candidate(&malformed, &s), Err(CandidateError::NotBoolean));
    }

    #[test]
    fn overflowing_candidate_fails_the_check_quietly() {
        let columns = cols(&[("x", ColTy::Int)]);
        let pairs = vec![(vec![PairVal::Int(i64::MAX)], true)];
        let s = set(columns, pairs);
        let t = Term::apply(
            Op::Gt,
            vec![Term::apply(Op::Add, vec![Term::Input(0), Term::Input(0)]), Term::Input(0)],
        );
        assert_eq!(check_candidate(&t, &s), Ok(false));
    }

    #[test]
    fn decode_splices_column_sources() {
        let columns = vec![
            PairColumn { name: "pending".into(), ty: ColTy::Int, decode: "pending".into() },
            PairColumn { name: "len$q".into(), ty: ColTy::Int, decode: "len(q)".into() },
            PairColumn { name: "guard$orig".into(), ty: ColTy::Bool, decode: "b != 0".into() },
            PairColumn { name: "const$0".into(), ty: ColTy::Int, decode: "0".into() },
        ];
        let t = Term::apply(
            Op::And,
            vec![
                Term::Input(2),
                Term::apply(Op::Gt, vec![Term::Input(1), Term::Input(0)]),
            ],
        );
        assert_eq!(render(&t, &columns), "b != 0 && len(q) > pending");
        let ite = Term::apply(
            Op::Ite,
            vec![Term::Input(2), Term::Input(2), Term::Input(2)],
        );
        assert_eq!(render(&ite, &columns), "b != 0 && b != 0 || !(b != 0) && b != 0");
    }

    #[test]
    fn result_type_enforces_operand_types() {
        let columns = cols(&[("x", ColTy::Int), ("b", ColTy::Bool)]);
        let ok = Term::apply(Op::Gt, vec![Term::Input(0), Term::Input(0)]);
        assert_eq!(result_type(&ok, &columns), Some(ColTy::Bool));
        let bad = Term::apply(Op::Gt, vec![Term::Input(0), Term::Input(1)]);
        assert_eq!(result_type(&bad, &columns), None);
        let arith = Term::apply(Op::Add, vec![Term::Input(0), Term::Input(0)]);
        assert_eq!(result_type(&arith, &columns), Some(ColTy::Int));
    }
}
