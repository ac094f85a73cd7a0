//! SMT-LIB2 encoding of one synthesis stage.
//!
//! Component-based encoding over "lines": schema columns occupy fixed
//! positions `0..n_inputs`; every operator slot (one per active operator per
//! multiplicity step) gets an integer position variable in
//! `[n_inputs, n_inputs + n_slots)`, all distinct. Operand location
//! variables pick a type-compatible earlier line (acyclicity is `location <
//! position`), and per-pair value variables wire the dataflow: choosing a
//! line forces the operand's value to equal that line's value on every pair.
//! The output location ranges over boolean lines and must equal the recorded
//! stay/break decision on every pair. Slots not reachable from the output
//! are dead code, which is how a stage can use fewer components than it
//! declares.
//!
//! The document is satisfiable exactly when some guard over the stage's
//! operators (within the instance bounds) matches every pair, so a solver
//! subprocess and the built-in enumerative search must agree stage by stage.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::collect::{ColTy, PairSet};
use crate::interp::PairVal;

use super::term::{Op, Term, OP_ORDER};

#[derive(Debug, Clone)]
pub struct Layout {
    pub n_inputs: usize,
    /// Operator of each slot, in slot order.
    pub slots: Vec<Op>,
}

impl Layout {
    pub fn position_range(&self) -> std::ops::Range<usize> {
        self.n_inputs..self.n_inputs + self.slots.len()
    }
}

#[derive(Debug, Clone)]
pub struct Encoding {
    pub text: String,
    pub layout: Layout,
    /// Variables the solver is asked to evaluate, in emission order.
    pub query_vars: Vec<String>,
}

fn int_lit(n: i64) -> String {
    if n < 0 {
        format!("(- {})", -(n as i128))
    } else {
        n.to_string()
    }
}

fn val_lit(v: &PairVal) -> String {
    match v {
        PairVal::Int(n) => int_lit(*n),
        PairVal::Bool(b) => b.to_string(),
    }
}

fn operand_sort(op: Op, k: usize) -> &'static str {
    if op.operand_is_bool(k) {
        "Bool"
    } else {
        "Int"
    }
}

fn result_sort(op: Op) -> &'static str {
    if op.returns_bool() {
        "Bool"
    } else {
        "Int"
    }
}

fn semantics(op: Op, v: &[String]) -> String {
    match op {
        Op::Gt => format!("(> {} {})", v[0], v[1]),
        Op::Ge => format!("(>= {} {})", v[0], v[1]),
        Op::Eq => format!("(= {} {})", v[0], v[1]),
        Op::Ne => format!("(not (= {} {}))", v[0], v[1]),
        Op::Not => format!("(not {})", v[0]),
        Op::Or => format!("(or {} {})", v[0], v[1]),
        Op::And => format!("(and {} {})", v[0], v[1]),
        Op::Add => format!("(+ {} {})", v[0], v[1]),
        Op::Sub => format!("(- {} {})", v[0], v[1]),
        Op::Mul => format!("(* {} {})", v[0], v[1]),
        Op::Ite => format!("(ite {} {} {})", v[0], v[1], v[2]),
    }
}

/// Builds the stage's SMT-LIB2 document. Satisfiable ⇔ the stage can express
/// a guard consistent with every pair.
pub fn encode(set: &PairSet, stage: u32, multiplicity: u8) -> Encoding {
    let slots: Vec<Op> = OP_ORDER
        .iter()
        .copied()
        .filter(|op| op.stage() <= stage)
        .flat_map(|op| std::iter::repeat(op).take(multiplicity as usize))
        .collect();
    let layout = Layout { n_inputs: set.columns.len(), slots };
    let n_inputs = layout.n_inputs;
    let n_lines = n_inputs + layout.slots.len();
    let n_pairs = set.pairs.len();

    let mut s = String::new();
    let logic = if layout.slots.contains(&Op::Mul) { "QF_NIA" } else { "QF_LIA" };
    let _ = writeln!(s, "(set-logic {logic})");
    let _ = writeln!(s, "(set-option :produce-models true)");
    let _ = writeln!(s, "; guard synthesis: stage {stage}, {} slots, {} inputs, {} pairs",
        layout.slots.len(), n_inputs, n_pairs);

    // schema comment so the document reads standalone
    for (i, col) in set.columns.iter().enumerate() {
        let _ = writeln!(s, "; line {i}: input {} : {}", col.name, col.ty);
    }

    let mut query_vars = vec!["o".to_string()];
    let _ = writeln!(s, "(declare-const o Int)");
    for (c, op) in layout.slots.iter().enumerate() {
        let _ = writeln!(s, "; slot {c}: {op:?}");
        let _ = writeln!(s, "(declare-const p{c} Int)");
        query_vars.push(format!("p{c}"));
        for k in 0..op.arity() {
            let _ = writeln!(s, "(declare-const l{c}_{k} Int)");
            query_vars.push(format!("l{c}_{k}"));
            for t in 0..n_pairs {
                let _ = writeln!(s, "(declare-const v{c}_{k}_{t} {})", operand_sort(*op, k));
            }
        }
        for t in 0..n_pairs {
            let _ = writeln!(s, "(declare-const r{c}_{t} {})", result_sort(*op));
        }
    }

    // positions: in range and pairwise distinct
    for c in 0..layout.slots.len() {
        let _ = writeln!(s, "(assert (and (>= p{c} {n_inputs}) (< p{c} {n_lines})))");
    }
    if layout.slots.len() > 1 {
        let ps: Vec<String> = (0..layout.slots.len()).map(|c| format!("p{c}")).collect();
        let _ = writeln!(s, "(assert (distinct {}))", ps.join(" "));
    }

    // typed line inventory
    let input_lines_of = |want: ColTy| -> Vec<usize> {
        set.columns
            .iter()
            .enumerate()
            .filter(|(_, col)| col.ty == want)
            .map(|(i, _)| i)
            .collect()
    };
    let slot_produces = |want: ColTy, c: usize| -> bool {
        (layout.slots[c].returns_bool() && want == ColTy::Bool)
            || (!layout.slots[c].returns_bool() && want == ColTy::Int)
    };

    // operand wiring
    for (c, op) in layout.slots.iter().enumerate() {
        for k in 0..op.arity() {
            let want = if op.operand_is_bool(k) { ColTy::Bool } else { ColTy::Int };
            let mut choices: Vec<String> = Vec::new();
            for i in input_lines_of(want) {
                choices.push(format!("(= l{c}_{k} {i})"));
            }
            for d in 0..layout.slots.len() {
                if d != c && slot_produces(want, d) {
                    choices.push(format!("(= l{c}_{k} p{d})"));
                }
            }
            match choices.len() {
                0 => {
                    let _ = writeln!(s, "(assert false) ; slot {c} operand {k}: no {want} line");
                }
                1 => {
                    let _ = writeln!(s, "(assert {})", choices[0]);
                }
                _ => {
                    let _ = writeln!(s, "(assert (or {}))", choices.join(" "));
                }
            }
            let _ = writeln!(s, "(assert (< l{c}_{k} p{c}))");
            for i in input_lines_of(want) {
                let eqs: Vec<String> = (0..n_pairs)
                    .map(|t| format!("(= v{c}_{k}_{t} {})", val_lit(&set.pairs[t].0[i])))
                    .collect();
                let _ = writeln!(
                    s,
                    "(assert (=> (= l{c}_{k} {i}) (and {})))",
                    eqs.join(" ")
                );
            }
            for d in 0..layout.slots.len() {
                if d != c && slot_produces(want, d) {
                    let eqs: Vec<String> = (0..n_pairs)
                        .map(|t| format!("(= v{c}_{k}_{t} r{d}_{t})"))
                        .collect();
                    let _ = writeln!(
                        s,
                        "(assert (=> (= l{c}_{k} p{d}) (and {})))",
                        eqs.join(" ")
                    );
                }
            }
        }
        // slot semantics per pair
        for t in 0..n_pairs {
            let vs: Vec<String> =
                (0..op.arity()).map(|k| format!("v{c}_{k}_{t}")).collect();
            let _ = writeln!(s, "(assert (= r{c}_{t} {}))", semantics(*op, &vs));
        }
    }

    // output line: boolean-typed, matches the decision on every pair
    let mut out_choices: Vec<String> = Vec::new();
    for i in input_lines_of(ColTy::Bool) {
        out_choices.push(format!("(= o {i})"));
    }
    for c in 0..layout.slots.len() {
        if slot_produces(ColTy::Bool, c) {
            out_choices.push(format!("(= o p{c})"));
        }
    }
    match out_choices.len() {
        0 => {
            let _ = writeln!(s, "(assert false) ; no boolean line can be the guard");
        }
        1 => {
            let _ = writeln!(s, "(assert {})", out_choices[0]);
        }
        _ => {
            let _ = writeln!(s, "(assert (or {}))", out_choices.join(" "));
        }
    }
    for i in input_lines_of(ColTy::Bool) {
        let eqs: Vec<String> = (0..n_pairs)
            .map(|t| {
                format!("(= {} {})", val_lit(&set.pairs[t].0[i]), set.pairs[t].1)
            })
            .collect();
        let _ = writeln!(s, "(assert (=> (= o {i}) (and {})))", eqs.join(" "));
    }
    for c in 0..layout.slots.len() {
        if slot_produces(ColTy::Bool, c) {
            let eqs: Vec<String> = (0..n_pairs)
                .map(|t| format!("(= r{c}_{t} {})", set.pairs[t].1))
                .collect();
            let _ = writeln!(s, "(assert (=> (= o p{c}) (and {})))", eqs.join(" "));
        }
    }

    let _ = writeln!(s, "(check-sat)");
    let _ = writeln!(s, "(get-value ({}))", query_vars.join(" "));

    Encoding { text: s, layout, query_vars }
}

/// A value read back from the solver model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelVal {
    Int(i64),
    Bool(bool),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("model is missing `{0}`")]
    Missing(String),
    #[error("model value for `{0}` has the wrong sort")]
    WrongSort(String),
    #[error("output line {0} is out of range")]
    LineOutOfRange(i64),
    #[error("no slot occupies position {0}")]
    NoSlotAt(i64),
    #[error("dataflow is cyclic at position {0}")]
    Cyclic(i64),
}

/// Rebuilds the guard term from a satisfying model by walking the dataflow
/// from the output line; dead slots never appear in the result.
pub fn decode_model(
    layout: &Layout,
    model: &HashMap<String, ModelVal>,
) -> Result<Term, ModelError> {
    let int_of = |name: &str| -> Result<i64, ModelError> {
        match model.get(name) {
            Some(ModelVal::Int(n)) => Ok(*n),
            Some(ModelVal::Bool(_)) => Err(ModelError::WrongSort(name.to_string())),
            None => Err(ModelError::Missing(name.to_string())),
        }
    };

    let mut pos_to_slot: HashMap<i64, usize> = HashMap::new();
    for c in 0..layout.slots.len() {
        pos_to_slot.insert(int_of(&format!("p{c}"))?, c);
    }

    fn build(
        line: i64,
        layout: &Layout,
        pos_to_slot: &HashMap<i64, usize>,
        int_of: &dyn Fn(&str) -> Result<i64, ModelError>,
        depth: usize,
    ) -> Result<Term, ModelError> {
        if depth > layout.slots.len() {
            return Err(ModelError::Cyclic(line));
        }
        if line < 0 || line as usize >= layout.n_inputs + layout.slots.len() {
            return Err(ModelError::LineOutOfRange(line));
        }
        if (line as usize) < layout.n_inputs {
            return Ok(Term::Input(line as usize));
        }
        let c = *pos_to_slot.get(&line).ok_or(ModelError::NoSlotAt(line))?;
        let op = layout.slots[c];
        let mut args = Vec::with_capacity(op.arity());
        for k in 0..op.arity() {
            let operand_line = int_of(&format!("l{c}_{k}"))?;
            args.push(build(operand_line, layout, pos_to_slot, int_of, depth + 1)?);
        }
        Ok(Term::apply(op, args))
    }

    let o = int_of("o")?;
    build(o, layout, &pos_to_slot, &int_of, 0)
}
