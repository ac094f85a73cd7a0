//! External SMT solver subprocess driver.
//!
//! The configured command gets the path of a temp file holding the SMT-LIB2
//! document as its final argument (the convention both z3 and cvc5 accept,
//! e.g. `z3 -smt2 FILE` or `cvc5 --lang smt2 FILE`). stdout is expected to
//! start with `sat`/`unsat`, followed on `sat` by the `(get-value …)` answer:
//! an s-expression list of `(name value)` entries.

use std::collections::HashMap;
use std::io::Write as _;
use std::process::Command;
use std::sync::atomic::{AtomicU64, Ordering};

use super::smtlib::ModelVal;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverCmd {
    /// Program plus leading arguments; the SMT file path is appended.
    pub command: Vec<String>,
}

impl SolverCmd {
    /// Splits a command line on whitespace (no quoting — solver invocations
    /// don't need it).
    pub fn parse(text: &str) -> Option<SolverCmd> {
        let command: Vec<String> = text.split_whitespace().map(str::to_string).collect();
        if command.is_empty() {
            None
        } else {
            Some(SolverCmd { command })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolverVerdict {
    Sat(HashMap<String, ModelVal>),
    Unsat,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SolverError {
    #[error("could not launch solver `{command}`: {message}")]
    Launch { command: String, message: String },
    #[error("could not stage SMT input file: {0}")]
    TempFile(String),
    #[error("solver answered `unknown`")]
    Unknown,
    #[error("unparseable solver output: {0}")]
    BadOutput(String),
    #[error("solver failed (exit {code:?}): {stderr}")]
    Failed { code: Option<i32>, stderr: String },
}

static FILE_SEQ: AtomicU64 = AtomicU64::new(0);

pub fn run_solver(cmd: &SolverCmd, smt_text: &str) -> Result<SolverVerdict, SolverError> {
    let seq = FILE_SEQ.fetch_add(1, Ordering::Relaxed);
    let path = std::env::temp_dir().join(format!(
        "loopfix-{}-{}.smt2",
        std::process::id(),
        seq
    ));
    let stage = |e: std::io::Error| SolverError::TempFile(e.to_string());
    {
        let mut f = std::fs::File::create(&path).map_err(stage)?;
        f.write_all(smt_text.as_bytes()).map_err(stage)?;
    }

    let output = Command::new(&cmd.command[0])
        .args(&cmd.command[1..])
        .arg(&path)
        .output();
    let _ = std::fs::remove_file(&path);
    let output = output.map_err(|e| SolverError::Launch {
        command: cmd.command.join(" "),
        message: e.to_string(),
    })?;

    let stdout = String::from_utf8_lossy(&output.stdout);
    let mut rest = stdout.trim_start();
    if rest.strip_prefix("unsat").is_some() {
        return Ok(SolverVerdict::Unsat);
    }
    if rest.strip_prefix("unknown").is_some() {
        return Err(SolverError::Unknown);
    }
    if let Some(r) = rest.strip_prefix("sat") {
        rest = r;
        let model = parse_model(rest)?;
        return Ok(SolverVerdict::Sat(model));
    }
    if !output.status.success() {
        return Err(SolverError::Failed {
            code: output.status.code(),
            stderr: String::from_utf8_lossy(&output.stderr).into_owned(),
        });
    }
    Err(SolverError::BadOutput(stdout.trim().chars().take(200).collect()))
}

// --- s-expression model parsing -------------------------------------------

#[derive(Debug, PartialEq)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        match ch {
            '(' | ')' => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(ch.to_string());
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn parse_sexp(tokens: &[String], at: &mut usize) -> Result<Sexp, SolverError> {
    let bad = |msg: &str| SolverError::BadOutput(msg.to_string());
    match tokens.get(*at) {
        None => Err(bad("unexpected end of model")),
        Some(t) if t == "(" => {
            *at += 1;
            let mut items = Vec::new();
            loop {
                match tokens.get(*at) {
                    None => return Err(bad("unclosed paren in model")),
                    Some(t) if t == ")" => {
                        *at += 1;
                        return Ok(Sexp::List(items));
                    }
                    _ => items.push(parse_sexp(tokens, at)?),
                }
            }
        }
        Some(t) if t == ")" => Err(bad("unexpected `)` in model")),
        Some(t) => {
            let atom = Sexp::Atom(t.clone());
            *at += 1;
            Ok(atom)
        }
    }
}

fn model_value(sexp: &Sexp) -> Result<ModelVal, SolverError> {
    let bad = |msg: String| SolverError::BadOutput(msg);
    match sexp {
        Sexp::Atom(a) => match a.as_str() {
            "true" => Ok(ModelVal::Bool(true)),
            "false" => Ok(ModelVal::Bool(false)),
            n => n
                .parse::<i64>()
                .map(ModelVal::Int)
                .map_err(|_| bad(format!("unrecognized model value `{n}`"))),
        },
        // negative integers print as (- 5)
        Sexp::List(items) => match items.as_slice() {
            [Sexp::Atom(minus), Sexp::Atom(n)] if minus == "-" => n
                .parse::<i64>()
                .map(|v| ModelVal::Int(-v))
                .map_err(|_| bad(format!("unrecognized model value `(- {n})`"))),
            _ => Err(bad("unrecognized compound model value".into())),
        },
    }
}

fn parse_model(text: &str) -> Result<HashMap<String, ModelVal>, SolverError> {
    let tokens = tokenize(text);
    let mut at = 0;
    let top = parse_sexp(&tokens, &mut at)?;
    let Sexp::List(entries) = top else {
        return Err(SolverError::BadOutput("model is not a list".into()));
    };
    let mut out = HashMap::new();
    for entry in &entries {
        let Sexp::List(kv) = entry else {
            return Err(SolverError::BadOutput("model entry is not a pair".into()));
        };
        let [Sexp::Atom(name), value] = kv.as_slice() else {
            return Err(SolverError::BadOutput("model entry is not (name value)".into()));
        };
        out.insert(name.clone(), model_value(value)?);
    }
    Ok(out)
}
