//! The `.lp` mini-language: syntax tree, lexer, parser, static checks and
//! printing. See `docs/language.md` at the repository root for the grammar.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod pretty;
pub mod typeck;

pub use ast::*;
pub use parser::{parse_expr_text, parse_program};
pub use pretty::{expr_to_string, program_to_string};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LangError {
    #[error("lex error at {line}:{col}: {msg}")]
    Lex { line: usize, col: usize, msg: String },
    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("type error at {line}:{col}: {msg}")]
    Type { line: usize, col: usize, msg: String },
}

/// Parses and typechecks in one step; most callers want both.
pub fn load_program(src: &str) -> Result<ast::Program, LangError> {
    let program = parse_program(src)?;
    typeck::check(&program, src)?;
    Ok(program)
}
