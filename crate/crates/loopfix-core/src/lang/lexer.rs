//! Hand-rolled lexer. `//` comments run to end of line; whitespace is free.

use super::ast::Span;
use super::LangError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    // keywords
    Fn,
    Test,
    Var,
    While,
    If,
    Else,
    Break,
    Return,
    Assert,
    True,
    False,
    KwInt,
    KwBool,
    Len,
    // punctuation
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Colon,
    Arrow,
    Assign,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    AndAnd,
    OrOr,
    Bang,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(n) => format!("integer `{n}`"),
            Tok::Eof => "end of input".to_string(),
            other => format!("`{}`", other.text()),
        }
    }

    fn text(&self) -> &'static str {
        match self {
            Tok::Fn => "fn",
            Tok::Test => "test",
            Tok::Var => "var",
            Tok::While => "while",
            Tok::If => "if",
            Tok::Else => "else",
            Tok::Break => "break",
            Tok::Return => "return",
            Tok::Assert => "assert",
            Tok::True => "true",
            Tok::False => "false",
            Tok::KwInt => "int",
            Tok::KwBool => "bool",
            Tok::Len => "len",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Comma => ",",
            Tok::Semi => ";",
            Tok::Colon => ":",
            Tok::Arrow => "->",
            Tok::Assign => "=",
            Tok::EqEq => "==",
            Tok::NotEq => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::AndAnd => "&&",
            Tok::OrOr => "||",
            Tok::Bang => "!",
            Tok::Ident(_) | Tok::Int(_) | Tok::Eof => unreachable!(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

pub fn lex(src: &str) -> Result<Vec<Token>, LangError> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'/' && bytes.get(i + 1) == Some(&b'/') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        let tok = match c {
            b'(' => one(&mut i, Tok::LParen),
            b')' => one(&mut i, Tok::RParen),
            b'{' => one(&mut i, Tok::LBrace),
            b'}' => one(&mut i, Tok::RBrace),
            b'[' => one(&mut i, Tok::LBracket),
            b']' => one(&mut i, Tok::RBracket),
            b',' => one(&mut i, Tok::Comma),
            b';' => one(&mut i, Tok::Semi),
            b':' => one(&mut i, Tok::Colon),
            b'+' => one(&mut i, Tok::Plus),
            b'*' => one(&mut i, Tok::Star),
            b'-' => {
                if bytes.get(i + 1) == Some(&b'>') {
                    i += 2;
                    Tok::Arrow
                } else {
                    one(&mut i, Tok::Minus)
                }
            }
            b'=' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    i += 2;
                    Tok::EqEq
                } else {
                    one(&mut i, Tok::Assign)
                }
            }
            b'!' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    i += 2;
                    Tok::NotEq
                } else {
                    one(&mut i, Tok::Bang)
                }
            }
            b'<' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    i += 2;
                    Tok::Le
                } else {
                    one(&mut i, Tok::Lt)
                }
            }
            b'>' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    i += 2;
                    Tok::Ge
                } else {
                    one(&mut i, Tok::Gt)
                }
            }
            b'&' => {
                if bytes.get(i + 1) == Some(&b'&') {
                    i += 2;
                    Tok::AndAnd
                } else {
                    return Err(err(src, start, "expected `&&`"));
                }
            }
            b'|' => {
                if bytes.get(i + 1) == Some(&b'|') {
                    i += 2;
                    Tok::OrOr
                } else {
                    return Err(err(src, start, "expected `||`"));
                }
            }
            b'0'..=b'9' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let text = &src[start..i];
                let n: i64 = text
                    .parse()
                    .map_err(|_| err(src, start, "integer literal out of range"))?;
                Tok::Int(n)
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                keyword_or_ident(&src[start..i])
            }
            _ => {
                return Err(err(src, start, &format!("unexpected character `{}`", c as char)));
            }
        };
        toks.push(Token { tok, span: Span::new(start, i) });
    }
    toks.push(Token { tok: Tok::Eof, span: Span::new(bytes.len(), bytes.len()) });
    Ok(toks)
}

fn one(i: &mut usize, t: Tok) -> Tok {
    *i += 1;
    t
}

fn keyword_or_ident(text: &str) -> Tok {
    match text {
        "fn" => Tok::Fn,
        "test" => Tok::Test,
        "var" => Tok::Var,
        "while" => Tok::While,
        "if" => Tok::If,
        "else" => Tok::Else,
        "break" => Tok::Break,
        "return" => Tok::Return,
        "assert" => Tok::Assert,
        "true" => Tok::True,
        "false" => Tok::False,
        "int" => Tok::KwInt,
        "bool" => Tok::KwBool,
        "len" => Tok::Len,
        _ => Tok::Ident(text.to_string()),
    }
}

/// 1-based line/column of a byte offset, for error messages.
pub fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let mut line = 1;
    let mut col = 1;
    for (i, ch) in src.char_indices() {
        if i >= offset {
            break;
        }
        if ch == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    (line, col)
}

fn err(src: &str, offset: usize, msg: &str) -> LangError {
    let (line, col) = line_col(src, offset);
    LangError::Lex { line, col, msg: msg.to_string() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_operators_and_keywords() {
        let toks = lex("fn f() -> int { return 1 <= 2; } // trailing").unwrap();
        let kinds: Vec<Tok> = toks.into_iter().map(|t| t.tok).collect();
        assert_eq!(
            kinds,
            vec![
                Tok::Fn,
                Tok::Ident("f".into()),
                Tok::LParen,
                Tok::RParen,
                Tok::Arrow,
                Tok::KwInt,
                Tok::LBrace,
                Tok::Return,
                Tok::Int(1),
                Tok::Le,
                Tok::Int(2),
                Tok::Semi,
                Tok::RBrace,
                Tok::Eof,
            ]
        );
    }

    #[test]
    fn rejects_stray_ampersand_and_huge_literals() {
        assert!(lex("a & b").is_err());
        assert!(lex("99999999999999999999").is_err());
    }

    #[test]
    fn reports_line_and_column() {
        let e = lex("fn f() {\n  ?\n}").unwrap_err();
        match e {
            LangError::Lex { line, col, .. } => {
                assert_eq!((line, col), (2, 3));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }
}
