//! Recursive-descent parser producing the `ast` types.
//!
//! Precedence, loosest first: `||`, `&&`, `== !=`, `< <= > >=`, `+ -`, `*`,
//! unary `! -`, indexing, primaries. All binary operators associate left.

use super::ast::*;
use super::lexer::{lex, line_col, Tok, Token};
use super::LangError;

pub fn parse_program(src: &str) -> Result<Program, LangError> {
    let toks = lex(src)?;
    let mut p = Parser { src, toks, pos: 0 };
    let mut items = Vec::new();
    while p.peek() != &Tok::Eof {
        items.push(p.item()?);
    }
    Ok(Program { items })
}

/// Parses a standalone expression (used by pair-file decode entries).
pub fn parse_expr_text(src: &str) -> Result<Expr, LangError> {
    let toks = lex(src)?;
    let mut p = Parser { src, toks, pos: 0 };
    let e = p.expr()?;
    p.expect(Tok::Eof)?;
    Ok(e)
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Token>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: Tok) -> bool {
        if self.peek() == &tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<Token, LangError> {
        if self.peek() == &tok {
            Ok(self.bump())
        } else {
            Err(self.error(&format!(
                "expected {}, found {}",
                tok.describe(),
                self.peek().describe()
            )))
        }
    }

    fn ident(&mut self) -> Result<(String, Span), LangError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let span = self.peek_span();
                self.bump();
                Ok((name, span))
            }
            other => Err(self.error(&format!("expected identifier, found {}", other.describe()))),
        }
    }

    fn error(&self, msg: &str) -> LangError {
        let (line, col) = line_col(self.src, self.peek_span().start);
        LangError::Parse { line, col, msg: msg.to_string() }
    }

    fn item(&mut self) -> Result<Item, LangError> {
        match self.peek() {
            Tok::Fn => self.function().map(Item::Function),
            Tok::Test => self.test().map(Item::Test),
            other => Err(self.error(&format!(
                "expected `fn` or `test` at top level, found {}",
                other.describe()
            ))),
        }
    }

    fn function(&mut self) -> Result<FunctionDecl, LangError> {
        let start = self.expect(Tok::Fn)?.span;
        let (name, name_span) = self.ident()?;
        if name == "len" {
            let (line, col) = line_col(self.src, name_span.start);
            return Err(LangError::Parse {
                line,
                col,
                msg: "`len` is a builtin and cannot be redefined".to_string(),
            });
        }
        self.expect(Tok::LParen)?;
        let mut params = Vec::new();
        if self.peek() != &Tok::RParen {
            loop {
                let (pname, _) = self.ident()?;
                self.expect(Tok::Colon)?;
                let ty = self.ty()?;
                params.push(Param { name: pname, ty });
                if !self.eat(Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        let ret = if self.eat(Tok::Arrow) { Some(self.ty()?) } else { None };
        let body = self.block()?;
        let end = self.toks[self.pos.saturating_sub(1)].span;
        Ok(FunctionDecl { name, params, ret, body, span: start.cover(end) })
    }

    fn test(&mut self) -> Result<TestCase, LangError> {
        let start = self.expect(Tok::Test)?.span;
        let (name, _) = self.ident()?;
        let body = self.block()?;
        let end = self.toks[self.pos.saturating_sub(1)].span;
        Ok(TestCase { name, body, span: start.cover(end) })
    }

    fn ty(&mut self) -> Result<Type, LangError> {
        match self.peek() {
            Tok::KwInt => {
                self.bump();
                if self.eat(Tok::LBracket) {
                    self.expect(Tok::RBracket)?;
                    Ok(Type::IntArray)
                } else {
                    Ok(Type::Int)
                }
            }
            Tok::KwBool => {
                self.bump();
                Ok(Type::Bool)
            }
            other => Err(self.error(&format!("expected a type, found {}", other.describe()))),
        }
    }

    fn block(&mut self) -> Result<Block, LangError> {
        self.expect(Tok::LBrace)?;
        let mut stmts = Vec::new();
        while self.peek() != &Tok::RBrace {
            stmts.push(self.stmt()?);
        }
        self.expect(Tok::RBrace)?;
        Ok(stmts)
    }

    fn stmt(&mut self) -> Result<Stmt, LangError> {
        let start = self.peek_span();
        let node = match self.peek().clone() {
            Tok::Var => {
                self.bump();
                let (name, _) = self.ident()?;
                self.expect(Tok::Colon)?;
                let ty = self.ty()?;
                self.expect(Tok::Assign)?;
                let init = self.expr()?;
                self.expect(Tok::Semi)?;
                StmtKind::VarDecl { name, ty, init }
            }
            Tok::While => {
                self.bump();
                self.expect(Tok::LParen)?;
                let guard = self.expr()?;
                self.expect(Tok::RParen)?;
                let body = self.block()?;
                StmtKind::While(WhileLoop { guard, body, monitor: None })
            }
            Tok::If => {
                self.bump();
                self.expect(Tok::LParen)?;
                let cond = self.expr()?;
                self.expect(Tok::RParen)?;
                let then_branch = self.block()?;
                let else_branch =
                    if self.eat(Tok::Else) { Some(self.block()?) } else { None };
                StmtKind::If { cond, then_branch, else_branch }
            }
            Tok::Break => {
                self.bump();
                self.expect(Tok::Semi)?;
                StmtKind::Break
            }
            Tok::Return => {
                self.bump();
                let value = if self.peek() == &Tok::Semi { None } else { Some(self.expr()?) };
                self.expect(Tok::Semi)?;
                StmtKind::Return(value)
            }
            Tok::Assert => {
                self.bump();
                self.expect(Tok::LParen)?;
                let cond = self.expr()?;
                self.expect(Tok::RParen)?;
                self.expect(Tok::Semi)?;
                StmtKind::Assert(cond)
            }
            _ => {
                // assignment or call statement, both start with an expression
                let e = self.expr()?;
                if self.eat(Tok::Assign) {
                    let value = self.expr()?;
                    self.expect(Tok::Semi)?;
                    match e.node {
                        ExprKind::Var(name) => StmtKind::Assign { name, value },
                        ExprKind::Index(base, index) => match base.node {
                            ExprKind::Var(name) => {
                                StmtKind::AssignElem { name, index: *index, value }
                            }
                            _ => return Err(self.error("assignment target must be a variable or element")),
                        },
                        _ => return Err(self.error("assignment target must be a variable or element")),
                    }
                } else {
                    self.expect(Tok::Semi)?;
                    match &e.node {
                        ExprKind::Call(..) => StmtKind::CallStmt(e),
                        _ => return Err(self.error("only calls can be used as statements")),
                    }
                }
            }
        };
        let end = self.toks[self.pos.saturating_sub(1)].span;
        Ok(Spanned::new(node, start.cover(end)))
    }

    fn expr(&mut self) -> Result<Expr, LangError> {
        self.binary(0)
    }

    fn binary(&mut self, min_level: u8) -> Result<Expr, LangError> {
        let mut lhs = self.unary()?;
        loop {
            let (op, level) = match self.peek() {
                Tok::OrOr => (BinOp::Or, 1),
                Tok::AndAnd => (BinOp::And, 2),
                Tok::EqEq => (BinOp::Eq, 3),
                Tok::NotEq => (BinOp::Ne, 3),
                Tok::Lt => (BinOp::Lt, 4),
                Tok::Le => (BinOp::Le, 4),
                Tok::Gt => (BinOp::Gt, 4),
                Tok::Ge => (BinOp::Ge, 4),
                Tok::Plus => (BinOp::Add, 5),
                Tok::Minus => (BinOp::Sub, 5),
                Tok::Star => (BinOp::Mul, 6),
                _ => break,
            };
            if level < min_level {
                break;
            }
            self.bump();
            let rhs = self.binary(level + 1)?;
            let span = lhs.span.cover(rhs.span);
            lhs = Spanned::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, LangError> {
        let start = self.peek_span();
        match self.peek() {
            Tok::Bang => {
                self.bump();
                let e = self.unary()?;
                let span = start.cover(e.span);
                Ok(Spanned::new(ExprKind::Unary(UnOp::Not, Box::new(e)), span))
            }
            Tok::Minus => {
                self.bump();
                let e = self.unary()?;
                let span = start.cover(e.span);
                Ok(Spanned::new(ExprKind::Unary(UnOp::Neg, Box::new(e)), span))
            }
            _ => self.postfix(),
        }
    }

    fn postfix(&mut self) -> Result<Expr, LangError> {
        let mut e = self.primary()?;
        while self.peek() == &Tok::LBracket {
            self.bump();
            let idx = self.expr()?;
            let close = self.expect(Tok::RBracket)?;
            let span = e.span.cover(close.span);
            e = Spanned::new(ExprKind::Index(Box::new(e), Box::new(idx)), span);
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<Expr, LangError> {
        let start = self.peek_span();
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Spanned::new(ExprKind::IntLit(n), start))
            }
            Tok::True => {
                self.bump();
                Ok(Spanned::new(ExprKind::BoolLit(true), start))
            }
            Tok::False => {
                self.bump();
                Ok(Spanned::new(ExprKind::BoolLit(false), start))
            }
            Tok::Len => {
                self.bump();
                self.expect(Tok::LParen)?;
                let e = self.expr()?;
                let close = self.expect(Tok::RParen)?;
                Ok(Spanned::new(ExprKind::Len(Box::new(e)), start.cover(close.span)))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::LBracket => {
                self.bump();
                let mut elems = Vec::new();
                if self.peek() != &Tok::RBracket {
                    loop {
                        elems.push(self.expr()?);
                        if !self.eat(Tok::Comma) {
                            break;
                        }
                    }
                }
                let close = self.expect(Tok::RBracket)?;
                Ok(Spanned::new(ExprKind::ArrayLit(elems), start.cover(close.span)))
            }
            Tok::Ident(name) => {
                self.bump();
                if self.eat(Tok::LParen) {
                    let mut args = Vec::new();
                    if self.peek() != &Tok::RParen {
                        loop {
                            args.push(self.expr()?);
                            if !self.eat(Tok::Comma) {
                                break;
                            }
                        }
                    }
                    let close = self.expect(Tok::RParen)?;
                    Ok(Spanned::new(ExprKind::Call(name, args), start.cover(close.span)))
                } else {
                    Ok(Spanned::new(ExprKind::Var(name), start))
                }
            }
            other => Err(self.error(&format!("expected an expression, found {}", other.describe()))),
        }
    }
}
