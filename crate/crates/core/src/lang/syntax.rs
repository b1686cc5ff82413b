//! Line-level syntax for MiniLang.
//!
//! Every source line holds exactly one statement, so parsing happens in two
//! stages: [`parse_line`] classifies and parses a single line in isolation,
//! and the block builder in [`super::program`] checks that openers and
//! closers balance. Expression parsing records the byte span of every binary
//! operator, literal and variable use so fix templates can splice edits into
//! the original text without re-rendering it.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

/// Binary operators, in their conventional precedence classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpClass {
    Arithmetic,
    Relational,
    Logical,
}

impl BinOp {
    pub const ARITHMETIC: [BinOp; 5] = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Rem];
    pub const RELATIONAL: [BinOp; 6] = [BinOp::Lt, BinOp::Le, BinOp::Gt, BinOp::Ge, BinOp::Eq, BinOp::Ne];

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    pub fn class(self) -> OpClass {
        match self {
            BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Rem => OpClass::Arithmetic,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne => OpClass::Relational,
            BinOp::And | BinOp::Or => OpClass::Logical,
        }
    }

    fn binding_power(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 6,
        }
    }
}

impl fmt::Display for BinOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Lit(i64),
    Var(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    /// Variables read by the expression, in textual order, with repeats.
    pub fn variables(&self, out: &mut Vec<String>) {
        match self {
            Expr::Lit(_) => {}
            Expr::Var(v) => out.push(v.clone()),
            Expr::Unary(_, e) => e.variables(out),
            Expr::Binary(_, l, r) => {
                l.variables(out);
                r.variables(out);
            }
        }
    }
}

/// Byte-span sites inside one line, collected while parsing its expression.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExprSites {
    pub operators: Vec<(Range<usize>, BinOp)>,
    pub literals: Vec<(Range<usize>, i64)>,
    pub variables: Vec<(Range<usize>, String)>,
    /// Variables that appear as the right operand of `/` or `%`.
    pub divisors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LineSyntax {
    Blank,
    Comment,
    Close,
    Else,
    If { cond: Expr, cond_span: Range<usize> },
    While { cond: Expr, cond_span: Range<usize> },
    Assign { target: String, value: Expr },
    Print { value: Expr },
    Observe { var: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedLine {
    pub syntax: LineSyntax,
    pub sites: ExprSites,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Int(i64),
    Ident(String),
    If,
    Else,
    While,
    Print,
    Observe,
    Op(BinOp),
    Minus,
    Bang,
    Assign,
    LParen,
    RParen,
    LBrace,
    RBrace,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    span: Range<usize>,
}

fn is_ident_start(c: u8) -> bool {
    c.is_ascii_alphabetic() || c == b'_'
}

fn is_ident_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_'
}

fn lex(text: &str) -> Result<Vec<Token>, String> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && is_ident_char(bytes[i]) {
                return Err(format!("malformed number at column {}", start + 1));
            }
            let value: i64 =
                text[start..i].parse().map_err(|_| format!("integer literal `{}` out of range", &text[start..i]))?;
            out.push(Token { tok: Tok::Int(value), span: start..i });
            continue;
        }
        if is_ident_start(c) {
            while i < bytes.len() && is_ident_char(bytes[i]) {
                i += 1;
            }
            let word = &text[start..i];
            let tok = match word {
                "if" => Tok::If,
                "else" => Tok::Else,
                "while" => Tok::While,
                "print" => Tok::Print,
                "observe" => Tok::Observe,
                _ => Tok::Ident(word.to_string()),
            };
            out.push(Token { tok, span: start..i });
            continue;
        }
        let next = bytes.get(i + 1).copied();
        let (tok, len) = match (c, next) {
            (b'<', Some(b'=')) => (Tok::Op(BinOp::Le), 2),
            (b'>', Some(b'=')) => (Tok::Op(BinOp::Ge), 2),
            (b'=', Some(b'=')) => (Tok::Op(BinOp::Eq), 2),
            (b'!', Some(b'=')) => (Tok::Op(BinOp::Ne), 2),
            (b'&', Some(b'&')) => (Tok::Op(BinOp::And), 2),
            (b'|', Some(b'|')) => (Tok::Op(BinOp::Or), 2),
            (b'<', _) => (Tok::Op(BinOp::Lt), 1),
            (b'>', _) => (Tok::Op(BinOp::Gt), 1),
            (b'+', _) => (Tok::Op(BinOp::Add), 1),
            (b'-', _) => (Tok::Minus, 1),
            (b'*', _) => (Tok::Op(BinOp::Mul), 1),
            (b'/', _) => (Tok::Op(BinOp::Div), 1),
            (b'%', _) => (Tok::Op(BinOp::Rem), 1),
            (b'!', _) => (Tok::Bang, 1),
            (b'=', _) => (Tok::Assign, 1),
            (b'(', _) => (Tok::LParen, 1),
            (b')', _) => (Tok::RParen, 1),
            (b'{', _) => (Tok::LBrace, 1),
            (b'}', _) => (Tok::RBrace, 1),
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(format!("unexpected character `{ch}` at column {}", i + 1));
            }
        };
        out.push(Token { tok, span: start..start + len });
        i += len;
    }
    Ok(out)
}

struct ExprParser<'t> {
    toks: &'t [Token],
    pos: usize,
    sites: ExprSites,
}

impl<'t> ExprParser<'t> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_binop(&self) -> Option<(BinOp, Range<usize>)> {
        let t = self.toks.get(self.pos)?;
        match t.tok {
            Tok::Op(op) => Some((op, t.span.clone())),
            Tok::Minus => Some((BinOp::Sub, t.span.clone())),
            _ => None,
        }
    }

    fn expr(&mut self, min_bp: u8) -> Result<Expr, String> {
        let mut lhs = self.unary()?;
        while let Some((op, span)) = self.peek_binop() {
            let bp = op.binding_power();
            if bp < min_bp {
                break;
            }
            self.pos += 1;
            self.sites.operators.push((span, op));
            let rhs = self.expr(bp + 1)?;
            if matches!(op, BinOp::Div | BinOp::Rem) {
                let mut vars = Vec::new();
                rhs.variables(&mut vars);
                self.sites.divisors.extend(vars);
            }
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, String> {
        let Some(t) = self.toks.get(self.pos) else {
            return Err("expression ends unexpectedly".into());
        };
        let span = t.span.clone();
        match &t.tok {
            Tok::Minus => {
                self.pos += 1;
                Ok(Expr::Unary(UnOp::Neg, Box::new(self.unary()?)))
            }
            Tok::Bang => {
                self.pos += 1;
                Ok(Expr::Unary(UnOp::Not, Box::new(self.unary()?)))
            }
            Tok::Int(v) => {
                let v = *v;
                self.pos += 1;
                self.sites.literals.push((span, v));
                Ok(Expr::Lit(v))
            }
            Tok::Ident(name) => {
                let name = name.clone();
                self.pos += 1;
                self.sites.variables.push((span, name.clone()));
                Ok(Expr::Var(name))
            }
            Tok::LParen => {
                self.pos += 1;
                let inner = self.expr(0)?;
                if self.peek() != Some(&Tok::RParen) {
                    return Err("missing `)`".into());
                }
                self.pos += 1;
                Ok(inner)
            }
            other => Err(format!("unexpected token {other:?} in expression")),
        }
    }
}

/// Parses `toks` as one complete expression.
fn parse_expr(toks: &[Token]) -> Result<(Expr, ExprSites), String> {
    if toks.is_empty() {
        return Err("missing expression".into());
    }
    let mut p = ExprParser { toks, pos: 0, sites: ExprSites::default() };
    let e = p.expr(0)?;
    if p.pos != toks.len() {
        return Err(format!("trailing tokens after expression: {:?}", toks[p.pos].tok));
    }
    Ok((e, p.sites))
}

/// Parses a single MiniLang source line.
pub fn parse_line(text: &str) -> Result<ParsedLine, String> {
    let trimmed = text.trim_start();
    if trimmed.is_empty() {
        return Ok(ParsedLine { syntax: LineSyntax::Blank, sites: ExprSites::default() });
    }
    if trimmed.starts_with('#') {
        return Ok(ParsedLine { syntax: LineSyntax::Comment, sites: ExprSites::default() });
    }
    let toks = lex(text)?;
    let plain = |syntax| Ok(ParsedLine { syntax, sites: ExprSites::default() });
    match toks.as_slice() {
        [Token { tok: Tok::RBrace, .. }] => plain(LineSyntax::Close),
        [Token { tok: Tok::RBrace, .. }, Token { tok: Tok::Else, .. }, Token { tok: Tok::LBrace, .. }] => {
            plain(LineSyntax::Else)
        }
        [Token { tok: Tok::If | Tok::While, .. }, inner @ .., Token { tok: Tok::LBrace, .. }] => {
            let (cond, sites) = parse_expr(inner)?;
            let cond_span = inner[0].span.start..inner[inner.len() - 1].span.end;
            let syntax = if toks[0].tok == Tok::If {
                LineSyntax::If { cond, cond_span }
            } else {
                LineSyntax::While { cond, cond_span }
            };
            Ok(ParsedLine { syntax, sites })
        }
        [Token { tok: Tok::If | Tok::While, .. }, ..] => Err("block opener must end with `{`".into()),
        [Token { tok: Tok::Print, .. }, rest @ ..] => {
            let (value, sites) = parse_expr(rest)?;
            Ok(ParsedLine { syntax: LineSyntax::Print { value }, sites })
        }
        [Token { tok: Tok::Observe, .. }, Token { tok: Tok::Ident(var), .. }] => {
            plain(LineSyntax::Observe { var: var.clone() })
        }
        [Token { tok: Tok::Observe, .. }, ..] => Err("`observe` takes a single identifier".into()),
        [Token { tok: Tok::Ident(target), .. }, Token { tok: Tok::Assign, .. }, rest @ ..] => {
            let (value, sites) = parse_expr(rest)?;
            Ok(ParsedLine { syntax: LineSyntax::Assign { target: target.clone(), value }, sites })
        }
        _ => Err("unrecognised statement".into()),
    }
}
