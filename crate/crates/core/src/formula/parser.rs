//! Recursive-descent parser.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | power
//! power  := atom ('^' factor)?
//! atom   := number | ident | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` binds tighter than unary minus and is right-associative, so
//! `-x^2` is `-(x^2)` and `a^b^c` is `a^(b^c)`.

use super::expr::{Expr, Func};
use super::FormulaError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("identifier '{s}'"),
        Tok::Plus => "'+'".into(),
        Tok::Minus => "'-'".into(),
        Tok::Star => "'*'".into(),
        Tok::Slash => "'/'".into(),
        Tok::Caret => "'^'".into(),
        Tok::LParen => "'('".into(),
        Tok::RParen => "')'".into(),
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, FormulaError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            c if c.is_ascii_digit() || c == '.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let lit = &text[start..i];
                let v: f64 = lit.parse().map_err(|_| FormulaError::Syntax {
                    position: start,
                    message: format!("malformed number '{lit}'"),
                })?;
                out.push((Tok::Num(v), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(text[start..i].to_string()), start));
                continue;
            }
            other => {
                return Err(FormulaError::Syntax {
                    position: start,
                    message: format!("unexpected character '{other}'"),
                })
            }
        };
        out.push((tok, start));
        i += 1;
    }
    Ok(out)
}

/// Parse output before symbol resolution: identifiers are still names.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Raw {
    Num(f64),
    Ident(String),
    Neg(Box<Raw>),
    Bin(char, Box<Raw>, Box<Raw>),
    Call(Func, Box<Raw>),
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |t| t.1)
    }

    fn unexpected(&self, wanted: &str) -> FormulaError {
        let found = self.peek().map_or_else(|| "end of input".to_string(), describe);
        FormulaError::Syntax { position: self.here(), message: format!("expected {wanted}, found {found}") }
    }

    fn expr(&mut self) -> Result<Raw, FormulaError> {
        let mut lhs = self.term()?;
        while let Some(op) = self.peek() {
            let op = match op {
                Tok::Plus => '+',
                Tok::Minus => '-',
                _ => break,
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Raw::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Raw, FormulaError> {
        let mut lhs = self.factor()?;
        while let Some(op) = self.peek() {
            let op = match op {
                Tok::Star => '*',
                Tok::Slash => '/',
                _ => break,
            };
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = Raw::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Raw, FormulaError> {
        if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            return Ok(Raw::Neg(Box::new(self.factor()?)));
        }
        let base = self.atom()?;
        if self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            let exponent = self.factor()?;
            return Ok(Raw::Bin('^', Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Raw, FormulaError> {
        let at = self.here();
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Raw::Num(v))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if self.peek() == Some(&Tok::LParen) {
                    let func = Func::from_name(&name)
                        .ok_or(FormulaError::UnknownFunction { name: name.clone(), position: at })?;
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    Ok(Raw::Call(func, Box::new(arg)))
                } else {
                    Ok(Raw::Ident(name))
                }
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            _ => Err(self.unexpected("a number, name, function call or '('")),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), FormulaError> {
        if self.peek() == Some(&Tok::RParen) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.unexpected("')'"))
        }
    }
}

pub(crate) fn parse_raw(text: &str) -> Result<Raw, FormulaError> {
    let toks = lex(text)?;
    if toks.is_empty() {
        return Err(FormulaError::Syntax { position: 0, message: "empty formula".into() });
    }
    let mut p = Parser { toks, pos: 0, end: text.len() };
    let raw = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(p.unexpected("an operator or end of input"));
    }
    Ok(raw)
}

impl Raw {
    pub(crate) fn visit_idents<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Raw::Num(_) => {}
            Raw::Ident(s) => out.push(s),
            Raw::Neg(a) | Raw::Call(_, a) => a.visit_idents(out),
            Raw::Bin(_, a, b) => {
                a.visit_idents(out);
                b.visit_idents(out);
            }
        }
    }

    pub(crate) fn resolve(&self, params: &[String], covars: &[String]) -> Expr {
        let lookup = |names: &[String], s: &str| names.iter().position(|n| n == s);
        match self {
            Raw::Num(v) => Expr::Const(*v),
            Raw::Ident(s) => match lookup(params, s) {
                Some(i) => Expr::Param(i),
                None => Expr::Covar(lookup(covars, s).expect("covariate table built from the same tree")),
            },
            Raw::Neg(a) => Expr::Neg(Box::new(a.resolve(params, covars))),
            Raw::Call(f, a) => Expr::Call(*f, Box::new(a.resolve(params, covars))),
            Raw::Bin(op, a, b) => {
                let (a, b) = (Box::new(a.resolve(params, covars)), Box::new(b.resolve(params, covars)));
                match op {
                    '+' => Expr::Add(a, b),
                    '-' => Expr::Sub(a, b),
                    '*' => Expr::Mul(a, b),
                    '/' => Expr::Div(a, b),
                    '^' => Expr::Pow(a, b),
                    _ => unreachable!("parser only emits + - * / ^"),
                }
            }
        }
    }
}
