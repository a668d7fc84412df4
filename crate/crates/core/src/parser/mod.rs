//! Parser for the ASCII CHR subset used by the union-find programs.
//!
//! ```text
//! program    = { rule } ;
//! rule       = [ ident "@" ] head ( "<=>" | "==>" ) [ guard "|" ] body "." ;
//! head       = conj [ "\" conj ] ;
//! conj       = constraint { "," constraint } ;
//! constraint = term "~>" term | ident [ "(" term { "," term } ")" ] ;
//! guard      = test { "," test } ;
//! test       = "true" | expr cmp expr ;
//! cmp        = ">=" | ">" | "=<" | "<" | "==" ;
//! body       = item { "," item } ;
//! item       = "true" | constraint | term "=" term | var "is" expr ;
//! expr       = primary { "+" primary } ;
//! primary    = int | var | ident | "max" "(" expr "," expr ")" | "(" expr ")" ;
//! term       = var | ident | int ;
//! query      = item { "," item } "." ;
//! ```
//!
//! `%` starts a comment that runs to the end of the line.

pub mod ast;
mod lexer;
mod pretty;
mod validate;

use std::collections::HashMap;

use thiserror::Error;

use ast::{Atom, BodyItem, Expr, GuardTest, Program, Rule, Term, Var};
use lexer::{Spanned, Tok};

pub use validate::{validate_program, Warning};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("unterminated clause: expected `.` before end of input")]
    Unterminated,
    #[error("rule head is empty")]
    EmptyHead,
    #[error("`{0}` is not a built-in test and cannot appear in a guard")]
    NonBuiltinInGuard(String),
    #[error("unknown operator `{0}`")]
    UnknownOperator(String),
    #[error("`{name}` used with arity {found}, but earlier with arity {expected}")]
    ArityMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("integer literal `{0}` out of range")]
    IntegerOverflow(String),
    #[error("`{0}` is reserved and cannot name a constraint")]
    Reserved(String),
    #[error("left side of `is` must be a variable")]
    IsTarget,
    #[error("simpagation heads are only allowed with `<=>`")]
    PropagationSimpagation,
    #[error("rule name `{0}` is used twice")]
    DuplicateRuleName(String),
    #[error("expected {expected}, found {found}")]
    Unexpected { expected: String, found: String },
}

const RESERVED: [&str; 3] = ["true", "is", "max"];

/// Parses a whole program. Rules keep their textual order.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let tokens = lexer::tokenize(text)?;
    let mut p = Parser::new(&tokens);
    let mut rules = Vec::new();
    let mut names: HashMap<String, ()> = HashMap::new();
    while !p.at(&Tok::Eof) {
        let start = p.pos;
        let rule = p.rule(rules.len())?;
        if let Some(name) = &rule.name {
            if names.insert(name.clone(), ()).is_some() {
                return Err(p.error_at(start, ParseErrorKind::DuplicateRuleName(name.clone())));
            }
        }
        rules.push(rule);
    }
    Ok(Program {
        rules,
        symbols: p.symbols,
    })
}

/// Parses a query: a comma-separated goal terminated by `.`. Variables are
/// shared by name across the whole query.
pub fn parse_query(text: &str) -> Result<Vec<BodyItem>, ParseError> {
    let tokens = lexer::tokenize(text)?;
    let mut p = Parser::new(&tokens);
    let items = p.body()?;
    p.expect_terminator()?;
    if !p.at(&Tok::Eof) {
        return Err(p.unexpected("end of input after the query"));
    }
    Ok(items)
}

struct Parser<'t> {
    tokens: &'t [Spanned],
    pos: usize,
    vars: HashMap<String, u32>,
    next_var: u32,
    symbols: Vec<(String, usize)>,
    arities: HashMap<String, usize>,
}

impl<'t> Parser<'t> {
    fn new(tokens: &'t [Spanned]) -> Self {
        Parser {
            tokens,
            pos: 0,
            vars: HashMap::new(),
            next_var: 0,
            symbols: Vec::new(),
            arities: HashMap::new(),
        }
    }

    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn at(&self, tok: &Tok) -> bool {
        self.peek() == tok
    }

    fn bump(&mut self) -> Tok {
        let tok = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn error_at(&self, pos: usize, kind: ParseErrorKind) -> ParseError {
        let t = &self.tokens[pos];
        ParseError {
            line: t.line,
            column: t.column,
            kind,
        }
    }

    fn error(&self, kind: ParseErrorKind) -> ParseError {
        self.error_at(self.pos, kind)
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        if self.at(&Tok::Eof) {
            return self.error(ParseErrorKind::Unterminated);
        }
        self.error(ParseErrorKind::Unexpected {
            expected: expected.to_string(),
            found: self.peek().describe(),
        })
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<(), ParseError> {
        if self.at(&tok) {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(expected))
        }
    }

    fn expect_terminator(&mut self) -> Result<(), ParseError> {
        self.expect(Tok::Dot, "`,` or `.`")
    }

    fn var(&mut self, name: String) -> Var {
        if name == "_" {
            let id = self.next_var;
            self.next_var += 1;
            return Var { id, name };
        }
        let next = &mut self.next_var;
        let id = *self.vars.entry(name.clone()).or_insert_with(|| {
            let id = *next;
            *next += 1;
            id
        });
        Var { id, name }
    }

    fn rule(&mut self, index: usize) -> Result<Rule, ParseError> {
        self.vars.clear();
        self.next_var = 0;

        let name = match (self.peek(), self.peek_at(1)) {
            (Tok::Ident(n), Tok::At) => {
                let n = n.clone();
                self.bump();
                self.bump();
                Some(n)
            }
            _ => None,
        };

        if matches!(self.peek(), Tok::Simplify | Tok::Propagate | Tok::Backslash) {
            return Err(self.error(ParseErrorKind::EmptyHead));
        }
        let first = self.conj()?;
        let second = if self.at(&Tok::Backslash) {
            self.bump();
            if matches!(self.peek(), Tok::Simplify | Tok::Propagate) {
                return Err(self.error(ParseErrorKind::EmptyHead));
            }
            Some(self.conj()?)
        } else {
            None
        };

        let arrow_pos = self.pos;
        let (kept, removed) = match (self.bump(), second) {
            (Tok::Simplify, None) => (Vec::new(), first),
            (Tok::Simplify, Some(removed)) => (first, removed),
            (Tok::Propagate, None) => (first, Vec::new()),
            (Tok::Propagate, Some(_)) => {
                return Err(self.error_at(arrow_pos, ParseErrorKind::PropagationSimpagation))
            }
            _ => {
                self.pos = arrow_pos;
                return Err(self.unexpected("`,`, `\\`, `<=>` or `==>`"));
            }
        };

        let guard = if self.has_guard() {
            let g = self.guard()?;
            self.expect(Tok::Bar, "`|`")?;
            g
        } else {
            Vec::new()
        };
        let body = self.body()?;
        self.expect_terminator()?;

        Ok(Rule {
            name,
            kept,
            removed,
            guard,
            body,
            source_index: index,
        })
    }

    /// Whether a `|` occurs before the rule's terminating `.`.
    fn has_guard(&self) -> bool {
        let mut depth = 0i32;
        for t in &self.tokens[self.pos..] {
            match t.tok {
                Tok::LParen => depth += 1,
                Tok::RParen => depth -= 1,
                Tok::Bar if depth == 0 => return true,
                Tok::Dot | Tok::Eof => return false,
                _ => {}
            }
        }
        false
    }

    fn conj(&mut self) -> Result<Vec<Atom>, ParseError> {
        let mut atoms = vec![self.constraint()?];
        while self.at(&Tok::Comma) {
            self.bump();
            atoms.push(self.constraint()?);
        }
        Ok(atoms)
    }

    fn record_symbol(&mut self, pos: usize, name: &str, arity: usize) -> Result<(), ParseError> {
        match self.arities.get(name) {
            Some(&expected) if expected != arity => Err(self.error_at(
                pos,
                ParseErrorKind::ArityMismatch {
                    name: name.to_string(),
                    expected,
                    found: arity,
                },
            )),
            Some(_) => Ok(()),
            None => {
                self.arities.insert(name.to_string(), arity);
                self.symbols.push((name.to_string(), arity));
                Ok(())
            }
        }
    }

    fn constraint(&mut self) -> Result<Atom, ParseError> {
        let start = self.pos;
        if let (Tok::Ident(name), next) = (self.peek(), self.peek_at(1)) {
            if *next != Tok::Arrow {
                let name = name.clone();
                if RESERVED.contains(&name.as_str()) {
                    return Err(self.error(ParseErrorKind::Reserved(name)));
                }
                self.bump();
                let args = if self.at(&Tok::LParen) {
                    self.bump();
                    let mut args = vec![self.term()?];
                    while self.at(&Tok::Comma) {
                        self.bump();
                        args.push(self.term()?);
                    }
                    self.expect(Tok::RParen, "`,` or `)`")?;
                    args
                } else {
                    Vec::new()
                };
                self.record_symbol(start, &name, args.len())?;
                return Ok(Atom { name, args });
            }
        }
        let left = self.term()?;
        self.expect(Tok::Arrow, "`~>`")?;
        let right = self.term()?;
        self.record_symbol(start, "~>", 2)?;
        Ok(Atom {
            name: "~>".into(),
            args: vec![left, right],
        })
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        match self.peek().clone() {
            Tok::Var(name) => {
                self.bump();
                Ok(Term::Var(self.var(name)))
            }
            Tok::Ident(name) => {
                if self.peek_at(1) == &Tok::LParen {
                    return Err(self.unexpected("a variable or constant (nested terms are not supported)"));
                }
                self.bump();
                Ok(Term::Const(name))
            }
            Tok::Int(i) => {
                self.bump();
                Ok(Term::Int(i))
            }
            _ => Err(self.unexpected("a variable or constant")),
        }
    }

    fn guard(&mut self) -> Result<Vec<GuardTest>, ParseError> {
        let mut tests = vec![self.test()?];
        while self.at(&Tok::Comma) {
            self.bump();
            tests.push(self.test()?);
        }
        Ok(tests)
    }

    fn test(&mut self) -> Result<GuardTest, ParseError> {
        if self.peek() == &Tok::Ident("true".into()) && matches!(self.peek_at(1), Tok::Comma | Tok::Bar) {
            self.bump();
            return Ok(GuardTest::True);
        }
        if let (Tok::Ident(name), next) = (self.peek(), self.peek_at(1)) {
            if name != "max" && matches!(next, Tok::LParen | Tok::Arrow | Tok::Comma | Tok::Bar) {
                return Err(self.error(ParseErrorKind::NonBuiltinInGuard(name.clone())));
            }
        }
        if matches!(self.peek_at(1), Tok::Arrow | Tok::Unify) {
            let found = if self.peek_at(1) == &Tok::Arrow { "~>" } else { "=" };
            return Err(self.error_at(self.pos + 1, ParseErrorKind::NonBuiltinInGuard(found.into())));
        }
        let left = self.expr()?;
        let op = match self.peek() {
            Tok::Cmp(op) => *op,
            _ => return Err(self.unexpected("a comparison (`>=`, `>`, `=<`, `<`, `==`)")),
        };
        self.bump();
        let right = self.expr()?;
        Ok(GuardTest::Compare(op, left, right))
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.primary()?;
        while self.at(&Tok::Plus) {
            self.bump();
            let right = self.primary()?;
            left = Expr::Add(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(Expr::Int(i))
            }
            Tok::Var(name) => {
                self.bump();
                Ok(Expr::Var(self.var(name)))
            }
            Tok::Ident(name) if name == "max" && self.peek_at(1) == &Tok::LParen => {
                self.bump();
                self.bump();
                let a = self.expr()?;
                self.expect(Tok::Comma, "`,`")?;
                let b = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(Expr::Max(Box::new(a), Box::new(b)))
            }
            Tok::Ident(name) => {
                if self.peek_at(1) == &Tok::LParen {
                    return Err(self.error(ParseErrorKind::UnknownOperator(format!("{name}/_"))));
                }
                self.bump();
                Ok(Expr::Const(name))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            _ => Err(self.unexpected("an expression")),
        }
    }

    fn body(&mut self) -> Result<Vec<BodyItem>, ParseError> {
        let mut items = vec![self.item()?];
        while self.at(&Tok::Comma) {
            self.bump();
            items.push(self.item()?);
        }
        Ok(items)
    }

    fn item(&mut self) -> Result<BodyItem, ParseError> {
        let (first, second) = (self.peek().clone(), self.peek_at(1).clone());
        match (&first, &second) {
            (Tok::Ident(t), Tok::Comma | Tok::Dot | Tok::Eof) if t == "true" => {
                self.bump();
                Ok(BodyItem::True)
            }
            (Tok::Var(_) | Tok::Int(_), Tok::Ident(is)) | (Tok::Ident(_), Tok::Ident(is)) if is == "is" => {
                let start = self.pos;
                let target = self.term()?;
                let Term::Var(v) = target else {
                    return Err(self.error_at(start, ParseErrorKind::IsTarget));
                };
                self.bump();
                Ok(BodyItem::Is(v, self.expr()?))
            }
            (_, Tok::Arrow) => Ok(BodyItem::Atom(self.constraint()?)),
            (Tok::Var(_) | Tok::Int(_) | Tok::Ident(_), Tok::Unify) => {
                let left = self.term()?;
                self.bump();
                let right = self.term()?;
                Ok(BodyItem::Unify(left, right))
            }
            (Tok::Ident(_), _) => Ok(BodyItem::Atom(self.constraint()?)),
            (_, Tok::Cmp(op)) => Err(self.error_at(self.pos + 1, ParseErrorKind::UnknownOperator(op.symbol().into()))),
            _ => Err(self.unexpected("a constraint, `=`, `is` or `true`")),
        }
    }
}
