use super::{ParseError, ParseErrorKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    /// Lower-case identifier: atom, constraint or rule name, or one of the
    /// reserved words `is`, `max`, `true`.
    Ident(String),
    /// Upper-case or `_`-prefixed identifier.
    Var(String),
    Int(i64),
    LParen,
    RParen,
    Comma,
    Dot,
    At,
    Backslash,
    Bar,
    Simplify,  // <=>
    Propagate, // ==>
    Arrow,     // ~>
    Unify,     // =
    Cmp(super::ast::CmpOp),
    Plus,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) | Tok::Var(s) => format!("`{s}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::At => "`@`".into(),
            Tok::Backslash => "`\\`".into(),
            Tok::Bar => "`|`".into(),
            Tok::Simplify => "`<=>`".into(),
            Tok::Propagate => "`==>`".into(),
            Tok::Arrow => "`~>`".into(),
            Tok::Unify => "`=`".into(),
            Tok::Cmp(op) => format!("`{}`", op.symbol()),
            Tok::Plus => "`+`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Spanned {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

pub(crate) fn tokenize(text: &str) -> Result<Vec<Spanned>, ParseError> {
    use super::ast::CmpOp;

    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        let err = |kind| ParseError {
            line: start_line,
            column: start_col,
            kind,
        };

        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }

        let rest = &chars[i..];
        let starts = |s: &str| s.chars().enumerate().all(|(k, ch)| rest.get(k) == Some(&ch));

        let (tok, len) = if c.is_ascii_lowercase() || c.is_ascii_uppercase() || c == '_' {
            let len = rest
                .iter()
                .take_while(|ch| ch.is_ascii_alphanumeric() || **ch == '_')
                .count();
            let word: String = rest[..len].iter().collect();
            if c.is_ascii_lowercase() {
                (Tok::Ident(word), len)
            } else {
                (Tok::Var(word), len)
            }
        } else if c.is_ascii_digit() || (c == '-' && rest.get(1).is_some_and(|d| d.is_ascii_digit())) {
            let len = 1 + rest[1..].iter().take_while(|ch| ch.is_ascii_digit()).count();
            let digits: String = rest[..len].iter().collect();
            let value = digits
                .parse::<i64>()
                .map_err(|_| err(ParseErrorKind::IntegerOverflow(digits.clone())))?;
            (Tok::Int(value), len)
        } else if starts("<=>") {
            (Tok::Simplify, 3)
        } else if starts("==>") {
            (Tok::Propagate, 3)
        } else if starts("==") {
            (Tok::Cmp(CmpOp::Eq), 2)
        } else if starts("=<") {
            (Tok::Cmp(CmpOp::Le), 2)
        } else if starts(">=") {
            (Tok::Cmp(CmpOp::Ge), 2)
        } else if starts("~>") {
            (Tok::Arrow, 2)
        } else {
            let tok = match c {
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                ',' => Tok::Comma,
                '.' => Tok::Dot,
                '@' => Tok::At,
                '\\' => Tok::Backslash,
                '|' => Tok::Bar,
                '=' => Tok::Unify,
                '>' => Tok::Cmp(CmpOp::Gt),
                '<' => Tok::Cmp(CmpOp::Lt),
                '+' => Tok::Plus,
                _ => {
                    let op: String = rest
                        .iter()
                        .take_while(|ch| !ch.is_alphanumeric() && !ch.is_whitespace() && !"(),.".contains(**ch))
                        .collect();
                    let op = if op.is_empty() { c.to_string() } else { op };
                    return Err(err(ParseErrorKind::UnknownOperator(op)));
                }
            };
            (tok, 1)
        };

        out.push(Spanned {
            tok,
            line: start_line,
            column: start_col,
        });
        i += len;
        col += len;
    }

    out.push(Spanned {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}
