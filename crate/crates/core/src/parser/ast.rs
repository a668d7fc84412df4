//! Rule IR produced by the parser.
//!
//! Names are kept as strings here; interning happens when a program is
//! compiled for the engine.

/// A logic variable. Ids are dense per rule (or per query) in order of first
/// occurrence; every `_` gets its own id.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Var {
    pub id: u32,
    pub name: String,
}

impl Var {
    pub fn is_anonymous(&self) -> bool {
        self.name == "_"
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(Var),
    Const(String),
    Int(i64),
}

impl Term {
    pub fn as_var(&self) -> Option<&Var> {
        match self {
            Term::Var(v) => Some(v),
            _ => None,
        }
    }
}

/// A CHR constraint: symbol name plus arguments. The infix data constraint
/// `X ~> Y` is stored as name `~>` with two arguments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub name: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_infix(&self) -> bool {
        self.name == "~>" && self.args.len() == 2
    }
}

/// Arithmetic over integers: literals, variables, `+` and `max/2`. Atom
/// constants are allowed so that `==` can compare them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Int(i64),
    Const(String),
    Var(Var),
    Add(Box<Expr>, Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn vars<'a>(&'a self, out: &mut Vec<&'a Var>) {
        match self {
            Expr::Int(_) | Expr::Const(_) => {}
            Expr::Var(v) => out.push(v),
            Expr::Add(a, b) | Expr::Max(a, b) => {
                a.vars(out);
                b.vars(out);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Ge,
    Gt,
    Le,
    Lt,
    Eq,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
            CmpOp::Le => "=<",
            CmpOp::Lt => "<",
            CmpOp::Eq => "==",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GuardTest {
    True,
    Compare(CmpOp, Expr, Expr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BodyItem {
    True,
    Atom(Atom),
    /// `T1 = T2`. Only variable-to-constant bindings are supported at run time.
    Unify(Term, Term),
    /// `V is E`
    Is(Var, Expr),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleKind {
    Simplification,
    Propagation,
    Simpagation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub name: Option<String>,
    pub kept: Vec<Atom>,
    pub removed: Vec<Atom>,
    pub guard: Vec<GuardTest>,
    pub body: Vec<BodyItem>,
    /// Position of the rule in the program text, starting at 0.
    pub source_index: usize,
}

impl Rule {
    pub fn kind(&self) -> RuleKind {
        match (self.kept.is_empty(), self.removed.is_empty()) {
            (true, _) => RuleKind::Simplification,
            (false, true) => RuleKind::Propagation,
            (false, false) => RuleKind::Simpagation,
        }
    }

    /// Head atoms in textual order: kept part first, then removed part.
    pub fn head(&self) -> impl Iterator<Item = &Atom> {
        self.kept.iter().chain(self.removed.iter())
    }

    /// The name used in traces and counters: the given name, or `rule<k>`
    /// with a 1-based position for unnamed rules.
    pub fn display_name(&self) -> String {
        match &self.name {
            Some(n) => n.clone(),
            None => format!("rule{}", self.source_index + 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Program {
    pub rules: Vec<Rule>,
    /// CHR symbols in order of first occurrence, with their arity.
    pub symbols: Vec<(String, usize)>,
}

impl Program {
    pub fn rule(&self, name: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.name.as_deref() == Some(name))
    }

    pub fn rule_names(&self) -> Vec<String> {
        self.rules.iter().map(Rule::display_name).collect()
    }
}
