//! Canonical text form of the rule IR. The output reparses to the same IR,
//! and the bundled `.chr` programs are stored in exactly this form.

use std::fmt::{self, Display, Formatter};

use super::ast::{Atom, BodyItem, Expr, GuardTest, Program, Rule, Term};

impl Display for Term {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(&v.name),
            Term::Const(c) => f.write_str(c),
            Term::Int(i) => write!(f, "{i}"),
        }
    }
}

impl Display for Atom {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        if self.is_infix() {
            return write!(f, "{} ~> {}", self.args[0], self.args[1]);
        }
        f.write_str(&self.name)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            join(f, &self.args, ",")?;
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl Display for Expr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Int(i) => write!(f, "{i}"),
            Expr::Const(c) => f.write_str(c),
            Expr::Var(v) => f.write_str(&v.name),
            Expr::Add(a, b) => match **b {
                Expr::Add(..) => write!(f, "{a}+({b})"),
                _ => write!(f, "{a}+{b}"),
            },
            Expr::Max(a, b) => write!(f, "max({a},{b})"),
        }
    }
}

impl Display for GuardTest {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            GuardTest::True => f.write_str("true"),
            GuardTest::Compare(op, a, b) => write!(f, "{a} {} {b}", op.symbol()),
        }
    }
}

impl Display for BodyItem {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            BodyItem::True => f.write_str("true"),
            BodyItem::Atom(a) => a.fmt(f),
            BodyItem::Unify(a, b) => write!(f, "{a} = {b}"),
            BodyItem::Is(v, e) => write!(f, "{} is {e}", v.name),
        }
    }
}

impl Display for Rule {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        if let Some(name) = &self.name {
            write!(f, "{name} @ ")?;
        }
        match (self.kept.is_empty(), self.removed.is_empty()) {
            (true, _) => {
                join(f, &self.removed, ", ")?;
                f.write_str(" <=> ")?;
            }
            (false, true) => {
                join(f, &self.kept, ", ")?;
                f.write_str(" ==> ")?;
            }
            (false, false) => {
                join(f, &self.kept, ", ")?;
                f.write_str(" \\ ")?;
                join(f, &self.removed, ", ")?;
                f.write_str(" <=> ")?;
            }
        }
        if !self.guard.is_empty() {
            join(f, &self.guard, ", ")?;
            f.write_str(" | ")?;
        }
        join(f, &self.body, ", ")?;
        f.write_str(".")
    }
}

impl Display for Program {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        for rule in &self.rules {
            writeln!(f, "{rule}")?;
        }
        Ok(())
    }
}

fn join<T: Display>(f: &mut Formatter<'_>, items: &[T], sep: &str) -> fmt::Result {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(sep)?;
        }
        item.fmt(f)?;
    }
    Ok(())
}
