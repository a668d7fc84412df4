use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use super::ast::{BodyItem, CmpOp, Expr, GuardTest, Program, Term, Var};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Warning {
    /// A constraint symbol occurs with more than one arity.
    InconsistentArity { name: String, arities: Vec<usize> },
    /// The guard contains a ground test that is false, so the rule can never fire.
    DeadRule { rule: String },
    /// A guard variable that the head does not bind; the guard can never be decided.
    UnboundGuardVariable { rule: String, var: String },
    /// A body variable that occurs nowhere else in the rule and is not the
    /// target of `is` or `=`.
    SingletonBodyVariable { rule: String, var: String },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::InconsistentArity { name, arities } => {
                let list: Vec<String> = arities.iter().map(|a| format!("{name}/{a}")).collect();
                write!(f, "symbol used with inconsistent arity: {}", list.join(", "))
            }
            Warning::DeadRule { rule } => write!(f, "rule `{rule}` can never fire: its guard is false"),
            Warning::UnboundGuardVariable { rule, var } => {
                write!(f, "rule `{rule}`: guard variable `{var}` does not occur in the head")
            }
            Warning::SingletonBodyVariable { rule, var } => {
                write!(f, "rule `{rule}`: body variable `{var}` occurs only once")
            }
        }
    }
}

/// Static checks over a parsed (or hand-built) program. Never fails.
pub fn validate_program(p: &Program) -> Vec<Warning> {
    let mut warnings = Vec::new();

    let mut arities: BTreeMap<&str, BTreeSet<usize>> = BTreeMap::new();
    for rule in &p.rules {
        let body_atoms = rule.body.iter().filter_map(|b| match b {
            BodyItem::Atom(a) => Some(a),
            _ => None,
        });
        for atom in rule.head().chain(body_atoms) {
            arities.entry(&atom.name).or_default().insert(atom.arity());
        }
    }
    for (name, set) in arities {
        if set.len() > 1 {
            warnings.push(Warning::InconsistentArity {
                name: name.to_string(),
                arities: set.into_iter().collect(),
            });
        }
    }

    for rule in &p.rules {
        let name = rule.display_name();

        let dead = rule.guard.iter().any(|t| match t {
            GuardTest::True => false,
            GuardTest::Compare(op, a, b) => matches!(
                (const_eval(a), const_eval(b)),
                (Some(x), Some(y)) if !compare(*op, x, y)
            ),
        });
        if dead {
            warnings.push(Warning::DeadRule { rule: name.clone() });
        }

        let mut head_vars: BTreeSet<u32> = BTreeSet::new();
        for atom in rule.head() {
            for t in &atom.args {
                if let Term::Var(v) = t {
                    head_vars.insert(v.id);
                }
            }
        }

        let mut reported = BTreeSet::new();
        for test in &rule.guard {
            if let GuardTest::Compare(_, a, b) = test {
                let mut vs = Vec::new();
                a.vars(&mut vs);
                b.vars(&mut vs);
                for v in vs {
                    if !head_vars.contains(&v.id) && reported.insert(v.id) {
                        warnings.push(Warning::UnboundGuardVariable {
                            rule: name.clone(),
                            var: v.name.clone(),
                        });
                    }
                }
            }
        }

        // Count body occurrences of variables the head does not bind.
        let mut counts: HashMap<u32, (usize, bool, String)> = HashMap::new();
        let mut note = |v: &Var, target: bool| {
            if v.is_anonymous() || head_vars.contains(&v.id) {
                return;
            }
            let e = counts.entry(v.id).or_insert_with(|| (0, false, v.name.clone()));
            e.0 += 1;
            e.1 |= target;
        };
        for item in &rule.body {
            match item {
                BodyItem::True => {}
                BodyItem::Atom(a) => a.args.iter().filter_map(Term::as_var).for_each(|v| note(v, false)),
                BodyItem::Unify(a, b) => {
                    a.as_var().into_iter().chain(b.as_var()).for_each(|v| note(v, true));
                }
                BodyItem::Is(v, e) => {
                    note(v, true);
                    let mut vs = Vec::new();
                    e.vars(&mut vs);
                    vs.into_iter().for_each(|v| note(v, false));
                }
            }
        }
        let mut singles: Vec<(u32, String)> = counts
            .into_iter()
            .filter(|(id, (n, target, _))| *n == 1 && !*target && !reported.contains(id))
            .map(|(id, (_, _, var))| (id, var))
            .collect();
        singles.sort();
        for (_, var) in singles {
            warnings.push(Warning::SingletonBodyVariable {
                rule: name.clone(),
                var,
            });
        }
    }

    warnings
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Lit<'a> {
    Int(i64),
    Const(&'a str),
}

fn const_eval(e: &Expr) -> Option<Lit<'_>> {
    match e {
        Expr::Int(i) => Some(Lit::Int(*i)),
        Expr::Const(c) => Some(Lit::Const(c)),
        Expr::Var(_) => None,
        Expr::Add(a, b) => match (const_eval(a)?, const_eval(b)?) {
            (Lit::Int(x), Lit::Int(y)) => x.checked_add(y).map(Lit::Int),
            _ => None,
        },
        Expr::Max(a, b) => match (const_eval(a)?, const_eval(b)?) {
            (Lit::Int(x), Lit::Int(y)) => Some(Lit::Int(x.max(y))),
            _ => None,
        },
    }
}

fn compare(op: CmpOp, a: Lit<'_>, b: Lit<'_>) -> bool {
    match (a, b) {
        (Lit::Int(x), Lit::Int(y)) => match op {
            CmpOp::Ge => x >= y,
            CmpOp::Gt => x > y,
            CmpOp::Le => x <= y,
            CmpOp::Lt => x < y,
            CmpOp::Eq => x == y,
        },
        (x, y) => op == CmpOp::Eq && x == y,
    }
}
