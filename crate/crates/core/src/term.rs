//! Run-time values shared by the store and the engine.

use std::collections::HashMap;
use std::fmt;

/// Interned atom name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sym(pub u32);

/// Logic variable created by the engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub u32);

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "V{}", self.0)
    }
}

/// A ground value: an interned atom or an integer. Hashing an atom hashes
/// its interned id only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Atom(Sym),
    Int(i64),
}

/// A constraint argument as stored: either ground, or a variable that was
/// unbound when the argument was last written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Term {
    Var(VarId),
    Val(Value),
}

impl Term {
    pub fn value(self) -> Option<Value> {
        match self {
            Term::Val(v) => Some(v),
            Term::Var(_) => None,
        }
    }
}

impl From<Value> for Term {
    fn from(v: Value) -> Self {
        Term::Val(v)
    }
}

/// A value with the atom name resolved, comparable across sessions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Constant {
    Atom(String),
    Int(i64),
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constant::Atom(a) => f.write_str(a),
            Constant::Int(i) => write!(f, "{i}"),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Interner {
    ids: HashMap<String, Sym>,
    names: Vec<String>,
}

impl Interner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> Sym {
        if let Some(&s) = self.ids.get(name) {
            return s;
        }
        let s = Sym(self.names.len() as u32);
        self.names.push(name.to_string());
        self.ids.insert(name.to_string(), s);
        s
    }

    pub fn get(&self, name: &str) -> Option<Sym> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, s: Sym) -> &str {
        &self.names[s.0 as usize]
    }

    pub fn constant(&self, v: Value) -> Constant {
        match v {
            Value::Atom(s) => Constant::Atom(self.name(s).to_string()),
            Value::Int(i) => Constant::Int(i),
        }
    }

    pub fn value(&mut self, c: &Constant) -> Value {
        match c {
            Constant::Atom(a) => Value::Atom(self.intern(a)),
            Constant::Int(i) => Value::Int(*i),
        }
    }
}
