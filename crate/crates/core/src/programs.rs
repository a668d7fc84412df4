//! The two bundled union-find programs and a typed session over the engine.
//!
//! `root(X)` (or `root(X,Rank)`) marks a representative and `X ~> P` says
//! that `P` is the parent of `X`; these are the data constraints. `make`,
//! `union`, `find` and `link` are operation constraints: each is consumed
//! by the rules before the operation that introduced it returns.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::engine::{CompileError, Engine, EngineOptions, Goal, Outcome, RuntimeError};
use crate::parser::ast::Program;
use crate::parser::{parse_program, ParseError};
use crate::store::{StoreConfig, StoredConstraint, SymbolId};
use crate::term::{Constant, Term, Value};

pub const UFD_BASIC: &str = include_str!("../programs/ufd_basic.chr");
pub const UFD_RANK: &str = include_str!("../programs/ufd_rank.chr");

/// Which program a session runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Naive union-find.
    Basic,
    /// Union-by-rank with path compression.
    Rank,
}

impl Variant {
    pub fn source(self) -> &'static str {
        match self {
            Variant::Basic => UFD_BASIC,
            Variant::Rank => UFD_RANK,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Basic => "ufd_basic",
            Variant::Rank => "ufd_rank",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "basic" | "ufd_basic" => Some(Variant::Basic),
            "rank" | "ufd_rank" => Some(Variant::Rank),
            _ => None,
        }
    }

    pub fn program(self) -> Program {
        parse_program(self.source()).expect("bundled program parses")
    }

    fn root_arity(self) -> usize {
        match self {
            Variant::Basic => 1,
            Variant::Rank => 2,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Basic => "basic",
            Variant::Rank => "rank",
        })
    }
}

/// `ufd_rank` with `linkLeft` and `linkRight` in swapped order, so that
/// equal-rank ties go the other way. Used to check that the structural
/// comparison against the oracle notices.
pub fn ufd_rank_swapped_links() -> String {
    let lines: Vec<&str> = UFD_RANK.lines().collect();
    let mut out: Vec<&str> = Vec::with_capacity(lines.len());
    for line in &lines {
        if line.starts_with("linkLeft") {
            continue;
        }
        out.push(line);
        if line.starts_with("linkRight") {
            out.extend(lines.iter().find(|l| l.starts_with("linkLeft")));
        }
    }
    out.join("\n") + "\n"
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("element {0} was already made")]
    DuplicateMake(Constant),
    #[error("element {0} was never made")]
    UnknownElement(Constant),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error("{0} failed")]
    Failed(String),
    #[error("{op} left operation constraints in the store: {left}")]
    ContractViolation { op: String, left: String },
    #[error("find({0}) did not bind its result")]
    Unresolved(Constant),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ForestError {
    #[error("constraint {0} is not part of a union-find forest")]
    Unexpected(String),
    #[error("element {0} has more than one parent or root entry")]
    MultipleEntries(Constant),
    #[error("element {0} is on a cycle")]
    Cycle(Constant),
    #[error("element {0} has a parent {1} with no entry of its own")]
    Dangling(Constant, Constant),
    #[error("made element {0} has no entry")]
    Missing(Constant),
}

/// Parent and (for roots under the rank program) rank of one element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Node {
    pub parent: Value,
    pub rank: Option<i64>,
}

/// Per-operation cost, taken from counter deltas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OpMetrics {
    /// `findNode` firings, one per parent edge followed.
    pub find_steps: u64,
    pub firings: u64,
    pub wakes: u64,
    pub partner_probes: u64,
}

struct Symbols {
    make: SymbolId,
    union: SymbolId,
    find: SymbolId,
    link: SymbolId,
    root: SymbolId,
    arrow: SymbolId,
    find_node: usize,
}

pub struct UfSession {
    engine: Engine,
    variant: Variant,
    made: HashSet<Value>,
    made_order: Vec<Value>,
    symbols: Symbols,
    log: Vec<OpMetrics>,
}

impl fmt::Debug for UfSession {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UfSession")
            .field("variant", &self.variant)
            .field("elements", &self.made.len())
            .finish_non_exhaustive()
    }
}

pub const OPERATION_SYMBOLS: [(&str, usize); 4] = [("make", 1), ("union", 2), ("find", 2), ("link", 2)];

impl UfSession {
    pub fn new(variant: Variant) -> Self {
        Self::with_store(variant, StoreConfig::default())
    }

    pub fn with_store(variant: Variant, store: StoreConfig) -> Self {
        Self::with_source(variant, variant.source(), store, false).expect("bundled program compiles")
    }

    /// Runs `source` as if it were `variant` (the source must use the same
    /// data constraints as that variant).
    pub fn with_source(variant: Variant, source: &str, store: StoreConfig, trace: bool) -> Result<Self, SessionError> {
        let program = parse_program(source)?;
        let options = EngineOptions {
            store,
            trace,
            operation_symbols: OPERATION_SYMBOLS.iter().map(|(n, a)| (n.to_string(), *a)).collect(),
        };
        let mut engine = Engine::new(&program, options)?;
        let find_node = engine.program().rule_index("findNode").unwrap_or(usize::MAX);
        let symbols = Symbols {
            make: engine.symbol("make", 1),
            union: engine.symbol("union", 2),
            find: engine.symbol("find", 2),
            link: engine.symbol("link", 2),
            root: engine.symbol("root", variant.root_arity()),
            arrow: engine.symbol("~>", 2),
            find_node,
        };
        Ok(UfSession {
            engine,
            variant,
            made: HashSet::new(),
            made_order: Vec::new(),
            symbols,
            log: Vec::new(),
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn engine_mut(&mut self) -> &mut Engine {
        &mut self.engine
    }

    pub fn atom(&mut self, name: &str) -> Value {
        self.engine.atom(name)
    }

    pub fn constant(&self, v: Value) -> Constant {
        self.engine.constant(v)
    }

    /// Elements in the order they were made.
    pub fn elements(&self) -> &[Value] {
        &self.made_order
    }

    pub fn log(&self) -> &[OpMetrics] {
        &self.log
    }

    pub fn last_op(&self) -> OpMetrics {
        self.log.last().copied().unwrap_or_default()
    }

    pub fn find_steps(&self) -> u64 {
        self.firings_of(self.symbols.find_node)
    }

    fn firings_of(&self, rule: usize) -> u64 {
        self.engine.counters().rule_firings.get(rule).copied().unwrap_or(0)
    }

    fn require(&self, x: Value) -> Result<(), SessionError> {
        if self.made.contains(&x) {
            Ok(())
        } else {
            Err(SessionError::UnknownElement(self.constant(x)))
        }
    }

    fn operate(&mut self, op: String, goal: Goal) -> Result<(), SessionError> {
        let before = self.engine.counters();
        let outcome = self.engine.solve(vec![goal])?;
        if outcome == Outcome::Failure {
            return Err(SessionError::Failed(op));
        }
        let after = self.engine.counters();
        let operations = [self.symbols.make, self.symbols.union, self.symbols.find, self.symbols.link];
        let store = self.engine.store();
        let pending: usize = operations.iter().map(|&s| store.live_count(s)).sum();
        let left: Vec<String> = if pending == 0 {
            Vec::new()
        } else {
            store.live()
            .filter(|c| operations.contains(&c.symbol))
            .map(|c| store.render(c.id, self.engine.interner()))
            .collect()
        };
        if !left.is_empty() {
            return Err(SessionError::ContractViolation {
                op,
                left: left.join(", "),
            });
        }
        let fired = |c: &crate::engine::Counters, r: usize| c.rule_firings.get(r).copied().unwrap_or(0);
        self.log.push(OpMetrics {
            find_steps: fired(&after, self.symbols.find_node) - fired(&before, self.symbols.find_node),
            firings: after.total_firings() - before.total_firings(),
            wakes: after.wake_events - before.wake_events,
            partner_probes: after.partner_probes - before.partner_probes,
        });
        Ok(())
    }

    pub fn make(&mut self, x: Value) -> Result<(), SessionError> {
        if self.made.contains(&x) {
            return Err(SessionError::DuplicateMake(self.constant(x)));
        }
        let op = format!("make({})", self.constant(x));
        self.operate(op, Goal::Atom(self.symbols.make, vec![Term::Val(x)]))?;
        self.made.insert(x);
        self.made_order.push(x);
        Ok(())
    }

    pub fn union(&mut self, x: Value, y: Value) -> Result<(), SessionError> {
        self.require(x)?;
        self.require(y)?;
        let op = format!("union({},{})", self.constant(x), self.constant(y));
        self.operate(op, Goal::Atom(self.symbols.union, vec![Term::Val(x), Term::Val(y)]))
    }

    /// The representative of `x`. The result placeholder is a fresh variable
    /// read back after the engine quiesces.
    pub fn find(&mut self, x: Value) -> Result<Value, SessionError> {
        self.require(x)?;
        let r = self.engine.fresh_var();
        let op = format!("find({})", self.constant(x));
        self.operate(op, Goal::Atom(self.symbols.find, vec![Term::Val(x), Term::Var(r)]))?;
        self.engine
            .value_of(r)
            .ok_or_else(|| SessionError::Unresolved(self.constant(x)))
    }

    /// Decodes the store into a parent map. Roots map to themselves and carry
    /// their rank under the rank program.
    pub fn parents_and_ranks(&self) -> Result<BTreeMap<Value, Node>, ForestError> {
        let store = self.engine.store();
        let mut map: BTreeMap<Value, Node> = BTreeMap::new();
        let data = [self.symbols.root, self.symbols.arrow];
        let others = (0..store.symbols().len() as u32)
            .map(SymbolId)
            .filter(|s| !data.contains(s))
            .any(|s| store.live_count(s) > 0);
        let live: Box<dyn Iterator<Item = &StoredConstraint>> = if others {
            Box::new(store.live())
        } else {
            Box::new(store.live_of(data[0]).chain(store.live_of(data[1])))
        };
        for c in live {
            let render = || store.render(c.id, self.engine.interner());
            let mut args = [Value::Int(0); 2];
            for (slot, t) in args.iter_mut().zip(&c.args) {
                *slot = t.value().ok_or_else(|| ForestError::Unexpected(render()))?;
            }
            let (x, node) = if c.symbol == self.symbols.root {
                let rank = match (self.variant, c.args.len(), args[1]) {
                    (Variant::Basic, 1, _) => None,
                    (Variant::Rank, 2, Value::Int(r)) => Some(r),
                    _ => return Err(ForestError::Unexpected(render())),
                };
                (args[0], Node { parent: args[0], rank })
            } else if c.symbol == self.symbols.arrow {
                (args[0], Node { parent: args[1], rank: None })
            } else {
                return Err(ForestError::Unexpected(render()));
            };
            if map.insert(x, node).is_some() {
                return Err(ForestError::MultipleEntries(self.constant(x)));
            }
        }
        Ok(map)
    }

    /// Checks the full forest invariant: every element has exactly one entry,
    /// parent chains are acyclic and end at a root, and every made element
    /// is present.
    pub fn check_forest(&self) -> Result<BTreeMap<Value, Node>, ForestError> {
        let map = self.parents_and_ranks()?;
        // 1 = on the current walk, 2 = known to reach a root
        let mut state: FxHashMap<Value, u8> = FxHashMap::with_capacity_and_hasher(map.len(), Default::default());
        let mut walk = Vec::new();
        for &x in map.keys() {
            let mut cur = x;
            walk.clear();
            loop {
                match state.get(&cur) {
                    Some(2) => break,
                    Some(_) => return Err(ForestError::Cycle(self.constant(x))),
                    None => {}
                }
                let Some(node) = map.get(&cur) else {
                    return Err(ForestError::Dangling(self.constant(x), self.constant(cur)));
                };
                state.insert(cur, 1);
                walk.push(cur);
                if node.parent == cur {
                    break;
                }
                cur = node.parent;
            }
            for v in &walk {
                state.insert(*v, 2);
            }
        }
        for x in &self.made_order {
            if !map.contains_key(x) {
                return Err(ForestError::Missing(self.constant(*x)));
            }
        }
        Ok(map)
    }
}
