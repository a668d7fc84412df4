//! Indexed constraint store.
//!
//! Every argument position of every symbol has a hash index from ground
//! value to the set of live constraints holding that value there. Unbound
//! variables are tracked in per-variable occurrence lists instead, and move
//! into the value indexes when the variable is bound ([`Store::rebind_index`]).
//! Insert, delete and lookup are expected constant time; a lookup costs one
//! probe for the bucket plus one per entry copied out of it.
//!
//! [`StoreMode::Poor`] replaces index lookups with a scan over every live
//! constraint of the symbol. It exists to show what a store without
//! per-position indexes does to the complexity of the union-find programs.

use std::fmt;

use indexmap::IndexSet;
use rustc_hash::{FxBuildHasher, FxHashMap};

use crate::term::{Constant, Interner, Term, Value, VarId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConstraintId(pub u64);

impl fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Dense id of a CHR constraint symbol (name/arity) within one program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymbolId(pub u32);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolInfo {
    pub name: String,
    pub arity: usize,
}

impl fmt::Display for SymbolInfo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredConstraint {
    pub id: ConstraintId,
    pub symbol: SymbolId,
    pub args: Vec<Term>,
    pub alive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StoreMode {
    /// Hash indexes that grow by doubling.
    #[default]
    Indexed,
    /// Lookups scan all live constraints of the symbol.
    Poor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StoreConfig {
    pub mode: StoreMode,
    /// Initial capacity of every table, to avoid rehashing altogether.
    pub presize: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StoreStats {
    pub inserts: u64,
    pub deletes: u64,
    pub lookups: u64,
    pub probes: u64,
}

/// Snapshot of the result set of a lookup. Ids are re-checked for liveness
/// as they are taken, so a constraint deleted after the lookup is skipped.
#[derive(Debug, Clone, Default)]
pub struct Candidates {
    ids: Vec<ConstraintId>,
    next: usize,
}

impl Candidates {
    pub fn next_live(&mut self, store: &Store) -> Option<ConstraintId> {
        while let Some(&id) = self.ids.get(self.next) {
            self.next += 1;
            if store.is_alive(id) {
                return Some(id);
            }
        }
        None
    }

    pub fn collect_live(mut self, store: &Store) -> Vec<ConstraintId> {
        let mut out = Vec::new();
        while let Some(id) = self.next_live(store) {
            out.push(id);
        }
        out
    }
}

type Bucket = IndexSet<ConstraintId, FxBuildHasher>;

#[derive(Debug, Clone)]
pub struct Store {
    config: StoreConfig,
    symbols: Vec<SymbolInfo>,
    constraints: Vec<StoredConstraint>,
    by_symbol: Vec<Bucket>,
    /// `index[symbol][position]`: ground value -> live ids
    index: Vec<Vec<FxHashMap<Value, Bucket>>>,
    occurrences: FxHashMap<VarId, Bucket>,
    stats: StoreStats,
}

impl Store {
    pub fn new(symbols: Vec<SymbolInfo>, config: StoreConfig) -> Self {
        let cap = config.presize.unwrap_or(0);
        let index = symbols
            .iter()
            .map(|s| (0..s.arity).map(|_| FxHashMap::with_capacity_and_hasher(cap, FxBuildHasher)).collect())
            .collect();
        Store {
            config,
            by_symbol: symbols.iter().map(|_| Bucket::with_capacity_and_hasher(cap, FxBuildHasher)).collect(),
            symbols,
            constraints: Vec::with_capacity(cap),
            index,
            occurrences: FxHashMap::with_capacity_and_hasher(cap, FxBuildHasher),
            stats: StoreStats::default(),
        }
    }

    /// Registers a symbol the store was not created with.
    pub fn add_symbol(&mut self, info: SymbolInfo) -> SymbolId {
        let cap = self.config.presize.unwrap_or(0);
        let id = SymbolId(self.symbols.len() as u32);
        self.index.push((0..info.arity).map(|_| FxHashMap::with_capacity_and_hasher(cap, FxBuildHasher)).collect());
        self.by_symbol.push(Bucket::with_capacity_and_hasher(cap, FxBuildHasher));
        self.symbols.push(info);
        id
    }

    pub fn config(&self) -> StoreConfig {
        self.config
    }

    pub fn symbols(&self) -> &[SymbolInfo] {
        &self.symbols
    }

    pub fn symbol(&self, s: SymbolId) -> &SymbolInfo {
        &self.symbols[s.0 as usize]
    }

    pub fn stats(&self) -> StoreStats {
        self.stats
    }

    pub fn get(&self, id: ConstraintId) -> &StoredConstraint {
        &self.constraints[id.0 as usize]
    }

    pub fn is_alive(&self, id: ConstraintId) -> bool {
        self.constraints.get(id.0 as usize).is_some_and(|c| c.alive)
    }

    pub fn live_count(&self, s: SymbolId) -> usize {
        self.by_symbol[s.0 as usize].len()
    }

    pub fn len(&self) -> usize {
        self.by_symbol.iter().map(IndexSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Live constraints in id order.
    pub fn live(&self) -> impl Iterator<Item = &StoredConstraint> {
        self.constraints.iter().filter(|c| c.alive)
    }

    /// Live constraints of one symbol, in no particular order.
    pub fn live_of(&self, s: SymbolId) -> impl Iterator<Item = &StoredConstraint> {
        self.by_symbol[s.0 as usize]
            .iter()
            .map(|id| &self.constraints[id.0 as usize])
    }

    pub fn insert(&mut self, symbol: SymbolId, args: Vec<Term>) -> ConstraintId {
        let arity = self.symbols[symbol.0 as usize].arity;
        assert_eq!(args.len(), arity, "arity mismatch inserting {}", self.symbols[symbol.0 as usize]);

        let id = ConstraintId(self.constraints.len() as u64);
        self.stats.inserts += 1;
        self.stats.probes += 1;
        self.by_symbol[symbol.0 as usize].insert(id);
        for (pos, arg) in args.iter().enumerate() {
            self.stats.probes += 1;
            match *arg {
                Term::Val(v) => {
                    self.index[symbol.0 as usize][pos].entry(v).or_default().insert(id);
                }
                Term::Var(x) => {
                    self.occurrences.entry(x).or_default().insert(id);
                }
            }
        }
        self.constraints.push(StoredConstraint {
            id,
            symbol,
            args,
            alive: true,
        });
        id
    }

    pub fn delete(&mut self, id: ConstraintId) {
        let c = &mut self.constraints[id.0 as usize];
        assert!(c.alive, "deleting dead constraint {id}");
        c.alive = false;
        let symbol = c.symbol.0 as usize;

        self.stats.deletes += 1;
        self.stats.probes += 1;
        self.by_symbol[symbol].swap_remove(&id);
        for pos in 0..self.constraints[id.0 as usize].args.len() {
            self.stats.probes += 1;
            match self.constraints[id.0 as usize].args[pos] {
                Term::Val(v) => {
                    let table = &mut self.index[symbol][pos];
                    if let Some(bucket) = table.get_mut(&v) {
                        bucket.swap_remove(&id);
                        if bucket.is_empty() {
                            table.remove(&v);
                        }
                    }
                }
                Term::Var(x) => {
                    if let Some(bucket) = self.occurrences.get_mut(&x) {
                        bucket.swap_remove(&id);
                        if bucket.is_empty() {
                            self.occurrences.remove(&x);
                        }
                    }
                }
            }
        }
    }

    /// Live constraints of `symbol` whose argument `pos` is `value`.
    pub fn lookup(&mut self, symbol: SymbolId, pos: usize, value: Value) -> Candidates {
        self.stats.lookups += 1;
        self.stats.probes += 1;
        let ids: Vec<ConstraintId> = match self.config.mode {
            StoreMode::Indexed => match self.index[symbol.0 as usize][pos].get(&value) {
                Some(bucket) => {
                    self.stats.probes += bucket.len() as u64;
                    bucket.iter().copied().collect()
                }
                None => Vec::new(),
            },
            StoreMode::Poor => {
                let all = &self.by_symbol[symbol.0 as usize];
                self.stats.probes += all.len() as u64;
                all.iter()
                    .copied()
                    .filter(|id| self.constraints[id.0 as usize].args[pos] == Term::Val(value))
                    .collect()
            }
        };
        Candidates { ids, next: 0 }
    }

    /// Live constraints of `symbol` whose argument `pos` is the unbound variable `var`.
    pub fn lookup_var(&mut self, symbol: SymbolId, pos: usize, var: VarId) -> Candidates {
        self.stats.lookups += 1;
        self.stats.probes += 1;
        let ids = match self.occurrences.get(&var) {
            Some(bucket) => {
                self.stats.probes += bucket.len() as u64;
                bucket
                    .iter()
                    .copied()
                    .filter(|id| {
                        let c = &self.constraints[id.0 as usize];
                        c.symbol == symbol && c.args[pos] == Term::Var(var)
                    })
                    .collect()
            }
            None => Vec::new(),
        };
        Candidates { ids, next: 0 }
    }

    /// Records that `var` is now bound to `value`: rewrites the argument in
    /// every live constraint that mentions it, registers those positions in
    /// the value indexes, and returns the affected ids in ascending order.
    pub fn rebind_index(&mut self, var: VarId, value: Value) -> Vec<ConstraintId> {
        self.stats.probes += 1;
        let Some(bucket) = self.occurrences.remove(&var) else {
            return Vec::new();
        };
        let mut woken: Vec<ConstraintId> = bucket.into_iter().collect();
        woken.sort_unstable();
        for &id in &woken {
            let c = &mut self.constraints[id.0 as usize];
            let symbol = c.symbol.0 as usize;
            for (pos, arg) in c.args.iter_mut().enumerate() {
                if *arg == Term::Var(var) {
                    *arg = Term::Val(value);
                    self.stats.probes += 1;
                    self.index[symbol][pos].entry(value).or_default().insert(id);
                }
            }
        }
        woken
    }

    /// Checks the index and occurrence invariants against the main table.
    /// Linear in the size of the store; meant for tests.
    pub fn audit(&self) -> Result<(), String> {
        let mut expected_index = 0usize;
        let mut expected_occ = 0usize;
        for c in &self.constraints {
            let s = c.symbol.0 as usize;
            if c.alive != self.by_symbol[s].contains(&c.id) {
                return Err(format!("{} symbol list out of sync (alive={})", c.id, c.alive));
            }
            for (pos, arg) in c.args.iter().enumerate() {
                match *arg {
                    Term::Val(v) => {
                        let present = self.index[s][pos].get(&v).is_some_and(|b| b.contains(&c.id));
                        if present != c.alive {
                            return Err(format!("{} index ({},{pos}) out of sync", c.id, self.symbols[s]));
                        }
                        expected_index += c.alive as usize;
                    }
                    Term::Var(x) => {
                        let present = self.occurrences.get(&x).is_some_and(|b| b.contains(&c.id));
                        if present != c.alive {
                            return Err(format!("{} occurrence list of {x} out of sync", c.id));
                        }
                    }
                }
            }
            if c.alive {
                let mut vars: Vec<VarId> = c
                    .args
                    .iter()
                    .filter_map(|a| match a {
                        Term::Var(x) => Some(*x),
                        _ => None,
                    })
                    .collect();
                vars.sort_unstable();
                vars.dedup();
                expected_occ += vars.len();
            }
        }
        let indexed: usize = self.index.iter().flatten().flat_map(|t| t.values()).map(IndexSet::len).sum();
        if indexed != expected_index {
            return Err(format!("index holds {indexed} entries, expected {expected_index}"));
        }
        let occ: usize = self.occurrences.values().map(IndexSet::len).sum();
        if occ != expected_occ {
            return Err(format!("occurrence lists hold {occ} entries, expected {expected_occ}"));
        }
        if self.index.iter().flatten().flat_map(|t| t.values()).any(IndexSet::is_empty) {
            return Err("empty bucket left in an index".into());
        }
        Ok(())
    }

    /// Canonical sorted multiset of the live constraints. Fails on the first
    /// constraint that still holds an unbound variable.
    pub fn snapshot(&self, interner: &Interner) -> Result<Snapshot, NonGround> {
        let mut items = Vec::with_capacity(self.len());
        for c in self.live() {
            let mut args = Vec::with_capacity(c.args.len());
            for a in &c.args {
                match a {
                    Term::Val(v) => args.push(interner.constant(*v)),
                    Term::Var(_) => {
                        return Err(NonGround {
                            constraint: self.render(c.id, interner),
                        })
                    }
                }
            }
            items.push(GroundConstraint {
                symbol: self.symbol(c.symbol).name.clone(),
                args,
            });
        }
        items.sort();
        Ok(Snapshot(items))
    }

    /// `symbol(arg,...)#id`, or `X ~> Y#id` for the infix symbol.
    pub fn render(&self, id: ConstraintId, interner: &Interner) -> String {
        let c = self.get(id);
        let args: Vec<String> = c
            .args
            .iter()
            .map(|a| match a {
                Term::Val(v) => interner.constant(*v).to_string(),
                Term::Var(x) => format!("_{}", x),
            })
            .collect();
        format!("{}{id}", render_atom(&self.symbol(c.symbol).name, &args))
    }

    /// One line per live constraint, in id order.
    pub fn dump(&self, interner: &Interner) -> String {
        let mut out = String::new();
        for c in self.live() {
            out.push_str(&self.render(c.id, interner));
            out.push('\n');
        }
        out
    }
}

fn render_atom(name: &str, args: &[String]) -> String {
    if name == "~>" && args.len() == 2 {
        format!("{} ~> {}", args[0], args[1])
    } else if args.is_empty() {
        name.to_string()
    } else {
        format!("{name}({})", args.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("constraint {constraint} is not ground")]
pub struct NonGround {
    pub constraint: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundConstraint {
    pub symbol: String,
    pub args: Vec<Constant>,
}

impl GroundConstraint {
    pub fn new(symbol: &str, args: &[Constant]) -> Self {
        GroundConstraint {
            symbol: symbol.to_string(),
            args: args.to_vec(),
        }
    }
}

impl fmt::Display for GroundConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let args: Vec<String> = self.args.iter().map(ToString::to_string).collect();
        f.write_str(&render_atom(&self.symbol, &args))
    }
}

/// Sorted multiset of ground constraints.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Snapshot(pub Vec<GroundConstraint>);

impl Snapshot {
    /// Builds a snapshot from text like `root(a,1)` or `b ~> a`, for tests.
    pub fn parse(lines: &[&str]) -> Self {
        let mut items: Vec<GroundConstraint> = lines.iter().map(|l| parse_ground(l)).collect();
        items.sort();
        Snapshot(items)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn parse_ground(text: &str) -> GroundConstraint {
    let constant = |s: &str| {
        let s = s.trim();
        s.parse::<i64>()
            .map(Constant::Int)
            .unwrap_or_else(|_| Constant::Atom(s.to_string()))
    };
    if let Some((l, r)) = text.split_once("~>") {
        return GroundConstraint {
            symbol: "~>".into(),
            args: vec![constant(l), constant(r)],
        };
    }
    match text.split_once('(') {
        Some((name, rest)) => GroundConstraint {
            symbol: name.trim().to_string(),
            args: rest.trim_end_matches(')').split(',').map(constant).collect(),
        },
        None => GroundConstraint {
            symbol: text.trim().to_string(),
            args: Vec::new(),
        },
    }
}

impl fmt::Display for Snapshot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.0 {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}
