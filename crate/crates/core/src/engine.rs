//! Execution under the refined operational semantics.
//!
//! Goals run left to right. A CHR constraint is inserted into the store
//! when it becomes active and then walks its occurrences in textual order
//! (rule order, then head position). At each occurrence the partners are
//! looked up in a precompiled order and the guard is checked; the first
//! full match commits. If the active constraint survives a firing it
//! resumes at the same occurrence; once no occurrence applies it stays in
//! the store (Drop). Binding a variable wakes the stored constraints that
//! mention it, oldest first, before the next goal runs.
//!
//! The machine keeps an explicit stack, so recursion depth in the CHR
//! program (a long `find` chain, say) does not consume native stack.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::rc::Rc;

use thiserror::Error;

use crate::parser::ast::{self, BodyItem, CmpOp, Expr, GuardTest, Program};
use crate::parser::{parse_program, parse_query, ParseError};
use crate::store::{Candidates, ConstraintId, NonGround, Snapshot, Store, StoreConfig, SymbolId, SymbolInfo};
use crate::term::{Constant, Interner, Term, Value, VarId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error("rule `{rule}`: head constraint `{atom}` shares no variable or constant with the rest of the head, so it cannot be looked up through an index")]
    NoIndexablePartner { rule: String, atom: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuntimeError {
    #[error("instantiation fault: `{0}` has an unbound variable")]
    Instantiation(String),
    #[error("type error: arithmetic on non-integer value in `{0}`")]
    Type(String),
    #[error("integer overflow in `{0}`")]
    Overflow(String),
    #[error("cannot unify two unbound variables ({0} = {1}): only variable-to-constant bindings are supported")]
    Aliasing(VarId, VarId),
}

/// Pattern position in a compiled head or body: a rule-local variable slot or a constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pat {
    Slot(usize),
    Val(Value),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum CExpr {
    Leaf(Pat),
    Add(Box<CExpr>, Box<CExpr>),
    Max(Box<CExpr>, Box<CExpr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum CBody {
    True,
    Atom(SymbolId, Vec<Pat>),
    Unify(Pat, Pat),
    Is(Pat, CExpr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeadAtom {
    pub symbol: SymbolId,
    pub args: Vec<Pat>,
    pub removed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompiledRule {
    pub name: String,
    /// Kept atoms first, then removed atoms, each in textual order.
    pub head: Vec<HeadAtom>,
    guard: Vec<(CmpOp, CExpr, CExpr)>,
    body: Vec<CBody>,
    slots: usize,
    pub propagation: bool,
    text: String,
}

/// Where a partner lookup takes its key from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LookupKey {
    Slot(usize),
    Val(Value),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanStep {
    /// Head atom to find.
    pub head_index: usize,
    /// Argument position used for the index lookup.
    pub position: usize,
    pub key: LookupKey,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Occurrence {
    pub rule: usize,
    pub head_index: usize,
    pub plan: Vec<PlanStep>,
}

#[derive(Debug, Clone)]
pub struct CompiledProgram {
    symbols: Vec<SymbolInfo>,
    by_name: HashMap<(String, usize), SymbolId>,
    rules: Vec<CompiledRule>,
    occurrences: Vec<Vec<Occurrence>>,
}

impl CompiledProgram {
    pub fn symbols(&self) -> &[SymbolInfo] {
        &self.symbols
    }

    pub fn symbol(&self, name: &str, arity: usize) -> Option<SymbolId> {
        self.by_name.get(&(name.to_string(), arity)).copied()
    }

    pub fn rules(&self) -> &[CompiledRule] {
        &self.rules
    }

    pub fn rule_index(&self, name: &str) -> Option<usize> {
        self.rules.iter().position(|r| r.name == name)
    }

    /// Occurrences of `symbol` in the order an active constraint tries them.
    pub fn occurrences(&self, symbol: SymbolId) -> &[Occurrence] {
        self.occurrences.get(symbol.0 as usize).map_or(&[], Vec::as_slice)
    }

    fn add_symbol(&mut self, name: &str, arity: usize) -> SymbolId {
        if let Some(s) = self.symbol(name, arity) {
            return s;
        }
        let s = SymbolId(self.symbols.len() as u32);
        self.symbols.push(SymbolInfo {
            name: name.to_string(),
            arity,
        });
        self.by_name.insert((name.to_string(), arity), s);
        self.occurrences.push(Vec::new());
        s
    }
}

/// Turns parsed rules into match code: per-symbol occurrence lists in
/// textual order, each with a partner lookup plan.
///
/// The plan picks partners greedily: the next atom is the first remaining
/// one (in head order) with an argument that is a constant or a variable
/// already bound by the atoms matched so far; the lookup uses the first
/// such argument.
pub fn compile(program: &Program, interner: &mut Interner) -> Result<CompiledProgram, CompileError> {
    let mut cp = CompiledProgram {
        symbols: Vec::new(),
        by_name: HashMap::new(),
        rules: Vec::new(),
        occurrences: Vec::new(),
    };
    for rule in &program.rules {
        for atom in rule.head() {
            cp.add_symbol(&atom.name, atom.arity());
        }
        for item in &rule.body {
            if let BodyItem::Atom(atom) = item {
                cp.add_symbol(&atom.name, atom.arity());
            }
        }
    }

    for (ri, rule) in program.rules.iter().enumerate() {
        let mut slots = 0usize;
        let mut pat = |t: &ast::Term, interner: &mut Interner| match t {
            ast::Term::Var(v) => {
                slots = slots.max(v.id as usize + 1);
                Pat::Slot(v.id as usize)
            }
            ast::Term::Const(c) => Pat::Val(Value::Atom(interner.intern(c))),
            ast::Term::Int(i) => Pat::Val(Value::Int(*i)),
        };

        let head: Vec<HeadAtom> = rule
            .kept
            .iter()
            .map(|a| (a, false))
            .chain(rule.removed.iter().map(|a| (a, true)))
            .map(|(a, removed)| HeadAtom {
                symbol: cp.symbol(&a.name, a.arity()).unwrap(),
                args: a.args.iter().map(|t| pat(t, interner)).collect(),
                removed,
            })
            .collect();

        let mut guard = Vec::new();
        for test in &rule.guard {
            if let GuardTest::Compare(op, a, b) = test {
                guard.push((*op, cexpr(a, &mut pat, interner), cexpr(b, &mut pat, interner)));
            }
        }

        let mut body = Vec::new();
        for item in &rule.body {
            body.push(match item {
                BodyItem::True => CBody::True,
                BodyItem::Atom(a) => CBody::Atom(
                    cp.symbol(&a.name, a.arity()).unwrap(),
                    a.args.iter().map(|t| pat(t, interner)).collect(),
                ),
                BodyItem::Unify(a, b) => CBody::Unify(pat(a, interner), pat(b, interner)),
                BodyItem::Is(v, e) => {
                    let target = pat(&ast::Term::Var(v.clone()), interner);
                    CBody::Is(target, cexpr(e, &mut pat, interner))
                }
            });
        }

        let name = rule.display_name();
        let compiled = CompiledRule {
            name: name.clone(),
            propagation: rule.removed.is_empty(),
            head,
            guard,
            body,
            slots,
            text: rule.to_string(),
        };

        for (hi, atom) in compiled.head.iter().enumerate() {
            let plan = plan_partners(&compiled.head, hi).map_err(|bad| CompileError::NoIndexablePartner {
                rule: name.clone(),
                atom: rule.head().nth(bad).unwrap().to_string(),
            })?;
            cp.occurrences[atom.symbol.0 as usize].push(Occurrence {
                rule: ri,
                head_index: hi,
                plan,
            });
        }
        cp.rules.push(compiled);
    }
    Ok(cp)
}

fn cexpr(e: &Expr, pat: &mut impl FnMut(&ast::Term, &mut Interner) -> Pat, interner: &mut Interner) -> CExpr {
    match e {
        Expr::Int(i) => CExpr::Leaf(Pat::Val(Value::Int(*i))),
        Expr::Const(c) => CExpr::Leaf(Pat::Val(Value::Atom(interner.intern(c)))),
        Expr::Var(v) => CExpr::Leaf(pat(&ast::Term::Var(v.clone()), interner)),
        Expr::Add(a, b) => CExpr::Add(Box::new(cexpr(a, pat, interner)), Box::new(cexpr(b, pat, interner))),
        Expr::Max(a, b) => CExpr::Max(Box::new(cexpr(a, pat, interner)), Box::new(cexpr(b, pat, interner))),
    }
}

/// Returns the lookup plan for an active constraint matching head atom
/// `active`, or the index of a head atom that no ordering can reach.
fn plan_partners(head: &[HeadAtom], active: usize) -> Result<Vec<PlanStep>, usize> {
    let mut known: HashSet<usize> = HashSet::new();
    let learn = |known: &mut HashSet<usize>, atom: &HeadAtom| {
        for p in &atom.args {
            if let Pat::Slot(s) = p {
                known.insert(*s);
            }
        }
    };
    learn(&mut known, &head[active]);

    let mut remaining: Vec<usize> = (0..head.len()).filter(|&i| i != active).collect();
    let mut plan = Vec::new();
    while !remaining.is_empty() {
        let pick = remaining.iter().enumerate().find_map(|(ri, &hi)| {
            head[hi].args.iter().enumerate().find_map(|(pos, p)| match p {
                Pat::Val(v) => Some((ri, hi, pos, LookupKey::Val(*v))),
                Pat::Slot(s) if known.contains(s) => Some((ri, hi, pos, LookupKey::Slot(*s))),
                Pat::Slot(_) => None,
            })
        });
        let Some((ri, hi, position, key)) = pick else {
            return Err(remaining[0]);
        };
        remaining.remove(ri);
        learn(&mut known, &head[hi]);
        plan.push(PlanStep {
            head_index: hi,
            position,
            key,
        });
    }
    Ok(plan)
}

/// Variable bindings. A variable is bound at most once, and only to a constant.
#[derive(Debug, Clone, Default)]
pub struct BindingStore {
    values: Vec<Option<Value>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("variable {0} is already bound")]
pub struct AlreadyBound(pub VarId);

impl BindingStore {
    pub fn fresh(&mut self) -> VarId {
        self.values.push(None);
        VarId(self.values.len() as u32 - 1)
    }

    pub fn get(&self, v: VarId) -> Option<Value> {
        self.values.get(v.0 as usize).copied().flatten()
    }

    pub fn bind(&mut self, v: VarId, value: Value) -> Result<(), AlreadyBound> {
        let slot = &mut self.values[v.0 as usize];
        if slot.is_some() {
            return Err(AlreadyBound(v));
        }
        *slot = Some(value);
        Ok(())
    }

    pub fn deref(&self, t: Term) -> Term {
        match t {
            Term::Var(v) => self.get(v).map_or(t, Term::Val),
            Term::Val(_) => t,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn bound_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }
}

/// Transition and cost counters, all monotone within a run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Counters {
    pub activations: u64,
    pub drops: u64,
    /// Activations that ended because the active constraint was removed.
    pub removed_active: u64,
    pub default_transitions: u64,
    /// Indexed by rule position.
    pub rule_firings: Vec<u64>,
    pub wake_events: u64,
    pub guard_checks: u64,
    pub partner_probes: u64,
    pub binds: u64,
    pub inserts: u64,
    pub deletes: u64,
    /// Times more than one operation constraint was alive, or one was alive
    /// that was not the active constraint. Only counted when operation
    /// symbols are configured.
    pub operation_violations: u64,
}

impl Counters {
    pub fn total_firings(&self) -> u64 {
        self.rule_firings.iter().sum()
    }
}

#[derive(Debug, Clone, Default)]
pub struct EngineOptions {
    pub store: StoreConfig,
    pub trace: bool,
    /// Symbols treated as transient operations for the single-operation audit.
    pub operation_symbols: Vec<(String, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// A built-in equality between distinct constants failed; execution stopped.
    Failure,
}

/// An instantiated goal, ready to run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Goal {
    True,
    Atom(SymbolId, Vec<Term>),
    Unify(Term, Term),
    Is(Term, GoalExpr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GoalExpr {
    Leaf(Term),
    Add(Box<GoalExpr>, Box<GoalExpr>),
    Max(Box<GoalExpr>, Box<GoalExpr>),
}

#[derive(Debug)]
enum Frame {
    Goals { goals: Vec<Goal>, next: usize },
    Active { id: ConstraintId, cursor: usize, started: bool },
}

pub struct Engine {
    program: Rc<CompiledProgram>,
    interner: Interner,
    store: Store,
    bindings: BindingStore,
    history: HashSet<(usize, Vec<ConstraintId>)>,
    counters: Counters,
    trace: Option<Vec<String>>,
    stack: Vec<Frame>,
    operation_symbols: Vec<SymbolId>,
}

impl fmt::Debug for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Engine")
            .field("store_size", &self.store.len())
            .field("counters", &self.counters)
            .finish_non_exhaustive()
    }
}

impl Engine {
    pub fn new(program: &Program, options: EngineOptions) -> Result<Self, CompileError> {
        let mut interner = Interner::new();
        let compiled = compile(program, &mut interner)?;
        Ok(Self::from_compiled(compiled, interner, options))
    }

    pub fn from_compiled(mut compiled: CompiledProgram, interner: Interner, options: EngineOptions) -> Self {
        let operation_symbols = options
            .operation_symbols
            .iter()
            .map(|(n, a)| compiled.add_symbol(n, *a))
            .collect();
        let store = Store::new(compiled.symbols.clone(), options.store);
        let counters = Counters {
            rule_firings: vec![0; compiled.rules.len()],
            ..Counters::default()
        };
        Engine {
            program: Rc::new(compiled),
            interner,
            store,
            bindings: BindingStore::default(),
            history: HashSet::new(),
            counters,
            trace: options.trace.then(Vec::new),
            stack: Vec::new(),
            operation_symbols,
        }
    }

    pub fn program(&self) -> &CompiledProgram {
        &self.program
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn interner(&self) -> &Interner {
        &self.interner
    }

    pub fn bindings(&self) -> &BindingStore {
        &self.bindings
    }

    pub fn history_len(&self) -> usize {
        self.history.len()
    }

    pub fn counters(&self) -> Counters {
        let stats = self.store.stats();
        Counters {
            inserts: stats.inserts,
            deletes: stats.deletes,
            ..self.counters.clone()
        }
    }

    /// Firings of the named rule so far; 0 for unknown names.
    pub fn firings(&self, rule: &str) -> u64 {
        self.program
            .rule_index(rule)
            .map_or(0, |i| self.counters.rule_firings[i])
    }

    pub fn trace(&self) -> &[String] {
        self.trace.as_deref().unwrap_or(&[])
    }

    pub fn atom(&mut self, name: &str) -> Value {
        Value::Atom(self.interner.intern(name))
    }

    pub fn constant(&self, v: Value) -> Constant {
        self.interner.constant(v)
    }

    pub fn fresh_var(&mut self) -> VarId {
        self.bindings.fresh()
    }

    pub fn value_of(&self, v: VarId) -> Option<Value> {
        self.bindings.get(v)
    }

    /// Symbol id for `name/arity`, registering it if the program never mentions it.
    pub fn symbol(&mut self, name: &str, arity: usize) -> SymbolId {
        if let Some(s) = self.program.symbol(name, arity) {
            return s;
        }
        let s = Rc::make_mut(&mut self.program).add_symbol(name, arity);
        self.store.add_symbol(SymbolInfo {
            name: name.to_string(),
            arity,
        });
        s
    }

    pub fn snapshot(&self) -> Result<Snapshot, NonGround> {
        self.store.snapshot(&self.interner)
    }

    /// Instantiates a parsed query. Returns the goals and the query
    /// variables in order of first occurrence.
    pub fn query_goals(&mut self, items: &[BodyItem]) -> (Vec<Goal>, Vec<(String, VarId)>) {
        let mut vars: Vec<(String, VarId)> = Vec::new();
        let mut by_id: HashMap<u32, VarId> = HashMap::new();
        let mut term = |engine: &mut Engine, t: &ast::Term| match t {
            ast::Term::Var(v) => {
                if let Some(&x) = by_id.get(&v.id) {
                    return Term::Var(x);
                }
                let x = engine.fresh_var();
                by_id.insert(v.id, x);
                if !v.is_anonymous() {
                    vars.push((v.name.clone(), x));
                }
                Term::Var(x)
            }
            ast::Term::Const(c) => Term::Val(engine.atom(c)),
            ast::Term::Int(i) => Term::Val(Value::Int(*i)),
        };
        fn expr(engine: &mut Engine, e: &Expr, term: &mut impl FnMut(&mut Engine, &ast::Term) -> Term) -> GoalExpr {
            match e {
                Expr::Int(i) => GoalExpr::Leaf(Term::Val(Value::Int(*i))),
                Expr::Const(c) => GoalExpr::Leaf(Term::Val(engine.atom(c))),
                Expr::Var(v) => GoalExpr::Leaf(term(engine, &ast::Term::Var(v.clone()))),
                Expr::Add(a, b) => GoalExpr::Add(Box::new(expr(engine, a, term)), Box::new(expr(engine, b, term))),
                Expr::Max(a, b) => GoalExpr::Max(Box::new(expr(engine, a, term)), Box::new(expr(engine, b, term))),
            }
        }
        let mut goals = Vec::with_capacity(items.len());
        for item in items {
            goals.push(match item {
                BodyItem::True => Goal::True,
                BodyItem::Atom(a) => {
                    let args = a.args.iter().map(|t| term(self, t)).collect();
                    let s = self.symbol(&a.name, a.arity());
                    Goal::Atom(s, args)
                }
                BodyItem::Unify(a, b) => {
                    let a = term(self, a);
                    Goal::Unify(a, term(self, b))
                }
                BodyItem::Is(v, e) => {
                    let target = term(self, &ast::Term::Var(v.clone()));
                    Goal::Is(target, expr(self, e, &mut term))
                }
            });
        }
        (goals, vars)
    }

    /// Runs goals left to right until the execution stack is empty.
    pub fn solve(&mut self, goals: Vec<Goal>) -> Result<Outcome, RuntimeError> {
        self.stack.push(Frame::Goals { goals, next: 0 });
        let result = self.run_stack();
        if !matches!(result, Ok(Outcome::Success)) {
            self.stack.clear();
        }
        result
    }

    fn log(&mut self, line: impl FnOnce() -> String) {
        if let Some(t) = &mut self.trace {
            t.push(line());
        }
    }

    fn run_stack(&mut self) -> Result<Outcome, RuntimeError> {
        while let Some(top) = self.stack.last_mut() {
            match top {
                Frame::Goals { goals, next } => {
                    if *next == goals.len() {
                        self.stack.pop();
                        continue;
                    }
                    let goal = std::mem::replace(&mut goals[*next], Goal::True);
                    *next += 1;
                    if self.execute(goal)? == Outcome::Failure {
                        return Ok(Outcome::Failure);
                    }
                }
                Frame::Active { id, cursor, started } => {
                    let (id, cursor) = (*id, *cursor);
                    if !self.store.is_alive(id) {
                        if *started {
                            self.counters.removed_active += 1;
                        }
                        self.stack.pop();
                        continue;
                    }
                    if !*started {
                        *started = true;
                        self.counters.activations += 1;
                        self.log_activation(id);
                        self.audit_operations(id);
                    }
                    self.step_active(id, cursor);
                }
            }
        }
        Ok(Outcome::Success)
    }

    fn log_activation(&mut self, id: ConstraintId) {
        if self.trace.is_some() {
            let sym = self.store.symbol(self.store.get(id).symbol).to_string();
            self.log(|| format!("ACT {sym}{id}"));
        }
    }

    fn audit_operations(&mut self, active: ConstraintId) {
        if self.operation_symbols.is_empty() {
            return;
        }
        let live: usize = self.operation_symbols.iter().map(|&s| self.store.live_count(s)).sum();
        let active_is_op = self.operation_symbols.contains(&self.store.get(active).symbol);
        if live > 1 || (live == 1 && !active_is_op) {
            self.counters.operation_violations += 1;
        }
    }

    fn execute(&mut self, goal: Goal) -> Result<Outcome, RuntimeError> {
        match goal {
            Goal::True => Ok(Outcome::Success),
            Goal::Atom(symbol, args) => {
                let args = args.into_iter().map(|t| self.bindings.deref(t)).collect();
                let id = self.store.insert(symbol, args);
                self.stack.push(Frame::Active {
                    id,
                    cursor: 0,
                    started: false,
                });
                Ok(Outcome::Success)
            }
            Goal::Unify(a, b) => self.unify(a, b),
            Goal::Is(target, e) => {
                let value = self.eval(&e)?;
                self.unify(target, Term::Val(Value::Int(value)))
            }
        }
    }

    fn eval(&self, e: &GoalExpr) -> Result<i64, RuntimeError> {
        let show = || format!("{e:?}");
        match e {
            GoalExpr::Leaf(t) => match self.bindings.deref(*t) {
                Term::Val(Value::Int(i)) => Ok(i),
                Term::Val(Value::Atom(_)) => Err(RuntimeError::Type(show())),
                Term::Var(v) => Err(RuntimeError::Instantiation(v.to_string())),
            },
            GoalExpr::Add(a, b) => self.eval(a)?.checked_add(self.eval(b)?).ok_or_else(|| RuntimeError::Overflow(show())),
            GoalExpr::Max(a, b) => Ok(self.eval(a)?.max(self.eval(b)?)),
        }
    }

    fn unify(&mut self, a: Term, b: Term) -> Result<Outcome, RuntimeError> {
        match (self.bindings.deref(a), self.bindings.deref(b)) {
            (Term::Val(x), Term::Val(y)) => Ok(if x == y { Outcome::Success } else { Outcome::Failure }),
            (Term::Var(v), Term::Val(c)) | (Term::Val(c), Term::Var(v)) => {
                self.bind(v, c);
                Ok(Outcome::Success)
            }
            (Term::Var(x), Term::Var(y)) if x == y => Ok(Outcome::Success),
            (Term::Var(x), Term::Var(y)) => Err(RuntimeError::Aliasing(x, y)),
        }
    }

    fn bind(&mut self, v: VarId, c: Value) {
        self.bindings.bind(v, c).expect("deref returned a bound variable");
        self.counters.binds += 1;
        if self.trace.is_some() {
            let shown = self.interner.constant(c);
            self.log(|| format!("BIND {v} := {shown}"));
        }
        let woken = self.store.rebind_index(v, c);
        for &id in &woken {
            self.counters.wake_events += 1;
            self.log(|| format!("WAKE {id}"));
        }
        for &id in woken.iter().rev() {
            self.stack.push(Frame::Active {
                id,
                cursor: 0,
                started: false,
            });
        }
    }

    /// Tries the occurrence under the cursor of the top (active) frame:
    /// fires it, or advances the cursor, or drops the constraint.
    fn step_active(&mut self, id: ConstraintId, cursor: usize) {
        let program = Rc::clone(&self.program);
        let symbol = self.store.get(id).symbol;
        let occurrences = program.occurrences(symbol);

        let Some(occ) = occurrences.get(cursor) else {
            self.stack.pop();
            self.counters.drops += 1;
            self.log(|| format!("DROP {id}"));
            return;
        };

        let rule = &program.rules[occ.rule];
        match self.match_occurrence(rule, occ, id) {
            Some((ids, env)) => self.fire(occ.rule, rule, ids, env, id),
            None => {
                self.counters.default_transitions += 1;
                if let Some(Frame::Active { cursor, .. }) = self.stack.last_mut() {
                    *cursor += 1;
                }
            }
        }
    }

    fn match_occurrence(
        &mut self,
        rule: &CompiledRule,
        occ: &Occurrence,
        active: ConstraintId,
    ) -> Option<(Vec<ConstraintId>, Vec<Option<Term>>)> {
        let mut env = vec![None; rule.slots];
        if !match_atom(&rule.head[occ.head_index].args, &self.store.get(active).args, &mut env) {
            return None;
        }
        let mut ids = vec![ConstraintId(u64::MAX); rule.head.len()];
        ids[occ.head_index] = active;
        self.search(rule, occ, 0, env, &mut ids)
    }

    fn search(
        &mut self,
        rule: &CompiledRule,
        occ: &Occurrence,
        step: usize,
        env: Vec<Option<Term>>,
        ids: &mut Vec<ConstraintId>,
    ) -> Option<(Vec<ConstraintId>, Vec<Option<Term>>)> {
        let Some(ps) = occ.plan.get(step) else {
            self.counters.guard_checks += 1;
            if !self.guard_holds(rule, &env) {
                return None;
            }
            if rule.propagation && self.history.contains(&(occ.rule, ids.clone())) {
                return None;
            }
            return Some((ids.clone(), env));
        };

        let atom = &rule.head[ps.head_index];
        let key = match ps.key {
            LookupKey::Val(v) => Term::Val(v),
            LookupKey::Slot(s) => env[s].expect("plan only keys on bound slots"),
        };
        let before = self.store.stats().probes;
        let mut candidates: Candidates = match key {
            Term::Val(v) => self.store.lookup(atom.symbol, ps.position, v),
            Term::Var(x) => self.store.lookup_var(atom.symbol, ps.position, x),
        };
        self.counters.partner_probes += self.store.stats().probes - before;

        while let Some(cand) = candidates.next_live(&self.store) {
            if ids.contains(&cand) {
                continue;
            }
            let mut env2 = env.clone();
            if !match_atom(&atom.args, &self.store.get(cand).args, &mut env2) {
                continue;
            }
            ids[ps.head_index] = cand;
            if let Some(found) = self.search(rule, occ, step + 1, env2, ids) {
                return Some(found);
            }
            ids[ps.head_index] = ConstraintId(u64::MAX);
        }
        None
    }

    fn guard_holds(&self, rule: &CompiledRule, env: &[Option<Term>]) -> bool {
        rule.guard.iter().all(|(op, a, b)| {
            let (Some(x), Some(y)) = (self.guard_value(a, env), self.guard_value(b, env)) else {
                return false;
            };
            match (x, y) {
                (Value::Int(x), Value::Int(y)) => match op {
                    CmpOp::Ge => x >= y,
                    CmpOp::Gt => x > y,
                    CmpOp::Le => x <= y,
                    CmpOp::Lt => x < y,
                    CmpOp::Eq => x == y,
                },
                (x, y) => *op == CmpOp::Eq && x == y,
            }
        })
    }

    /// `None` when the expression is not decidable under the match: an
    /// unbound variable, or arithmetic on an atom.
    fn guard_value(&self, e: &CExpr, env: &[Option<Term>]) -> Option<Value> {
        match e {
            CExpr::Leaf(Pat::Val(v)) => Some(*v),
            CExpr::Leaf(Pat::Slot(s)) => self.bindings.deref(env[*s]?).value(),
            CExpr::Add(a, b) => match (self.guard_value(a, env)?, self.guard_value(b, env)?) {
                (Value::Int(x), Value::Int(y)) => x.checked_add(y).map(Value::Int),
                _ => None,
            },
            CExpr::Max(a, b) => match (self.guard_value(a, env)?, self.guard_value(b, env)?) {
                (Value::Int(x), Value::Int(y)) => Some(Value::Int(x.max(y))),
                _ => None,
            },
        }
    }

    fn fire(&mut self, ri: usize, rule: &CompiledRule, ids: Vec<ConstraintId>, mut env: Vec<Option<Term>>, active: ConstraintId) {
        self.audit_operations(active);
        self.counters.rule_firings[ri] += 1;
        if self.trace.is_some() {
            let list: Vec<String> = ids.iter().map(|i| i.0.to_string()).collect();
            let name = rule.name.clone();
            self.log(|| format!("FIRE {name} ids=[{}]", list.join(",")));
        }
        if rule.propagation {
            self.history.insert((ri, ids.clone()));
        }
        for (atom, &id) in rule.head.iter().zip(&ids) {
            if atom.removed {
                self.store.delete(id);
            }
        }

        for slot in env.iter_mut() {
            if slot.is_none() {
                *slot = Some(Term::Var(self.bindings.fresh()));
            }
        }
        let term = |p: &Pat| match p {
            Pat::Val(v) => Term::Val(*v),
            Pat::Slot(s) => env[*s].unwrap(),
        };
        fn goal_expr(e: &CExpr, term: &impl Fn(&Pat) -> Term) -> GoalExpr {
            match e {
                CExpr::Leaf(p) => GoalExpr::Leaf(term(p)),
                CExpr::Add(a, b) => GoalExpr::Add(Box::new(goal_expr(a, term)), Box::new(goal_expr(b, term))),
                CExpr::Max(a, b) => GoalExpr::Max(Box::new(goal_expr(a, term)), Box::new(goal_expr(b, term))),
            }
        }
        let goals: Vec<Goal> = rule
            .body
            .iter()
            .map(|b| match b {
                CBody::True => Goal::True,
                CBody::Atom(s, args) => Goal::Atom(*s, args.iter().map(term).collect()),
                CBody::Unify(a, b) => Goal::Unify(term(a), term(b)),
                CBody::Is(t, e) => Goal::Is(term(t), goal_expr(e, &term)),
            })
            .collect();

        if !self.store.is_alive(active) {
            // the active frame is on top of the stack; it ends here
            self.stack.pop();
            self.counters.removed_active += 1;
        }
        self.stack.push(Frame::Goals { goals, next: 0 });
    }
}

fn match_atom(pattern: &[Pat], args: &[Term], env: &mut [Option<Term>]) -> bool {
    for (p, &arg) in pattern.iter().zip(args) {
        match *p {
            Pat::Val(v) => {
                if arg != Term::Val(v) {
                    return false;
                }
            }
            Pat::Slot(s) => match env[s] {
                Some(bound) => {
                    if bound != arg {
                        return false;
                    }
                }
                None => env[s] = Some(arg),
            },
        }
    }
    true
}

impl CompiledRule {
    /// Source text of the rule, as pretty-printed.
    pub fn text(&self) -> &str {
        &self.text
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("program: {0}")]
    ProgramParse(ParseError),
    #[error("query: {0}")]
    QueryParse(ParseError),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub outcome: Outcome,
    /// `Err` when some stored constraint still holds an unbound variable.
    pub snapshot: Result<Snapshot, NonGround>,
    /// Live constraints with ids, one per line.
    pub dump: String,
    /// Query variables in order of first occurrence, with their values.
    pub bindings: Vec<(String, Option<Constant>)>,
    pub counters: Counters,
    pub rule_names: Vec<String>,
    pub trace: Vec<String>,
}

/// Parses and compiles a program, runs one query to quiescence.
pub fn run(program_text: &str, query_text: &str, options: EngineOptions) -> Result<RunResult, RunError> {
    let program = parse_program(program_text).map_err(RunError::ProgramParse)?;
    let query = parse_query(query_text).map_err(RunError::QueryParse)?;
    let mut engine = Engine::new(&program, options)?;
    let (goals, vars) = engine.query_goals(&query);
    let outcome = engine.solve(goals)?;
    Ok(RunResult {
        outcome,
        snapshot: engine.snapshot(),
        dump: engine.store.dump(&engine.interner),
        bindings: vars
            .into_iter()
            .map(|(name, v)| (name, engine.value_of(v).map(|x| engine.constant(x))))
            .collect(),
        counters: engine.counters(),
        rule_names: engine.program.rules.iter().map(|r| r.name.clone()).collect(),
        trace: engine.trace.take().unwrap_or_default(),
    })
}
