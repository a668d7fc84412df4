//! Imperative union-find, written the way the textbook pseudo-code reads,
//! plus a brute-force partition used to check both.
//!
//! Each structure counts find steps: one per parent edge followed (for the
//! recursive finds, one per recursive call). These are the reference values
//! for the CHR programs' `findNode` firings.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Debug;
use std::hash::Hash;

use rustc_hash::FxHashMap;
use thiserror::Error;

/// One union-find operation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Op<E> {
    Make(E),
    Union(E, E),
    Find(E),
}

impl<E: Clone> Op<E> {
    pub fn elements(&self) -> Vec<E> {
        match self {
            Op::Make(x) | Op::Find(x) => vec![x.clone()],
            Op::Union(x, y) => vec![x.clone(), y.clone()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError<E: Debug> {
    #[error("element {0:?} was never made")]
    UnknownElement(E),
    #[error("element {0:?} made twice")]
    DuplicateMake(E),
}

pub trait Element: Clone + Eq + Hash + Ord + Debug {}
impl<T: Clone + Eq + Hash + Ord + Debug> Element for T {}

/// Naive union-find: no ranks, no compression.
#[derive(Debug, Clone, Default)]
pub struct NaiveUf<E: Element> {
    parent: FxHashMap<E, E>,
    find_steps: u64,
    recursive: bool,
}

impl<E: Element> NaiveUf<E> {
    /// Iterative find; equivalent to the recursive one but safe on long chains.
    pub fn new() -> Self {
        NaiveUf {
            parent: FxHashMap::default(),
            find_steps: 0,
            recursive: false,
        }
    }

    pub fn recursive() -> Self {
        NaiveUf {
            recursive: true,
            ..Self::new()
        }
    }

    pub fn make(&mut self, x: E) -> Result<(), OracleError<E>> {
        if self.parent.contains_key(&x) {
            return Err(OracleError::DuplicateMake(x));
        }
        self.parent.insert(x.clone(), x);
        Ok(())
    }

    pub fn find(&mut self, x: &E) -> Result<E, OracleError<E>> {
        if !self.parent.contains_key(x) {
            return Err(OracleError::UnknownElement(x.clone()));
        }
        Ok(if self.recursive {
            self.find_rec(x)
        } else {
            let mut x = x.clone();
            loop {
                let p = &self.parent[&x];
                if *p == x {
                    break x;
                }
                self.find_steps += 1;
                x = p.clone();
            }
        })
    }

    fn find_rec(&mut self, x: &E) -> E {
        let p = self.parent[x].clone();
        if *x != p {
            self.find_steps += 1;
            self.find_rec(&p)
        } else {
            x.clone()
        }
    }

    pub fn union(&mut self, x: &E, y: &E) -> Result<(), OracleError<E>> {
        let a = self.find(x)?;
        let b = self.find(y)?;
        self.link(a, b);
        Ok(())
    }

    pub fn link(&mut self, x: E, y: E) {
        if x != y {
            self.parent.insert(y, x);
        }
    }

    pub fn apply(&mut self, op: &Op<E>) -> Result<Option<E>, OracleError<E>> {
        match op {
            Op::Make(x) => self.make(x.clone()).map(|_| None),
            Op::Union(x, y) => self.union(x, y).map(|_| None),
            Op::Find(x) => self.find(x).map(Some),
        }
    }

    pub fn parent(&self, x: &E) -> Option<&E> {
        self.parent.get(x)
    }

    pub fn parents(&self) -> BTreeMap<E, E> {
        self.parent.iter().map(|(k, v)| (k.clone(), v.clone())).collect()
    }

    pub fn find_steps(&self) -> u64 {
        self.find_steps
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }
}

/// Union-by-rank with recursive path compression.
#[derive(Debug, Clone, Default)]
pub struct RankUf<E: Element> {
    parent: FxHashMap<E, E>,
    rank: FxHashMap<E, u32>,
    find_steps: u64,
    iterative: bool,
}

impl<E: Element> RankUf<E> {
    pub fn new() -> Self {
        RankUf {
            parent: FxHashMap::default(),
            rank: FxHashMap::default(),
            find_steps: 0,
            iterative: false,
        }
    }

    /// Two-pass iterative find that leaves the same parent map as the
    /// recursive one, without recursion depth proportional to the path.
    pub fn iterative() -> Self {
        RankUf {
            iterative: true,
            ..Self::new()
        }
    }

    pub fn make(&mut self, x: E) -> Result<(), OracleError<E>> {
        if self.parent.contains_key(&x) {
            return Err(OracleError::DuplicateMake(x));
        }
        self.parent.insert(x.clone(), x.clone());
        self.rank.insert(x, 0);
        Ok(())
    }

    pub fn find(&mut self, x: &E) -> Result<E, OracleError<E>> {
        if !self.parent.contains_key(x) {
            return Err(OracleError::UnknownElement(x.clone()));
        }
        Ok(if self.iterative { self.find_iter(x) } else { self.find_rec(x) })
    }

    fn find_rec(&mut self, x: &E) -> E {
        let p = self.parent[x].clone();
        if *x != p {
            self.find_steps += 1;
            let r = self.find_rec(&p);
            self.parent.insert(x.clone(), r);
        }
        self.parent[x].clone()
    }

    fn find_iter(&mut self, x: &E) -> E {
        let mut root = x.clone();
        loop {
            let p = &self.parent[&root];
            if *p == root {
                break;
            }
            self.find_steps += 1;
            root = p.clone();
        }
        let mut cur = x.clone();
        while cur != root {
            let next = self.parent.insert(cur, root.clone()).unwrap();
            cur = next;
        }
        root
    }

    pub fn union(&mut self, x: &E, y: &E) -> Result<(), OracleError<E>> {
        let a = self.find(x)?;
        let b = self.find(y)?;
        self.link(a, b);
        Ok(())
    }

    pub fn link(&mut self, x: E, y: E) {
        if x == y {
            return;
        }
        let (rx, ry) = (self.rank[&x], self.rank[&y]);
        if rx >= ry {
            self.parent.insert(y, x.clone());
            self.rank.insert(x, rx.max(ry + 1));
        } else {
            self.parent.insert(x, y);
        }
    }

    pub fn apply(&mut self, op: &Op<E>) -> Result<Option<E>, OracleError<E>> {
        match op {
            Op::Make(x) => self.make(x.clone()).map(|_| None),
            Op::Union(x, y) => self.union(x, y).map(|_| None),
            Op::Find(x) => self.find(x).map(Some),
        }
    }

    pub fn parent(&self, x: &E) -> Option<&E> {
        self.parent.get(x)
    }

    pub fn rank(&self, x: &E) -> Option<u32> {
        self.rank.get(x).copied()
    }

    pub fn parents(&self) -> BTreeMap<E, E> {
        self.parent.iter().map(|(k, v)| (k.clone(), v.clone())).collect()
    }

    pub fn ranks(&self) -> BTreeMap<E, u32> {
        self.rank.iter().map(|(k, v)| (k.clone(), *v)).collect()
    }

    pub fn find_steps(&self) -> u64 {
        self.find_steps
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }
}

/// Explicit list of disjoint sets. Union merges two lists; lookups scan.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Partition<E: Element> {
    sets: Vec<Vec<E>>,
}

impl<E: Element> Partition<E> {
    pub fn new() -> Self {
        Partition { sets: Vec::new() }
    }

    /// Index of the set holding `x`.
    pub fn set_of(&self, x: &E) -> Option<usize> {
        self.sets.iter().position(|s| s.contains(x))
    }

    pub fn apply(&mut self, op: &Op<E>) -> Result<(), OracleError<E>> {
        match op {
            Op::Make(x) => {
                if self.set_of(x).is_some() {
                    return Err(OracleError::DuplicateMake(x.clone()));
                }
                self.sets.push(vec![x.clone()]);
            }
            Op::Union(x, y) => {
                let a = self.set_of(x).ok_or_else(|| OracleError::UnknownElement(x.clone()))?;
                let b = self.set_of(y).ok_or_else(|| OracleError::UnknownElement(y.clone()))?;
                if a != b {
                    let moved = std::mem::take(&mut self.sets[b]);
                    self.sets[a].extend(moved);
                    self.sets.remove(b);
                }
            }
            Op::Find(x) => {
                self.set_of(x).ok_or_else(|| OracleError::UnknownElement(x.clone()))?;
            }
        }
        Ok(())
    }

    /// Set index of every element.
    pub fn labels(&self) -> HashMap<E, usize> {
        self.sets
            .iter()
            .enumerate()
            .flat_map(|(i, s)| s.iter().map(move |x| (x.clone(), i)))
            .collect()
    }

    /// Whether `reps` (element to representative) groups the elements
    /// exactly as this partition does.
    pub fn matches_representatives(&self, reps: &BTreeMap<E, E>) -> bool {
        let labels = self.labels();
        if labels.len() != reps.len() {
            return false;
        }
        let mut forward: HashMap<&E, usize> = HashMap::new();
        let mut backward: HashMap<usize, &E> = HashMap::new();
        for (x, r) in reps {
            let Some(&l) = labels.get(x) else {
                return false;
            };
            if *forward.entry(r).or_insert(l) != l || *backward.entry(l).or_insert(r) != r {
                return false;
            }
        }
        true
    }

    pub fn same_set(&self, x: &E, y: &E) -> bool {
        matches!((self.set_of(x), self.set_of(y)), (Some(a), Some(b)) if a == b)
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn sets(&self) -> &[Vec<E>] {
        &self.sets
    }

    /// Sets sorted internally and among themselves, for comparisons.
    pub fn canonical(&self) -> Vec<Vec<E>> {
        let mut sets: Vec<Vec<E>> = self
            .sets
            .iter()
            .map(|s| {
                let mut s = s.clone();
                s.sort();
                s
            })
            .collect();
        sets.sort();
        sets
    }

    /// Groups elements by representative (as produced by any union-find).
    pub fn from_representatives(reps: impl IntoIterator<Item = (E, E)>) -> Self {
        let mut groups: BTreeMap<E, Vec<E>> = BTreeMap::new();
        for (x, r) in reps {
            groups.entry(r).or_default().push(x);
        }
        Partition {
            sets: groups.into_values().collect(),
        }
    }
}

/// Replays `ops` on a fresh [`Partition`].
pub fn bf_partition<E: Element>(ops: &[Op<E>]) -> Result<Partition<E>, OracleError<E>> {
    let mut p = Partition::new();
    for op in ops {
        p.apply(op)?;
    }
    Ok(p)
}

/// Root of `x` following a parent map without modifying it.
/// Root of every element of a parent map, in one pass. `None` if some
/// chain is cyclic or leaves the map.
pub fn roots<E: Element>(parents: &BTreeMap<E, E>) -> Option<BTreeMap<E, E>> {
    let mut out: BTreeMap<E, E> = BTreeMap::new();
    let mut walk = Vec::new();
    for x in parents.keys() {
        let mut cur = x.clone();
        walk.clear();
        let root = loop {
            if let Some(r) = out.get(&cur) {
                break r.clone();
            }
            if walk.len() > parents.len() {
                return None;
            }
            let p = parents.get(&cur)?;
            walk.push(cur.clone());
            if *p == cur {
                break cur;
            }
            cur = p.clone();
        };
        for v in walk.drain(..) {
            out.insert(v, root.clone());
        }
    }
    Some(out)
}

pub fn root_of<E: Element>(parents: &BTreeMap<E, E>, x: &E) -> Option<E> {
    let mut cur = x;
    for _ in 0..=parents.len() {
        let p = parents.get(cur)?;
        if p == cur {
            return Some(cur.clone());
        }
        cur = p;
    }
    None
}
