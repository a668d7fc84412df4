//! Lock-step comparison of both CHR programs with the imperative oracles
//! and the brute-force partition, after every operation.

use std::collections::BTreeMap;
use std::fmt;

use crate::oracle::{NaiveUf, Op, Partition, RankUf};
use crate::programs::{ufd_rank_swapped_links, UfSession, Variant};
use crate::store::StoreConfig;
use crate::term::Value;

use super::{element_name, gen_mixed_workload, gen_random_workload, OpText, WorkloadError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DivergenceKind {
    /// Parent maps differ.
    Structure,
    Rank,
    FindResult,
    FindSteps,
    /// Same-set relation differs from the brute-force partition.
    Partition,
    /// The store does not decode to a forest.
    Forest,
    Invariant,
    /// The session rejected the operation or failed to reach quiescence.
    Engine,
}

impl fmt::Display for DivergenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DivergenceKind::Structure => "structure",
            DivergenceKind::Rank => "rank",
            DivergenceKind::FindResult => "find result",
            DivergenceKind::FindSteps => "find steps",
            DivergenceKind::Partition => "partition",
            DivergenceKind::Forest => "forest",
            DivergenceKind::Invariant => "invariant",
            DivergenceKind::Engine => "engine",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    pub variant: Variant,
    /// Index into the op list.
    pub step: usize,
    pub kind: DivergenceKind,
    pub detail: String,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} diverges at op {} ({}): {}", self.variant, self.step, self.kind, self.detail)
    }
}

/// Outcome of checking one op sequence.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SequenceReport {
    /// Operations executed.
    pub steps: usize,
    /// Finds whose step counts were compared.
    pub finds_checked: usize,
    pub first: Option<Divergence>,
    /// False once any session's same-set relation has differed from the
    /// brute-force partition. Checked after every op, even past `first`.
    pub partition_ok: bool,
    /// The sequence itself is malformed (an element used before it is made,
    /// or made twice).
    pub invalid: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct VerifyConfig {
    pub n: usize,
    /// Number of interleaved union/find operations after the makes. `None`
    /// runs the standard random workload (N unions, then N finds).
    pub ops: Option<usize>,
    /// Run the rank program with its two linking rules swapped.
    pub fault: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedReport {
    pub seed: u64,
    pub ops: Vec<Op<u32>>,
    pub result: SequenceReport,
}

impl SeedReport {
    pub fn passed(&self) -> bool {
        self.result.first.is_none() && self.result.partition_ok && !self.result.invalid
    }
}

pub fn verify_seed(cfg: VerifyConfig, seed: u64) -> Result<SeedReport, WorkloadError> {
    let spec = match cfg.ops {
        None => gen_random_workload(cfg.n, seed)?,
        Some(k) => gen_mixed_workload(cfg.n, seed, k)?,
    };
    let result = check_sequence(&spec.ops, cfg.fault);
    Ok(SeedReport {
        seed,
        ops: spec.ops,
        result,
    })
}

const NONE: u32 = u32::MAX;

/// A forest over elements `1..=n`, indexed by element number. Index 0 is
/// unused; `NONE` marks an absent element.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Forest {
    parent: Vec<u32>,
}

impl Forest {
    fn with_size(n: u32) -> Self {
        Forest {
            parent: vec![NONE; n as usize + 1],
        }
    }

    fn from_map(n: u32, map: &BTreeMap<u32, u32>) -> Self {
        let mut f = Forest::with_size(n);
        for (x, p) in map {
            f.parent[*x as usize] = *p;
        }
        f
    }

    fn elements(&self) -> impl Iterator<Item = u32> + '_ {
        (1..self.parent.len() as u32).filter(|x| self.parent[*x as usize] != NONE)
    }

    /// Root of every element; the caller guarantees acyclicity.
    fn roots(&self) -> Vec<u32> {
        let mut root = vec![NONE; self.parent.len()];
        let mut walk = Vec::new();
        for x in self.elements() {
            let mut cur = x;
            let r = loop {
                if root[cur as usize] != NONE {
                    break root[cur as usize];
                }
                walk.push(cur);
                let p = self.parent[cur as usize];
                if p == cur {
                    break cur;
                }
                cur = p;
            };
            for v in walk.drain(..) {
                root[v as usize] = r;
            }
        }
        root
    }
}

/// Whether two element labelings group the elements identically.
fn same_grouping(a: &[u32], b: &[u32]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut forward = vec![NONE; a.len()];
    let mut backward = vec![NONE; b.len()];
    for (&x, &y) in a.iter().zip(b) {
        if (x == NONE) != (y == NONE) {
            return false;
        }
        if x == NONE {
            continue;
        }
        let (x, y) = (x as usize, y as usize);
        if forward[x] == NONE {
            forward[x] = y as u32;
        }
        if backward[y] == NONE {
            backward[y] = x as u32;
        }
        if forward[x] as usize != y || backward[y] as usize != x {
            return false;
        }
    }
    true
}

/// Set label of every element, taken from the brute-force partition.
fn partition_labels(p: &Partition<u32>, n: u32) -> Vec<u32> {
    let mut labels = vec![NONE; n as usize + 1];
    for (i, set) in p.sets().iter().enumerate() {
        for x in set {
            labels[*x as usize] = i as u32;
        }
    }
    labels
}

struct Lane {
    session: UfSession,
    values: Vec<Value>,
    /// Element number by interned symbol number.
    by_sym: Vec<u32>,
    diverged: bool,
}

impl Lane {
    fn new(session: UfSession, n: u32) -> Self {
        let mut session = session;
        let values: Vec<Value> = (0..=n).map(|i| session.atom(&element_name(i))).collect();
        let mut by_sym = Vec::new();
        for (i, v) in values.iter().enumerate() {
            if let Value::Atom(sym) = v {
                let k = sym.0 as usize;
                if by_sym.len() <= k {
                    by_sym.resize(k + 1, NONE);
                }
                by_sym[k] = i as u32;
            }
        }
        Lane {
            session,
            values,
            by_sym,
            diverged: false,
        }
    }

    fn element(&self, v: Value) -> Option<u32> {
        match v {
            Value::Atom(sym) => self.by_sym.get(sym.0 as usize).copied().filter(|e| *e != NONE),
            Value::Int(_) => None,
        }
    }

    fn apply(&mut self, op: &Op<u32>) -> Result<Option<u32>, String> {
        let v = |x: &u32| self.values[*x as usize];
        let r = match op {
            Op::Make(x) => self.session.make(v(x)).map(|_| None),
            Op::Union(x, y) => self.session.union(v(x), v(y)).map(|_| None),
            Op::Find(x) => self.session.find(v(x)).map(Some),
        };
        match r {
            Ok(Some(root)) => self.element(root).map(Some).ok_or_else(|| "find returned a non-element".into()),
            Ok(None) => Ok(None),
            Err(e) => Err(e.to_string()),
        }
    }

    /// Parent forest and root ranks, decoded from the store.
    fn forest(&self, n: u32) -> Result<(Forest, Vec<Option<i64>>), String> {
        let map = self.session.check_forest().map_err(|e| e.to_string())?;
        let mut forest = Forest::with_size(n);
        let mut ranks = vec![None; n as usize + 1];
        for (x, node) in &map {
            let (Some(xi), Some(pi)) = (self.element(*x), self.element(node.parent)) else {
                return Err(format!("non-element in forest: {}", self.session.constant(*x)));
            };
            forest.parent[xi as usize] = pi;
            ranks[xi as usize] = node.rank;
        }
        Ok((forest, ranks))
    }
}

fn first_difference(chr: &Forest, oracle: &Forest) -> String {
    for (x, (p, q)) in chr.parent.iter().zip(&oracle.parent).enumerate().skip(1) {
        let x = x as u32;
        match (*p, *q) {
            (p, q) if p == q => {}
            (NONE, _) => return format!("{} is missing from CHR", element_name(x)),
            (_, NONE) => return format!("{} is missing from the oracle", element_name(x)),
            (p, q) => {
                return format!(
                    "{} has parent {} in CHR, {} in oracle",
                    element_name(x),
                    element_name(p),
                    element_name(q)
                )
            }
        }
    }
    "forests are equal".into()
}

/// Runs `ops` through both programs and both oracles in lock step.
pub fn check_sequence(ops: &[Op<u32>], fault: bool) -> SequenceReport {
    let n = ops.iter().flat_map(|o| o.elements()).max().unwrap_or(0);
    let rank_session = if fault {
        UfSession::with_source(Variant::Rank, &ufd_rank_swapped_links(), StoreConfig::default(), false)
            .expect("swapped program compiles")
    } else {
        UfSession::new(Variant::Rank)
    };
    let mut basic = Lane::new(UfSession::new(Variant::Basic), n);
    let mut rank = Lane::new(rank_session, n);
    let mut naive = NaiveUf::new();
    let mut opt = RankUf::new();
    let mut partition = Partition::new();
    let mut prev_ranks: Vec<u32> = vec![0; n as usize + 1];
    let mut report = SequenceReport {
        partition_ok: true,
        ..SequenceReport::default()
    };

    for (step, op) in ops.iter().enumerate() {
        let path = match op {
            Op::Find(x) => {
                let mut path = vec![*x];
                let mut cur = *x;
                while let Some(&p) = opt.parent(&cur).filter(|p| **p != cur) {
                    path.push(p);
                    cur = p;
                }
                path
            }
            _ => Vec::new(),
        };
        let (n0, o0) = (naive.find_steps(), opt.find_steps());
        let (Ok(naive_result), Ok(opt_result)) = (naive.apply(op), opt.apply(op)) else {
            report.invalid = true;
            return report;
        };
        partition.apply(op).expect("oracles accepted the op");
        let labels = partition_labels(&partition, n);
        let naive_delta = naive.find_steps() - n0;
        let opt_delta = opt.find_steps() - o0;
        let oracle_ranks: Vec<u32> = (0..=n).map(|x| opt.rank(&x).unwrap_or(0)).collect();
        report.steps = step + 1;

        let mut found: Vec<Divergence> = Vec::new();
        for (lane, variant) in [(&mut basic, Variant::Basic), (&mut rank, Variant::Rank)] {
            let mut fail = |kind, detail: String| {
                found.push(Divergence {
                    variant,
                    step,
                    kind,
                    detail,
                })
            };
            let result = match lane.apply(op) {
                Ok(r) => r,
                Err(e) => {
                    fail(DivergenceKind::Engine, format!("{} failed: {e}", OpText(op)));
                    lane.diverged = true;
                    continue;
                }
            };
            let (forest, chr_ranks) = match lane.forest(n) {
                Ok(f) => f,
                Err(e) => {
                    fail(DivergenceKind::Forest, e);
                    lane.diverged = true;
                    continue;
                }
            };
            let roots = forest.roots();
            if !same_grouping(&roots, &labels) {
                fail(DivergenceKind::Partition, format!("after {}", OpText(op)));
            }
            if lane.diverged {
                continue;
            }
            let (oracle_parents, oracle_result, oracle_delta) = match variant {
                Variant::Basic => (naive.parents(), naive_result, naive_delta),
                Variant::Rank => (opt.parents(), opt_result, opt_delta),
            };
            let oracle_forest = Forest::from_map(n, &oracle_parents);
            let before = found.len();
            let mut fail = |kind, detail: String| {
                found.push(Divergence {
                    variant,
                    step,
                    kind,
                    detail,
                })
            };
            if forest != oracle_forest {
                fail(DivergenceKind::Structure, first_difference(&forest, &oracle_forest));
            }
            if result != oracle_result {
                fail(DivergenceKind::FindResult, format!("{} gave {result:?}, oracle {oracle_result:?}", OpText(op)));
            }
            let delta = lane.session.last_op().find_steps;
            if delta != oracle_delta {
                fail(DivergenceKind::FindSteps, format!("{} took {delta} steps, oracle {oracle_delta}", OpText(op)));
            }
            let c = lane.session.engine().counters();
            if c.operation_violations != 0 {
                fail(DivergenceKind::Invariant, format!("{} operation constraints alive at once", c.operation_violations));
            }
            if c.binds as usize != lane.session.engine().bindings().bound_count() {
                fail(DivergenceKind::Invariant, "a variable was bound twice".into());
            }
            if variant == Variant::Rank {
                for x in forest.elements() {
                    if let Some(r) = chr_ranks[x as usize] {
                        if r != i64::from(oracle_ranks[x as usize]) {
                            fail(
                                DivergenceKind::Rank,
                                format!("root {} has rank {r}, oracle {}", element_name(x), oracle_ranks[x as usize]),
                            );
                            break;
                        }
                    }
                }
                if let Some(detail) = rank_invariants(&forest, &roots, &chr_ranks, &oracle_ranks, &prev_ranks) {
                    fail(DivergenceKind::Invariant, detail);
                }
                if let Some(root) = result {
                    if let Some(x) = path.iter().find(|x| forest.parent[**x as usize] != root) {
                        fail(DivergenceKind::Invariant, format!("{} not compressed to {}", element_name(*x), element_name(root)));
                    }
                }
            }
            if found.len() > before {
                lane.diverged = true;
            }
            if matches!(op, Op::Find(_)) {
                report.finds_checked += 1;
            }
        }
        prev_ranks = oracle_ranks;
        if found.iter().any(|d| d.kind == DivergenceKind::Partition) {
            report.partition_ok = false;
        }
        if report.first.is_none() {
            report.first = found.into_iter().next();
        }
        if basic.diverged && rank.diverged && !report.partition_ok {
            break;
        }
    }
    report
}

/// Rank checks: `2^rank <= size` at roots, ranks strictly increase toward
/// the root, and no rank ever decreases.
fn rank_invariants(
    forest: &Forest,
    roots: &[u32],
    chr_ranks: &[Option<i64>],
    ranks: &[u32],
    prev: &[u32],
) -> Option<String> {
    let mut size = vec![0u64; roots.len()];
    for x in forest.elements() {
        size[roots[x as usize] as usize] += 1;
    }
    for x in forest.elements() {
        let Some(rank) = chr_ranks[x as usize] else {
            continue;
        };
        let s = size[x as usize];
        if !(0..63).contains(&rank) || (1u64 << rank) > s {
            return Some(format!("root {} has rank {rank} but size {s}", element_name(x)));
        }
    }
    for x in forest.elements() {
        let p = forest.parent[x as usize];
        if x != p && ranks[x as usize] >= ranks[p as usize] {
            return Some(format!("rank does not increase from {} to {}", element_name(x), element_name(p)));
        }
    }
    if let Some(x) = (0..ranks.len()).find(|&x| ranks[x] < prev[x]) {
        return Some(format!("rank of {} decreased", element_name(x as u32)));
    }
    None
}

/// Shortens a failing sequence: cuts it after the first divergence, then
/// greedily drops single operations while the same kind of divergence
/// persists, re-cutting after each success. Gives up after `budget` checks.
pub fn shrink(ops: &[Op<u32>], fault: bool, budget: usize) -> Vec<Op<u32>> {
    let report = check_sequence(ops, fault);
    let Some(target) = report.first else {
        return ops.to_vec();
    };
    let kind = target.kind;
    let mut current = ops[..=target.step].to_vec();
    let mut checks = 0;
    let mut i = current.len();
    while i > 0 && checks < budget {
        i -= 1;
        let mut candidate = current.clone();
        candidate.remove(i);
        checks += 1;
        let r = check_sequence(&candidate, fault);
        if r.invalid {
            continue;
        }
        if let Some(d) = r.first.filter(|d| d.kind == kind) {
            candidate.truncate(d.step + 1);
            i = i.min(candidate.len());
            current = candidate;
        }
    }
    current
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_runs_pass() {
        for seed in 0..5 {
            let r = verify_seed(VerifyConfig { n: 32, ops: None, fault: false }, seed).unwrap();
            assert!(r.passed(), "{:?}", r.result.first);
            assert_eq!(r.result.steps, 96);
            assert_eq!(r.result.finds_checked, 64);
        }
        let r = verify_seed(VerifyConfig { n: 16, ops: Some(200), fault: false }, 3).unwrap();
        assert!(r.passed(), "{:?}", r.result.first);
    }

    #[test]
    fn swapped_links_change_structure_not_sets() {
        let r = verify_seed(VerifyConfig { n: 32, ops: None, fault: true }, 1).unwrap();
        let first = r.result.first.clone().expect("fault detected");
        assert_eq!(first.variant, Variant::Rank);
        assert!(matches!(first.kind, DivergenceKind::Structure | DivergenceKind::FindResult), "{first}");
        assert!(r.result.partition_ok);
        assert!(!r.passed());
    }

    #[test]
    fn shrinking_finds_a_tiny_counterexample() {
        let r = verify_seed(VerifyConfig { n: 32, ops: None, fault: true }, 1).unwrap();
        let small = shrink(&r.ops, true, 500);
        let again = check_sequence(&small, true);
        assert!(again.first.is_some());
        assert_eq!(small.iter().filter(|o| matches!(o, Op::Union(..))).count(), 1, "{small:?}");
        assert_eq!(small.len(), 3, "{small:?}");
    }

    #[test]
    fn malformed_sequences_are_flagged() {
        let r = check_sequence(&[Op::Make(1), Op::Find(2)], false);
        assert!(r.invalid);
        let r = check_sequence(&[Op::Make(1), Op::Make(1)], false);
        assert!(r.invalid);
    }

    #[test]
    fn passing_sequences_do_not_shrink() {
        let ops = [Op::Make(1), Op::Make(2), Op::Union(1, 2)];
        assert_eq!(shrink(&ops, false, 10), ops.to_vec());
    }
}
