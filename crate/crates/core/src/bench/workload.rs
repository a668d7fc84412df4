//! Seeded operation sequences over elements `e1..eN`.

use std::fmt;

use thiserror::Error;

use crate::oracle::Op;

/// splitmix64: a 64-bit state advanced by a fixed odd constant, with an
/// xor-shift/multiply finalizer.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// An element index in `1..=n`.
    pub fn element(&mut self, n: usize) -> u32 {
        (self.next_u64() % n as u64) as u32 + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkloadKind {
    /// N makes, N unions on random pairs, N finds on random elements.
    Random { seed: u64 },
    /// N makes, random union and find operations (equally likely), interleaved.
    Mixed { seed: u64, ops: usize },
    /// N makes, then equal-size trees merged pairwise, then optionally N
    /// finds on random elements.
    Contrived { find_seed: Option<u64> },
}

impl WorkloadKind {
    pub fn label(&self) -> &'static str {
        match self {
            WorkloadKind::Random { .. } => "random",
            WorkloadKind::Mixed { .. } => "mixed",
            WorkloadKind::Contrived { .. } => "contrived",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkloadSpec {
    pub kind: WorkloadKind,
    pub n: usize,
    pub ops: Vec<Op<u32>>,
}

impl WorkloadSpec {
    /// Total operation count, makes included.
    pub fn m(&self) -> usize {
        self.ops.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorkloadError {
    #[error("a workload needs at least one element")]
    Empty,
    #[error("the contrived workload needs a power of two elements, got {0}")]
    NotPowerOfTwo(usize),
}

pub fn element_name(i: u32) -> String {
    format!("e{i}")
}

/// One op per line: `make(e1)`, `union(e1,e2)`, `find(e3)`.
pub struct OpText<'a>(pub &'a Op<u32>);

impl fmt::Display for OpText<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Op::Make(x) => write!(f, "make(e{x})"),
            Op::Union(x, y) => write!(f, "union(e{x},e{y})"),
            Op::Find(x) => write!(f, "find(e{x})"),
        }
    }
}

/// Inverse of [`OpText`].
pub fn parse_op(line: &str) -> Option<Op<u32>> {
    let line = line.trim();
    let (name, rest) = line.split_once('(')?;
    let args: Vec<u32> = rest
        .strip_suffix(')')?
        .split(',')
        .map(|a| a.trim().strip_prefix('e')?.parse().ok())
        .collect::<Option<_>>()?;
    match (name, args.as_slice()) {
        ("make", [x]) => Some(Op::Make(*x)),
        ("union", [x, y]) => Some(Op::Union(*x, *y)),
        ("find", [x]) => Some(Op::Find(*x)),
        _ => None,
    }
}

fn makes(n: usize) -> Vec<Op<u32>> {
    (1..=n as u32).map(Op::Make).collect()
}

pub fn gen_random_workload(n: usize, seed: u64) -> Result<WorkloadSpec, WorkloadError> {
    if n == 0 {
        return Err(WorkloadError::Empty);
    }
    let mut rng = SplitMix64::new(seed);
    let mut ops = makes(n);
    ops.reserve(2 * n);
    for _ in 0..n {
        let x = rng.element(n);
        let y = rng.element(n);
        ops.push(Op::Union(x, y));
    }
    for _ in 0..n {
        ops.push(Op::Find(rng.element(n)));
    }
    Ok(WorkloadSpec {
        kind: WorkloadKind::Random { seed },
        n,
        ops,
    })
}

pub fn gen_mixed_workload(n: usize, seed: u64, count: usize) -> Result<WorkloadSpec, WorkloadError> {
    if n == 0 {
        return Err(WorkloadError::Empty);
    }
    let mut rng = SplitMix64::new(seed);
    let mut ops = makes(n);
    for _ in 0..count {
        if rng.next_u64() & 1 == 0 {
            let x = rng.element(n);
            let y = rng.element(n);
            ops.push(Op::Union(x, y));
        } else {
            ops.push(Op::Find(rng.element(n)));
        }
    }
    Ok(WorkloadSpec {
        kind: WorkloadKind::Mixed { seed, ops: count },
        n,
        ops,
    })
}

/// In round `r = 1..=log2 N`, unions `e_i` with `e_{i + 2^(r-1)}` for every
/// `i ≡ 1 (mod 2^r)`: N-1 unions in all.
pub fn gen_contrived_workload(n: usize, find_seed: Option<u64>) -> Result<WorkloadSpec, WorkloadError> {
    if n == 0 {
        return Err(WorkloadError::Empty);
    }
    if !n.is_power_of_two() {
        return Err(WorkloadError::NotPowerOfTwo(n));
    }
    let mut ops = makes(n);
    let mut half = 1;
    while half < n {
        let step = 2 * half;
        for i in (1..=n).step_by(step) {
            ops.push(Op::Union(i as u32, (i + half) as u32));
        }
        half = step;
    }
    if let Some(seed) = find_seed {
        let mut rng = SplitMix64::new(seed);
        for _ in 0..n {
            ops.push(Op::Find(rng.element(n)));
        }
    }
    Ok(WorkloadSpec {
        kind: WorkloadKind::Contrived { find_seed },
        n,
        ops,
    })
}
