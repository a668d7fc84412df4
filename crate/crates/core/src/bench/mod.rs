//! Workloads, per-run metrics, and scaling reports over CHR sessions and
//! the imperative oracles.

mod workload;
pub mod verify;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io;
use std::time::Instant;

use thiserror::Error;

use crate::oracle::{bf_partition, roots, NaiveUf, Op, OracleError, RankUf};
use crate::programs::{ForestError, SessionError, UfSession, Variant};
use crate::store::{StoreConfig, StoreMode};
use crate::term::Value;

pub use workload::{
    element_name, gen_contrived_workload, gen_mixed_workload, gen_random_workload, parse_op, OpText, SplitMix64,
    WorkloadError, WorkloadKind, WorkloadSpec,
};

/// Largest N for which runs are checked against the brute-force partition.
pub const PARTITION_CHECK_LIMIT: usize = 512;

pub const CSV_HEADER: [&str; 9] = ["variant", "workload", "N", "M", "find_steps", "firings", "wakes", "probes", "wall_ns"];

/// How the constraint store is sized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StoreChoice {
    /// Tables allocated up front, large enough never to grow. `None` sizes
    /// them from the workload.
    Presized(Option<usize>),
    #[default]
    Doubling,
    Poor,
}

impl StoreChoice {
    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "presized" => Some(StoreChoice::Presized(None)),
            "doubling" => Some(StoreChoice::Doubling),
            "poor" => Some(StoreChoice::Poor),
            _ => None,
        }
    }

    pub fn config(self, n: usize) -> StoreConfig {
        match self {
            StoreChoice::Presized(cap) => StoreConfig {
                mode: StoreMode::Indexed,
                presize: Some(cap.unwrap_or(4 * n)),
            },
            StoreChoice::Doubling => StoreConfig::default(),
            StoreChoice::Poor => StoreConfig {
                mode: StoreMode::Poor,
                presize: None,
            },
        }
    }
}

impl fmt::Display for StoreChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StoreChoice::Presized(_) => "presized",
            StoreChoice::Doubling => "doubling",
            StoreChoice::Poor => "poor",
        })
    }
}

/// What executes a workload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Chr(Variant, StoreChoice),
    NaiveOracle,
    RankOracle,
}

impl Target {
    pub fn label(&self) -> String {
        match self {
            Target::Chr(v, _) => v.to_string(),
            Target::NaiveOracle => "naive-oracle".to_string(),
            Target::RankOracle => "rank-oracle".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Metrics {
    pub target: String,
    pub workload: &'static str,
    pub n: usize,
    pub m: usize,
    /// `findNode` firings, or parent edges followed by an oracle.
    pub find_steps: u64,
    pub firings: u64,
    pub rule_firings: Vec<(String, u64)>,
    pub wakes: u64,
    pub probes: u64,
    pub inserts: u64,
    pub deletes: u64,
    pub wall_ns: u64,
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error("oracle: {0}")]
    Oracle(String),
    #[error("final partition differs from the brute-force partition")]
    Partition,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl From<OracleError<u32>> for BenchError {
    fn from(e: OracleError<u32>) -> Self {
        BenchError::Oracle(e.to_string())
    }
}

/// Runs `spec` on a fresh session or oracle. For N up to
/// [`PARTITION_CHECK_LIMIT`], the final sets are compared with
/// [`bf_partition`].
pub fn run_workload(target: Target, spec: &WorkloadSpec) -> Result<Metrics, BenchError> {
    let check = spec.n <= PARTITION_CHECK_LIMIT;
    let mut metrics = Metrics {
        target: target.label(),
        workload: spec.kind.label(),
        n: spec.n,
        m: spec.m(),
        find_steps: 0,
        firings: 0,
        rule_firings: Vec::new(),
        wakes: 0,
        probes: 0,
        inserts: 0,
        deletes: 0,
        wall_ns: 0,
    };
    let reps: Option<BTreeMap<u32, u32>> = match target {
        Target::Chr(variant, store) => {
            let mut session = UfSession::with_store(variant, store.config(spec.n));
            let values: Vec<Value> = (0..=spec.n as u32).map(|i| session.atom(&element_name(i))).collect();
            let start = Instant::now();
            for op in &spec.ops {
                match *op {
                    Op::Make(x) => session.make(values[x as usize])?,
                    Op::Union(x, y) => session.union(values[x as usize], values[y as usize])?,
                    Op::Find(x) => {
                        session.find(values[x as usize])?;
                    }
                }
            }
            metrics.wall_ns = start.elapsed().as_nanos() as u64;
            let c = session.engine().counters();
            metrics.find_steps = session.find_steps();
            metrics.firings = c.total_firings();
            metrics.rule_firings = session
                .engine()
                .program()
                .rules()
                .iter()
                .map(|r| r.name.clone())
                .zip(c.rule_firings.iter().copied())
                .collect();
            metrics.wakes = c.wake_events;
            metrics.probes = c.partner_probes;
            metrics.inserts = c.inserts;
            metrics.deletes = c.deletes;
            if check {
                let index: HashMap<Value, u32> = values.iter().enumerate().map(|(i, v)| (*v, i as u32)).collect();
                let forest = session.check_forest()?;
                let parents = forest.iter().map(|(x, node)| (index[x], index[&node.parent])).collect();
                Some(representatives(&parents)?)
            } else {
                None
            }
        }
        Target::NaiveOracle => {
            let mut uf = NaiveUf::new();
            let start = Instant::now();
            for op in &spec.ops {
                uf.apply(op)?;
            }
            metrics.wall_ns = start.elapsed().as_nanos() as u64;
            metrics.find_steps = uf.find_steps();
            check.then(|| representatives(&uf.parents())).transpose()?
        }
        Target::RankOracle => {
            let mut uf = RankUf::new();
            let start = Instant::now();
            for op in &spec.ops {
                uf.apply(op)?;
            }
            metrics.wall_ns = start.elapsed().as_nanos() as u64;
            metrics.find_steps = uf.find_steps();
            check.then(|| representatives(&uf.parents())).transpose()?
        }
    };
    if let Some(reps) = reps {
        if !bf_partition(&spec.ops)?.matches_representatives(&reps) {
            return Err(BenchError::Partition);
        }
    }
    Ok(metrics)
}

fn representatives(parents: &BTreeMap<u32, u32>) -> Result<BTreeMap<u32, u32>, BenchError> {
    roots(parents).ok_or_else(|| BenchError::Oracle("parent map is not a forest".into()))
}

/// Which workload a report runs at each size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkloadChoice {
    Random,
    /// `with_finds` appends N seeded random finds after the merge schedule.
    Contrived { with_finds: bool },
}

impl WorkloadChoice {
    /// The workload for one (size, repetition) cell. Repetition `r` uses
    /// seed `base_seed + r`.
    pub fn spec(self, n: usize, base_seed: u64, repetition: usize) -> Result<WorkloadSpec, WorkloadError> {
        let seed = base_seed.wrapping_add(repetition as u64);
        match self {
            WorkloadChoice::Random => gen_random_workload(n, seed),
            WorkloadChoice::Contrived { with_finds } => gen_contrived_workload(n, with_finds.then_some(seed)),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            WorkloadChoice::Random => "random",
            WorkloadChoice::Contrived { .. } => "contrived",
        }
    }
}

/// Per-size means over the repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub n: usize,
    pub m: f64,
    pub find_steps: f64,
    pub firings: f64,
    pub wakes: f64,
    pub probes: f64,
    pub wall_ns: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    FindSteps,
    Firings,
    Wakes,
    Probes,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::FindSteps, Metric::Firings, Metric::Wakes, Metric::Probes];

    pub fn name(self) -> &'static str {
        match self {
            Metric::FindSteps => "find_steps",
            Metric::Firings => "firings",
            Metric::Wakes => "wakes",
            Metric::Probes => "probes",
        }
    }
}

impl ReportRow {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::FindSteps => self.find_steps,
            Metric::Firings => self.firings,
            Metric::Wakes => self.wakes,
            Metric::Probes => self.probes,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub target: String,
    pub workload: &'static str,
    pub rows: Vec<ReportRow>,
}

/// Consecutive-size ratio `metric(N_i) / metric(N_{i-1})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ratio {
    pub from: usize,
    pub to: usize,
    pub value: f64,
}

impl ScalingReport {
    /// Ratios between consecutive rows. A zero denominator gives `NaN`.
    pub fn ratios(&self, metric: Metric) -> Vec<Ratio> {
        self.rows
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0].get(metric), w[1].get(metric));
                Ratio {
                    from: w[0].n,
                    to: w[1].n,
                    value: if a == 0.0 { f64::NAN } else { b / a },
                }
            })
            .collect()
    }

    /// Writes the header and one row per size. `wall_ns` is written as 0
    /// unless `timing` is set, so that reports are reproducible.
    pub fn write_csv<W: io::Write>(&self, out: W, timing: bool) -> Result<(), BenchError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            let wall = if timing { r.wall_ns.round() } else { 0.0 };
            w.write_record([
                self.target.clone(),
                self.workload.to_string(),
                r.n.to_string(),
                num(r.m),
                num(r.find_steps),
                num(r.firings),
                num(r.wakes),
                num(r.probes),
                num(wall),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Human-readable table with a ratio column per counter.
    pub fn table(&self) -> String {
        let mut s = format!(
            "{:>8} {:>9} {:>12} {:>12} {:>10} {:>14}  {:>7} {:>7} {:>7} {:>7}\n",
            "N", "M", "find_steps", "firings", "wakes", "probes", "x_find", "x_fire", "x_wake", "x_probe"
        );
        let ratios: Vec<Vec<Ratio>> = Metric::ALL.iter().map(|m| self.ratios(*m)).collect();
        for (i, r) in self.rows.iter().enumerate() {
            s += &format!(
                "{:>8} {:>9} {:>12} {:>12} {:>10} {:>14}",
                r.n,
                num(r.m),
                num(r.find_steps),
                num(r.firings),
                num(r.wakes),
                num(r.probes)
            );
            for col in &ratios {
                match i.checked_sub(1).map(|j| col[j].value) {
                    Some(v) if v.is_finite() => s += &format!(" {v:>7.3}"),
                    Some(_) => s += &format!(" {:>7}", "-"),
                    None => s += &format!(" {:>7}", ""),
                }
            }
            s = s.trim_end().to_string();
            s.push('\n');
        }
        s
    }
}

/// Integral means print as integers, others with two decimals.
fn num(x: f64) -> String {
    if x.fract() == 0.0 {
        format!("{x:.0}")
    } else {
        format!("{x:.2}")
    }
}

/// Runs `workload` at each size, `repetitions` times, and averages.
pub fn scaling_report(
    target: Target,
    workload: WorkloadChoice,
    sizes: &[usize],
    repetitions: usize,
    base_seed: u64,
) -> Result<ScalingReport, BenchError> {
    let reps = repetitions.max(1);
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let mut sum = [0f64; 6];
        for r in 0..reps {
            let spec = workload.spec(n, base_seed, r)?;
            let m = run_workload(target, &spec)?;
            for (acc, v) in sum
                .iter_mut()
                .zip([m.m as u64, m.find_steps, m.firings, m.wakes, m.probes, m.wall_ns])
            {
                *acc += v as f64;
            }
        }
        let mean = |i: usize| sum[i] / reps as f64;
        rows.push(ReportRow {
            n,
            m: mean(0),
            find_steps: mean(1),
            firings: mean(2),
            wakes: mean(3),
            probes: mean(4),
            wall_ns: mean(5),
        });
    }
    Ok(ScalingReport {
        target: target.label(),
        workload: workload.label(),
        rows,
    })
}
