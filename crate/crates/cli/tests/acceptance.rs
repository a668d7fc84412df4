//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero on any failure.

use std::fs;
use std::process::Command;
use std::time::{Duration, Instant};

use chr_uf::bench::verify::{verify_seed, DivergenceKind, SeedReport, VerifyConfig};
use chr_uf::bench::{scaling_report, Metric, ScalingReport, StoreChoice, Target, WorkloadChoice};
use chr_uf::{parse_program, Variant};

const BASIC_RULES: &[&str] = &["make", "union", "findNode", "findRoot", "linkEq", "link"];
const RANK_RULES: &[&str] = &["make", "union", "findNode", "findRoot", "linkEq", "linkLeft", "linkRight"];
const PARSE_BUDGET: Duration = Duration::from_secs(1);

const VERIFY_N: usize = 256;
const VERIFY_SEEDS: u64 = 100;
const VERIFY_BUDGET: Duration = Duration::from_secs(60);

const SCALING_SIZES: [usize; 6] = [1 << 10, 1 << 11, 1 << 12, 1 << 13, 1 << 14, 1 << 15];
const SCALING_REPS: usize = 3;
const SCALING_SEED: u64 = 1;
const RANK_RATIO_MAX: f64 = 2.10;
const BASIC_RATIO_MIN: f64 = 2.05;
const SCALING_BUDGET: Duration = Duration::from_secs(300);

const POOR_SIZES: [usize; 3] = [1 << 11, 1 << 12, 1 << 13];
const POOR_FROM: usize = 4096;
const POOR_RATIO_MIN: f64 = 2.5;
const INDEXED_SIZES: [usize; 5] = [1 << 11, 1 << 12, 1 << 13, 1 << 14, 1 << 15];
const INDEXED_RATIO_MAX: f64 = 2.2;

struct Suite {
    failed: usize,
}

impl Suite {
    fn report(&mut self, id: u32, name: &str, result: Result<String, String>) {
        match result {
            Ok(detail) => println!("PASS {id} {name}: {detail}"),
            Err(detail) => {
                self.failed += 1;
                println!("FAIL {id} {name}: {detail}");
            }
        }
    }
}

fn rule_names(variant: Variant) -> Result<Vec<String>, String> {
    let program = parse_program(variant.source()).map_err(|e| format!("{variant}: {e}"))?;
    let printed = program.to_string();
    if printed != variant.source() {
        return Err(format!("{variant}: pretty-printed text differs from the embedded source"));
    }
    let reparsed = parse_program(&printed).map_err(|e| format!("{variant} reparse: {e}"))?;
    if reparsed != program {
        return Err(format!("{variant}: round trip changed the rule IR"));
    }
    Ok(program.rules.iter().map(|r| r.display_name()).collect())
}

fn criterion_programs() -> Result<String, String> {
    let start = Instant::now();
    for (variant, expected) in [(Variant::Basic, BASIC_RULES), (Variant::Rank, RANK_RULES)] {
        let names = rule_names(variant)?;
        if names != expected {
            return Err(format!("{variant}: rules {names:?}, expected {expected:?}"));
        }
    }
    let elapsed = start.elapsed();
    if elapsed > PARSE_BUDGET {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!(
        "basic {} rules, rank {} rules, round trip exact, {elapsed:.2?}",
        BASIC_RULES.len(),
        RANK_RULES.len()
    ))
}

struct VerifyRun {
    reports: Vec<SeedReport>,
    elapsed: Duration,
}

fn verify_run() -> Result<VerifyRun, String> {
    let cfg = VerifyConfig { n: VERIFY_N, ops: None, fault: false };
    let start = Instant::now();
    let reports = (0..VERIFY_SEEDS)
        .map(|seed| verify_seed(cfg, seed).map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(VerifyRun { reports, elapsed: start.elapsed() })
}

fn failures(run: &VerifyRun, kinds: &[DivergenceKind]) -> Vec<String> {
    run.reports
        .iter()
        .filter_map(|r| match &r.result.first {
            Some(d) if kinds.contains(&d.kind) => Some(format!("seed {}: {d}", r.seed)),
            _ => None,
        })
        .collect()
}

fn summarize(bad: Vec<String>, ok: String) -> Result<String, String> {
    match bad.first() {
        None => Ok(ok),
        Some(first) => Err(format!("{} seed(s) failed, first {first}", bad.len())),
    }
}

fn criterion_structure(run: &VerifyRun) -> Result<String, String> {
    use DivergenceKind::*;
    let mut bad = failures(run, &[Structure, Rank, Forest, Engine, FindResult]);
    bad.extend(run.reports.iter().filter(|r| r.result.invalid).map(|r| format!("seed {}: invalid sequence", r.seed)));
    if run.elapsed > VERIFY_BUDGET {
        bad.push(format!("took {:.1?}", run.elapsed));
    }
    let steps: usize = run.reports.iter().map(|r| r.result.steps).sum();
    summarize(
        bad,
        format!("{VERIFY_SEEDS} seeds, N={VERIFY_N}, {steps} ops, parents/ranks/finds equal, {:.1?}", run.elapsed),
    )
}

fn criterion_partition(run: &VerifyRun) -> Result<String, String> {
    let mut bad = failures(run, &[DivergenceKind::Partition]);
    bad.extend(run.reports.iter().filter(|r| !r.result.partition_ok).map(|r| format!("seed {}: partition", r.seed)));
    summarize(bad, "same-set relation matches the brute-force partition after every op".into())
}

fn criterion_find_steps(run: &VerifyRun) -> Result<String, String> {
    let mut bad = failures(run, &[DivergenceKind::FindSteps]);
    let finds: usize = run.reports.iter().map(|r| r.result.finds_checked).sum();
    if finds == 0 {
        bad.push("no finds compared".into());
    }
    summarize(bad, format!("{finds} finds with equal step counts"))
}

fn criterion_invariants(run: &VerifyRun) -> Result<String, String> {
    summarize(
        failures(run, &[DivergenceKind::Invariant]),
        "rank bounds, monotone chains, non-decreasing ranks hold".into(),
    )
}

fn ratios(report: &ScalingReport, metric: Metric) -> Vec<f64> {
    report.ratios(metric).iter().map(|r| r.value).collect()
}

fn fmt_ratios(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(", ")
}

fn criterion_scaling() -> Result<String, String> {
    let start = Instant::now();
    let workload = WorkloadChoice::Contrived { with_finds: true };
    let report = |target| {
        scaling_report(target, workload, &SCALING_SIZES, SCALING_REPS, SCALING_SEED).map_err(|e| e.to_string())
    };
    let rank = report(Target::Chr(Variant::Rank, StoreChoice::Doubling))?;
    let basic = report(Target::Chr(Variant::Basic, StoreChoice::Doubling))?;
    let rank_oracle = report(Target::RankOracle)?;
    let naive_oracle = report(Target::NaiveOracle)?;
    let elapsed = start.elapsed();

    let (r, b) = (ratios(&rank, Metric::FindSteps), ratios(&basic, Metric::FindSteps));
    let mut problems = Vec::new();
    if !r.iter().all(|v| *v <= RANK_RATIO_MAX) {
        problems.push(format!("rank ratios [{}] exceed {RANK_RATIO_MAX}", fmt_ratios(&r)));
    }
    if !b.iter().all(|v| *v >= BASIC_RATIO_MIN) {
        problems.push(format!("basic ratios [{}] below {BASIC_RATIO_MIN}", fmt_ratios(&b)));
    }
    let steps = |rep: &ScalingReport| rep.rows.iter().map(|row| row.find_steps).collect::<Vec<_>>();
    if steps(&rank) != steps(&rank_oracle) || steps(&basic) != steps(&naive_oracle) {
        problems.push("CHR find steps differ from the oracles".into());
    }
    if elapsed > SCALING_BUDGET {
        problems.push(format!("took {elapsed:.1?}"));
    }
    if problems.is_empty() {
        Ok(format!("rank [{}] <= {RANK_RATIO_MAX}; basic [{}] >= {BASIC_RATIO_MIN}", fmt_ratios(&r), fmt_ratios(&b)))
    } else {
        Err(problems.join("; "))
    }
}

fn criterion_store() -> Result<String, String> {
    let workload = WorkloadChoice::Contrived { with_finds: true };
    let poor = scaling_report(Target::Chr(Variant::Rank, StoreChoice::Poor), workload, &POOR_SIZES, 1, SCALING_SEED)
        .map_err(|e| e.to_string())?;
    let indexed =
        scaling_report(Target::Chr(Variant::Rank, StoreChoice::Doubling), workload, &INDEXED_SIZES, 1, SCALING_SEED)
            .map_err(|e| e.to_string())?;
    let p: Vec<f64> =
        poor.ratios(Metric::Probes).iter().filter(|r| r.to >= POOR_FROM).map(|r| r.value).collect();
    let d = ratios(&indexed, Metric::Probes);
    let mut problems = Vec::new();
    if p.is_empty() || !p.iter().all(|v| *v > POOR_RATIO_MIN) {
        problems.push(format!("poor probe ratios [{}] not above {POOR_RATIO_MIN}", fmt_ratios(&p)));
    }
    if !d.iter().all(|v| *v <= INDEXED_RATIO_MAX) {
        problems.push(format!("indexed probe ratios [{}] exceed {INDEXED_RATIO_MAX}", fmt_ratios(&d)));
    }
    if problems.is_empty() {
        Ok(format!("poor [{}] > {POOR_RATIO_MIN}; indexed [{}] <= {INDEXED_RATIO_MAX}", fmt_ratios(&p), fmt_ratios(&d)))
    } else {
        Err(problems.join("; "))
    }
}

fn cli_outputs(dir: &std::path::Path, tag: &str) -> Result<Vec<Vec<u8>>, String> {
    let csv = dir.join(format!("bench-{tag}.csv"));
    let invocations: Vec<Vec<String>> = vec![
        ["run", "--trace", "--variant", "rank", "--query", "make(a), make(b), make(c), union(a,b), union(c,a), find(c,R)."]
            .map(String::from)
            .to_vec(),
        ["verify", "--n", "32", "--seeds", "5"].map(String::from).to_vec(),
        vec![
            "bench".into(),
            "--variant".into(),
            "rank".into(),
            "--sizes".into(),
            "256,512,1024".into(),
            "--csv".into(),
            csv.display().to_string(),
        ],
    ];
    let mut outputs = Vec::new();
    for args in invocations {
        let out = Command::new(env!("CARGO_BIN_EXE_chr-uf"))
            .args(&args)
            .env_remove("CHR_STORE_PRESIZE")
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("`{}` exited with {}", args.join(" "), out.status));
        }
        outputs.push(out.stdout);
    }
    outputs.push(fs::read(&csv).map_err(|e| e.to_string())?);
    Ok(outputs)
}

fn criterion_determinism() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = cli_outputs(dir.path(), "a")?;
    let second = cli_outputs(dir.path(), "b")?;
    let labels = ["run --trace stdout", "verify stdout", "bench stdout", "bench csv"];
    let differing: Vec<&str> =
        labels.iter().zip(first.iter().zip(&second)).filter(|(_, (a, b))| a != b).map(|(l, _)| *l).collect();
    if differing.is_empty() {
        Ok(format!("{} outputs byte-identical across two runs", labels.len()))
    } else {
        Err(format!("differs: {}", differing.join(", ")))
    }
}

fn main() {
    let mut suite = Suite { failed: 0 };
    suite.report(1, "program rules and round trip", criterion_programs());
    match verify_run() {
        Ok(run) => {
            suite.report(2, "structure matches the oracles", criterion_structure(&run));
            suite.report(3, "partition matches brute force", criterion_partition(&run));
            suite.report(4, "find step counts match", criterion_find_steps(&run));
            suite.report(5, "rank invariants", criterion_invariants(&run));
        }
        Err(e) => {
            for (id, name) in [(2, "structure"), (3, "partition"), (4, "find steps"), (5, "rank invariants")] {
                suite.report(id, name, Err(e.clone()));
            }
        }
    }
    suite.report(6, "find step scaling", criterion_scaling());
    suite.report(7, "store indexing scaling", criterion_store());
    suite.report(8, "deterministic CLI output", criterion_determinism());
    println!("{} of 8 criteria failed", suite.failed);
    if suite.failed > 0 {
        std::process::exit(1);
    }
}
