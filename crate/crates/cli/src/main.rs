use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use chr_uf::bench::verify::{shrink, verify_seed, VerifyConfig};
use chr_uf::bench::{scaling_report, Metric, OpText, StoreChoice, Target, WorkloadChoice};
use chr_uf::engine::RunError;
use chr_uf::{run, EngineOptions, Outcome, Variant};

#[derive(Parser)]
#[command(name = "chr-uf", version, about = "Run, verify and benchmark union-find in Constraint Handling Rules")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a query and print the final store and bindings
    Run(RunArgs),
    /// Run a query and print only the transition trace
    Trace(RunArgs),
    /// Check both programs against the imperative oracles on random workloads
    Verify(VerifyArgs),
    /// Measure how counters scale with the number of elements
    Bench(BenchArgs),
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["variant", "program"])))]
#[command(group(clap::ArgGroup::new("goal").required(true).args(["query", "query_file"])))]
struct RunArgs {
    /// Bundled program
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    /// Program file in the CHR subset
    #[arg(long)]
    program: Option<PathBuf>,
    /// Query text, e.g. "make(a), make(b), union(a,b)."
    #[arg(long)]
    query: Option<String>,
    #[arg(long)]
    query_file: Option<PathBuf>,
    /// Print one line per transition before the result
    #[arg(long)]
    trace: bool,
    /// Print the store with constraint ids instead of the sorted snapshot
    #[arg(long)]
    dump: bool,
    #[arg(long, value_enum, default_value_t = StoreArg::Doubling)]
    store: StoreArg,
}

#[derive(Args)]
struct VerifyArgs {
    /// Number of elements
    #[arg(long, default_value_t = 256, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    /// Number of seeds to run
    #[arg(long, default_value_t = 100)]
    seeds: u64,
    /// First seed
    #[arg(long, default_value_t = 0)]
    seed_start: u64,
    /// Interleaved union/find operations per seed, instead of the standard
    /// workload of N unions followed by N finds
    #[arg(long)]
    ops: Option<usize>,
    #[arg(long, hide = true)]
    inject_swapped_links: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum)]
    variant: BenchTarget,
    #[arg(long, value_enum, default_value_t = WorkloadArg::Contrived)]
    workload: WorkloadArg,
    /// Comma-separated element counts
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    repetitions: usize,
    /// Base seed; repetition r uses seed + r
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Store sizing; defaults to presized when CHR_STORE_PRESIZE is set
    #[arg(long, value_enum)]
    store: Option<StoreArg>,
    /// Write the report as CSV
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Record wall-clock time (makes output vary between runs)
    #[arg(long)]
    timing: bool,
    /// Contrived workload without the trailing random finds
    #[arg(long)]
    no_finds: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Basic,
    Rank,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Basic => Variant::Basic,
            VariantArg::Rank => Variant::Rank,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchTarget {
    Basic,
    Rank,
    NaiveOracle,
    RankOracle,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StoreArg {
    Presized,
    Doubling,
    Poor,
}

#[derive(Clone, Copy, ValueEnum)]
enum WorkloadArg {
    Random,
    Contrived,
}

const PRESIZE_ENV: &str = "CHR_STORE_PRESIZE";

fn presize_from_env() -> Result<Option<usize>> {
    match std::env::var(PRESIZE_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .with_context(|| format!("{PRESIZE_ENV} must be a non-negative integer, got {v:?}")),
        Err(_) => Ok(None),
    }
}

fn store_choice(arg: Option<StoreArg>) -> Result<StoreChoice> {
    let presize = presize_from_env()?;
    Ok(match arg {
        Some(StoreArg::Presized) => StoreChoice::Presized(presize),
        Some(StoreArg::Doubling) => StoreChoice::Doubling,
        Some(StoreArg::Poor) => StoreChoice::Poor,
        None if presize.is_some() => StoreChoice::Presized(presize),
        None => StoreChoice::Doubling,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args, false),
        Command::Trace(args) => cmd_run(args, true),
        Command::Verify(args) => cmd_verify(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn cmd_run(args: RunArgs, trace_only: bool) -> Result<ExitCode> {
    let program = match (&args.program, args.variant) {
        (Some(path), _) => fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
        (None, Some(v)) => Variant::from(v).source().to_string(),
        (None, None) => unreachable!("clap requires a program source"),
    };
    let query = match (&args.query, &args.query_file) {
        (Some(q), _) => q.clone(),
        (None, Some(path)) => fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
        (None, None) => unreachable!("clap requires a query"),
    };
    let options = EngineOptions {
        store: store_choice(Some(args.store))?.config(0),
        trace: args.trace || trace_only,
        operation_symbols: Vec::new(),
    };
    let result = match run(&program, &query, options) {
        Ok(r) => r,
        Err(e @ (RunError::ProgramParse(_) | RunError::QueryParse(_) | RunError::Compile(_))) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(2));
        }
        Err(e @ RunError::Runtime(_)) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(1));
        }
    };

    let stdout = io::stdout();
    let mut out = stdout.lock();
    for line in &result.trace {
        writeln!(out, "{line}")?;
    }
    if trace_only {
        return Ok(exit_for(result.outcome));
    }
    match (&result.snapshot, args.dump) {
        (Ok(snapshot), false) => write!(out, "{snapshot}")?,
        _ => write!(out, "{}", result.dump)?,
    }
    for (name, value) in &result.bindings {
        match value {
            Some(v) => writeln!(out, "{name} = {v}")?,
            None => writeln!(out, "{name} unbound")?,
        }
    }
    if result.outcome == Outcome::Failure {
        writeln!(out, "false")?;
    }
    Ok(exit_for(result.outcome))
}

fn exit_for(outcome: Outcome) -> ExitCode {
    match outcome {
        Outcome::Success => ExitCode::SUCCESS,
        Outcome::Failure => ExitCode::from(1),
    }
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode> {
    let cfg = VerifyConfig {
        n: args.n as usize,
        ops: args.ops,
        fault: args.inject_swapped_links,
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let (mut failed, mut steps, mut finds) = (0u64, 0usize, 0usize);
    for seed in args.seed_start..args.seed_start + args.seeds {
        let report = verify_seed(cfg, seed)?;
        steps += report.result.steps;
        finds += report.result.finds_checked;
        if report.passed() {
            continue;
        }
        failed += 1;
        match &report.result.first {
            Some(d) => writeln!(out, "seed {seed}: {d}")?,
            None => writeln!(out, "seed {seed}: partition mismatch")?,
        }
        if !report.result.partition_ok {
            writeln!(out, "seed {seed}: same-set relation differs from the brute-force partition")?;
        } else {
            writeln!(out, "seed {seed}: partition still matches")?;
        }
        let small = shrink(&report.ops, cfg.fault, 2000);
        writeln!(out, "seed {seed}: minimized counterexample ({} ops):", small.len())?;
        for op in &small {
            writeln!(out, "  {}", OpText(op))?;
        }
    }
    writeln!(
        out,
        "{} seeds, N={}, {steps} operations, {finds} finds compared: {}",
        args.seeds,
        args.n,
        if failed == 0 { "all equal".to_string() } else { format!("{failed} diverged") }
    )?;
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_bench(args: BenchArgs) -> Result<ExitCode> {
    let store = store_choice(args.store)?;
    let target = match args.variant {
        BenchTarget::Basic => Target::Chr(Variant::Basic, store),
        BenchTarget::Rank => Target::Chr(Variant::Rank, store),
        BenchTarget::NaiveOracle => Target::NaiveOracle,
        BenchTarget::RankOracle => Target::RankOracle,
    };
    let workload = match args.workload {
        WorkloadArg::Random => WorkloadChoice::Random,
        WorkloadArg::Contrived => WorkloadChoice::Contrived { with_finds: !args.no_finds },
    };
    let mut sizes = args.sizes.clone();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() != args.sizes.len() {
        eprintln!("warning: duplicate sizes ignored");
    }
    if let Some(&0) = sizes.first() {
        bail!("sizes must be at least 1");
    }

    let csv = match &args.csv {
        Some(path) => Some(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?),
        None => None,
    };
    let report = scaling_report(target, workload, &sizes, args.repetitions, args.seed)?;
    if let Some(file) = csv {
        report.write_csv(io::BufWriter::new(file), args.timing)?;
    }

    let stdout = io::stdout();
    let mut out = stdout.lock();
    let store_label = match target {
        Target::Chr(..) => format!(", {store} store"),
        _ => String::new(),
    };
    writeln!(
        out,
        "{} on {} workload{store_label}, {} repetition(s), seed {}",
        report.target,
        report.workload,
        args.repetitions.max(1),
        args.seed
    )?;
    write!(out, "{}", report.table())?;
    for metric in [Metric::FindSteps, Metric::Probes] {
        let values: Vec<f64> = report.ratios(metric).iter().map(|r| r.value).filter(|v| v.is_finite()).collect();
        if let (Some(lo), Some(hi)) = (
            values.iter().copied().reduce(f64::min),
            values.iter().copied().reduce(f64::max),
        ) {
            writeln!(out, "{} ratio range: {lo:.3} .. {hi:.3}", metric.name())?;
        }
    }
    Ok(ExitCode::SUCCESS)
}
