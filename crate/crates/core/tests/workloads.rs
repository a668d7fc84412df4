use chr_uf::bench::{
    gen_contrived_workload, gen_random_workload, parse_op, run_workload, OpText, StoreChoice, Target,
};
use chr_uf::oracle::{Op, RankUf};
use chr_uf::{Snapshot, Variant};

const GOLDEN: &str = include_str!("golden/random_n4_seed42.ops");

#[test]
fn seeded_workload_matches_golden_file() {
    let spec = gen_random_workload(4, 42).unwrap();
    let golden: Vec<Op<u32>> = GOLDEN.lines().map(|l| parse_op(l).expect("golden line")).collect();
    assert_eq!(spec.ops, golden);
    let text: String = spec.ops.iter().map(|o| format!("{}\n", OpText(o))).collect();
    assert_eq!(text, GOLDEN);
}

#[test]
fn contrived_rank_metrics_match_the_oracle() {
    let spec = gen_contrived_workload(8, None).unwrap();
    let chr = run_workload(Target::Chr(Variant::Rank, StoreChoice::Doubling), &spec).unwrap();
    let oracle = run_workload(Target::RankOracle, &spec).unwrap();
    assert_eq!(chr.find_steps, oracle.find_steps);
    assert_eq!(chr.m, 15);
    let mut uf = RankUf::new();
    for op in &spec.ops {
        uf.apply(op).unwrap();
    }
    assert_eq!(uf.rank(&1), Some(3));
}

#[test]
fn find_steps_agree_across_targets_and_seeds() {
    for seed in 0..20 {
        let spec = gen_random_workload(128, seed).unwrap();
        for (variant, oracle) in [(Variant::Basic, Target::NaiveOracle), (Variant::Rank, Target::RankOracle)] {
            let a = run_workload(Target::Chr(variant, StoreChoice::Doubling), &spec).unwrap();
            let b = run_workload(oracle, &spec).unwrap();
            assert_eq!(a.find_steps, b.find_steps, "{variant} seed {seed}");
        }
    }
}

#[test]
fn chain_find_under_rank_compresses_without_wakes() {
    let r = chr_uf::run(
        Variant::Rank.source(),
        "root(a,1), b ~> a, c ~> b, find(c,R).",
        chr_uf::EngineOptions {
            trace: true,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(r.snapshot.unwrap(), Snapshot::parse(&["root(a,1)", "b ~> a", "c ~> a"]));
    assert_eq!(r.counters.wake_events, 0);
    let fires: Vec<&str> = r.trace.iter().filter(|l| l.starts_with("FIRE")).map(String::as_str).collect();
    assert_eq!(
        fires,
        [
            "FIRE findNode ids=[2,3]",
            "FIRE findNode ids=[1,4]",
            "FIRE findRoot ids=[0,5]",
        ]
    );
}
