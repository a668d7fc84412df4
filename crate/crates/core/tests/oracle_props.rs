use std::collections::BTreeMap;

use chr_uf::bench::{gen_mixed_workload, gen_random_workload};
use chr_uf::oracle::{bf_partition, root_of, NaiveUf, Op, Partition, RankUf};
use proptest::prelude::*;

fn partition_of(parents: &BTreeMap<u32, u32>) -> Vec<Vec<u32>> {
    Partition::from_representatives(parents.keys().map(|x| (*x, root_of(parents, x).unwrap()))).canonical()
}

fn subtree_sizes(parents: &BTreeMap<u32, u32>) -> BTreeMap<u32, u64> {
    let mut sizes = BTreeMap::new();
    for x in parents.keys() {
        *sizes.entry(root_of(parents, x).unwrap()).or_default() += 1;
    }
    sizes
}

fn check_ops(ops: &[Op<u32>]) {
    let mut naive = NaiveUf::new();
    let mut rank = RankUf::new();
    let mut naive_rec = NaiveUf::recursive();
    let mut rank_iter = RankUf::iterative();
    let mut sets = Partition::new();
    for (i, op) in ops.iter().enumerate() {
        let a = naive.apply(op).unwrap();
        let b = rank.apply(op).unwrap();
        assert_eq!(naive_rec.apply(op).unwrap(), a);
        assert_eq!(rank_iter.apply(op).unwrap(), b);
        sets.apply(op).unwrap();
        let expected = sets.canonical();
        assert_eq!(partition_of(&naive.parents()), expected, "naive after op {i}");
        assert_eq!(partition_of(&rank.parents()), expected, "rank after op {i}");
        assert_eq!(naive_rec.parents(), naive.parents());
        assert_eq!(naive_rec.find_steps(), naive.find_steps());
        assert_eq!(rank_iter.parents(), rank.parents());
        assert_eq!(rank_iter.ranks(), rank.ranks());
        assert_eq!(rank_iter.find_steps(), rank.find_steps());
        if let (Op::Find(x), Some(a), Some(b)) = (op, a, b) {
            assert!(sets.same_set(x, &a) && sets.same_set(&a, &b));
        }
        let parents = rank.parents();
        let ranks = rank.ranks();
        for (root, size) in subtree_sizes(&parents) {
            assert!(1u64 << ranks[&root] <= size, "2^rank <= size at {root}");
        }
        for (x, p) in &parents {
            if x != p {
                assert!(ranks[x] < ranks[p], "rank increases along {x} -> {p}");
            }
        }
    }
    assert_eq!(sets.canonical(), bf_partition(ops).unwrap().canonical());
}

#[test]
fn oracles_agree_with_brute_force_on_many_seeds() {
    for seed in 0..100 {
        check_ops(&gen_random_workload(8 + (seed as usize * 13) % 121, seed).unwrap().ops);
    }
}

#[test]
fn oracles_agree_at_the_largest_checked_size() {
    check_ops(&gen_random_workload(512, 1000).unwrap().ops);
    for seed in 0..100 {
        let ops = gen_random_workload(512, seed).unwrap().ops;
        let expected = bf_partition(&ops).unwrap().canonical();
        let mut naive = NaiveUf::new();
        let mut rank = RankUf::new();
        for op in &ops {
            naive.apply(op).unwrap();
            rank.apply(op).unwrap();
        }
        assert_eq!(partition_of(&naive.parents()), expected);
        assert_eq!(partition_of(&rank.parents()), expected);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn oracles_agree_on_interleaved_ops(n in 1usize..=64, seed in any::<u64>(), count in 0usize..200) {
        check_ops(&gen_mixed_workload(n, seed, count).unwrap().ops);
    }
}

#[test]
fn deep_chains_do_not_overflow_the_iterative_finds() {
    let n = 200_000u32;
    let mut naive = NaiveUf::new();
    let mut rank = RankUf::iterative();
    for i in 1..=n {
        naive.make(i).unwrap();
    }
    for i in 2..=n {
        naive.link(i, i - 1);
    }
    assert_eq!(naive.find(&1).unwrap(), n);
    assert_eq!(naive.find_steps(), u64::from(n - 1));
    for i in 1..=3 {
        rank.make(i).unwrap();
    }
    rank.union(&1, &2).unwrap();
    assert_eq!(rank.find(&2).unwrap(), 1);
}
