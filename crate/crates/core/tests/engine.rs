use chr_uf::engine::{compile, LookupKey, Outcome, RunError, RuntimeError};
use chr_uf::parser::parse_program;
use chr_uf::programs::{Variant, UFD_BASIC, UFD_RANK};
use chr_uf::store::Snapshot;
use chr_uf::term::{Constant, Interner};
use chr_uf::{run, EngineOptions};

fn traced() -> EngineOptions {
    EngineOptions {
        trace: true,
        ..EngineOptions::default()
    }
}

fn ok(program: &str, query: &str) -> chr_uf::RunResult {
    run(program, query, traced()).expect("run")
}

#[test]
fn rank_union_of_two_fresh_elements() {
    let r = ok(UFD_RANK, "make(a), make(b), union(b,a).");
    assert_eq!(r.outcome, Outcome::Success);
    assert_eq!(r.snapshot.unwrap(), Snapshot::parse(&["root(b,1)", "a ~> b"]));
}

#[test]
fn basic_union_then_find_binds_root() {
    let r = ok(UFD_BASIC, "make(a), make(b), union(a,b), find(b,R).");
    assert_eq!(r.snapshot.unwrap(), Snapshot::parse(&["root(a)", "b ~> a"]));
    assert_eq!(r.bindings, vec![("R".to_string(), Some(Constant::Atom("a".into())))]);
}

#[test]
fn find_on_root_fires_find_root_only() {
    let r = ok(UFD_RANK, "make(a), find(a,R).");
    let c = &r.counters;
    let idx = |n: &str| r.rule_names.iter().position(|x| x == n).unwrap();
    assert_eq!(c.rule_firings[idx("findRoot")], 1);
    assert_eq!(c.rule_firings[idx("findNode")], 0);
    assert_eq!(r.bindings[0].1, Some(Constant::Atom("a".into())));
    assert_eq!(r.snapshot.unwrap(), Snapshot::parse(&["root(a,0)"]));
}

#[test]
fn link_equal_vanishes() {
    for src in [UFD_BASIC, UFD_RANK] {
        let r = ok(src, "link(a,a).");
        assert!(r.snapshot.unwrap().is_empty());
        assert_eq!(r.counters.total_firings(), 1);
    }
}

#[test]
fn data_constraint_activation_drops() {
    let r = ok(UFD_RANK, "b ~> a.");
    assert_eq!(r.counters.activations, 1);
    assert_eq!(r.counters.drops, 1);
    assert_eq!(r.counters.total_firings(), 0);
    assert_eq!(r.snapshot.unwrap(), Snapshot::parse(&["b ~> a"]));
}

#[test]
fn find_without_root_stays_stored() {
    let r = ok(UFD_BASIC, "find(a,R).");
    assert_eq!(r.bindings[0].1, None);
    assert!(r.snapshot.is_err());
    assert!(r.dump.contains("find(a,_V"), "{}", r.dump);
}

#[test]
fn guards_pick_the_higher_rank_root() {
    let r = ok(UFD_RANK, "root(a,1), root(b,0), link(a,b).");
    assert_eq!(r.snapshot.unwrap(), Snapshot::parse(&["root(a,1)", "b ~> a"]));
    let r = ok(UFD_RANK, "root(a,0), root(b,1), link(a,b).");
    assert_eq!(r.snapshot.unwrap(), Snapshot::parse(&["root(b,1)", "a ~> b"]));
    let r = ok(UFD_RANK, "root(a,2), root(b,2), link(a,b).");
    assert_eq!(r.snapshot.unwrap(), Snapshot::parse(&["root(a,3)", "b ~> a"]));
}

#[test]
fn partner_plans() {
    let mut interner = Interner::new();
    let rank = compile(&parse_program(UFD_RANK).unwrap(), &mut interner).unwrap();
    let link = rank.symbol("link", 2).unwrap();
    let left = rank.rule_index("linkLeft").unwrap();
    let occ = rank
        .occurrences(link)
        .iter()
        .find(|o| o.rule == left)
        .unwrap();
    let rule = &rank.rules()[left];
    let steps: Vec<(usize, usize)> = occ.plan.iter().map(|s| (s.head_index, s.position)).collect();
    assert_eq!(steps.len(), 2);
    for (s, (h, p)) in occ.plan.iter().zip(&steps) {
        assert_eq!(rule.head[*h].symbol, rank.symbol("root", 2).unwrap());
        assert_eq!(*p, 0);
        assert!(matches!(s.key, LookupKey::Slot(_)));
    }
    assert!(steps[0].0 < steps[1].0);

    let make = rank.symbol("make", 1).unwrap();
    assert_eq!(rank.occurrences(make).len(), 1);
    assert!(rank.occurrences(make)[0].plan.is_empty());

    let mut interner = Interner::new();
    let basic = compile(&parse_program(UFD_BASIC).unwrap(), &mut interner).unwrap();
    let find = basic.symbol("find", 2).unwrap();
    let node = basic.rule_index("findNode").unwrap();
    let occ = basic.occurrences(find).iter().find(|o| o.rule == node).unwrap();
    assert_eq!(occ.plan.len(), 1);
    let step = occ.plan[0];
    assert_eq!(basic.rules()[node].head[step.head_index].symbol, basic.symbol("~>", 2).unwrap());
    assert_eq!(step.position, 0);
}

#[test]
fn occurrences_follow_textual_order() {
    let mut interner = Interner::new();
    let rank = compile(&parse_program(UFD_RANK).unwrap(), &mut interner).unwrap();
    let root = rank.symbol("root", 2).unwrap();
    let names: Vec<&str> = rank
        .occurrences(root)
        .iter()
        .map(|o| rank.rules()[o.rule].name.as_str())
        .collect();
    assert_eq!(names, ["findRoot", "linkLeft", "linkLeft", "linkRight", "linkRight"]);
}

#[test]
fn unreachable_head_atom_is_a_compile_error() {
    let err = run("r @ p(X), q(Y) <=> true.", "true.", EngineOptions::default()).unwrap_err();
    assert!(matches!(err, RunError::Compile(_)), "{err}");
    assert!(err.to_string().contains("q(Y)") || err.to_string().contains("p(X)"), "{err}");
}

#[test]
fn constant_keys_make_atoms_reachable() {
    let r = ok("r @ p(X,k), q(k) <=> done(X).", "q(k), p(1,k).");
    assert_eq!(r.snapshot.unwrap(), Snapshot::parse(&["done(1)"]));
}

#[test]
fn binding_wakes_affected_constraints_in_id_order() {
    let r = ok(UFD_RANK, "b ~> R, c ~> R, R = a.");
    assert_eq!(r.counters.wake_events, 2);
    let wakes: Vec<&String> = r.trace.iter().filter(|l| l.starts_with("WAKE")).collect();
    assert_eq!(wakes, ["WAKE #0", "WAKE #1"]);
    assert_eq!(r.counters.activations, 4);
    assert_eq!(r.counters.drops, 4);
    assert_eq!(r.snapshot.unwrap(), Snapshot::parse(&["b ~> a", "c ~> a"]));
}

#[test]
fn binding_an_unused_variable_wakes_nothing() {
    let r = ok(UFD_RANK, "R = a.");
    assert_eq!(r.counters.wake_events, 0);
    assert_eq!(r.counters.binds, 1);
}

#[test]
fn woken_constraint_can_fire() {
    let r = ok("r @ p(X), q(X) <=> done(X).", "p(Y), q(a), Y = a.");
    assert_eq!(r.counters.wake_events, 1);
    assert_eq!(r.snapshot.unwrap(), Snapshot::parse(&["done(a)"]));
}

#[test]
fn propagation_history_gives_transitive_closure() {
    let prog = "dup @ e(X,Y) \\ e(X,Y) <=> true.\npath @ e(X,Y), e(Y,Z) ==> e(X,Z).";
    let r = ok(prog, "e(a,b), e(b,c), e(c,d).");
    assert_eq!(
        r.snapshot.unwrap(),
        Snapshot::parse(&["e(a,b)", "e(a,c)", "e(a,d)", "e(b,c)", "e(b,d)", "e(c,d)"])
    );
    let r = ok(prog, "e(a,b), e(a,c), e(b,d), e(c,d).");
    assert_eq!(
        r.snapshot.unwrap(),
        Snapshot::parse(&["e(a,b)", "e(a,c)", "e(a,d)", "e(b,d)", "e(c,d)"])
    );
    assert_eq!(r.counters.rule_firings[1] as usize, 2);
}

#[test]
fn propagation_fires_once_per_combination() {
    let r = ok("p @ a(X) ==> b(X).", "a(1), a(2).");
    assert_eq!(r.counters.total_firings(), 2);
    assert_eq!(r.snapshot.unwrap(), Snapshot::parse(&["a(1)", "a(2)", "b(1)", "b(2)"]));
}

#[test]
fn distinct_constants_fail() {
    let r = ok(UFD_BASIC, "make(a), find(a,R), R = b.");
    assert_eq!(r.outcome, Outcome::Failure);
    let r = ok(UFD_BASIC, "a = a.");
    assert_eq!(r.outcome, Outcome::Success);
}

#[test]
fn unbound_arithmetic_is_an_instantiation_fault() {
    let err = run("r @ go(X) <=> Y is X + 1, out(Y).", "go(Z).", EngineOptions::default()).unwrap_err();
    assert!(matches!(err, RunError::Runtime(RuntimeError::Instantiation(_))), "{err}");
    let r = ok("r @ go(X) <=> Y is max(X, 3) + 1, out(Y).", "go(7).");
    assert_eq!(r.snapshot.unwrap(), Snapshot::parse(&["out(8)"]));
}

#[test]
fn guard_on_unbound_variable_is_not_entailed() {
    let r = ok("r @ p(X) <=> X >= 1 | q.", "p(Z).");
    assert_eq!(r.counters.total_firings(), 0);
    assert_eq!(r.counters.guard_checks, 1);
    let r = ok("r @ p(X) <=> X >= 1 | q.", "p(Z), Z = 4.");
    assert_eq!(r.snapshot.unwrap(), Snapshot::parse(&["q"]));
}

#[test]
fn variable_aliasing_is_rejected() {
    let err = run(UFD_BASIC, "X = Y.", EngineOptions::default()).unwrap_err();
    assert!(matches!(err, RunError::Runtime(RuntimeError::Aliasing(..))), "{err}");
}

#[test]
fn transition_accounting_balances() {
    for variant in [Variant::Basic, Variant::Rank] {
        let r = ok(
            variant.source(),
            "make(a), make(b), make(c), make(d), union(a,b), union(c,d), union(b,d), find(d,R), find(a,S).",
        );
        let c = &r.counters;
        assert_eq!(c.activations, c.drops + c.removed_active, "{variant}");
        assert!(c.activations >= c.inserts, "{variant}");
        assert_eq!(r.bindings[0].1, r.bindings[1].1);
    }
}

#[test]
fn runs_are_deterministic() {
    let q = "make(a), make(b), make(c), union(a,b), union(b,c), find(c,R).";
    for src in [UFD_BASIC, UFD_RANK] {
        let a = ok(src, q);
        let b = ok(src, q);
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.dump, b.dump);
        assert_eq!(a.counters, b.counters);
    }
}

#[test]
fn trace_of_a_find_on_a_root() {
    let r = ok(UFD_RANK, "make(a), find(a,R).");
    let expected = [
        "ACT make/1#0",
        "FIRE make ids=[0]",
        "ACT root/2#1",
        "DROP #1",
        "ACT find/2#2",
        "FIRE findRoot ids=[1,2]",
        "BIND V0 := a",
    ];
    assert_eq!(r.trace, expected, "{:#?}", r.trace);
}
