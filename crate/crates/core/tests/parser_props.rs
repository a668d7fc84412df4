use chr_uf::parser::{parse_program, parse_query};
use chr_uf::programs::{UFD_BASIC, UFD_RANK};
use proptest::prelude::*;

fn term() -> impl Strategy<Value = String> {
    prop_oneof![
        prop::sample::select(vec!["X", "Y", "Z", "Acc", "_"]).prop_map(str::to_string),
        prop::sample::select(vec!["a", "b", "nil"]).prop_map(str::to_string),
        (-5i64..20).prop_map(|i| i.to_string()),
    ]
}

fn body_term() -> impl Strategy<Value = String> {
    prop_oneof![
        prop::sample::select(vec!["X", "Y", "Z", "Acc"]).prop_map(str::to_string),
        prop::sample::select(vec!["a", "b"]).prop_map(str::to_string),
        (0i64..20).prop_map(|i| i.to_string()),
    ]
}

fn atom(t: BoxedStrategy<String>) -> impl Strategy<Value = String> {
    prop_oneof![
        t.clone().prop_map(|a| format!("p({a})")),
        (t.clone(), t.clone()).prop_map(|(a, b)| format!("q({a},{b})")),
        Just("r".to_string()),
        (t.clone(), t.clone(), t.clone()).prop_map(|(a, b, c)| format!("s({a},{b},{c})")),
        (t.clone(), t).prop_map(|(a, b)| format!("{a} ~> {b}")),
    ]
}

fn expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        prop::sample::select(vec!["X", "Y", "Z"]).prop_map(str::to_string),
        (-3i64..9).prop_map(|i| i.to_string()),
    ];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a}+{b}")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a}+({b})")),
            (inner.clone(), inner).prop_map(|(a, b)| format!("max({a},{b})")),
        ]
    })
}

fn guard() -> impl Strategy<Value = String> {
    let test = prop_oneof![
        Just("true".to_string()),
        (expr(), prop::sample::select(vec![">=", ">", "=<", "<", "=="]), expr())
            .prop_map(|(a, op, b)| format!("{a} {op} {b}")),
    ];
    prop::collection::vec(test, 1..3).prop_map(|v| v.join(", "))
}

fn body() -> impl Strategy<Value = String> {
    let item = prop_oneof![
        Just("true".to_string()),
        atom(body_term().boxed()),
        (body_term(), body_term()).prop_map(|(a, b)| format!("{a} = {b}")),
        (prop::sample::select(vec!["X", "W"]), expr()).prop_map(|(v, e)| format!("{v} is {e}")),
    ];
    prop::collection::vec(item, 1..4).prop_map(|v| v.join(", "))
}

fn conj() -> impl Strategy<Value = String> {
    prop::collection::vec(atom(term().boxed()), 1..3).prop_map(|v| v.join(", "))
}

fn rule() -> impl Strategy<Value = String> {
    let head = prop_oneof![
        conj().prop_map(|h| format!("{h} <=>")),
        conj().prop_map(|h| format!("{h} ==>")),
        (conj(), conj()).prop_map(|(k, r)| format!("{k} \\ {r} <=>")),
    ];
    (head, prop::option::of(guard()), body()).prop_map(|(h, g, b)| match g {
        Some(g) => format!("{h} {g} | {b}."),
        None => format!("{h} {b}."),
    })
}

fn program() -> impl Strategy<Value = String> {
    prop::collection::vec((any::<bool>(), rule()), 0..6).prop_map(|rules| {
        rules
            .into_iter()
            .enumerate()
            .map(|(i, (named, r))| if named { format!("n{i} @ {r}\n") } else { format!("{r}\n") })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn printing_then_parsing_is_the_identity(text in program()) {
        let parsed = parse_program(&text).expect("generated programs are well formed");
        let printed = parsed.to_string();
        let reparsed = parse_program(&printed).expect("printed programs parse");
        prop_assert_eq!(&parsed, &reparsed);
        prop_assert_eq!(printed, reparsed.to_string());
    }

    #[test]
    fn parsing_never_panics(text in "\\PC{0,80}") {
        let _ = parse_program(&text);
        let _ = parse_query(&text);
    }

    #[test]
    fn parsing_chr_like_noise_never_panics(
        tokens in prop::collection::vec(
            prop::sample::select(vec![
                "p", "X", "_", "(", ")", ",", ".", "@", "\\", "|", "<=>", "==>", "~>", "=", "is",
                "max", "+", ">=", "=<", "<", ">", "==", "-", "7", "-2", "99999999999999999999", "true", "%c\n", "&",
            ]),
            0..40,
        )
    ) {
        let text = tokens.join(" ");
        let _ = parse_program(&text);
        let _ = parse_query(&text);
    }
}

#[test]
fn bundled_programs_are_in_canonical_form() {
    for src in [UFD_BASIC, UFD_RANK] {
        assert_eq!(parse_program(src).unwrap().to_string(), src);
    }
}
