use std::collections::BTreeSet;

use dcyk_core::cyk::recognizes;
use dcyk_core::grammar::{expand_grammar, generate_sentence, generate_sentences, RuleKind};
use dcyk_core::{corpus, cyk_parse, identity_score, Factor, Grammar, HrrSpace, Matrix, Sentence};
use proptest::prelude::*;

/// Does `x` derive `w[i..j]`? Plain recursion over rules and split points.
fn derives(g: &Grammar, x: &str, w: &[String], i: usize, j: usize) -> bool {
    if j == i + 1
        && g.unary_rules()
            .iter()
            .any(|r| r.lhs == x && r.terminal == w[i])
    {
        return true;
    }
    g.binary_rules()
        .iter()
        .filter(|r| r.lhs == x)
        .any(|r| (i + 1..j).any(|k| derives(g, &r.left, w, i, k) && derives(g, &r.right, w, k, j)))
}

fn brute_force_chart(g: &Grammar, w: &Sentence) -> BTreeSet<(usize, usize, String)> {
    let n = w.len();
    let mut out = BTreeSet::new();
    for i in 0..n {
        for j in i + 1..=n {
            for x in g.nonterminals() {
                if derives(g, x, w.tokens(), i, j) {
                    out.insert((i, j, x.clone()));
                }
            }
        }
    }
    out
}

fn chart_set(g: &Grammar, w: &Sentence) -> BTreeSet<(usize, usize, String)> {
    cyk_parse(g, w)
        .unwrap()
        .triples()
        .map(|(i, j, s)| (i, j, s.to_owned()))
        .collect()
}

fn all_strings(alphabet: &[&str], max_len: usize) -> Vec<Sentence> {
    let mut out = Vec::new();
    let mut layer: Vec<Vec<&str>> = vec![vec![]];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|prefix| {
                alphabet.iter().map(move |&t| {
                    let mut v = prefix.clone();
                    v.push(t);
                    v
                })
            })
            .collect();
        out.extend(
            layer
                .iter()
                .map(|v| Sentence::new(v.iter().copied()).unwrap()),
        );
    }
    out
}

#[test]
fn cyk_agrees_with_brute_force_derivation_on_every_short_string() {
    let fig1 = corpus::fig1();
    for w in all_strings(&["a", "b"], 8) {
        assert_eq!(chart_set(&fig1, &w), brute_force_chart(&fig1, &w), "{w}");
    }
    let g0 = corpus::g0();
    for w in all_strings(&["a", "b", "c"], 6) {
        assert_eq!(chart_set(&g0, &w), brute_force_chart(&g0, &w), "{w}");
    }
}

#[test]
fn figure_grammar_recognizes_exactly_a_plus_b() {
    let g = corpus::fig1();
    for w in all_strings(&["a", "b"], 8) {
        let t = w.tokens();
        let expected =
            t.len() >= 2 && t[..t.len() - 1].iter().all(|s| s == "a") && t[t.len() - 1] == "b";
        assert_eq!(recognizes(&cyk_parse(&g, &w).unwrap(), &g), expected, "{w}");
    }
    let accepted: Vec<Sentence> = all_strings(&["a", "b"], 2)
        .into_iter()
        .filter(|w| recognizes(&cyk_parse(&g, w).unwrap(), &g))
        .collect();
    assert_eq!(accepted, [Sentence::parse("a b").unwrap()]);
    assert!(generate_sentence(&g, 1, 0).is_err());
    assert_eq!(generate_sentence(&g, 2, 0).unwrap().to_string(), "a b");
}

#[test]
fn generated_sentences_are_recognized_by_the_whole_family() {
    let family = corpus::family();
    let sentences = generate_sentences(&family[0].1, 250, 7, 99).unwrap();
    for w in &sentences {
        assert!(!w.is_empty() && w.len() <= 7);
        for (id, g) in &family {
            assert!(recognizes(&cyk_parse(g, w).unwrap(), g), "{id} rejects {w}");
        }
    }
}

#[test]
fn bundled_evaluation_set_is_recognized_by_the_whole_family() {
    let sentences = corpus::evaluation_sentences(50, 7).unwrap();
    assert_eq!(sentences.len(), 50);
    for (id, g) in corpus::family() {
        for w in &sentences {
            assert!(
                recognizes(&cyk_parse(&g, w).unwrap(), &g),
                "{id} rejects {w}"
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn expansion_only_adds_chart_entries(
        seed in any::<u64>(),
        unary in 1usize..12,
        binary in 1usize..12,
        tokens in prop::collection::vec(prop::sample::select(vec!["a", "b", "c"]), 1..7),
    ) {
        let g0 = corpus::g0();
        let g1 = expand_grammar(&g0, RuleKind::Unary, unary, seed).unwrap();
        let g2 = expand_grammar(&g1, RuleKind::Binary, binary, seed ^ 1).unwrap();
        let w = Sentence::new(tokens).unwrap();
        let (c0, c1, c2) = (chart_set(&g0, &w), chart_set(&g1, &w), chart_set(&g2, &w));
        prop_assert!(c0.is_subset(&c1));
        prop_assert!(c1.is_subset(&c2));
        prop_assert_eq!(&c2, &brute_force_chart(&g2, &w));
    }

    #[test]
    fn expansion_preserves_the_language(seed in any::<u64>(), count in 1usize..20) {
        let g0 = corpus::g0();
        let g = expand_grammar(&g0, RuleKind::Binary, count, seed).unwrap();
        prop_assert_eq!(g.rule_count(), g0.rule_count() + count);
        for w in generate_sentences(&g0, 10, 7, seed).unwrap() {
            prop_assert!(recognizes(&cyk_parse(&g, &w).unwrap(), &g));
        }
    }

    #[test]
    fn inverse_encoding_is_the_transpose(seed in any::<u64>(), d in 8usize..40) {
        let space = HrrSpace::new(d, seed).unwrap();
        prop_assert_eq!(space.decode_op("x"), space.encode("x").transpose());
    }

    #[test]
    fn structured_application_matches_dense_products(seed in any::<u64>(), d in 8usize..48) {
        let space = HrrSpace::new(d, seed).unwrap();
        let factors = [Factor::Encode("a"), Factor::Decode("b"), Factor::Encode("c"), Factor::Decode("a")];
        let m = Matrix::from_fn(d, |r, c| ((r * 31 + c * 17 + seed as usize % 7) % 13) as f64 / 13.0 - 0.5);
        let dense = space.dense_product(&factors).matmul(&m);
        prop_assert!(space.apply(&factors, &m).frobenius_distance(&dense) < 1e-9);
    }

    #[test]
    fn encoding_is_nearly_unitary_and_symbols_nearly_orthogonal(seed in any::<u64>()) {
        let d = 512;
        let space = HrrSpace::new(d, seed).unwrap();
        let sd = (d as f64).sqrt();
        let aa = space.dense_product(&[Factor::Encode("a"), Factor::Decode("a")]);
        let ab = space.dense_product(&[Factor::Encode("a"), Factor::Decode("b")]);
        prop_assert!(aa.distance_to_identity() / sd < 1.5);
        prop_assert!((identity_score(&aa) - 1.0).abs() < 0.3);
        prop_assert!(identity_score(&ab).abs() < 0.3);
        prop_assert!(ab.frobenius_norm() / sd < 1.5);
    }

    #[test]
    fn symbol_vectors_depend_only_on_seed_and_name(seed in any::<u64>(), name in "[a-z]{1,6}") {
        let (x, y) = (HrrSpace::new(64, seed).unwrap(), HrrSpace::new(64, seed).unwrap());
        y.vector_of("warm-up");
        let (a, b, c) = (x.vector_of(&name), y.vector_of(&name), x.vector_of(&format!("{name}'")));
        prop_assert_eq!(a.values(), b.values());
        prop_assert_ne!(a.values(), c.values());
    }
}
