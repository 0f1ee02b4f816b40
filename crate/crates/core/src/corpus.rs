//! Grammars shipped with the crate.
//!
//! `g0` extends the four-rule `a⁺b` grammar to eight rules. `g1` adds 17
//! unary rules to `g0`; `g2`, `g3` and `g4` each add 3, 9 and 16 binary
//! rules to `g1`, drawn independently. The files are the output of
//! [`expand_grammar`] under the seeds below, which the tests re-check.

use crate::error::Result;
use crate::grammar::{
    expand_grammar, generate_sentences, parse_grammar, Grammar, RuleKind, Sentence,
};

pub const FIG1: &str = include_str!("../data/grammars/fig1.cfg");
pub const G0: &str = include_str!("../data/grammars/g0.cfg");
pub const G1: &str = include_str!("../data/grammars/g1.cfg");
pub const G2: &str = include_str!("../data/grammars/g2.cfg");
pub const G3: &str = include_str!("../data/grammars/g3.cfg");
pub const G4: &str = include_str!("../data/grammars/g4.cfg");

/// `(rules added, seed)` for `g1` from `g0`.
pub const G1_EXPANSION: (usize, u64) = (17, 1);

/// `(rules added, seed)` for `g2`, `g3`, `g4` from `g1`.
pub const BINARY_EXPANSIONS: [(usize, u64); 3] = [(3, 2), (9, 3), (16, 4)];

/// Seed of the shared evaluation sentences.
pub const SENTENCE_SEED: u64 = 7;

fn load(text: &str) -> Grammar {
    parse_grammar(text).expect("bundled grammar is well formed")
}

pub fn fig1() -> Grammar {
    load(FIG1)
}

pub fn g0() -> Grammar {
    load(G0)
}

/// `g0` through `g4`, named `G0` … `G4`.
pub fn family() -> Vec<(String, Grammar)> {
    [G0, G1, G2, G3, G4]
        .iter()
        .enumerate()
        .map(|(k, text)| (format!("G{k}"), load(text)))
        .collect()
}

/// Looks up a bundled grammar by name (`fig1`, `g0` … `g4`, any case).
pub fn by_name(name: &str) -> Option<Grammar> {
    let text = match name.to_ascii_lowercase().as_str() {
        "fig1" => FIG1,
        "g0" => G0,
        "g1" => G1,
        "g2" => G2,
        "g3" => G3,
        "g4" => G4,
        _ => return None,
    };
    Some(load(text))
}

/// Rebuilds `g1` … `g4` from `g0` with the recorded seeds.
pub fn regenerate() -> Result<Vec<Grammar>> {
    let (count, seed) = G1_EXPANSION;
    let g1 = expand_grammar(&g0(), RuleKind::Unary, count, seed)?;
    let mut out = vec![g1.clone()];
    for (count, seed) in BINARY_EXPANSIONS {
        out.push(expand_grammar(&g1, RuleKind::Binary, count, seed)?);
    }
    Ok(out)
}

/// `count` sentences of `g0` no longer than `max_len`, shared by every
/// grammar of the family.
pub fn evaluation_sentences(count: usize, max_len: usize) -> Result<Vec<Sentence>> {
    generate_sentences(&g0(), count, max_len, SENTENCE_SEED)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn files_match_their_recorded_expansions() {
        let family = family();
        assert_eq!(
            family
                .iter()
                .map(|(_, g)| g.rule_count())
                .collect::<Vec<_>>(),
            [8, 25, 28, 34, 41]
        );
        assert_eq!(family[0].1.unary_rules().len(), 3);
        for (built, (_, shipped)) in regenerate().unwrap().iter().zip(&family[1..]) {
            assert_eq!(built, shipped);
        }
    }

    #[test]
    fn g0_extends_the_four_rule_grammar() {
        let (small, big) = (fig1(), g0());
        for r in small.binary_rules() {
            assert!(big.binary_rules().contains(r));
        }
        for r in small.unary_rules() {
            assert!(big.unary_rules().contains(r));
        }
    }

    #[test]
    fn names_resolve() {
        assert_eq!(by_name("G3").unwrap(), family()[3].1);
        assert!(by_name("g9").is_none());
    }
}
