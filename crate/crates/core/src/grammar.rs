//! Chomsky-normal-form grammars.
//!
//! File format (UTF-8, one item per line, `#` starts a comment):
//!
//! ```text
//! start: S
//! nonterminals: S D E      # optional, fixes declaration order
//! terminals: a b           # optional
//! S -> D E
//! D -> a
//! ```
//!
//! A symbol is a nonterminal when it heads a rule or is declared as one; it
//! is a terminal when it is the right-hand side of a unary rule or is
//! declared as one. Inputs must already be in CNF: the parser validates and
//! never converts.

use std::collections::{HashMap, HashSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hrr::derive_seed;

/// `lhs -> left right`
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BinaryRule {
    pub lhs: String,
    pub left: String,
    pub right: String,
}

/// `lhs -> terminal`
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UnaryRule {
    pub lhs: String,
    pub terminal: String,
}

impl fmt::Display for BinaryRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {} {}", self.lhs, self.left, self.right)
    }
}

impl fmt::Display for UnaryRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.lhs, self.terminal)
    }
}

/// A validated CNF grammar. Immutable once built.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grammar {
    nonterminals: Vec<String>,
    terminals: Vec<String>,
    binary_rules: Vec<BinaryRule>,
    unary_rules: Vec<UnaryRule>,
    start: String,
}

/// Which kind of rule [`expand_grammar`] adds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuleKind {
    Unary,
    Binary,
}

/// An input string `a₁ ⋯ aₙ`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sentence {
    tokens: Vec<String>,
}

impl Sentence {
    pub fn new<S: Into<String>>(tokens: impl IntoIterator<Item = S>) -> Result<Self> {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        if tokens.is_empty() {
            return Err(Error::EmptySentence);
        }
        Ok(Self { tokens })
    }

    /// Whitespace-separated tokens.
    pub fn parse(line: &str) -> Result<Self> {
        Self::new(line.split_whitespace())
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

impl fmt::Display for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tokens.join(" "))
    }
}

/// Reads a sentence file: one sentence per line, blank lines and `#`
/// comments ignored.
pub fn parse_sentences(text: &str) -> Result<Vec<Sentence>> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(Sentence::parse)
        .collect()
}

pub fn render_sentences(sentences: &[Sentence]) -> String {
    sentences.iter().map(|s| format!("{s}\n")).collect()
}

fn is_numeral(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
}

fn push_unique(v: &mut Vec<String>, s: &str) {
    if !v.iter().any(|x| x == s) {
        v.push(s.to_owned());
    }
}

impl Grammar {
    /// Builds and validates a grammar. Symbol order follows the declaration
    /// lists first, then first appearance in the rules.
    pub fn new(
        start: &str,
        declared_nonterminals: &[String],
        declared_terminals: &[String],
        binary_rules: Vec<BinaryRule>,
        unary_rules: Vec<UnaryRule>,
    ) -> Result<Self> {
        if binary_rules.is_empty() && unary_rules.is_empty() {
            return Err(Error::EmptyGrammar);
        }
        let mut nonterminals: Vec<String> = Vec::new();
        let mut terminals: Vec<String> = Vec::new();
        for n in declared_nonterminals {
            push_unique(&mut nonterminals, n);
        }
        for t in declared_terminals {
            push_unique(&mut terminals, t);
        }
        for r in &binary_rules {
            push_unique(&mut nonterminals, &r.lhs);
        }
        for r in &unary_rules {
            push_unique(&mut nonterminals, &r.lhs);
        }
        for r in &unary_rules {
            push_unique(&mut terminals, &r.terminal);
        }
        for s in nonterminals.iter().chain(&terminals) {
            if is_numeral(s) {
                return Err(Error::ReservedSymbol(s.clone()));
            }
        }
        let nt_set: HashSet<&str> = nonterminals.iter().map(String::as_str).collect();
        let t_set: HashSet<&str> = terminals.iter().map(String::as_str).collect();
        for r in &unary_rules {
            if nt_set.contains(r.terminal.as_str()) {
                return Err(Error::CnfViolation {
                    rule: r.to_string(),
                    reason: format!("`{}` is a nonterminal, so this is a unit rule", r.terminal),
                });
            }
        }
        if let Some(s) = terminals.iter().find(|t| nt_set.contains(t.as_str())) {
            return Err(Error::SymbolConflict(s.clone()));
        }
        for r in &binary_rules {
            for sym in [&r.left, &r.right] {
                if t_set.contains(sym.as_str()) {
                    return Err(Error::CnfViolation {
                        rule: r.to_string(),
                        reason: format!("`{sym}` is a terminal inside a binary rule"),
                    });
                }
                if !nt_set.contains(sym.as_str()) {
                    return Err(Error::CnfViolation {
                        rule: r.to_string(),
                        reason: format!(
                            "`{sym}` is neither a rule head nor a declared nonterminal"
                        ),
                    });
                }
            }
        }
        if !nt_set.contains(start) {
            return Err(Error::UndeclaredStart(start.to_owned()));
        }
        let mut seen = HashSet::new();
        let binary_rules: Vec<BinaryRule> = binary_rules
            .into_iter()
            .filter(|r| seen.insert(r.clone()))
            .collect();
        let mut seen = HashSet::new();
        let unary_rules: Vec<UnaryRule> = unary_rules
            .into_iter()
            .filter(|r| seen.insert(r.clone()))
            .collect();
        Ok(Self {
            nonterminals,
            terminals,
            binary_rules,
            unary_rules,
            start: start.to_owned(),
        })
    }

    pub fn nonterminals(&self) -> &[String] {
        &self.nonterminals
    }

    pub fn terminals(&self) -> &[String] {
        &self.terminals
    }

    pub fn binary_rules(&self) -> &[BinaryRule] {
        &self.binary_rules
    }

    pub fn unary_rules(&self) -> &[UnaryRule] {
        &self.unary_rules
    }

    pub fn start(&self) -> &str {
        &self.start
    }

    pub fn rule_count(&self) -> usize {
        self.binary_rules.len() + self.unary_rules.len()
    }

    pub fn is_terminal(&self, s: &str) -> bool {
        self.terminals.iter().any(|t| t == s)
    }

    pub fn is_nonterminal(&self, s: &str) -> bool {
        self.nonterminals.iter().any(|t| t == s)
    }

    /// Fails on the first token that is not a terminal.
    pub fn check_sentence(&self, w: &Sentence) -> Result<()> {
        for (position, token) in w.tokens().iter().enumerate() {
            if !self.is_terminal(token) {
                return Err(Error::UnknownTerminal {
                    token: token.clone(),
                    position,
                });
            }
        }
        Ok(())
    }

    /// Canonical text form; [`parse_grammar`] reads it back to an equal value.
    pub fn render(&self) -> String {
        let mut out = format!("start: {}\n", self.start);
        out.push_str(&format!("nonterminals: {}\n", self.nonterminals.join(" ")));
        out.push_str(&format!("terminals: {}\n", self.terminals.join(" ")));
        for r in &self.binary_rules {
            out.push_str(&format!("{r}\n"));
        }
        for r in &self.unary_rules {
            out.push_str(&format!("{r}\n"));
        }
        out
    }
}

/// Parses the grammar file format described in the module docs.
pub fn parse_grammar(text: &str) -> Result<Grammar> {
    let mut start: Option<String> = None;
    let mut nts = Vec::new();
    let mut ts = Vec::new();
    let mut binary = Vec::new();
    let mut unary = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let syntax = |message: String| Error::Syntax {
            line: line_no,
            message,
        };
        if let Some((lhs, rhs)) = line.split_once("->") {
            let lhs: Vec<&str> = lhs.split_whitespace().collect();
            let rhs: Vec<&str> = rhs.split_whitespace().collect();
            let [head] = lhs[..] else {
                return Err(syntax(format!(
                    "expected exactly one symbol before `->`, found {}",
                    lhs.len()
                )));
            };
            match rhs[..] {
                [t] => unary.push(UnaryRule {
                    lhs: head.into(),
                    terminal: t.into(),
                }),
                [l, r] => binary.push(BinaryRule {
                    lhs: head.into(),
                    left: l.into(),
                    right: r.into(),
                }),
                [] => {
                    return Err(Error::CnfViolation {
                        rule: format!("{head} ->"),
                        reason: "empty right-hand side".into(),
                    })
                }
                _ => {
                    return Err(Error::CnfViolation {
                        rule: format!("{head} -> {}", rhs.join(" ")),
                        reason: format!("right-hand side has {} symbols", rhs.len()),
                    })
                }
            }
        } else if let Some((key, value)) = line.split_once(':') {
            let values: Vec<String> = value.split_whitespace().map(str::to_owned).collect();
            match key.trim() {
                "start" => {
                    let [s] = &values[..] else {
                        return Err(syntax("`start:` takes exactly one symbol".into()));
                    };
                    if start.replace(s.clone()).is_some() {
                        return Err(syntax("duplicate `start:` declaration".into()));
                    }
                }
                "nonterminals" => nts.extend(values),
                "terminals" => ts.extend(values),
                other => return Err(syntax(format!("unknown declaration `{other}`"))),
            }
        } else {
            return Err(syntax(format!("cannot parse `{line}`")));
        }
    }
    let start = start.ok_or(Error::MissingStart)?;
    Grammar::new(&start, &nts, &ts, binary, unary)
}

/// Upper bound on derivation attempts in [`generate_sentence`].
pub const GENERATION_ATTEMPTS: usize = 10_000;

/// Draws a sentence of length at most `max_len` by top-down leftmost
/// expansion with a uniform choice among each nonterminal's rules.
/// Derivations that outgrow `max_len` are rejected and restarted.
pub fn generate_sentence(g: &Grammar, max_len: usize, rng_seed: u64) -> Result<Sentence> {
    if max_len == 0 {
        return Err(Error::InvalidArgument("max_len must be at least 1".into()));
    }
    #[derive(Clone, Copy)]
    enum Rhs<'g> {
        Pair(&'g str, &'g str),
        Leaf(&'g str),
    }
    let mut rules: HashMap<&str, Vec<Rhs<'_>>> = HashMap::new();
    for r in &g.binary_rules {
        rules
            .entry(&r.lhs)
            .or_default()
            .push(Rhs::Pair(&r.left, &r.right));
    }
    for r in &g.unary_rules {
        rules
            .entry(&r.lhs)
            .or_default()
            .push(Rhs::Leaf(&r.terminal));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    'attempt: for _ in 0..GENERATION_ATTEMPTS {
        // Pending symbols, rightmost on top; every symbol yields >= 1 token.
        let mut stack: Vec<&str> = vec![&g.start];
        let mut out: Vec<String> = Vec::new();
        while let Some(sym) = stack.pop() {
            if out.len() + stack.len() + 1 > max_len {
                continue 'attempt;
            }
            if g.is_terminal(sym) {
                out.push(sym.to_owned());
                continue;
            }
            let Some(options) = rules.get(sym) else {
                continue 'attempt;
            };
            match options[rng.random_range(0..options.len())] {
                Rhs::Pair(l, r) => {
                    stack.push(r);
                    stack.push(l);
                }
                Rhs::Leaf(t) => stack.push(t),
            }
        }
        return Sentence::new(out);
    }
    Err(Error::GenerationFailed {
        max_len,
        attempts: GENERATION_ATTEMPTS,
    })
}

/// `count` sentences, the `k`-th drawn with a seed derived from
/// `(rng_seed, k)`.
pub fn generate_sentences(
    g: &Grammar,
    count: usize,
    max_len: usize,
    rng_seed: u64,
) -> Result<Vec<Sentence>> {
    (0..count)
        .map(|k| generate_sentence(g, max_len, derive_seed(rng_seed, &format!("sentence/{k}"))))
        .collect()
}

/// Probability that an expansion step mints a fresh symbol instead of
/// reusing an existing one.
const FRESH_NONTERMINAL_P: f64 = 0.2;
const FRESH_TERMINAL_P: f64 = 0.5;

/// Returns `g` plus `count` new distinct rules of `kind`.
///
/// Unary rules pair an existing or fresh nonterminal (`N1`, `N2`, …) with
/// an existing or fresh terminal (`t1`, `t2`, …). Binary rules combine
/// existing nonterminals only. Rules are only ever added, so the language
/// of `g` is preserved or extended.
pub fn expand_grammar(g: &Grammar, kind: RuleKind, count: usize, rng_seed: u64) -> Result<Grammar> {
    if count == 0 {
        return Err(Error::InvalidArgument(
            "expansion count must be at least 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut nonterminals = g.nonterminals.clone();
    let mut terminals = g.terminals.clone();
    let mut binary = g.binary_rules.clone();
    let mut unary = g.unary_rules.clone();
    let mut binary_seen: HashSet<BinaryRule> = binary.iter().cloned().collect();
    let mut unary_seen: HashSet<UnaryRule> = unary.iter().cloned().collect();

    let taken = |name: &str, nts: &[String], ts: &[String]| nts.iter().chain(ts).any(|s| s == name);
    let fresh = |prefix: &str, nts: &[String], ts: &[String]| {
        (1..)
            .map(|k| format!("{prefix}{k}"))
            .find(|n| !taken(n, nts, ts))
            .expect("unbounded name supply")
    };

    let mut added = 0;
    let mut stalls = 0;
    while added < count {
        if stalls > 10_000 {
            return Err(Error::InvalidArgument(format!(
                "could not find {count} new {kind:?} rules to add",
            )));
        }
        match kind {
            RuleKind::Unary => {
                let lhs = if rng.random_bool(FRESH_NONTERMINAL_P) {
                    fresh("N", &nonterminals, &terminals)
                } else {
                    nonterminals[rng.random_range(0..nonterminals.len())].clone()
                };
                let terminal = if rng.random_bool(FRESH_TERMINAL_P) {
                    fresh("t", &nonterminals, &terminals)
                } else {
                    terminals[rng.random_range(0..terminals.len())].clone()
                };
                let rule = UnaryRule { lhs, terminal };
                if unary_seen.insert(rule.clone()) {
                    push_unique(&mut nonterminals, &rule.lhs);
                    push_unique(&mut terminals, &rule.terminal);
                    unary.push(rule);
                    added += 1;
                    stalls = 0;
                } else {
                    stalls += 1;
                }
            }
            RuleKind::Binary => {
                let pick = |rng: &mut ChaCha8Rng| {
                    nonterminals[rng.random_range(0..nonterminals.len())].clone()
                };
                let rule = BinaryRule {
                    lhs: pick(&mut rng),
                    left: pick(&mut rng),
                    right: pick(&mut rng),
                };
                if binary_seen.insert(rule.clone()) {
                    binary.push(rule);
                    added += 1;
                    stalls = 0;
                } else {
                    stalls += 1;
                }
            }
        }
    }
    Grammar::new(&g.start, &nonterminals, &terminals, binary, unary)
}
