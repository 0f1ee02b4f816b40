//! Symbolic CYK recognition: the oracle the distributed parser is measured
//! against.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::grammar::{Grammar, Sentence};

/// Span `(i, j)` with `0 ≤ i < j ≤ n`, covering tokens `i+1 ..= j`.
pub type Span = (usize, usize);

/// A CYK table: the set of nonterminals found for each span.
///
/// Only non-empty cells are stored.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Chart {
    n: usize,
    cells: BTreeMap<Span, BTreeSet<String>>,
}

impl Chart {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            cells: BTreeMap::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Adds `symbol` to cell `(i, j)`; returns whether it was new.
    pub fn insert(&mut self, i: usize, j: usize, symbol: &str) -> bool {
        assert!(
            i < j && j <= self.n,
            "span ({i},{j}) out of range for n={}",
            self.n
        );
        self.cells
            .entry((i, j))
            .or_default()
            .insert(symbol.to_owned())
    }

    pub fn contains(&self, i: usize, j: usize, symbol: &str) -> bool {
        self.cells.get(&(i, j)).is_some_and(|c| c.contains(symbol))
    }

    /// Cell contents; empty for spans never filled.
    pub fn cell(&self, i: usize, j: usize) -> impl Iterator<Item = &str> {
        self.cells
            .get(&(i, j))
            .into_iter()
            .flatten()
            .map(String::as_str)
    }

    /// Every `(i, j, A)` triple, in span order then symbol order.
    pub fn triples(&self) -> impl Iterator<Item = (usize, usize, &str)> {
        self.cells
            .iter()
            .flat_map(|(&(i, j), set)| set.iter().map(move |s| (i, j, s.as_str())))
    }

    pub fn len(&self) -> usize {
        self.cells.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Serialises non-empty cells as `i j : A B C`, one per line, symbols
    /// sorted.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (&(i, j), set) in &self.cells {
            if set.is_empty() {
                continue;
            }
            let syms: Vec<&str> = set.iter().map(String::as_str).collect();
            out.push_str(&format!("{i} {j} : {}\n", syms.join(" ")));
        }
        out
    }

    /// Reads [`Chart::render`] output. `n` is the sentence length, which the
    /// text form does not carry; `None` infers it from the widest span.
    pub fn parse(text: &str, n: Option<usize>) -> Result<Self> {
        let mut cells: BTreeMap<Span, BTreeSet<String>> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let format = |message: &str| Error::Format {
                line: idx + 1,
                message: message.to_owned(),
            };
            let (span, syms) = line.split_once(':').ok_or_else(|| format("missing `:`"))?;
            let idx_parts: Vec<&str> = span.split_whitespace().collect();
            let [i, j] = idx_parts[..] else {
                return Err(format("expected `i j` before `:`"));
            };
            let i: usize = i.parse().map_err(|_| format("bad start index"))?;
            let j: usize = j.parse().map_err(|_| format("bad end index"))?;
            if i >= j {
                return Err(format("span start must precede its end"));
            }
            cells
                .entry((i, j))
                .or_default()
                .extend(syms.split_whitespace().map(str::to_owned));
        }
        let widest = cells.keys().map(|&(_, j)| j).max().unwrap_or(0);
        let n = n.unwrap_or(widest);
        if widest > n {
            return Err(Error::Format {
                line: 0,
                message: format!("span end {widest} exceeds n={n}"),
            });
        }
        cells.retain(|_, s| !s.is_empty());
        Ok(Self { n, cells })
    }
}

impl fmt::Display for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Fills the CYK table of `w` under `g`.
///
/// Loops run in the classical order: unary initialisation over positions,
/// then `j = 2..=n`, `i = j−2 ..= 0` (descending), `k = i+1 .. j`.
pub fn cyk_parse(g: &Grammar, w: &Sentence) -> Result<Chart> {
    if w.is_empty() {
        return Err(Error::EmptySentence);
    }
    g.check_sentence(w)?;
    let n = w.len();
    let mut chart = Chart::new(n);
    for (pos, token) in w.tokens().iter().enumerate() {
        for r in g.unary_rules() {
            if &r.terminal == token {
                chart.insert(pos, pos + 1, &r.lhs);
            }
        }
    }
    for j in 2..=n {
        for i in (0..=j - 2).rev() {
            for k in i + 1..j {
                for r in g.binary_rules() {
                    if chart.contains(i, k, &r.left) && chart.contains(k, j, &r.right) {
                        chart.insert(i, j, &r.lhs);
                    }
                }
            }
        }
    }
    Ok(chart)
}

/// Whether the start symbol covers the whole input.
pub fn recognizes(c: &Chart, g: &Grammar) -> bool {
    c.n() > 0 && c.contains(0, c.n(), g.start())
}
