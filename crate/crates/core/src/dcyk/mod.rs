//! CYK over distributed representations.
//!
//! The chart is a multiset of triples `(i, j, X)` held in two `d × d`
//! matrices:
//!
//! ```text
//! P_left  = Σ Φ⁻¹(i) Φ⁻¹(j) Φ⁻¹(X)
//! P_right = Σ Φ(X) Φ(i) Φ(j)
//! ```
//!
//! The unary pass detects `A → aᵢ` with `σ(U_A Φ(i) Φ(i−1) P_left)`, where
//! `U_A = Σ Φ(a)`. The binary pass detects `A → B C` over span `(i, j)` with
//! `σ(Φ⁻¹(j) Φ(i) P_left B_A P_right) ⊙ I`, where `B_A = Σ Φ(B) Φ⁻¹(C)`:
//! the right-hand sides cancel against `P_left`/`P_right`, the split point
//! `k` cancels in the middle, and the span prefix tests that what remains
//! is `Φ⁻¹(i) Φ(j)`. Each detection gates the insertion of the new triple
//! into both matrices. Decoding reads `σ(Φ(A) Φ(j) Φ(i) P_left)` at entry
//! `(0, 0)`.
//!
//! Two interchangeable engines evaluate these formulas. [`MatmulMode::Dense`]
//! materialises every operator and multiplies in `O(d³)`.
//! [`MatmulMode::Structured`] never forms a dense operator: it keeps the
//! chart in the Fourier domain, applies circulants as spectral products and
//! permutations as gathers, and extracts only the diagonal the binary mask
//! keeps, for `O(d² log d)` per step.

mod dense;
mod structured;

use std::collections::BTreeMap;
use std::str::FromStr;

use rustfft::num_complex::Complex64;

use crate::cyk::Chart;
use crate::error::{Error, Result};
use crate::grammar::{Grammar, RuleKind, Sentence};
use crate::hrr::{index_symbol, HrrSpace};
use crate::matrix::Matrix;

/// Decoder threshold on the σ-image of entry `(0, 0)`.
pub const DEFAULT_THRESHOLD: f64 = 0.99;

/// How operator products are evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum MatmulMode {
    /// Dense `d × d` operators and GEMM.
    Dense,
    /// FFT circulant application, permutation gathers, diagonal-only binary
    /// detection.
    #[default]
    Structured,
}

impl FromStr for MatmulMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(Self::Dense),
            "structured" => Ok(Self::Structured),
            other => Err(Error::InvalidArgument(format!(
                "unknown matmul mode `{other}`"
            ))),
        }
    }
}

impl std::fmt::Display for MatmulMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Dense => "dense",
            Self::Structured => "structured",
        })
    }
}

/// The distributed chart.
#[derive(Clone, Debug, PartialEq)]
pub struct DistChart {
    p_left: Matrix,
    p_right: Matrix,
    n: usize,
}

impl DistChart {
    pub fn new(p_left: Matrix, p_right: Matrix, n: usize) -> Self {
        assert_eq!(
            p_left.dim(),
            p_right.dim(),
            "P_left and P_right must share a dimension"
        );
        Self { p_left, p_right, n }
    }

    /// All-zero chart for a sentence of length `n`.
    pub fn zeros(dim: usize, n: usize) -> Self {
        Self::new(Matrix::zeros(dim), Matrix::zeros(dim), n)
    }

    pub fn p_left(&self) -> &Matrix {
        &self.p_left
    }

    pub fn p_right(&self) -> &Matrix {
        &self.p_right
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.p_left.dim()
    }
}

/// `U_A = Σ_{A→a} Φ(a)`. Because `Φ(a) = C_a Π` and circulants are linear
/// in their vector, `U_A = C_u Π` with `u = Σ a`.
#[derive(Clone, Debug)]
pub struct UnaryOperator {
    terminals: Vec<String>,
    spectrum: Vec<Complex64>,
}

impl UnaryOperator {
    pub fn terminals(&self) -> &[String] {
        &self.terminals
    }

    /// The dense sum `Σ Φ(a)`.
    pub fn matrix(&self, space: &HrrSpace) -> Matrix {
        sum_matrices(space.dim(), self.terminals.iter().map(|t| space.encode(t)))
    }
}

/// `B_A = Σ_{A→BC} Φ(B) Φ⁻¹(C)`. Since `Φ(B) Φ⁻¹(C) = C_B Π Πᵀ C_Cᵀ =
/// C_B C_Cᵀ`, the whole sum is one circulant.
#[derive(Clone, Debug)]
pub struct BinaryOperator {
    rhs: Vec<(String, String)>,
    spectrum: Vec<Complex64>,
}

impl BinaryOperator {
    /// `(B, C)` for every rule `A → B C`.
    pub fn right_hand_sides(&self) -> &[(String, String)] {
        &self.rhs
    }

    /// The dense sum `Σ Φ(B) Φ⁻¹(C)`.
    pub fn matrix(&self, space: &HrrSpace) -> Matrix {
        sum_matrices(
            space.dim(),
            self.rhs
                .iter()
                .map(|(b, c)| space.encode(b).matmul(&space.decode_op(c))),
        )
    }
}

fn sum_matrices(dim: usize, it: impl Iterator<Item = Matrix>) -> Matrix {
    it.fold(Matrix::zeros(dim), |mut acc, m| {
        acc += &m;
        acc
    })
}

/// Per-nonterminal rule operators, in declaration order.
#[derive(Clone, Debug)]
pub struct RuleOperators {
    dim: usize,
    nonterminal_order: Vec<String>,
    unary: Vec<(String, UnaryOperator)>,
    binary: Vec<(String, BinaryOperator)>,
}

impl RuleOperators {
    pub fn new(space: &HrrSpace, g: &Grammar) -> Self {
        let d = space.dim();
        let mut unary = Vec::new();
        let mut binary = Vec::new();
        for a in g.nonterminals() {
            let terminals: Vec<String> = g
                .unary_rules()
                .iter()
                .filter(|r| &r.lhs == a)
                .map(|r| r.terminal.clone())
                .collect();
            if !terminals.is_empty() {
                let mut spectrum = vec![Complex64::default(); d];
                for t in &terminals {
                    for (s, v) in spectrum.iter_mut().zip(space.vector_of(t).spectrum()) {
                        *s += v;
                    }
                }
                unary.push((
                    a.clone(),
                    UnaryOperator {
                        terminals,
                        spectrum,
                    },
                ));
            }
            let rhs: Vec<(String, String)> = g
                .binary_rules()
                .iter()
                .filter(|r| &r.lhs == a)
                .map(|r| (r.left.clone(), r.right.clone()))
                .collect();
            if !rhs.is_empty() {
                let mut spectrum = vec![Complex64::default(); d];
                for (b, c) in &rhs {
                    let (vb, vc) = (space.vector_of(b), space.vector_of(c));
                    for ((s, x), y) in spectrum.iter_mut().zip(vb.spectrum()).zip(vc.spectrum()) {
                        *s += x * y.conj();
                    }
                }
                binary.push((a.clone(), BinaryOperator { rhs, spectrum }));
            }
        }
        Self {
            dim: d,
            nonterminal_order: g.nonterminals().to_vec(),
            unary,
            binary,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nonterminal_order(&self) -> &[String] {
        &self.nonterminal_order
    }

    /// Nonterminals with at least one unary rule, in declaration order.
    pub fn unary(&self) -> &[(String, UnaryOperator)] {
        &self.unary
    }

    /// Nonterminals with at least one binary rule, in declaration order.
    pub fn binary(&self) -> &[(String, BinaryOperator)] {
        &self.binary
    }

    pub fn unary_for(&self, a: &str) -> Option<&UnaryOperator> {
        self.unary.iter().find(|(n, _)| n == a).map(|(_, op)| op)
    }

    pub fn binary_for(&self, a: &str) -> Option<&BinaryOperator> {
        self.binary.iter().find(|(n, _)| n == a).map(|(_, op)| op)
    }
}

/// Dense `U_A` for every nonterminal with unary rules.
pub fn encode_unary_rules(space: &HrrSpace, g: &Grammar) -> BTreeMap<String, Matrix> {
    RuleOperators::new(space, g)
        .unary
        .iter()
        .map(|(a, op)| (a.clone(), op.matrix(space)))
        .collect()
}

/// Dense `B_A` for every nonterminal with binary rules.
pub fn encode_binary_rules(space: &HrrSpace, g: &Grammar) -> BTreeMap<String, Matrix> {
    RuleOperators::new(space, g)
        .binary
        .iter()
        .map(|(a, op)| (a.clone(), op.matrix(space)))
        .collect()
}

/// `P_left = Σᵢ Φ⁻¹(i−1) Φ⁻¹(i) Φ⁻¹(aᵢ)`: the input string.
pub fn init_pleft(space: &HrrSpace, w: &Sentence, mode: MatmulMode) -> Matrix {
    match mode {
        MatmulMode::Dense => dense::init_pleft(space, w),
        MatmulMode::Structured => {
            structured::SpectralChart::from_sentence(space, w)
                .into_dist_chart(space)
                .p_left
        }
    }
}

/// One detection step: the identity score of the gate `P_A`.
#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub kind: RuleKind,
    pub i: usize,
    pub j: usize,
    pub symbol: String,
    pub identity_score: f64,
}

impl Detection {
    fn new(kind: RuleKind, i: usize, j: usize, symbol: &str, identity_score: f64) -> Self {
        Self {
            kind,
            i,
            j,
            symbol: symbol.to_owned(),
            identity_score,
        }
    }
}

/// Initialises the chart from `w` and runs the unary pass.
pub fn dcyk_unary(
    space: &HrrSpace,
    w: &Sentence,
    ops: &RuleOperators,
    mode: MatmulMode,
) -> DistChart {
    dcyk_unary_traced(space, w, ops, mode).0
}

/// [`dcyk_unary`], also returning every detection step in order.
pub fn dcyk_unary_traced(
    space: &HrrSpace,
    w: &Sentence,
    ops: &RuleOperators,
    mode: MatmulMode,
) -> (DistChart, Vec<Detection>) {
    check_ops(space, ops);
    match mode {
        MatmulMode::Dense => {
            let mut chart = DistChart::new(
                dense::init_pleft(space, w),
                Matrix::zeros(space.dim()),
                w.len(),
            );
            let trace = dense::unary_pass(space, w.len(), ops, &mut chart);
            (chart, trace)
        }
        MatmulMode::Structured => {
            let mut sc = structured::SpectralChart::from_sentence(space, w);
            let trace = sc.unary_pass(space, ops);
            (sc.into_dist_chart(space), trace)
        }
    }
}

/// Runs the binary pass over a chart produced by [`dcyk_unary`].
pub fn dcyk_binary(
    space: &HrrSpace,
    chart: &DistChart,
    ops: &RuleOperators,
    mode: MatmulMode,
) -> DistChart {
    dcyk_binary_traced(space, chart, ops, mode).0
}

/// [`dcyk_binary`], also returning every detection step in order.
pub fn dcyk_binary_traced(
    space: &HrrSpace,
    chart: &DistChart,
    ops: &RuleOperators,
    mode: MatmulMode,
) -> (DistChart, Vec<Detection>) {
    check_ops(space, ops);
    assert_eq!(
        chart.dim(),
        space.dim(),
        "chart does not live in this space"
    );
    match mode {
        MatmulMode::Dense => {
            let mut out = chart.clone();
            let trace = dense::binary_pass(space, ops, &mut out);
            (out, trace)
        }
        MatmulMode::Structured => {
            let mut sc = structured::SpectralChart::from_dist_chart(space, chart);
            let trace = sc.binary_pass(space, ops);
            (sc.into_dist_chart(space), trace)
        }
    }
}

fn check_ops(space: &HrrSpace, ops: &RuleOperators) {
    assert_eq!(
        ops.dim(),
        space.dim(),
        "rule operators were built for another space"
    );
}

/// The decoder's reading for one `(i, j, A)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CellScore {
    pub i: usize,
    pub j: usize,
    pub symbol: String,
    /// Entry `(0, 0)` of `Φ(A) Φ(j) Φ(i) P_left`.
    pub raw: f64,
    /// `σ(raw)`, the value compared against the threshold.
    pub score: f64,
}

/// Scores every span and every nonterminal of `g`.
///
/// Terminals are not queried: `P_left` still holds the input triples, which
/// would fire at every width-1 span.
pub fn decode_scores(
    space: &HrrSpace,
    chart: &DistChart,
    g: &Grammar,
    mode: MatmulMode,
) -> Vec<CellScore> {
    let n = chart.n();
    let mut out = Vec::new();
    let p0 = chart.p_left().column(0);
    for i in 0..n {
        for j in i + 1..=n {
            let (si, sj) = (index_symbol(i), index_symbol(j));
            let raws: Vec<f64> = match mode {
                MatmulMode::Dense => g
                    .nonterminals()
                    .iter()
                    .map(|a| {
                        let m = space
                            .encode(a)
                            .matmul(&space.encode(&sj))
                            .matmul(&space.encode(&si))
                            .matmul(chart.p_left());
                        m[(0, 0)]
                    })
                    .collect(),
                MatmulMode::Structured => {
                    structured::decode_span(space, p0, &si, &sj, g.nonterminals())
                }
            };
            for (a, raw) in g.nonterminals().iter().zip(raws) {
                out.push(CellScore {
                    i,
                    j,
                    symbol: a.clone(),
                    raw,
                    score: space.sigmoid(raw),
                });
            }
        }
    }
    out
}

/// Symbolic chart holding `A` at `(i, j)` whenever the score exceeds
/// `threshold`.
pub fn decode_chart(space: &HrrSpace, chart: &DistChart, g: &Grammar, threshold: f64) -> Chart {
    chart_from_scores(
        chart.n(),
        &decode_scores(space, chart, g, MatmulMode::Structured),
        threshold,
    )
}

pub fn chart_from_scores(n: usize, scores: &[CellScore], threshold: f64) -> Chart {
    let mut out = Chart::new(n);
    for s in scores.iter().filter(|s| s.score > threshold) {
        out.insert(s.i, s.j, &s.symbol);
    }
    out
}

/// Renders decoder scores as CSV (`i,j,symbol,raw,score`).
pub fn render_scores_csv(scores: &[CellScore]) -> String {
    let mut out = String::from("i,j,symbol,raw,score\n");
    for s in scores {
        out.push_str(&format!(
            "{},{},{},{:.17e},{:.17e}\n",
            s.i, s.j, s.symbol, s.raw, s.score
        ));
    }
    out
}

/// Parameters of one distributed parse beyond the space itself.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DcykConfig {
    pub threshold: f64,
    pub mode: MatmulMode,
}

impl Default for DcykConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            mode: MatmulMode::Structured,
        }
    }
}

/// Everything one distributed parse produces.
#[derive(Clone, Debug)]
pub struct DcykOutput {
    pub recognized: bool,
    pub chart: Chart,
    pub scores: Vec<CellScore>,
    pub dist: DistChart,
    pub detections: Vec<Detection>,
    pub unary_ms: f64,
    pub binary_ms: f64,
}

/// Init → unary → binary → decode, keeping every intermediate.
pub fn dcyk_run(
    space: &HrrSpace,
    g: &Grammar,
    ops: &RuleOperators,
    w: &Sentence,
    config: DcykConfig,
) -> Result<DcykOutput> {
    g.check_sentence(w)?;
    let t0 = std::time::Instant::now();
    let (after_unary, mut detections) = dcyk_unary_traced(space, w, ops, config.mode);
    let t1 = std::time::Instant::now();
    let (dist, binary_trace) = dcyk_binary_traced(space, &after_unary, ops, config.mode);
    detections.extend(binary_trace);
    let t2 = std::time::Instant::now();
    let scores = decode_scores(space, &dist, g, config.mode);
    let chart = chart_from_scores(dist.n(), &scores, config.threshold);
    let recognized = chart.contains(0, dist.n(), g.start());
    Ok(DcykOutput {
        recognized,
        chart,
        scores,
        dist,
        detections,
        unary_ms: (t1 - t0).as_secs_f64() * 1e3,
        binary_ms: (t2 - t1).as_secs_f64() * 1e3,
    })
}

/// Whether the decoded chart holds the start symbol over `(0, n)`, with
/// the chart itself.
pub fn dcyk_recognize(
    space: &HrrSpace,
    g: &Grammar,
    ops: &RuleOperators,
    w: &Sentence,
    config: DcykConfig,
) -> Result<(bool, Chart)> {
    let out = dcyk_run(space, g, ops, w, config)?;
    Ok((out.recognized, out.chart))
}
