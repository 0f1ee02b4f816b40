//! Fidelity of the distributed parser against the symbolic oracle.
//!
//! Scores are cell-level: a triple `(i, j, A)` is a true positive when both
//! the oracle chart and the decoded chart hold it. Each sentence gets its
//! own precision/recall/f1, and summaries report both the mean of those
//! per-sentence scores and scores pooled over all triples of a group.

use std::collections::{BTreeMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;

use crate::cyk::{cyk_parse, recognizes, Chart};
use crate::dcyk::{dcyk_run, DcykConfig, MatmulMode, RuleOperators, DEFAULT_THRESHOLD};
use crate::error::{Error, Result};
use crate::grammar::{Grammar, Sentence};
use crate::hrr::{HrrSpace, DEFAULT_BETA};

/// Dimensions swept when nothing else is asked for.
pub const DEFAULT_DIMS: [usize; 4] = [100, 500, 1000, 2000];

/// The dimension list of the full experimental protocol.
pub const FULL_PROTOCOL_DIMS: [usize; 7] = [100, 1000, 2000, 3000, 4000, 5000, 6000];

/// Sentences per sweep by default, and under the full protocol.
pub const DEFAULT_SENTENCES: usize = 50;
pub const FULL_PROTOCOL_SENTENCES: usize = 2000;

/// Longest generated sentence.
pub const DEFAULT_MAX_LEN: usize = 7;

/// Cell-level agreement between an oracle chart and a decoded one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellScores {
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl CellScores {
    /// Scores from raw counts.
    ///
    /// Precision is 1 when nothing was predicted and nothing was expected,
    /// and 0 when something was predicted but nothing was right; recall
    /// mirrors this. f1 is 0 when both are 0.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |den: usize| {
            if den == 0 {
                if tp + fp + fn_ == 0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                tp as f64 / den as f64
            }
        };
        let precision = ratio(tp + fp);
        let recall = ratio(tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            true_positive: tp,
            false_positive: fp,
            false_negative: fn_,
            precision,
            recall,
            f1,
        }
    }
}

/// Compares `decoded` against `oracle` triple by triple.
pub fn score_cells(oracle: &Chart, decoded: &Chart) -> Result<CellScores> {
    if oracle.n() != decoded.n() {
        return Err(Error::LengthMismatch {
            oracle: oracle.n(),
            decoded: decoded.n(),
        });
    }
    let truth: HashSet<(usize, usize, &str)> = oracle.triples().collect();
    let tp = decoded.triples().filter(|t| truth.contains(t)).count();
    let fp = decoded.len() - tp;
    let fn_ = truth.len() - tp;
    Ok(CellScores::from_counts(tp, fp, fn_))
}

/// Parameters of a sweep other than its grammars and sentences.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub dims: Vec<usize>,
    pub seeds: Vec<u64>,
    pub beta: f64,
    pub threshold: f64,
    pub mode: MatmulMode,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            dims: DEFAULT_DIMS.to_vec(),
            seeds: vec![0],
            beta: DEFAULT_BETA,
            threshold: DEFAULT_THRESHOLD,
            mode: MatmulMode::Structured,
            workers: 0,
        }
    }
}

/// One (grammar, dimension, seed, sentence) measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub grammar_id: String,
    pub dim: usize,
    pub seed: u64,
    pub sentence_id: usize,
    pub sentence_len: usize,
    pub oracle_recognized: bool,
    pub dcyk_recognized: bool,
    /// `Err` carries the failure message of a row that could not be run.
    pub scores: std::result::Result<CellScores, String>,
    pub mode: MatmulMode,
    pub unary_ms: f64,
    pub binary_ms: f64,
    pub wall_time_ms: f64,
}

impl SweepRow {
    fn key(&self) -> (String, usize, u64, usize) {
        (
            self.grammar_id.clone(),
            self.dim,
            self.seed,
            self.sentence_id,
        )
    }

    pub fn precision(&self) -> Option<f64> {
        self.scores.as_ref().ok().map(|s| s.precision)
    }

    pub fn recall(&self) -> Option<f64> {
        self.scores.as_ref().ok().map(|s| s.recall)
    }

    pub fn f1(&self) -> Option<f64> {
        self.scores.as_ref().ok().map(|s| s.f1)
    }
}

fn measure(
    space: &HrrSpace,
    ops: &RuleOperators,
    grammar_id: &str,
    g: &Grammar,
    sentence_id: usize,
    w: &Sentence,
    config: &SweepConfig,
) -> SweepRow {
    let t0 = Instant::now();
    let dcfg = DcykConfig {
        threshold: config.threshold,
        mode: config.mode,
    };
    let outcome = catch_unwind(AssertUnwindSafe(|| -> Result<_> {
        let oracle = cyk_parse(g, w)?;
        let out = dcyk_run(space, g, ops, w, dcfg)?;
        let scores = score_cells(&oracle, &out.chart)?;
        Ok((
            recognizes(&oracle, g),
            out.recognized,
            scores,
            out.unary_ms,
            out.binary_ms,
        ))
    }));
    let wall_time_ms = t0.elapsed().as_secs_f64() * 1e3;
    let base = SweepRow {
        grammar_id: grammar_id.to_owned(),
        dim: space.dim(),
        seed: space.seed(),
        sentence_id,
        sentence_len: w.len(),
        oracle_recognized: false,
        dcyk_recognized: false,
        scores: Err(String::new()),
        mode: config.mode,
        unary_ms: 0.0,
        binary_ms: 0.0,
        wall_time_ms,
    };
    match outcome {
        Ok(Ok((o, d, scores, unary_ms, binary_ms))) => SweepRow {
            oracle_recognized: o,
            dcyk_recognized: d,
            scores: Ok(scores),
            unary_ms,
            binary_ms,
            ..base
        },
        Ok(Err(e)) => SweepRow {
            scores: Err(e.to_string()),
            ..base
        },
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| (*s).to_owned()))
                .unwrap_or_else(|| "panic".to_owned());
            SweepRow {
                scores: Err(format!("panic: {msg}")),
                ..base
            }
        }
    }
}

/// Runs every (grammar, dimension, seed, sentence) combination.
///
/// Rows come back ordered by grammar (in input order), dimension, seed and
/// sentence, whatever order the workers finish in. With `partial`, each
/// finished row is appended to that file as it completes, and rows already
/// present there are reused instead of recomputed.
pub fn run_sweep(
    grammars: &[(String, Grammar)],
    sentences: &[Sentence],
    config: &SweepConfig,
    partial: Option<&Path>,
) -> Result<Vec<SweepRow>> {
    validate_config(config)?;
    let mut done: BTreeMap<(String, usize, u64, usize), SweepRow> = BTreeMap::new();
    if let Some(path) = partial.filter(|p| p.exists()) {
        let text = std::fs::read_to_string(path).map_err(|e| io_error(path, &e))?;
        for row in parse_rows_csv(&text)? {
            done.insert(row.key(), row);
        }
    }
    let sink: Option<Mutex<File>> = match partial {
        Some(path) => {
            let fresh = !path.exists()
                || std::fs::metadata(path)
                    .map(|m| m.len() == 0)
                    .unwrap_or(true);
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| io_error(path, &e))?;
            if fresh {
                f.write_all(format!("{}\n", PARTIAL_HEADER.join(",")).as_bytes())
                    .map_err(|e| io_error(path, &e))?;
            }
            Some(Mutex::new(f))
        }
        None => None,
    };

    let mut groups = Vec::new();
    for (gi, (id, g)) in grammars.iter().enumerate() {
        for &dim in &config.dims {
            for &seed in &config.seeds {
                let todo: Vec<usize> = (0..sentences.len())
                    .filter(|&k| !done.contains_key(&(id.clone(), dim, seed, k)))
                    .collect();
                if !todo.is_empty() {
                    groups.push((gi, id, g, dim, seed, todo));
                }
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    let computed: Vec<Result<Vec<SweepRow>>> = pool.install(|| {
        groups
            .par_iter()
            .map(|(_, id, g, dim, seed, todo)| {
                let space = HrrSpace::new(*dim, *seed)?.with_beta(config.beta)?;
                let ops = RuleOperators::new(&space, g);
                let mut rows = Vec::with_capacity(todo.len());
                for &k in todo {
                    let row = measure(&space, &ops, id, g, k, &sentences[k], config);
                    if let Some(sink) = &sink {
                        let mut f = sink.lock().expect("partial sink poisoned");
                        f.write_all(render_partial_row(&row).as_bytes())
                            .and_then(|_| f.flush())
                            .map_err(|e| {
                                Error::InvalidArgument(format!("cannot append partial row: {e}"))
                            })?;
                    }
                    rows.push(row);
                }
                Ok(rows)
            })
            .collect()
    });
    for rows in computed {
        for row in rows? {
            done.insert(row.key(), row);
        }
    }

    let grammar_rank: BTreeMap<&str, usize> = grammars
        .iter()
        .enumerate()
        .map(|(k, (id, _))| (id.as_str(), k))
        .collect();
    let dim_rank = |d: usize| {
        config
            .dims
            .iter()
            .position(|&x| x == d)
            .unwrap_or(usize::MAX)
    };
    let seed_rank = |s: u64| {
        config
            .seeds
            .iter()
            .position(|&x| x == s)
            .unwrap_or(usize::MAX)
    };
    let mut rows: Vec<SweepRow> = done
        .into_values()
        .filter(|r| {
            grammar_rank.contains_key(r.grammar_id.as_str())
                && config.dims.contains(&r.dim)
                && config.seeds.contains(&r.seed)
                && r.sentence_id < sentences.len()
        })
        .collect();
    rows.sort_by_key(|r| {
        (
            grammar_rank[r.grammar_id.as_str()],
            dim_rank(r.dim),
            seed_rank(r.seed),
            r.sentence_id,
        )
    });
    Ok(rows)
}

fn validate_config(config: &SweepConfig) -> Result<()> {
    if let Some(d) = config.dims.iter().find(|&&d| d < 8) {
        return Err(Error::InvalidArgument(format!(
            "dimension {d} is below the minimum of 8"
        )));
    }
    if !(config.threshold > 0.0 && config.threshold < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold must lie in (0, 1), got {}",
            config.threshold
        )));
    }
    if !(config.beta.is_finite() && config.beta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "beta must be positive, got {}",
            config.beta
        )));
    }
    Ok(())
}

fn io_error(path: &Path, e: &std::io::Error) -> Error {
    Error::InvalidArgument(format!("{}: {e}", path.display()))
}

/// Columns of the rows file. Timings are kept out so that identical runs
/// produce identical bytes.
pub const ROW_HEADER: [&str; 14] = [
    "grammar",
    "dim",
    "seed",
    "sentence_id",
    "sentence_len",
    "oracle_recognized",
    "dcyk_recognized",
    "true_positive",
    "false_positive",
    "false_negative",
    "precision",
    "recall",
    "f1",
    "error",
];

/// Columns of the timings file.
pub const TIMING_HEADER: [&str; 8] = [
    "grammar",
    "dim",
    "seed",
    "sentence_id",
    "mode",
    "unary_ms",
    "binary_ms",
    "wall_time_ms",
];

const PARTIAL_HEADER: [&str; 18] = [
    "grammar",
    "dim",
    "seed",
    "sentence_id",
    "sentence_len",
    "oracle_recognized",
    "dcyk_recognized",
    "true_positive",
    "false_positive",
    "false_negative",
    "precision",
    "recall",
    "f1",
    "error",
    "mode",
    "unary_ms",
    "binary_ms",
    "wall_time_ms",
];

fn row_fields(r: &SweepRow) -> Vec<String> {
    let (counts, metrics, error) = match &r.scores {
        Ok(s) => (
            [
                s.true_positive.to_string(),
                s.false_positive.to_string(),
                s.false_negative.to_string(),
            ],
            [
                s.precision.to_string(),
                s.recall.to_string(),
                s.f1.to_string(),
            ],
            String::new(),
        ),
        Err(e) => (Default::default(), Default::default(), e.clone()),
    };
    let mut out = vec![
        r.grammar_id.clone(),
        r.dim.to_string(),
        r.seed.to_string(),
        r.sentence_id.to_string(),
        r.sentence_len.to_string(),
        r.oracle_recognized.to_string(),
        r.dcyk_recognized.to_string(),
    ];
    out.extend(counts);
    out.extend(metrics);
    out.push(error);
    out
}

fn timing_fields(r: &SweepRow) -> Vec<String> {
    vec![
        r.mode.to_string(),
        format!("{:.3}", r.unary_ms),
        format!("{:.3}", r.binary_ms),
        format!("{:.3}", r.wall_time_ms),
    ]
}

fn write_csv(header: &[&str], records: impl Iterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for rec in records {
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

/// The rows file: one line per row, RFC 4180 quoting, no timings.
pub fn render_rows_csv(rows: &[SweepRow]) -> String {
    write_csv(&ROW_HEADER, rows.iter().map(row_fields))
}

/// Per-row timings, keyed like the rows file.
pub fn render_timings_csv(rows: &[SweepRow]) -> String {
    write_csv(
        &TIMING_HEADER,
        rows.iter().map(|r| {
            let mut f = row_fields(r);
            f.truncate(4);
            f.extend(timing_fields(r));
            f
        }),
    )
}

fn render_partial_row(r: &SweepRow) -> String {
    let mut f = row_fields(r);
    f.extend(timing_fields(r));
    let text = write_csv(&PARTIAL_HEADER, std::iter::once(f));
    text.split_once('\n')
        .map(|(_, rest)| rest.to_owned())
        .unwrap_or_default()
}

/// Reads a rows file, with or without the timing columns.
pub fn parse_rows_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Format {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    for name in ROW_HEADER {
        if col(name).is_none() {
            return Err(Error::Format {
                line: 1,
                message: format!("missing column `{name}`"),
            });
        }
    }
    let mut rows = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let line = k + 2;
        let bad = |m: String| Error::Format { line, message: m };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let get = |name: &str| col(name).and_then(|i| rec.get(i)).unwrap_or("");
        fn num<T: std::str::FromStr>(s: &str, name: &str, line: usize) -> Result<T> {
            s.parse().map_err(|_| Error::Format {
                line,
                message: format!("bad value `{s}` in column `{name}`"),
            })
        }
        let error = get("error");
        let scores = if error.is_empty() {
            Ok(CellScores {
                true_positive: num(get("true_positive"), "true_positive", line)?,
                false_positive: num(get("false_positive"), "false_positive", line)?,
                false_negative: num(get("false_negative"), "false_negative", line)?,
                precision: num(get("precision"), "precision", line)?,
                recall: num(get("recall"), "recall", line)?,
                f1: num(get("f1"), "f1", line)?,
            })
        } else {
            Err(error.to_owned())
        };
        let ms = |name: &str| -> Result<f64> {
            let s = get(name);
            if s.is_empty() {
                Ok(0.0)
            } else {
                num(s, name, line)
            }
        };
        let mode = match get("mode") {
            "" => MatmulMode::Structured,
            m => m.parse().map_err(|e: Error| bad(e.to_string()))?,
        };
        rows.push(SweepRow {
            grammar_id: get("grammar").to_owned(),
            dim: num(get("dim"), "dim", line)?,
            seed: num(get("seed"), "seed", line)?,
            sentence_id: num(get("sentence_id"), "sentence_id", line)?,
            sentence_len: num(get("sentence_len"), "sentence_len", line)?,
            oracle_recognized: num(get("oracle_recognized"), "oracle_recognized", line)?,
            dcyk_recognized: num(get("dcyk_recognized"), "dcyk_recognized", line)?,
            scores,
            mode,
            unary_ms: ms("unary_ms")?,
            binary_ms: ms("binary_ms")?,
            wall_time_ms: ms("wall_time_ms")?,
        });
    }
    Ok(rows)
}

/// Mean and spread of one group of rows.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupSummary {
    pub grammar_id: String,
    pub dim: usize,
    /// Sentence length, for the by-length grouping.
    pub length: Option<usize>,
    pub rows: usize,
    pub failed: usize,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_f1: f64,
    /// Half-widths of normal-approximation 95% intervals of the means.
    pub ci_precision: f64,
    pub ci_recall: f64,
    pub ci_f1: f64,
    /// Scores over the pooled triple counts of the group.
    pub pooled: CellScores,
    /// Fraction of rows whose recognition verdict matches the oracle.
    pub verdict_agreement: f64,
}

/// Summaries grouped by (grammar, dimension) and by (grammar, dimension,
/// sentence length).
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub by_dim: Vec<GroupSummary>,
    pub by_length: Vec<GroupSummary>,
}

impl Summary {
    pub fn group(&self, grammar_id: &str, dim: usize) -> Option<&GroupSummary> {
        self.by_dim
            .iter()
            .find(|g| g.grammar_id == grammar_id && g.dim == dim)
    }
}

fn mean_ci(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

fn summarize(
    grammar_id: &str,
    dim: usize,
    length: Option<usize>,
    rows: &[&SweepRow],
) -> GroupSummary {
    let ok: Vec<&CellScores> = rows.iter().filter_map(|r| r.scores.as_ref().ok()).collect();
    let pick = |f: fn(&CellScores) -> f64| ok.iter().map(|s| f(s)).collect::<Vec<f64>>();
    let (mean_precision, ci_precision) = mean_ci(&pick(|s| s.precision));
    let (mean_recall, ci_recall) = mean_ci(&pick(|s| s.recall));
    let (mean_f1, ci_f1) = mean_ci(&pick(|s| s.f1));
    let sum = |f: fn(&CellScores) -> usize| ok.iter().map(|s| f(s)).sum::<usize>();
    let pooled = CellScores::from_counts(
        sum(|s| s.true_positive),
        sum(|s| s.false_positive),
        sum(|s| s.false_negative),
    );
    let agree = rows
        .iter()
        .filter(|r| r.scores.is_ok() && r.oracle_recognized == r.dcyk_recognized)
        .count();
    GroupSummary {
        grammar_id: grammar_id.to_owned(),
        dim,
        length,
        rows: rows.len(),
        failed: rows.len() - ok.len(),
        mean_precision,
        mean_recall,
        mean_f1,
        ci_precision,
        ci_recall,
        ci_f1,
        pooled,
        verdict_agreement: if ok.is_empty() {
            f64::NAN
        } else {
            agree as f64 / ok.len() as f64
        },
    }
}

/// Groups rows in order of first appearance of each grammar and dimension.
pub fn aggregate(rows: &[SweepRow]) -> Summary {
    let mut order: Vec<(String, usize)> = Vec::new();
    for r in rows {
        let key = (r.grammar_id.clone(), r.dim);
        if !order.contains(&key) {
            order.push(key);
        }
    }
    let mut by_dim = Vec::new();
    let mut by_length = Vec::new();
    for (g, d) in &order {
        let group: Vec<&SweepRow> = rows
            .iter()
            .filter(|r| &r.grammar_id == g && r.dim == *d)
            .collect();
        by_dim.push(summarize(g, *d, None, &group));
        let mut lengths: Vec<usize> = group.iter().map(|r| r.sentence_len).collect();
        lengths.sort_unstable();
        lengths.dedup();
        for len in lengths {
            let sub: Vec<&SweepRow> = group
                .iter()
                .copied()
                .filter(|r| r.sentence_len == len)
                .collect();
            by_length.push(summarize(g, *d, Some(len), &sub));
        }
    }
    Summary { by_dim, by_length }
}

const SUMMARY_HEADER: [&str; 18] = [
    "grouping",
    "grammar",
    "dim",
    "length",
    "rows",
    "failed",
    "mean_precision",
    "mean_recall",
    "mean_f1",
    "ci95_precision",
    "ci95_recall",
    "ci95_f1",
    "pooled_true_positive",
    "pooled_false_positive",
    "pooled_false_negative",
    "pooled_precision",
    "pooled_recall",
    "pooled_f1",
];

fn summary_fields(grouping: &str, s: &GroupSummary) -> Vec<String> {
    let f = |x: f64| format!("{x:.6}");
    vec![
        grouping.to_owned(),
        s.grammar_id.clone(),
        s.dim.to_string(),
        s.length.map(|l| l.to_string()).unwrap_or_default(),
        s.rows.to_string(),
        s.failed.to_string(),
        f(s.mean_precision),
        f(s.mean_recall),
        f(s.mean_f1),
        f(s.ci_precision),
        f(s.ci_recall),
        f(s.ci_f1),
        s.pooled.true_positive.to_string(),
        s.pooled.false_positive.to_string(),
        s.pooled.false_negative.to_string(),
        f(s.pooled.precision),
        f(s.pooled.recall),
        f(s.pooled.f1),
    ]
}

/// Both groupings as one CSV, distinguished by the `grouping` column.
pub fn render_summary_csv(summary: &Summary) -> String {
    write_csv(
        &SUMMARY_HEADER,
        summary
            .by_dim
            .iter()
            .map(|s| summary_fields("dim", s))
            .chain(
                summary
                    .by_length
                    .iter()
                    .map(|s| summary_fields("length", s)),
            ),
    )
}

/// Aligned plain-text rendering of [`Summary::by_dim`] and
/// [`Summary::by_length`].
pub fn render_summary_table(summary: &Summary) -> String {
    let header = [
        "grammar",
        "dim",
        "len",
        "rows",
        "precision",
        "recall",
        "f1",
        "±f1",
        "verdicts",
    ];
    let line = |s: &GroupSummary| {
        vec![
            s.grammar_id.clone(),
            s.dim.to_string(),
            s.length
                .map(|l| l.to_string())
                .unwrap_or_else(|| "all".to_owned()),
            s.rows.to_string(),
            format!("{:.4}", s.mean_precision),
            format!("{:.4}", s.mean_recall),
            format!("{:.4}", s.mean_f1),
            format!("{:.4}", s.ci_f1),
            format!("{:.3}", s.verdict_agreement),
        ]
    };
    let mut out = String::new();
    for (title, groups) in [
        ("by dimension", &summary.by_dim),
        ("by sentence length", &summary.by_length),
    ] {
        let body: Vec<Vec<String>> = groups.iter().map(line).collect();
        let widths: Vec<usize> = (0..header.len())
            .map(|c| {
                body.iter()
                    .map(|r| r[c].chars().count())
                    .chain([header[c].chars().count()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let fmt_row = |cells: Vec<String>| {
            let padded: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect();
            format!("{}\n", padded.join("  ").trim_end())
        };
        out.push_str(&format!("{title}\n"));
        out.push_str(&fmt_row(header.iter().map(|h| h.to_string()).collect()));
        for r in body {
            out.push_str(&fmt_row(r));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_grammar;

    fn chart(n: usize, triples: &[(usize, usize, &str)]) -> Chart {
        let mut c = Chart::new(n);
        for &(i, j, a) in triples {
            c.insert(i, j, a);
        }
        c
    }

    const FIG1_TABLE: [(usize, usize, &str); 5] = [
        (0, 1, "D"),
        (1, 2, "D"),
        (2, 3, "E"),
        (1, 3, "S"),
        (0, 3, "S"),
    ];

    #[test]
    fn identical_charts_score_perfectly() {
        let c = chart(3, &FIG1_TABLE);
        let s = score_cells(&c, &c).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
        let e = Chart::new(3);
        let s = score_cells(&e, &e).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn empty_decoding_has_zero_recall() {
        let s = score_cells(&chart(3, &FIG1_TABLE), &Chart::new(3)).unwrap();
        assert_eq!((s.recall, s.f1), (0.0, 0.0));
        assert_eq!(s.precision, 0.0);
    }

    #[test]
    fn one_missing_cell() {
        let decoded = chart(3, &FIG1_TABLE[..4]);
        let s = score_cells(&chart(3, &FIG1_TABLE), &decoded).unwrap();
        assert_eq!(
            (s.true_positive, s.false_positive, s.false_negative),
            (4, 0, 1)
        );
        assert_eq!(s.precision, 1.0);
        assert!((s.recall - 0.8).abs() < 1e-15);
        assert!((s.f1 - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn spurious_cells_lower_precision() {
        let mut triples = FIG1_TABLE.to_vec();
        triples.push((0, 2, "S"));
        let s = score_cells(&chart(3, &FIG1_TABLE), &chart(3, &triples)).unwrap();
        assert_eq!(
            (s.true_positive, s.false_positive, s.false_negative),
            (5, 1, 0)
        );
        assert!((s.precision - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(s.recall, 1.0);
    }

    #[test]
    fn mismatched_lengths_are_an_error() {
        assert_eq!(
            score_cells(&Chart::new(3), &Chart::new(2)).unwrap_err(),
            Error::LengthMismatch {
                oracle: 3,
                decoded: 2
            }
        );
    }

    fn row(grammar: &str, dim: usize, len: usize, f1: f64) -> SweepRow {
        SweepRow {
            grammar_id: grammar.into(),
            dim,
            seed: 0,
            sentence_id: 0,
            sentence_len: len,
            oracle_recognized: true,
            dcyk_recognized: true,
            scores: Ok(CellScores {
                true_positive: 1,
                false_positive: 0,
                false_negative: 0,
                precision: f1,
                recall: f1,
                f1,
            }),
            mode: MatmulMode::Structured,
            unary_ms: 1.0,
            binary_ms: 2.0,
            wall_time_ms: 3.5,
        }
    }

    #[test]
    fn aggregate_single_row_and_pair() {
        let s = aggregate(&[row("G0", 100, 3, 0.4)]);
        assert_eq!(s.by_dim.len(), 1);
        assert_eq!(s.by_dim[0].mean_f1, 0.4);
        assert_eq!(s.by_dim[0].ci_f1, 0.0);
        let s = aggregate(&[row("G0", 100, 3, 0.4), row("G0", 100, 5, 0.6)]);
        assert!((s.by_dim[0].mean_f1 - 0.5).abs() < 1e-15);
        assert_eq!(
            s.by_length.iter().map(|g| g.length).collect::<Vec<_>>(),
            [Some(3), Some(5)]
        );
        assert!(render_summary_table(&s).contains("by sentence length"));
        assert!(render_summary_csv(&s).starts_with("grouping,grammar,dim,length"));
    }

    #[test]
    fn rows_round_trip_through_csv() {
        let mut rows = vec![row("G,0", 100, 3, 0.25), row("G1", 500, 2, 1.0 / 3.0)];
        rows[1].scores = Err("bad \"token\"".into());
        let partial: String = format!(
            "{}\n{}",
            PARTIAL_HEADER.join(","),
            rows.iter().map(render_partial_row).collect::<String>()
        );
        let back = parse_rows_csv(&partial).unwrap();
        assert_eq!(back[0].f1(), Some(0.25));
        assert_eq!(back[1].scores, Err("bad \"token\"".to_owned()));
        assert_eq!(back[0].wall_time_ms, 3.5);
        let plain = parse_rows_csv(&render_rows_csv(&rows)).unwrap();
        assert_eq!(render_rows_csv(&plain), render_rows_csv(&rows));
        assert!(render_rows_csv(&rows).contains("\"G,0\""));
    }

    #[test]
    fn sweep_is_ordered_deterministic_and_resumable() {
        let g = parse_grammar("start: S\nS -> D E\nS -> D S\nD -> a\nE -> b\n").unwrap();
        let grammars = vec![("fig1".to_owned(), g)];
        let sentences: Vec<Sentence> = ["a b", "a a b", "b"]
            .iter()
            .map(|s| Sentence::parse(s).unwrap())
            .collect();
        let config = SweepConfig {
            dims: vec![24, 16],
            seeds: vec![3, 1],
            workers: 2,
            ..SweepConfig::default()
        };
        let rows = run_sweep(&grammars, &sentences, &config, None).unwrap();
        assert_eq!(rows.len(), 2 * 2 * 3);
        let keys: Vec<(usize, u64, usize)> = rows
            .iter()
            .map(|r| (r.dim, r.seed, r.sentence_id))
            .collect();
        assert_eq!(keys[..4], [(24, 3, 0), (24, 3, 1), (24, 3, 2), (24, 1, 0)]);
        assert!(!rows[2].oracle_recognized);
        let again = run_sweep(&grammars, &sentences, &config, None).unwrap();
        assert_eq!(render_rows_csv(&rows), render_rows_csv(&again));

        let dir = std::env::temp_dir().join(format!("dcyk-sweep-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let partial = dir.join("rows.partial.csv");
        let _ = std::fs::remove_file(&partial);
        let small = SweepConfig {
            dims: vec![24],
            ..config.clone()
        };
        run_sweep(&grammars, &sentences, &small, Some(&partial)).unwrap();
        let resumed = run_sweep(&grammars, &sentences, &config, Some(&partial)).unwrap();
        assert_eq!(render_rows_csv(&resumed), render_rows_csv(&rows));
        let lines = std::fs::read_to_string(&partial).unwrap().lines().count();
        assert_eq!(lines, 1 + rows.len());
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn unknown_tokens_become_failed_rows() {
        let g = parse_grammar("start: S\nS -> D E\nD -> a\nE -> b\n").unwrap();
        let sentences = vec![Sentence::parse("a z").unwrap()];
        let config = SweepConfig {
            dims: vec![16],
            ..SweepConfig::default()
        };
        let rows = run_sweep(&[("g".into(), g)], &sentences, &config, None).unwrap();
        assert!(rows[0].scores.as_ref().unwrap_err().contains("z"));
        assert_eq!(aggregate(&rows).by_dim[0].failed, 1);
    }

    #[test]
    fn empty_sentence_list_gives_no_rows() {
        let g = parse_grammar("start: S\nS -> D E\nD -> a\nE -> b\n").unwrap();
        assert!(
            run_sweep(&[("g".into(), g)], &[], &SweepConfig::default(), None)
                .unwrap()
                .is_empty()
        );
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let g = parse_grammar("start: S\nS -> D E\nD -> a\nE -> b\n").unwrap();
        let gs = [("g".to_owned(), g)];
        for bad in [
            SweepConfig {
                dims: vec![4],
                ..SweepConfig::default()
            },
            SweepConfig {
                threshold: 1.0,
                ..SweepConfig::default()
            },
            SweepConfig {
                beta: 0.0,
                ..SweepConfig::default()
            },
        ] {
            assert!(run_sweep(&gs, &[], &bad, None).is_err());
        }
    }
}
