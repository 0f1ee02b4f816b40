//! `dcyk`: symbolic and distributed CYK parsing from the command line.
//!
//! Exit status is 0 when the sentence is recognized (or, for `compare`,
//! when the charts agree), 1 when it is not, and 2 on any error.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dcyk_core::calibration::{self, Calibration};
use dcyk_core::cyk::{cyk_parse, recognizes, Chart};
use dcyk_core::dcyk::{dcyk_run, render_scores_csv, DcykConfig, RuleOperators};
use dcyk_core::eval::{
    aggregate, render_rows_csv, render_summary_csv, render_summary_table, render_timings_csv,
    run_sweep, score_cells, SweepConfig,
};
use dcyk_core::grammar::{
    generate_sentences, parse_grammar, parse_sentences, render_sentences, Grammar, Sentence,
};
use dcyk_core::{corpus, HrrSpace};

use crate::config::{Partial, Purpose, RunConfig};

#[derive(Parser, Debug)]
#[command(
    name = "dcyk",
    version,
    about = "CYK recognition over holographic matrix representations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Symbolic CYK: print the chart and the verdict.
    Parse(ParseArgs),
    /// Distributed CYK: print the decoded chart in the same format.
    Dparse(ParseArgs),
    /// Score the distributed parser against the symbolic one over a grid of
    /// grammars, dimensions, seeds and sentences.
    Sweep(SweepArgs),
    /// Generate random sentences from a grammar.
    Gen(GenArgs),
    /// Compare two chart files; the first is taken as the reference.
    Compare {
        reference: PathBuf,
        candidate: PathBuf,
    },
    /// Recompute the tolerance table of the encoding algebra.
    Calibrate(CalibrateArgs),
}

/// Settings shared by every command that reads a configuration.
#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// `key = value` file with defaults for any of the flags below.
    #[arg(long, env = "DCYK_CONFIG")]
    config: Option<PathBuf>,
    /// Grammar file, or one of the bundled names fig1, g0 … g4.
    #[arg(long, env = "DCYK_GRAMMAR", value_delimiter = ',')]
    grammar: Vec<String>,
    #[arg(long, env = "DCYK_DIM", value_delimiter = ',')]
    dim: Vec<usize>,
    #[arg(long, env = "DCYK_SEED", value_delimiter = ',')]
    seed: Vec<u64>,
    #[arg(long, env = "DCYK_BETA")]
    beta: Option<f64>,
    #[arg(long, env = "DCYK_THRESHOLD")]
    threshold: Option<f64>,
    #[arg(long, env = "DCYK_OUT")]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, env = "DCYK_WORKERS")]
    workers: Option<usize>,
    /// FFT products (true, the default) or literal dense GEMMs (false).
    #[arg(long, env = "DCYK_STRUCTURED_MATMUL", num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    structured_matmul: Option<bool>,
    /// Also emit the raw and squashed decoder score of every cell.
    #[arg(long, env = "DCYK_DUMP_SCORES", num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    dump_scores: Option<bool>,
    /// 2000 sentences, seven dimensions up to 6000 and all five bundled
    /// grammars.
    #[arg(long, env = "DCYK_FULL_PROTOCOL", num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    full_protocol: Option<bool>,
}

#[derive(Args, Debug)]
struct ParseArgs {
    #[command(flatten)]
    common: Common,
    /// Sentence tokens, e.g. `a a b`.
    #[arg(env = "DCYK_SENTENCE")]
    tokens: Vec<String>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Sentence file; generated from the first grammar when absent.
    #[arg(long, env = "DCYK_SENTENCES")]
    sentences: Option<PathBuf>,
    #[arg(long, env = "DCYK_COUNT")]
    count: Option<usize>,
    #[arg(long, env = "DCYK_MAX_LEN")]
    max_len: Option<usize>,
    #[arg(long, env = "DCYK_SENTENCE_SEED")]
    sentence_seed: Option<u64>,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, env = "DCYK_COUNT")]
    count: Option<usize>,
    #[arg(long, env = "DCYK_MAX_LEN")]
    max_len: Option<usize>,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    #[arg(long, value_delimiter = ',', default_values_t = calibration::DEFAULT_DIMS)]
    dim: Vec<usize>,
    #[arg(long, default_value_t = calibration::DEFAULT_TRIALS)]
    trials: usize,
    #[arg(long, default_value_t = calibration::DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn partial(&self) -> Partial {
        let non_empty = |v: &[String]| (!v.is_empty()).then(|| v.to_vec());
        Partial {
            grammars: non_empty(&self.grammar),
            dims: (!self.dim.is_empty()).then(|| self.dim.clone()),
            seeds: (!self.seed.is_empty()).then(|| self.seed.clone()),
            beta: self.beta,
            threshold: self.threshold,
            out: self.out.clone(),
            workers: self.workers,
            structured_matmul: self.structured_matmul,
            dump_scores: self.dump_scores,
            full_protocol: self.full_protocol,
            ..Partial::default()
        }
    }

    /// Flags and environment first, then the config file.
    fn resolve(&self, extra: Partial, purpose: Purpose) -> Result<RunConfig> {
        let file = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("cannot read config {}", path.display()))?;
                Partial::parse(&text).with_context(|| format!("in config {}", path.display()))?
            }
            None => Partial::default(),
        };
        RunConfig::resolve(extra.or(self.partial()).or(file), purpose)
    }
}

fn load_grammar(name: &str) -> Result<Grammar> {
    let path = Path::new(name);
    if path.exists() {
        let text =
            fs::read_to_string(path).with_context(|| format!("cannot read grammar {name}"))?;
        return parse_grammar(&text).with_context(|| format!("in grammar {name}"));
    }
    corpus::by_name(name).with_context(|| format!("grammar file {name} does not exist"))
}

fn grammar_id(name: &str) -> String {
    Path::new(name)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| name.to_owned())
}

fn single<T: Copy + std::fmt::Display>(values: &[T], what: &str) -> Result<T> {
    match values {
        [v] => Ok(*v),
        _ => bail!(
            "this command takes exactly one {what}, got {}",
            values.len()
        ),
    }
}

/// Chart text followed by the verdict as a comment line, so the output can
/// be read back with [`Chart::parse`].
fn render_verdict(chart: &Chart, recognized: bool) -> String {
    let verdict = if recognized {
        "recognized"
    } else {
        "not recognized"
    };
    format!("# n = {}\n{}# {verdict}\n", chart.n(), chart.render())
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .with_context(|| format!("cannot create {}", parent.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn sentence_of(config: &RunConfig) -> Result<Sentence> {
    let text = config.sentence.as_deref().context("no sentence given")?;
    Ok(Sentence::parse(text)?)
}

fn cmd_parse(args: &ParseArgs, distributed: bool) -> Result<bool> {
    let extra = Partial {
        sentence: (!args.tokens.is_empty()).then(|| args.tokens.join(" ")),
        ..Partial::default()
    };
    let config = args.common.resolve(extra, Purpose::Parse)?;
    let g = load_grammar(single(
        &config
            .grammars
            .iter()
            .map(String::as_str)
            .collect::<Vec<_>>(),
        "grammar",
    )?)?;
    let w = sentence_of(&config)?;
    let (chart, recognized, scores) = if distributed {
        let dim = single(&config.dims, "dimension")?;
        let seed = single(&config.seeds, "seed")?;
        let space = HrrSpace::new(dim, seed)?.with_beta(config.beta)?;
        let ops = RuleOperators::new(&space, &g);
        let out = dcyk_run(
            &space,
            &g,
            &ops,
            &w,
            DcykConfig {
                threshold: config.threshold,
                mode: config.mode(),
            },
        )?;
        (out.chart, out.recognized, Some(out.scores))
    } else {
        let chart = cyk_parse(&g, &w)?;
        let recognized = recognizes(&chart, &g);
        (chart, recognized, None)
    };
    let text = render_verdict(&chart, recognized);
    print!("{text}");
    let scores_csv = scores
        .filter(|_| config.dump_scores)
        .map(|s| render_scores_csv(&s));
    match &config.out {
        Some(dir) => {
            write_file(&dir.join("chart.txt"), &text)?;
            if let Some(csv) = &scores_csv {
                write_file(&dir.join("scores.csv"), csv)?;
            }
            write_file(&dir.join("config.txt"), &config.render())?;
        }
        None => {
            if let Some(csv) = &scores_csv {
                eprint!("{csv}");
            }
        }
    }
    Ok(recognized)
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let extra = Partial {
        sentences: args.sentences.clone(),
        count: args.count,
        max_len: args.max_len,
        sentence_seed: args.sentence_seed,
        ..Partial::default()
    };
    let config = args.common.resolve(extra, Purpose::Sweep)?;
    let out = config
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("sweep-out"));
    let grammars: Vec<(String, Grammar)> = config
        .grammars
        .iter()
        .map(|name| Ok((grammar_id(name), load_grammar(name)?)))
        .collect::<Result<_>>()?;
    let sentences = match &config.sentences {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read sentences {}", path.display()))?;
            parse_sentences(&text)?
        }
        None => generate_sentences(
            &grammars[0].1,
            config.count,
            config.max_len,
            config.sentence_seed,
        )?,
    };
    fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
    let partial = out.join("rows.partial.csv");
    let config_path = out.join("config.txt");
    // The worker count does not affect results, so a run may resume with another.
    let settings = |text: &str| {
        text.lines()
            .filter(|l| !l.starts_with("workers "))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let previous = fs::read_to_string(&config_path).ok();
    if partial.exists() && previous.as_deref().map(settings) != Some(settings(&config.render())) {
        bail!(
            "{} was written under a different configuration; remove it to start over",
            partial.display()
        );
    }
    write_file(&config_path, &config.render())?;
    write_file(&out.join("sentences.txt"), &render_sentences(&sentences))?;
    let sweep = SweepConfig {
        dims: config.dims.clone(),
        seeds: config.seeds.clone(),
        beta: config.beta,
        threshold: config.threshold,
        mode: config.mode(),
        workers: config.workers,
    };
    let rows = run_sweep(&grammars, &sentences, &sweep, Some(&partial))?;
    let summary = aggregate(&rows);
    write_file(&out.join("rows.csv"), &render_rows_csv(&rows))?;
    write_file(&out.join("timings.csv"), &render_timings_csv(&rows))?;
    write_file(&out.join("summary.csv"), &render_summary_csv(&summary))?;
    let table = render_summary_table(&summary);
    write_file(&out.join("summary.txt"), &table)?;
    fs::remove_file(&partial).with_context(|| format!("cannot remove {}", partial.display()))?;
    print!("{table}");
    Ok(())
}

fn cmd_gen(args: &GenArgs) -> Result<()> {
    let extra = Partial {
        count: args.count,
        max_len: args.max_len,
        ..Partial::default()
    };
    let config = args.common.resolve(extra, Purpose::Generate)?;
    let name = single(
        &config
            .grammars
            .iter()
            .map(String::as_str)
            .collect::<Vec<_>>(),
        "grammar",
    )?;
    let g = load_grammar(name)?;
    let seed = single(&config.seeds, "seed")?;
    let text = render_sentences(&generate_sentences(&g, config.count, config.max_len, seed)?);
    match &config.out {
        Some(path) => {
            write_file(path, &text)?;
            let mut sidecar = path.clone().into_os_string();
            sidecar.push(".config.txt");
            write_file(Path::new(&sidecar), &config.render())?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_compare(reference: &Path, candidate: &Path) -> Result<bool> {
    let read = |p: &Path| -> Result<Chart> {
        let text =
            fs::read_to_string(p).with_context(|| format!("cannot read chart {}", p.display()))?;
        Chart::parse(&text, None).with_context(|| format!("in chart {}", p.display()))
    };
    let (a, b) = (read(reference)?, read(candidate)?);
    let n = a.n().max(b.n());
    let (a, b) = (
        Chart::parse(&a.render(), Some(n))?,
        Chart::parse(&b.render(), Some(n))?,
    );
    for (i, j, s) in a.triples().filter(|&(i, j, s)| !b.contains(i, j, s)) {
        println!("- {i} {j} : {s}");
    }
    for (i, j, s) in b.triples().filter(|&(i, j, s)| !a.contains(i, j, s)) {
        println!("+ {i} {j} : {s}");
    }
    let scores = score_cells(&a, &b)?;
    println!(
        "precision {:.6} recall {:.6} f1 {:.6}",
        scores.precision, scores.recall, scores.f1
    );
    Ok(scores.false_positive == 0 && scores.false_negative == 0)
}

fn cmd_calibrate(args: &CalibrateArgs) -> Result<()> {
    let records = args
        .dim
        .iter()
        .map(|&d| calibration::calibrate(d, args.trials, args.seed))
        .collect::<Result<Vec<_>, _>>()?;
    let text = Calibration::new(records).render();
    match &args.out {
        Some(path) => write_file(path, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match &cli.command {
        Command::Parse(args) => cmd_parse(args, false),
        Command::Dparse(args) => cmd_parse(args, true),
        Command::Sweep(args) => cmd_sweep(args).map(|_| true),
        Command::Gen(args) => cmd_gen(args).map(|_| true),
        Command::Compare {
            reference,
            candidate,
        } => cmd_compare(reference, candidate),
        Command::Calibrate(args) => cmd_calibrate(args).map(|_| true),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
