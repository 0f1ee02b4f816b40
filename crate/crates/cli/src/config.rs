//! Run configuration: command-line flags, `DCYK_*` environment variables
//! and flat `key = value` files, resolved in that order of precedence over
//! built-in defaults.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use dcyk_core::dcyk::DEFAULT_THRESHOLD;
use dcyk_core::eval::{
    DEFAULT_DIMS, DEFAULT_MAX_LEN, DEFAULT_SENTENCES, FULL_PROTOCOL_DIMS, FULL_PROTOCOL_SENTENCES,
};
use dcyk_core::hrr::DEFAULT_BETA;
use dcyk_core::{corpus, MatmulMode};

/// Smallest dimension accepted.
pub const MIN_DIM: usize = 8;

/// Dimension used by single-parse commands when none is given.
pub const DEFAULT_PARSE_DIM: usize = 2000;

/// Every setting, some of them unset. Both the command line and config
/// files produce one of these.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Partial {
    pub grammars: Option<Vec<String>>,
    pub sentence: Option<String>,
    pub sentences: Option<PathBuf>,
    pub count: Option<usize>,
    pub max_len: Option<usize>,
    pub sentence_seed: Option<u64>,
    pub dims: Option<Vec<usize>>,
    pub seeds: Option<Vec<u64>>,
    pub beta: Option<f64>,
    pub threshold: Option<f64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub structured_matmul: Option<bool>,
    pub dump_scores: Option<bool>,
    pub full_protocol: Option<bool>,
}

fn list<T: FromStr>(value: &str) -> std::result::Result<Vec<T>, T::Err> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect()
}

impl Partial {
    /// Reads a `key = value` file. Blank lines and `#` comments are
    /// ignored; list values are comma separated.
    pub fn parse(text: &str) -> Result<Self> {
        let mut p = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let line_no = idx + 1;
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("line {line_no}: expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = || format!("line {line_no}: bad value `{value}` for `{key}`");
            match key {
                "grammar" => p.grammars = Some(list(value).with_context(bad)?),
                "sentence" => p.sentence = Some(value.to_owned()),
                "sentences" => p.sentences = Some(value.into()),
                "count" => p.count = Some(value.parse().with_context(bad)?),
                "max_len" => p.max_len = Some(value.parse().with_context(bad)?),
                "sentence_seed" => p.sentence_seed = Some(value.parse().with_context(bad)?),
                "dim" => p.dims = Some(list(value).with_context(bad)?),
                "seed" => p.seeds = Some(list(value).with_context(bad)?),
                "beta" => p.beta = Some(value.parse().with_context(bad)?),
                "threshold" => p.threshold = Some(value.parse().with_context(bad)?),
                "out" => p.out = Some(value.into()),
                "workers" => p.workers = Some(value.parse().with_context(bad)?),
                "structured_matmul" => p.structured_matmul = Some(value.parse().with_context(bad)?),
                "dump_scores" => p.dump_scores = Some(value.parse().with_context(bad)?),
                "full_protocol" => p.full_protocol = Some(value.parse().with_context(bad)?),
                other => bail!("line {line_no}: unknown key `{other}`"),
            }
        }
        Ok(p)
    }

    /// Fills every field unset in `self` from `other`.
    pub fn or(self, other: Self) -> Self {
        Self {
            grammars: self.grammars.or(other.grammars),
            sentence: self.sentence.or(other.sentence),
            sentences: self.sentences.or(other.sentences),
            count: self.count.or(other.count),
            max_len: self.max_len.or(other.max_len),
            sentence_seed: self.sentence_seed.or(other.sentence_seed),
            dims: self.dims.or(other.dims),
            seeds: self.seeds.or(other.seeds),
            beta: self.beta.or(other.beta),
            threshold: self.threshold.or(other.threshold),
            out: self.out.or(other.out),
            workers: self.workers.or(other.workers),
            structured_matmul: self.structured_matmul.or(other.structured_matmul),
            dump_scores: self.dump_scores.or(other.dump_scores),
            full_protocol: self.full_protocol.or(other.full_protocol),
        }
    }
}

/// Which command a configuration is resolved for. Defaults differ.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Purpose {
    Parse,
    Sweep,
    Generate,
}

/// A fully resolved and validated configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub grammars: Vec<String>,
    pub sentence: Option<String>,
    pub sentences: Option<PathBuf>,
    pub count: usize,
    pub max_len: usize,
    pub sentence_seed: u64,
    pub dims: Vec<usize>,
    pub seeds: Vec<u64>,
    pub beta: f64,
    pub threshold: f64,
    pub out: Option<PathBuf>,
    pub workers: usize,
    pub structured_matmul: bool,
    pub dump_scores: bool,
    pub full_protocol: bool,
}

impl RunConfig {
    pub fn resolve(p: Partial, purpose: Purpose) -> Result<Self> {
        let full_protocol = p.full_protocol.unwrap_or(false);
        let default_grammars = if full_protocol && purpose == Purpose::Sweep {
            corpus::family()
                .into_iter()
                .map(|(id, _)| id.to_ascii_lowercase())
                .collect()
        } else {
            vec!["g0".to_owned()]
        };
        let default_dims = match (purpose, full_protocol) {
            (Purpose::Sweep, true) => FULL_PROTOCOL_DIMS.to_vec(),
            (Purpose::Sweep, false) => DEFAULT_DIMS.to_vec(),
            _ => vec![DEFAULT_PARSE_DIM],
        };
        let default_count = if full_protocol {
            FULL_PROTOCOL_SENTENCES
        } else {
            DEFAULT_SENTENCES
        };
        let config = Self {
            grammars: p
                .grammars
                .filter(|g| !g.is_empty())
                .unwrap_or(default_grammars),
            sentence: p.sentence,
            sentences: p.sentences,
            count: p.count.unwrap_or(default_count),
            max_len: p.max_len.unwrap_or(DEFAULT_MAX_LEN),
            sentence_seed: p.sentence_seed.unwrap_or(corpus::SENTENCE_SEED),
            dims: p.dims.filter(|d| !d.is_empty()).unwrap_or(default_dims),
            seeds: p.seeds.filter(|s| !s.is_empty()).unwrap_or_else(|| vec![0]),
            beta: p.beta.unwrap_or(DEFAULT_BETA),
            threshold: p.threshold.unwrap_or(DEFAULT_THRESHOLD),
            out: p.out,
            workers: p.workers.unwrap_or(0),
            structured_matmul: p.structured_matmul.unwrap_or(true),
            dump_scores: p.dump_scores.unwrap_or(false),
            full_protocol,
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        if let Some(d) = self.dims.iter().find(|&&d| d < MIN_DIM) {
            bail!("dimension {d} is below the minimum of {MIN_DIM}");
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            bail!(
                "threshold must lie strictly between 0 and 1, got {}",
                self.threshold
            );
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            bail!("beta must be positive, got {}", self.beta);
        }
        Ok(())
    }

    pub fn mode(&self) -> MatmulMode {
        if self.structured_matmul {
            MatmulMode::Structured
        } else {
            MatmulMode::Dense
        }
    }

    /// The `key = value` form, readable by [`Partial::parse`].
    pub fn render(&self) -> String {
        fn join<T: ToString>(v: &[T]) -> String {
            v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
        }
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("grammar", join(&self.grammars));
        if let Some(s) = &self.sentence {
            kv("sentence", s.clone());
        }
        if let Some(s) = &self.sentences {
            kv("sentences", s.display().to_string());
        }
        kv("count", self.count.to_string());
        kv("max_len", self.max_len.to_string());
        kv("sentence_seed", self.sentence_seed.to_string());
        kv("dim", join(&self.dims));
        kv("seed", join(&self.seeds));
        kv("beta", self.beta.to_string());
        kv("threshold", self.threshold.to_string());
        if let Some(o) = &self.out {
            kv("out", o.display().to_string());
        }
        kv("workers", self.workers.to_string());
        kv("structured_matmul", self.structured_matmul.to_string());
        kv("dump_scores", self.dump_scores.to_string());
        kv("full_protocol", self.full_protocol.to_string());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_depend_on_the_command() {
        let sweep = RunConfig::resolve(Partial::default(), Purpose::Sweep).unwrap();
        assert_eq!(sweep.dims, DEFAULT_DIMS);
        assert_eq!(sweep.count, DEFAULT_SENTENCES);
        assert_eq!(sweep.grammars, ["g0"]);
        let parse = RunConfig::resolve(Partial::default(), Purpose::Parse).unwrap();
        assert_eq!(parse.dims, [DEFAULT_PARSE_DIM]);
        let full = RunConfig::resolve(
            Partial {
                full_protocol: Some(true),
                ..Partial::default()
            },
            Purpose::Sweep,
        )
        .unwrap();
        assert_eq!(full.dims, FULL_PROTOCOL_DIMS);
        assert_eq!(full.count, FULL_PROTOCOL_SENTENCES);
        assert_eq!(full.grammars.len(), 5);
    }

    #[test]
    fn rendered_config_resolves_to_itself() {
        let p = Partial {
            grammars: Some(vec!["g0".into(), "data/x.cfg".into()]),
            dims: Some(vec![64, 128]),
            seeds: Some(vec![3, 4]),
            threshold: Some(0.9),
            out: Some("out dir".into()),
            structured_matmul: Some(false),
            ..Partial::default()
        };
        let c = RunConfig::resolve(p, Purpose::Sweep).unwrap();
        let back =
            RunConfig::resolve(Partial::parse(&c.render()).unwrap(), Purpose::Sweep).unwrap();
        assert_eq!(back, c);
        assert_eq!(c.mode(), MatmulMode::Dense);
    }

    #[test]
    fn earlier_sources_win() {
        let flags = Partial {
            beta: Some(10.0),
            ..Partial::default()
        };
        let file = Partial::parse("beta = 20\nthreshold = 0.5\n").unwrap();
        let c = RunConfig::resolve(flags.or(file), Purpose::Parse).unwrap();
        assert_eq!((c.beta, c.threshold), (10.0, 0.5));
    }

    #[test]
    fn invalid_values_are_rejected() {
        for text in [
            "dim = 4",
            "threshold = 1",
            "threshold = 0",
            "beta = 0",
            "beta = -1",
        ] {
            let p = Partial::parse(text).unwrap();
            assert!(RunConfig::resolve(p, Purpose::Sweep).is_err(), "{text}");
        }
        assert!(Partial::parse("colour = red").is_err());
        assert!(Partial::parse("dim = ten").is_err());
        assert!(Partial::parse("no equals sign").is_err());
    }
}
