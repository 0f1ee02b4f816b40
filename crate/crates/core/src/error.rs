use thiserror::Error;

/// Errors raised by grammar loading, parsing and evaluation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("rule `{rule}` is not in Chomsky normal form: {reason}")]
    CnfViolation { rule: String, reason: String },

    #[error("symbol `{0}` is a decimal numeral; numerals are reserved for span indices")]
    ReservedSymbol(String),

    #[error("missing `start:` declaration")]
    MissingStart,

    #[error("start symbol `{0}` is not a declared nonterminal")]
    UndeclaredStart(String),

    #[error("grammar has no rules")]
    EmptyGrammar,

    #[error("symbol `{0}` is declared both as terminal and nonterminal")]
    SymbolConflict(String),

    #[error("token `{token}` at position {position} is not a terminal of the grammar")]
    UnknownTerminal { token: String, position: usize },

    #[error("sentence is empty")]
    EmptySentence,

    #[error("no sentence of length <= {max_len} found after {attempts} attempts")]
    GenerationFailed { max_len: usize, attempts: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("charts cover different sentence lengths ({oracle} vs {decoded})")]
    LengthMismatch { oracle: usize, decoded: usize },

    #[error("malformed record at line {line}: {message}")]
    Format { line: usize, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
