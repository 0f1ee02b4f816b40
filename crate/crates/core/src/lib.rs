//! Context-free recognition over distributed matrix representations.
//!
//! The crate pairs a classical CYK recognizer ([`cyk`]) with a version of
//! the same algorithm that runs entirely on `d × d` real matrices built from
//! holographic reduced representations ([`hrr`], [`dcyk`]), and with the
//! harness that measures how closely the second reproduces the first
//! ([`eval`]).

pub mod calibration;
pub mod corpus;
pub mod cyk;
pub mod dcyk;
pub mod error;
pub mod eval;
pub mod grammar;
pub mod hrr;
pub mod matrix;
mod spectral;

pub use crate::cyk::{cyk_parse, Chart};
pub use crate::dcyk::{DistChart, MatmulMode, RuleOperators};
pub use crate::error::{Error, Result};
pub use crate::grammar::{Grammar, Sentence};
pub use crate::hrr::{identity_score, Factor, HrrSpace};
pub use crate::matrix::Matrix;
pub use crate::spectral::Permutation;
