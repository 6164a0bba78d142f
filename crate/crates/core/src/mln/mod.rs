//! A small Markov logic engine: parsing, grounding, conditioning on
//! evidence and exact inference by enumerating possible worlds.
//!
//! Exact inference is the correctness oracle for everything else in the
//! crate, so it favours transparency over speed: worlds are enumerated
//! explicitly over the atoms left free after evidence is substituted out.

mod exact;
pub mod formula;
mod ground;
mod model;
mod network;

use thiserror::Error;

pub use exact::{exact_marginals, exact_query, LogSumExp};
pub use formula::{Atom, Formula, Term};
pub use ground::{ground, AtomIndex, GroundFormula, Grounding, Valuation};
pub use model::{EvidenceSet, GroundAtom, Literal, Model, WeightedFormula};
pub use network::{InferenceOptions, Network, World};

pub const DEFAULT_GROUNDING_CAP: usize = 1_000_000;
pub const DEFAULT_MAX_FREE_ATOMS: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MlnError {
    #[error("line {line}: syntax error: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: {source}")]
    At { line: usize, source: Box<MlnError> },
    #[error("{0}")]
    Invalid(String),
    #[error("unknown predicate `{name}`")]
    UnknownPredicate { name: String },
    #[error("predicate `{name}` has arity {expected}, used with {found} arguments")]
    ArityMismatch { name: String, expected: usize, found: usize },
    #[error("unknown constant `{name}`")]
    UnknownConstant { name: String },
    #[error("atom {atom} is assigned more than once")]
    DuplicateEvidence { atom: String },
    #[error("the domain is empty")]
    EmptyDomain,
    #[error("grounding would produce {count} ground formulas (cap {cap})")]
    GroundingCap { count: usize, cap: usize },
    #[error("{atoms} non-evidence atoms exceed the enumeration cap of {cap}")]
    EnumerationCap { atoms: usize, cap: usize },
    #[error("evidence is inconsistent with the hard formulas: {0}")]
    Inconsistent(String),
}

impl MlnError {
    pub(crate) fn syntax(line: usize, msg: impl Into<String>) -> MlnError {
        MlnError::Syntax { line, msg: msg.into() }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> MlnError {
        MlnError::Invalid(msg.into())
    }

    pub(crate) fn at_line(self, line: usize) -> MlnError {
        match self {
            MlnError::Syntax { .. } | MlnError::At { .. } => self,
            other => MlnError::At {
                line,
                source: Box::new(other),
            },
        }
    }

    /// The error with any line-number wrapper removed.
    pub fn root(&self) -> &MlnError {
        match self {
            MlnError::At { source, .. } => source.root(),
            other => other,
        }
    }
}
