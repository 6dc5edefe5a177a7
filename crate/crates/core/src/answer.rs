use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::term::normalize_value;

/// The denotation of a finished query.
///
/// `Values` keeps the engine's output order. Triple queries produce sorted,
/// distinct values; table projections keep row order and duplicates.
/// An empty `Values` is the explicit "no answer".
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnswerSet {
    Values(Vec<String>),
    Scalar(String),
}

impl AnswerSet {
    pub fn empty() -> Self {
        AnswerSet::Values(Vec::new())
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, AnswerSet::Values(v) if v.is_empty())
    }

    pub fn len(&self) -> usize {
        match self {
            AnswerSet::Values(v) => v.len(),
            AnswerSet::Scalar(_) => 1,
        }
    }

    /// Set view with numeric-string normalization; a scalar is a one-element set.
    pub fn to_set(&self) -> BTreeSet<String> {
        match self {
            AnswerSet::Values(v) => v.iter().map(|s| normalize_value(s)).collect(),
            AnswerSet::Scalar(s) => core::iter::once(normalize_value(s)).collect(),
        }
    }
}

impl fmt::Display for AnswerSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnswerSet::Scalar(s) => f.write_str(s),
            AnswerSet::Values(v) => {
                f.write_str("[")?;
                for (i, s) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    f.write_str(s)?;
                }
                f.write_str("]")
            }
        }
    }
}
