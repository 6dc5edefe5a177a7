//! Terms that appear in triple patterns, filters and conditions.

use alloc::string::{String, ToString};
use core::cmp::Ordering;
use core::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TermError {
    #[error("invalid variable name {0:?}")]
    InvalidVariable(String),
    #[error("invalid entity identifier {0:?}")]
    InvalidEntity(String),
}

/// A query variable such as `?computer`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Variable(String);

impl Variable {
    pub fn new(name: impl Into<String>) -> Result<Self, TermError> {
        let name = name.into();
        if is_variable_name(&name) {
            Ok(Self(name))
        } else {
            Err(TermError::InvalidVariable(name))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// `?[A-Za-z_][A-Za-z0-9_]*`
pub fn is_variable_name(s: &str) -> bool {
    let mut chars = s.chars();
    if chars.next() != Some('?') {
        return false;
    }
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    value: String,
    numeric: bool,
}

impl Literal {
    pub fn new(value: impl Into<String>) -> Self {
        let value = value.into();
        let numeric = parse_number(&value).is_some();
        Self { value, numeric }
    }

    pub fn value(&self) -> &str {
        &self.value
    }

    pub fn is_numeric(&self) -> bool {
        self.numeric
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Entity(String),
    Variable(Variable),
    Literal(Literal),
}

impl Term {
    pub fn entity(id: impl Into<String>) -> Result<Self, TermError> {
        let id = id.into();
        if id.is_empty() || id.chars().any(char::is_whitespace) {
            return Err(TermError::InvalidEntity(id));
        }
        Ok(Term::Entity(id))
    }

    pub fn variable(name: impl Into<String>) -> Result<Self, TermError> {
        Variable::new(name).map(Term::Variable)
    }

    pub fn literal(value: impl Into<String>) -> Self {
        Term::Literal(Literal::new(value))
    }

    pub fn as_variable(&self) -> Option<&Variable> {
        match self {
            Term::Variable(v) => Some(v),
            _ => None,
        }
    }

    /// The raw text of the term: entity id, variable name or literal value.
    pub fn key(&self) -> &str {
        match self {
            Term::Entity(id) => id,
            Term::Variable(v) => v.as_str(),
            Term::Literal(l) => l.value(),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Entity(id) => f.write_str(id),
            Term::Variable(v) => f.write_str(v.as_str()),
            Term::Literal(l) if l.is_numeric() => f.write_str(l.value()),
            Term::Literal(l) => write!(f, "\"{}\"", escape_quotes(l.value(), '"')),
        }
    }
}

pub(crate) fn escape_quotes(s: &str, quote: char) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if c == quote || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out
}

/// Parses a finite number. Infinities and NaN are treated as text.
pub fn parse_number(s: &str) -> Option<f64> {
    let t = s.trim();
    if t.is_empty() {
        return None;
    }
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Some(v),
        _ => None,
    }
}

/// Numeric comparison when both sides parse as numbers, lexicographic otherwise.
pub fn compare_values(a: &str, b: &str) -> Ordering {
    match (parse_number(a), parse_number(b)) {
        (Some(x), Some(y)) => x.partial_cmp(&y).unwrap_or(Ordering::Equal),
        _ => a.cmp(b),
    }
}

/// Canonical text for a number: integers without a fractional part.
pub fn format_number(v: f64) -> String {
    if v == libm::trunc(v) && libm::fabs(v) < 1e15 {
        // -0.0 prints as 0
        let i = v as i64;
        i.to_string()
    } else {
        alloc::format!("{v}")
    }
}

/// Normalizes numeric strings to their canonical form and leaves other text alone.
pub fn normalize_value(s: &str) -> String {
    match parse_number(s) {
        Some(v) => format_number(v),
        None => s.to_string(),
    }
}
