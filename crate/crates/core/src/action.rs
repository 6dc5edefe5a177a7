//! Parsing of the model's `Thought N:` / `Action N: name(args)` lines and the
//! tool signatures of both dialects.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::program::{CompareOp, Dialect};
use crate::term::{is_variable_name, Literal, Term, Variable};

/// An entity the question was linked to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityLink {
    pub id: String,
    pub name: String,
}

impl EntityLink {
    pub fn new(id: impl Into<String>, name: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            name: name.into(),
        }
    }

    /// Whether `text` refers to this entity by id or by its underscored name.
    pub fn matches(&self, text: &str) -> bool {
        if text == self.id {
            return true;
        }
        let name = self.name.trim();
        !name.is_empty()
            && name.len() == text.len()
            && name
                .chars()
                .zip(text.chars())
                .all(|(a, b)| a.eq_ignore_ascii_case(&b) || (a == ' ' && b == '_'))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgKind {
    Variable,
    Entity,
    Operator,
    Literal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arg {
    /// Text as written, trimmed.
    pub raw: String,
    pub kind: ArgKind,
    /// Entity id for linked entities, unquoted text for literals, otherwise `raw`.
    pub value: String,
}

impl Arg {
    pub fn classify(raw: &str, links: &[EntityLink]) -> Self {
        let raw = raw.trim().to_string();
        if is_variable_name(&raw) {
            return Arg {
                value: raw.clone(),
                raw,
                kind: ArgKind::Variable,
            };
        }
        if let Some(link) = links.iter().find(|l| l.matches(&raw)) {
            return Arg {
                value: link.id.clone(),
                raw,
                kind: ArgKind::Entity,
            };
        }
        if looks_like_entity_id(&raw) {
            return Arg {
                value: raw.clone(),
                raw,
                kind: ArgKind::Entity,
            };
        }
        if raw.parse::<CompareOp>().is_ok() {
            return Arg {
                value: raw.clone(),
                raw,
                kind: ArgKind::Operator,
            };
        }
        Arg {
            value: unquote(&raw).to_string(),
            raw,
            kind: ArgKind::Literal,
        }
    }

    pub fn variable(&self) -> Option<Variable> {
        match self.kind {
            ArgKind::Variable => Variable::new(self.value.clone()).ok(),
            _ => None,
        }
    }

    pub fn to_term(&self) -> Term {
        match self.kind {
            ArgKind::Variable => match Variable::new(self.value.clone()) {
                Ok(v) => Term::Variable(v),
                Err(_) => Term::Literal(Literal::new(self.value.clone())),
            },
            ArgKind::Entity => Term::Entity(self.value.clone()),
            ArgKind::Operator | ArgKind::Literal => Term::Literal(Literal::new(self.value.clone())),
        }
    }
}

/// Freebase-style ids: `m.0bj4p9h`, `g.1233lk8r`.
pub fn looks_like_entity_id(s: &str) -> bool {
    let mut parts = s.splitn(2, '.');
    let prefix = parts.next().unwrap_or("");
    let rest = parts.next().unwrap_or("");
    matches!(prefix, "m" | "g")
        && !rest.is_empty()
        && rest.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn unquote(s: &str) -> &str {
    for q in ['"', '\''] {
        if s.len() >= 2 && s.starts_with(q) && s.ends_with(q) {
            return &s[1..s.len() - 1];
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedAction {
    pub step: u32,
    pub name: String,
    pub args: Vec<Arg>,
    /// The `name(args)` text.
    pub text: String,
}

/// Parse result; failures are data so the error classifier can see them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ActionParse {
    Parsed(ParsedAction),
    Failed { raw: String },
}

impl ActionParse {
    pub fn parsed(&self) -> Option<&ParsedAction> {
        match self {
            ActionParse::Parsed(a) => Some(a),
            ActionParse::Failed { .. } => None,
        }
    }

    /// The action text for logs: `name(args)` or whatever was generated.
    pub fn text(&self) -> &str {
        match self {
            ActionParse::Parsed(a) => &a.text,
            ActionParse::Failed { raw } => raw,
        }
    }

    pub fn is(&self, name: &str) -> bool {
        self.parsed().is_some_and(|a| a.name == name)
    }
}

/// Content of the last `<label> <n>: ...` line, with its step number.
fn last_labelled_line<'a>(text: &'a str, label: &str) -> Option<(u32, &'a str)> {
    text.lines().rev().find_map(|line| {
        let rest = line.trim().strip_prefix(label)?;
        let rest = rest.trim_start();
        let digits = rest
            .find(|c: char| !c.is_ascii_digit())
            .unwrap_or(rest.len());
        if digits == 0 {
            return None;
        }
        let n = rest[..digits].parse().ok()?;
        let body = rest[digits..].trim_start().strip_prefix(':')?;
        Some((n, body.trim()))
    })
}

pub fn parse_thought(text: &str) -> Option<String> {
    last_labelled_line(text, "Thought").map(|(_, t)| t.to_string())
}

/// Extracts the last `Action <n>: <name>(<args>)` line. Arguments split on
/// top-level commas; quotes and nested parentheses are respected.
pub fn parse_action(text: &str, links: &[EntityLink]) -> ActionParse {
    let failed = || ActionParse::Failed {
        raw: last_labelled_line(text, "Action")
            .map(|(_, body)| body)
            .unwrap_or_else(|| text.trim())
            .to_string(),
    };
    let Some((step, body)) = last_labelled_line(text, "Action") else {
        return failed();
    };
    let Some(open) = body.find('(') else {
        return failed();
    };
    let name = body[..open].trim();
    let valid_name =
        !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if !valid_name || !body.ends_with(')') {
        return failed();
    }
    let inner = &body[open + 1..body.len() - 1];
    let Some(raw_args) = split_args(inner) else {
        return failed();
    };
    ActionParse::Parsed(ParsedAction {
        step,
        name: name.to_string(),
        args: raw_args.iter().map(|a| Arg::classify(a, links)).collect(),
        text: body.to_string(),
    })
}

fn split_args(inner: &str) -> Option<Vec<&str>> {
    if inner.trim().is_empty() {
        return Some(Vec::new());
    }
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut quote: Option<char> = None;
    let mut start = 0;
    for (i, c) in inner.char_indices() {
        match (quote, c) {
            (Some(q), c) if c == q => quote = None,
            (Some(_), _) => {}
            (None, '"' | '\'') => quote = Some(c),
            (None, '(' | '[') => depth += 1,
            (None, ')' | ']') => {
                depth -= 1;
                if depth < 0 {
                    return None;
                }
            }
            (None, ',') if depth == 0 => {
                out.push(inner[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    if depth != 0 || quote.is_some() {
        return None;
    }
    out.push(inner[start..].trim());
    Some(out)
}

/// A tool name and its documented parameter names.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Signature {
    pub name: &'static str,
    pub params: &'static [&'static str],
}

impl Signature {
    /// `add_fact(head,relation,tail)`
    pub fn display(&self) -> String {
        let mut s = String::from(self.name);
        s.push('(');
        s.push_str(&self.params.join(","));
        s.push(')');
        s
    }
}

const TRIPLE_TOOLS: &[Signature] = &[
    Signature {
        name: "get_relation",
        params: &["entity_or_variable"],
    },
    Signature {
        name: "add_fact",
        params: &["head", "relation", "tail"],
    },
    Signature {
        name: "add_max",
        params: &["max_var"],
    },
    Signature {
        name: "add_min",
        params: &["min_var"],
    },
    Signature {
        name: "add_count",
        params: &["count_var"],
    },
    Signature {
        name: "add_filter",
        params: &["ob1", "op", "ob2"],
    },
    Signature {
        name: "set_answer",
        params: &["ans_var"],
    },
    Signature {
        name: "execute",
        params: &[],
    },
];

const TABLE_TOOLS: &[Signature] = &[
    Signature {
        name: "get_column",
        params: &["column"],
    },
    Signature {
        name: "add_condition",
        params: &["column", "op", "value"],
    },
    Signature {
        name: "set_answer",
        params: &["column", "aggregation_type"],
    },
    Signature {
        name: "execute",
        params: &[],
    },
];

pub fn tools(dialect: Dialect) -> &'static [Signature] {
    match dialect {
        Dialect::Triple => TRIPLE_TOOLS,
        Dialect::Table => TABLE_TOOLS,
    }
}

pub fn signature(dialect: Dialect, name: &str) -> Option<&'static Signature> {
    tools(dialect).iter().find(|s| s.name == name)
}

/// `get_relation(), add_fact(), ..., execute()`
pub fn action_list(dialect: Dialect) -> String {
    let names: Vec<String> = tools(dialect)
        .iter()
        .map(|s| {
            let mut n = s.name.to_string();
            n.push_str("()");
            n
        })
        .collect();
    names.join(", ")
}
