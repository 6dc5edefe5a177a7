//! In-memory triple store and the conjunctive evaluator for triple-dialect programs.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::answer::AnswerSet;
use crate::program::{AggregationKind, Answer, Dialect, QueryProgram};
use crate::term::{compare_values, parse_number, Term, Variable};

/// Display value of CVT (blank) nodes.
pub const UNNAMED_ENTITY: &str = "UnName_Entity";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoreError {
    #[error("{0} is not present in the knowledge base")]
    UnknownTerm(String),
    #[error("CVT node {0} does not occur in any triple")]
    DanglingCvt(String),
    #[error("{0}")]
    Engine(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub subject: String,
    pub relation: String,
    pub object: String,
}

impl Triple {
    pub fn new(
        subject: impl Into<String>,
        relation: impl Into<String>,
        object: impl Into<String>,
    ) -> Self {
        Self {
            subject: subject.into(),
            relation: relation.into(),
            object: object.into(),
        }
    }
}

/// Variable assignments; every row holds one value per column.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BindingTable {
    pub columns: Vec<Variable>,
    pub rows: Vec<Vec<String>>,
}

impl BindingTable {
    /// The table with no columns and a single empty row: the identity of the join.
    pub fn unit() -> Self {
        Self {
            columns: Vec::new(),
            rows: vec![Vec::new()],
        }
    }

    pub fn column_index(&self, var: &Variable) -> Option<usize> {
        self.columns.iter().position(|c| c == var)
    }

    /// Distinct values bound to `var`, or `None` when it is not a column.
    pub fn values(&self, var: &Variable) -> Option<BTreeSet<&str>> {
        let idx = self.column_index(var)?;
        Some(self.rows.iter().map(|r| r[idx].as_str()).collect())
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evaluation {
    pub bindings: BindingTable,
    /// `None` while no answer is set.
    pub answer: Option<AnswerSet>,
    /// Zero rows although at least one pattern exists.
    pub empty: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TripleStore {
    triples: BTreeSet<Triple>,
    cvt: BTreeSet<String>,
    incident: BTreeMap<String, BTreeSet<String>>,
    by_relation: BTreeMap<String, Vec<(String, String)>>,
}

impl TripleStore {
    /// Builds a store; duplicates collapse and every CVT id must occur in some triple.
    pub fn new(
        triples: impl IntoIterator<Item = Triple>,
        cvt: impl IntoIterator<Item = String>,
    ) -> Result<Self, StoreError> {
        let mut store = TripleStore::default();
        for t in triples {
            if store.triples.contains(&t) {
                continue;
            }
            for node in [&t.subject, &t.object] {
                store
                    .incident
                    .entry(node.clone())
                    .or_default()
                    .insert(t.relation.clone());
            }
            store
                .by_relation
                .entry(t.relation.clone())
                .or_default()
                .push((t.subject.clone(), t.object.clone()));
            store.triples.insert(t);
        }
        for id in cvt {
            if !store.incident.contains_key(&id) {
                return Err(StoreError::DanglingCvt(id));
            }
            store.cvt.insert(id);
        }
        Ok(store)
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }

    pub fn contains_node(&self, id: &str) -> bool {
        self.incident.contains_key(id)
    }

    /// Subjects and objects, sorted.
    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.incident.keys().map(String::as_str)
    }

    pub fn is_cvt(&self, id: &str) -> bool {
        self.cvt.contains(id)
    }

    pub fn cvt_nodes(&self) -> impl Iterator<Item = &str> {
        self.cvt.iter().map(String::as_str)
    }

    /// How a value is shown to the model: CVT nodes have no name.
    pub fn display_value<'a>(&self, value: &'a str) -> &'a str {
        if self.is_cvt(value) {
            UNNAMED_ENTITY
        } else {
            value
        }
    }

    /// One-hop relations in either direction, sorted and de-duplicated.
    pub fn get_relation(
        &self,
        term: &Term,
        bindings: &BindingTable,
    ) -> Result<Vec<String>, StoreError> {
        let mut out = BTreeSet::new();
        match term {
            Term::Variable(v) => {
                let values = bindings
                    .values(v)
                    .ok_or_else(|| StoreError::UnknownTerm(v.to_string()))?;
                for value in values {
                    if let Some(rels) = self.incident.get(value) {
                        out.extend(rels.iter().cloned());
                    }
                }
            }
            Term::Entity(id) => {
                let rels = self
                    .incident
                    .get(id)
                    .ok_or_else(|| StoreError::UnknownTerm(id.clone()))?;
                out.extend(rels.iter().cloned());
            }
            Term::Literal(l) => {
                let rels = self
                    .incident
                    .get(l.value())
                    .ok_or_else(|| StoreError::UnknownTerm(l.value().to_string()))?;
                out.extend(rels.iter().cloned());
            }
        }
        Ok(out.into_iter().collect())
    }

    /// True iff `var` has at least one binding and every bound value is a CVT node.
    pub fn is_cvt_only(&self, var: &Variable, bindings: &BindingTable) -> bool {
        match bindings.values(var) {
            Some(values) if !values.is_empty() => values.iter().all(|v| self.is_cvt(v)),
            _ => false,
        }
    }

    /// Left-to-right nested-loop join of the patterns, then the filters, then
    /// projection or aggregation onto the answer.
    pub fn evaluate(&self, program: &QueryProgram) -> Result<Evaluation, StoreError> {
        if program.dialect() != Dialect::Triple {
            return Err(StoreError::Engine(
                "the knowledge base only evaluates triple-dialect programs".into(),
            ));
        }
        let mut table = BindingTable::unit();
        for pattern in program.patterns() {
            table = self.join_pattern(table, &pattern.head, &pattern.relation, &pattern.tail);
        }

        for filter in program.filters() {
            let left = operand(&table, &filter.left)?;
            let right = operand(&table, &filter.right)?;
            table.rows.retain(|row| {
                let l = left.resolve(row);
                let r = right.resolve(row);
                filter.op.holds(compare_values(l, r))
            });
        }

        table.rows.sort();
        table.rows.dedup();

        let answer = match program.answer() {
            None => None,
            Some(Answer::Column(c)) => {
                return Err(StoreError::Engine(format!(
                    "column answer {c} in a triple-dialect program"
                )))
            }
            Some(Answer::Variable(answer_var)) => Some(self.project(program, &table, answer_var)?),
        };
        let empty = table.rows.is_empty() && !program.patterns().is_empty();
        Ok(Evaluation {
            bindings: table,
            answer,
            empty,
        })
    }

    fn project(
        &self,
        program: &QueryProgram,
        table: &BindingTable,
        answer_var: &Variable,
    ) -> Result<AnswerSet, StoreError> {
        let (kind, target) = match program.aggregation() {
            Some(agg) if agg.kind != AggregationKind::None => {
                let var = Variable::new(agg.target.clone())
                    .map_err(|e| StoreError::Engine(e.to_string()))?;
                (agg.kind, var)
            }
            _ => (AggregationKind::None, answer_var.clone()),
        };
        let values = table.values(&target).ok_or_else(|| {
            StoreError::Engine(format!(
                "variable {target} is not bound by any triple pattern"
            ))
        })?;
        Ok(match kind {
            AggregationKind::None => {
                AnswerSet::Values(values.into_iter().map(str::to_string).collect())
            }
            AggregationKind::Count => AnswerSet::Scalar(values.len().to_string()),
            AggregationKind::Max => extremum(values, true),
            AggregationKind::Min => extremum(values, false),
            AggregationKind::Sum | AggregationKind::Avg => {
                return Err(StoreError::Engine(format!(
                    "{kind} is not supported by the knowledge base engine"
                )))
            }
        })
    }

    fn join_pattern(
        &self,
        table: BindingTable,
        head: &Term,
        relation: &str,
        tail: &Term,
    ) -> BindingTable {
        let mut columns = table.columns.clone();
        let head_slot = slot(&mut columns, head);
        let tail_slot = slot(&mut columns, tail);
        let width = columns.len();
        let mut rows = Vec::new();
        let Some(pairs) = self.by_relation.get(relation) else {
            return BindingTable { columns, rows };
        };
        let bound = table.columns.len();
        for row in &table.rows {
            for (s, o) in pairs {
                let mut fresh: Vec<Option<&str>> = vec![None; width - bound];
                if bind(row, &mut fresh, &head_slot, s) && bind(row, &mut fresh, &tail_slot, o) {
                    let mut new_row = row.clone();
                    new_row.extend(fresh.into_iter().map(|v| v.unwrap_or_default().to_string()));
                    rows.push(new_row);
                }
            }
        }
        BindingTable { columns, rows }
    }
}

/// Where a pattern position reads from or writes to.
enum Slot {
    Constant(Term),
    Column(usize),
}

fn slot(columns: &mut Vec<Variable>, term: &Term) -> Slot {
    match term {
        Term::Variable(v) => match columns.iter().position(|c| c == v) {
            Some(i) => Slot::Column(i),
            None => {
                columns.push(v.clone());
                Slot::Column(columns.len() - 1)
            }
        },
        other => Slot::Constant(other.clone()),
    }
}

/// Checks one pattern position against `value`. Columns past the end of `row`
/// are new in this pattern and collect into `fresh`; a repeated new variable
/// (self loop) must see the same value twice.
fn bind<'v>(row: &[String], fresh: &mut [Option<&'v str>], slot: &Slot, value: &'v str) -> bool {
    match slot {
        Slot::Constant(term) => constant_matches(term, value),
        Slot::Column(i) if *i < row.len() => row[*i] == value,
        Slot::Column(i) => match fresh[*i - row.len()] {
            Some(prev) => prev == value,
            ref mut empty @ None => {
                *empty = Some(value);
                true
            }
        },
    }
}

/// Entities match by identity; literals by value, numerically when both sides are numbers.
pub fn constant_matches(term: &Term, value: &str) -> bool {
    match term {
        Term::Entity(id) => id == value,
        Term::Literal(l) => match (parse_number(l.value()), parse_number(value)) {
            (Some(a), Some(b)) => a == b,
            _ => l.value() == value,
        },
        Term::Variable(_) => false,
    }
}

enum Operand<'a> {
    Column(usize),
    Constant(&'a str),
}

impl Operand<'_> {
    fn resolve<'r>(&'r self, row: &'r [String]) -> &'r str {
        match self {
            Operand::Column(i) => &row[*i],
            Operand::Constant(s) => s,
        }
    }
}

fn operand<'a>(table: &BindingTable, term: &'a Term) -> Result<Operand<'a>, StoreError> {
    match term {
        Term::Variable(v) => table.column_index(v).map(Operand::Column).ok_or_else(|| {
            StoreError::Engine(format!(
                "variable {v} in FILTER is not bound by any triple pattern"
            ))
        }),
        other => Ok(Operand::Constant(other.key())),
    }
}

fn extremum(values: BTreeSet<&str>, max: bool) -> AnswerSet {
    let best = values.into_iter().reduce(|a, b| {
        let ord = compare_values(b, a);
        let take_b = if max { ord.is_gt() } else { ord.is_lt() };
        if take_b {
            b
        } else {
            a
        }
    });
    match best {
        Some(v) => AnswerSet::Scalar(v.to_string()),
        None => AnswerSet::empty(),
    }
}
