//! The incremental query program built by construction calls, and its text
//! emission in the triple (SPARQL-like) and table (SQL-like) dialects.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

use crate::term::{Literal, Term, Variable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dialect {
    Triple,
    Table,
}

impl fmt::Display for Dialect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dialect::Triple => "triple",
            Dialect::Table => "table",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BuildError {
    #[error("{call}() is not available in the {dialect} dialect")]
    WrongDialect {
        call: &'static str,
        dialect: Dialect,
    },
    #[error("invalid operator {0:?}")]
    InvalidOperator(String),
    #[error("{0} is not a created variable")]
    UnknownVariable(String),
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("invalid aggregation type {0:?}")]
    InvalidAggregation(String),
    #[error("aggregation {0} is not supported in the triple dialect")]
    UnsupportedAggregation(AggregationKind),
    #[error("relation must be non-empty")]
    EmptyRelation,
    #[error("no answer has been set")]
    NoAnswerSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CompareOp {
    Gt,
    Lt,
    Eq,
    Ge,
    Le,
    Ne,
}

impl CompareOp {
    pub const ALL: [CompareOp; 6] = [
        CompareOp::Gt,
        CompareOp::Lt,
        CompareOp::Ge,
        CompareOp::Le,
        CompareOp::Eq,
        CompareOp::Ne,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            CompareOp::Gt => ">",
            CompareOp::Lt => "<",
            CompareOp::Eq => "=",
            CompareOp::Ge => ">=",
            CompareOp::Le => "<=",
            CompareOp::Ne => "!=",
        }
    }

    pub fn holds(self, ord: Ordering) -> bool {
        match self {
            CompareOp::Gt => ord == Ordering::Greater,
            CompareOp::Lt => ord == Ordering::Less,
            CompareOp::Eq => ord == Ordering::Equal,
            CompareOp::Ge => ord != Ordering::Less,
            CompareOp::Le => ord != Ordering::Greater,
            CompareOp::Ne => ord != Ordering::Equal,
        }
    }
}

impl FromStr for CompareOp {
    type Err = BuildError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim() {
            ">" => CompareOp::Gt,
            "<" => CompareOp::Lt,
            "=" => CompareOp::Eq,
            ">=" => CompareOp::Ge,
            "<=" => CompareOp::Le,
            "!=" => CompareOp::Ne,
            other => return Err(BuildError::InvalidOperator(other.to_string())),
        })
    }
}

impl fmt::Display for CompareOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggregationKind {
    None,
    Max,
    Min,
    Count,
    Sum,
    Avg,
}

impl AggregationKind {
    pub const ALL: [AggregationKind; 6] = [
        AggregationKind::None,
        AggregationKind::Max,
        AggregationKind::Min,
        AggregationKind::Count,
        AggregationKind::Sum,
        AggregationKind::Avg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AggregationKind::None => "NONE",
            AggregationKind::Max => "MAX",
            AggregationKind::Min => "MIN",
            AggregationKind::Count => "COUNT",
            AggregationKind::Sum => "SUM",
            AggregationKind::Avg => "AVG",
        }
    }

    pub fn allowed_in(self, dialect: Dialect) -> bool {
        match dialect {
            Dialect::Table => true,
            Dialect::Triple => matches!(
                self,
                AggregationKind::None
                    | AggregationKind::Max
                    | AggregationKind::Min
                    | AggregationKind::Count
            ),
        }
    }
}

impl FromStr for AggregationKind {
    type Err = BuildError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        AggregationKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(t))
            .ok_or_else(|| BuildError::InvalidAggregation(t.to_string()))
    }
}

impl fmt::Display for AggregationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriplePattern {
    pub head: Term,
    pub relation: String,
    pub tail: Term,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterConstraint {
    pub left: Term,
    pub op: CompareOp,
    pub right: Term,
}

/// A `column op value` row constraint of the table dialect.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Condition {
    pub column: String,
    pub op: CompareOp,
    pub value: Literal,
}

/// `target` is a variable name in the triple dialect and a column name in the table dialect.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregationSpec {
    pub kind: AggregationKind,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Answer {
    Variable(Variable),
    Column(String),
}

/// One construction call, in the order it was applied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Call {
    AddFact(TriplePattern),
    AddFilter(FilterConstraint),
    Aggregate(AggregationSpec),
    AddCondition(Condition),
    SetAnswer(Answer),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableSchema {
    pub name: String,
    pub columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryProgram {
    dialect: Dialect,
    calls: Vec<Call>,
    patterns: Vec<TriplePattern>,
    filters: Vec<FilterConstraint>,
    conditions: Vec<Condition>,
    aggregation: Option<AggregationSpec>,
    answer: Option<Answer>,
    created_variables: Vec<Variable>,
    schema: TableSchema,
}

impl QueryProgram {
    pub fn new(dialect: Dialect) -> Self {
        Self {
            dialect,
            calls: Vec::new(),
            patterns: Vec::new(),
            filters: Vec::new(),
            conditions: Vec::new(),
            aggregation: None,
            answer: None,
            created_variables: Vec::new(),
            schema: TableSchema {
                name: "t".to_string(),
                columns: Vec::new(),
            },
        }
    }

    /// A table-dialect program bound to `schema`.
    pub fn for_table(schema: TableSchema) -> Self {
        Self {
            schema,
            ..Self::new(Dialect::Table)
        }
    }

    pub fn dialect(&self) -> Dialect {
        self.dialect
    }
    pub fn calls(&self) -> &[Call] {
        &self.calls
    }
    pub fn patterns(&self) -> &[TriplePattern] {
        &self.patterns
    }
    pub fn filters(&self) -> &[FilterConstraint] {
        &self.filters
    }
    pub fn conditions(&self) -> &[Condition] {
        &self.conditions
    }
    pub fn aggregation(&self) -> Option<&AggregationSpec> {
        self.aggregation.as_ref()
    }
    pub fn answer(&self) -> Option<&Answer> {
        self.answer.as_ref()
    }
    pub fn created_variables(&self) -> &[Variable] {
        &self.created_variables
    }
    pub fn schema(&self) -> &TableSchema {
        &self.schema
    }

    pub fn is_created(&self, var: &Variable) -> bool {
        self.created_variables.contains(var)
    }

    pub fn has_column(&self, column: &str) -> bool {
        self.schema.columns.iter().any(|c| c == column)
    }

    fn require(&self, dialect: Dialect, call: &'static str) -> Result<(), BuildError> {
        if self.dialect == dialect {
            Ok(())
        } else {
            Err(BuildError::WrongDialect {
                call,
                dialect: self.dialect,
            })
        }
    }

    fn note_variables<'a>(&mut self, terms: impl IntoIterator<Item = &'a Term>) {
        for term in terms {
            if let Term::Variable(v) = term {
                if !self.created_variables.contains(v) {
                    self.created_variables.push(v.clone());
                }
            }
        }
    }

    pub fn add_fact(
        &mut self,
        head: Term,
        relation: impl Into<String>,
        tail: Term,
    ) -> Result<(), BuildError> {
        self.require(Dialect::Triple, "add_fact")?;
        let relation = relation.into();
        if relation.trim().is_empty() {
            return Err(BuildError::EmptyRelation);
        }
        self.note_variables([&head, &tail]);
        let pattern = TriplePattern {
            head,
            relation,
            tail,
        };
        self.calls.push(Call::AddFact(pattern.clone()));
        self.patterns.push(pattern);
        Ok(())
    }

    pub fn add_filter(&mut self, left: Term, op: &str, right: Term) -> Result<(), BuildError> {
        self.require(Dialect::Triple, "add_filter")?;
        let op: CompareOp = op.parse()?;
        self.note_variables([&left, &right]);
        let filter = FilterConstraint { left, op, right };
        self.calls.push(Call::AddFilter(filter.clone()));
        self.filters.push(filter);
        Ok(())
    }

    pub fn add_max(&mut self, var: &Variable) -> Result<(), BuildError> {
        self.set_aggregation(AggregationKind::Max, var, "add_max")
    }

    pub fn add_min(&mut self, var: &Variable) -> Result<(), BuildError> {
        self.set_aggregation(AggregationKind::Min, var, "add_min")
    }

    pub fn add_count(&mut self, var: &Variable) -> Result<(), BuildError> {
        self.set_aggregation(AggregationKind::Count, var, "add_count")
    }

    // Replaces any earlier aggregation.
    fn set_aggregation(
        &mut self,
        kind: AggregationKind,
        var: &Variable,
        call: &'static str,
    ) -> Result<(), BuildError> {
        self.require(Dialect::Triple, call)?;
        if !self.is_created(var) {
            return Err(BuildError::UnknownVariable(var.to_string()));
        }
        let spec = AggregationSpec {
            kind,
            target: var.as_str().to_string(),
        };
        self.calls.push(Call::Aggregate(spec.clone()));
        self.aggregation = Some(spec);
        Ok(())
    }

    pub fn add_condition(
        &mut self,
        column: &str,
        op: &str,
        value: Literal,
    ) -> Result<(), BuildError> {
        self.require(Dialect::Table, "add_condition")?;
        let op: CompareOp = op.parse()?;
        if !matches!(op, CompareOp::Eq | CompareOp::Gt | CompareOp::Lt) {
            return Err(BuildError::InvalidOperator(op.symbol().to_string()));
        }
        if !self.has_column(column) {
            return Err(BuildError::UnknownColumn(column.to_string()));
        }
        let condition = Condition {
            column: column.to_string(),
            op,
            value,
        };
        self.calls.push(Call::AddCondition(condition.clone()));
        self.conditions.push(condition);
        Ok(())
    }

    /// Triple dialect: the variable the query returns.
    pub fn set_answer(&mut self, var: &Variable) -> Result<(), BuildError> {
        self.require(Dialect::Triple, "set_answer")?;
        if !self.is_created(var) {
            return Err(BuildError::UnknownVariable(var.to_string()));
        }
        let answer = Answer::Variable(var.clone());
        self.calls.push(Call::SetAnswer(answer.clone()));
        self.answer = Some(answer);
        Ok(())
    }

    /// Table dialect: the returned column and the aggregation applied to it.
    pub fn set_answer_column(
        &mut self,
        column: &str,
        kind: AggregationKind,
    ) -> Result<(), BuildError> {
        self.require(Dialect::Table, "set_answer")?;
        if !self.has_column(column) {
            return Err(BuildError::UnknownColumn(column.to_string()));
        }
        let answer = Answer::Column(column.to_string());
        self.calls.push(Call::SetAnswer(answer.clone()));
        self.answer = Some(answer);
        self.aggregation = Some(AggregationSpec {
            kind,
            target: column.to_string(),
        });
        Ok(())
    }

    /// Query text for logs and traces. The embedded engines evaluate the program itself.
    pub fn emit_text(&self) -> Result<String, BuildError> {
        let answer = self.answer.as_ref().ok_or(BuildError::NoAnswerSet)?;
        Ok(match self.dialect {
            Dialect::Triple => self.emit_triple(answer),
            Dialect::Table => self.emit_table(answer),
        })
    }

    fn emit_triple(&self, answer: &Answer) -> String {
        let select = match (&self.aggregation, answer) {
            (Some(agg), _) if agg.kind != AggregationKind::None => {
                let alias = match agg.kind {
                    AggregationKind::Count => "?cnt",
                    AggregationKind::Max => "?max",
                    AggregationKind::Min => "?min",
                    AggregationKind::Sum => "?sum",
                    AggregationKind::Avg => "?avg",
                    AggregationKind::None => unreachable!(),
                };
                format!("({}({}) AS {})", agg.kind, agg.target, alias)
            }
            (_, Answer::Variable(v)) => v.to_string(),
            (_, Answer::Column(c)) => c.clone(),
        };
        let mut text = format!("SELECT {select} WHERE {{");
        for p in &self.patterns {
            text.push_str(&format!(" {} {} {} .", p.head, p.relation, p.tail));
        }
        for f in &self.filters {
            text.push_str(&format!(" FILTER ({} {} {})", f.left, f.op, f.right));
        }
        text.push_str(" }");
        text
    }

    fn emit_table(&self, answer: &Answer) -> String {
        let column = match answer {
            Answer::Column(c) => c.as_str(),
            Answer::Variable(v) => v.as_str(),
        };
        let kind = self
            .aggregation
            .as_ref()
            .map_or(AggregationKind::None, |a| a.kind);
        let select = match kind {
            AggregationKind::None => sql_ident(column),
            k => format!("{}({})", k, sql_ident(column)),
        };
        let mut text = format!("SELECT {select} FROM {}", sql_ident(&self.schema.name));
        if !self.conditions.is_empty() {
            let clauses: Vec<String> = self
                .conditions
                .iter()
                .map(|c| format!("{} {} {}", sql_ident(&c.column), c.op, sql_value(&c.value)))
                .collect();
            text.push_str(" WHERE ");
            text.push_str(&clauses.join(" AND "));
        }
        text
    }
}

fn sql_ident(name: &str) -> String {
    let simple = name
        .chars()
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if simple {
        name.to_string()
    } else {
        format!("\"{}\"", name.replace('"', "\"\""))
    }
}

fn sql_value(value: &Literal) -> String {
    if value.is_numeric() {
        value.value().to_string()
    } else {
        format!("'{}'", escape_sql(value.value()))
    }
}

fn escape_sql(s: &str) -> String {
    s.replace('\'', "''")
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn var(s: &str) -> Variable {
        Variable::new(s).unwrap()
    }
    fn ent(s: &str) -> Term {
        Term::entity(s).unwrap()
    }
    fn tvar(s: &str) -> Term {
        Term::variable(s).unwrap()
    }

    #[test]
    fn fresh_programs_are_empty() {
        let p = QueryProgram::new(Dialect::Triple);
        assert!(p.patterns().is_empty());
        assert!(p.created_variables().is_empty());
        assert_eq!(p.emit_text(), Err(BuildError::NoAnswerSet));
        let t = QueryProgram::new(Dialect::Table);
        assert!(t.conditions().is_empty());
    }

    #[test]
    fn add_fact_tracks_new_variables() {
        let mut p = QueryProgram::new(Dialect::Triple);
        p.add_fact(
            ent("m.tom_kilburn"),
            "computer.computer_designer.computers_designed",
            tvar("?computer"),
        )
        .unwrap();
        assert_eq!(p.patterns().len(), 1);
        assert_eq!(p.created_variables(), &[var("?computer")]);
    }

    #[test]
    fn self_loop_creates_one_variable() {
        let mut p = QueryProgram::new(Dialect::Triple);
        p.add_fact(tvar("?x"), "r", tvar("?x")).unwrap();
        assert_eq!(p.patterns().len(), 1);
        assert_eq!(p.created_variables(), &[var("?x")]);
    }

    #[test]
    fn created_variables_keep_first_appearance_order() {
        let calls = [
            ("m.a", "r1", "?computer"),
            ("?computer", "r2", "?maker"),
            ("?year", "r3", "?computer"),
        ];
        let mut p = QueryProgram::new(Dialect::Triple);
        let mut expected: Vec<Variable> = Vec::new();
        for (h, r, t) in calls {
            let to_term = |s: &str| if s.starts_with('?') { tvar(s) } else { ent(s) };
            p.add_fact(to_term(h), r, to_term(t)).unwrap();
            for s in [h, t] {
                if s.starts_with('?') && !expected.iter().any(|v| v.as_str() == s) {
                    expected.push(var(s));
                }
            }
        }
        assert_eq!(p.created_variables(), expected.as_slice());
    }

    #[test]
    fn filter_operators() {
        let mut p = QueryProgram::new(Dialect::Triple);
        p.add_filter(tvar("?speed"), ">", Term::literal("100"))
            .unwrap();
        assert_eq!(p.filters().len(), 1);
        p.add_filter(tvar("?speed"), "!=", Term::literal("5"))
            .unwrap();
        assert_eq!(
            p.add_filter(
                tvar("?engine"),
                "aviation.aircraft_model.part_of_line",
                ent("m.031vqw")
            ),
            Err(BuildError::InvalidOperator(
                "aviation.aircraft_model.part_of_line".into()
            ))
        );
        assert_eq!(p.filters().len(), 2);
    }

    #[test]
    fn aggregation_requires_created_variable_and_is_replaced() {
        let mut p = QueryProgram::new(Dialect::Triple);
        assert_eq!(
            p.add_min(&var("?ghost")),
            Err(BuildError::UnknownVariable("?ghost".into()))
        );
        p.add_fact(ent("m.a"), "r", tvar("?year")).unwrap();
        p.add_max(&var("?year")).unwrap();
        p.add_count(&var("?year")).unwrap();
        assert_eq!(p.aggregation().unwrap().kind, AggregationKind::Count);
        assert_eq!(p.calls().len(), 3);
    }

    #[test]
    fn wrong_dialect_is_rejected() {
        let mut t = QueryProgram::new(Dialect::Table);
        assert!(matches!(
            t.add_fact(ent("m.a"), "r", tvar("?x")),
            Err(BuildError::WrongDialect { .. })
        ));
        let mut p = QueryProgram::new(Dialect::Triple);
        assert!(matches!(
            p.add_condition("Score", "=", Literal::new("1")),
            Err(BuildError::WrongDialect { .. })
        ));
    }

    #[test]
    fn set_answer_checks_variables() {
        let mut p = QueryProgram::new(Dialect::Triple);
        p.add_fact(ent("m.a"), "r", tvar("?car")).unwrap();
        p.add_fact(tvar("?car"), "s", tvar("?speed")).unwrap();
        assert_eq!(
            p.set_answer(&var("?boat")),
            Err(BuildError::UnknownVariable("?boat".into()))
        );
        p.set_answer(&var("?car")).unwrap();
        assert_eq!(p.answer(), Some(&Answer::Variable(var("?car"))));
    }

    #[test]
    fn table_conditions_and_answer() {
        let schema = TableSchema {
            name: "songs".into(),
            columns: vec!["Lyrics theme/style".into(), "Score".into()],
        };
        let mut p = QueryProgram::for_table(schema);
        p.add_condition("Lyrics theme/style", "=", Literal::new("Romance"))
            .unwrap();
        assert_eq!(p.conditions().len(), 1);
        assert_eq!(
            p.add_condition("Score", ">=", Literal::new("1")),
            Err(BuildError::InvalidOperator(">=".into()))
        );
        assert_eq!(
            p.add_condition("Scroe", "=", Literal::new("1")),
            Err(BuildError::UnknownColumn("Scroe".into()))
        );
        p.set_answer_column("Score", AggregationKind::Avg).unwrap();
        assert_eq!(
            p.aggregation(),
            Some(&AggregationSpec {
                kind: AggregationKind::Avg,
                target: "Score".into()
            })
        );
        assert_eq!(
            p.emit_text().unwrap(),
            "SELECT AVG(Score) FROM songs WHERE \"Lyrics theme/style\" = 'Romance'"
        );
    }

    #[test]
    fn emit_minimal_triple_query() {
        let mut p = QueryProgram::new(Dialect::Triple);
        p.add_fact(ent("m.e1"), "r1", tvar("?x")).unwrap();
        p.set_answer(&var("?x")).unwrap();
        assert_eq!(p.emit_text().unwrap(), "SELECT ?x WHERE { m.e1 r1 ?x . }");
        assert_eq!(p.emit_text().unwrap(), p.emit_text().unwrap());
    }

    #[test]
    fn emit_count_and_filter() {
        let mut p = QueryProgram::new(Dialect::Triple);
        p.add_fact(ent("m.e1"), "r1", tvar("?x")).unwrap();
        p.add_filter(tvar("?x"), ">=", Term::literal("3")).unwrap();
        p.add_count(&var("?x")).unwrap();
        p.set_answer(&var("?x")).unwrap();
        assert_eq!(
            p.emit_text().unwrap(),
            "SELECT (COUNT(?x) AS ?cnt) WHERE { m.e1 r1 ?x . FILTER (?x >= 3) }"
        );
    }

    #[test]
    fn emit_table_without_conditions() {
        let mut p = QueryProgram::for_table(TableSchema {
            name: "t".into(),
            columns: vec!["col".into()],
        });
        p.set_answer_column("col", AggregationKind::None).unwrap();
        assert_eq!(p.emit_text().unwrap(), "SELECT col FROM t");
    }

    #[test]
    fn aggregation_parsing() {
        assert_eq!("None".parse::<AggregationKind>(), Ok(AggregationKind::None));
        assert_eq!("avg".parse::<AggregationKind>(), Ok(AggregationKind::Avg));
        assert!("MEDIAN".parse::<AggregationKind>().is_err());
        assert!(!AggregationKind::Sum.allowed_in(Dialect::Triple));
        assert!(AggregationKind::Sum.allowed_in(Dialect::Table));
    }
}
