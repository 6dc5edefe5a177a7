//! Single-table evaluator for table-dialect programs.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;

use thiserror::Error;

use crate::answer::AnswerSet;
use crate::program::{AggregationKind, Answer, Condition, Dialect, QueryProgram, TableSchema};
use crate::term::{compare_values, format_number, parse_number};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TableError {
    #[error("duplicate column {0:?}")]
    DuplicateColumn(String),
    #[error("row {row} has {got} cells, expected {expected}")]
    RowArity {
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("row {row}: {value:?} in number column {column:?} is not a number")]
    NotANumber {
        row: usize,
        column: String,
        value: String,
    },
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("column {0:?} holds non-numeric text")]
    TypeError(String),
    #[error("{0}")]
    Program(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnType {
    Text,
    Number,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub ty: ColumnType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    name: String,
    columns: Vec<Column>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(
        name: impl Into<String>,
        columns: Vec<Column>,
        rows: Vec<Vec<String>>,
    ) -> Result<Self, TableError> {
        let mut seen = BTreeSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(TableError::DuplicateColumn(c.name.clone()));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(TableError::RowArity {
                    row: i,
                    expected: columns.len(),
                    got: row.len(),
                });
            }
            for (cell, col) in row.iter().zip(&columns) {
                if col.ty == ColumnType::Number && parse_number(cell).is_none() {
                    return Err(TableError::NotANumber {
                        row: i,
                        column: col.name.clone(),
                        value: cell.clone(),
                    });
                }
            }
        }
        Ok(Self {
            name: name.into(),
            columns,
            rows,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn schema(&self) -> TableSchema {
        TableSchema {
            name: self.name.clone(),
            columns: self.columns.iter().map(|c| c.name.clone()).collect(),
        }
    }

    fn column_index(&self, column: &str) -> Result<usize, TableError> {
        self.columns
            .iter()
            .position(|c| c.name == column)
            .ok_or_else(|| TableError::UnknownColumn(column.to_string()))
    }

    /// Cells of `column` in row order, duplicates kept.
    pub fn get_column(&self, column: &str) -> Result<Vec<&str>, TableError> {
        let idx = self.column_index(column)?;
        Ok(self.rows.iter().map(|r| r[idx].as_str()).collect())
    }

    /// Indices of rows satisfying every condition.
    pub fn matching_rows(&self, conditions: &[Condition]) -> Result<Vec<usize>, TableError> {
        let resolved = conditions
            .iter()
            .map(|c| Ok((self.column_index(&c.column)?, c)))
            .collect::<Result<Vec<_>, TableError>>()?;
        Ok((0..self.rows.len())
            .filter(|&i| {
                resolved.iter().all(|(idx, c)| {
                    let ord = self.compare_cell(*idx, &self.rows[i][*idx], c.value.value());
                    c.op.holds(ord)
                })
            })
            .collect())
    }

    // Number columns compare numerically; text columns compare as strings.
    fn compare_cell(&self, idx: usize, cell: &str, value: &str) -> Ordering {
        match self.columns[idx].ty {
            ColumnType::Number => compare_values(cell, value),
            ColumnType::Text => cell.cmp(value),
        }
    }

    pub fn evaluate(&self, program: &QueryProgram) -> Result<AnswerSet, TableError> {
        if program.dialect() != Dialect::Table {
            return Err(TableError::Program(
                "a table only evaluates table-dialect programs".into(),
            ));
        }
        let column = match program.answer() {
            Some(Answer::Column(c)) => c.as_str(),
            Some(Answer::Variable(v)) => {
                return Err(TableError::Program(format!(
                    "variable answer {v} in a table-dialect program"
                )))
            }
            None => return Err(TableError::Program("no answer has been set".into())),
        };
        let kind = program
            .aggregation()
            .map_or(AggregationKind::None, |a| a.kind);
        let idx = self.column_index(column)?;
        let rows = self.matching_rows(program.conditions())?;
        let cells = rows.iter().map(|&i| self.rows[i][idx].as_str());

        if matches!(
            kind,
            AggregationKind::Max
                | AggregationKind::Min
                | AggregationKind::Sum
                | AggregationKind::Avg
        ) && self.rows.iter().any(|r| parse_number(&r[idx]).is_none())
        {
            return Err(TableError::TypeError(column.to_string()));
        }

        Ok(match kind {
            AggregationKind::None => AnswerSet::Values(cells.map(str::to_string).collect()),
            AggregationKind::Count => AnswerSet::Scalar(rows.len().to_string()),
            _ if rows.is_empty() => AnswerSet::empty(),
            AggregationKind::Max | AggregationKind::Min => {
                let want = if kind == AggregationKind::Max {
                    Ordering::Greater
                } else {
                    Ordering::Less
                };
                let best = cells
                    .reduce(|a, b| if compare_values(b, a) == want { b } else { a })
                    .unwrap_or_default();
                AnswerSet::Scalar(best.to_string())
            }
            AggregationKind::Sum | AggregationKind::Avg => {
                let nums: Vec<f64> = cells.filter_map(parse_number).collect();
                let sum: f64 = nums.iter().sum();
                let v = if kind == AggregationKind::Sum {
                    sum
                } else {
                    sum / nums.len() as f64
                };
                AnswerSet::Scalar(format_number(v))
            }
        })
    }
}
