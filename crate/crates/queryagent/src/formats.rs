//! Loaders for the KB (tab-separated triples) and table (CSV) fixture files.

use std::fs;
use std::path::Path;

use queryagent_core::{Column, ColumnType, StoreError, Table, TableError, Triple, TripleStore};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

fn read(path: &Path) -> Result<String, FormatError> {
    fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Parses `subject<TAB>relation<TAB>object` lines. `#cvt <id>` declares a
/// CVT node; other `#` lines and blank lines are skipped.
pub fn parse_kb(text: &str) -> Result<TripleStore, FormatError> {
    let mut triples = Vec::new();
    let mut cvt = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(id) = rest.strip_prefix("cvt") {
                let id = id.trim();
                if id.is_empty() || id.contains(char::is_whitespace) {
                    return Err(FormatError::Line {
                        line: line_no,
                        message: "#cvt needs exactly one node id".into(),
                    });
                }
                cvt.push(id.to_string());
            }
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(FormatError::Line {
                line: line_no,
                message: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        if fields.iter().any(|f| f.trim().is_empty()) {
            return Err(FormatError::Line {
                line: line_no,
                message: "empty field".into(),
            });
        }
        triples.push(Triple::new(
            fields[0].trim(),
            fields[1].trim(),
            fields[2].trim(),
        ));
    }
    Ok(TripleStore::new(triples, cvt)?)
}

pub fn load_kb(path: &Path) -> Result<TripleStore, FormatError> {
    parse_kb(&read(path)?)
}

/// Parses a CSV table. An optional first line `#types text,number,...`
/// declares column types; undeclared columns are text.
pub fn parse_table(name: &str, text: &str) -> Result<Table, FormatError> {
    let (types, body) = match text.strip_prefix("#types") {
        Some(rest) => {
            let (line, body) = rest.split_once('\n').unwrap_or((rest, ""));
            let types = line
                .split(',')
                .map(|t| match t.trim() {
                    "text" => Ok(ColumnType::Text),
                    "number" => Ok(ColumnType::Number),
                    other => Err(FormatError::Line {
                        line: 1,
                        message: format!("unknown column type {other:?}"),
                    }),
                })
                .collect::<Result<Vec<_>, _>>()?;
            (Some(types), body)
        }
        None => (None, text),
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let types = types.unwrap_or_else(|| vec![ColumnType::Text; header.len()]);
    if types.len() != header.len() {
        return Err(FormatError::Line {
            line: 1,
            message: format!(
                "#types declares {} columns, header has {}",
                types.len(),
                header.len()
            ),
        });
    }
    let columns = header
        .into_iter()
        .zip(types)
        .map(|(name, ty)| Column { name, ty })
        .collect();
    let rows = reader
        .records()
        .map(|r| r.map(|rec| rec.iter().map(str::to_string).collect()))
        .collect::<Result<Vec<Vec<String>>, _>>()?;
    Ok(Table::new(name, columns, rows)?)
}

/// The table is named after the file stem.
pub fn load_table(path: &Path) -> Result<Table, FormatError> {
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("t")
        .to_string();
    parse_table(&name, &read(path)?)
}
