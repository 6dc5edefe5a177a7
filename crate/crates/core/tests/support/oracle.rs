//! Brute-force reference evaluators and random case generators.
//!
//! The triple oracle enumerates every assignment of store values to the
//! program's variables and keeps those that satisfy all patterns and filters.
//! The table oracle is a plain linear scan. Neither shares code with the
//! engines they check beyond the public program accessors.

#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::BTreeSet;

use queryagent_core::program::{AggregationKind, Answer, CompareOp};
use queryagent_core::{
    AnswerSet, Column, ColumnType, Dialect, Literal, QueryProgram, Table, Term, Triple,
    TripleStore, Variable,
};
use rand::Rng;

fn num(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

fn cmp(a: &str, b: &str) -> Ordering {
    match (num(a), num(b)) {
        (Some(x), Some(y)) => x.partial_cmp(&y).unwrap(),
        _ => a.cmp(b),
    }
}

fn op_holds(op: CompareOp, ord: Ordering) -> bool {
    match op.symbol() {
        ">" => ord == Ordering::Greater,
        "<" => ord == Ordering::Less,
        "=" => ord == Ordering::Equal,
        ">=" => ord != Ordering::Less,
        "<=" => ord != Ordering::Greater,
        "!=" => ord != Ordering::Equal,
        other => panic!("unexpected operator {other}"),
    }
}

/// Sort key for extremum: numbers before text, numbers numerically.
fn order_key(s: &str) -> (u8, f64, String) {
    match num(s) {
        Some(v) => (0, v, String::new()),
        None => (1, 0.0, s.to_string()),
    }
}

fn extremum(values: &BTreeSet<String>, max: bool) -> AnswerSet {
    let mut v: Vec<&String> = values.iter().collect();
    v.sort_by(|a, b| {
        let (ka, kb) = (order_key(a), order_key(b));
        ka.0.cmp(&kb.0)
            .then(ka.1.partial_cmp(&kb.1).unwrap())
            .then(ka.2.cmp(&kb.2))
    });
    let pick = if max { v.last() } else { v.first() };
    match pick {
        Some(s) => AnswerSet::Scalar((*s).clone()),
        None => AnswerSet::Values(vec![]),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub columns: Vec<Variable>,
    pub rows: BTreeSet<Vec<String>>,
    pub answer: Option<AnswerSet>,
}

fn matches_constant(term: &Term, value: &str) -> bool {
    match term {
        Term::Entity(id) => id == value,
        Term::Literal(l) => match (num(l.value()), num(value)) {
            (Some(a), Some(b)) => a == b,
            _ => l.value() == value,
        },
        Term::Variable(_) => unreachable!(),
    }
}

/// Exhaustive evaluation over all |values|^|vars| assignments.
pub fn brute_force(triples: &[Triple], program: &QueryProgram) -> OracleResult {
    let mut columns: Vec<Variable> = Vec::new();
    for p in program.patterns() {
        for t in [&p.head, &p.tail] {
            if let Term::Variable(v) = t {
                if !columns.contains(v) {
                    columns.push(v.clone());
                }
            }
        }
    }
    let domain: Vec<String> = triples
        .iter()
        .flat_map(|t| [t.subject.clone(), t.object.clone()])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let mut rows = BTreeSet::new();
    let total = domain.len().pow(columns.len() as u32);
    let mut assignment = vec![0usize; columns.len()];
    for _ in 0..total {
        let values: Vec<&str> = assignment.iter().map(|&i| domain[i].as_str()).collect();
        let lookup = |t: &Term| -> Option<String> {
            match t {
                Term::Variable(v) => columns
                    .iter()
                    .position(|c| c == v)
                    .map(|i| values[i].to_string()),
                other => Some(other.key().to_string()),
            }
        };
        let resolve = |t: &Term, value: &str| match t {
            Term::Variable(v) => {
                let i = columns.iter().position(|c| c == v).unwrap();
                values[i] == value
            }
            other => matches_constant(other, value),
        };
        let patterns_ok = program.patterns().iter().all(|p| {
            triples.iter().any(|t| {
                t.relation == p.relation
                    && resolve(&p.head, &t.subject)
                    && resolve(&p.tail, &t.object)
            })
        });
        let filters_ok = patterns_ok
            && program.filters().iter().all(|f| {
                let l = lookup(&f.left).expect("filter variable bound");
                let r = lookup(&f.right).expect("filter variable bound");
                op_holds(f.op, cmp(&l, &r))
            });
        if filters_ok {
            rows.insert(values.iter().map(|s| s.to_string()).collect::<Vec<_>>());
        }
        // odometer increment
        for slot in assignment.iter_mut().rev() {
            *slot += 1;
            if *slot < domain.len() {
                break;
            }
            *slot = 0;
        }
    }

    let answer = program.answer().map(|answer| {
        let Answer::Variable(answer_var) = answer else {
            panic!("triple oracle expects a variable answer");
        };
        let (kind, target) = match program.aggregation() {
            Some(a) if a.kind != AggregationKind::None => {
                (a.kind, Variable::new(a.target.clone()).unwrap())
            }
            _ => (AggregationKind::None, answer_var.clone()),
        };
        let idx = columns
            .iter()
            .position(|c| *c == target)
            .expect("answer bound");
        let values: BTreeSet<String> = rows.iter().map(|r| r[idx].clone()).collect();
        match kind {
            AggregationKind::None => AnswerSet::Values(values.into_iter().collect()),
            AggregationKind::Count => AnswerSet::Scalar(values.len().to_string()),
            AggregationKind::Max => extremum(&values, true),
            AggregationKind::Min => extremum(&values, false),
            other => panic!("{other} not generated for triple programs"),
        }
    });
    OracleResult {
        columns,
        rows,
        answer,
    }
}

pub struct TripleCase {
    pub triples: Vec<Triple>,
    pub store: TripleStore,
    pub program: QueryProgram,
}

pub const TRIPLE_AGGREGATIONS: [AggregationKind; 4] = [
    AggregationKind::None,
    AggregationKind::Max,
    AggregationKind::Min,
    AggregationKind::Count,
];

/// A store of at most 50 triples over entities, numbers and four relations.
pub fn random_triples(rng: &mut impl Rng) -> Vec<Triple> {
    let n = rng.gen_range(1..=50);
    let node = |rng: &mut dyn rand::RngCore| -> String {
        if rng.gen_bool(0.7) {
            format!("e{}", rng.gen_range(0..8))
        } else {
            format!("{}", rng.gen_range(0..12))
        }
    };
    (0..n)
        .map(|_| {
            let s = format!("e{}", rng.gen_range(0..8));
            let r = format!("r{}", rng.gen_range(0..4));
            let o = node(rng);
            Triple::new(s, r, o)
        })
        .collect()
}

/// A program with 1..=3 patterns over at most 3 variables, up to two filters
/// using `op`, and `agg` over a random variable.
pub fn random_program(rng: &mut impl Rng, op: CompareOp, agg: AggregationKind) -> QueryProgram {
    let mut p = QueryProgram::new(Dialect::Triple);
    let names = ["?a", "?b", "?c"];
    let mut used = 0usize;
    let pick_term = |rng: &mut dyn rand::RngCore, used: &mut usize, tail: bool| -> Term {
        let roll = rng.gen_range(0..10);
        if roll < 4 && *used > 0 {
            Term::variable(names[rng.gen_range(0..*used)]).unwrap()
        } else if roll < 7 && *used < names.len() {
            *used += 1;
            Term::variable(names[*used - 1]).unwrap()
        } else if tail && roll == 9 {
            Term::literal(format!("{}", rng.gen_range(0..12)))
        } else {
            Term::entity(format!("e{}", rng.gen_range(0..8))).unwrap()
        }
    };
    let patterns = rng.gen_range(1..=3);
    for _ in 0..patterns {
        let head = pick_term(rng, &mut used, false);
        let tail = pick_term(rng, &mut used, true);
        let rel = format!("r{}", rng.gen_range(0..4));
        p.add_fact(head, rel, tail).unwrap();
    }
    let vars: Vec<Variable> = p.created_variables().to_vec();
    if !vars.is_empty() {
        let filters = rng.gen_range(0..=2);
        for i in 0..filters {
            let left = Term::Variable(vars[rng.gen_range(0..vars.len())].clone());
            let right = if rng.gen_bool(0.3) && vars.len() > 1 {
                Term::Variable(vars[rng.gen_range(0..vars.len())].clone())
            } else if rng.gen_bool(0.7) {
                Term::literal(format!("{}", rng.gen_range(0..12)))
            } else {
                Term::entity(format!("e{}", rng.gen_range(0..8))).unwrap()
            };
            let this_op = if i == 0 {
                op
            } else {
                CompareOp::ALL[rng.gen_range(0..6)]
            };
            p.add_filter(left, this_op.symbol(), right).unwrap();
        }
        let target = vars[rng.gen_range(0..vars.len())].clone();
        match agg {
            AggregationKind::Max => p.add_max(&target).unwrap(),
            AggregationKind::Min => p.add_min(&target).unwrap(),
            AggregationKind::Count => p.add_count(&target).unwrap(),
            _ => {}
        }
        let answer = vars[rng.gen_range(0..vars.len())].clone();
        p.set_answer(&answer).unwrap();
    }
    p
}

pub fn random_triple_case(rng: &mut impl Rng, op: CompareOp, agg: AggregationKind) -> TripleCase {
    let triples = random_triples(rng);
    let store = TripleStore::new(triples.clone(), Vec::<String>::new()).unwrap();
    let program = random_program(rng, op, agg);
    TripleCase {
        triples,
        store,
        program,
    }
}

/// Compares the engine with the oracle; `Err` describes the first mismatch.
pub fn check_triple_case(case: &TripleCase) -> Result<(), String> {
    let eval = case
        .store
        .evaluate(&case.program)
        .map_err(|e| format!("engine error {e}"))?;
    let oracle = brute_force(&case.triples, &case.program);
    if eval.bindings.columns != oracle.columns {
        return Err(format!(
            "columns differ: {:?} vs {:?}",
            eval.bindings.columns, oracle.columns
        ));
    }
    let engine_rows: BTreeSet<Vec<String>> = eval.bindings.rows.iter().cloned().collect();
    if engine_rows.len() != eval.bindings.rows.len() {
        return Err("engine produced duplicate rows".into());
    }
    if engine_rows != oracle.rows {
        return Err(format!(
            "rows differ for {:?}: engine {:?} vs oracle {:?}",
            case.program.emit_text(),
            engine_rows,
            oracle.rows
        ));
    }
    if eval.answer != oracle.answer {
        return Err(format!(
            "answers differ: {:?} vs {:?}",
            eval.answer, oracle.answer
        ));
    }
    let expect_empty = oracle.rows.is_empty() && !case.program.patterns().is_empty();
    if eval.empty != expect_empty {
        return Err("empty flag mismatch".into());
    }
    Ok(())
}

// ---- table dialect ----

pub struct TableCase {
    pub table: Table,
    pub program: QueryProgram,
}

pub fn random_table(rng: &mut impl Rng) -> Table {
    let rows = rng.gen_range(0..=100);
    let teams = ["alpha", "beta", "gamma", "delta"];
    let columns = vec![
        Column {
            name: "Team".into(),
            ty: ColumnType::Text,
        },
        Column {
            name: "Score".into(),
            ty: ColumnType::Number,
        },
        Column {
            name: "Year".into(),
            ty: ColumnType::Number,
        },
        Column {
            name: "Code".into(),
            ty: ColumnType::Text,
        },
    ];
    let data = (0..rows)
        .map(|_| {
            vec![
                teams[rng.gen_range(0..teams.len())].to_string(),
                format!("{}", rng.gen_range(0..30)),
                format!("{}", 1990 + rng.gen_range(0..20)),
                // text column that happens to hold digits: compared as text
                format!("{}", rng.gen_range(0..15)),
            ]
        })
        .collect();
    Table::new("games", columns, data).unwrap()
}

pub fn random_table_program(
    rng: &mut impl Rng,
    table: &Table,
    agg: AggregationKind,
) -> QueryProgram {
    let mut p = QueryProgram::for_table(table.schema());
    let ops = ["=", ">", "<"];
    let conditions = rng.gen_range(0..=3);
    for _ in 0..conditions {
        let col = rng.gen_range(0..4);
        let name = &table.columns()[col].name;
        let value = match col {
            0 => ["alpha", "beta", "gamma", "delta", "zeta"][rng.gen_range(0..5)].to_string(),
            1 => format!("{}", rng.gen_range(0..30)),
            2 => format!("{}", 1990 + rng.gen_range(0..20)),
            _ => format!("{}", rng.gen_range(0..15)),
        };
        p.add_condition(name, ops[rng.gen_range(0..3)], Literal::new(value))
            .unwrap();
    }
    let target = &table.columns()[rng.gen_range(0..4)].name;
    p.set_answer_column(target, agg).unwrap();
    p
}

#[derive(Debug, PartialEq)]
pub enum TableOracle {
    Answer(AnswerSet),
    TypeError,
}

fn fmt_num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Linear scan: filter rows, then aggregate the answer column.
pub fn scan_table(table: &Table, program: &QueryProgram) -> TableOracle {
    let col_idx = |name: &str| table.columns().iter().position(|c| c.name == name).unwrap();
    let kept: Vec<&Vec<String>> = table
        .rows()
        .iter()
        .filter(|row| {
            program.conditions().iter().all(|c| {
                let i = col_idx(&c.column);
                let ord = match table.columns()[i].ty {
                    ColumnType::Number => cmp(&row[i], c.value.value()),
                    ColumnType::Text => row[i].as_str().cmp(c.value.value()),
                };
                op_holds(c.op, ord)
            })
        })
        .collect();
    let Some(Answer::Column(column)) = program.answer() else {
        panic!("table oracle expects a column answer");
    };
    let idx = col_idx(column);
    let kind = program
        .aggregation()
        .map_or(AggregationKind::None, |a| a.kind);
    let numeric_column = table.rows().iter().all(|r| num(&r[idx]).is_some());
    let cells: Vec<String> = kept.iter().map(|r| r[idx].clone()).collect();
    let answer = match kind {
        AggregationKind::None => AnswerSet::Values(cells),
        AggregationKind::Count => AnswerSet::Scalar(cells.len().to_string()),
        _ if !numeric_column => return TableOracle::TypeError,
        _ if cells.is_empty() => AnswerSet::Values(vec![]),
        AggregationKind::Max => AnswerSet::Scalar(
            cells
                .iter()
                .max_by(|a, b| num(a).unwrap().partial_cmp(&num(b).unwrap()).unwrap())
                .unwrap()
                .clone(),
        ),
        AggregationKind::Min => AnswerSet::Scalar(
            cells
                .iter()
                .min_by(|a, b| num(a).unwrap().partial_cmp(&num(b).unwrap()).unwrap())
                .unwrap()
                .clone(),
        ),
        AggregationKind::Sum => {
            AnswerSet::Scalar(fmt_num(cells.iter().map(|c| num(c).unwrap()).sum()))
        }
        AggregationKind::Avg => {
            let s: f64 = cells.iter().map(|c| num(c).unwrap()).sum();
            AnswerSet::Scalar(fmt_num(s / cells.len() as f64))
        }
    };
    TableOracle::Answer(answer)
}

pub fn check_table_case(case: &TableCase) -> Result<(), String> {
    let expected = scan_table(&case.table, &case.program);
    let got = match case.table.evaluate(&case.program) {
        Ok(a) => TableOracle::Answer(a),
        Err(queryagent_core::TableError::TypeError(_)) => TableOracle::TypeError,
        Err(e) => return Err(format!("engine error {e}")),
    };
    if got != expected {
        return Err(format!(
            "{:?}: engine {:?} vs oracle {:?}",
            case.program.emit_text(),
            got,
            expected
        ));
    }
    Ok(())
}

/// Freebase-style relation names, distinct.
pub fn relation_candidates(rng: &mut impl Rng, n: usize) -> Vec<String> {
    const WORDS: &[&str] = &[
        "film",
        "director",
        "person",
        "music",
        "award",
        "location",
        "sports",
        "team",
        "book",
        "author",
        "country",
        "city",
        "language",
        "release",
        "date",
        "genre",
        "actor",
        "role",
        "computer",
        "designer",
        "manufacturer",
        "education",
        "nationality",
        "height",
        "price",
    ];
    let mut out = BTreeSet::new();
    while out.len() < n {
        let w = |rng: &mut dyn rand::RngCore| WORDS[rng.gen_range(0..WORDS.len())];
        out.insert(format!("{}.{}.{}_{}", w(rng), w(rng), w(rng), w(rng)));
    }
    let mut v: Vec<String> = out.into_iter().collect();
    for i in (1..v.len()).rev() {
        v.swap(i, rng.gen_range(0..=i));
    }
    v
}

/// The `k` candidates closest to the question by cosine, ties by name.
pub fn top_k_by_cosine(
    question: &str,
    candidates: &[String],
    embedder: &impl queryagent_core::Embedder,
    k: usize,
) -> BTreeSet<String> {
    let q = embedder.embed(question);
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut scored: Vec<(f64, &String)> = candidates
        .iter()
        .map(|c| {
            let e = embedder.embed(c);
            let dot: f64 = q.iter().zip(&e).map(|(a, b)| a * b).sum();
            let d = norm(&q) * norm(&e);
            (if d == 0.0 { 0.0 } else { dot / d }, c)
        })
        .collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then_with(|| a.1.cmp(b.1)));
    scored.into_iter().take(k).map(|(_, c)| c.clone()).collect()
}
