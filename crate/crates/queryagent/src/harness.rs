//! Question fixtures, batch evaluation, reports and replay.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use anyhow::{bail, Context};
use queryagent_core::eraser::TriggerSetting;
use queryagent_core::metrics::{denotation_accuracy, f1, mean};
use queryagent_core::{AnswerSet, Dialect, Table, TriggerRegistry, TripleStore};
use serde::{Deserialize, Serialize};

use crate::agent::{run_episode, AgentConfig, Environment, EpisodeTrace, Question, Strategy};
use crate::formats::{load_kb, load_table};
use crate::llm::{LanguageModel, ScriptedClient, Transcript, TranscriptEntry};
use crate::trace::{resolve, AnswerJson, EntityJson, RunSetup, TraceFile};

pub fn dialect_name(d: Dialect) -> &'static str {
    match d {
        Dialect::Triple => "triple",
        Dialect::Table => "table",
    }
}

pub fn parse_dialect(s: &str) -> anyhow::Result<Dialect> {
    match s {
        "triple" => Ok(Dialect::Triple),
        "table" => Ok(Dialect::Table),
        other => bail!("unknown dialect {other:?}; expected triple or table"),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionFixture {
    pub id: String,
    pub question: String,
    #[serde(default)]
    pub entities: Vec<EntityJson>,
    pub gold: AnswerJson,
    pub dialect: String,
    /// Scripted transcript, relative to the suite file.
    #[serde(default)]
    pub transcript: Option<String>,
}

impl QuestionFixture {
    pub fn to_question(&self) -> Question {
        Question {
            text: self.question.clone(),
            entities: self.entities.iter().map(Into::into).collect(),
        }
    }

    pub fn gold(&self) -> AnswerSet {
        self.gold.clone().into()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suite {
    pub name: String,
    pub dialect: String,
    /// KB or table file, relative to the suite file.
    pub store: String,
    pub questions: Vec<QuestionFixture>,
}

pub struct LoadedSuite {
    pub path: PathBuf,
    pub suite: Suite,
    pub dialect: Dialect,
    pub store: LoadedStore,
}

pub enum LoadedStore {
    Kb(TripleStore),
    Table(Table),
}

impl LoadedStore {
    pub fn load(dialect: Dialect, path: &Path) -> anyhow::Result<Self> {
        Ok(match dialect {
            Dialect::Triple => {
                LoadedStore::Kb(load_kb(path).with_context(|| path.display().to_string())?)
            }
            Dialect::Table => {
                LoadedStore::Table(load_table(path).with_context(|| path.display().to_string())?)
            }
        })
    }

    pub fn env(&self) -> Environment<'_> {
        match self {
            LoadedStore::Kb(kb) => Environment::Kb(kb),
            LoadedStore::Table(t) => Environment::Table(t),
        }
    }
}

impl LoadedSuite {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| path.display().to_string())?;
        let suite: Suite =
            serde_json::from_str(&text).with_context(|| path.display().to_string())?;
        let dialect = parse_dialect(&suite.dialect)?;
        for q in &suite.questions {
            if q.dialect != suite.dialect {
                bail!(
                    "{}: dialect {} does not match the suite's {}",
                    q.id,
                    q.dialect,
                    suite.dialect
                );
            }
        }
        let store = LoadedStore::load(dialect, &resolve(path, &suite.store))?;
        Ok(Self {
            path: path.to_path_buf(),
            suite,
            dialect,
            store,
        })
    }

    pub fn transcript_path(&self, q: &QuestionFixture) -> Option<PathBuf> {
        q.transcript.as_deref().map(|t| resolve(&self.path, t))
    }

    /// A scripted client over the fixture's transcript.
    pub fn scripted(&self, q: &QuestionFixture) -> anyhow::Result<Box<dyn LanguageModel>> {
        let path = self
            .transcript_path(q)
            .with_context(|| format!("{} has no transcript", q.id))?;
        Ok(Box::new(ScriptedClient::new(Transcript::load(&path)?)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionReport {
    pub id: String,
    pub f1: f64,
    pub accuracy: u8,
    pub predicted: Option<AnswerJson>,
    pub gold: AnswerJson,
    pub steps: u32,
    pub corrections: u32,
    pub store_queries: u64,
    pub llm_calls: u64,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub cost: f64,
    pub wall_ms: u64,
    pub error: Option<String>,
}

impl QuestionReport {
    fn from_trace(q: &QuestionFixture, trace: &EpisodeTrace) -> Self {
        let gold = q.gold();
        let predicted = trace.final_answer.clone().unwrap_or_else(AnswerSet::empty);
        let c = &trace.counters;
        Self {
            id: q.id.clone(),
            f1: f1(&predicted, &gold),
            accuracy: denotation_accuracy(&predicted, &gold),
            predicted: trace.final_answer.as_ref().map(AnswerJson::from),
            gold: q.gold.clone(),
            steps: c.steps,
            corrections: c.corrections,
            store_queries: c.store_queries,
            llm_calls: c.llm_calls,
            input_tokens: c.ledger.input_tokens,
            output_tokens: c.ledger.output_tokens,
            cost: c.ledger.cost(),
            wall_ms: c.wall_ms,
            error: trace.aborted.clone(),
        }
    }

    fn failed(q: &QuestionFixture, error: String) -> Self {
        let gold = q.gold();
        Self {
            id: q.id.clone(),
            f1: f1(&AnswerSet::empty(), &gold),
            accuracy: denotation_accuracy(&AnswerSet::empty(), &gold),
            predicted: None,
            gold: q.gold.clone(),
            steps: 0,
            corrections: 0,
            store_queries: 0,
            llm_calls: 0,
            input_tokens: 0,
            output_tokens: 0,
            cost: 0.0,
            wall_ms: 0,
            error: Some(error),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub questions: usize,
    pub failures: usize,
    pub macro_f1: f64,
    pub denotation_accuracy: f64,
    /// Mean wall time per question, milliseconds.
    pub tpq_ms: f64,
    /// Mean store queries per question.
    pub qpq: f64,
    /// Mean dollar cost per question.
    pub cpq: f64,
    pub total_corrections: u64,
    pub total_store_queries: u64,
    pub total_llm_calls: u64,
    pub total_input_tokens: u64,
    pub total_output_tokens: u64,
    pub total_cost: f64,
}

impl Aggregate {
    pub fn from_rows(rows: &[QuestionReport]) -> Self {
        Self {
            questions: rows.len(),
            failures: rows.iter().filter(|r| r.error.is_some()).count(),
            macro_f1: mean(rows.iter().map(|r| r.f1)),
            denotation_accuracy: mean(rows.iter().map(|r| f64::from(r.accuracy))),
            tpq_ms: mean(rows.iter().map(|r| r.wall_ms as f64)),
            qpq: mean(rows.iter().map(|r| r.store_queries as f64)),
            cpq: mean(rows.iter().map(|r| r.cost)),
            total_corrections: rows.iter().map(|r| u64::from(r.corrections)).sum(),
            total_store_queries: rows.iter().map(|r| r.store_queries).sum(),
            total_llm_calls: rows.iter().map(|r| r.llm_calls).sum(),
            total_input_tokens: rows.iter().map(|r| r.input_tokens).sum(),
            total_output_tokens: rows.iter().map(|r| r.output_tokens).sum(),
            total_cost: rows.iter().map(|r| r.cost).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub suite: String,
    pub strategy: String,
    pub questions: Vec<QuestionReport>,
    pub aggregate: Aggregate,
}

impl Report {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "suite {} strategy {}", self.suite, self.strategy);
        let _ = writeln!(
            s,
            "{:<10} {:>6} {:>4} {:>6} {:>6} {:>8} {:>10}  error",
            "id", "f1", "acc", "steps", "corr", "queries", "cost"
        );
        for q in &self.questions {
            let _ = writeln!(
                s,
                "{:<10} {:>6.3} {:>4} {:>6} {:>6} {:>8} {:>10.6}  {}",
                q.id,
                q.f1,
                q.accuracy,
                q.steps,
                q.corrections,
                q.store_queries,
                q.cost,
                q.error.as_deref().unwrap_or("")
            );
        }
        let a = &self.aggregate;
        let _ = writeln!(
            s,
            "macro-F1 {:.4}  accuracy {:.4}  TPQ {:.1} ms  QPQ {:.2}  CPQ ${:.6}  corrections {}  failures {}",
            a.macro_f1, a.denotation_accuracy, a.tpq_ms, a.qpq, a.cpq, a.total_corrections, a.failures
        );
        s
    }
}

pub type LlmFactory<'a> =
    dyn Fn(&QuestionFixture) -> anyhow::Result<Box<dyn LanguageModel>> + Sync + 'a;

/// Runs every fixture question on a pool of `workers` threads. Results keep
/// fixture order; a failing question is recorded, not fatal.
pub fn run_benchmark(
    config: &AgentConfig,
    suite: &LoadedSuite,
    llm_for: &LlmFactory<'_>,
    workers: usize,
) -> Report {
    let questions = &suite.suite.questions;
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<QuestionReport>>> = Mutex::new(vec![None; questions.len()]);
    let workers = workers.clamp(1, questions.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(q) = questions.get(i) else { break };
                let row = match llm_for(q) {
                    Ok(llm) => {
                        let trace =
                            run_episode(config, q.to_question(), suite.store.env(), llm.as_ref());
                        QuestionReport::from_trace(q, &trace)
                    }
                    Err(e) => QuestionReport::failed(q, format!("{e:#}")),
                };
                slots.lock().unwrap()[i] = Some(row);
            });
        }
    });
    let rows: Vec<QuestionReport> = slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every question is run"))
        .collect();
    Report {
        suite: suite.suite.name.clone(),
        strategy: config.strategy.to_string(),
        aggregate: Aggregate::from_rows(&rows),
        questions: rows,
    }
}

/// One scripted benchmark per strategy, same suite and settings otherwise.
pub fn run_ablation(
    base: &AgentConfig,
    suite: &LoadedSuite,
    strategies: &[Strategy],
    workers: usize,
) -> Vec<Report> {
    strategies
        .iter()
        .map(|&strategy| {
            let config = AgentConfig {
                strategy,
                ..base.clone()
            };
            run_benchmark(&config, suite, &|q| suite.scripted(q), workers)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerSettingJson {
    pub kind: String,
    pub enabled: bool,
    pub template: String,
}

pub fn registry_settings(registry: &TriggerRegistry) -> Vec<TriggerSettingJson> {
    registry
        .settings()
        .into_iter()
        .map(|s| TriggerSettingJson {
            kind: s.kind,
            enabled: s.enabled,
            template: s.template,
        })
        .collect()
}

/// The dialect's default registry with a trigger configuration file applied.
pub fn load_registry(dialect: Dialect, path: Option<&Path>) -> anyhow::Result<TriggerRegistry> {
    let mut registry = TriggerRegistry::for_dialect(dialect);
    if let Some(path) = path {
        let text = fs::read_to_string(path).with_context(|| path.display().to_string())?;
        let settings: Vec<TriggerSettingJson> =
            serde_json::from_str(&text).with_context(|| path.display().to_string())?;
        let settings: Vec<TriggerSetting> = settings
            .into_iter()
            .map(|s| TriggerSetting {
                kind: s.kind,
                enabled: s.enabled,
                template: s.template,
            })
            .collect();
        registry
            .apply_settings(&settings)
            .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    }
    Ok(registry)
}

pub struct ReplayOutcome {
    pub original: String,
    pub rerun: String,
}

impl ReplayOutcome {
    pub fn identical(&self) -> bool {
        self.original == self.rerun
    }
}

/// Re-runs a stored trace from its recorded generations and compares bytes.
pub fn replay(trace_path: &Path) -> anyhow::Result<ReplayOutcome> {
    let original =
        fs::read_to_string(trace_path).with_context(|| trace_path.display().to_string())?;
    let stored = TraceFile::parse(&original)?;
    let dialect = stored.dialect()?;
    let setup = stored.header.setup.clone();
    let store = LoadedStore::load(dialect, &stored.store_path(trace_path))?;
    let triggers = setup.triggers.as_deref().map(|t| resolve(trace_path, t));
    let mut config = AgentConfig::new(dialect, stored.strategy()?);
    config.registry = Arc::new(load_registry(dialect, triggers.as_deref())?);
    config.max_steps = setup.max_steps;
    config.seed = setup.seed;
    config.threshold = setup.threshold;
    let llm = ScriptedClient::new(Transcript {
        entries: stored
            .steps
            .iter()
            .map(|s| TranscriptEntry {
                step: s.index,
                text: s.generation.clone(),
            })
            .collect(),
    });
    let question = Question {
        text: stored.header.question.clone(),
        entities: stored.header.entities.iter().map(Into::into).collect(),
    };
    let trace = run_episode(&config, question, store.env(), &llm);
    let rerun = TraceFile::from_trace(&trace, setup).to_jsonl();
    Ok(ReplayOutcome { original, rerun })
}

/// Header setup for a run, with paths as given.
pub fn run_setup(
    config: &AgentConfig,
    dialect: Dialect,
    store: &str,
    triggers: Option<&str>,
) -> RunSetup {
    RunSetup {
        dialect: dialect_name(dialect).to_string(),
        store: store.to_string(),
        strategy: config.strategy.to_string(),
        max_steps: config.max_steps,
        seed: config.seed,
        threshold: config.threshold,
        triggers: triggers.map(str::to_string),
    }
}
