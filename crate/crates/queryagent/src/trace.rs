//! JSON Lines trace files: a header, one record per step, and a footer.
//!
//! Wall time is left out so that identical runs produce identical files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use queryagent_core::{AnswerSet, Dialect, EntityLink};
use serde::{Deserialize, Serialize};

use crate::agent::{EpisodeTrace, StepRecord, Strategy};

/// `["a", "b"]` for a set of values, `"3"` for a scalar.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnswerJson {
    Values(Vec<String>),
    Scalar(String),
}

impl From<&AnswerSet> for AnswerJson {
    fn from(a: &AnswerSet) -> Self {
        match a {
            AnswerSet::Values(v) => AnswerJson::Values(v.clone()),
            AnswerSet::Scalar(s) => AnswerJson::Scalar(s.clone()),
        }
    }
}

impl From<AnswerJson> for AnswerSet {
    fn from(a: AnswerJson) -> Self {
        match a {
            AnswerJson::Values(v) => AnswerSet::Values(v),
            AnswerJson::Scalar(s) => AnswerSet::Scalar(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityJson {
    pub id: String,
    pub name: String,
}

impl From<&EntityLink> for EntityJson {
    fn from(e: &EntityLink) -> Self {
        Self {
            id: e.id.clone(),
            name: e.name.clone(),
        }
    }
}

impl From<&EntityJson> for EntityLink {
    fn from(e: &EntityJson) -> Self {
        EntityLink::new(e.id.clone(), e.name.clone())
    }
}

/// How the episode was set up; enough to run it again.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSetup {
    pub dialect: String,
    /// KB or table file.
    pub store: String,
    pub strategy: String,
    pub max_steps: u32,
    pub seed: u64,
    pub threshold: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triggers: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub question: String,
    pub entities: Vec<EntityJson>,
    #[serde(flatten)]
    pub setup: RunSetup,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepLine {
    pub index: u32,
    pub thought: String,
    pub action: String,
    pub observation: String,
    pub was_correction: bool,
    pub error_kind: Option<String>,
    pub generation: String,
}

impl From<&StepRecord> for StepLine {
    fn from(s: &StepRecord) -> Self {
        Self {
            index: s.index,
            thought: s.thought.clone(),
            action: s.action.clone(),
            observation: s.observation.clone(),
            was_correction: s.was_correction,
            error_kind: s.error_kind.as_ref().map(|k| k.to_string()),
            generation: s.generation.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Footer {
    pub final_answer: Option<AnswerJson>,
    pub query: Option<String>,
    pub steps: u32,
    pub corrections: u32,
    pub store_queries: u64,
    pub llm_calls: u64,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub cost: f64,
    pub aborted: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
pub enum Line {
    Header(Header),
    Step(StepLine),
    Footer(Footer),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub header: Header,
    pub steps: Vec<StepLine>,
    pub footer: Footer,
}

impl TraceFile {
    pub fn from_trace(trace: &EpisodeTrace, setup: RunSetup) -> Self {
        let c = &trace.counters;
        Self {
            header: Header {
                question: trace.question.text.clone(),
                entities: trace
                    .question
                    .entities
                    .iter()
                    .map(EntityJson::from)
                    .collect(),
                setup,
            },
            steps: trace.steps.iter().map(StepLine::from).collect(),
            footer: Footer {
                final_answer: trace.final_answer.as_ref().map(AnswerJson::from),
                query: trace.query.clone(),
                steps: c.steps,
                corrections: c.corrections,
                store_queries: c.store_queries,
                llm_calls: c.llm_calls,
                input_tokens: c.ledger.input_tokens,
                output_tokens: c.ledger.output_tokens,
                cost: c.ledger.cost(),
                aborted: trace.aborted.clone(),
            },
        }
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let lines = std::iter::once(Line::Header(self.header.clone()))
            .chain(self.steps.iter().cloned().map(Line::Step))
            .chain(std::iter::once(Line::Footer(self.footer.clone())));
        for line in lines {
            out.push_str(&serde_json::to_string(&line).expect("trace lines serialize"));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let mut header = None;
        let mut steps = Vec::new();
        let mut footer = None;
        for (i, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let line: Line =
                serde_json::from_str(raw).with_context(|| format!("trace line {}", i + 1))?;
            match line {
                Line::Header(h) if header.is_none() && steps.is_empty() => header = Some(h),
                Line::Step(s) if header.is_some() && footer.is_none() => steps.push(s),
                Line::Footer(f) if header.is_some() && footer.is_none() => footer = Some(f),
                _ => bail!("trace line {}: record out of order", i + 1),
            }
        }
        match (header, footer) {
            (Some(header), Some(footer)) => Ok(Self {
                header,
                steps,
                footer,
            }),
            _ => bail!("trace needs a header and a footer"),
        }
    }

    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| path.display().to_string())?;
        Self::parse(&text)
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        fs::write(path, self.to_jsonl()).with_context(|| path.display().to_string())
    }

    /// The store path, resolved against the trace file's directory when relative.
    pub fn store_path(&self, trace_path: &Path) -> PathBuf {
        resolve(trace_path, &self.header.setup.store)
    }

    pub fn strategy(&self) -> anyhow::Result<Strategy> {
        self.header
            .setup
            .strategy
            .parse()
            .map_err(anyhow::Error::msg)
    }

    pub fn dialect(&self) -> anyhow::Result<Dialect> {
        match self.header.setup.dialect.as_str() {
            "triple" => Ok(Dialect::Triple),
            "table" => Ok(Dialect::Table),
            other => bail!("unknown dialect {other:?}"),
        }
    }
}

pub fn resolve(base_file: &Path, path: &str) -> PathBuf {
    let p = Path::new(path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base_file.parent().unwrap_or(Path::new(".")).join(p)
    }
}
