//! Text generation backends and token/cost accounting.

use std::fs;
use std::path::Path;
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

pub const INPUT_DOLLARS_PER_1K: f64 = 0.0015;
pub const OUTPUT_DOLLARS_PER_1K: f64 = 0.0020;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationRequest {
    pub prompt: String,
    /// The agent step this generation is for, starting at 1.
    pub step: u32,
    pub max_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generation {
    pub text: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("prompt is empty")]
    EmptyPrompt,
    #[error("transcript exhausted at step {0}")]
    TranscriptExhausted(u32),
    #[error("transcript entry is for step {found}, requested step {requested}")]
    StepMismatch { requested: u32, found: u32 },
    #[error("HTTP status {0}")]
    HttpFailure(u16),
    #[error("transport: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("configuration: {0}")]
    Config(String),
}

pub trait LanguageModel: Send + Sync {
    fn complete(&self, request: &GenerationRequest) -> Result<Generation, LlmError>;
}

/// Approximate token count: whitespace-delimited words.
pub fn approx_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

/// Keeps everything up to and including the first `Action` line.
pub fn stop_at_action(text: &str) -> String {
    let mut out = String::new();
    for line in text.lines() {
        out.push_str(line);
        if line.trim_start().starts_with("Action") {
            return out;
        }
        out.push('\n');
    }
    out.truncate(out.trim_end().len());
    out
}

pub fn cost(input_tokens: u64, output_tokens: u64) -> f64 {
    input_tokens as f64 / 1000.0 * INPUT_DOLLARS_PER_1K
        + output_tokens as f64 / 1000.0 * OUTPUT_DOLLARS_PER_1K
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostLedger {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

impl CostLedger {
    pub fn record(&mut self, g: &Generation) {
        self.input_tokens += g.input_tokens;
        self.output_tokens += g.output_tokens;
    }

    pub fn cost(&self) -> f64 {
        cost(self.input_tokens, self.output_tokens)
    }
}

impl std::ops::Add for CostLedger {
    type Output = CostLedger;

    fn add(self, rhs: Self) -> Self {
        CostLedger {
            input_tokens: self.input_tokens + rhs.input_tokens,
            output_tokens: self.output_tokens + rhs.output_tokens,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub step: u32,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Transcript {
    pub entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
    }
}

/// Replays a fixed list of step-indexed generations, in order.
#[derive(Debug)]
pub struct ScriptedClient {
    transcript: Transcript,
    cursor: Mutex<usize>,
}

impl ScriptedClient {
    pub fn new(transcript: Transcript) -> Self {
        Self {
            transcript,
            cursor: Mutex::new(0),
        }
    }

    pub fn remaining(&self) -> usize {
        self.transcript.entries.len() - *self.cursor.lock().unwrap()
    }
}

impl LanguageModel for ScriptedClient {
    fn complete(&self, request: &GenerationRequest) -> Result<Generation, LlmError> {
        if request.prompt.trim().is_empty() {
            return Err(LlmError::EmptyPrompt);
        }
        let mut cursor = self.cursor.lock().unwrap();
        let entry = self
            .transcript
            .entries
            .get(*cursor)
            .ok_or(LlmError::TranscriptExhausted(request.step))?;
        if entry.step != request.step {
            return Err(LlmError::StepMismatch {
                requested: request.step,
                found: entry.step,
            });
        }
        *cursor += 1;
        Ok(Generation {
            text: entry.text.clone(),
            input_tokens: approx_tokens(&request.prompt),
            output_tokens: approx_tokens(&entry.text),
        })
    }
}

pub const ENV_ENDPOINT: &str = "QUERYAGENT_LLM_ENDPOINT";
pub const ENV_API_KEY: &str = "QUERYAGENT_LLM_API_KEY";
pub const ENV_MODEL: &str = "QUERYAGENT_LLM_MODEL";

/// Chat-completion client (OpenAI-compatible wire format), temperature 0.
#[derive(Debug, Clone)]
pub struct HttpClient {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
    pub max_retries: u32,
    pub backoff: Duration,
    agent: ureq::Agent,
}

fn http_agent(timeout: Duration) -> ureq::Agent {
    let config = ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build();
    ureq::Agent::new_with_config(config)
}

fn retryable(status: u16) -> bool {
    status == 429 || status >= 500
}

impl HttpClient {
    pub fn new(
        endpoint: impl Into<String>,
        api_key: Option<String>,
        model: impl Into<String>,
    ) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key,
            model: model.into(),
            max_retries: 3,
            backoff: Duration::from_millis(500),
            agent: http_agent(Duration::from_secs(60)),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.agent = http_agent(timeout);
        self
    }

    pub fn from_env() -> Result<Self, LlmError> {
        let endpoint = std::env::var(ENV_ENDPOINT)
            .map_err(|_| LlmError::Config(format!("{ENV_ENDPOINT} is not set")))?;
        let model = std::env::var(ENV_MODEL).unwrap_or_else(|_| "gpt-3.5-turbo".into());
        Ok(Self::new(endpoint, std::env::var(ENV_API_KEY).ok(), model))
    }

    /// POSTs `body` with retries on transport errors, 429 and 5xx.
    fn post_json(&self, body: &Value) -> Result<Value, LlmError> {
        let mut last = LlmError::Transport("no attempt made".into());
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                thread::sleep(self.backoff * attempt);
            }
            let mut req = self.agent.post(&self.endpoint);
            if let Some(key) = &self.api_key {
                req = req.header("Authorization", &format!("Bearer {key}"));
            }
            match req.send_json(body) {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    if resp.status().is_success() {
                        return resp
                            .body_mut()
                            .read_json::<Value>()
                            .map_err(|e| LlmError::Malformed(e.to_string()));
                    }
                    last = LlmError::HttpFailure(status);
                    if !retryable(status) {
                        return Err(last);
                    }
                }
                Err(e) => last = LlmError::Transport(e.to_string()),
            }
        }
        Err(last)
    }
}

impl LanguageModel for HttpClient {
    fn complete(&self, request: &GenerationRequest) -> Result<Generation, LlmError> {
        if request.prompt.trim().is_empty() {
            return Err(LlmError::EmptyPrompt);
        }
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": 0,
            "max_tokens": request.max_tokens,
        });
        let value = self.post_json(&body)?;
        let text = value["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| LlmError::Malformed("missing choices[0].message.content".into()))?;
        let text = stop_at_action(text);
        let usage = &value["usage"];
        Ok(Generation {
            input_tokens: usage["prompt_tokens"]
                .as_u64()
                .unwrap_or_else(|| approx_tokens(&request.prompt)),
            output_tokens: usage["completion_tokens"]
                .as_u64()
                .unwrap_or_else(|| approx_tokens(&text)),
            text,
        })
    }
}

/// Remote embedding plug-in for the relation ranker. Falls back to the
/// hashed n-gram embedder when a request fails.
#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
    dimension: usize,
    fallback: queryagent_core::HashedNgramEmbedder,
    agent: ureq::Agent,
}

impl HttpEmbedder {
    pub fn new(
        endpoint: impl Into<String>,
        api_key: Option<String>,
        model: impl Into<String>,
        dimension: usize,
    ) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key,
            model: model.into(),
            dimension,
            fallback: queryagent_core::HashedNgramEmbedder::new(dimension, 3),
            agent: http_agent(Duration::from_secs(30)),
        }
    }

    pub fn try_embed(&self, text: &str) -> Result<Vec<f64>, LlmError> {
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(json!({"model": self.model, "input": text}))
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(LlmError::HttpFailure(resp.status().as_u16()));
        }
        let value: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| LlmError::Malformed(e.to_string()))?;
        let v: Vec<f64> = value["data"][0]["embedding"]
            .as_array()
            .ok_or_else(|| LlmError::Malformed("missing data[0].embedding".into()))?
            .iter()
            .filter_map(Value::as_f64)
            .collect();
        if v.len() != self.dimension {
            return Err(LlmError::Malformed(format!(
                "embedding has {} dimensions, expected {}",
                v.len(),
                self.dimension
            )));
        }
        Ok(queryagent_core::ranker::normalize(v))
    }
}

impl queryagent_core::Embedder for HttpEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Vec<f64> {
        self.try_embed(text)
            .unwrap_or_else(|_| self.fallback.embed(text))
    }
}

/// `hashed` (default, offline) or `http` (endpoint from the environment).
pub fn embedder_by_name(
    name: &str,
) -> anyhow::Result<Box<dyn queryagent_core::Embedder + Send + Sync>> {
    match name {
        "hashed" => Ok(Box::new(queryagent_core::HashedNgramEmbedder::default())),
        "http" => {
            let endpoint = std::env::var("QUERYAGENT_EMBED_ENDPOINT")
                .map_err(|_| anyhow::anyhow!("QUERYAGENT_EMBED_ENDPOINT is not set"))?;
            let model = std::env::var("QUERYAGENT_EMBED_MODEL")
                .unwrap_or_else(|_| "text-embedding-ada-002".into());
            Ok(Box::new(HttpEmbedder::new(
                endpoint,
                std::env::var(ENV_API_KEY).ok(),
                model,
                1536,
            )))
        }
        other => anyhow::bail!("unknown embedder {other:?}; expected hashed or http"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn transcript(n: u32) -> Transcript {
        Transcript {
            entries: (1..=n)
                .map(|step| TranscriptEntry {
                    step,
                    text: format!("Thought {step}: t\nAction {step}: execute()"),
                })
                .collect(),
        }
    }

    fn req(step: u32) -> GenerationRequest {
        GenerationRequest {
            prompt: "a b c".into(),
            step,
            max_tokens: 64,
        }
    }

    #[test]
    fn scripted_sequence_then_exhaustion() {
        let c = ScriptedClient::new(transcript(7));
        for step in 1..=7 {
            let g = c.complete(&req(step)).unwrap();
            assert!(g.text.starts_with(&format!("Thought {step}:")));
            assert_eq!(g.input_tokens, 3);
        }
        assert_eq!(c.complete(&req(8)), Err(LlmError::TranscriptExhausted(8)));
    }

    #[test]
    fn scripted_step_mismatch_and_empty_prompt() {
        let c = ScriptedClient::new(transcript(2));
        assert_eq!(
            c.complete(&req(2)),
            Err(LlmError::StepMismatch {
                requested: 2,
                found: 1
            })
        );
        let empty = GenerationRequest {
            prompt: "  ".into(),
            ..req(1)
        };
        assert_eq!(c.complete(&empty), Err(LlmError::EmptyPrompt));
        assert_eq!(c.remaining(), 2);
    }

    #[test]
    fn cost_values() {
        assert_eq!(cost(0, 0), 0.0);
        assert!((cost(1000, 1000) - 0.0035).abs() < 1e-9);
        assert!((cost(2000, 500) - 0.004).abs() < 1e-9);
    }

    #[test]
    fn ledger_is_additive() {
        let g1 = Generation {
            text: String::new(),
            input_tokens: 120,
            output_tokens: 7,
        };
        let g2 = Generation {
            text: String::new(),
            input_tokens: 300,
            output_tokens: 11,
        };
        let mut whole = CostLedger::default();
        whole.record(&g1);
        whole.record(&g2);
        let mut a = CostLedger::default();
        a.record(&g1);
        let mut b = CostLedger::default();
        b.record(&g2);
        assert_eq!(whole, a + b);
        assert!((whole.cost() - (a.cost() + b.cost())).abs() < 1e-12);
    }

    #[test]
    fn stop_keeps_first_action_line() {
        let text = "Thought 1: x\nAction 1: get_relation(a)\nObservation 1: made up\nThought 2: y";
        assert_eq!(
            stop_at_action(text),
            "Thought 1: x\nAction 1: get_relation(a)"
        );
        assert_eq!(stop_at_action("just text\n"), "just text");
    }
}
