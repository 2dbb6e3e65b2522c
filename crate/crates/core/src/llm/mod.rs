//! Chat-completion backends, token estimates and cost accounting.

mod http;
mod scripted;

use std::fmt;
use std::ops::{Add, AddAssign};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::HttpTransport;
pub use scripted::{load_script, ScriptedTransport};

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("request timed out")]
    Timeout,
    #[error("http status {code}: {body}")]
    HttpStatus { code: u16, body: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("request needs ~{estimated} tokens but the context window is {limit}")]
    ContextOverflow { estimated: u64, limit: u64 },
    #[error("scripted backend has no responses left")]
    ScriptExhausted,
    #[error("environment variable {0} holding the API key is not set")]
    MissingApiKey(String),
    #[error("unknown backend kind '{0}'")]
    UnknownKind(String),
    #[error("invalid backend config: {0}")]
    InvalidConfig(String),
    #[error("transport error: {0}")]
    Transport(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Message { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Message { role: Role::User, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<Message>,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_output_tokens: Option<u32>,
}

impl ChatRequest {
    pub fn new(model: &str, messages: Vec<Message>) -> Self {
        ChatRequest { model: model.to_string(), messages, temperature: 0.0, max_output_tokens: None }
    }

    /// Sum of [`estimate_tokens`] over message contents.
    pub fn estimated_tokens(&self) -> u64 {
        self.messages.iter().map(|m| estimate_tokens(&m.content)).sum()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageTotals {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

impl UsageTotals {
    pub fn new(input_tokens: u64, output_tokens: u64) -> Self {
        UsageTotals { input_tokens, output_tokens }
    }

    pub fn total(&self) -> u64 {
        self.input_tokens + self.output_tokens
    }
}

impl Add for UsageTotals {
    type Output = UsageTotals;
    fn add(self, o: UsageTotals) -> UsageTotals {
        UsageTotals::new(self.input_tokens + o.input_tokens, self.output_tokens + o.output_tokens)
    }
}

impl AddAssign for UsageTotals {
    fn add_assign(&mut self, o: UsageTotals) {
        *self = *self + o;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub usage: UsageTotals,
    pub model: String,
    pub finish_reason: String,
}

/// Integer amount of micro-USD.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MicroUsd(pub u64);

impl MicroUsd {
    pub fn from_dollars(d: f64) -> Self {
        MicroUsd((d * 1e6).round() as u64)
    }

    pub fn as_dollars(self) -> f64 {
        self.0 as f64 / 1e6
    }
}

impl Add for MicroUsd {
    type Output = MicroUsd;
    fn add(self, o: MicroUsd) -> MicroUsd {
        MicroUsd(self.0 + o.0)
    }
}

/// `$0` for zero, otherwise dollars with all six decimals.
impl fmt::Display for MicroUsd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == 0 {
            return f.write_str("$0");
        }
        write!(f, "${}.{:06}", self.0 / 1_000_000, self.0 % 1_000_000)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pricing {
    pub model: String,
    #[serde(default)]
    pub aliases: Vec<String>,
    /// Price of one million input tokens.
    pub input_per_million: MicroUsd,
    pub output_per_million: MicroUsd,
    pub context_length: u64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub unpriced: bool,
}

impl Pricing {
    pub fn new(model: &str, input: u64, output: u64, context_length: u64) -> Self {
        Pricing {
            model: model.into(),
            aliases: Vec::new(),
            input_per_million: MicroUsd(input),
            output_per_million: MicroUsd(output),
            context_length,
            unpriced: false,
        }
    }

    fn with_alias(mut self, alias: &str) -> Self {
        self.aliases.push(alias.into());
        self
    }

    pub fn matches(&self, model: &str) -> bool {
        self.model.eq_ignore_ascii_case(model) || self.aliases.iter().any(|a| a.eq_ignore_ascii_case(model))
    }

    /// Zero-price row for models missing from the table.
    pub fn unpriced(model: &str) -> Self {
        Pricing { unpriced: true, ..Pricing::new(model, 0, 0, 131_072) }
    }
}

/// GPT-4o, o1, DeepSeek-V3 and Qwen 2.5-Max list prices (2025 Q1).
pub fn default_pricing_table() -> Vec<Pricing> {
    vec![
        Pricing::new("gpt-4o", 2_500_000, 10_000_000, 131_072),
        Pricing::new("o1", 15_000_000, 60_000_000, 204_800),
        Pricing::new("deepseek-v3", 35_000, 550_000, 65_536).with_alias("deepseek-chat"),
        Pricing::new("qwen-max", 800_000, 1_200_000, 32_768).with_alias("qwen2.5-max"),
    ]
}

pub fn find_pricing(table: &[Pricing], model: &str) -> Pricing {
    table.iter().find(|p| p.matches(model)).cloned().unwrap_or_else(|| Pricing::unpriced(model))
}

/// `ceil(bytes / 4)`.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.len() as u64).div_ceil(4)
}

fn term(tokens: u64, per_million: MicroUsd) -> u64 {
    ((tokens as u128 * per_million.0 as u128 + 500_000) / 1_000_000) as u64
}

/// Cost of `usage`, each term rounded half-up to the micro-USD.
pub fn compute_cost(usage: &UsageTotals, pricing: &Pricing) -> MicroUsd {
    MicroUsd(term(usage.input_tokens, pricing.input_per_million) + term(usage.output_tokens, pricing.output_per_million))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    /// `http` or `scripted`.
    pub kind: String,
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_seconds: u64,
    /// A JSON array of responses, or a directory of `<task id>.json` scripts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script_path: Option<PathBuf>,
    #[serde(default)]
    pub temperature: f64,
}

fn default_timeout() -> u64 {
    300
}

impl BackendConfig {
    pub fn scripted(model: &str, script_path: impl Into<PathBuf>) -> Self {
        BackendConfig {
            kind: "scripted".into(),
            model: model.into(),
            base_url: None,
            api_key_env: None,
            timeout_seconds: default_timeout(),
            script_path: Some(script_path.into()),
            temperature: 0.0,
        }
    }

    pub fn http(model: &str, base_url: &str, api_key_env: Option<&str>) -> Self {
        BackendConfig {
            kind: "http".into(),
            model: model.into(),
            base_url: Some(base_url.into()),
            api_key_env: api_key_env.map(str::to_string),
            timeout_seconds: default_timeout(),
            script_path: None,
            temperature: 0.0,
        }
    }

    /// The config for one task: a script directory resolves to the task's file.
    pub fn for_task(&self, task_id: &str) -> BackendConfig {
        let mut cfg = self.clone();
        if let Some(p) = &self.script_path {
            if p.is_dir() {
                cfg.script_path = Some(p.join(format!("{task_id}.json")));
            }
        }
        cfg
    }
}

pub trait ChatTransport: Send + Sync {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, LlmError>;
}

/// A transport bound to its pricing row.
pub struct Backend {
    pub name: String,
    pub pricing: Pricing,
    pub temperature: f64,
    transport: Box<dyn ChatTransport>,
}

impl fmt::Debug for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Backend").field("name", &self.name).field("pricing", &self.pricing).finish()
    }
}

impl Backend {
    pub fn new(name: &str, pricing: Pricing, transport: Box<dyn ChatTransport>) -> Self {
        Backend { name: name.into(), pricing, temperature: 0.0, transport }
    }

    pub fn model(&self) -> &str {
        &self.name
    }

    pub fn request(&self, messages: Vec<Message>) -> ChatRequest {
        ChatRequest { temperature: self.temperature, ..ChatRequest::new(&self.name, messages) }
    }
}

pub fn make_backend(cfg: &BackendConfig, pricing_table: &[Pricing]) -> Result<Backend, LlmError> {
    let pricing = find_pricing(pricing_table, &cfg.model);
    let transport: Box<dyn ChatTransport> = match cfg.kind.as_str() {
        "http" => {
            let base = cfg
                .base_url
                .as_deref()
                .ok_or_else(|| LlmError::InvalidConfig("http backend needs base_url".into()))?;
            let key = match &cfg.api_key_env {
                Some(var) => Some(std::env::var(var).map_err(|_| LlmError::MissingApiKey(var.clone()))?),
                None => None,
            };
            Box::new(HttpTransport::new(base, key, Duration::from_secs(cfg.timeout_seconds))?)
        }
        "scripted" => {
            let path = cfg
                .script_path
                .as_deref()
                .ok_or_else(|| LlmError::InvalidConfig("scripted backend needs script_path".into()))?;
            Box::new(ScriptedTransport::new(load_script(path)?))
        }
        other => return Err(LlmError::UnknownKind(other.into())),
    };
    let mut backend = Backend::new(&cfg.model, pricing, transport);
    backend.temperature = cfg.temperature;
    Ok(backend)
}

/// Sends `req`, refusing requests that cannot fit the model's window.
pub fn send_chat(backend: &Backend, req: &ChatRequest) -> Result<ChatResponse, LlmError> {
    let estimated = req.estimated_tokens();
    if estimated > backend.pricing.context_length {
        return Err(LlmError::ContextOverflow { estimated, limit: backend.pricing.context_length });
    }
    backend.transport.complete(req)
}

pub(crate) fn read_json_file(path: &Path) -> Result<serde_json::Value, LlmError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| LlmError::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| LlmError::InvalidConfig(format!("{}: {e}", path.display())))
}
