//! LLM access: an HTTP chat-completions client with retries, deterministic
//! local mocks, bounded-concurrency batching, and transcript capture that
//! doubles as a replay cache.

use crate::dataset::Catalog;
use crate::error::{Error, Result};
use crate::ids::{ItemId, UserId};
use crate::prompt::{PromptInstance, PromptKind};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationParams {
    pub temperature: f64,
    pub top_k: u32,
    pub top_p: f64,
    pub max_tokens: u32,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            temperature: 0.1,
            top_k: 40,
            top_p: 0.1,
            max_tokens: 256,
        }
    }
}

impl GenerationParams {
    pub fn validate(&self) -> Result<()> {
        if self.temperature < 0.0 {
            return Err(Error::Config("temperature must be >= 0".into()));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(Error::Config("top_p must be in (0, 1]".into()));
        }
        if self.top_k < 1 {
            return Err(Error::Config("top_k must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    HttpChat,
    MockEchoHint,
    MockOracle,
    MockScripted,
}

impl std::str::FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "http-chat" => Ok(BackendKind::HttpChat),
            "mock-echo-hint" => Ok(BackendKind::MockEchoHint),
            "mock-oracle" => Ok(BackendKind::MockOracle),
            "mock-scripted" => Ok(BackendKind::MockScripted),
            other => Err(Error::Config(format!("unknown backend kind `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    /// Environment variable holding the bearer token.
    pub auth_env: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub concurrency: usize,
    /// Initial retry backoff; doubles per attempt.
    pub backoff_ms: u64,
    /// Whether the server accepts a top_k field.
    pub send_top_k: bool,
    /// JSON file of prompt-hash -> response for the scripted mock.
    #[serde(default)]
    pub script_path: Option<String>,
    /// Transcript log to replay instead of contacting any backend.
    #[serde(default)]
    pub replay: Option<String>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::MockEchoHint,
            endpoint: None,
            model: None,
            auth_env: "RECRANK_API_TOKEN".into(),
            timeout_secs: 60,
            max_retries: 3,
            concurrency: 8,
            backoff_ms: 250,
            send_top_k: true,
            script_path: None,
            replay: None,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kind == BackendKind::HttpChat && (self.endpoint.is_none() || self.model.is_none())
        {
            return Err(Error::Config(
                "http-chat backend requires endpoint and model".into(),
            ));
        }
        if self.concurrency == 0 {
            return Err(Error::Config("concurrency must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct Transcript {
    pub prompt_hash: String,
    pub request: String,
    pub response: String,
    pub latency_ms: u64,
    pub attempts: u32,
    pub backend_id: String,
}

pub fn prompt_hash(text: &str) -> String {
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    hex::encode(h.finalize())
}

pub struct BackendResponse {
    pub text: String,
    pub attempts: u32,
}

pub trait Backend: Sync {
    fn complete_raw(&self, prompt: &PromptInstance, params: &GenerationParams)
        -> Result<BackendResponse>;
    fn id(&self) -> String;
}

// --- mocks -------------------------------------------------------------

/// Repeats the initial model's opinion: the hint order as a numbered list,
/// the hint score, or "Yes." when the hint winner is the first of the pair.
pub struct EchoHintBackend;

fn pair_first_title(text: &str) -> Option<&str> {
    let q = text.split("Question: Would the user prefer ").nth(1)?;
    q.split(" over ").next()
}

impl Backend for EchoHintBackend {
    fn complete_raw(
        &self,
        prompt: &PromptInstance,
        _params: &GenerationParams,
    ) -> Result<BackendResponse> {
        let hint = prompt
            .hint
            .as_deref()
            .ok_or_else(|| Error::BackendFailed {
                attempts: 1,
                message: "echo-hint mock needs a hint".into(),
            })?;
        let text = match prompt.kind {
            PromptKind::Listwise => hint
                .split(", ")
                .enumerate()
                .map(|(i, t)| format!("{}. {t}", i + 1))
                .collect::<Vec<_>>()
                .join("\n"),
            PromptKind::Pointwise | PromptKind::PointwiseFix => hint.to_string(),
            PromptKind::Pairwise => {
                let first = pair_first_title(&prompt.text).unwrap_or_default();
                if first == hint {
                    "Yes.".to_string()
                } else {
                    "No.".to_string()
                }
            }
        };
        Ok(BackendResponse { text, attempts: 1 })
    }

    fn id(&self) -> String {
        "mock-echo-hint".into()
    }
}

/// Ground truth available to the oracle mock.
#[derive(Clone, Debug, Default)]
pub struct OracleFixture {
    pub test_item: BTreeMap<UserId, ItemId>,
    pub ratings: BTreeMap<(UserId, ItemId), f64>,
    pub catalog: Catalog,
}

impl OracleFixture {
    fn score(&self, user: &UserId, item: &ItemId) -> f64 {
        if self.test_item.get(user) == Some(item) {
            return 6.0;
        }
        self.ratings
            .get(&(user.clone(), item.clone()))
            .copied()
            .unwrap_or(0.0)
    }
}

/// Answers from ground truth: the held-out item first on listwise lists,
/// true ratings on pointwise, and true preference on pairwise.
pub struct OracleBackend {
    pub fixture: OracleFixture,
}

impl Backend for OracleBackend {
    fn complete_raw(
        &self,
        prompt: &PromptInstance,
        _params: &GenerationParams,
    ) -> Result<BackendResponse> {
        let user = &prompt.user_id;
        let text = match prompt.kind {
            PromptKind::Listwise => {
                let mut order: Vec<&ItemId> = prompt.payload.iter().collect();
                order.sort_by(|a, b| {
                    self.fixture
                        .score(user, b)
                        .partial_cmp(&self.fixture.score(user, a))
                        .expect("finite scores")
                        .then(a.cmp(b))
                });
                order
                    .iter()
                    .enumerate()
                    .map(|(i, item)| {
                        Ok(format!("{}. {}", i + 1, self.fixture.catalog.title(item)?))
                    })
                    .collect::<Result<Vec<_>>>()?
                    .join("\n")
            }
            PromptKind::Pointwise | PromptKind::PointwiseFix => {
                let item = prompt.payload.first().ok_or_else(|| Error::BackendFailed {
                    attempts: 1,
                    message: "pointwise prompt without target".into(),
                })?;
                let r = self
                    .fixture
                    .ratings
                    .get(&(user.clone(), item.clone()))
                    .copied()
                    .unwrap_or(3.0);
                format!("{r:.1}")
            }
            PromptKind::Pairwise => {
                let [a, b] = &prompt.payload[..] else {
                    return Err(Error::BackendFailed {
                        attempts: 1,
                        message: "pairwise prompt needs exactly two payload items".into(),
                    });
                };
                if self.fixture.score(user, a) >= self.fixture.score(user, b) {
                    "Yes.".to_string()
                } else {
                    "No.".to_string()
                }
            }
        };
        Ok(BackendResponse { text, attempts: 1 })
    }

    fn id(&self) -> String {
        "mock-oracle".into()
    }
}

/// Fixed responses keyed by prompt hash, with an optional default.
pub struct ScriptedBackend {
    pub responses: BTreeMap<String, String>,
    pub default: Option<String>,
}

impl Backend for ScriptedBackend {
    fn complete_raw(
        &self,
        prompt: &PromptInstance,
        _params: &GenerationParams,
    ) -> Result<BackendResponse> {
        let key = prompt_hash(&prompt.text);
        match self.responses.get(&key).or(self.default.as_ref()) {
            Some(r) => Ok(BackendResponse {
                text: r.clone(),
                attempts: 1,
            }),
            None => Err(Error::BackendFailed {
                attempts: 1,
                message: format!("no scripted response for prompt {key}"),
            }),
        }
    }

    fn id(&self) -> String {
        "mock-scripted".into()
    }
}

/// Serves responses from a previously captured transcript log.
pub struct ReplayBackend {
    pub responses: BTreeMap<String, String>,
    pub source_backend_id: String,
}

impl ReplayBackend {
    pub fn from_log(path: &Path) -> Result<Self> {
        let records = read_transcripts(path)?;
        let source_backend_id = records
            .first()
            .map(|t| t.backend_id.clone())
            .unwrap_or_else(|| "unknown".into());
        Ok(Self {
            responses: records
                .into_iter()
                .map(|t| (t.prompt_hash, t.response))
                .collect(),
            source_backend_id,
        })
    }
}

impl Backend for ReplayBackend {
    fn complete_raw(
        &self,
        prompt: &PromptInstance,
        _params: &GenerationParams,
    ) -> Result<BackendResponse> {
        let key = prompt_hash(&prompt.text);
        match self.responses.get(&key) {
            Some(r) => Ok(BackendResponse {
                text: r.clone(),
                attempts: 1,
            }),
            None => Err(Error::BackendFailed {
                attempts: 1,
                message: format!("prompt {key} absent from replay transcript"),
            }),
        }
    }

    fn id(&self) -> String {
        format!("replay:{}", self.source_backend_id)
    }
}

// --- HTTP chat-completions client ---------------------------------------

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
    top_p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    top_k: Option<u32>,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatChoiceMessage {
    content: String,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

pub struct HttpChatBackend {
    pub config: BackendConfig,
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    token: Option<String>,
    top_k_drop_logged: std::sync::atomic::AtomicBool,
}

impl HttpChatBackend {
    pub fn new(config: BackendConfig) -> Result<Self> {
        config.validate()?;
        let endpoint = config.endpoint.clone().ok_or_else(|| {
            Error::Config("http-chat backend requires an endpoint".into())
        })?;
        let model = config
            .model
            .clone()
            .ok_or_else(|| Error::Config("http-chat backend requires a model name".into()))?;
        let token = std::env::var(&config.auth_env).ok();
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        Ok(Self {
            config,
            client,
            endpoint,
            model,
            token,
            top_k_drop_logged: std::sync::atomic::AtomicBool::new(false),
        })
    }

    fn request_body(&self, prompt: &PromptInstance, params: &GenerationParams) -> String {
        let top_k = if self.config.send_top_k {
            Some(params.top_k)
        } else {
            if !self.top_k_drop_logged.swap(true, Ordering::Relaxed) {
                log::info!("backend {} does not accept top_k; dropping it", self.id());
            }
            None
        };
        let req = ChatRequest {
            model: &self.model,
            messages: vec![ChatMessage {
                role: "user",
                content: &prompt.text,
            }],
            temperature: params.temperature,
            top_p: params.top_p,
            top_k,
            max_tokens: params.max_tokens,
        };
        serde_json::to_string(&req).expect("request serialize")
    }
}

impl Backend for HttpChatBackend {
    fn complete_raw(
        &self,
        prompt: &PromptInstance,
        params: &GenerationParams,
    ) -> Result<BackendResponse> {
        let body = self.request_body(prompt, params);
        let max_attempts = self.config.max_retries + 1;
        let mut last_err = String::new();
        for attempt in 1..=max_attempts {
            if attempt > 1 {
                let backoff = self.config.backoff_ms << (attempt - 2).min(16);
                std::thread::sleep(Duration::from_millis(backoff));
            }
            let mut req = self
                .client
                .post(&self.endpoint)
                .header("content-type", "application/json")
                .body(body.clone());
            if let Some(token) = &self.token {
                req = req.bearer_auth(token);
            }
            match req.send() {
                Err(e) => last_err = format!("transport: {e}"),
                Ok(resp) => {
                    let status = resp.status();
                    let text = resp.text().unwrap_or_default();
                    if status.is_success() {
                        let parsed: ChatResponse = serde_json::from_str(&text).map_err(|e| {
                            Error::BackendFailed {
                                attempts: attempt,
                                message: format!("malformed completion body: {e}"),
                            }
                        })?;
                        let content = parsed
                            .choices
                            .into_iter()
                            .next()
                            .map(|c| c.message.content)
                            .ok_or_else(|| Error::BackendFailed {
                                attempts: attempt,
                                message: "completion with no choices".into(),
                            })?;
                        return Ok(BackendResponse {
                            text: content,
                            attempts: attempt,
                        });
                    }
                    if status.is_client_error() {
                        // non-transient; do not retry
                        return Err(Error::BackendFailed {
                            attempts: attempt,
                            message: format!("status {status}: {text}"),
                        });
                    }
                    last_err = format!("status {status}");
                }
            }
        }
        Err(Error::BackendFailed {
            attempts: max_attempts,
            message: last_err,
        })
    }

    fn id(&self) -> String {
        format!("http-chat:{}@{}", self.model, self.endpoint)
    }
}

// --- completion entry points --------------------------------------------

pub fn complete(
    prompt: &PromptInstance,
    params: &GenerationParams,
    backend: &dyn Backend,
) -> Result<(String, Transcript)> {
    params.validate()?;
    let start = Instant::now();
    let resp = backend.complete_raw(prompt, params)?;
    let transcript = Transcript {
        prompt_hash: prompt_hash(&prompt.text),
        request: prompt.text.clone(),
        response: resp.text.clone(),
        latency_ms: start.elapsed().as_millis() as u64,
        attempts: resp.attempts,
        backend_id: backend.id(),
    };
    Ok((resp.text, transcript))
}

/// Completes a batch with at most `concurrency` requests in flight.
/// Output order matches input order; per-prompt failures are isolated.
pub fn batch_complete(
    prompts: &[PromptInstance],
    params: &GenerationParams,
    backend: &dyn Backend,
    concurrency: usize,
) -> Result<(Vec<Result<String>>, Vec<Transcript>)> {
    params.validate()?;
    if concurrency == 0 {
        return Err(Error::Config("concurrency must be >= 1".into()));
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<(Result<String>, Option<Transcript>)>>> =
        Mutex::new((0..prompts.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..concurrency.min(prompts.len().max(1)) {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::SeqCst);
                if idx >= prompts.len() {
                    break;
                }
                let outcome = match complete(&prompts[idx], params, backend) {
                    Ok((text, t)) => (Ok(text), Some(t)),
                    Err(e) => (Err(e), None),
                };
                results.lock().expect("poisoned")[idx] = Some(outcome);
            });
        }
    });
    let mut texts = Vec::with_capacity(prompts.len());
    let mut transcripts = Vec::new();
    for slot in results.into_inner().expect("poisoned") {
        let (res, t) = slot.expect("all indices processed");
        texts.push(res);
        if let Some(t) = t {
            transcripts.push(t);
        }
    }
    Ok((texts, transcripts))
}

// --- transcript log -------------------------------------------------------

pub fn append_transcripts(path: &Path, records: &[Transcript]) -> Result<()> {
    let mut out = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    for t in records {
        let line = serde_json::to_string(t)
            .map_err(|e| Error::InvalidInput(format!("transcript serialize: {e}")))?;
        writeln!(out, "{line}").map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok(())
}

pub fn read_transcripts(path: &Path) -> Result<Vec<Transcript>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut out = Vec::new();
    for (idx, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.is_empty() {
            continue;
        }
        let t: Transcript = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            path: path.display().to_string(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push(t);
    }
    Ok(out)
}
