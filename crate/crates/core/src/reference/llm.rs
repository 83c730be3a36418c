use std::collections::HashMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::prompt::{build_prompt, extract_bracketed, Extraction, Language};
use super::LlmError;
use crate::io::{Transcript, TranscriptSource};

pub const ENV_ENDPOINT: &str = "LLM_ENDPOINT_URL";
pub const ENV_API_KEY: &str = "LLM_API_KEY";
pub const ENV_MODEL: &str = "LLM_MODEL_NAME";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionRequest {
    pub language: Language,
    /// Raw greedy transcription text.
    pub sentence: String,
    pub model_name: String,
    pub temperature: f64,
    pub run_index: usize,
}

impl CorrectionRequest {
    pub fn prompt(&self) -> String {
        build_prompt(&self.language, &self.sentence)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionResult {
    pub corrected: Transcript,
    pub raw_reply: String,
    pub run_index: usize,
    pub extraction: Extraction,
    /// Failed attempts before the reply was obtained.
    pub retries: usize,
}

/// Anything that turns a correction request into a raw model reply.
pub trait Corrector: Send + Sync {
    fn complete(&self, request: &CorrectionRequest) -> Result<String, LlmError>;
}

impl<T: Corrector + ?Sized> Corrector for &T {
    fn complete(&self, request: &CorrectionRequest) -> Result<String, LlmError> {
        (**self).complete(request)
    }
}

impl<T: Corrector + ?Sized> Corrector for Box<T> {
    fn complete(&self, request: &CorrectionRequest) -> Result<String, LlmError> {
        (**self).complete(request)
    }
}

/// Offline stand-in for a chat model: looks replies up by sentence, else echoes.
#[derive(Debug, Clone, Default)]
pub struct MockCorrector {
    replies: HashMap<String, String>,
    per_run: HashMap<(String, usize), String>,
}

impl MockCorrector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_replies(replies: HashMap<String, String>) -> Self {
        Self {
            replies,
            per_run: HashMap::new(),
        }
    }

    pub fn insert(&mut self, sentence: impl Into<String>, reply: impl Into<String>) {
        self.replies.insert(sentence.into(), reply.into());
    }

    pub fn insert_for_run(&mut self, sentence: impl Into<String>, run_index: usize, reply: impl Into<String>) {
        self.per_run.insert((sentence.into(), run_index), reply.into());
    }

    /// Reads a JSON object mapping input sentences to replies.
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, LlmError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
        let replies: HashMap<String, String> =
            serde_json::from_str(&text).map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
        Ok(Self::with_replies(replies))
    }
}

impl Corrector for MockCorrector {
    fn complete(&self, request: &CorrectionRequest) -> Result<String, LlmError> {
        if let Some(reply) = self.per_run.get(&(request.sentence.clone(), request.run_index)) {
            return Ok(reply.clone());
        }
        Ok(self
            .replies
            .get(&request.sentence)
            .cloned()
            .unwrap_or_else(|| format!("[{}]", request.sentence)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: usize,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn immediate(max_retries: usize) -> Self {
        Self {
            max_retries,
            base_delay: Duration::ZERO,
        }
    }

    /// Calls `f` until it succeeds, a non-retryable error occurs, or retries run out.
    /// Returns the value and the number of failed attempts.
    pub fn run<T>(&self, mut f: impl FnMut() -> Result<T, LlmError>) -> Result<(T, usize), LlmError> {
        let mut failures = 0;
        loop {
            match f() {
                Ok(v) => return Ok((v, failures)),
                Err(e) if e.is_retryable() && failures < self.max_retries => {
                    let delay = self.base_delay.saturating_mul(1u32 << failures.min(16));
                    tracing::warn!(attempt = failures + 1, error = %e, "retrying LLM request");
                    if !delay.is_zero() {
                        std::thread::sleep(delay);
                    }
                    failures += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

/// Sends each run as an independent request and parses the bracketed correction.
pub fn correct_with_llm<C: Corrector + ?Sized>(
    client: &C,
    w_greedy: &Transcript,
    language: &Language,
    model_name: &str,
    runs: usize,
    temperature: f64,
    retry: &RetryPolicy,
) -> Result<Vec<CorrectionResult>, LlmError> {
    if runs == 0 {
        return Err(LlmError::Config("runs must be at least 1".into()));
    }
    (0..runs)
        .map(|run_index| {
            let request = CorrectionRequest {
                language: language.clone(),
                sentence: w_greedy.raw_text().to_string(),
                model_name: model_name.to_string(),
                temperature,
                run_index,
            };
            correct_once(client, &request, retry)
        })
        .collect()
}

pub fn correct_once<C: Corrector + ?Sized>(
    client: &C,
    request: &CorrectionRequest,
    retry: &RetryPolicy,
) -> Result<CorrectionResult, LlmError> {
    if request.sentence.trim().is_empty() {
        return Err(LlmError::EmptySentence);
    }
    if request.temperature.is_nan() || request.temperature < 0.0 {
        return Err(LlmError::Config(format!(
            "temperature must be non-negative, got {}",
            request.temperature
        )));
    }
    let (raw_reply, retries) = retry.run(|| client.complete(request))?;
    let (text, extraction) = extract_bracketed(&raw_reply)?;
    Ok(CorrectionResult {
        corrected: Transcript::new(text, TranscriptSource::LlmReference),
        raw_reply,
        run_index: request.run_index,
        extraction,
        retries,
    })
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    temperature: f64,
    messages: Vec<ChatMessage<'a>>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatReply,
}

#[derive(Deserialize)]
struct ChatReply {
    #[serde(default)]
    content: Option<String>,
}

/// Chat-completion client for any OpenAI-compatible endpoint.
#[derive(Debug, Clone)]
pub struct HttpCorrector {
    endpoint: String,
    api_key: String,
    http: reqwest::blocking::Client,
}

impl HttpCorrector {
    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>) -> Result<Self, LlmError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.into(),
            api_key: api_key.into(),
            http,
        })
    }

    /// Reads `LLM_ENDPOINT_URL` and `LLM_API_KEY`.
    pub fn from_env() -> Result<Self, LlmError> {
        let endpoint =
            std::env::var(ENV_ENDPOINT).map_err(|_| LlmError::Config(format!("{ENV_ENDPOINT} is not set")))?;
        let key = std::env::var(ENV_API_KEY).map_err(|_| LlmError::Config(format!("{ENV_API_KEY} is not set")))?;
        Self::new(endpoint, key)
    }

    pub fn request_body(request: &CorrectionRequest) -> serde_json::Value {
        let prompt = request.prompt();
        serde_json::to_value(ChatRequest {
            model: &request.model_name,
            temperature: request.temperature,
            messages: vec![ChatMessage {
                role: "user",
                content: &prompt,
            }],
        })
        .expect("request serializes")
    }
}

impl Corrector for HttpCorrector {
    fn complete(&self, request: &CorrectionRequest) -> Result<String, LlmError> {
        let response = self
            .http
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&Self::request_body(request))
            .send()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = response.status();
        let body = response.text().map_err(|e| LlmError::Transport(e.to_string()))?;
        match status.as_u16() {
            200..=299 => {}
            401 | 403 => return Err(LlmError::Auth(body)),
            429 => return Err(LlmError::RateLimited),
            500..=599 => return Err(LlmError::Transport(format!("HTTP {status}: {body}"))),
            code => return Err(LlmError::Http { status: code, body }),
        }
        let parsed: ChatResponse = serde_json::from_str(&body).map_err(|e| LlmError::BadResponse(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or(LlmError::EmptyReply)
    }
}
