use std::io::Write;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{serialize, SimError, SimulatorVariant, FIELD_SEPARATOR};
use crate::corpus::{DatabaseSchema, FeedbackExample};

pub trait GenerationClient: Send + Sync {
    fn generate(&self, id: &str, prompt: &str, params: &Value) -> Result<String, SimError>;
}

/// The value of the prompt's `template:` field, or the whole prompt when it
/// has none.
pub fn echo_text(prompt: &str) -> String {
    prompt
        .split(FIELD_SEPARATOR)
        .find_map(|seg| seg.strip_prefix("template: "))
        .unwrap_or(prompt)
        .to_string()
}

/// Offline stand-in for a generation service; see [`echo_text`].
#[derive(Debug, Clone, Copy, Default)]
pub struct EchoGenerator;

impl GenerationClient for EchoGenerator {
    fn generate(&self, _id: &str, prompt: &str, _params: &Value) -> Result<String, SimError> {
        Ok(echo_text(prompt))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    /// Base URL of the service, or `echo` for [`EchoGenerator`].
    pub endpoint: String,
    pub timeout_ms: u64,
    pub retries: u32,
    /// Passed through to the service untouched.
    pub params: Value,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            endpoint: "echo".into(),
            timeout_ms: 30_000,
            retries: 2,
            params: Value::Object(Default::default()),
        }
    }
}

impl GenerationConfig {
    pub fn client(&self) -> Box<dyn GenerationClient> {
        if self.endpoint == "echo" {
            Box::new(EchoGenerator)
        } else {
            Box::new(HttpGenerator::new(&self.endpoint, self.timeout_ms, self.retries))
        }
    }
}

pub struct HttpGenerator {
    endpoint: String,
    retries: u32,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    id: &'a str,
    prompt: &'a str,
    params: &'a Value,
}

#[derive(Deserialize)]
struct GenerateResponse {
    id: String,
    text: String,
}

impl HttpGenerator {
    pub fn new(endpoint: &str, timeout_ms: u64, retries: u32) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(timeout_ms)))
            .build()
            .into();
        HttpGenerator {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            retries,
            agent,
        }
    }
}

impl GenerationClient for HttpGenerator {
    fn generate(&self, id: &str, prompt: &str, params: &Value) -> Result<String, SimError> {
        let url = format!("{}/generate", self.endpoint);
        let body = GenerateRequest { id, prompt, params };
        let attempts = self.retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            let result = self
                .agent
                .post(&url)
                .send_json(&body)
                .and_then(|mut r| r.body_mut().read_json::<GenerateResponse>());
            match result {
                Ok(r) if r.id == id => return Ok(r.text),
                Ok(r) => return Err(SimError::Protocol(format!("response id {} does not match request {id}", r.id))),
                Err(e) => last = e.to_string(),
            }
            if attempt + 1 < attempts {
                std::thread::sleep(Duration::from_millis(50 << attempt.min(4)));
            }
        }
        Err(SimError::Transport { attempts, message: last })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub id: String,
    pub variant: SimulatorVariant,
    pub prompt: String,
    pub text: String,
}

/// Serialized JSONL writer for (prompt, generation) pairs.
pub struct AuditLog {
    out: Mutex<Box<dyn Write + Send>>,
}

impl AuditLog {
    pub fn new(out: impl Write + Send + 'static) -> Self {
        AuditLog {
            out: Mutex::new(Box::new(out)),
        }
    }

    pub fn append(&self, rec: &AuditRecord) -> std::io::Result<()> {
        let line = serde_json::to_string(rec).expect("audit record serializes");
        let mut out = self.out.lock().expect("audit lock");
        writeln!(out, "{line}")?;
        out.flush()
    }
}

pub struct Simulator {
    pub client: Box<dyn GenerationClient>,
    pub params: Value,
    pub audit: Option<AuditLog>,
    next: AtomicU64,
}

impl Simulator {
    pub fn new(client: Box<dyn GenerationClient>, params: Value) -> Self {
        Simulator {
            client,
            params,
            audit: None,
            next: AtomicU64::new(0),
        }
    }

    pub fn from_config(config: &GenerationConfig) -> Self {
        Simulator::new(config.client(), config.params.clone())
    }

    pub fn with_audit(mut self, audit: AuditLog) -> Self {
        self.audit = Some(audit);
        self
    }

    /// Generate simulated feedback for one example.
    pub fn simulate(&self, example: &FeedbackExample, variant: SimulatorVariant, schema: &DatabaseSchema) -> Result<String, SimError> {
        let prompt = serialize(example, variant, schema)?;
        let request_id = format!("{}-{}", example.id, self.next.fetch_add(1, Ordering::Relaxed));
        let raw = self.client.generate(&request_id, &prompt, &self.params)?;
        let text = raw.trim().to_string();
        if let Some(audit) = &self.audit {
            audit.append(&AuditRecord {
                id: example.id.clone(),
                variant,
                prompt,
                text: text.clone(),
            })?;
        }
        if text.is_empty() {
            return Err(SimError::EmptyGeneration { id: example.id.clone() });
        }
        Ok(text)
    }
}
