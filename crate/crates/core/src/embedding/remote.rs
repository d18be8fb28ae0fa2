//! Client for an embedding service speaking the `/embed` + `/health` protocol.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Duration;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{EmbeddingError, EmbeddingMatrix, EmbeddingProvider, HealthStatus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub timeout_ms: u64,
    /// Extra attempts after the first failure.
    pub retries: u32,
    /// Optional JSONL file the cache is loaded from and appended to.
    pub cache_file: Option<PathBuf>,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            endpoint: "http://127.0.0.1:8765".into(),
            timeout_ms: 10_000,
            retries: 2,
            cache_file: None,
        }
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    id: String,
    sentences: &'a [Vec<String>],
}

#[derive(Deserialize)]
struct EmbedResponse {
    id: String,
    dim: usize,
    vectors: Vec<Vec<Vec<f64>>>,
}

#[derive(Deserialize)]
struct HealthResponse {
    status: String,
    dim: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct SpillRecord {
    provider: String,
    sentence: Vec<String>,
    vectors: Vec<Vec<f64>>,
}

type CacheKey = (String, Vec<String>);

pub struct RemoteProvider {
    config: RemoteConfig,
    agent: ureq::Agent,
    dim: OnceLock<usize>,
    next_id: AtomicU64,
    cache: Mutex<HashMap<CacheKey, Arc<Array2<f64>>>>,
    spill: Option<Mutex<File>>,
}

impl RemoteProvider {
    pub fn new(config: RemoteConfig) -> Result<Self, EmbeddingError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .build()
            .into();
        let mut provider = RemoteProvider {
            agent,
            dim: OnceLock::new(),
            next_id: AtomicU64::new(0),
            cache: Mutex::new(HashMap::new()),
            spill: None,
            config,
        };
        if let Some(path) = provider.config.cache_file.clone() {
            provider.load_spill(&path)?;
            let file = OpenOptions::new().create(true).append(true).open(&path)?;
            provider.spill = Some(Mutex::new(file));
        }
        Ok(provider)
    }

    fn load_spill(&mut self, path: &PathBuf) -> Result<(), EmbeddingError> {
        if !path.exists() {
            return Ok(());
        }
        let id = self.id();
        let cache = self.cache.get_mut().expect("cache lock");
        for line in BufReader::new(File::open(path)?).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: SpillRecord =
                serde_json::from_str(&line).map_err(|e| EmbeddingError::Protocol(format!("cache file: {e}")))?;
            if rec.provider != id {
                continue;
            }
            let m = to_matrix(&rec.vectors, None)?;
            if let Some(&d) = self.dim.get() {
                if d != m.ncols() {
                    return Err(EmbeddingError::DimensionMismatch { expected: d, got: m.ncols() });
                }
            }
            let _ = self.dim.set(m.ncols());
            cache.insert((rec.provider, rec.sentence), Arc::new(m));
        }
        Ok(())
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.config.endpoint.trim_end_matches('/'), path)
    }

    fn with_retries<T>(&self, mut f: impl FnMut() -> Result<T, ureq::Error>) -> Result<T, EmbeddingError> {
        let attempts = self.config.retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            match f() {
                Ok(v) => return Ok(v),
                Err(e) => last = e.to_string(),
            }
            if attempt + 1 < attempts {
                std::thread::sleep(Duration::from_millis(50 << attempt.min(4)));
            }
        }
        Err(EmbeddingError::Transport { attempts, message: last })
    }

    fn request(&self, sentences: &[Vec<String>]) -> Result<Vec<Array2<f64>>, EmbeddingError> {
        let id = format!("req-{}", self.next_id.fetch_add(1, Ordering::Relaxed));
        let body = EmbedRequest { id: id.clone(), sentences };
        let resp: EmbedResponse = self.with_retries(|| {
            self.agent
                .post(&self.url("/embed"))
                .send_json(&body)?
                .body_mut()
                .with_config()
                .limit(1 << 28)
                .read_json()
        })?;
        if resp.id != id {
            return Err(EmbeddingError::Protocol(format!("response id {} does not match request {id}", resp.id)));
        }
        if resp.vectors.len() != sentences.len() {
            return Err(EmbeddingError::Protocol(format!(
                "{} sentences sent, {} returned",
                sentences.len(),
                resp.vectors.len()
            )));
        }
        let expected = *self.dim.get_or_init(|| resp.dim);
        if resp.dim != expected {
            return Err(EmbeddingError::DimensionMismatch { expected, got: resp.dim });
        }
        sentences
            .iter()
            .zip(&resp.vectors)
            .map(|(s, rows)| {
                if rows.len() != s.len() {
                    return Err(EmbeddingError::Protocol(format!(
                        "{} tokens sent, {} vectors returned",
                        s.len(),
                        rows.len()
                    )));
                }
                to_matrix(rows, Some(expected))
            })
            .collect()
    }

    fn remember(&self, key: CacheKey, m: Arc<Array2<f64>>) -> Result<(), EmbeddingError> {
        if let Some(spill) = &self.spill {
            let rec = SpillRecord {
                provider: key.0.clone(),
                sentence: key.1.clone(),
                vectors: m.rows().into_iter().map(|r| r.to_vec()).collect(),
            };
            let line = serde_json::to_string(&rec).expect("spill record serializes");
            writeln!(spill.lock().expect("spill lock"), "{line}")?;
        }
        self.cache.lock().expect("cache lock").insert(key, m);
        Ok(())
    }

    pub fn cached_sentences(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }
}

fn to_matrix(rows: &[Vec<f64>], dim: Option<usize>) -> Result<Array2<f64>, EmbeddingError> {
    let width = dim.or_else(|| rows.first().map(Vec::len)).unwrap_or(0);
    if width == 0 {
        return Err(EmbeddingError::Protocol("zero-width vectors".into()));
    }
    let mut flat = Vec::with_capacity(rows.len() * width);
    for r in rows {
        if r.len() != width {
            return Err(EmbeddingError::DimensionMismatch { expected: width, got: r.len() });
        }
        if r.iter().any(|x| !x.is_finite()) {
            return Err(EmbeddingError::Protocol("non-finite vector entry".into()));
        }
        flat.extend_from_slice(r);
    }
    Ok(Array2::from_shape_vec((rows.len(), width), flat).expect("validated shape"))
}

impl EmbeddingProvider for RemoteProvider {
    fn id(&self) -> String {
        format!("remote:{}", self.config.endpoint.trim_end_matches('/'))
    }

    fn kind(&self) -> &'static str {
        "remote"
    }

    fn dim(&self) -> Option<usize> {
        self.dim.get().copied()
    }

    fn embed_tokens(&self, tokens: &[String]) -> Result<EmbeddingMatrix, EmbeddingError> {
        Ok(self.embed_batch(&[tokens.to_vec()])?.remove(0))
    }

    fn embed_batch(&self, sentences: &[Vec<String>]) -> Result<Vec<EmbeddingMatrix>, EmbeddingError> {
        if sentences.iter().any(Vec::is_empty) {
            return Err(EmbeddingError::EmptyInput);
        }
        let id = self.id();
        let mut out: Vec<Option<Arc<Array2<f64>>>> = {
            let cache = self.cache.lock().expect("cache lock");
            sentences.iter().map(|s| cache.get(&(id.clone(), s.clone())).cloned()).collect()
        };
        let mut missing: Vec<Vec<String>> = Vec::new();
        for (s, o) in sentences.iter().zip(&out) {
            if o.is_none() && !missing.contains(s) {
                missing.push(s.clone());
            }
        }
        if !missing.is_empty() {
            let fresh = self.request(&missing)?;
            for (s, m) in missing.into_iter().zip(fresh) {
                self.remember((id.clone(), s), Arc::new(m))?;
            }
            let cache = self.cache.lock().expect("cache lock");
            for (s, o) in sentences.iter().zip(out.iter_mut()) {
                if o.is_none() {
                    *o = cache.get(&(id.clone(), s.clone())).cloned();
                }
            }
        }
        Ok(sentences
            .iter()
            .zip(out)
            .map(|(s, m)| EmbeddingMatrix::new(s.clone(), (*m.expect("filled above")).clone()))
            .collect())
    }

    fn healthcheck(&self) -> HealthStatus {
        let probe = self.with_retries(|| self.agent.get(&self.url("/health")).call()?.body_mut().read_json::<HealthResponse>());
        match probe {
            Ok(h) if h.status == "ok" => HealthStatus {
                kind: "remote".into(),
                dim: h.dim,
                reachable: true,
                detail: None,
            },
            Ok(h) => HealthStatus {
                kind: "remote".into(),
                dim: h.dim,
                reachable: false,
                detail: Some(format!("service status '{}'", h.status)),
            },
            Err(e) => HealthStatus {
                kind: "remote".into(),
                dim: None,
                reachable: false,
                detail: Some(e.to_string()),
            },
        }
    }
}
