//! Token embeddings behind one provider contract.

mod remote;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use remote::{RemoteConfig, RemoteProvider};

/// Default width of the hashed providers.
pub const DEFAULT_DIM: usize = 64;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("cannot embed an empty token sequence")]
    EmptyInput,
    #[error("embedding service unreachable after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("embedding protocol error: {0}")]
    Protocol(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedding cache: {0}")]
    Cache(#[from] std::io::Error),
}

/// Row `n` is the vector of token `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub tokens: Vec<String>,
    pub vectors: Array2<f64>,
}

impl EmbeddingMatrix {
    pub fn new(tokens: Vec<String>, vectors: Array2<f64>) -> Self {
        assert_eq!(tokens.len(), vectors.nrows(), "one row per token");
        debug_assert!(vectors.iter().all(|x| x.is_finite()), "embedding rows must be finite");
        EmbeddingMatrix { tokens, vectors }
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn len(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthStatus {
    pub kind: String,
    pub dim: Option<usize>,
    pub reachable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

pub trait EmbeddingProvider: Send + Sync {
    /// Identifies the provider in cache keys and model files.
    fn id(&self) -> String;
    fn kind(&self) -> &'static str;
    /// Declared output width; remote providers learn it on first contact.
    fn dim(&self) -> Option<usize>;
    fn embed_tokens(&self, tokens: &[String]) -> Result<EmbeddingMatrix, EmbeddingError>;

    fn embed_batch(&self, sentences: &[Vec<String>]) -> Result<Vec<EmbeddingMatrix>, EmbeddingError> {
        sentences.iter().map(|s| self.embed_tokens(s)).collect()
    }

    fn healthcheck(&self) -> HealthStatus {
        HealthStatus {
            kind: self.kind().to_string(),
            dim: self.dim(),
            reachable: true,
            detail: None,
        }
    }
}

/// 64-bit FNV-1a.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

fn stack(tokens: &[String], dim: usize, f: impl Fn(&str) -> Vec<f64>) -> Result<EmbeddingMatrix, EmbeddingError> {
    if tokens.is_empty() {
        return Err(EmbeddingError::EmptyInput);
    }
    let flat: Vec<f64> = tokens.iter().flat_map(|t| f(t)).collect();
    let vectors = Array2::from_shape_vec((tokens.len(), dim), flat).expect("row width equals dim");
    Ok(EmbeddingMatrix::new(tokens.to_vec(), vectors))
}

/// Character-trigram counts hashed into `dim` buckets, L2-normalized. Tokens
/// are padded with boundary marks so short tokens still have trigrams.
#[derive(Debug, Clone)]
pub struct DeterministicProvider {
    dim: usize,
}

impl DeterministicProvider {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0);
        DeterministicProvider { dim }
    }

    pub fn vector(&self, token: &str) -> Vec<f64> {
        let chars: Vec<char> = std::iter::once('<')
            .chain(token.to_lowercase().chars())
            .chain(std::iter::once('>'))
            .collect();
        let mut v = vec![0.0; self.dim];
        for w in chars.windows(3) {
            let tri: String = w.iter().collect();
            v[(fnv1a(tri.as_bytes()) % self.dim as u64) as usize] += 1.0;
        }
        unit(v)
    }
}

impl Default for DeterministicProvider {
    fn default() -> Self {
        Self::new(DEFAULT_DIM)
    }
}

impl EmbeddingProvider for DeterministicProvider {
    fn id(&self) -> String {
        format!("deterministic-trigram-{}", self.dim)
    }

    fn kind(&self) -> &'static str {
        "deterministic"
    }

    fn dim(&self) -> Option<usize> {
        Some(self.dim)
    }

    fn embed_tokens(&self, tokens: &[String]) -> Result<EmbeddingMatrix, EmbeddingError> {
        stack(tokens, self.dim, |t| self.vector(t))
    }
}

/// One-hot vector per whole token: cosine is 1 for equal tokens and 0
/// otherwise (barring bucket collisions). Useful as a scoring oracle.
#[derive(Debug, Clone)]
pub struct ExactTokenProvider {
    dim: usize,
}

impl ExactTokenProvider {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0);
        ExactTokenProvider { dim }
    }
}

impl Default for ExactTokenProvider {
    fn default() -> Self {
        Self::new(1024)
    }
}

impl EmbeddingProvider for ExactTokenProvider {
    fn id(&self) -> String {
        format!("exact-token-{}", self.dim)
    }

    fn kind(&self) -> &'static str {
        "exact"
    }

    fn dim(&self) -> Option<usize> {
        Some(self.dim)
    }

    fn embed_tokens(&self, tokens: &[String]) -> Result<EmbeddingMatrix, EmbeddingError> {
        stack(tokens, self.dim, |t| {
            let mut v = vec![0.0; self.dim];
            v[(fnv1a(t.to_lowercase().as_bytes()) % self.dim as u64) as usize] = 1.0;
            v
        })
    }
}
