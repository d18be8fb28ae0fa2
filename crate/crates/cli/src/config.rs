//! Pipeline configuration: one JSON document, layered overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use feedsim::corpus::{FieldMap, LoadOptions, LowDataSplitConfig};
use feedsim::embedding::{DeterministicProvider, EmbeddingProvider, ExactTokenProvider, RemoteConfig, RemoteProvider};
use feedsim::evaluator::EvalHyperparams;
use feedsim::simulator::{GenerationConfig, SimulatorVariant};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Environment variables that override endpoints, and the config keys they set.
pub const ENV_OVERRIDES: [(&str, &str); 2] = [
    ("FEEDSIM_EMBEDDING_ENDPOINT", "embedding.remote.endpoint"),
    ("FEEDSIM_GENERATION_ENDPOINT", "generation.endpoint"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub strict: bool,
    pub paths: Paths,
    /// Input field names; `FieldMap::splash()` reads the released files.
    pub fields: FieldMap,
    pub embedding: EmbeddingSettings,
    pub generation: GenerationConfig,
    pub hyperparams: EvalHyperparams,
    pub split: SplitSettings,
    pub eval: EvalSettings,
    pub variants: Vec<SimulatorVariant>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            strict: true,
            paths: Paths::default(),
            fields: FieldMap::default(),
            embedding: EmbeddingSettings::default(),
            generation: GenerationConfig::default(),
            hyperparams: EvalHyperparams::default(),
            split: SplitSettings::default(),
            eval: EvalSettings::default(),
            variants: SimulatorVariant::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Default example file for commands that read one.
    pub examples: Option<PathBuf>,
    pub schemas: Option<PathBuf>,
    /// Template inventory JSON; the built-in one when absent.
    pub templates: Option<PathBuf>,
    /// Trained scorer; identity projection when absent.
    pub model: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            examples: None,
            schemas: None,
            templates: None,
            model: None,
            out: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Deterministic,
    Exact,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingSettings {
    pub provider: ProviderKind,
    /// Width of the local providers.
    pub dim: Option<usize>,
    pub remote: RemoteConfig,
}

impl Default for EmbeddingSettings {
    fn default() -> Self {
        EmbeddingSettings {
            provider: ProviderKind::Deterministic,
            dim: None,
            remote: RemoteConfig::default(),
        }
    }
}

impl EmbeddingSettings {
    pub fn provider(&self) -> Result<Box<dyn EmbeddingProvider>> {
        Ok(match self.provider {
            ProviderKind::Deterministic => Box::new(DeterministicProvider::new(self.dim.unwrap_or(feedsim::embedding::DEFAULT_DIM))),
            ProviderKind::Exact => Box::new(self.dim.map_or_else(ExactTokenProvider::default, ExactTokenProvider::new)),
            ProviderKind::Remote => Box::new(RemoteProvider::new(self.remote.clone())?),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSettings {
    /// Annotated share for `ingest`; no split when absent.
    pub k_percent: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    /// Negatives per ranking entry.
    pub negatives: usize,
    /// Dev MRR is logged every this many epochs.
    pub dev_every: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            negatives: 50,
            dev_every: 10,
        }
    }
}

/// Set `path` (dotted) in a JSON tree, creating objects on the way. The
/// value is read as JSON when it parses and as a string otherwise.
pub fn set_path(root: &mut Value, path: &str, raw: &str) -> Result<()> {
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        bail!("invalid config key '{path}'");
    }
    for key in &keys[..keys.len() - 1] {
        if !node.is_object() {
            bail!("config key '{path}' goes through a non-object value");
        }
        node = node
            .as_object_mut()
            .expect("checked above")
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    match node.as_object_mut() {
        Some(obj) => {
            obj.insert(keys[keys.len() - 1].to_string(), value);
            Ok(())
        }
        None => bail!("config key '{path}' goes through a non-object value"),
    }
}

pub struct Overrides<'a> {
    pub file: Option<&'a Path>,
    pub env: Vec<(String, String)>,
    pub sets: &'a [String],
}

impl PipelineConfig {
    /// Defaults, then the file, then endpoint variables, then `--set` pairs.
    pub fn resolve(o: &Overrides) -> Result<Self> {
        let mut tree = serde_json::to_value(PipelineConfig::default()).expect("config serializes");
        if let Some(path) = o.file {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            let file: Value = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
            merge(&mut tree, file);
        }
        for (var, key) in ENV_OVERRIDES {
            if let Some((_, v)) = o.env.iter().find(|(k, _)| k == var) {
                set_path(&mut tree, key, &Value::String(v.clone()).to_string())?;
            }
        }
        for pair in o.sets {
            let (k, v) = pair
                .split_once('=')
                .with_context(|| format!("--set expects key=value, got '{pair}'"))?;
            set_path(&mut tree, k.trim(), v)?;
        }
        let config: PipelineConfig = serde_json::from_value(tree.clone()).context("invalid configuration")?;
        let known = serde_json::to_value(&config).expect("config serializes");
        let mut unknown = Vec::new();
        unknown_keys(&tree, &known, "", &mut unknown);
        if !unknown.is_empty() {
            bail!("unknown config key(s): {}", unknown.join(", "));
        }
        config.check()?;
        Ok(config)
    }

    fn check(&self) -> Result<()> {
        self.hyperparams.validate()?;
        if let Some(k) = self.split.k_percent {
            LowDataSplitConfig::new(k, self.seed)?;
        }
        for (name, p) in [("examples", &self.paths.examples), ("schemas", &self.paths.schemas), ("templates", &self.paths.templates), ("model", &self.paths.model)] {
            if let Some(p) = p {
                if !p.exists() {
                    bail!("paths.{name} does not exist: {}", p.display());
                }
            }
        }
        if self.variants.is_empty() {
            bail!("at least one simulator variant is required");
        }
        Ok(())
    }

    pub fn load_options(&self) -> LoadOptions {
        LoadOptions {
            strict: self.strict,
            fields: self.fields.clone(),
        }
    }
}

/// Keys of `given` that the typed config dropped. Generation params are
/// passed through untouched, so anything goes below them.
fn unknown_keys(given: &Value, known: &Value, prefix: &str, out: &mut Vec<String>) {
    let (Value::Object(g), Value::Object(k)) = (given, known) else {
        return;
    };
    for (key, v) in g {
        let path = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
        match k.get(key) {
            None => out.push(path),
            Some(_) if path == "generation.params" => {}
            Some(kv) => unknown_keys(v, kv, &path, out),
        }
    }
}

/// Recursive object merge; `patch` wins.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
