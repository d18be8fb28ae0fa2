use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{SimError, Simulator, SimulatorVariant};
use crate::corpus::{FeedbackExample, Provenance, SchemaStore};
use crate::edit_engine::{classify_structural, diff};
use crate::sql::parse_sql;
use crate::verbalizer::explain;

/// A parser mistake to simulate feedback for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mistake {
    #[serde(default)]
    pub id: Option<String>,
    pub question: String,
    pub wrong_parse: String,
    pub gold_parse: String,
    pub db_id: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AugmentReport {
    pub examples: Vec<FeedbackExample>,
    pub skipped_structural: usize,
    /// Examples taken from the checkpoint instead of regenerated.
    pub resumed: usize,
}

fn read_checkpoint(path: &Path) -> Result<Vec<FeedbackExample>, SimError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for line in fs::read_to_string(path)?.lines() {
        if line.trim().is_empty() {
            continue;
        }
        // A torn final line from a crash is dropped and regenerated.
        match serde_json::from_str(line) {
            Ok(ex) => out.push(ex),
            Err(_) => break,
        }
    }
    Ok(out)
}

/// Simulate feedback for every non-structural mistake. With a checkpoint,
/// finished examples are appended as they are produced and a rerun picks up
/// where the last one stopped.
pub fn augment_dataset(
    mistakes: &[Mistake],
    schemas: &SchemaStore,
    simulator: &Simulator,
    variant: SimulatorVariant,
    checkpoint: Option<&Path>,
) -> Result<AugmentReport, SimError> {
    let mut report = AugmentReport::default();
    let done = match checkpoint {
        Some(p) => read_checkpoint(p)?,
        None => Vec::new(),
    };
    let mut sink = match checkpoint {
        Some(p) => {
            // rewrite to drop any torn tail
            let mut f = fs::File::create(p)?;
            for ex in &done {
                writeln!(f, "{}", serde_json::to_string(ex).expect("examples serialize"))?;
            }
            drop(f);
            Some(OpenOptions::new().append(true).open(p)?)
        }
        None => None,
    };
    let mut done: HashMap<String, FeedbackExample> = done.into_iter().map(|e| (e.id.clone(), e)).collect();
    for (i, m) in mistakes.iter().enumerate() {
        let id = m.id.clone().unwrap_or_else(|| format!("sim-{i}"));
        let schema = schemas.resolve(&m.db_id)?;
        let parse = |text: &str, which| {
            parse_sql(text, schema).map_err(|source| SimError::Parse {
                id: id.clone(),
                which,
                source,
            })
        };
        let wrong = parse(&m.wrong_parse, "wrong")?;
        let gold = parse(&m.gold_parse, "gold")?;
        if classify_structural(&diff(&wrong, &gold)).is_some() {
            report.skipped_structural += 1;
            continue;
        }
        if let Some(ex) = done.remove(&id) {
            report.examples.push(ex);
            report.resumed += 1;
            continue;
        }
        let mut ex = FeedbackExample {
            id,
            db_id: m.db_id.clone(),
            question: m.question.clone(),
            wrong_parse: m.wrong_parse.clone(),
            gold_parse: m.gold_parse.clone(),
            explanation: Some(explain(&wrong, schema).text()),
            feedback: None,
            provenance: Provenance::Simulated,
        };
        ex.feedback = Some(simulator.simulate(&ex, variant, schema)?);
        if let Some(f) = sink.as_mut() {
            writeln!(f, "{}", serde_json::to_string(&ex).expect("examples serialize"))?;
            f.flush()?;
        }
        report.examples.push(ex);
    }
    Ok(report)
}
