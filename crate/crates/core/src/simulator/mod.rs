//! Prompt serialization for the feedback simulator variants, the generation
//! client, and evaluator-driven variant selection.

mod augment;
mod generate;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use augment::{augment_dataset, AugmentReport, Mistake};
pub use generate::{
    echo_text, AuditLog, AuditRecord, EchoGenerator, GenerationClient, GenerationConfig, HttpGenerator, Simulator,
};

use crate::corpus::{CorpusError, DatabaseSchema, FeedbackExample};
use crate::edit_engine::{classify_structural, diff};
use crate::evaluator::{EvalError, Scorer};
use crate::sql::{parse_sql, SqlError};
use crate::verbalizer::{explain, template_feedback, TemplateError, TemplateFeedback};

pub const FIELD_SEPARATOR: &str = " | ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimulatorVariant {
    /// Correct and wrong parses.
    Cwqes,
    /// Linearized edit script.
    Dqes,
    /// Template feedback.
    Tqes,
}

impl SimulatorVariant {
    pub const ALL: [SimulatorVariant; 3] = [SimulatorVariant::Cwqes, SimulatorVariant::Dqes, SimulatorVariant::Tqes];

    pub fn as_str(self) -> &'static str {
        match self {
            SimulatorVariant::Cwqes => "cwqes",
            SimulatorVariant::Dqes => "dqes",
            SimulatorVariant::Tqes => "tqes",
        }
    }
}

impl fmt::Display for SimulatorVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SimulatorVariant {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, SimError> {
        SimulatorVariant::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| SimError::UnknownVariant(s.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("unknown simulator variant '{0}'")]
    UnknownVariant(String),
    #[error("example {id}: {which} parse: {source}")]
    Parse {
        id: String,
        which: &'static str,
        #[source]
        source: SqlError,
    },
    #[error("example {id}: structural mistake ({kind}) cannot be described by edits")]
    Unsupported { id: String, kind: &'static str },
    #[error("example {id}: {source}")]
    Template {
        id: String,
        #[source]
        source: TemplateError,
    },
    #[error("generation service unreachable after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("generation protocol error: {0}")]
    Protocol(String),
    #[error("generation for {id} was empty")]
    EmptyGeneration { id: String },
    #[error("variants were generated for different evaluation contexts")]
    ContextMismatch,
    #[error("no candidates to select from")]
    NoCandidates,
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationRequest {
    pub variant: SimulatorVariant,
    pub prompt: String,
    pub example_id: String,
}

/// "table: col, col ; table: col" over the whole database.
pub fn schema_segment(schema: &DatabaseSchema) -> String {
    schema
        .tables
        .iter()
        .map(|t| {
            let cols: Vec<&str> = t.columns.iter().map(|c| c.name.as_str()).collect();
            format!("{}: {}", t.name, cols.join(", "))
        })
        .collect::<Vec<_>>()
        .join(" ; ")
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn serialize(example: &FeedbackExample, variant: SimulatorVariant, schema: &DatabaseSchema) -> Result<String, SimError> {
    let parse = |text: &str, which| {
        parse_sql(text, schema).map_err(|source| SimError::Parse {
            id: example.id.clone(),
            which,
            source,
        })
    };
    let wrong = parse(&example.wrong_parse, "wrong")?;
    let gold = parse(&example.gold_parse, "gold")?;
    let explanation = match &example.explanation {
        Some(e) => one_line(e),
        None => explain(&wrong, schema).text(),
    };
    let head = match variant {
        SimulatorVariant::Cwqes => format!(
            "correct: {}{FIELD_SEPARATOR}wrong: {}",
            one_line(&example.gold_parse),
            one_line(&example.wrong_parse)
        ),
        SimulatorVariant::Dqes | SimulatorVariant::Tqes => {
            let script = diff(&wrong, &gold);
            if let Some(kind) = classify_structural(&script) {
                return Err(SimError::Unsupported {
                    id: example.id.clone(),
                    kind: kind.name(),
                });
            }
            if variant == SimulatorVariant::Dqes {
                format!("edits: {}", script.linearize())
            } else {
                let t = template_feedback(&script, schema).map_err(|source| SimError::Template {
                    id: example.id.clone(),
                    source,
                })?;
                format!("template: {}", t.text())
            }
        }
    };
    Ok([
        head,
        format!("question: {}", one_line(&example.question)),
        format!("explanation: {explanation}"),
        format!("schema: {}", schema_segment(schema)),
    ]
    .join(FIELD_SEPARATOR))
}

pub fn request(example: &FeedbackExample, variant: SimulatorVariant, schema: &DatabaseSchema) -> Result<SimulationRequest, SimError> {
    Ok(SimulationRequest {
        variant,
        prompt: serialize(example, variant, schema)?,
        example_id: example.id.clone(),
    })
}

/// Simulated feedback paired with the template feedback it is judged against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedCandidate {
    pub reference: TemplateFeedback,
    pub feedback: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub best: SimulatorVariant,
    pub means: BTreeMap<SimulatorVariant, f64>,
}

/// Highest mean wins; equal means go to the earlier variant.
pub fn select_by_means(means: &BTreeMap<SimulatorVariant, f64>) -> Option<SimulatorVariant> {
    let mut best: Option<(SimulatorVariant, f64)> = None;
    for (&v, &m) in means {
        if best.is_none_or(|(_, b)| m > b) {
            best = Some((v, m));
        }
    }
    best.map(|(v, _)| v)
}

pub fn select_best(
    candidates: &BTreeMap<SimulatorVariant, Vec<SimulatedCandidate>>,
    scorer: &Scorer,
) -> Result<Selection, SimError> {
    let mut contexts: Option<Vec<&TemplateFeedback>> = None;
    let mut means = BTreeMap::new();
    for (&variant, cands) in candidates {
        if cands.is_empty() {
            return Err(SimError::NoCandidates);
        }
        let refs: Vec<&TemplateFeedback> = cands.iter().map(|c| &c.reference).collect();
        match &contexts {
            None => contexts = Some(refs),
            Some(first) if *first != refs => return Err(SimError::ContextMismatch),
            _ => {}
        }
        let mut total = 0.0;
        for c in cands {
            total += scorer.score(&c.reference, &c.feedback)?.s;
        }
        means.insert(variant, total / cands.len() as f64);
    }
    let best = select_by_means(&means).ok_or(SimError::NoCandidates)?;
    Ok(Selection { best, means })
}
