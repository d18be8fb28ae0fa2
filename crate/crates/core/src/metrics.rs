//! Error-correction metrics over predicted fixes.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusError, FeedbackExample, SchemaStore};
use crate::edit_engine::edit_distance;
use crate::sql::{exact_set_match, parse_sql};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no records to evaluate")]
    Empty,
    #[error("no prediction for example {0}")]
    MissingPrediction(String),
    #[error("prediction for unknown example {0}")]
    UnknownPrediction(String),
    #[error("more than one prediction for example {0}")]
    DuplicatePrediction(String),
    #[error("invalid E2E counts: {0}")]
    E2e(String),
    #[error("example {id}: {message}")]
    Gold { id: String, message: String },
    #[error("predictions line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub example_id: String,
    pub fixed_parse: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectionRecord {
    pub example_id: String,
    pub fixed_parse: String,
    pub init_distance: usize,
    pub fixed_distance: usize,
    /// The fix exact-set-matches the gold parse.
    pub correct: bool,
    /// The fix did not parse; it counts as incorrect and unchanged.
    pub unparseable: bool,
}

impl CorrectionRecord {
    fn included(&self) -> bool {
        self.init_distance > 0
    }
}

pub fn parse_predictions(text: &str) -> Result<Vec<Prediction>, MetricsError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| MetricsError::Format {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn load_predictions(path: &Path) -> Result<Vec<Prediction>, MetricsError> {
    parse_predictions(&std::fs::read_to_string(path)?)
}

/// Pair every example with its prediction and measure both edit distances
/// against the gold parse.
pub fn build_records(
    examples: &[FeedbackExample],
    predictions: &[Prediction],
    schemas: &SchemaStore,
) -> Result<Vec<CorrectionRecord>, MetricsError> {
    let mut by_id: HashMap<&str, &Prediction> = HashMap::new();
    for p in predictions {
        if by_id.insert(&p.example_id, p).is_some() {
            return Err(MetricsError::DuplicatePrediction(p.example_id.clone()));
        }
    }
    let mut out = Vec::with_capacity(examples.len());
    for ex in examples {
        let p = by_id
            .remove(ex.id.as_str())
            .ok_or_else(|| MetricsError::MissingPrediction(ex.id.clone()))?;
        let schema = schemas.resolve(&ex.db_id)?;
        let gold_err = |e: crate::sql::SqlError| MetricsError::Gold {
            id: ex.id.clone(),
            message: e.to_string(),
        };
        let gold = parse_sql(&ex.gold_parse, schema).map_err(gold_err)?;
        let wrong = parse_sql(&ex.wrong_parse, schema).map_err(gold_err)?;
        let init_distance = edit_distance(&wrong, &gold);
        let record = match parse_sql(&p.fixed_parse, schema) {
            Ok(fixed) => CorrectionRecord {
                example_id: ex.id.clone(),
                fixed_parse: p.fixed_parse.clone(),
                init_distance,
                fixed_distance: edit_distance(&fixed, &gold),
                correct: exact_set_match(&fixed, &gold),
                unparseable: false,
            },
            Err(_) => CorrectionRecord {
                example_id: ex.id.clone(),
                fixed_parse: p.fixed_parse.clone(),
                init_distance,
                fixed_distance: init_distance,
                correct: false,
                unparseable: true,
            },
        };
        out.push(record);
    }
    if let Some(extra) = by_id.keys().min() {
        return Err(MetricsError::UnknownPrediction(extra.to_string()));
    }
    Ok(out)
}

/// Two decimals, ties to even.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round_ties_even() / 100.0
}

fn percent(k: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        100.0 * k as f64 / n as f64
    }
}

pub fn correction_accuracy(records: &[CorrectionRecord]) -> f64 {
    percent(records.iter().filter(|r| r.correct).count(), records.len())
}

/// Shares of records (with a non-zero initial distance) whose distance to
/// gold went down and up.
pub fn edit_dec_inc(records: &[CorrectionRecord]) -> (f64, f64) {
    let inc: Vec<&CorrectionRecord> = records.iter().filter(|r| r.included()).collect();
    let dec = inc.iter().filter(|r| r.fixed_distance < r.init_distance).count();
    let up = inc.iter().filter(|r| r.fixed_distance > r.init_distance).count();
    (percent(dec, inc.len()), percent(up, inc.len()))
}

/// Mean relative edit reduction over records with a non-zero initial
/// distance; negative when fixes drift away from gold.
pub fn progress(records: &[CorrectionRecord]) -> f64 {
    let rel: Vec<f64> = records
        .iter()
        .filter(|r| r.included())
        .map(|r| (r.init_distance as f64 - r.fixed_distance as f64) / r.init_distance as f64)
        .collect();
    if rel.is_empty() {
        0.0
    } else {
        100.0 * rel.iter().sum::<f64>() / rel.len() as f64
    }
}

pub fn e2e(initial_correct: usize, corrected: usize, total: usize) -> Result<f64, MetricsError> {
    if total == 0 {
        return Err(MetricsError::E2e("total must be positive".into()));
    }
    if initial_correct + corrected > total {
        return Err(MetricsError::E2e(format!(
            "{initial_correct} initially correct + {corrected} corrected exceeds {total}"
        )));
    }
    Ok(percent(initial_correct + corrected, total))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct E2eCounts {
    pub initial_correct: usize,
    pub corrected: usize,
    pub total: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportOptions {
    pub e2e: Option<E2eCounts>,
}

/// All values are percents rounded to two decimals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub correction_accuracy: f64,
    pub progress: f64,
    pub edit_dec: f64,
    pub edit_inc: f64,
    pub e2e: Option<f64>,
    pub n: usize,
    /// Records with zero initial distance, left out of the edit metrics.
    pub excluded: usize,
    pub unparseable: usize,
}

pub fn report(records: &[CorrectionRecord], options: &ReportOptions) -> Result<MetricsReport, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let (dec, inc) = edit_dec_inc(records);
    let e2e = match options.e2e {
        Some(c) => Some(round2(e2e(c.initial_correct, c.corrected, c.total)?)),
        None => None,
    };
    Ok(MetricsReport {
        correction_accuracy: round2(correction_accuracy(records)),
        progress: round2(progress(records)),
        edit_dec: round2(dec),
        edit_inc: round2(inc),
        e2e,
        n: records.len(),
        excluded: records.iter().filter(|r| !r.included()).count(),
        unparseable: records.iter().filter(|r| r.unparseable).count(),
    })
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let cols = ["Corr Acc.", "Progress", "Edit-Dec", "Edit-Inc", "E2E"];
        let vals = [
            format!("{:.2}", self.correction_accuracy),
            format!("{:.2}", self.progress),
            format!("{:.2}", self.edit_dec),
            format!("{:.2}", self.edit_inc),
            self.e2e.map_or_else(|| "\u{2014}".to_string(), |v| format!("{v:.2}")),
        ];
        let mut out = String::from("Error correction performance (%)\n");
        let widths: Vec<usize> = cols.iter().zip(&vals).map(|(c, v)| c.len().max(v.chars().count())).collect();
        let row = |cells: Vec<String>| {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, &w)| format!("{c:>w$}"))
                .collect::<Vec<_>>()
                .join("  ")
        };
        let _ = writeln!(out, "{}", row(cols.iter().map(|s| s.to_string()).collect()));
        let _ = writeln!(out, "{}", row(vals.to_vec()));
        let _ = writeln!(
            out,
            "n = {} ({} without initial edits, {} unparseable fixes)",
            self.n, self.excluded, self.unparseable
        );
        out
    }
}
