//! Fuzzy schema-mention matching and negative feedback sampling.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use strsim::normalized_levenshtein;
use thiserror::Error;

use super::nl::words;
use crate::corpus::DatabaseSchema;
use crate::text::tokenize;

/// Default minimum normalized similarity for a mention.
pub const MATCH_THRESHOLD: f64 = 0.85;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemaItem {
    Table(String),
    /// First table (in schema order) owning a column of this name.
    Column { table: String, column: String },
    Value(String),
}

impl SchemaItem {
    /// The item's name in words, as it would appear in feedback.
    pub fn surface(&self) -> String {
        match self {
            SchemaItem::Table(t) => words(t),
            SchemaItem::Column { column, .. } => words(column),
            SchemaItem::Value(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MentionSpan {
    pub token_start: usize,
    /// Exclusive.
    pub token_end: usize,
    pub schema_item: SchemaItem,
    pub match_score: f64,
}

/// Lowercased names of every table and column, longest first.
fn candidates(schema: &DatabaseSchema) -> Vec<(String, SchemaItem)> {
    let mut out: Vec<(String, SchemaItem)> = Vec::new();
    for t in &schema.tables {
        out.push((words(&t.name).to_lowercase(), SchemaItem::Table(t.name.clone())));
    }
    for t in &schema.tables {
        for c in &t.columns {
            let name = words(&c.name).to_lowercase();
            if out.iter().any(|(n, i)| n == &name && matches!(i, SchemaItem::Column { .. })) {
                continue;
            }
            out.push((
                name,
                SchemaItem::Column {
                    table: t.name.clone(),
                    column: c.name.clone(),
                },
            ));
        }
    }
    out
}

fn is_number(tok: &str) -> bool {
    tok.parse::<f64>().is_ok_and(f64::is_finite)
}

pub fn match_schema_mentions(tokens: &[String], schema: &DatabaseSchema) -> Vec<MentionSpan> {
    match_schema_mentions_with(tokens, schema, MATCH_THRESHOLD)
}

/// Fuzzy matching of token spans against schema item names. Spans never
/// overlap; the closest match is taken first, the longest on ties. Numeric tokens left over become value
/// mentions.
pub fn match_schema_mentions_with(tokens: &[String], schema: &DatabaseSchema, threshold: f64) -> Vec<MentionSpan> {
    let toks: Vec<String> = tokens.iter().map(|t| t.to_lowercase()).collect();
    let cands = candidates(schema);
    let max_len = cands
        .iter()
        .map(|(n, _)| n.split(' ').count())
        .max()
        .unwrap_or(0)
        .min(toks.len());
    let mut found: Vec<MentionSpan> = Vec::new();
    for len in 1..=max_len {
        for start in 0..=toks.len() - len {
            let text = toks[start..start + len].join(" ");
            if !text.chars().any(char::is_alphanumeric) {
                continue;
            }
            let mut best: Option<(f64, &SchemaItem)> = None;
            for (name, item) in &cands {
                let s = normalized_levenshtein(&text, name);
                if s >= threshold && best.is_none_or(|(b, _)| s > b) {
                    best = Some((s, item));
                }
            }
            if let Some((score, item)) = best {
                found.push(MentionSpan {
                    token_start: start,
                    token_end: start + len,
                    schema_item: item.clone(),
                    match_score: score,
                });
            }
        }
    }
    // Best score wins; among equals the longer, then the earlier span.
    found.sort_by(|a, b| {
        b.match_score
            .total_cmp(&a.match_score)
            .then((b.token_end - b.token_start).cmp(&(a.token_end - a.token_start)))
            .then(a.token_start.cmp(&b.token_start))
    });
    let mut covered = vec![false; toks.len()];
    let mut spans = Vec::new();
    for m in found {
        if covered[m.token_start..m.token_end].iter().any(|&c| c) {
            continue;
        }
        covered[m.token_start..m.token_end].iter_mut().for_each(|c| *c = true);
        spans.push(m);
    }
    for (i, t) in toks.iter().enumerate() {
        if !covered[i] && is_number(t) {
            spans.push(MentionSpan {
                token_start: i,
                token_end: i + 1,
                schema_item: SchemaItem::Value(t.clone()),
                match_score: 1.0,
            });
        }
    }
    spans.sort_by_key(|s| s.token_start);
    spans
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NegativeError {
    #[error("feedback mentions no replaceable schema item or value")]
    NotApplicable,
}

/// A different item of the same kind, or `None` when the database has no
/// alternative.
fn replacement<R: Rng + ?Sized>(span_text: &str, item: &SchemaItem, schema: &DatabaseSchema, rng: &mut R) -> Option<String> {
    let differs = |name: &str| name != span_text && name != item.surface();
    let pool: Vec<String> = match item {
        SchemaItem::Table(_) => schema.tables.iter().map(|t| words(&t.name).to_lowercase()).collect(),
        SchemaItem::Column { .. } => {
            let mut names: Vec<String> = schema
                .tables
                .iter()
                .flat_map(|t| t.columns.iter().map(|c| words(&c.name).to_lowercase()))
                .collect();
            names.sort();
            names.dedup();
            names
        }
        SchemaItem::Value(v) => {
            let x: f64 = v.parse().unwrap_or(0.0);
            let hi = (x.abs() * 2.0).max(10.0) as i64;
            loop {
                let y = rng.random_range(0..=hi);
                if (y as f64 - x).abs() > f64::EPSILON {
                    return Some(y.to_string());
                }
            }
        }
    };
    let pool: Vec<&String> = pool.iter().filter(|n| differs(n)).collect();
    pool.choose(rng).map(|s| (*s).clone())
}

/// Corrupt `feedback` by swapping mentioned schema items and values for
/// other ones from the same database. Each replaceable mention flips with
/// probability 1/2; at least one always flips. Draws that merely permute
/// the input's tokens are redrawn, up to a fixed number of times.
pub fn sample_negative<R: Rng + ?Sized>(feedback: &str, schema: &DatabaseSchema, rng: &mut R) -> Result<String, NegativeError> {
    let tokens = tokenize(feedback);
    let spans = match_schema_mentions(&tokens, schema);
    let replaceable: Vec<&MentionSpan> = spans
        .iter()
        .filter(|s| {
            let text = tokens[s.token_start..s.token_end].join(" ");
            match &s.schema_item {
                SchemaItem::Value(_) => true,
                SchemaItem::Table(_) => schema.tables.iter().any(|t| {
                    let n = words(&t.name).to_lowercase();
                    n != text && n != s.schema_item.surface()
                }),
                SchemaItem::Column { .. } => schema.tables.iter().flat_map(|t| &t.columns).any(|c| {
                    let n = words(&c.name).to_lowercase();
                    n != text && n != s.schema_item.surface()
                }),
            }
        })
        .collect();
    if replaceable.is_empty() {
        return Err(NegativeError::NotApplicable);
    }
    let mut sorted = tokens.clone();
    sorted.sort();
    let mut draw = || {
        let flips: Vec<bool> = loop {
            let f: Vec<bool> = replaceable.iter().map(|_| rng.random_bool(0.5)).collect();
            if f.iter().any(|&b| b) {
                break f;
            }
        };
        let mut out: Vec<String> = Vec::with_capacity(tokens.len());
        let mut next = 0;
        for (span, flip) in replaceable.iter().zip(flips) {
            if !flip {
                continue;
            }
            out.extend_from_slice(&tokens[next..span.token_start]);
            let text = tokens[span.token_start..span.token_end].join(" ");
            let rep = replacement(&text, &span.schema_item, schema, rng).expect("replaceable span has an alternative");
            out.push(rep);
            next = span.token_end;
        }
        out.extend_from_slice(&tokens[next..]);
        out.join(" ")
    };
    // A draw that only swaps mentions around keeps the same bag of tokens
    // and is indistinguishable to the scorer; redraw it.
    let mut text = draw();
    for _ in 1..MAX_DRAWS {
        let mut t = tokenize(&text);
        t.sort();
        if t != sorted {
            break;
        }
        text = draw();
    }
    Ok(text)
}

const MAX_DRAWS: usize = 32;
