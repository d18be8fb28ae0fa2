use ndarray::{Array2, Axis};

use super::PriorAlignment;
use crate::corpus::DatabaseSchema;
use crate::verbalizer::{match_schema_mentions, MentionSpan, TemplateFeedback};

fn owner(spans: &[MentionSpan], len: usize) -> Vec<Option<&MentionSpan>> {
    let mut out = vec![None; len];
    for s in spans {
        out[s.token_start..s.token_end].iter_mut().for_each(|o| *o = Some(s));
    }
    out
}

/// Align reference and candidate tokens that belong to mentions of the same
/// schema item or value. The mask covers every row and column holding an
/// aligned pair.
pub fn build_prior(template: &TemplateFeedback, candidate_tokens: &[String], schema: &DatabaseSchema) -> PriorAlignment {
    let ref_tokens: Vec<String> = template.tokens().into_iter().map(|(t, _)| t).collect();
    let (n, m) = (ref_tokens.len(), candidate_tokens.len());
    let ref_spans = match_schema_mentions(&ref_tokens, schema);
    let cand_spans = match_schema_mentions(candidate_tokens, schema);
    let r_own = owner(&ref_spans, n);
    let c_own = owner(&cand_spans, m);
    let mut prior = Array2::zeros((n, m));
    for (i, r) in r_own.iter().enumerate() {
        for (j, c) in c_own.iter().enumerate() {
            if let (Some(r), Some(c)) = (r, c) {
                if r.schema_item == c.schema_item {
                    prior[[i, j]] = 1.0;
                }
            }
        }
    }
    let rows: Vec<bool> = prior.axis_iter(Axis(0)).map(|r| r.sum() > 0.0).collect();
    let cols: Vec<bool> = prior.axis_iter(Axis(1)).map(|c| c.sum() > 0.0).collect();
    let mask = Array2::from_shape_fn((n, m), |(i, j)| f64::from(u8::from(rows[i] || cols[j])));
    PriorAlignment { prior, mask }
}
