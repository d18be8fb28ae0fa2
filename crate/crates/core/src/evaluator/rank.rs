use serde::{Deserialize, Serialize};

use super::similarity::{cosines, project};
use super::{postprocess_score, score, AlignmentMatrix, EvalError, EvalHyperparams, ScoreBreakdown, ScorerModel, Side};
use crate::embedding::{EmbeddingMatrix, EmbeddingProvider};
use crate::text::tokenize;
use crate::verbalizer::TemplateFeedback;

/// Binds a model to the provider whose embeddings it projects.
#[derive(Clone, Copy)]
pub struct Scorer<'a> {
    pub model: &'a ScorerModel,
    pub provider: &'a dyn EmbeddingProvider,
    pub hp: &'a EvalHyperparams,
}

impl<'a> Scorer<'a> {
    pub fn new(model: &'a ScorerModel, provider: &'a dyn EmbeddingProvider, hp: &'a EvalHyperparams) -> Self {
        Scorer { model, provider, hp }
    }

    fn embed(&self, tokens: &[String]) -> Result<EmbeddingMatrix, EvalError> {
        if tokens.is_empty() {
            return Err(EvalError::EmptyCandidate);
        }
        Ok(self.provider.embed_tokens(tokens)?)
    }

    pub fn alignment(&self, reference: &EmbeddingMatrix, candidate: &EmbeddingMatrix) -> Result<AlignmentMatrix, EvalError> {
        let r = project(reference, self.model, Side::Reference)?;
        let c = project(candidate, self.model, Side::Candidate)?;
        Ok(AlignmentMatrix::new(cosines(&r, &c)))
    }

    /// Post-processed score of free text against template feedback.
    pub fn score(&self, reference: &TemplateFeedback, candidate: &str) -> Result<ScoreBreakdown, EvalError> {
        let r = self.embed(&reference_tokens(reference))?;
        let c = self.embed(&tokenize(candidate))?;
        postprocess_score(&self.alignment(&r, &c)?, reference, self.hp)
    }

    /// Plain (unweighted, unmatched) score of two sentences.
    pub fn raw_score(&self, reference: &str, candidate: &str) -> Result<ScoreBreakdown, EvalError> {
        let r = self.embed(&tokenize(reference))?;
        let c = self.embed(&tokenize(candidate))?;
        Ok(score(&self.alignment(&r, &c)?))
    }

    /// Post-processed scores of several candidates against one reference.
    pub fn score_many(&self, reference: &TemplateFeedback, candidates: &[String]) -> Result<Vec<f64>, EvalError> {
        let r = self.embed(&reference_tokens(reference))?;
        let toks: Vec<Vec<String>> = candidates.iter().map(|c| tokenize(c)).collect();
        if toks.iter().any(Vec::is_empty) {
            return Err(EvalError::EmptyCandidate);
        }
        let embs = self.provider.embed_batch(&toks)?;
        embs.iter()
            .map(|c| Ok(postprocess_score(&self.alignment(&r, c)?, reference, self.hp)?.s))
            .collect()
    }
}

pub(crate) fn reference_tokens(t: &TemplateFeedback) -> Vec<String> {
    t.tokens().into_iter().map(|(t, _)| t).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub reference: TemplateFeedback,
    pub positive: String,
    pub negatives: Vec<String>,
}

/// 1 / rank of the positive; negatives scoring equal to it rank above it.
pub fn reciprocal_rank(positive: f64, negatives: &[f64]) -> f64 {
    let above = negatives.iter().filter(|&&s| s >= positive).count();
    1.0 / (1 + above) as f64
}

pub fn mrr(
    eval_set: &[RankEntry],
    model: &ScorerModel,
    provider: &dyn EmbeddingProvider,
    hp: &EvalHyperparams,
) -> Result<f64, EvalError> {
    if eval_set.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let scorer = Scorer::new(model, provider, hp);
    let mut total = 0.0;
    for e in eval_set {
        let mut cands = Vec::with_capacity(e.negatives.len() + 1);
        cands.push(e.positive.clone());
        cands.extend(e.negatives.iter().cloned());
        let scores = scorer.score_many(&e.reference, &cands)?;
        total += reciprocal_rank(scores[0], &scores[1..]);
    }
    Ok(total / eval_set.len() as f64)
}
