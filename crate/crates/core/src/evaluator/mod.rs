//! Feedback evaluator: token alignment scoring, training of a linear
//! projection over frozen embeddings, bipartite post-processing and MRR.

mod assign;
mod loss;
mod model;
mod prior;
mod rank;
mod similarity;
mod train;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::EmbeddingError;

pub use assign::{assignment, postprocess_score, postprocess_with_classes};
pub use loss::{loss_and_grads, matrix_loss, LossGrad, MatrixLoss, PairContext};
pub use model::ScorerModel;
pub use prior::build_prior;
pub use rank::{mrr, reciprocal_rank, RankEntry, Scorer};
pub use similarity::{score, similarity_matrix};
pub use train::{train, train_with, write_log_jsonl, EpochLog, TrainConfig, TrainExample, TrainOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Reference,
    Candidate,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{side:?} token {index} ('{token}') projects to a zero vector")]
    DegenerateEmbedding { side: Side, index: usize, token: String },
    #[error("embedding width {got} does not match projection input {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("template spans cover {spans} tokens but the reference has {rows}")]
    SpanMismatch { spans: usize, rows: usize },
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}, example {example}")]
    NonFiniteLoss { epoch: usize, batch: usize, example: String },
    #[error("training set is empty")]
    EmptyDataset,
    #[error("candidate has no tokens")]
    EmptyCandidate,
    #[error("model file: {0}")]
    Model(String),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Rows are reference tokens, columns candidate tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentMatrix {
    pub entries: Array2<f64>,
}

impl AlignmentMatrix {
    pub fn new(entries: Array2<f64>) -> Self {
        AlignmentMatrix { entries }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let m = rows.first().map_or(0, |r| r.len());
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        AlignmentMatrix::new(Array2::from_shape_vec((rows.len(), m), flat).expect("rows of equal length"))
    }

    pub fn shape(&self) -> (usize, usize) {
        self.entries.dim()
    }
}

/// 0/1 supervision for schema-item alignments and the region it applies to.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorAlignment {
    pub prior: Array2<f64>,
    pub mask: Array2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub s_prec: f64,
    pub s_recall: f64,
    pub s: f64,
    pub weighted: bool,
    /// Normalizer of the precision side (column count when unweighted).
    pub z_m: f64,
    /// Normalizer of the recall side (row count when unweighted).
    pub z_n: f64,
    /// Reference tokens in primary / secondary spans; zero when unweighted.
    pub cnt_primary: usize,
    pub cnt_secondary: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalHyperparams {
    pub margin: f64,
    pub lambda_sparsity: f64,
    pub gamma_prior: f64,
    pub w_primary: f64,
    pub w_secondary: f64,
    pub learning_rate: f64,
    /// Positives per gradient step; each brings all of its negatives.
    pub batch_size: usize,
    pub epochs: usize,
    pub negatives_per_positive: usize,
}

impl Default for EvalHyperparams {
    fn default() -> Self {
        EvalHyperparams {
            margin: 0.1,
            lambda_sparsity: 1e-3,
            gamma_prior: 1e-3,
            w_primary: 0.9,
            w_secondary: 0.1,
            learning_rate: 1e-2,
            batch_size: 64,
            epochs: 200,
            negatives_per_positive: 50,
        }
    }
}

impl EvalHyperparams {
    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: &str| Err(EvalError::InvalidHyperparams(m.to_string()));
        if (self.w_primary + self.w_secondary - 1.0).abs() > 1e-9 {
            return bad("w_primary + w_secondary must equal 1");
        }
        if self.w_primary < 0.0 || self.w_secondary < 0.0 {
            return bad("span weights must be non-negative");
        }
        if !(self.margin > 0.0) {
            return bad("margin must be positive");
        }
        if self.negatives_per_positive == 0 {
            return bad("negatives_per_positive must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.lambda_sparsity < 0.0 || self.gamma_prior < 0.0 {
            return bad("loss weights must be non-negative");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        EvalHyperparams::default().validate().unwrap();
        let mut hp = EvalHyperparams::default();
        hp.w_secondary = 0.2;
        assert!(hp.validate().is_err());
        let mut hp = EvalHyperparams::default();
        hp.negatives_per_positive = 0;
        assert!(hp.validate().is_err());
        let mut hp = EvalHyperparams::default();
        hp.margin = 0.0;
        assert!(hp.validate().is_err());
    }

    #[test]
    fn hyperparams_fill_missing_fields() {
        let hp: EvalHyperparams = serde_json::from_str(r#"{"epochs": 3}"#).unwrap();
        assert_eq!(hp.epochs, 3);
        assert_eq!(hp.margin, 0.1);
    }
}
