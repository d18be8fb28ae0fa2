use std::io::Write;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{backprop, matrix_loss};
use super::rank::reference_tokens;
use super::similarity::{cosines, project};
use super::{build_prior, mrr, EvalError, EvalHyperparams, PriorAlignment, RankEntry, ScorerModel, Side};
use crate::corpus::DatabaseSchema;
use crate::embedding::{EmbeddingMatrix, EmbeddingProvider};
use crate::text::tokenize;
use crate::verbalizer::{sample_negative, NegativeError, TemplateFeedback};

#[derive(Debug, Clone)]
pub struct TrainExample<'a> {
    pub id: String,
    pub reference: TemplateFeedback,
    /// Human (or simulated) feedback for the same correction.
    pub positive: String,
    pub schema: &'a DatabaseSchema,
}

#[derive(Debug, Clone, Default)]
pub struct TrainConfig<'a> {
    pub seed: u64,
    /// Starting model; identity over the provider width when absent.
    pub init: Option<ScorerModel>,
    pub dev: Option<&'a [RankEntry]>,
    /// Evaluate dev MRR every this many epochs (and after the last); 0 never.
    pub dev_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub mrr_dev: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ScorerModel,
    pub log: Vec<EpochLog>,
    /// Examples dropped because no negative could be sampled from them.
    pub skipped: Vec<String>,
}

struct Prepared<'e, 'a> {
    ex: &'e TrainExample<'a>,
    reference: EmbeddingMatrix,
    positive: EmbeddingMatrix,
    prior: PriorAlignment,
}

struct Negative {
    emb: EmbeddingMatrix,
    prior: PriorAlignment,
}

pub fn train(
    dataset: &[TrainExample],
    provider: &dyn EmbeddingProvider,
    hp: &EvalHyperparams,
    seed: u64,
) -> Result<TrainOutcome, EvalError> {
    train_with(dataset, provider, hp, &TrainConfig { seed, ..TrainConfig::default() })
}

fn negatives(p: &Prepared, provider: &dyn EmbeddingProvider, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Negative>, EvalError> {
    let mut toks = Vec::with_capacity(count);
    for _ in 0..count {
        let text = sample_negative(&p.ex.positive, p.ex.schema, rng).expect("checked applicable before training");
        toks.push(tokenize(&text));
    }
    let embs = provider.embed_batch(&toks)?;
    Ok(toks
        .iter()
        .zip(embs)
        .map(|(t, emb)| Negative {
            prior: build_prior(&p.ex.reference, t, p.ex.schema),
            emb,
        })
        .collect())
}

/// Mini-batch gradient descent on the projection. Negatives are redrawn
/// every epoch from a stream derived from the seed and the epoch number.
pub fn train_with(
    dataset: &[TrainExample],
    provider: &dyn EmbeddingProvider,
    hp: &EvalHyperparams,
    config: &TrainConfig,
) -> Result<TrainOutcome, EvalError> {
    hp.validate()?;
    let mut skipped = Vec::new();
    let mut prepared = Vec::new();
    let mut probe = ChaCha8Rng::seed_from_u64(config.seed);
    for ex in dataset {
        if let Err(NegativeError::NotApplicable) = sample_negative(&ex.positive, ex.schema, &mut probe) {
            skipped.push(ex.id.clone());
            continue;
        }
        let ref_tokens = reference_tokens(&ex.reference);
        let pos_tokens = tokenize(&ex.positive);
        if ref_tokens.is_empty() || pos_tokens.is_empty() {
            skipped.push(ex.id.clone());
            continue;
        }
        prepared.push(Prepared {
            ex,
            reference: provider.embed_tokens(&ref_tokens)?,
            positive: provider.embed_tokens(&pos_tokens)?,
            prior: build_prior(&ex.reference, &pos_tokens, ex.schema),
        });
    }
    if prepared.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let dim = prepared[0].reference.dim();
    let mut model = config.init.clone().unwrap_or_else(|| ScorerModel::identity(dim, provider.id()));
    if model.dim_in() != dim {
        return Err(EvalError::DimMismatch {
            expected: model.dim_in(),
            got: dim,
        });
    }

    let mut order_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut log = Vec::with_capacity(hp.epochs);
    for epoch in 0..hp.epochs {
        let mut neg_rng = ChaCha8Rng::seed_from_u64(config.seed);
        neg_rng.set_stream(epoch as u64 + 1);
        let negs: Vec<Vec<Negative>> = prepared
            .iter()
            .map(|p| negatives(p, provider, hp.negatives_per_positive, &mut neg_rng))
            .collect::<Result<_, _>>()?;
        order.shuffle(&mut order_rng);
        let (mut loss_sum, mut triples) = (0.0, 0usize);
        for (b, batch) in order.chunks(hp.batch_size).enumerate() {
            let mut grad = Array2::<f64>::zeros(model.projection.dim());
            let mut count = 0usize;
            for &i in batch {
                let p = &prepared[i];
                let rp = project(&p.reference, &model, Side::Reference)?;
                let cp = project(&p.positive, &model, Side::Candidate)?;
                let a_pos = cosines(&rp, &cp);
                let mut g_pos = Array2::<f64>::zeros(a_pos.dim());
                for n in &negs[i] {
                    let cn = project(&n.emb, &model, Side::Candidate)?;
                    let a_neg = cosines(&rp, &cn);
                    let ml = matrix_loss(&a_pos, &a_neg, Some(&p.prior), Some(&n.prior), hp);
                    if !ml.loss.is_finite() {
                        return Err(EvalError::NonFiniteLoss {
                            epoch,
                            batch: b,
                            example: p.ex.id.clone(),
                        });
                    }
                    loss_sum += ml.loss;
                    triples += 1;
                    count += 1;
                    g_pos += &ml.g_pos;
                    grad += &backprop(&p.reference.vectors, &rp, &n.emb.vectors, &cn, &a_neg, &ml.g_neg);
                }
                grad += &backprop(&p.reference.vectors, &rp, &p.positive.vectors, &cp, &a_pos, &g_pos);
            }
            model.projection.scaled_add(-hp.learning_rate / count as f64, &grad);
        }
        model.trained_epochs += 1;
        let due = config.dev_every > 0 && ((epoch + 1) % config.dev_every == 0 || epoch + 1 == hp.epochs);
        let mrr_dev = match (config.dev, due) {
            (Some(dev), true) => Some(mrr(dev, &model, provider, hp)?),
            _ => None,
        };
        log.push(EpochLog {
            epoch,
            mean_loss: loss_sum / triples as f64,
            mrr_dev,
        });
    }
    Ok(TrainOutcome { model, log, skipped })
}

pub fn write_log_jsonl<W: Write>(log: &[EpochLog], mut out: W) -> std::io::Result<()> {
    for e in log {
        writeln!(out, "{}", serde_json::to_string(e).expect("log entry serializes"))?;
    }
    Ok(())
}
