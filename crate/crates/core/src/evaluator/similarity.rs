use ndarray::{Array1, Array2, Axis};

use super::{AlignmentMatrix, EvalError, ScoreBreakdown, ScorerModel, Side};
use crate::embedding::EmbeddingMatrix;

/// Projected rows scaled to unit length, with the original norms kept for
/// back-propagation.
pub(crate) struct Projected {
    pub unit: Array2<f64>,
    pub norms: Array1<f64>,
}

pub(crate) fn project(e: &EmbeddingMatrix, model: &ScorerModel, side: Side) -> Result<Projected, EvalError> {
    if e.dim() != model.dim_in() {
        return Err(EvalError::DimMismatch {
            expected: model.dim_in(),
            got: e.dim(),
        });
    }
    let mut unit = e.vectors.dot(&model.projection);
    let norms: Array1<f64> = unit.map_axis(Axis(1), |r| r.dot(&r).sqrt());
    for (i, (mut row, &n)) in unit.axis_iter_mut(Axis(0)).zip(&norms).enumerate() {
        if !(n > 0.0) || !n.is_finite() {
            return Err(EvalError::DegenerateEmbedding {
                side,
                index: i,
                token: e.tokens.get(i).cloned().unwrap_or_default(),
            });
        }
        row /= n;
    }
    Ok(Projected { unit, norms })
}

pub(crate) fn cosines(r: &Projected, c: &Projected) -> Array2<f64> {
    r.unit.dot(&c.unit.t()).mapv(|x| x.clamp(-1.0, 1.0))
}

/// Cosine similarity of every projected reference token with every
/// projected candidate token.
pub fn similarity_matrix(
    reference: &EmbeddingMatrix,
    candidate: &EmbeddingMatrix,
    model: &ScorerModel,
) -> Result<AlignmentMatrix, EvalError> {
    let r = project(reference, model, Side::Reference)?;
    let c = project(candidate, model, Side::Candidate)?;
    Ok(AlignmentMatrix::new(cosines(&r, &c)))
}

/// Index of the maximum (first on ties) and whether a tie occurred.
pub(crate) fn argmax<'a>(xs: impl Iterator<Item = &'a f64>) -> (usize, f64, bool) {
    let mut best = (0, f64::NEG_INFINITY, false);
    for (i, &x) in xs.enumerate() {
        if x > best.1 + 1e-12 {
            best = (i, x, false);
        } else if (x - best.1).abs() <= 1e-12 {
            best.2 = true;
        }
    }
    best
}

pub fn score(a: &AlignmentMatrix) -> ScoreBreakdown {
    let (n, m) = a.shape();
    assert!(n > 0 && m > 0, "score needs a non-empty matrix");
    let col_max = a.entries.fold_axis(Axis(0), f64::NEG_INFINITY, |acc, &x| acc.max(x));
    let row_max = a.entries.fold_axis(Axis(1), f64::NEG_INFINITY, |acc, &x| acc.max(x));
    let s_prec = col_max.sum() / m as f64;
    let s_recall = row_max.sum() / n as f64;
    ScoreBreakdown {
        s_prec,
        s_recall,
        s: (s_prec + s_recall) / 2.0,
        weighted: false,
        z_m: m as f64,
        z_n: n as f64,
        cnt_primary: 0,
        cnt_secondary: 0,
    }
}
