use ndarray::{Array2, Axis, Zip};

use super::similarity::{argmax, cosines, project, Projected};
use super::{EvalError, EvalHyperparams, PriorAlignment, ScorerModel, Side};
use crate::embedding::EmbeddingMatrix;

/// Raw embeddings of one (reference, candidate) pair plus its optional prior.
#[derive(Debug, Clone, Copy)]
pub struct PairContext<'a> {
    pub reference: &'a EmbeddingMatrix,
    pub candidate: &'a EmbeddingMatrix,
    pub prior: Option<&'a PriorAlignment>,
}

/// Loss of one positive/negative pair and its gradients with respect to
/// both alignment matrices.
#[derive(Debug, Clone)]
pub struct MatrixLoss {
    pub loss: f64,
    pub g_pos: Array2<f64>,
    pub g_neg: Array2<f64>,
    pub s_pos: f64,
    pub s_neg: f64,
    pub hinge_active: bool,
    /// Some row or column max was attained twice (first index used).
    pub tie: bool,
    /// The hinge or an L1 term sits on its non-differentiable point.
    pub kink: bool,
}

#[derive(Debug, Clone)]
pub struct LossGrad {
    pub loss: f64,
    /// Same shape as the projection.
    pub grad: Array2<f64>,
    pub s_pos: f64,
    pub s_neg: f64,
    pub hinge_active: bool,
    pub tie: bool,
    pub kink: bool,
}

/// Unweighted score and its (sub)gradient with respect to `a`.
fn score_and_grad(a: &Array2<f64>) -> (f64, Array2<f64>, bool) {
    let (n, m) = a.dim();
    let mut g = Array2::zeros((n, m));
    let mut tie = false;
    let mut prec = 0.0;
    for (j, col) in a.axis_iter(Axis(1)).enumerate() {
        let (i, v, t) = argmax(col.iter());
        prec += v;
        tie |= t;
        g[[i, j]] += 0.5 / m as f64;
    }
    let mut rec = 0.0;
    for (i, row) in a.axis_iter(Axis(0)).enumerate() {
        let (j, v, t) = argmax(row.iter());
        rec += v;
        tie |= t;
        g[[i, j]] += 0.5 / n as f64;
    }
    ((prec / m as f64 + rec / n as f64) / 2.0, g, tie)
}

/// λ‖A‖₁ + γ Σ (A − P)² · mask, added into `g`; returns the value and
/// whether some entry sits at zero.
fn regularizers(a: &Array2<f64>, prior: Option<&PriorAlignment>, hp: &EvalHyperparams, g: &mut Array2<f64>) -> (f64, bool) {
    let mut value = 0.0;
    let mut kink = false;
    if hp.lambda_sparsity > 0.0 {
        value += hp.lambda_sparsity * a.iter().map(|x| x.abs()).sum::<f64>();
        kink = a.iter().any(|x| x.abs() < 1e-12);
        Zip::from(&mut *g).and(a).for_each(|g, &x| *g += hp.lambda_sparsity * x.signum() * f64::from(x != 0.0));
    }
    if let (Some(p), true) = (prior, hp.gamma_prior > 0.0) {
        Zip::from(&mut *g).and(a).and(&p.prior).and(&p.mask).for_each(|g, &x, &pr, &mk| {
            value += hp.gamma_prior * (x - pr).powi(2) * mk;
            *g += 2.0 * hp.gamma_prior * (x - pr) * mk;
        });
    }
    (value, kink)
}

/// max(0, m − s_pos + s_neg) + λ(‖A_pos‖₁ + ‖A_neg‖₁) + γ(prior terms).
pub fn matrix_loss(
    a_pos: &Array2<f64>,
    a_neg: &Array2<f64>,
    prior_pos: Option<&PriorAlignment>,
    prior_neg: Option<&PriorAlignment>,
    hp: &EvalHyperparams,
) -> MatrixLoss {
    let (s_pos, gs_pos, tie_p) = score_and_grad(a_pos);
    let (s_neg, gs_neg, tie_n) = score_and_grad(a_neg);
    let h = hp.margin - s_pos + s_neg;
    let hinge_active = h > 0.0;
    let (mut g_pos, mut g_neg) = if hinge_active {
        (-gs_pos, gs_neg)
    } else {
        (Array2::zeros(a_pos.dim()), Array2::zeros(a_neg.dim()))
    };
    let (r_pos, k_pos) = regularizers(a_pos, prior_pos, hp, &mut g_pos);
    let (r_neg, k_neg) = regularizers(a_neg, prior_neg, hp, &mut g_neg);
    MatrixLoss {
        loss: h.max(0.0) + r_pos + r_neg,
        g_pos,
        g_neg,
        s_pos,
        s_neg,
        hinge_active,
        tie: tie_p || tie_n,
        kink: h.abs() < 1e-12 || k_pos || k_neg,
    }
}

/// Gradient with respect to the projection of a loss whose gradient with
/// respect to `a = cos(R P, C P)` is `g`.
pub(crate) fn backprop(
    h_ref: &Array2<f64>,
    r: &Projected,
    h_cand: &Array2<f64>,
    c: &Projected,
    a: &Array2<f64>,
    g: &Array2<f64>,
) -> Array2<f64> {
    let ga = g * a;
    let row_w = ga.sum_axis(Axis(1));
    let col_w = ga.sum_axis(Axis(0));
    let mut du = g.dot(&c.unit) - &(&r.unit * &row_w.view().insert_axis(Axis(1)));
    du /= &r.norms.view().insert_axis(Axis(1));
    let mut dv = g.t().dot(&r.unit) - &(&c.unit * &col_w.view().insert_axis(Axis(1)));
    dv /= &c.norms.view().insert_axis(Axis(1));
    h_ref.t().dot(&du) + h_cand.t().dot(&dv)
}

pub fn loss_and_grads(
    pos: &PairContext,
    neg: &PairContext,
    hp: &EvalHyperparams,
    model: &ScorerModel,
) -> Result<LossGrad, EvalError> {
    let rp = project(pos.reference, model, Side::Reference)?;
    let cp = project(pos.candidate, model, Side::Candidate)?;
    let rn = project(neg.reference, model, Side::Reference)?;
    let cn = project(neg.candidate, model, Side::Candidate)?;
    let a_pos = cosines(&rp, &cp);
    let a_neg = cosines(&rn, &cn);
    let ml = matrix_loss(&a_pos, &a_neg, pos.prior, neg.prior, hp);
    let grad = backprop(&pos.reference.vectors, &rp, &pos.candidate.vectors, &cp, &a_pos, &ml.g_pos)
        + backprop(&neg.reference.vectors, &rn, &neg.candidate.vectors, &cn, &a_neg, &ml.g_neg);
    Ok(LossGrad {
        loss: ml.loss,
        grad,
        s_pos: ml.s_pos,
        s_neg: ml.s_neg,
        hinge_active: ml.hinge_active,
        tie: ml.tie,
        kink: ml.kink,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn hp(lambda: f64, gamma: f64) -> EvalHyperparams {
        EvalHyperparams {
            lambda_sparsity: lambda,
            gamma_prior: gamma,
            ..EvalHyperparams::default()
        }
    }

    // 1x1 matrices make s equal to the single entry.
    #[test]
    fn inactive_hinge() {
        let l = matrix_loss(&array![[0.9]], &array![[0.3]], None, None, &hp(0.0, 0.0));
        assert_eq!(l.loss, 0.0);
        assert!(!l.hinge_active);
        assert!(l.g_pos.iter().chain(l.g_neg.iter()).all(|&x| x == 0.0));
    }

    #[test]
    fn active_hinge() {
        let l = matrix_loss(&array![[0.4]], &array![[0.38]], None, None, &hp(0.0, 0.0));
        assert!((l.loss - 0.08).abs() < 1e-12);
        assert_eq!(l.g_pos, array![[-1.0]]);
        assert_eq!(l.g_neg, array![[1.0]]);
    }

    #[test]
    fn l1_term() {
        // s_pos 0.9, s_neg 0.175 keeps the hinge off; |A_pos|+|A_neg| = 3.0
        let a_pos = array![[0.9, -0.5], [0.4, 0.9]];
        let a_neg = array![[0.1, 0.2]];
        let l = matrix_loss(&a_pos, &a_neg, None, None, &hp(1e-3, 0.0));
        assert!(!l.hinge_active);
        assert!((l.loss - 0.003).abs() < 1e-15);
    }

    #[test]
    fn prior_term_only_counts_masked_cells() {
        let a = array![[0.5, 0.2], [0.1, 0.7]];
        let prior = PriorAlignment {
            prior: array![[1.0, 0.0], [0.0, 0.0]],
            mask: array![[1.0, 1.0], [1.0, 0.0]],
        };
        let l = matrix_loss(&a, &array![[-0.9]], Some(&prior), None, &hp(0.0, 1.0));
        // (0.5-1)^2 + 0.2^2 + 0.1^2
        assert!((l.loss - 0.3).abs() < 1e-12);
        assert!((l.g_pos[[0, 0]] + 1.0).abs() < 1e-12);
        assert_eq!(l.g_pos[[1, 1]], 0.0);
    }
}
