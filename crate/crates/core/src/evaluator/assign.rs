use ndarray::{Array2, Axis};

use super::{AlignmentMatrix, EvalError, EvalHyperparams, ScoreBreakdown};
use crate::verbalizer::{SpanClass, TemplateFeedback};

/// Shortest augmenting path (Jonker-Volgenant style potentials) minimizing
/// cost for `n <= m`; returns the column of each row.
fn min_cost_rows(cost: &Array2<f64>) -> Vec<usize> {
    let (n, m) = cost.dim();
    debug_assert!(n <= m);
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    // p[j]: row (1-based) matched to column j; way[j]: previous column on the path
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut rows = vec![0; n];
    for j in 1..=m {
        if p[j] != 0 {
            rows[p[j] - 1] = j - 1;
        }
    }
    rows
}

/// Maximum-weight one-to-one matching of `min(N, M)` (row, column) pairs,
/// sorted by row.
pub fn assignment(a: &AlignmentMatrix) -> Vec<(usize, usize)> {
    let (n, m) = a.shape();
    if n == 0 || m == 0 {
        return Vec::new();
    }
    let mut pairs: Vec<(usize, usize)> = if n <= m {
        min_cost_rows(&a.entries.mapv(|x| -x)).into_iter().enumerate().collect()
    } else {
        let t = a.entries.t().mapv(|x| -x);
        min_cost_rows(&t).into_iter().enumerate().map(|(j, i)| (i, j)).collect()
    };
    pairs.sort_unstable();
    pairs
}

/// Score after bipartite matching, weighting each reference token by the
/// class of its span and each candidate token by the class of the reference
/// token it was matched to (secondary when unmatched).
pub fn postprocess_with_classes(a: &AlignmentMatrix, classes: &[SpanClass], w_primary: f64, w_secondary: f64) -> ScoreBreakdown {
    let (n, m) = a.shape();
    assert!(n > 0 && m > 0, "score needs a non-empty matrix");
    assert_eq!(classes.len(), n, "one span class per reference token");
    let pairs = assignment(a);
    let mut ab = Array2::zeros((n, m));
    let mut col_row = vec![None; m];
    for &(i, j) in &pairs {
        ab[[i, j]] = a.entries[[i, j]];
        col_row[j] = Some(i);
    }
    let w = |c: SpanClass| match c {
        SpanClass::Primary => w_primary,
        SpanClass::Secondary => w_secondary,
    };
    let col_max = ab.fold_axis(Axis(0), f64::NEG_INFINITY, |acc, &x| acc.max(x));
    let row_max = ab.fold_axis(Axis(1), f64::NEG_INFINITY, |acc, &x| acc.max(x));
    let (mut num_m, mut z_m) = (0.0, 0.0);
    for j in 0..m {
        let wj = col_row[j].map_or(w_secondary, |i| w(classes[i]));
        num_m += wj * col_max[j];
        z_m += wj;
    }
    let (mut num_n, mut z_n) = (0.0, 0.0);
    for i in 0..n {
        num_n += w(classes[i]) * row_max[i];
        z_n += w(classes[i]);
    }
    let s_prec = num_m / z_m;
    let s_recall = num_n / z_n;
    let cnt_primary = classes.iter().filter(|&&c| c == SpanClass::Primary).count();
    ScoreBreakdown {
        s_prec,
        s_recall,
        s: (s_prec + s_recall) / 2.0,
        weighted: true,
        z_m,
        z_n,
        cnt_primary,
        cnt_secondary: n - cnt_primary,
    }
}

pub fn postprocess_score(a: &AlignmentMatrix, spans: &TemplateFeedback, hp: &EvalHyperparams) -> Result<ScoreBreakdown, EvalError> {
    let classes: Vec<SpanClass> = spans.tokens().into_iter().map(|(_, c)| c).collect();
    if classes.len() != a.shape().0 {
        return Err(EvalError::SpanMismatch {
            spans: classes.len(),
            rows: a.shape().0,
        });
    }
    Ok(postprocess_with_classes(a, &classes, hp.w_primary, hp.w_secondary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::score;

    #[test]
    fn matching_beats_greedy() {
        let a = AlignmentMatrix::from_rows(&[&[0.9, 0.8], &[0.8, 0.1]]);
        assert_eq!(assignment(&a), vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn rectangular_both_ways() {
        let wide = AlignmentMatrix::from_rows(&[&[0.1, 0.9, 0.3]]);
        assert_eq!(assignment(&wide), vec![(0, 1)]);
        let tall = AlignmentMatrix::from_rows(&[&[0.1], &[0.2], &[0.7]]);
        assert_eq!(assignment(&tall), vec![(2, 0)]);
    }

    #[test]
    fn span_weights_on_diagonal() {
        use SpanClass::*;
        let full = AlignmentMatrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let s = postprocess_with_classes(&full, &[Primary, Secondary], 0.9, 0.1);
        assert!((s.s_prec - 1.0).abs() < 1e-12);
        assert!((s.z_m - 1.0).abs() < 1e-12);
        let half = AlignmentMatrix::from_rows(&[&[1.0, 0.0], &[0.0, 0.5]]);
        let s = postprocess_with_classes(&half, &[Primary, Secondary], 0.9, 0.1);
        assert!((s.s_prec - 0.95).abs() < 1e-12);
        assert!((score(&half).s_prec - 0.75).abs() < 1e-12);
        assert_eq!((s.cnt_primary, s.cnt_secondary), (1, 1));
    }
}
