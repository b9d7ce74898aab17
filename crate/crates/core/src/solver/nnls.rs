//! Weighted least squares over a cone: min-norm SVD solves for the full
//! space and a Lawson–Hanson active-set scheme for the nonnegative orthant.

use nalgebra::{DMatrix, DVector};

use crate::model::BetaCone;

#[derive(Debug, Clone, PartialEq)]
pub struct ConeLsSolution {
    pub beta: Vec<f64>,
    /// Some solve along the way saw a rank-deficient design and fell back to
    /// the minimum-norm solution.
    pub rank_deficient: bool,
}

/// Minimizes `Σ w_i (y_i − b′h_i)²` over `b` in `cone`, where `h_i` is row
/// `i` of `design`. Rows with zero weight are inert.
pub fn weighted_cone_ls(design: &DMatrix<f64>, y: &[f64], weights: &[f64], cone: BetaCone) -> ConeLsSolution {
    let (n, p) = design.shape();
    debug_assert_eq!(n, y.len());
    debug_assert_eq!(n, weights.len());

    if p == 1 {
        return scalar_solve(design, y, weights, cone);
    }

    let sw: Vec<f64> = weights.iter().map(|w| w.max(0.0).sqrt()).collect();
    let a = DMatrix::from_fn(n, p, |i, j| sw[i] * design[(i, j)]);
    let b = DVector::from_iterator(n, y.iter().zip(&sw).map(|(y, s)| y * s));
    match cone {
        BetaCone::FullSpace => {
            let (x, rank_deficient) = min_norm_lstsq(&a, &b);
            ConeLsSolution { beta: x.iter().copied().collect(), rank_deficient }
        }
        BetaCone::NonnegativeOrthant => {
            let (x, rank_deficient) = nnls(&a, &b);
            ConeLsSolution { beta: x.iter().copied().collect(), rank_deficient }
        }
    }
}

fn scalar_solve(design: &DMatrix<f64>, y: &[f64], weights: &[f64], cone: BetaCone) -> ConeLsSolution {
    let h = design.column(0);
    let (mut num, mut den) = (0.0, 0.0);
    for ((h, y), w) in h.iter().zip(y).zip(weights) {
        num += w * h * y;
        den += w * h * h;
    }
    if den <= 0.0 || !den.is_finite() {
        return ConeLsSolution { beta: vec![0.0], rank_deficient: true };
    }
    let b = num / den;
    let b = match cone {
        BetaCone::NonnegativeOrthant => b.max(0.0),
        BetaCone::FullSpace => b,
    };
    ConeLsSolution { beta: vec![b], rank_deficient: false }
}

/// Least squares via SVD, zeroing singular values below the usual
/// `max(n, p)·ε·σ_max` threshold.
pub fn min_norm_lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, bool) {
    let (n, p) = a.shape();
    if n == 0 || p == 0 {
        return (DVector::zeros(p), true);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if smax.is_nan() || smax <= 0.0 {
        return (DVector::zeros(p), true);
    }
    let cutoff = smax * n.max(p) as f64 * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|s| **s > cutoff).count();
    let x = svd.solve(b, cutoff).expect("cutoff is nonnegative and both factors were computed");
    (x, rank < p)
}

/// Lawson–Hanson nonnegative least squares `min ‖Ax − b‖, x ≥ 0`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, bool) {
    let (n, p) = a.shape();
    let mut x = DVector::<f64>::zeros(p);
    let mut passive = vec![false; p];
    let mut rank_deficient = false;

    let norm1 = (0..p).map(|j| a.column(j).abs().sum()).fold(0.0, f64::max);
    let tol = 10.0 * f64::EPSILON * norm1 * n.max(p) as f64;
    let max_iter = 3 * p + 10;
    let mut iter = 0;
    let mut blocked = vec![false; p];

    loop {
        let grad = a.tr_mul(&(b - a * &x));
        let candidate = (0..p)
            .filter(|&j| !passive[j] && !blocked[j] && grad[j] > tol)
            .max_by(|&i, &j| grad[i].total_cmp(&grad[j]));
        let Some(j) = candidate else { break };
        if iter >= max_iter {
            break;
        }
        passive[j] = true;

        loop {
            iter += 1;
            let cols: Vec<usize> = (0..p).filter(|&i| passive[i]).collect();
            let sub = a.select_columns(&cols);
            let (zp, deficient) = min_norm_lstsq(&sub, b);
            rank_deficient |= deficient;
            let mut z = DVector::<f64>::zeros(p);
            for (k, &c) in cols.iter().enumerate() {
                z[c] = zp[k];
            }

            if cols.iter().all(|&c| z[c] > 0.0) {
                x = z;
                blocked.iter_mut().for_each(|b| *b = false);
                break;
            }

            // Interpolate toward z until the first passive coordinate hits zero.
            let step = cols
                .iter()
                .filter(|&&c| z[c] <= 0.0)
                .map(|&c| {
                    let d = x[c] - z[c];
                    if d > 0.0 { x[c] / d } else { 0.0 }
                })
                .fold(f64::INFINITY, f64::min);
            x += (&z - &x) * step;
            let mut removed_new = false;
            for &c in &cols {
                if x[c] <= tol {
                    x[c] = 0.0;
                    passive[c] = false;
                    removed_new |= c == j;
                }
            }
            if removed_new && step == 0.0 {
                // Degenerate entry: the new column cannot improve the fit.
                blocked[j] = true;
            }
            if !passive.iter().any(|&p| p) || iter >= max_iter {
                break;
            }
        }
    }

    (x, rank_deficient)
}
