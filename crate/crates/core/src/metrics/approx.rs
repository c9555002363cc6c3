//! Smooth NDCG built from sigmoid-relaxed ranks.
//!
//! For a relevant item `i` in a user's scored pool
//!
//! ```text
//! rank(i) = 1 + sum_{j != i} sigmoid((s_j - s_i) / tau)
//! gate(i) = sigmoid((k + 1/2 - rank(i)) / tau)
//! dcg     = sum_{relevant i} gate(i) / log2(1 + rank(i))
//! ```
//!
//! normalised by the exact IDCG. The gate is centred half a rank beyond `k`
//! so that an item sitting exactly at rank `k` is counted, which makes the
//! estimate converge to the exact metric as `tau -> 0` on tie-free scores.

use ndarray::{Array2, ArrayView2};

use super::{idcg, RelevanceJudgements};
use crate::data::InteractionGraph;
use crate::error::{Error, Result};

pub const DEFAULT_TAU: f64 = 0.1;

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Smooth NDCG of one user's pool.
///
/// `relevant` holds positions into `scores`. When `grad` is given, the
/// derivative with respect to every pool score is accumulated into it,
/// scaled by `weight`.
pub fn smooth_ndcg_user(
    scores: &[f64],
    relevant: &[usize],
    k: usize,
    tau: f64,
    grad: Option<(&mut [f64], f64)>,
) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    let ideal = idcg(relevant.len(), k);
    let ln2 = std::f64::consts::LN_2;
    let mut total = 0.0;
    let mut grad = grad;
    for &i in relevant {
        let si = scores[i];
        let mut rank = 1.0;
        for (j, &sj) in scores.iter().enumerate() {
            if j != i {
                rank += sigmoid((sj - si) / tau);
            }
        }
        let gate = sigmoid((k as f64 + 0.5 - rank) / tau);
        let log_term = (1.0 + rank).ln();
        let discount = ln2 / log_term;
        total += gate * discount;

        if let Some((g, weight)) = grad.as_mut() {
            let d_gate = -gate * (1.0 - gate) / tau;
            let d_discount = -ln2 / (log_term * log_term * (1.0 + rank));
            let d_rank = (d_gate * discount + gate * d_discount) * *weight / ideal;
            if d_rank == 0.0 {
                continue;
            }
            let mut self_term = 0.0;
            for (j, &sj) in scores.iter().enumerate() {
                if j != i {
                    let sg = sigmoid((sj - si) / tau);
                    let d = sg * (1.0 - sg) / tau;
                    g[j] += d_rank * d;
                    self_term += d;
                }
            }
            g[i] -= d_rank * self_term;
        }
    }
    total / ideal
}

/// Gradient of a mean smooth NDCG with respect to the score matrix rows of `users`.
#[derive(Debug, Clone)]
pub struct SmoothNdcgGrad {
    pub value: f64,
    /// `users.len() x n_items`, zero on masked items.
    pub d_scores: Array2<f64>,
}

/// Mean smooth NDCG over `users` that have relevant items.
///
/// `scores` has one row per entry of `users`; each user's pool is every item
/// not in `train`. Returns the gradient when `with_grad` is set.
pub fn approx_ndcg(
    scores: ArrayView2<'_, f64>,
    users: &[usize],
    judgements: &RelevanceJudgements,
    train: &InteractionGraph,
    k: usize,
    tau: f64,
    with_grad: bool,
) -> Result<SmoothNdcgGrad> {
    if !(tau > 0.0) {
        return Err(Error::Parameter(format!("tau must be positive, got {tau}")));
    }
    let n_items = scores.ncols();
    let evaluated: Vec<usize> = (0..users.len())
        .filter(|&r| !judgements.relevant(users[r]).is_empty())
        .collect();
    let mut d_scores = Array2::zeros(if with_grad { (users.len(), n_items) } else { (0, 0) });
    if evaluated.is_empty() {
        return Ok(SmoothNdcgGrad { value: 0.0, d_scores });
    }
    let weight = 1.0 / evaluated.len() as f64;
    let mut total = 0.0;
    let mut pool = Vec::with_capacity(n_items);
    let mut pool_scores = Vec::with_capacity(n_items);
    let mut pool_grad = Vec::with_capacity(n_items);
    let mut rel_pos = Vec::new();
    for &r in &evaluated {
        let user = users[r];
        pool.clear();
        pool_scores.clear();
        rel_pos.clear();
        let mut train_items = train.user_items(user).peekable();
        for item in 0..n_items {
            if train_items.peek() == Some(&item) {
                train_items.next();
                continue;
            }
            if judgements.is_relevant(user, item) {
                rel_pos.push(pool.len());
            }
            pool.push(item);
            pool_scores.push(scores[[r, item]]);
        }
        let value = if with_grad {
            pool_grad.clear();
            pool_grad.resize(pool.len(), 0.0);
            let v = smooth_ndcg_user(&pool_scores, &rel_pos, k, tau, Some((&mut pool_grad, weight)));
            for (p, &item) in pool.iter().enumerate() {
                d_scores[[r, item]] = pool_grad[p];
            }
            v
        } else {
            smooth_ndcg_user(&pool_scores, &rel_pos, k, tau, None)
        };
        total += value;
    }
    Ok(SmoothNdcgGrad {
        value: total * weight,
        d_scores,
    })
}
