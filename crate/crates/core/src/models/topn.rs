use ndarray::ArrayView2;

use crate::data::InteractionGraph;
use crate::metrics::{ndcg_at_k, RelevanceJudgements, UtilityVector};

#[derive(Debug, Clone, PartialEq)]
pub struct TopN {
    pub lists: Vec<Vec<usize>>,
    /// Users whose list came out shorter than `n` because too few items were unmasked.
    pub short: Vec<usize>,
}

/// Ranks unseen items per user by descending score; ties go to the lower item index.
pub fn recommend_topn(scores: ArrayView2<'_, f64>, train: &InteractionGraph, n: usize) -> TopN {
    assert!(n >= 1, "top-n cutoff must be positive");
    let mut lists = Vec::with_capacity(scores.nrows());
    let mut short = Vec::new();
    let mut pool: Vec<usize> = Vec::with_capacity(scores.ncols());
    for (u, row) in scores.rows().into_iter().enumerate() {
        pool.clear();
        let mut seen = train.user_items(u).peekable();
        for item in 0..scores.ncols() {
            if seen.peek() == Some(&item) {
                seen.next();
            } else {
                pool.push(item);
            }
        }
        let cmp = |a: &usize, b: &usize| row[*b].total_cmp(&row[*a]).then(a.cmp(b));
        if pool.len() > n {
            pool.select_nth_unstable_by(n - 1, cmp);
            pool.truncate(n);
        }
        pool.sort_unstable_by(cmp);
        if pool.len() < n {
            short.push(u);
        }
        lists.push(pool.clone());
    }
    TopN { lists, short }
}

/// NDCG@k of the ranking induced by `scores`, masking `train` items.
pub fn evaluate(
    scores: ArrayView2<'_, f64>,
    train: &InteractionGraph,
    judgements: &RelevanceJudgements,
    k: usize,
) -> UtilityVector {
    let top = recommend_topn(scores, train, k);
    ndcg_at_k(&top.lists, judgements, k)
}
