//! Ranking quality, group fairness gaps, significance tests and set overlap.

pub(crate) mod approx;
mod ndcg;
mod overlap;
mod report;
mod wilcoxon;

pub use approx::{approx_ndcg, smooth_ndcg_user, SmoothNdcgGrad, DEFAULT_TAU};
pub use ndcg::{delta_ndcg, dcg, group_summary, idcg, ndcg_at_k, GroupSummary};
pub use overlap::jaccard;
pub use report::{percent, MetricRecord};
pub use wilcoxon::{wilcoxon_signed_rank, WilcoxonMethod, WilcoxonResult};

use crate::data::InteractionGraph;

/// Default ranking cutoff.
pub const DEFAULT_K: usize = 10;

/// Relevant items per user, drawn from one split.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceJudgements {
    per_user: Vec<Vec<usize>>,
}

impl RelevanceJudgements {
    pub fn new(per_user: Vec<Vec<usize>>) -> Self {
        let per_user = per_user
            .into_iter()
            .map(|mut v| {
                v.sort_unstable();
                v.dedup();
                v
            })
            .collect();
        Self { per_user }
    }

    pub fn from_graph(graph: &InteractionGraph) -> Self {
        Self::new((0..graph.n_users()).map(|u| graph.user_items(u).collect()).collect())
    }

    pub fn n_users(&self) -> usize {
        self.per_user.len()
    }

    pub fn relevant(&self, user: usize) -> &[usize] {
        self.per_user.get(user).map_or(&[], Vec::as_slice)
    }

    pub fn is_relevant(&self, user: usize, item: usize) -> bool {
        self.relevant(user).binary_search(&item).is_ok()
    }
}

/// Per-user NDCG@k; `None` marks users without relevant items (undefined IDCG).
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityVector {
    pub k: usize,
    pub values: Vec<Option<f64>>,
}

impl UtilityVector {
    pub fn new(k: usize, values: Vec<Option<f64>>) -> Self {
        Self { k, values }
    }

    pub fn get(&self, user: usize) -> Option<f64> {
        self.values.get(user).copied().flatten()
    }

    pub fn n_evaluated(&self) -> usize {
        self.values.iter().flatten().count()
    }

    /// Users whose utility is undefined.
    pub fn excluded(&self) -> Vec<usize> {
        (0..self.values.len()).filter(|&u| self.values[u].is_none()).collect()
    }

    pub fn mean(&self) -> Option<f64> {
        mean_of(self.values.iter().flatten().copied())
    }

    pub fn group_mean(&self, users: &[usize]) -> Option<f64> {
        mean_of(users.iter().filter_map(|&u| self.get(u)))
    }
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}
