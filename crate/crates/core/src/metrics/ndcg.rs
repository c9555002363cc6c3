use serde::{Deserialize, Serialize};

use super::{RelevanceJudgements, UtilityVector};
use crate::data::{GroupId, GroupPartition};
use crate::error::{Error, Result};

pub fn dcg(list: &[usize], relevant: &[usize], k: usize) -> f64 {
    list.iter()
        .take(k)
        .enumerate()
        .filter(|(_, item)| relevant.binary_search(item).is_ok())
        .map(|(pos, _)| 1.0 / ((pos + 2) as f64).log2())
        .sum()
}

pub fn idcg(n_relevant: usize, k: usize) -> f64 {
    (0..n_relevant.min(k)).map(|pos| 1.0 / ((pos + 2) as f64).log2()).sum()
}

/// Binary-relevance NDCG@k of each user's ranked list.
pub fn ndcg_at_k(lists: &[Vec<usize>], judgements: &RelevanceJudgements, k: usize) -> UtilityVector {
    let values = lists
        .iter()
        .enumerate()
        .map(|(u, list)| {
            let rel = judgements.relevant(u);
            if rel.is_empty() {
                None
            } else {
                Some(dcg(list, rel, k) / idcg(rel.len(), k))
            }
        })
        .collect();
    UtilityVector::new(k, values)
}

/// `|mean(group 1) - mean(group 2)|` over evaluated users.
pub fn delta_ndcg(utilities: &UtilityVector, partition: &GroupPartition) -> Result<f64> {
    Ok(group_summary(utilities, partition)?.delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub overall: f64,
    pub group_1: f64,
    pub group_2: f64,
    pub delta: f64,
}

impl GroupSummary {
    pub fn group(&self, g: GroupId) -> f64 {
        match g {
            GroupId::First => self.group_1,
            GroupId::Second => self.group_2,
        }
    }
}

pub fn group_summary(utilities: &UtilityVector, partition: &GroupPartition) -> Result<GroupSummary> {
    let mean = |g: GroupId| {
        utilities
            .group_mean(partition.group(g))
            .ok_or_else(|| Error::EmptyGroup(partition.name(g).to_string()))
    };
    let (group_1, group_2) = (mean(GroupId::First)?, mean(GroupId::Second)?);
    Ok(GroupSummary {
        overall: utilities.mean().unwrap_or(0.0),
        group_1,
        group_2,
        delta: (group_1 - group_2).abs(),
    })
}
