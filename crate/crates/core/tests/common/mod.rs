#![allow(dead_code)]

pub mod checks;
pub mod oracles;

use std::collections::BTreeSet;

use fairgcf::data::{temporal_split, DatasetSplit, GroupId, GroupPartition, Interaction, SplitRatios};
use fairgcf::models::{train, ModelConfig, ModelKind, TrainedModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random timestamped interactions; ids sort in index order.
pub fn random_interactions(n_users: usize, n_items: usize, per_user: (usize, usize), seed: u64) -> Vec<Interaction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for u in 0..n_users {
        let n = rng.random_range(per_user.0..=per_user.1).min(n_items);
        let mut items = BTreeSet::new();
        // make sure every item appears at least once overall
        items.insert(u % n_items);
        while items.len() < n {
            items.insert(rng.random_range(0..n_items));
        }
        for i in items {
            out.push(Interaction {
                user_id: format!("u{u:04}"),
                item_id: format!("i{i:04}"),
                timestamp: rng.random_range(0..1_000_000),
                rating: None,
            });
        }
    }
    for i in 0..n_items {
        if !out.iter().any(|x| x.item_id == format!("i{i:04}")) {
            out.push(Interaction {
                user_id: format!("u{:04}", i % n_users),
                item_id: format!("i{i:04}"),
                timestamp: 0,
                rating: None,
            });
        }
    }
    out
}

pub fn random_split(n_users: usize, n_items: usize, per_user: (usize, usize), seed: u64) -> DatasetSplit {
    temporal_split(&random_interactions(n_users, n_items, per_user, seed), true, SplitRatios::default()).unwrap()
}

/// Even users in group one (advantaged), odd users in group two.
pub fn parity_partition(n_users: usize) -> GroupPartition {
    let first = (0..n_users).step_by(2).collect();
    let second = (1..n_users).step_by(2).collect();
    GroupPartition::new("gender", ["a".into(), "b".into()], first, second)
        .unwrap()
        .with_advantaged(GroupId::First)
}

pub fn trained(split: &DatasetSplit, kind: ModelKind, config: ModelConfig) -> TrainedModel {
    train(split.train_valid(), &ModelConfig { kind, ..config }).unwrap()
}

/// `limit` evenly spaced missing (user, item) pairs of disadvantaged users, lexicographic.
pub fn missing_pairs(split: &DatasetSplit, partition: &GroupPartition, limit: usize) -> Vec<(usize, usize)> {
    let mut all = Vec::new();
    for u in 0..split.n_users() {
        if !partition.is_disadvantaged(u) {
            continue;
        }
        for i in 0..split.n_items() {
            if !split.train.has_edge(u, i) {
                all.push((u, i));
            }
        }
    }
    if all.len() <= limit {
        return all;
    }
    (0..limit).map(|k| all[k * all.len() / limit]).collect()
}
