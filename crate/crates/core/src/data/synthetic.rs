//! Seeded synthetic corpora with a controllable utility gap between two groups.
//!
//! The planted-bias construction splits the catalogue into two item blocks.
//! Majority users live entirely inside block A. Minority users train mostly
//! on popular block-A items with a handful of block-B items, while their most
//! recent interactions (which land in validation and test) are block-B items.
//! Block B is therefore under-connected in training and the minority group
//! receives lower utility from a graph recommender trained on it.

use rand::seq::index::sample_weighted;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ingest::{AttributeRecord, AttributeTable, Interaction};
use super::split::{split_sizes, SplitRatios};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n_users: usize,
    pub n_items: usize,
    /// Share of users in the majority group.
    pub majority_fraction: f64,
    /// Share of items in block A.
    pub block_a_fraction: f64,
    pub min_interactions: usize,
    pub max_interactions: usize,
    /// Share of a minority user's training history drawn from block B.
    pub minority_block_b_train_share: f64,
    /// When false both groups follow the majority behaviour.
    pub planted_bias: bool,
    pub zipf_exponent: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_users: 200,
            n_items: 150,
            majority_fraction: 0.6,
            block_a_fraction: 0.47,
            min_interactions: 15,
            max_interactions: 25,
            minority_block_b_train_share: 0.4,
            planted_bias: true,
            zipf_exponent: 0.8,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub interactions: Vec<Interaction>,
    pub attributes: AttributeTable,
}

pub const MAJORITY_LABEL: &str = "a";
pub const MINORITY_LABEL: &str = "b";

fn draw(rng: &mut ChaCha8Rng, pool: &[usize], weights: &[f64], n: usize) -> Vec<usize> {
    let n = n.min(pool.len());
    let picked = sample_weighted(rng, pool.len(), |j| weights[j], n)
        .expect("positive weights");
    picked.into_iter().map(|j| pool[j]).collect()
}

pub fn generate(cfg: &SyntheticConfig) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_a_items = ((cfg.n_items as f64) * cfg.block_a_fraction).round() as usize;
    let n_a_items = n_a_items.clamp(1, cfg.n_items - 1);
    let block_a: Vec<usize> = (0..n_a_items).collect();
    let block_b: Vec<usize> = (n_a_items..cfg.n_items).collect();
    let zipf = |len: usize| -> Vec<f64> {
        (0..len)
            .map(|r| 1.0 / ((r + 1) as f64).powf(cfg.zipf_exponent))
            .collect()
    };
    let (wa, wb) = (zipf(block_a.len()), zipf(block_b.len()));
    let n_majority = ((cfg.n_users as f64) * cfg.majority_fraction).round() as usize;

    let mut interactions = Vec::new();
    let mut attributes = AttributeTable::new();
    for u in 0..cfg.n_users {
        let user_id = format!("u{u:04}");
        let minority = u >= n_majority;
        let n = rng.random_range(cfg.min_interactions..=cfg.max_interactions);
        let history: Vec<usize> = if minority && cfg.planted_bias {
            let (n_train, _, _) = split_sizes(n, SplitRatios::default());
            let n_train_b = ((n_train as f64) * cfg.minority_block_b_train_share).round() as usize;
            let n_late = n - n_train;
            let b_items = draw(&mut rng, &block_b, &wb, n_train_b + n_late);
            let a_items = draw(&mut rng, &block_a, &wa, n_train - n_train_b);
            // first train items (A and a few B), then the remaining B items last
            let mut train: Vec<usize> = a_items;
            train.extend_from_slice(&b_items[..n_train_b]);
            let mut order: Vec<usize> = (0..train.len()).collect();
            for i in (1..order.len()).rev() {
                order.swap(i, rng.random_range(0..=i));
            }
            let mut h: Vec<usize> = order.into_iter().map(|j| train[j]).collect();
            h.extend_from_slice(&b_items[n_train_b..]);
            h
        } else {
            draw(&mut rng, &block_a, &wa, n)
        };
        let start: i64 = 1_000_000 + rng.random_range(0..50_000);
        let mut t = start;
        for item in history {
            t += rng.random_range(1..600);
            interactions.push(Interaction {
                user_id: user_id.clone(),
                item_id: format!("i{item:04}"),
                timestamp: t,
                rating: None,
            });
        }
        attributes.insert(
            user_id,
            AttributeRecord {
                gender: Some(if minority { MINORITY_LABEL } else { MAJORITY_LABEL }.to_string()),
                age: Some(if minority { 40.0 } else { 25.0 }),
            },
        );
    }
    SyntheticCorpus {
        interactions,
        attributes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_seeded() {
        let a = generate(&SyntheticConfig::default());
        let b = generate(&SyntheticConfig::default());
        assert_eq!(a.interactions, b.interactions);
        assert_eq!(a.attributes.len(), 200);
    }

    #[test]
    fn minority_late_history_is_block_b() {
        let cfg = SyntheticConfig::default();
        let c = generate(&cfg);
        let last = c
            .interactions
            .iter()
            .filter(|x| x.user_id == "u0199")
            .max_by_key(|x| x.timestamp)
            .unwrap();
        let item: usize = last.item_id[1..].parse().unwrap();
        assert!(item >= 70);
    }
}
