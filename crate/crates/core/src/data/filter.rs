use std::collections::HashMap;

use super::ingest::Interaction;
use crate::error::{Error, Result};

/// Drops users with fewer than `k_user` interactions.
///
/// Only users are degree-constrained, so one pass reaches the fixpoint:
/// removing a user never lowers another user's degree.
pub fn k_core_filter(interactions: Vec<Interaction>, k_user: usize) -> Result<Vec<Interaction>> {
    k_core_filter_two_sided(interactions, k_user, None)
}

/// As [`k_core_filter`], optionally also requiring every item to keep `k_item`
/// interactions; iterates until neither side changes.
pub fn k_core_filter_two_sided(
    mut interactions: Vec<Interaction>,
    k_user: usize,
    k_item: Option<usize>,
) -> Result<Vec<Interaction>> {
    if k_user == 0 {
        return Err(Error::Parameter("k_user must be >= 1".into()));
    }
    loop {
        let before = interactions.len();
        let mut user_deg: HashMap<&str, usize> = HashMap::new();
        let mut item_deg: HashMap<&str, usize> = HashMap::new();
        for x in &interactions {
            *user_deg.entry(&x.user_id).or_default() += 1;
            *item_deg.entry(&x.item_id).or_default() += 1;
        }
        let keep: Vec<bool> = interactions
            .iter()
            .map(|x| {
                user_deg[x.user_id.as_str()] >= k_user
                    && k_item.is_none_or(|k| item_deg[x.item_id.as_str()] >= k)
            })
            .collect();
        let mut flags = keep.into_iter();
        interactions.retain(|_| flags.next().unwrap());
        if interactions.len() == before {
            break;
        }
    }
    if interactions.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(interactions)
}
