use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::graph::IdMap;
use super::ingest::AttributeTable;
use crate::error::{Error, Result};
use crate::metrics::UtilityVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupId {
    First,
    Second,
}

impl GroupId {
    pub fn other(self) -> Self {
        match self {
            GroupId::First => GroupId::Second,
            GroupId::Second => GroupId::First,
        }
    }

    fn slot(self) -> usize {
        match self {
            GroupId::First => 0,
            GroupId::Second => 1,
        }
    }
}

/// Binary demographic split of the user index space.
///
/// Users without the attribute belong to neither group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPartition {
    pub attribute: String,
    pub names: [String; 2],
    groups: [Vec<usize>; 2],
    advantaged: Option<GroupId>,
}

impl GroupPartition {
    pub fn new(attribute: &str, names: [String; 2], first: Vec<usize>, second: Vec<usize>) -> Result<Self> {
        let a: BTreeSet<usize> = first.into_iter().collect();
        let b: BTreeSet<usize> = second.into_iter().collect();
        if a.intersection(&b).next().is_some() {
            return Err(Error::Contract("demographic groups overlap".into()));
        }
        if a.is_empty() || b.is_empty() {
            return Err(Error::DegeneratePartition(format!(
                "attribute `{attribute}` yields an empty group"
            )));
        }
        Ok(Self {
            attribute: attribute.to_string(),
            names,
            groups: [a.into_iter().collect(), b.into_iter().collect()],
            advantaged: None,
        })
    }

    pub fn group(&self, g: GroupId) -> &[usize] {
        &self.groups[g.slot()]
    }

    pub fn name(&self, g: GroupId) -> &str {
        &self.names[g.slot()]
    }

    pub fn group_of(&self, user: usize) -> Option<GroupId> {
        if self.groups[0].binary_search(&user).is_ok() {
            Some(GroupId::First)
        } else if self.groups[1].binary_search(&user).is_ok() {
            Some(GroupId::Second)
        } else {
            None
        }
    }

    pub fn advantaged(&self) -> Option<GroupId> {
        self.advantaged
    }

    pub fn is_labeled(&self) -> bool {
        self.advantaged.is_some()
    }

    pub fn with_advantaged(mut self, g: GroupId) -> Self {
        self.advantaged = Some(g);
        self
    }

    fn labeled(&self) -> Result<GroupId> {
        self.advantaged
            .ok_or_else(|| Error::Contract("partition has no advantaged label".into()))
    }

    pub fn advantaged_users(&self) -> Result<&[usize]> {
        Ok(self.group(self.labeled()?))
    }

    pub fn disadvantaged_users(&self) -> Result<&[usize]> {
        Ok(self.group(self.labeled()?.other()))
    }

    pub fn is_disadvantaged(&self, user: usize) -> bool {
        match (self.advantaged, self.group_of(user)) {
            (Some(a), Some(g)) => g != a,
            _ => false,
        }
    }
}

/// Splits users on `gender` (two labels, sorted) or `age` (younger `<= age_threshold`).
pub fn partition_users(
    attributes: &AttributeTable,
    users: &IdMap,
    attribute: &str,
    age_threshold: f64,
) -> Result<GroupPartition> {
    match attribute {
        "gender" => {
            let labels: BTreeSet<&str> = users
                .keys()
                .iter()
                .filter_map(|k| attributes.get(k)?.gender.as_deref())
                .collect();
            if labels.len() != 2 {
                return Err(Error::DegeneratePartition(format!(
                    "gender needs exactly two labels, found {labels:?}"
                )));
            }
            let labels: Vec<&str> = labels.into_iter().collect();
            let members = |label: &str| -> Vec<usize> {
                (0..users.len())
                    .filter(|&u| {
                        attributes
                            .get(users.key_of(u).unwrap())
                            .and_then(|r| r.gender.as_deref())
                            == Some(label)
                    })
                    .collect()
            };
            GroupPartition::new(
                attribute,
                [labels[0].to_string(), labels[1].to_string()],
                members(labels[0]),
                members(labels[1]),
            )
        }
        "age" => {
            let mut younger = Vec::new();
            let mut older = Vec::new();
            for (u, key) in users.keys().iter().enumerate() {
                match attributes.get(key).and_then(|r| r.age) {
                    Some(a) if a <= age_threshold => younger.push(u),
                    Some(_) => older.push(u),
                    None => {}
                }
            }
            GroupPartition::new(
                attribute,
                ["younger".to_string(), "older".to_string()],
                younger,
                older,
            )
        }
        other => Err(Error::Config(format!("unknown attribute `{other}`"))),
    }
}

/// Marks the group with the higher mean validation utility as advantaged; ties favour group one.
pub fn label_advantage(partition: &GroupPartition, utilities: &UtilityVector) -> Result<GroupPartition> {
    let first = utilities.group_mean(partition.group(GroupId::First));
    let second = utilities.group_mean(partition.group(GroupId::Second));
    let (first, second) = match (first, second) {
        (Some(a), Some(b)) => (a, b),
        (None, _) => return Err(Error::EmptyGroup(partition.name(GroupId::First).into())),
        (_, None) => return Err(Error::EmptyGroup(partition.name(GroupId::Second).into())),
    };
    let adv = if first >= second {
        GroupId::First
    } else {
        GroupId::Second
    };
    Ok(partition.clone().with_advantaged(adv))
}
