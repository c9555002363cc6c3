//! Sampling policies that restrict which disadvantaged users and which items
//! augmentation may touch, and the candidate edge sets they induce.

mod samplers;

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use samplers::{
    bfs_distances, pagerank, sample_fr, sample_ip, sample_ir, sample_it, sample_ld, sample_pr, sample_size, sample_sp,
    sample_zn, PAGERANK_MAX_ITERATIONS, PAGERANK_TOL,
};

use crate::data::{GroupPartition, InteractionGraph};
use crate::error::{Error, Result};
use crate::metrics::{jaccard, UtilityVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UserPolicy {
    /// Zero validation NDCG.
    ZN,
    /// Least interactions.
    LD,
    /// Furthest from the advantaged group.
    FR,
    /// Sparsest (niche) items.
    SP,
    /// Most recent interaction.
    IR,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ItemPolicy {
    /// Preferred by the disadvantaged group.
    IP,
    /// Longest interaction time span.
    IT,
    /// Highest pagerank.
    PR,
}

impl UserPolicy {
    pub const ALL: [UserPolicy; 5] = [UserPolicy::ZN, UserPolicy::LD, UserPolicy::FR, UserPolicy::SP, UserPolicy::IR];

    pub fn as_str(self) -> &'static str {
        match self {
            UserPolicy::ZN => "ZN",
            UserPolicy::LD => "LD",
            UserPolicy::FR => "FR",
            UserPolicy::SP => "SP",
            UserPolicy::IR => "IR",
        }
    }
}

impl ItemPolicy {
    pub const ALL: [ItemPolicy; 3] = [ItemPolicy::IP, ItemPolicy::IT, ItemPolicy::PR];

    pub fn as_str(self) -> &'static str {
        match self {
            ItemPolicy::IP => "IP",
            ItemPolicy::IT => "IT",
            ItemPolicy::PR => "PR",
        }
    }
}

impl fmt::Display for UserPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for ItemPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for UserPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        UserPolicy::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown user policy `{s}`")))
    }
}

impl FromStr for ItemPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ItemPolicy::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown item policy `{s}`")))
    }
}

/// Which sampled sets restrict the candidate edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    #[serde(rename = "U")]
    Users,
    #[serde(rename = "I")]
    Items,
    #[serde(rename = "U+I")]
    UsersAndItems,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Users => "U",
            Scenario::Items => "I",
            Scenario::UsersAndItems => "U+I",
        }
    }

    /// The scenario implied by which policies are set.
    pub fn for_policies(user: Option<UserPolicy>, item: Option<ItemPolicy>) -> Option<Scenario> {
        match (user, item) {
            (Some(_), Some(_)) => Some(Scenario::UsersAndItems),
            (Some(_), None) => Some(Scenario::Users),
            (None, Some(_)) => Some(Scenario::Items),
            (None, None) => None,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    pub user_policy: Option<UserPolicy>,
    pub item_policy: Option<ItemPolicy>,
    pub psi_u: f64,
    pub psi_i: f64,
    pub pagerank_damping: f64,
    /// Distance charged for unreachable pairs in FR; `|U| + |I|` when unset.
    pub unreachable_distance_cap: Option<usize>,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            user_policy: None,
            item_policy: None,
            psi_u: 0.35,
            psi_i: 0.20,
            pagerank_damping: 0.85,
            unreachable_distance_cap: None,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, psi) in [("psi_u", self.psi_u), ("psi_i", self.psi_i)] {
            if !(psi > 0.0 && psi <= 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1], got {psi}")));
            }
        }
        if self.user_policy.is_none() && self.item_policy.is_none() {
            return Err(Error::Config("at least one sampling policy must be set".into()));
        }
        Ok(())
    }

    pub fn scenario(&self) -> Option<Scenario> {
        Scenario::for_policies(self.user_policy, self.item_policy)
    }

    /// Short label such as `ZN+IP`, `FR` or `PR`.
    pub fn label(&self) -> String {
        match (self.user_policy, self.item_policy) {
            (Some(u), Some(i)) => format!("{u}+{i}"),
            (Some(u), None) => u.to_string(),
            (None, Some(i)) => i.to_string(),
            (None, None) => "none".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub user_policy: Option<UserPolicy>,
    pub item_policy: Option<ItemPolicy>,
    pub psi_u: f64,
    pub psi_i: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledSets {
    /// Sampled disadvantaged users, ascending; `None` when no user policy ran.
    pub users: Option<Vec<usize>>,
    /// Sampled items, ascending; `None` when no item policy ran.
    pub items: Option<Vec<usize>>,
    pub provenance: Provenance,
}

/// Runs the configured samplers on the training graph.
///
/// `utilities` are per-user validation NDCGs of the model, needed by ZN only.
pub fn sample(
    config: &PolicyConfig,
    train: &InteractionGraph,
    partition: &GroupPartition,
    utilities: Option<&UtilityVector>,
    seed: u64,
) -> Result<SampledSets> {
    config.validate()?;
    let users = match config.user_policy {
        None => None,
        Some(UserPolicy::ZN) => {
            let u = utilities.ok_or_else(|| Error::Contract("ZN needs validation utilities".into()))?;
            Some(sample_zn(partition, u)?)
        }
        Some(UserPolicy::LD) => Some(sample_ld(train, partition, config.psi_u)?),
        Some(UserPolicy::FR) => Some(sample_fr(train, partition, config.psi_u, config.unreachable_distance_cap)?),
        Some(UserPolicy::SP) => Some(sample_sp(train, partition, config.psi_u)?),
        Some(UserPolicy::IR) => Some(sample_ir(train, partition, config.psi_u)?),
    };
    let items = match config.item_policy {
        None => None,
        Some(ItemPolicy::IP) => Some(sample_ip(train, partition, config.psi_i)?),
        Some(ItemPolicy::IT) => Some(sample_it(train, config.psi_i)?),
        Some(ItemPolicy::PR) => Some(sample_pr(train, config.psi_i, config.pagerank_damping)?),
    };
    Ok(SampledSets {
        users,
        items,
        provenance: Provenance {
            user_policy: config.user_policy,
            item_policy: config.item_policy,
            psi_u: config.psi_u,
            psi_i: config.psi_i,
            seed,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateEdgeSet {
    /// Missing (user, item) pairs in lexicographic order; position `e` pairs with `p[e]`.
    pub edges: Vec<(usize, usize)>,
    pub scenario: Scenario,
}

impl CandidateEdgeSet {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// Missing edges of disadvantaged users, filtered by the sampled sets the scenario names.
pub fn build_candidates(
    graph: &InteractionGraph,
    partition: &GroupPartition,
    sampled: &SampledSets,
    scenario: Scenario,
) -> Result<CandidateEdgeSet> {
    let need_users = matches!(scenario, Scenario::Users | Scenario::UsersAndItems);
    let need_items = matches!(scenario, Scenario::Items | Scenario::UsersAndItems);
    let users: Vec<usize> = if need_users {
        let sampled = sampled
            .users
            .as_ref()
            .ok_or_else(|| Error::Contract(format!("scenario {scenario} needs a user sample")))?;
        sampled.iter().copied().filter(|&u| partition.is_disadvantaged(u)).collect()
    } else {
        partition.disadvantaged_users()?.to_vec()
    };
    let items: Vec<usize> = if need_items {
        sampled
            .items
            .clone()
            .ok_or_else(|| Error::Contract(format!("scenario {scenario} needs an item sample")))?
    } else {
        (0..graph.n_items()).collect()
    };
    let mut edges = Vec::new();
    for &u in &users {
        for &i in &items {
            if !graph.has_edge(u, i) {
                edges.push((u, i));
            }
        }
    }
    edges.sort_unstable();
    if edges.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    Ok(CandidateEdgeSet { edges, scenario })
}

/// A named sample over users or over items.
#[derive(Debug, Clone, PartialEq)]
pub enum NamedSample {
    Users(String, BTreeSet<usize>),
    Items(String, BTreeSet<usize>),
}

impl NamedSample {
    pub fn name(&self) -> &str {
        match self {
            NamedSample::Users(n, _) | NamedSample::Items(n, _) => n,
        }
    }

    fn set(&self) -> &BTreeSet<usize> {
        match self {
            NamedSample::Users(_, s) | NamedSample::Items(_, s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapMatrix {
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl OverlapMatrix {
    /// CSV with a header row and a leading name column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("policy");
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (n, row) in self.names.iter().zip(&self.values) {
            out.push_str(n);
            for v in row {
                out.push_str(&format!(",{v:.6}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Pairwise Jaccard similarity of samples drawn from one universe.
pub fn policy_overlap(samples: &[NamedSample]) -> Result<OverlapMatrix> {
    let users = samples.iter().filter(|s| matches!(s, NamedSample::Users(..))).count();
    if users != 0 && users != samples.len() {
        return Err(Error::Contract("cannot compare user samples with item samples".into()));
    }
    let values = samples
        .iter()
        .map(|a| samples.iter().map(|b| jaccard(a.set(), b.set())).collect())
        .collect();
    Ok(OverlapMatrix {
        names: samples.iter().map(|s| s.name().to_string()).collect(),
        values,
    })
}

/// Writes one index per line under a `#` provenance header.
pub fn export_sample(path: &Path, indices: &[usize], provenance: &Provenance) -> Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "# {}", serde_json::to_string(provenance)?)?;
    for i in indices {
        writeln!(f, "{i}")?;
    }
    Ok(())
}

pub fn import_sample(path: &Path) -> Result<(Vec<usize>, Option<Provenance>)> {
    let text = fs::read_to_string(path)?;
    let mut provenance = None;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if let Some(header) = line.strip_prefix('#') {
            provenance = serde_json::from_str(header.trim()).ok();
            continue;
        }
        if line.is_empty() {
            continue;
        }
        out.push(line.parse().map_err(|_| Error::Row {
            path: path.to_path_buf(),
            line: n + 1,
            message: format!("`{line}` is not an index"),
        })?);
    }
    Ok((out, provenance))
}
