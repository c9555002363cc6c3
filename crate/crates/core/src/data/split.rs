use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::graph::{Edge, IdMap, InteractionGraph};
use super::ingest::Interaction;
use crate::error::{Error, Result};

/// Fractions of each user's history routed to validation and test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub valid: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self { valid: 0.1, test: 0.2 }
    }
}

pub(crate) fn round_half_up(x: f64) -> usize {
    // slack absorbs representation error such as 0.35 * 10 = 3.4999999999999996
    (x + 0.5 + 1e-9).floor().max(0.0) as usize
}

/// Train/validation/test graphs sharing one user and item index space.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: InteractionGraph,
    pub valid: InteractionGraph,
    pub test: InteractionGraph,
}

/// The part of a split that model selection and augmentation may see.
#[derive(Debug, Clone, Copy)]
pub struct TrainValid<'a> {
    pub train: &'a InteractionGraph,
    pub valid: &'a InteractionGraph,
}

impl DatasetSplit {
    pub fn train_valid(&self) -> TrainValid<'_> {
        TrainValid {
            train: &self.train,
            valid: &self.valid,
        }
    }

    pub fn n_users(&self) -> usize {
        self.train.n_users()
    }

    pub fn n_items(&self) -> usize {
        self.train.n_items()
    }
}

/// Dense index maps over the keys present in `interactions`, keys sorted.
pub fn index_maps(interactions: &[Interaction]) -> Result<(Arc<IdMap>, Arc<IdMap>)> {
    let users: BTreeSet<&str> = interactions.iter().map(|x| x.user_id.as_str()).collect();
    let items: BTreeSet<&str> = interactions.iter().map(|x| x.item_id.as_str()).collect();
    Ok((
        Arc::new(IdMap::from_keys(users.into_iter().map(str::to_string).collect())?),
        Arc::new(IdMap::from_keys(items.into_iter().map(str::to_string).collect())?),
    ))
}

/// Per-user sizes `(train, valid, test)` for a history of length `n`.
pub fn split_sizes(n: usize, ratios: SplitRatios) -> (usize, usize, usize) {
    let n_test = round_half_up(ratios.test * n as f64).max(1);
    let n_valid = round_half_up(ratios.valid * n as f64).max(1);
    (n.saturating_sub(n_test + n_valid), n_valid, n_test)
}

/// Chronological per-user split: oldest interactions train, newest test.
/// Timestamp ties are ordered by item index.
pub fn temporal_split(
    interactions: &[Interaction],
    has_timestamps: bool,
    ratios: SplitRatios,
) -> Result<DatasetSplit> {
    if interactions.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let (users, items) = index_maps(interactions)?;
    let mut per_user: BTreeMap<usize, Vec<Edge>> = BTreeMap::new();
    for x in interactions {
        let user = users.index_of(&x.user_id).unwrap();
        let item = items.index_of(&x.item_id).unwrap();
        per_user.entry(user).or_default().push(Edge {
            user,
            item,
            timestamp: x.timestamp,
        });
    }
    let (mut train, mut valid, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for (user, mut hist) in per_user {
        // duplicates were merged upstream; repeat here so the split never double counts
        hist.sort_by_key(|e| (e.item, e.timestamp));
        hist.dedup_by_key(|e| e.item);
        if hist.len() < 3 {
            return Err(Error::TooFewInteractions(
                users.key_of(user).unwrap_or("?").to_string(),
            ));
        }
        hist.sort_by_key(|e| (e.timestamp, e.item));
        let (n_train, n_valid, _) = split_sizes(hist.len(), ratios);
        let mut it = hist.into_iter();
        train.extend(it.by_ref().take(n_train));
        valid.extend(it.by_ref().take(n_valid));
        test.extend(it);
    }
    Ok(DatasetSplit {
        train: InteractionGraph::new(users.clone(), items.clone(), train, has_timestamps)?,
        valid: InteractionGraph::new(users.clone(), items.clone(), valid, has_timestamps)?,
        test: InteractionGraph::new(users, items, test, has_timestamps)?,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct SplitMeta {
    has_timestamps: bool,
    n_users: usize,
    n_items: usize,
}

fn write_ids(path: &Path, ids: &IdMap) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "idx\tid")?;
    for (i, k) in ids.keys().iter().enumerate() {
        writeln!(w, "{i}\t{k}")?;
    }
    w.flush()?;
    Ok(())
}

fn read_ids(path: &Path) -> Result<IdMap> {
    let text = fs::read_to_string(path)?;
    let mut keys = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        let (idx, key) = line.split_once('\t').ok_or_else(|| Error::Row {
            path: path.to_path_buf(),
            line: lineno + 1,
            message: "expected `idx<TAB>id`".into(),
        })?;
        if idx.parse::<usize>().ok() != Some(keys.len()) {
            return Err(Error::Row {
                path: path.to_path_buf(),
                line: lineno + 1,
                message: format!("index `{idx}` out of sequence"),
            });
        }
        keys.push(key.to_string());
    }
    IdMap::from_keys(keys)
}

fn write_edges(path: &Path, g: &InteractionGraph) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "user_idx\titem_idx\ttimestamp")?;
    for e in g.edges() {
        writeln!(w, "{}\t{}\t{}", e.user, e.item, e.timestamp)?;
    }
    w.flush()?;
    Ok(())
}

fn read_edges(path: &Path) -> Result<Vec<Edge>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        let row = || Error::Row {
            path: path.to_path_buf(),
            line: lineno + 1,
            message: "expected `user_idx<TAB>item_idx<TAB>timestamp`".into(),
        };
        let mut f = line.split('\t');
        let mut next = || f.next().ok_or_else(row)?.parse::<i64>().map_err(|_| row());
        let (u, i, t) = (next()?, next()?, next()?);
        out.push(Edge {
            user: u as usize,
            item: i as usize,
            timestamp: t,
        });
    }
    Ok(out)
}

/// Writes `users.tsv`, `items.tsv`, `train.tsv`, `valid.tsv`, `test.tsv` and `split.json`.
pub fn export_split(split: &DatasetSplit, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_ids(&dir.join("users.tsv"), split.train.user_ids())?;
    write_ids(&dir.join("items.tsv"), split.train.item_ids())?;
    write_edges(&dir.join("train.tsv"), &split.train)?;
    write_edges(&dir.join("valid.tsv"), &split.valid)?;
    write_edges(&dir.join("test.tsv"), &split.test)?;
    let meta = SplitMeta {
        has_timestamps: split.train.has_timestamps(),
        n_users: split.n_users(),
        n_items: split.n_items(),
    };
    fs::write(dir.join("split.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

pub fn import_split(dir: &Path) -> Result<DatasetSplit> {
    let meta: SplitMeta = serde_json::from_str(&fs::read_to_string(dir.join("split.json"))?)?;
    let users = Arc::new(read_ids(&dir.join("users.tsv"))?);
    let items = Arc::new(read_ids(&dir.join("items.tsv"))?);
    if users.len() != meta.n_users || items.len() != meta.n_items {
        return Err(Error::Contract("split manifest size mismatch".into()));
    }
    let load = |name: &str| -> Result<InteractionGraph> {
        InteractionGraph::new(
            users.clone(),
            items.clone(),
            read_edges(&dir.join(name))?,
            meta.has_timestamps,
        )
    };
    Ok(DatasetSplit {
        train: load("train.tsv")?,
        valid: load("valid.tsv")?,
        test: load("test.tsv")?,
    })
}
