use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::InteractionGraph;
use crate::error::{Error, Result};

pub const EDGES_FILE: &str = "added_edges.tsv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Where an augmented graph came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationManifest {
    pub model: String,
    pub policy: String,
    pub psi_u: f64,
    pub psi_i: f64,
    pub scenario: String,
    pub seed: u64,
    pub best_epoch: usize,
    pub n_added: usize,
    pub edges_file: String,
}

/// Writes the added edges as original `(user_id, item_id)` keys plus a manifest.
pub fn export_augmented(
    dir: &Path,
    graph: &InteractionGraph,
    added: &[(usize, usize)],
    manifest: &AugmentationManifest,
) -> Result<()> {
    export_augmented_keys(dir, &edge_keys(graph, added)?, manifest)
}

/// Original `(user_id, item_id)` keys of index pairs in `graph`.
pub fn edge_keys(graph: &InteractionGraph, edges: &[(usize, usize)]) -> Result<Vec<(String, String)>> {
    edges
        .iter()
        .map(|&(u, i)| {
            let user = graph
                .user_ids()
                .key_of(u)
                .ok_or_else(|| Error::Contract(format!("unknown user index {u}")))?;
            let item = graph
                .item_ids()
                .key_of(i)
                .ok_or_else(|| Error::Contract(format!("unknown item index {i}")))?;
            Ok((user.to_string(), item.to_string()))
        })
        .collect()
}

/// Like [`export_augmented`] for edges already mapped to original keys.
pub fn export_augmented_keys(dir: &Path, edges: &[(String, String)], manifest: &AugmentationManifest) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut f = fs::File::create(dir.join(EDGES_FILE))?;
    writeln!(f, "user_id\titem_id")?;
    for (user, item) in edges {
        writeln!(f, "{user}\t{item}")?;
    }
    let manifest = AugmentationManifest {
        n_added: edges.len(),
        edges_file: EDGES_FILE.into(),
        ..manifest.clone()
    };
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

/// Reads an exported augmentation back into indices of `graph`.
pub fn import_augmented(dir: &Path, graph: &InteractionGraph) -> Result<(AugmentationManifest, Vec<(usize, usize)>)> {
    let manifest: AugmentationManifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
    let path = dir.join(&manifest.edges_file);
    let text = fs::read_to_string(&path)?;
    let mut edges = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let row_error = |message: String| Error::Row {
            path: path.clone(),
            line: n + 1,
            message,
        };
        let (user, item) = line
            .split_once('\t')
            .ok_or_else(|| row_error("expected two tab-separated fields".into()))?;
        let u = graph
            .user_ids()
            .index_of(user)
            .ok_or_else(|| row_error(format!("unknown user `{user}`")))?;
        let i = graph
            .item_ids()
            .index_of(item)
            .ok_or_else(|| row_error(format!("unknown item `{item}`")))?;
        edges.push((u, i));
    }
    if edges.len() != manifest.n_added {
        return Err(Error::Contract(format!(
            "manifest lists {} edges, file holds {}",
            manifest.n_added,
            edges.len()
        )));
    }
    Ok((manifest, edges))
}
