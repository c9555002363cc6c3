use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Bijection between original string keys and dense indices.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IdMap {
    keys: Vec<String>,
    index: HashMap<String, usize>,
}

impl IdMap {
    pub fn from_keys(keys: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(keys.len());
        for (i, k) in keys.iter().enumerate() {
            if index.insert(k.clone(), i).is_some() {
                return Err(Error::Contract(format!("duplicate id `{k}`")));
            }
        }
        Ok(Self { keys, index })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn index_of(&self, key: &str) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn key_of(&self, idx: usize) -> Option<&str> {
        self.keys.get(idx).map(String::as_str)
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub user: usize,
    pub item: usize,
    pub timestamp: i64,
}

/// Undirected bipartite user-item graph with one edge per observed (user, item) pair.
///
/// Edges are kept sorted by `(user, item)`; per-node neighbour lists are stored
/// in compressed form so that lookups and degree queries are O(1)/O(log d).
#[derive(Debug, Clone)]
pub struct InteractionGraph {
    n_users: usize,
    n_items: usize,
    edges: Vec<Edge>,
    user_offsets: Vec<usize>,
    item_offsets: Vec<usize>,
    /// Edge positions grouped by item, users ascending.
    item_edges: Vec<usize>,
    user_ids: Arc<IdMap>,
    item_ids: Arc<IdMap>,
    has_timestamps: bool,
}

impl PartialEq for InteractionGraph {
    fn eq(&self, other: &Self) -> bool {
        self.n_users == other.n_users
            && self.n_items == other.n_items
            && self.edges == other.edges
            && self.has_timestamps == other.has_timestamps
            && self.user_ids == other.user_ids
            && self.item_ids == other.item_ids
    }
}

impl InteractionGraph {
    /// Builds a graph over the given index spaces. Duplicate pairs keep the earliest timestamp.
    pub fn new(
        user_ids: Arc<IdMap>,
        item_ids: Arc<IdMap>,
        mut edges: Vec<Edge>,
        has_timestamps: bool,
    ) -> Result<Self> {
        let n_users = user_ids.len();
        let n_items = item_ids.len();
        for e in &edges {
            if e.user >= n_users || e.item >= n_items {
                return Err(Error::Contract(format!(
                    "edge ({}, {}) outside index space {n_users}x{n_items}",
                    e.user, e.item
                )));
            }
            if e.timestamp < 0 {
                return Err(Error::Contract(format!(
                    "negative timestamp on edge ({}, {})",
                    e.user, e.item
                )));
            }
        }
        edges.sort_unstable_by_key(|e| (e.user, e.item, e.timestamp));
        edges.dedup_by(|b, a| a.user == b.user && a.item == b.item);

        let mut user_offsets = vec![0usize; n_users + 1];
        let mut item_counts = vec![0usize; n_items + 1];
        for e in &edges {
            user_offsets[e.user + 1] += 1;
            item_counts[e.item + 1] += 1;
        }
        for u in 0..n_users {
            user_offsets[u + 1] += user_offsets[u];
        }
        for i in 0..n_items {
            item_counts[i + 1] += item_counts[i];
        }
        let item_offsets = item_counts.clone();
        let mut cursor = item_counts;
        let mut item_edges = vec![0usize; edges.len()];
        for (pos, e) in edges.iter().enumerate() {
            item_edges[cursor[e.item]] = pos;
            cursor[e.item] += 1;
        }

        Ok(Self {
            n_users,
            n_items,
            edges,
            user_offsets,
            item_offsets,
            item_edges,
            user_ids,
            item_ids,
            has_timestamps,
        })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_nodes(&self) -> usize {
        self.n_users + self.n_items
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn has_timestamps(&self) -> bool {
        self.has_timestamps
    }

    pub fn user_ids(&self) -> &Arc<IdMap> {
        &self.user_ids
    }

    pub fn item_ids(&self) -> &Arc<IdMap> {
        &self.item_ids
    }

    /// Edges of `user`, items ascending.
    pub fn user_edges(&self, user: usize) -> &[Edge] {
        &self.edges[self.user_offsets[user]..self.user_offsets[user + 1]]
    }

    pub fn user_items(&self, user: usize) -> impl Iterator<Item = usize> + '_ {
        self.user_edges(user).iter().map(|e| e.item)
    }

    /// Edges of `item`, users ascending.
    pub fn item_edges(&self, item: usize) -> impl Iterator<Item = &Edge> + '_ {
        self.item_edges[self.item_offsets[item]..self.item_offsets[item + 1]]
            .iter()
            .map(move |&pos| &self.edges[pos])
    }

    pub fn item_users(&self, item: usize) -> impl Iterator<Item = usize> + '_ {
        self.item_edges(item).map(|e| e.user)
    }

    pub fn user_degree(&self, user: usize) -> usize {
        self.user_offsets[user + 1] - self.user_offsets[user]
    }

    pub fn item_degree(&self, item: usize) -> usize {
        self.item_offsets[item + 1] - self.item_offsets[item]
    }

    pub fn user_degrees(&self) -> Vec<usize> {
        (0..self.n_users).map(|u| self.user_degree(u)).collect()
    }

    pub fn item_degrees(&self) -> Vec<usize> {
        (0..self.n_items).map(|i| self.item_degree(i)).collect()
    }

    pub fn has_edge(&self, user: usize, item: usize) -> bool {
        user < self.n_users
            && self
                .user_edges(user)
                .binary_search_by_key(&item, |e| e.item)
                .is_ok()
    }

    pub fn max_timestamp(&self) -> Option<i64> {
        self.edges.iter().map(|e| e.timestamp).max()
    }

    /// Graph with the same index spaces and a different edge set.
    pub fn with_edges(&self, edges: Vec<Edge>) -> Result<Self> {
        Self::new(
            self.user_ids.clone(),
            self.item_ids.clone(),
            edges,
            self.has_timestamps,
        )
    }

    /// Dense `|U| x |I|` implicit feedback matrix, row-major.
    pub fn feedback_dense(&self) -> Vec<f64> {
        let mut r = vec![0.0; self.n_users * self.n_items];
        for e in &self.edges {
            r[e.user * self.n_items + e.item] = 1.0;
        }
        r
    }
}

/// Symmetric sparse adjacency over `|U| + |I|` nodes in CSR form.
///
/// Users occupy rows `0..|U|`, items rows `|U|..|U|+|I|`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseAdjacency {
    pub n: usize,
    pub row_offsets: Vec<usize>,
    pub cols: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseAdjacency {
    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let range = self.row_offsets[row]..self.row_offsets[row + 1];
        match self.cols[range.clone()].binary_search(&col) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_offsets[row]..self.row_offsets[row + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|r| self.row(r).all(|(c, v)| self.get(c, r) == v))
    }
}

/// Block adjacency `[[0, R], [R^T, 0]]` of the bipartite graph.
pub fn build_adjacency(graph: &InteractionGraph) -> SparseAdjacency {
    let nu = graph.n_users();
    let n = graph.n_nodes();
    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(2 * graph.n_edges());
    row_offsets.push(0);
    for u in 0..nu {
        cols.extend(graph.user_items(u).map(|i| nu + i));
        row_offsets.push(cols.len());
    }
    for i in 0..graph.n_items() {
        cols.extend(graph.item_users(i));
        row_offsets.push(cols.len());
    }
    let values = vec![1.0; cols.len()];
    SparseAdjacency {
        n,
        row_offsets,
        cols,
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn ids(prefix: &str, n: usize) -> Arc<IdMap> {
        Arc::new(IdMap::from_keys((0..n).map(|i| format!("{prefix}{i}")).collect()).unwrap())
    }

    fn graph(nu: usize, ni: usize, pairs: &[(usize, usize)]) -> InteractionGraph {
        let edges = pairs
            .iter()
            .map(|&(user, item)| Edge {
                user,
                item,
                timestamp: 0,
            })
            .collect();
        InteractionGraph::new(ids("u", nu), ids("i", ni), edges, true).unwrap()
    }

    #[test]
    fn single_edge_adjacency_layout() {
        let g = graph(2, 3, &[(0, 0)]);
        let a = build_adjacency(&g);
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(0, 2), 1.0);
        assert_eq!(a.get(2, 0), 1.0);
    }

    #[test]
    fn empty_graph_has_zero_adjacency() {
        let g = graph(3, 3, &[]);
        let a = build_adjacency(&g);
        assert_eq!(a.nnz(), 0);
        assert!(a.is_symmetric());
    }

    #[test]
    fn degrees_match_feedback_sums() {
        let g = graph(3, 4, &[(0, 1), (0, 3), (2, 1), (1, 0), (0, 1)]);
        assert_eq!(g.n_edges(), 4);
        let r = g.feedback_dense();
        for u in 0..3 {
            let s: f64 = r[u * 4..(u + 1) * 4].iter().sum();
            assert_eq!(s as usize, g.user_degree(u));
        }
        for i in 0..4 {
            let s: f64 = (0..3).map(|u| r[u * 4 + i]).sum();
            assert_eq!(s as usize, g.item_degree(i));
        }
        assert!(g.has_edge(2, 1));
        assert!(!g.has_edge(2, 0));
    }

    #[test]
    fn duplicate_pairs_keep_earliest_timestamp() {
        let edges = vec![
            Edge { user: 0, item: 0, timestamp: 9 },
            Edge { user: 0, item: 0, timestamp: 3 },
        ];
        let g = InteractionGraph::new(ids("u", 1), ids("i", 1), edges, true).unwrap();
        assert_eq!(g.edges(), &[Edge { user: 0, item: 0, timestamp: 3 }]);
    }

    #[test]
    fn id_map_round_trips() {
        let m = ids("x", 5);
        for i in 0..5 {
            assert_eq!(m.index_of(m.key_of(i).unwrap()), Some(i));
        }
    }
}
