use ndarray::{s, Array2, ArrayView2, Axis};

use super::RelaxedGraph;

/// Symmetric-normalised propagation operator over a weighted bipartite graph.
///
/// Node `u` is a user, node `n_users + i` an item. Neighbour lists are
/// sorted by neighbour index, so inserting a zero-weight edge leaves every
/// floating-point sum unchanged.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub n_users: usize,
    pub n_items: usize,
    /// Undirected edges as (user, item) with their weights.
    pub edges: Vec<(usize, usize)>,
    pub weights: Vec<f64>,
    /// Weighted node degrees.
    pub degrees: Vec<f64>,
    /// `degree^-1/2`, zero for isolated nodes.
    pub inv_sqrt_deg: Vec<f64>,
    /// Per-edge normalised coefficient `w * c_u * c_i`.
    pub coeffs: Vec<f64>,
    offsets: Vec<usize>,
    /// (neighbour node, edge index) in CSR order.
    adjacency: Vec<(usize, usize)>,
}

impl Propagator {
    pub fn new(n_users: usize, n_items: usize, edges: Vec<(usize, usize)>, weights: Vec<f64>) -> Self {
        assert_eq!(edges.len(), weights.len());
        let n = n_users + n_items;
        let mut degrees = vec![0.0; n];
        let mut counts = vec![0usize; n + 1];
        for (&(u, i), &w) in edges.iter().zip(&weights) {
            degrees[u] += w;
            degrees[n_users + i] += w;
            counts[u + 1] += 1;
            counts[n_users + i + 1] += 1;
        }
        for v in 0..n {
            counts[v + 1] += counts[v];
        }
        let offsets = counts.clone();
        let mut cursor = counts;
        let mut adjacency = vec![(0usize, 0usize); 2 * edges.len()];
        for (e, &(u, i)) in edges.iter().enumerate() {
            adjacency[cursor[u]] = (n_users + i, e);
            cursor[u] += 1;
            adjacency[cursor[n_users + i]] = (u, e);
            cursor[n_users + i] += 1;
        }
        for v in 0..n {
            adjacency[offsets[v]..offsets[v + 1]].sort_unstable();
        }
        let inv_sqrt_deg: Vec<f64> = degrees
            .iter()
            .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
            .collect();
        let coeffs = edges
            .iter()
            .zip(&weights)
            .map(|(&(u, i), &w)| w * inv_sqrt_deg[u] * inv_sqrt_deg[n_users + i])
            .collect();
        Self {
            n_users,
            n_items,
            edges,
            weights,
            degrees,
            inv_sqrt_deg,
            coeffs,
            offsets,
            adjacency,
        }
    }

    pub fn from_relaxed(graph: &RelaxedGraph<'_>) -> Self {
        let base = graph.base;
        let mut edges: Vec<(usize, usize)> = base.edges().iter().map(|e| (e.user, e.item)).collect();
        let mut weights = vec![1.0; edges.len()];
        edges.extend_from_slice(graph.candidates);
        weights.extend_from_slice(&graph.weights);
        Self::new(base.n_users(), base.n_items(), edges, weights)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_users + self.n_items
    }

    /// (neighbour, edge index) pairs of `node`.
    pub fn neighbours(&self, node: usize) -> &[(usize, usize)] {
        &self.adjacency[self.offsets[node]..self.offsets[node + 1]]
    }

    /// `y = Â x` with `Â = D^-1/2 A D^-1/2`.
    pub fn propagate(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        self.propagate_with(x, &self.coeffs)
    }

    /// Propagation with explicit per-edge coefficients.
    pub fn propagate_with(&self, x: ArrayView2<'_, f64>, coeffs: &[f64]) -> Array2<f64> {
        let d = x.ncols();
        let mut y = Array2::zeros((self.n_nodes(), d));
        for v in 0..self.n_nodes() {
            let mut row = y.row_mut(v);
            let out = row.as_slice_mut().unwrap();
            for &(nb, e) in self.neighbours(v) {
                let c = coeffs[e];
                let src = x.row(nb);
                for (o, s) in out.iter_mut().zip(src.iter()) {
                    *o += c * s;
                }
            }
        }
        y
    }

    /// All layers `e^(0..=L)`.
    pub fn layers(&self, ego: ArrayView2<'_, f64>, n_layers: usize) -> Vec<Array2<f64>> {
        let mut layers = Vec::with_capacity(n_layers + 1);
        layers.push(ego.to_owned());
        for l in 0..n_layers {
            let next = self.propagate(layers[l].view());
            layers.push(next);
        }
        layers
    }

    /// Mean of layers `0..=L`.
    pub fn smooth(&self, ego: ArrayView2<'_, f64>, n_layers: usize) -> Array2<f64> {
        let layers = self.layers(ego, n_layers);
        layer_mean(&layers)
    }
}

pub fn layer_mean(layers: &[Array2<f64>]) -> Array2<f64> {
    let mut out = layers[0].clone();
    for l in &layers[1..] {
        out += l;
    }
    out /= layers.len() as f64;
    out
}

/// Score matrix `E_U E_I^T` from stacked node embeddings.
pub fn dot_scores(nodes: ArrayView2<'_, f64>, n_users: usize) -> Array2<f64> {
    let users = nodes.slice(s![..n_users, ..]);
    let items = nodes.slice(s![n_users.., ..]);
    users.dot(&items.t())
}

/// Stacks user rows over item rows.
pub fn stack_nodes(users: ArrayView2<'_, f64>, items: ArrayView2<'_, f64>) -> Array2<f64> {
    ndarray::concatenate(Axis(0), &[users, items]).expect("equal embedding width")
}
