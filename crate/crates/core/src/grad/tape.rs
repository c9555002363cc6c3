//! A small reverse-mode tape over the coarse operations of the relaxed forward.
//!
//! Nodes are appended in evaluation order, so the node list is already a
//! topological order. The backward sweep visits each node once, in reverse,
//! and pushes its adjoint to its inputs.

use std::sync::Arc;

use ndarray::{Array2, Axis};

use crate::data::InteractionGraph;
use crate::error::{Error, Result};
use crate::metrics::{approx_ndcg, RelevanceJudgements};
use crate::models::Propagator;

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Scalar(f64),
    Vector(Vec<f64>),
    Matrix(Array2<f64>),
}

impl Value {
    pub fn scalar(&self) -> f64 {
        match self {
            Value::Scalar(v) => *v,
            _ => panic!("expected scalar"),
        }
    }

    pub fn vector(&self) -> &[f64] {
        match self {
            Value::Vector(v) => v,
            _ => panic!("expected vector"),
        }
    }

    pub fn matrix(&self) -> &Array2<f64> {
        match self {
            Value::Matrix(m) => m,
            _ => panic!("expected matrix"),
        }
    }

    fn zeros_like(&self) -> Value {
        match self {
            Value::Scalar(_) => Value::Scalar(0.0),
            Value::Vector(v) => Value::Vector(vec![0.0; v.len()]),
            Value::Matrix(m) => Value::Matrix(Array2::zeros(m.dim())),
        }
    }

    fn add_assign(&mut self, other: &Value) {
        match (self, other) {
            (Value::Scalar(a), Value::Scalar(b)) => *a += b,
            (Value::Vector(a), Value::Vector(b)) => a.iter_mut().zip(b).for_each(|(x, y)| *x += y),
            (Value::Matrix(a), Value::Matrix(b)) => *a += b,
            _ => panic!("adjoint shape mismatch"),
        }
    }

    fn is_finite(&self) -> bool {
        match self {
            Value::Scalar(v) => v.is_finite(),
            Value::Vector(v) => v.iter().all(|x| x.is_finite()),
            Value::Matrix(m) => m.iter().all(|x| x.is_finite()),
        }
    }
}

/// Everything the smooth-NDCG node needs besides its score input.
#[derive(Debug)]
pub struct SmoothNdcgContext {
    pub users: Vec<usize>,
    pub judgements: Arc<RelevanceJudgements>,
    pub train: Arc<InteractionGraph>,
    pub k: usize,
    pub tau: f64,
}

#[derive(Debug, Clone)]
pub enum Op {
    /// Differentiable input.
    Parameter,
    /// Input without an adjoint.
    Constant,
    Sigmoid(NodeId),
    /// Per-edge `w_e * d_u^-1/2 * d_i^-1/2` over base edges (weight 1) followed by candidates.
    NormalizedCoefficients { weights: NodeId, structure: Arc<Propagator> },
    Propagate { coeffs: NodeId, input: NodeId, structure: Arc<Propagator> },
    Mean(Vec<NodeId>),
    /// Rows `users` of the user block times the item block transposed.
    Scores { nodes: NodeId, users: Arc<Vec<usize>>, n_users: usize },
    /// Mean smooth NDCG; the score gradient is cached at forward time.
    SmoothNdcg { scores: NodeId, context: Arc<SmoothNdcgContext> },
    SquaredDifference(NodeId, NodeId),
    /// `1/2 * sigmoid(sum w^2)`.
    DistancePenalty(NodeId),
    WeightedSum(Vec<(NodeId, f64)>),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Parameter => "parameter",
            Op::Constant => "constant",
            Op::Sigmoid(_) => "sigmoid",
            Op::NormalizedCoefficients { .. } => "normalized_coefficients",
            Op::Propagate { .. } => "propagate",
            Op::Mean(_) => "layer_mean",
            Op::Scores { .. } => "scores",
            Op::SmoothNdcg { .. } => "smooth_ndcg",
            Op::SquaredDifference(..) => "squared_difference",
            Op::DistancePenalty(_) => "distance_penalty",
            Op::WeightedSum(_) => "weighted_sum",
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Value,
    /// Auxiliary forward output (smooth-NDCG score gradient).
    cache: Option<Array2<f64>>,
}

#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn sigmoid(x: f64) -> f64 {
    crate::metrics::approx::sigmoid(x)
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Value {
        &self.nodes[id].value
    }

    pub fn op(&self, id: NodeId) -> &Op {
        &self.nodes[id].op
    }

    pub fn parameter(&mut self, value: Value) -> NodeId {
        self.nodes.push(Node {
            op: Op::Parameter,
            value,
            cache: None,
        });
        self.nodes.len() - 1
    }

    pub fn constant(&mut self, value: Value) -> NodeId {
        self.nodes.push(Node {
            op: Op::Constant,
            value,
            cache: None,
        });
        self.nodes.len() - 1
    }

    /// Records `op`, evaluating it against the current input values.
    pub fn push(&mut self, op: Op) -> Result<NodeId> {
        let id = self.nodes.len();
        let (value, cache) = self.eval(&op)?;
        if !value.is_finite() {
            return Err(Error::NonFinite {
                node: format!("{} (node {id})", op.name()),
            });
        }
        self.nodes.push(Node { op, value, cache });
        Ok(id)
    }

    /// Replaces a parameter's value and re-evaluates every node; returns the value of `output`.
    pub fn replay(&mut self, param: NodeId, value: Value, output: NodeId) -> Result<f64> {
        self.nodes[param].value = value;
        for id in 0..self.nodes.len() {
            if matches!(self.nodes[id].op, Op::Parameter | Op::Constant) {
                continue;
            }
            let (value, cache) = self.eval(&self.nodes[id].op.clone())?;
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    node: format!("{} (node {id})", self.nodes[id].op.name()),
                });
            }
            self.nodes[id].value = value;
            self.nodes[id].cache = cache;
        }
        Ok(self.nodes[output].value.scalar())
    }

    fn eval(&self, op: &Op) -> Result<(Value, Option<Array2<f64>>)> {
        let v = |id: NodeId| &self.nodes[id].value;
        Ok(match op {
            Op::Parameter | Op::Constant => unreachable!("leaves are not evaluated"),
            Op::Sigmoid(x) => (Value::Vector(v(*x).vector().iter().map(|&p| sigmoid(p)).collect()), None),
            Op::NormalizedCoefficients { weights, structure } => {
                let (coeffs, _, _) = normalized_coefficients(structure, v(*weights).vector());
                (Value::Vector(coeffs), None)
            }
            Op::Propagate {
                coeffs,
                input,
                structure,
            } => (
                Value::Matrix(structure.propagate_with(v(*input).matrix().view(), v(*coeffs).vector())),
                None,
            ),
            Op::Mean(inputs) => {
                let mut acc = v(inputs[0]).matrix().clone();
                for &i in &inputs[1..] {
                    acc += v(i).matrix();
                }
                acc /= inputs.len() as f64;
                (Value::Matrix(acc), None)
            }
            Op::Scores {
                nodes,
                users,
                n_users,
            } => {
                let f = v(*nodes).matrix();
                let rows = f.select(Axis(0), users);
                let items = f.slice(ndarray::s![*n_users.., ..]);
                (Value::Matrix(rows.dot(&items.t())), None)
            }
            Op::SmoothNdcg { scores, context } => {
                let out = approx_ndcg(
                    v(*scores).matrix().view(),
                    &context.users,
                    &context.judgements,
                    &context.train,
                    context.k,
                    context.tau,
                    true,
                )?;
                (Value::Scalar(out.value), Some(out.d_scores))
            }
            Op::SquaredDifference(a, b) => {
                let d = v(*a).scalar() - v(*b).scalar();
                (Value::Scalar(d * d), None)
            }
            Op::DistancePenalty(w) => {
                let s: f64 = v(*w).vector().iter().map(|x| x * x).sum();
                (Value::Scalar(0.5 * sigmoid(s)), None)
            }
            Op::WeightedSum(terms) => (
                Value::Scalar(terms.iter().map(|&(id, c)| c * v(id).scalar()).sum()),
                None,
            ),
        })
    }

    /// Adjoints of every node with respect to the scalar `output`.
    pub fn backward(&self, output: NodeId) -> Vec<Option<Value>> {
        let mut adj: Vec<Option<Value>> = vec![None; self.nodes.len()];
        adj[output] = Some(Value::Scalar(1.0));
        for id in (0..=output).rev() {
            let Some(g) = adj[id].take() else { continue };
            let node = &self.nodes[id];
            let contributions = self.node_backward(node, &g);
            adj[id] = Some(g);
            for (input, c) in contributions {
                match &mut adj[input] {
                    Some(existing) => existing.add_assign(&c),
                    slot @ None => *slot = Some(c),
                }
            }
        }
        adj
    }

    fn node_backward(&self, node: &Node, g: &Value) -> Vec<(NodeId, Value)> {
        let v = |id: NodeId| &self.nodes[id].value;
        match &node.op {
            Op::Parameter | Op::Constant => vec![],
            Op::Sigmoid(x) => {
                let out = node.value.vector();
                let gv = g.vector();
                let d = out.iter().zip(gv).map(|(s, g)| g * s * (1.0 - s)).collect();
                vec![(*x, Value::Vector(d))]
            }
            Op::NormalizedCoefficients { weights, structure } => {
                let w = v(*weights).vector();
                let d = normalized_coefficients_backward(structure, w, g.vector());
                vec![(*weights, Value::Vector(d))]
            }
            Op::Propagate {
                coeffs,
                input,
                structure,
            } => {
                let gy = g.matrix();
                let x = v(*input).matrix();
                let c = v(*coeffs).vector();
                let dx = structure.propagate_with(gy.view(), c);
                let nu = structure.n_users;
                let dc: Vec<f64> = structure
                    .edges
                    .iter()
                    .map(|&(u, i)| gy.row(u).dot(&x.row(nu + i)) + gy.row(nu + i).dot(&x.row(u)))
                    .collect();
                let mut out = vec![(*coeffs, Value::Vector(dc))];
                if !matches!(self.nodes[*input].op, Op::Constant) {
                    out.push((*input, Value::Matrix(dx)));
                }
                out
            }
            Op::Mean(inputs) => {
                let share = g.matrix() / inputs.len() as f64;
                inputs
                    .iter()
                    .filter(|&&i| !matches!(self.nodes[i].op, Op::Constant))
                    .map(|&i| (i, Value::Matrix(share.clone())))
                    .collect()
            }
            Op::Scores {
                nodes,
                users,
                n_users,
            } => {
                let f = v(*nodes).matrix();
                let gs = g.matrix();
                let items = f.slice(ndarray::s![*n_users.., ..]);
                let rows = f.select(Axis(0), users);
                let mut df = Array2::zeros(f.dim());
                let d_rows = gs.dot(&items);
                for (r, &u) in users.iter().enumerate() {
                    let mut row = df.row_mut(u);
                    row += &d_rows.row(r);
                }
                let d_items = gs.t().dot(&rows);
                let mut block = df.slice_mut(ndarray::s![*n_users.., ..]);
                block += &d_items;
                vec![(*nodes, Value::Matrix(df))]
            }
            Op::SmoothNdcg { scores, .. } => {
                let cached = node.cache.as_ref().expect("smooth ndcg caches its gradient");
                vec![(*scores, Value::Matrix(cached * g.scalar()))]
            }
            Op::SquaredDifference(a, b) => {
                let d = 2.0 * (v(*a).scalar() - v(*b).scalar()) * g.scalar();
                vec![(*a, Value::Scalar(d)), (*b, Value::Scalar(-d))]
            }
            Op::DistancePenalty(w) => {
                let w = v(*w).vector();
                let s: f64 = w.iter().map(|x| x * x).sum();
                let sg = sigmoid(s);
                // d/dw_e [1/2 sigmoid(s)] = sigmoid'(s) * w_e
                let scale = sg * (1.0 - sg) * g.scalar();
                let id = match &node.op {
                    Op::DistancePenalty(id) => *id,
                    _ => unreachable!(),
                };
                vec![(id, Value::Vector(w.iter().map(|x| scale * x).collect()))]
            }
            Op::WeightedSum(terms) => terms
                .iter()
                .map(|&(id, c)| (id, Value::Scalar(c * g.scalar())))
                .collect(),
        }
    }

    /// Adjoint of `param`, zero when the output does not depend on it.
    pub fn gradient(&self, output: NodeId, param: NodeId) -> Value {
        self.backward(output)[param]
            .clone()
            .unwrap_or_else(|| self.nodes[param].value.zeros_like())
    }
}

/// Returns per-edge coefficients, weighted degrees and inverse square-root degrees.
/// `weights` covers only the candidate edges that follow the base edges in `structure`.
pub(crate) fn normalized_coefficients(structure: &Propagator, weights: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n_base = structure.edges.len() - weights.len();
    let nu = structure.n_users;
    let mut deg = vec![0.0; structure.n_nodes()];
    let weight = |e: usize| if e < n_base { 1.0 } else { weights[e - n_base] };
    for (e, &(u, i)) in structure.edges.iter().enumerate() {
        let w = weight(e);
        deg[u] += w;
        deg[nu + i] += w;
    }
    let inv: Vec<f64> = deg.iter().map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 }).collect();
    let coeffs = structure
        .edges
        .iter()
        .enumerate()
        .map(|(e, &(u, i))| weight(e) * inv[u] * inv[nu + i])
        .collect();
    (coeffs, deg, inv)
}

fn normalized_coefficients_backward(structure: &Propagator, weights: &[f64], d_coeffs: &[f64]) -> Vec<f64> {
    let n_base = structure.edges.len() - weights.len();
    let nu = structure.n_users;
    let (_, deg, inv) = normalized_coefficients(structure, weights);
    let weight = |e: usize| if e < n_base { 1.0 } else { weights[e - n_base] };
    let mut d_inv = vec![0.0; deg.len()];
    let mut d_w = vec![0.0; weights.len()];
    for (e, &(u, i)) in structure.edges.iter().enumerate() {
        let g = d_coeffs[e];
        if g == 0.0 {
            continue;
        }
        let w = weight(e);
        d_inv[u] += g * w * inv[nu + i];
        d_inv[nu + i] += g * w * inv[u];
        if e >= n_base {
            d_w[e - n_base] += g * inv[u] * inv[nu + i];
        }
    }
    // inv = deg^-1/2  =>  d inv / d deg = -1/2 deg^-3/2
    let d_deg: Vec<f64> = deg
        .iter()
        .zip(&d_inv)
        .map(|(&d, &g)| if d > 0.0 { -0.5 * g * d.powf(-1.5) } else { 0.0 })
        .collect();
    for (k, &(u, i)) in structure.edges[n_base..].iter().enumerate() {
        d_w[k] += d_deg[u] + d_deg[nu + i];
    }
    d_w
}
