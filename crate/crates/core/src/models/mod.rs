//! Graph recommenders with frozen-parameter forward passes over perturbed graphs.

mod checkpoint;
pub mod lightgcn;
pub mod optim;
pub mod svd;
pub mod svdgcn;
mod topn;
mod train;

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use lightgcn::Propagator;
pub use svdgcn::{renormalize, svdgcn_augment_feedback, SpectralBasis};
pub use topn::{evaluate, recommend_topn, TopN};
pub use train::train;

use crate::data::InteractionGraph;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[serde(rename = "lightgcn")]
    LightGcn,
    #[serde(rename = "svdgcn")]
    SvdGcn,
    #[serde(rename = "svdgcn_s")]
    SvdGcnS,
    MfBpr,
}

impl ModelKind {
    /// Whether inference consumes the graph, so post-training edge additions change outputs.
    pub fn augmentable(self) -> bool {
        matches!(self, ModelKind::LightGcn | ModelKind::SvdGcn)
    }

    pub fn is_gnn(self) -> bool {
        !matches!(self, ModelKind::MfBpr)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::LightGcn => "lightgcn",
            ModelKind::SvdGcn => "svdgcn",
            ModelKind::SvdGcnS => "svdgcn_s",
            ModelKind::MfBpr => "mf_bpr",
        }
    }

    fn code(self) -> u8 {
        match self {
            ModelKind::LightGcn => 1,
            ModelKind::SvdGcn => 2,
            ModelKind::SvdGcnS => 3,
            ModelKind::MfBpr => 4,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            1 => ModelKind::LightGcn,
            2 => ModelKind::SvdGcn,
            3 => ModelKind::SvdGcnS,
            4 => ModelKind::MfBpr,
            _ => return None,
        })
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lightgcn" => Ok(ModelKind::LightGcn),
            "svdgcn" => Ok(ModelKind::SvdGcn),
            "svdgcn_s" => Ok(ModelKind::SvdGcnS),
            "mf_bpr" => Ok(ModelKind::MfBpr),
            other => Err(Error::Config(format!("unknown model kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub embedding_size: usize,
    pub layers: usize,
    pub negatives_per_positive: usize,
    pub train_epochs: usize,
    pub learning_rate: f64,
    /// Positive interactions per mini-batch.
    pub batch_size: usize,
    pub l2_reg: f64,
    pub seed: u64,
    pub svd_rank: usize,
    pub svd_alpha: f64,
    pub zeta_gamma: f64,
    /// Cutoff of the validation NDCG used for epoch selection.
    pub eval_k: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::LightGcn,
            embedding_size: 64,
            layers: 3,
            negatives_per_positive: 10,
            train_epochs: 100,
            learning_rate: 1e-3,
            batch_size: 256,
            l2_reg: 1e-4,
            seed: 0,
            svd_rank: 32,
            svd_alpha: 3.0,
            zeta_gamma: 1.0,
            eval_k: 10,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("embedding_size", self.embedding_size),
            ("negatives_per_positive", self.negatives_per_positive),
            ("train_epochs", self.train_epochs),
            ("batch_size", self.batch_size),
            ("svd_rank", self.svd_rank),
            ("eval_k", self.eval_k),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.svd_alpha < 0.0 {
            return Err(Error::Config("svd_alpha must be nonnegative".into()));
        }
        Ok(())
    }
}

/// User and item embeddings, `|U| x d` and `|I| x d`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub users: Array2<f64>,
    pub items: Array2<f64>,
}

impl EmbeddingTable {
    pub fn dim(&self) -> usize {
        self.users.ncols()
    }

    pub fn stacked(&self) -> Array2<f64> {
        lightgcn::stack_nodes(self.users.view(), self.items.view())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    /// Ego embeddings (LightGCN) or factor matrices (MF-BPR).
    Embeddings(EmbeddingTable),
    /// Projection `W` of SVD-GCN, `rank x d`.
    Projection(Array2<f64>),
    /// SVD-GCN-S has nothing to learn.
    None,
}

/// A base graph plus candidate edges at continuous weights.
#[derive(Debug, Clone)]
pub struct RelaxedGraph<'a> {
    pub base: &'a InteractionGraph,
    pub candidates: &'a [(usize, usize)],
    pub weights: Vec<f64>,
}

impl<'a> RelaxedGraph<'a> {
    pub fn new(base: &'a InteractionGraph, candidates: &'a [(usize, usize)], weights: Vec<f64>) -> Result<Self> {
        if candidates.len() != weights.len() {
            return Err(Error::Contract("weights not aligned with candidates".into()));
        }
        if let Some(&(u, i)) = candidates.iter().find(|&&(u, i)| base.has_edge(u, i)) {
            return Err(Error::Contract(format!("candidate ({u}, {i}) already in the graph")));
        }
        Ok(Self {
            base,
            candidates,
            weights,
        })
    }

    pub fn plain(base: &'a InteractionGraph) -> Self {
        Self {
            base,
            candidates: &[],
            weights: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub config: ModelConfig,
    pub n_users: usize,
    pub n_items: usize,
    pub params: Params,
    /// 1-based epoch with the best validation NDCG; 0 when nothing is trained.
    pub best_epoch: usize,
    /// Mean validation NDCG after each epoch.
    pub validation_curve: Vec<f64>,
    pub warnings: Vec<String>,
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        self.config.kind
    }

    pub fn augmentable(&self) -> bool {
        self.kind().augmentable()
    }

    pub fn embeddings(&self) -> Result<&EmbeddingTable> {
        match &self.params {
            Params::Embeddings(t) => Ok(t),
            _ => Err(Error::Contract(format!("{} has no embedding table", self.kind()))),
        }
    }

    fn check_shape(&self, graph: &InteractionGraph) -> Result<()> {
        if graph.n_users() != self.n_users || graph.n_items() != self.n_items {
            return Err(Error::Contract(format!(
                "graph is {}x{}, model was trained on {}x{}",
                graph.n_users(),
                graph.n_items(),
                self.n_users,
                self.n_items
            )));
        }
        Ok(())
    }

    /// Score matrix `|U| x |I|` of the frozen model over `graph`.
    pub fn scores(&self, graph: &RelaxedGraph<'_>) -> Result<Array2<f64>> {
        self.check_shape(graph.base)?;
        match self.kind() {
            ModelKind::LightGcn => self.lightgcn_forward(graph),
            ModelKind::SvdGcn | ModelKind::SvdGcnS => self.svdgcn_forward(graph),
            ModelKind::MfBpr => self.mf_forward(),
        }
    }

    /// Propagates the ego embeddings over the relaxed graph and scores by dot product.
    pub fn lightgcn_forward(&self, graph: &RelaxedGraph<'_>) -> Result<Array2<f64>> {
        if self.kind() != ModelKind::LightGcn {
            return Err(Error::Contract(format!("lightgcn forward on {}", self.kind())));
        }
        let ego = self.embeddings()?.stacked();
        let prop = Propagator::from_relaxed(graph);
        let nodes = prop.smooth(ego.view(), self.config.layers);
        Ok(lightgcn::dot_scores(nodes.view(), self.n_users))
    }

    pub fn spectral_basis(&self, graph: &RelaxedGraph<'_>) -> Result<SpectralBasis> {
        let r = svdgcn_augment_feedback(graph.base, graph.candidates, Some(&graph.weights))?;
        SpectralBasis::new(&renormalize(&r, self.config.svd_alpha), self.config.svd_rank, self.config.zeta_gamma)
    }

    pub fn svdgcn_forward(&self, graph: &RelaxedGraph<'_>) -> Result<Array2<f64>> {
        let basis = self.spectral_basis(graph)?;
        if basis.boundary_degenerate {
            log::warn!(
                "repeated singular value at truncation rank {}; gradients may be ill-defined",
                basis.rank
            );
        }
        match (&self.params, self.kind()) {
            (Params::Projection(w), ModelKind::SvdGcn) => Ok(basis.scores_parametric(w)),
            (_, ModelKind::SvdGcnS) => Ok(basis.scores_nonparametric()),
            _ => Err(Error::Contract(format!("svd forward on {}", self.kind()))),
        }
    }

    pub fn mf_forward(&self) -> Result<Array2<f64>> {
        if self.kind() != ModelKind::MfBpr {
            return Err(Error::Contract(format!("mf forward on {}", self.kind())));
        }
        let t = self.embeddings()?;
        Ok(t.users.dot(&t.items.t()))
    }
}
