use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::svd_path::{svd_path_gradient, SvdGradient};
use super::tape::{NodeId, Op, SmoothNdcgContext, Tape, Value};
use crate::data::{GroupId, GroupPartition, InteractionGraph};
use crate::error::{Error, Result};
use crate::metrics::{approx_ndcg, RelevanceJudgements, DEFAULT_K, DEFAULT_TAU};
use crate::models::{ModelKind, Propagator, RelaxedGraph, TrainedModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObjectiveConfig {
    /// Weight of the distance term.
    pub beta: f64,
    pub tau: f64,
    pub k: usize,
    pub svd_gradient: SvdGradient,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self {
            beta: 0.5,
            tau: DEFAULT_TAU,
            k: DEFAULT_K,
            svd_gradient: SvdGradient::FiniteDifference { step: 1e-5 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_fair: f64,
    pub l_dist: f64,
    pub total: f64,
    pub ndcg_group1: f64,
    pub ndcg_group2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossAndGradient {
    pub loss: LossBreakdown,
    /// One entry per candidate, with respect to `p`.
    pub gradient: Vec<f64>,
    pub warnings: Vec<String>,
}

pub(crate) fn distance_term(weights: &[f64]) -> f64 {
    0.5 * crate::metrics::approx::sigmoid(weights.iter().map(|w| w * w).sum())
}

/// Nodes of a recorded LightGCN loss.
#[derive(Debug, Clone)]
struct Recorded {
    tape: Tape,
    p: NodeId,
    l_fair: NodeId,
    l_dist: NodeId,
    ndcg: [NodeId; 2],
    total: NodeId,
}

/// The augmentation loss of a frozen model over a fixed candidate set.
///
/// Group NDCGs are smooth estimates over validation relevance, restricted to
/// users that have at least one relevant item.
#[derive(Debug, Clone)]
pub struct FairnessObjective<'a> {
    pub model: &'a TrainedModel,
    pub train: Arc<InteractionGraph>,
    pub candidates: &'a [(usize, usize)],
    pub judgements: Arc<RelevanceJudgements>,
    pub groups: [Arc<Vec<usize>>; 2],
    pub config: ObjectiveConfig,
    recorded: Option<Recorded>,
}

impl<'a> FairnessObjective<'a> {
    pub fn new(
        model: &'a TrainedModel,
        train: Arc<InteractionGraph>,
        candidates: &'a [(usize, usize)],
        partition: &GroupPartition,
        judgements: Arc<RelevanceJudgements>,
        config: ObjectiveConfig,
    ) -> Result<Self> {
        if !model.augmentable() {
            return Err(Error::Contract(format!(
                "{} does not consume the graph at inference; augmentation has no effect",
                model.kind()
            )));
        }
        if !(config.tau > 0.0) || config.k == 0 || !(config.beta >= 0.0) {
            return Err(Error::Parameter("objective needs tau > 0, k > 0, beta >= 0".into()));
        }
        // validates shapes and disjointness from the training graph
        RelaxedGraph::new(&train, candidates, vec![0.0; candidates.len()])?;
        if model.n_users != train.n_users() || model.n_items != train.n_items() {
            return Err(Error::Contract("model and graph disagree on shape".into()));
        }
        let evaluated = |g: GroupId| -> Arc<Vec<usize>> {
            Arc::new(
                (0..train.n_users())
                    .filter(|&u| partition.group_of(u) == Some(g) && !judgements.relevant(u).is_empty())
                    .collect(),
            )
        };
        let groups = [evaluated(GroupId::First), evaluated(GroupId::Second)];
        Ok(Self {
            model,
            train,
            candidates,
            judgements,
            groups,
            config,
            recorded: None,
        })
    }

    pub fn n_candidates(&self) -> usize {
        self.candidates.len()
    }

    fn check_len(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.candidates.len() {
            return Err(Error::Contract(format!(
                "perturbation has {} entries for {} candidates",
                p.len(),
                self.candidates.len()
            )));
        }
        Ok(())
    }

    /// Loss at `p` without derivatives.
    pub fn loss(&mut self, p: &[f64]) -> Result<LossBreakdown> {
        self.check_len(p)?;
        match self.model.kind() {
            ModelKind::LightGcn => {
                self.replay(p)?;
                Ok(self.breakdown())
            }
            _ => self.spectral_loss(p),
        }
    }

    pub fn loss_and_gradient(&mut self, p: &[f64]) -> Result<LossAndGradient> {
        self.check_len(p)?;
        if p.is_empty() {
            let loss = self.loss(p)?;
            return Ok(LossAndGradient {
                loss,
                gradient: Vec::new(),
                warnings: Vec::new(),
            });
        }
        match self.model.kind() {
            ModelKind::LightGcn => {
                self.replay(p)?;
                let rec = self.recorded.as_ref().unwrap();
                let gradient = rec.tape.gradient(rec.total, rec.p).vector().to_vec();
                Ok(LossAndGradient {
                    loss: self.breakdown(),
                    gradient,
                    warnings: Vec::new(),
                })
            }
            _ => svd_path_gradient(self, p),
        }
    }

    /// The recorded trace of the LightGCN loss, built on first use.
    pub fn trace(&mut self, p: &[f64]) -> Result<&Tape> {
        self.replay(p)?;
        Ok(&self.recorded.as_ref().unwrap().tape)
    }

    fn replay(&mut self, p: &[f64]) -> Result<()> {
        if self.model.kind() != ModelKind::LightGcn {
            return Err(Error::Contract("trace recording covers the message-passing path".into()));
        }
        match &mut self.recorded {
            Some(rec) => {
                rec.tape.replay(rec.p, Value::Vector(p.to_vec()), rec.total)?;
            }
            None => self.recorded = Some(self.record(p)?),
        }
        Ok(())
    }

    fn record(&self, p: &[f64]) -> Result<Recorded> {
        let relaxed = RelaxedGraph::new(&self.train, self.candidates, vec![0.0; self.candidates.len()])?;
        let structure = Arc::new(Propagator::from_relaxed(&relaxed));
        let ego = self.model.embeddings()?.stacked();
        let n_users = self.train.n_users();

        let mut t = Tape::new();
        let p_id = t.parameter(Value::Vector(p.to_vec()));
        let w = t.push(Op::Sigmoid(p_id))?;
        let coeffs = t.push(Op::NormalizedCoefficients {
            weights: w,
            structure: structure.clone(),
        })?;
        let mut layers = vec![t.constant(Value::Matrix(ego))];
        for _ in 0..self.model.config.layers {
            let prev = *layers.last().unwrap();
            layers.push(t.push(Op::Propagate {
                coeffs,
                input: prev,
                structure: structure.clone(),
            })?);
        }
        let nodes = t.push(Op::Mean(layers))?;
        let mut ndcg = [0; 2];
        for (g, users) in self.groups.iter().enumerate() {
            let scores = t.push(Op::Scores {
                nodes,
                users: users.clone(),
                n_users,
            })?;
            ndcg[g] = t.push(Op::SmoothNdcg {
                scores,
                context: Arc::new(SmoothNdcgContext {
                    users: users.to_vec(),
                    judgements: self.judgements.clone(),
                    train: self.train.clone(),
                    k: self.config.k,
                    tau: self.config.tau,
                }),
            })?;
        }
        let l_fair = t.push(Op::SquaredDifference(ndcg[0], ndcg[1]))?;
        let l_dist = t.push(Op::DistancePenalty(w))?;
        let total = t.push(Op::WeightedSum(vec![(l_fair, 1.0), (l_dist, self.config.beta)]))?;
        Ok(Recorded {
            tape: t,
            p: p_id,
            l_fair,
            l_dist,
            ndcg,
            total,
        })
    }

    fn breakdown(&self) -> LossBreakdown {
        let rec = self.recorded.as_ref().unwrap();
        let v = |id| rec.tape.value(id).scalar();
        LossBreakdown {
            l_fair: v(rec.l_fair),
            l_dist: v(rec.l_dist),
            total: v(rec.total),
            ndcg_group1: v(rec.ndcg[0]),
            ndcg_group2: v(rec.ndcg[1]),
        }
    }

    /// Smooth group NDCGs from a full score matrix, with optional score gradients.
    pub(crate) fn group_ndcg(
        &self,
        scores: &ndarray::Array2<f64>,
        with_grad: bool,
    ) -> Result<[(f64, ndarray::Array2<f64>); 2]> {
        let mut out = Vec::with_capacity(2);
        for users in &self.groups {
            let rows = scores.select(ndarray::Axis(0), users);
            let r = approx_ndcg(
                rows.view(),
                users,
                &self.judgements,
                &self.train,
                self.config.k,
                self.config.tau,
                with_grad,
            )?;
            out.push((r.value, r.d_scores));
        }
        let b = out.pop().unwrap();
        let a = out.pop().unwrap();
        Ok([a, b])
    }

    pub(crate) fn spectral_loss(&self, p: &[f64]) -> Result<LossBreakdown> {
        let weights: Vec<f64> = p.iter().map(|&x| crate::metrics::approx::sigmoid(x)).collect();
        let relaxed = RelaxedGraph::new(&self.train, self.candidates, weights.clone())?;
        let scores = self.model.scores(&relaxed)?;
        if !scores.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite { node: "spectral scores".into() });
        }
        let [(m1, _), (m2, _)] = self.group_ndcg(&scores, false)?;
        Ok(self.combine(m1, m2, &weights))
    }

    pub(crate) fn combine(&self, m1: f64, m2: f64, weights: &[f64]) -> LossBreakdown {
        let l_fair = (m1 - m2) * (m1 - m2);
        let l_dist = distance_term(weights);
        LossBreakdown {
            l_fair,
            l_dist,
            total: l_fair + self.config.beta * l_dist,
            ndcg_group1: m1,
            ndcg_group2: m2,
        }
    }
}
